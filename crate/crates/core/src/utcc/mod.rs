//! Universal timed concurrent constraint programming: processes, the
//! internal/observable transition system, and traces.

pub mod derived;
pub mod engine;
mod process;
mod syntax;
pub mod trace;

pub use derived::{expand_derived, OUT_PRIME};
pub use engine::{congr_normalize, future, observe, run, Configuration, Engine, EngineOptions, TimeUnitResult};
pub use process::Process;
pub use syntax::parse_process;
pub use trace::{first_divergence, obs_equiv, Trace, UnitOutput};
