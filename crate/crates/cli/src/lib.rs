//! Command implementations behind the `sesscc` binary.
//!
//! Every command returns the text it would write; the binary decides where.

pub mod correspond;

use std::fmt;
use std::path::Path;

use serde::Serialize;

use sesscc_core::constraint::parse_constraint;
use sesscc_core::encode::{encode, encode_timed, EncodingContext};
use sesscc_core::fltl::{check_template, parse_templates, verdicts_to_jsonl, TemplateError};
use sesscc_core::hvk::{parse, records_to_jsonl, HvkProcess, HvkState, RoundRecord, Rule};
use sesscc_core::utcc::engine::DEFAULT_BUDGET;
use sesscc_core::utcc::{parse_process, Engine, EngineOptions, Trace};
use sesscc_core::{Constraint, EncodeError, EngineError, HvkError, SyntaxError, TraceError};

use correspond::{correspond_with, corrupted_encoding, CorrespondError};

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const NON_QUIESCENT: i32 = 3;
    pub const NON_DETERMINISTIC: i32 = 4;
    pub const STUCK: i32 = 5;
    pub const ENCODE: i32 = 6;
    pub const RUNTIME: i32 = 7;
    pub const DIVERGENCE: i32 = 8;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Hvk,
    HvkPlus,
    Utcc,
    EncodeThenRun,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "hvk" => Some(Mode::Hvk),
            "hvk+" => Some(Mode::HvkPlus),
            "utcc" => Some(Mode::Utcc),
            "encode-then-run" => Some(Mode::EncodeThenRun),
            _ => None,
        }
    }

    /// `.utcc` files are utcc programs; anything else is read as HVK.
    pub fn for_path(path: &Path) -> Mode {
        match path.extension().and_then(|e| e.to_str()) {
            Some("utcc") => Mode::Utcc,
            _ => Mode::Hvk,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: String,
    pub mode: Mode,
    /// Time units, or rounds for the HVK modes.
    pub units: usize,
    pub budget: usize,
    /// One constraint per unit; blank lines stand for `true`.
    pub inputs: Option<String>,
    pub force_pairing: bool,
    pub count_acceptances: bool,
    pub eager_expand: bool,
}

impl RunConfig {
    pub fn new(source: impl Into<String>, mode: Mode) -> Self {
        RunConfig {
            source: source.into(),
            mode,
            units: 20,
            budget: DEFAULT_BUDGET,
            inputs: None,
            force_pairing: false,
            count_acceptances: false,
            eager_expand: false,
        }
    }

    fn engine(&self) -> Engine {
        Engine::new(EngineOptions { budget: self.budget, eager_expand: self.eager_expand, keep_residuals: false })
    }

    fn context(&self, timed: bool) -> EncodingContext {
        EncodingContext { timed, counting: self.count_acceptances, ..EncodingContext::default() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{what}: {source}")]
    Syntax { what: &'static str, source: SyntaxError },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Hvk(#[from] HvkError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Usage(_) => exit::IO,
            CliError::Syntax { .. } | CliError::Trace(_) | CliError::Template(_) => exit::PARSE,
            CliError::Engine(EngineError::NonQuiescent { .. }) => exit::NON_QUIESCENT,
            CliError::Engine(_) => exit::RUNTIME,
            CliError::Hvk(HvkError::NonDeterministic { .. }) => exit::NON_DETERMINISTIC,
            CliError::Hvk(HvkError::Stuck) => exit::STUCK,
            CliError::Hvk(_) => exit::RUNTIME,
            CliError::Encode(_) => exit::ENCODE,
        }
    }
}

impl From<CorrespondError> for CliError {
    fn from(e: CorrespondError) -> Self {
        match e {
            CorrespondError::Timed => CliError::Usage(e.to_string()),
            CorrespondError::Hvk(e) => CliError::Hvk(e),
            CorrespondError::Encode(e) => CliError::Encode(e),
            CorrespondError::Engine(e) => CliError::Engine(e),
        }
    }
}

/// Command output plus the status to exit with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub output: String,
    pub status: i32,
    /// Human-oriented summary for stderr.
    pub note: Option<String>,
}

impl Outcome {
    fn ok(output: String) -> Self {
        Outcome { output, status: exit::OK, note: None }
    }
}

fn parse_hvk(src: &str) -> Result<HvkProcess, CliError> {
    parse(src).map_err(|source| CliError::Syntax { what: "program", source })
}

fn parse_inputs(src: &str) -> Result<Vec<Constraint>, CliError> {
    src.lines()
        .map(|l| {
            if l.trim().is_empty() {
                Ok(Constraint::True)
            } else {
                parse_constraint(l, &[]).map_err(|source| CliError::Syntax { what: "inputs", source })
            }
        })
        .collect()
}

/// The encoding used by `encode` and `encode-then-run`: timed when the
/// program uses a timed construct.
pub fn encode_program(p: &HvkProcess, cfg: &RunConfig) -> Result<sesscc_core::utcc::Process, CliError> {
    let timed = p.is_timed() || cfg.mode == Mode::HvkPlus;
    let ctx = cfg.context(timed);
    Ok(if timed { encode_timed(p, &ctx)? } else { encode(p, &ctx)? })
}

/// The utcc trace of the program, encoding it first when it is HVK.
pub fn utcc_trace(cfg: &RunConfig) -> Result<Trace, CliError> {
    let inputs = match &cfg.inputs {
        Some(s) => parse_inputs(s)?,
        None => Vec::new(),
    };
    let p = if cfg.mode == Mode::Utcc {
        parse_process(&cfg.source).map_err(|source| CliError::Syntax { what: "program", source })?
    } else {
        encode_program(&parse_hvk(&cfg.source)?, cfg)?
    };
    Ok(cfg.engine().run(&p, cfg.units, &inputs)?)
}

/// Outermost rounds; the second component tells whether the final state is
/// stuck (threads left that can never fire).
pub fn hvk_rounds(cfg: &RunConfig) -> Result<(Vec<RoundRecord>, bool), CliError> {
    let p = parse_hvk(&cfg.source)?;
    if cfg.mode == Mode::Hvk && p.is_timed() {
        return Err(CliError::Usage("program uses timed constructs; run it with --mode hvk+".into()));
    }
    let (mut st, unfolded) = HvkState::new(&p)?;
    st.force_pairing = cfg.force_pairing;
    let mut records = vec![record(&st, vec![Rule::Def; unfolded])];
    let mut last_fired = true;
    for _ in 0..cfg.units {
        let fired = st.round()?;
        last_fired = !fired.is_empty();
        records.push(record(&st, fired));
    }
    let live = st.nf.threads.iter().any(|t| match t {
        HvkProcess::Kill(_) => false,
        t => t.subject().is_none_or(|k| st.sessions.usable(k, st.round + 1)),
    });
    Ok((records, !last_fired && live))
}

fn record(st: &HvkState, fired: Vec<Rule>) -> RoundRecord {
    RoundRecord {
        round: st.round,
        threads: st.nf.threads.iter().map(|t| t.to_string()).collect(),
        fired_rules: fired.iter().map(Rule::to_string).collect(),
    }
}

pub fn cmd_run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.mode {
        Mode::Hvk | Mode::HvkPlus => {
            if cfg.inputs.is_some() {
                return Err(CliError::Usage("--inputs applies to utcc runs only".into()));
            }
            let (records, stuck) = hvk_rounds(cfg)?;
            let mut out = Outcome::ok(records_to_jsonl(&records));
            if stuck {
                out.status = exit::STUCK;
                out.note = Some(format!("stuck after {} rounds: no rule applies to the remaining threads", cfg.units));
            }
            Ok(out)
        }
        Mode::Utcc | Mode::EncodeThenRun => Ok(Outcome::ok(utcc_trace(cfg)?.to_jsonl())),
    }
}

pub fn cmd_encode(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = parse_hvk(&cfg.source)?;
    Ok(Outcome::ok(format!("{}\n", encode_program(&p, cfg)?)))
}

#[derive(Serialize)]
struct Summary {
    agree: bool,
    units: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_divergence: Option<usize>,
}

/// Per-unit rows as JSON lines, then a summary line. `corrupt` swaps in the
/// negative-control encoding.
pub fn cmd_correspond(cfg: &RunConfig, corrupt: bool) -> Result<Outcome, CliError> {
    let p = parse_hvk(&cfg.source)?;
    let untimed = |q: &HvkProcess| encode(q, &EncodingContext::untimed());
    let encoder: correspond::Encoder<'_> = if corrupt { &corrupted_encoding } else { &untimed };
    let report = correspond_with(&p, cfg.units, cfg.budget, encoder)?;
    let mut output = String::new();
    for row in &report.rows {
        output.push_str(&serde_json::to_string(row).expect("rows serialize"));
        output.push('\n');
    }
    let summary =
        Summary { agree: report.agrees(), units: report.rows.len(), first_divergence: report.first_divergence };
    output.push_str(&serde_json::to_string(&summary).expect("summary serializes"));
    output.push('\n');
    Ok(match report.first_divergence {
        None => Outcome { output, status: exit::OK, note: Some(format!("agreement over {} units", report.rows.len())) },
        Some(u) => Outcome { output, status: exit::DIVERGENCE, note: Some(format!("divergence at unit {u}")) },
    })
}

/// Where `verify` gets its trace from.
pub enum TraceSource<'a> {
    /// A trace file as written by `run`.
    Recorded(&'a str),
    Program(&'a RunConfig),
}

pub fn cmd_verify(source: TraceSource<'_>, templates: &str) -> Result<Outcome, CliError> {
    let templates = parse_templates(templates)?;
    let trace = match source {
        TraceSource::Recorded(s) => Trace::from_jsonl(s)?,
        // HVK programs are encoded and run whatever the mode.
        TraceSource::Program(cfg) => utcc_trace(cfg)?,
    };
    let verdicts: Vec<_> = templates.iter().map(|t| check_template(&trace, t)).collect();
    Ok(Outcome::ok(verdicts_to_jsonl(&verdicts)))
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Hvk => "hvk",
            Mode::HvkPlus => "hvk+",
            Mode::Utcc => "utcc",
            Mode::EncodeThenRun => "encode-then-run",
        })
    }
}
