use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sesscc_cli::{
    cmd_correspond, cmd_encode, cmd_run, cmd_verify, exit, CliError, Mode, Outcome, RunConfig, TraceSource,
};
use sesscc_core::utcc::engine::DEFAULT_BUDGET;

/// Run session programs under reduction semantics or through their
/// constraint encoding, compare the two, and check temporal templates.
#[derive(Parser)]
#[command(name = "sesscc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program and write its trace (utcc) or round records (HVK).
    Run(Common),
    /// Print the utcc encoding of an HVK program.
    Encode(Common),
    /// Compare HVK rounds with the units of the encoded program.
    Correspond {
        #[command(flatten)]
        common: Common,
        /// Use the negative-control encoding with `req` and `acc` swapped.
        #[arg(long)]
        swap_req_acc: bool,
    },
    /// Check templates against a trace file or a program run.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Line-delimited template records.
        #[arg(long)]
        templates: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Program source (`.hvk` or `.utcc`), or a trace file (`.jsonl`) for verify.
    file: PathBuf,
    /// hvk, hvk+, utcc or encode-then-run. Defaults from the file.
    #[arg(long)]
    mode: Option<String>,
    /// Time units, or rounds for the HVK modes.
    #[arg(long, default_value_t = 20)]
    units: usize,
    /// Internal steps allowed per time unit.
    #[arg(long, env = "SESSCC_BUDGET", default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    /// Input constraints, one line per time unit.
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pair each thread with its first partner instead of rejecting ambiguity.
    #[arg(long)]
    force_pairing: bool,
    /// Record accepted sessions persistently as `sess(a, k)`.
    #[arg(long)]
    count_acceptances: bool,
    /// Expand derived utcc forms before the first unit.
    #[arg(long)]
    eager_expand: bool,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

impl Common {
    fn config(&self, default: impl FnOnce(&Path, &str) -> Mode) -> Result<RunConfig, CliError> {
        let source = read(&self.file)?;
        let mode = match &self.mode {
            Some(m) => Mode::parse(m).ok_or_else(|| CliError::Usage(format!("unknown mode `{m}`")))?,
            None => default(&self.file, &source),
        };
        if self.units == 0 {
            return Err(CliError::Usage("--units must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(CliError::Usage("--budget must be at least 1".into()));
        }
        let mut cfg = RunConfig::new(source, mode);
        cfg.units = self.units;
        cfg.budget = self.budget;
        cfg.inputs = self.inputs.as_deref().map(read).transpose()?;
        cfg.force_pairing = self.force_pairing;
        cfg.count_acceptances = self.count_acceptances;
        cfg.eager_expand = self.eager_expand;
        Ok(cfg)
    }
}

/// HVK sources run as hvk+ when they use a timed construct.
fn run_mode(path: &Path, src: &str) -> Mode {
    match Mode::for_path(path) {
        Mode::Hvk if sesscc_core::hvk::parse(src).is_ok_and(|p| p.is_timed()) => Mode::HvkPlus,
        m => m,
    }
}

fn execute(cli: &Cli) -> Result<(Outcome, Option<&Path>), CliError> {
    Ok(match &cli.command {
        Command::Run(c) => (cmd_run(&c.config(run_mode)?)?, c.out.as_deref()),
        Command::Encode(c) => (cmd_encode(&c.config(|_, _| Mode::Hvk)?)?, c.out.as_deref()),
        Command::Correspond { common, swap_req_acc } => {
            (cmd_correspond(&common.config(|_, _| Mode::Hvk)?, *swap_req_acc)?, common.out.as_deref())
        }
        Command::Verify { common, templates } => {
            let templates = read(templates)?;
            let outcome = if common.file.extension().is_some_and(|e| e == "jsonl") {
                cmd_verify(TraceSource::Recorded(&read(&common.file)?), &templates)?
            } else {
                let cfg = common.config(|p, _| match Mode::for_path(p) {
                    Mode::Utcc => Mode::Utcc,
                    _ => Mode::EncodeThenRun,
                })?;
                cmd_verify(TraceSource::Program(&cfg), &templates)?
            };
            (outcome, common.out.as_deref())
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::IO as u8 } else { exit::OK as u8 });
        }
    };
    match execute(&cli) {
        Ok((outcome, out)) => {
            let written = match out {
                Some(path) => fs::write(path, &outcome.output).map_err(|e| format!("{}: {e}", path.display())),
                None => {
                    print!("{}", outcome.output);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(exit::IO as u8);
            }
            if let Some(note) = outcome.note {
                eprintln!("{note}");
            }
            ExitCode::from(outcome.status as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
