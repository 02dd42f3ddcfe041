//! `vlsmkit`: simulate, check and analyse the machines of the `vlsmkit`
//! library from scenario files.
//!
//! Exit codes: 0 success, 1 failed check or refuted equivalence, 2 usage
//! or parse error, 3 equivocators detected, 4 precondition failed,
//! 5 resource limit reached.

mod codec;
mod commands;
mod error;
mod scenario;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vlsmkit::explore::TraceMode;
use vlsmkit::Bound;

use crate::commands::{FmtKind, Kind, Outcome, Scope, WindowSpec};
use crate::error::CliError;
use crate::scenario::{Receiver, Scenario};

#[derive(Parser)]
#[command(
    name = "vlsmkit",
    version,
    about = "Bounded analysis of message-passing state machines"
)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    scenario: Option<String>,

    /// Exploration depth; defaults to the scenario's.
    #[arg(long, global = true)]
    depth: Option<usize>,

    /// Maximum number of explored items. Overrides VLSMKIT_CAP.
    #[arg(long, global = true)]
    cap: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Constrained,
    Valid,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Local,
    Global,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Fixed,
    Limited,
    ByzFixed,
    ByzLimited,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReceiverArg {
    Any,
    Equivocators,
}

#[derive(Clone, Copy, ValueEnum)]
enum FmtArg {
    Trace,
    State,
    Report,
}

#[derive(Subcommand)]
enum Command {
    /// Print a seeded random valid trace.
    Simulate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a trace file against the scenario's machine.
    Check {
        file: String,
        #[arg(long, value_enum, default_value = "constrained")]
        mode: ModeArg,
    },
    /// Report equivocators in a composite state or trace file.
    Detect {
        file: String,
        #[arg(long, value_enum, default_value = "global")]
        scope: ScopeArg,
    },
    /// Bounded equivalence of the equivocation models.
    Equivalence {
        /// Defaults to the one matching the scenario's adversary.
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        /// Overrides the scenario's receiver rule.
        #[arg(long, value_enum)]
        receiver: Option<ReceiverArg>,
        /// Rounds of the syntactic message window for Byzantine checks.
        #[arg(long, default_value_t = 1)]
        window_rounds: usize,
        /// Depth at which window messages must be valid.
        #[arg(long, default_value_t = 4)]
        window_depth: usize,
    },
    /// Parse a file and print it in canonical form.
    Fmt {
        file: String,
        #[arg(long, value_enum, default_value = "trace")]
        kind: FmtArg,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let path = cli
        .scenario
        .ok_or_else(|| CliError::Usage("--scenario is required".into()))?;
    let mut sc = Scenario::parse(&commands::read(&path)?)?;
    let depth = cli.depth.unwrap_or(sc.depth);
    let bound = Bound::depth(depth).with_cap(sc.cap(cli.cap)?);
    match cli.command {
        Command::Simulate { seed } => commands::simulate(&sc, depth, seed),
        Command::Check { file, mode } => {
            let mode = match mode {
                ModeArg::Constrained => TraceMode::Constrained,
                ModeArg::Valid => TraceMode::Valid,
            };
            commands::check(&sc, &file, mode, bound)
        }
        Command::Detect { file, scope } => {
            let scope = match scope {
                ScopeArg::Local => Scope::Local,
                ScopeArg::Global => Scope::Global,
            };
            commands::detect(&sc, &file, scope)
        }
        Command::Equivalence {
            kind,
            receiver,
            window_rounds,
            window_depth,
        } => {
            if let Some(r) = receiver {
                sc.receiver = match r {
                    ReceiverArg::Any => Receiver::Any,
                    ReceiverArg::Equivocators => Receiver::Equivocators,
                };
            }
            let kind = kind.map(|k| match k {
                KindArg::Fixed => Kind::Fixed,
                KindArg::Limited => Kind::Limited,
                KindArg::ByzFixed => Kind::ByzFixed,
                KindArg::ByzLimited => Kind::ByzLimited,
            });
            let window = WindowSpec {
                rounds: window_rounds,
                depth: window_depth,
            };
            commands::equivalence(&sc, kind, bound, &window)
        }
        Command::Fmt { file, kind } => {
            let kind = match kind {
                FmtArg::Trace => FmtKind::Trace,
                FmtArg::State => FmtKind::State,
                FmtArg::Report => FmtKind::Report,
            };
            commands::fmt(&sc, &file, kind)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.stdout.as_bytes());
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(vlsmkit::VlsmError::ResourceLimit { .. }) = e {
                eprintln!("hint: raise --cap or VLSMKIT_CAP");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
