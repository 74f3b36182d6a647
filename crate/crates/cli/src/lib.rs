//! Command-line front end for the penalty-projection experiments.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{dispatch, exit_status, Command, Outcome};
pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Options accepted both before and after the subcommand. Overrides from
/// both positions apply in command-line order.
#[derive(Clone, Debug, Default, Args)]
pub struct Common {
    /// Configuration file (`[section]` headers and `key = value` lines).
    #[arg(short, long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set scheme.nu=0.5`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory; takes precedence over every other source.
    #[arg(short, long, value_name = "DIR")]
    pub output: Option<PathBuf>,
}

impl Common {
    fn then(mut self, later: Common) -> Common {
        self.config = later.config.or(self.config);
        self.overrides.extend(later.overrides);
        self.output = later.output.or(self.output);
        self
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "penproj",
    version,
    about = "Penalty-projection schemes for stochastic Navier–Stokes"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Run one path of `scheme.scheme` and write per-step diagnostics.
    Simulate {
        /// Checkpoint to continue from.
        #[arg(long, value_name = "FILE")]
        resume: Option<PathBuf>,
        /// Also write the state after this step.
        #[arg(long, value_name = "STEP")]
        checkpoint_at: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo strong-rate study against a fine direct reference.
    Convergence {
        #[command(flatten)]
        common: Common,
    },
    /// Uniform-in-k stability sweep.
    Stability {
        #[command(flatten)]
        common: Common,
    },
    /// Deterministic Taylor–Green convergence check.
    TaylorGreen {
        #[command(flatten)]
        common: Common,
    },
    /// Check the splitting of the penalized solution into its auxiliary parts.
    Decompose {
        #[command(flatten)]
        common: Common,
    },
    /// Statistical checks on the noise increments.
    NoiseCheck {
        #[command(flatten)]
        common: Common,
    },
}

impl Sub {
    /// Splits into the command and the options given after it.
    pub fn split(self) -> (Command, Common) {
        match self {
            Sub::Simulate {
                resume,
                checkpoint_at,
                common,
            } => (
                Command::Simulate {
                    resume,
                    checkpoint_at,
                },
                common,
            ),
            Sub::Convergence { common } => (Command::Convergence, common),
            Sub::Stability { common } => (Command::Stability, common),
            Sub::TaylorGreen { common } => (Command::TaylorGreen, common),
            Sub::Decompose { common } => (Command::Decompose, common),
            Sub::NoiseCheck { common } => (Command::NoiseCheck, common),
        }
    }
}

/// Layers the configuration sources: defaults, file, the output-directory
/// environment variable, `--set` overrides, then `--output`.
pub fn load_config(opts: &Common, env_output: Option<OsString>) -> CliResult<RunConfig> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            RunConfig::parse_unvalidated(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(dir) = env_output {
        cfg.output.dir = dir.into();
    }
    for (i, assignment) in opts.overrides.iter().enumerate() {
        cfg.apply_override(assignment, i + 1)?;
    }
    if let Some(dir) = &opts.output {
        cfg.output.dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args`, runs the subcommand, prints its summary and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (command, later) = cli.command.split();
    let opts = cli.common.then(later);
    let result = load_config(&opts, std::env::var_os(config::OUTPUT_DIR_ENV))
        .and_then(|cfg| dispatch(&command, &cfg));
    match &result {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            if !outcome.passed {
                eprintln!("error: check failed");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_status(&result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn options_before_and_after_the_subcommand_combine() {
        let cli = Cli::try_parse_from([
            "penproj",
            "--set",
            "grid.n=16",
            "-o",
            "a",
            "simulate",
            "--set",
            "grid.n=8",
            "--set",
            "scheme.steps=4",
        ])
        .unwrap();
        let (command, later) = cli.command.split();
        assert_eq!(command.name(), "simulate");
        let opts = cli.common.then(later);
        assert_eq!(opts.overrides, ["grid.n=16", "grid.n=8", "scheme.steps=4"]);
        let cfg = load_config(&opts, Some("env".into())).unwrap();
        assert_eq!((cfg.grid.n, cfg.scheme.steps), (8, 4));
        assert_eq!(cfg.output.dir, PathBuf::from("a"));
    }
}
