//! Command-line front end: configuration, pipeline orchestration and
//! JSON reports.

pub mod commands;
pub mod config;
pub mod input;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{execute, Session, EXIT_ACCEPTANCE, EXIT_INPUT, EXIT_PASS, EXIT_SOLVER};
pub use config::{RunConfig, Samples};
pub use report::{Bound, Criterion, Record, Report};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "cproj-twistor", version, about = "Twistor construction and checks for c-projective data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    /// Run configuration (TOML or JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Instance file, overriding the configuration.
    #[arg(long, global = true)]
    pub instance: Option<PathBuf>,
    /// One-form selecting another representative of the class.
    #[arg(long, global = true)]
    pub rep: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replace a record tolerance, as `name=value`. Repeatable.
    #[arg(long = "tol-override", global = true)]
    pub tol_override: Vec<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workspace: Option<PathBuf>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Cmd {
    /// Validate the instance: symmetry, reality, type (1,1), leaf Weyl tensor.
    CheckInput,
    /// Leaves, fiber bases, gluing and real-structure diagnostics (cached).
    Build,
    /// Solve real twistor lines and check the quaternionic structure.
    Lines,
    /// The complex structure J_D on sampled lines.
    Jfield,
    /// Shifted connections and curvature membership on quaternionic charts.
    Holonomy,
    /// Every stage, with one verdict per acceptance criterion.
    All,
}

impl Cmd {
    pub fn name(self) -> &'static str {
        match self {
            Cmd::CheckInput => "check-input",
            Cmd::Build => "build",
            Cmd::Lines => "lines",
            Cmd::Jfield => "jfield",
            Cmd::Holonomy => "holonomy",
            Cmd::All => "all",
        }
    }
}

impl Cli {
    /// Config file merged with command-line flags.
    pub fn run_config(&self) -> crate::error::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let mut cfg: RunConfig = input::read_structured(p)?;
                // relative paths in the file are resolved against its directory
                let base = p.parent().map(PathBuf::from).unwrap_or_default();
                for path in [&mut cfg.instance, &mut cfg.rep, &mut cfg.chart].into_iter().flatten() {
                    if path.is_relative() {
                        *path = base.join(&*path);
                    }
                }
                for path in [&mut cfg.out, &mut cfg.workspace] {
                    if path.is_relative() {
                        *path = base.join(&*path);
                    }
                }
                cfg
            }
            None => RunConfig::default(),
        };
        if let Some(p) = &self.instance {
            cfg.instance = Some(p.clone());
        }
        if let Some(p) = &self.rep {
            cfg.rep = Some(p.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = &self.out {
            cfg.out = p.clone();
        }
        if let Some(p) = &self.workspace {
            cfg.workspace = p.clone();
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        cfg.apply_overrides(&self.tol_override)?;
        Ok(cfg)
    }
}

/// Parses arguments, runs the command, writes the report and returns the
/// exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
        }
    };
    let name = cli.command.name();
    let (report, code) = match cli.run_config() {
        Ok(cfg) => execute(name, cfg),
        Err(e) => {
            let fallback = RunConfig {
                out: cli.out.clone().unwrap_or_else(|| RunConfig::default().out),
                ..RunConfig::default()
            };
            let mut r = Report::new(name, &fallback);
            r.error = Some(commands::error_record(&e));
            (r, commands::exit_code(&e))
        }
    };
    print!("{}", report.summary());
    if let Err(e) = report.write(&report.config.out) {
        eprintln!("could not write report: {e}");
        return match e {
            Error::Io(_) => EXIT_INPUT,
            _ => EXIT_SOLVER,
        };
    }
    code
}
