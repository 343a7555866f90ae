//! The `homog` command line.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_onto, Overrides, RunConfig};
use crate::error::{LabError, Result};
use crate::experiments::{execute, Command};
use crate::output::{output_paths, Manifest};
use crate::report::report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CHECKS: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "homog", version, about = "Random-conductance homogenization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Write one coefficient sample as a field file
    Gen(RunArgs),
    /// Periodic correctors
    Corrector(RunArgs),
    /// Homogenized tensor from periodic cells
    Rve(RunArgs),
    /// Flux correctors
    Sigma(RunArgs),
    /// Minimal radii
    Minrad(RunArgs),
    /// Corrector fluctuation profile
    Fluct(RunArgs),
    /// Dirichlet boundary correctors
    Boundary(RunArgs),
    /// Boundary-layer profile of the two-scale error
    Layer(RunArgs),
    /// Scaling of spatial gradient averages
    Clt(RunArgs),
    /// Large-scale Lipschitz probe
    Lipschitz(RunArgs),
    /// Green function columns
    Green(RunArgs),
    /// Annealed Green function decay
    Decay(RunArgs),
    /// Two-scale expansion error
    Expand(RunArgs),
    /// Adjoint sensitivity against finite differences
    Sensitivity(RunArgs),
    /// Spectral-gap variance inequality
    Sgap(RunArgs),
    /// Summarize the checks of a result directory
    Report(ReportArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Configuration file (`key = value`, optional sections)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Re-run the configuration recorded in a manifest
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Phase probability of the two-phase law
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Dimension
    #[arg(long)]
    pub d: Option<usize>,
    /// Domain sizes, comma separated
    #[arg(long = "L", value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Sample count
    #[arg(long = "N")]
    pub samples: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub moments: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory (a file path for `gen`)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Integrability exponent of the minimal radii
    #[arg(long = "mr-p")]
    pub mr_p: Option<f64>,
    #[arg(long = "c-theta")]
    pub c_theta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub dir: PathBuf,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            law: self.law.clone(),
            alpha: self.alpha,
            beta: self.beta,
            p: self.p,
            lambda: self.lambda,
            dim: self.d,
            sizes: self.sizes.clone(),
            samples: self.samples,
            moments: self.moments.clone(),
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
            tol: self.tol,
            max_iter: self.max_iter,
            theta: self.theta,
            gamma: self.gamma,
            minrad_p: self.mr_p,
            c_theta: self.c_theta,
        }
    }

    /// Defaults, then the manifest, then the config file, then flags.
    pub fn resolve(&self, command: Command) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.manifest {
            let m = Manifest::read(path)?;
            if m.command != command.name() {
                return Err(LabError::Config(format!("manifest {} records command '{}', not '{}'", path.display(), m.command, command.name())));
            }
            cfg = parse_onto(cfg, &m.config)?;
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
            cfg = parse_onto(cfg, &text)?;
        }
        self.overrides().apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Sub {
    fn split(&self) -> std::result::Result<(Command, &RunArgs), &ReportArgs> {
        let c = match self {
            Sub::Gen(a) => (Command::Gen, a),
            Sub::Corrector(a) => (Command::Corrector, a),
            Sub::Rve(a) => (Command::Rve, a),
            Sub::Sigma(a) => (Command::Sigma, a),
            Sub::Minrad(a) => (Command::Minrad, a),
            Sub::Fluct(a) => (Command::Fluct, a),
            Sub::Boundary(a) => (Command::Boundary, a),
            Sub::Layer(a) => (Command::Layer, a),
            Sub::Clt(a) => (Command::Clt, a),
            Sub::Lipschitz(a) => (Command::Lipschitz, a),
            Sub::Green(a) => (Command::Green, a),
            Sub::Decay(a) => (Command::Decay, a),
            Sub::Expand(a) => (Command::Expand, a),
            Sub::Sensitivity(a) => (Command::Sensitivity, a),
            Sub::Sgap(a) => (Command::Sgap, a),
            Sub::Report(r) => return Err(r),
        };
        Ok(c)
    }
}

fn exit_for(e: &LabError) -> i32 {
    eprintln!("error: {e}");
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_ERROR
    }
}

/// Parse `argv` and run; the return value is the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command.split() {
        Err(r) => match report(&r.dir) {
            Ok(rep) => {
                for l in &rep.lines {
                    println!("{l}");
                }
                if rep.passed() {
                    EXIT_OK
                } else {
                    EXIT_CHECKS
                }
            }
            Err(e) => exit_for(&e),
        },
        Ok((command, args)) => {
            let cfg = match args.resolve(command) {
                Ok(c) => c,
                Err(e) => return exit_for(&e),
            };
            match execute(command, &cfg) {
                Ok(outcome) => {
                    if command == Command::Gen {
                        println!("wrote {}", cfg.out.display());
                    } else {
                        let (csv, json, _) = output_paths(&cfg.out, command.name());
                        println!("wrote {} and {}", csv.display(), json.display());
                    }
                    for c in &outcome.summary.checks {
                        println!("{} {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                    }
                    EXIT_OK
                }
                Err(e) => exit_for(&e),
            }
        }
    }
}
