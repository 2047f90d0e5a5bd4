use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kinetic_fluid::experiments::{run_experiment, ExperimentConfig, ExperimentKind, ResolvedConfig, SCHEMA};
use kinetic_fluid::Error;

#[derive(Parser)]
#[command(version, about = "Fourier-Hermite kinetic-fluid experiments", after_help = SCHEMA)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file; omitted fields take per-experiment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory, overriding `output_dir`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Random seed, overriding `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Velocity operators against the quadrature oracle, structural identities.
    OperatorVerify,
    /// Per-mode spectral gap survey and Lyapunov certificate.
    LinearSpectrum,
    /// Algebraic decay exponents of the linear semigroup.
    LinearDecay,
    /// Nonlinear run on the periodic torus.
    TorusRun,
    /// Nonlinear run from a localized bump in a large box.
    BoxRun,
    /// Box run with the L^p decay table.
    LpReport,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Self::OperatorVerify => ExperimentKind::OperatorVerify,
            Self::LinearSpectrum => ExperimentKind::LinearSpectrum,
            Self::LinearDecay => ExperimentKind::LinearDecay,
            Self::TorusRun => ExperimentKind::TorusRun,
            Self::BoxRun => ExperimentKind::BoxRun,
            Self::LpReport => ExperimentKind::LpReport,
        }
    }
}

fn load(cli: &Cli) -> kinetic_fluid::Result<ResolvedConfig> {
    let kind = cli.command.kind();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(kind),
    };
    if cfg.experiment != kind {
        return Err(Error::Config {
            path: "experiment".into(),
            message: format!("file selects {} but the subcommand is {}", cfg.experiment.name(), kind.name()),
        });
    }
    if let Some(dir) = &cli.output {
        cfg.output_dir = Some(dir.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    ResolvedConfig::resolve(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_experiment(&cfg) {
        Ok(summary) => {
            for c in &summary.checks {
                let tag = if c.pass { "PASS" } else if c.hard { "FAIL" } else { "SOFT-FAIL" };
                println!("{tag} {} = {:e} ({})", c.name, c.value, c.requirement);
            }
            if let Some(a) = &summary.abort {
                eprintln!("aborted: {a}");
            }
            println!(
                "{}: {:?} in {:.1} s, outputs in {}",
                summary.experiment,
                summary.status,
                summary.wall_time_s,
                cfg.output_dir.display()
            );
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(3)
        }
    }
}
