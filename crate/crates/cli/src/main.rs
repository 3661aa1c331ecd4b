use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use solistab::runner::{self, ExperimentConfig, Kind};

/// Soliton stability experiments for generalized KdV.
#[derive(Parser)]
#[command(name = "solistab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default: `out/<subcommand>`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Seed of the randomized checks.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Profile residual, generalized kernel and biorthogonality.
    Soliton,
    /// Eigenvalues of the weighted linearized operator.
    Spectrum,
    /// Decay rate of the projected semigroup.
    Semigroup,
    /// Short-time smoothing exponents.
    Smoothing,
    /// Resolvent norms along a horizontal line.
    Resolvent,
    /// Plain evolution of soliton plus perturbation with invariant tracking.
    Evolve,
    /// Modulated stability run.
    Stability,
    /// Stability runs over a list of amplitudes.
    Sweep,
    /// The numbered acceptance criteria.
    Check,
    /// Randomized weighted-inequality suites.
    Inequalities,
}

impl Command {
    fn kind(self) -> Kind {
        match self {
            Command::Soliton => Kind::SolitonCheck,
            Command::Spectrum => Kind::Spectrum,
            Command::Semigroup => Kind::Semigroup,
            Command::Smoothing => Kind::Smoothing,
            Command::Resolvent => Kind::ResolventSweep,
            Command::Evolve => Kind::Evolve,
            Command::Stability => Kind::Stability,
            Command::Sweep => Kind::Sweep,
            Command::Check => Kind::Check,
            Command::Inequalities => Kind::InequalitySuite,
        }
    }

    fn dir_name(self) -> &'static str {
        match self {
            Command::Soliton => "soliton",
            Command::Spectrum => "spectrum",
            Command::Semigroup => "semigroup",
            Command::Smoothing => "smoothing",
            Command::Resolvent => "resolvent",
            Command::Evolve => "evolve",
            Command::Stability => "stability",
            Command::Sweep => "sweep",
            Command::Check => "check",
            Command::Inequalities => "inequalities",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    solistab::algebra_threads_from_env();
    let mut cfg = match &cli.common.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    cfg.kind = cli.command.kind();
    if let Some(s) = cli.common.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.common.jobs {
        cfg.jobs = j;
    }
    if let Some(o) = &cli.common.out {
        cfg.out = Some(o.display().to_string());
    }
    let violations = runner::validate(&cfg);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("config error: {v}");
        }
        return ExitCode::from(2);
    }
    let out = cfg.out.clone().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out").join(cli.command.dir_name()));
    match runner::run(&cfg, &out, &mut |line| eprintln!("{line}")) {
        Ok(rec) => {
            println!("{}", out.join("summary.json").display());
            if rec.failed_checks > 0 {
                eprintln!("{} check(s) failed", rec.failed_checks);
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
