use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stosign::harness::{parse_seeds, run_experiment, ExperimentConfig, ExperimentKind};
use stosign::Error;

#[derive(Parser)]
#[command(name = "stosign", version, about = "Stochastic sign descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML config; its `[experiment] kind` must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Seed list (`1,2,3`) or inclusive range (`1..10`).
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory for CSV artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow horizons above the 1e7 step cap.
    #[arg(long)]
    override_guardrail: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run any experiment from a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Monte-Carlo check of the stochastic sign law.
    VerifySign(Common),
    /// SignSGD vs. stochastic sign on the two-dimensional counterexample.
    ConvexDemo(Common),
    /// Max-regret growth against a Rademacher adversary.
    OnlineRegret(Common),
    /// Block-restarted runs on a non-convex objective.
    Nonconvex {
        /// `exp` or `uniform`.
        #[arg(long)]
        variant: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Practical optimizers side by side.
    Ablate(Common),
    /// Exhaustive expected max-regret for a fixed learner.
    AdversaryBruteforce(Common),
}

fn build(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.kind() != kind {
                return Err(Error::Config(format!(
                    "config kind is '{}', subcommand is '{}'",
                    cfg.kind().id(),
                    kind.id()
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(kind),
    };
    apply(&mut cfg, &common.overrides)?;
    Ok(cfg)
}

fn apply(cfg: &mut ExperimentConfig, common: &Overrides) -> Result<(), Error> {
    if let Some(s) = &common.seeds {
        cfg.experiment.seeds = parse_seeds(s)?;
    }
    if let Some(out) = &common.out {
        cfg.experiment.out = Some(out.clone());
    }
    cfg.experiment.override_guardrail |= common.override_guardrail;
    cfg.validate()
}

fn config_for(command: Command) -> Result<ExperimentConfig, Error> {
    match command {
        Command::Run { config, overrides } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            apply(&mut cfg, &overrides)?;
            Ok(cfg)
        }
        Command::VerifySign(c) => build(ExperimentKind::VerifySign, &c),
        Command::ConvexDemo(c) => build(ExperimentKind::ConvexDemo, &c),
        Command::OnlineRegret(c) => build(ExperimentKind::OnlineRegret, &c),
        Command::Nonconvex { variant, common } => {
            let mut cfg = build(ExperimentKind::Nonconvex, &common)?;
            if let Some(v) = variant {
                cfg.nonconvex.variant = v;
                cfg.validate()?;
            }
            Ok(cfg)
        }
        Command::Ablate(c) => build(ExperimentKind::Ablate, &c),
        Command::AdversaryBruteforce(c) => build(ExperimentKind::AdversaryBruteforce, &c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = config_for(cli.command).and_then(|cfg| run_experiment(&cfg));
    match outcome {
        Ok(out) => {
            for c in &out.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}
