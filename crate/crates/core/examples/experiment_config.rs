//! Runs a TOML experiment and writes its CSVs to a temporary directory.
//!
//! `cargo run --release --example experiment_config [path/to/config.toml]`

use stosign::harness::{run_experiment, ExperimentConfig};

const INLINE: &str = r#"
[experiment]
kind = "online-regret"
seeds = [1, 2, 3, 4]

[online-regret]
dim = 4
horizons = [128, 512]
"#;

fn main() -> stosign::Result<()> {
    let mut cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path.as_ref())?,
        None => ExperimentConfig::from_toml_str(INLINE)?,
    };
    let dir = std::env::temp_dir().join(format!("stosign-{}", cfg.kind().id()));
    cfg.experiment.out = Some(dir);

    let out = run_experiment(&cfg)?;
    for c in &out.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for f in &out.files {
        println!("  {}", f.display());
    }
    let last = out.aggregate.iter().rfind(|r| r.metric == "regret_max_cum");
    if let Some(r) = last {
        println!("{} step {}: mean {:.3} median {:.3} ± {:.3}", r.series, r.step, r.mean, r.median, r.stderr);
    }
    std::process::exit(out.exit_code());
}
