//! `f(x) = |x₁ + x₂| + 2|x₁ − x₂|` on `[-1, 1]²` from `(0.8, 0.2)`.
//!
//! Deterministic SignSGD keeps `x₁ + x₂ = 1` and never gets below `f = 1`;
//! the stochastic sign learner drives the averaged iterate to the origin.
//!
//! `cargo run --release --example convex_counterexample`

use stosign::problems::fig1_signsgd_extended;
use stosign::{fig1_objective, run_online, BoxDomain, DenseVector, Objective, OnlineConfig, RngStream, StochasticOracle};

fn main() -> stosign::Result<()> {
    let horizon = 10_000;
    let f = fig1_objective();
    let domain = BoxDomain::cube(2, -1.0, 1.0)?;

    let sgd = fig1_signsgd_extended([0.8, 0.2], horizon, domain.diameter_inf());
    let last = sgd.iterates[horizon - 1];
    println!(
        "signsgd      x_T = ({:+.4}, {:+.4})  min f = {:.4}  |x1-x2| >= {:.2e}",
        last[0],
        last[1],
        sgd.losses.iter().cloned().fold(f64::INFINITY, f64::min),
        sgd.min_gap
    );

    let mut cfg = OnlineConfig::new(horizon, domain);
    cfg.x1 = Some(DenseVector::from_vec(vec![0.8, 0.2]));
    for seed in 1..=5 {
        let mut oracle = StochasticOracle::exact(fig1_objective());
        let run = run_online(&mut oracle, &cfg, &mut RngStream::new(seed, 1))?;
        println!(
            "stosign s={seed}  x̄_T = ({:+.4}, {:+.4})  f(x̄_T) = {:.5}",
            run.average[0],
            run.average[1],
            f.value(&run.average)
        );
    }
    Ok(())
}
