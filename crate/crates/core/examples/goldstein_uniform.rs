//! Uniform random scaling with `D∞ = δ/N`: every block stays inside a
//! `δ`-ball, so the block surrogate is a valid Goldstein-type certificate.
//!
//! `cargo run --release --example goldstein_uniform`

use stosign::nonconvex::{run_uniform, schedule_uniform, schedule_uniform_with, NonconvexOptions, UniformConstants};
use stosign::problems::NoiseModel;
use stosign::{toy_nonconvex, DenseVector, RngStream, StochasticOracle};

fn main() -> stosign::Result<()> {
    let stated = schedule_uniform(1.0, 1.0, 1.0, 1.0)?;
    let proof = schedule_uniform_with(1.0, 1.0, 1.0, 1.0, UniformConstants::proof())?;
    println!("stated K={} N={}   proof constant N={}", stated.k, stated.n, proof.n);

    let d = 2;
    let params = schedule_uniform(4.0, 0.5, 0.5, 2.0)?;
    println!("run: K={} N={} D∞={:.4} η={:.4e}", params.k, params.n, params.d_inf, params.eta(1));
    for seed in 1..=3 {
        let noise = NoiseModel::BoundedUniform(DenseVector::filled(d, 0.5));
        let mut oracle = StochasticOracle::new(toy_nonconvex(d)?, noise, RngStream::new(seed, 2))?;
        let x0 = DenseVector::from_vec(vec![1.0, -0.5]);
        let run = run_uniform(&mut oracle, &x0, &params, &NonconvexOptions::default(), &mut RngStream::new(seed, 1))?;
        let worst = run.blocks.iter().map(|b| b.goldstein.radius).fold(0.0, f64::max);
        println!(
            "seed {seed}: best ‖ḡ‖₁ = {:.4}  max radius = {:.4} (δ = {})  all ok: {}",
            run.best_surrogate(),
            worst,
            params.delta,
            run.all_radii_ok()
        );
    }
    Ok(())
}
