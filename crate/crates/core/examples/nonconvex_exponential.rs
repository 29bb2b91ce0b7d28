//! Exponential random scaling on `Σ |x_i| / (1 + |x_i|)` with noisy gradients.
//!
//! Prints the stated schedule for a few targets, then runs a relaxed one.
//!
//! `cargo run --release --example nonconvex_exponential`

use stosign::nonconvex::{run_exponential, schedule_exponential, NonconvexOptions, Scaling, ScheduleParams};
use stosign::problems::NoiseModel;
use stosign::{toy_nonconvex, DenseVector, RngStream, StochasticOracle};

fn main() -> stosign::Result<()> {
    for (eps, delta) in [(1.0, 1.0), (0.1, 0.01), (0.01, 0.01)] {
        let p = schedule_exponential(1.0, delta, eps, 1.0)?;
        println!("ε={eps:<5} δ={delta:<5} K={:<6} N={:<9} D∞={:.3e} T={}", p.k, p.n, p.d_inf, p.horizon());
    }

    let d = 4;
    let (k, n, delta, eps) = (12, 60, 1.0, 1.0);
    let d_inf = f64::sqrt(eps) / (f64::sqrt(14.0 * delta) * n as f64);
    let params = ScheduleParams::relaxed(Scaling::Exponential, k, n, d_inf, delta)?;
    let noise = NoiseModel::BoundedUniform(DenseVector::filled(d, 0.2));
    let mut oracle = StochasticOracle::new(toy_nonconvex(d)?, noise, RngStream::new(3, 2))?;
    let x0 = DenseVector::filled(d, 2.0);
    let run = run_exponential(&mut oracle, &x0, &params, &NonconvexOptions::default(), &mut RngStream::new(3, 1))?;

    for b in &run.blocks {
        println!("block {:>2}  l1inf = {:.4}  radius = {:.3e}", b.k, b.l1inf, b.goldstein.radius);
    }
    println!("output block {} at {:?}", run.averages.output_index + 1, run.averages.output().as_slice());
    Ok(())
}
