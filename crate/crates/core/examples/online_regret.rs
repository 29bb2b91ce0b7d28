//! Max-regret of the online learner against random-sign linear losses.
//!
//! `cargo run --release --example online_regret`

use stosign::problems::rademacher_adversary;
use stosign::{run_online, BoxDomain, DenseVector, OnlineConfig, RngStream, StepSchedule};

fn main() -> stosign::Result<()> {
    let d = 4;
    let domain = BoxDomain::cube(d, -1.0, 1.0)?;
    let bound = DenseVector::filled(d, 1.0);
    let envelope = |t: usize| (2.0 + std::f64::consts::SQRT_2) * domain.diameter_inf() * bound.norms().l1 * (t as f64).sqrt();

    println!("{:>6} {:>10} {:>10} {:>10}", "T", "anytime", "fixed", "envelope");
    for horizon in [64, 256, 1024, 4096] {
        let mut mean = [0.0; 2];
        let seeds = 10;
        for seed in 0..seeds {
            for (j, schedule) in [StepSchedule::Anytime, StepSchedule::Fixed { horizon }].into_iter().enumerate() {
                let mut adv = rademacher_adversary(&mut RngStream::new(seed, 0), horizon, d, &bound)?;
                let mut cfg = OnlineConfig::new(horizon, domain.clone());
                cfg.schedule = schedule;
                let run = run_online(&mut adv, &cfg, &mut RngStream::new(seed, 1))?;
                mean[j] += run.final_max_regret().unwrap() / seeds as f64;
            }
        }
        println!("{horizon:>6} {:>10.2} {:>10.2} {:>10.2}", mean[0], mean[1], envelope(horizon));
    }
    Ok(())
}
