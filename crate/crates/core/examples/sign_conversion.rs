//! The optimizer family on one noisy problem, plus what a sign conversion
//! does to a single AdamW step.
//!
//! `cargo run --release --example sign_conversion`

use stosign::optim::{train, TrainConfig};
use stosign::problems::NoiseModel;
use stosign::{toy_nonconvex, trick_matrix, DenseVector, FixedNoise, LrSchedule, OptimizerKind, PracticalState, RngStream, StochasticOracle};

fn main() -> stosign::Result<()> {
    let g = DenseVector::from_vec(vec![0.5, -0.01, 0.0]);
    for kind in [OptimizerKind::AdamW, OptimizerKind::SignAdamW] {
        let mut st = PracticalState::with_defaults(kind, DenseVector::filled(3, 1.0))?;
        let info = st.step(&g, 0.1, &mut FixedNoise::zero().with_sign(0.25))?;
        println!("{kind:<12} m̂ = {:?}  σ = {:?}  dir = {:?}", info.numerator.as_slice(), info.sigma.as_slice(), info.direction.as_slice());
    }

    let d = 16;
    let steps = 2000;
    println!("\n{:<15} {:>10} {:>10} {:>6} {:>6} {:>6}", "optimizer", "final f", "rms m/σ", "noise", "σ(m)", "inf");
    for row in trick_matrix() {
        let kind = row.kind;
        let noise = NoiseModel::BoundedUniform(DenseVector::filled(d, 0.5));
        let mut oracle = StochasticOracle::new(toy_nonconvex(d)?, noise, RngStream::new(11, 2))?;
        let cfg = TrainConfig {
            kind,
            hyper: kind.default_hyper(),
            schedule: LrSchedule::parse("cosine", 0.01, steps)?,
            steps,
            x1: DenseVector::filled(d, 1.5),
            record_iterates: false,
        };
        let run = train(&mut oracle, &cfg, &mut RngStream::new(11, 1))?;
        println!(
            "{:<15} {:>10.4} {:>10.4} {:>6} {:>6} {:>6}",
            kind.id(),
            run.record.summary_value("final_loss").unwrap(),
            run.final_snr.rms_of_ratio,
            row.structural_noise,
            row.sigma_depends_on_m,
            row.inf_norm_on_sigma
        );
    }
    Ok(())
}
