//! Empirical law of the stochastic sign against its closed form.
//!
//! `cargo run --example sign_operator`

use stosign::{sign_law, snr_metrics, stochastic_sign, DenseVector, RngStream};

fn main() -> stosign::Result<()> {
    let x = DenseVector::from_vec(vec![0.9, -0.3, 0.0, 0.05, -1.0]);
    let g = DenseVector::from_vec(vec![1.0, 1.0, 0.5, 0.1, 1.0]);
    let draws = 200_000;

    let mut rng = RngStream::new(7, 0);
    let mut sum = vec![0.0; x.len()];
    let mut plus = vec![0u32; x.len()];
    for _ in 0..draws {
        let s = stochastic_sign(&x, &g, &mut rng)?;
        for (i, &v) in s.as_slice().iter().enumerate() {
            sum[i] += f64::from(v);
            plus[i] += u32::from(v == 1);
        }
    }

    println!("{:>3} {:>8} {:>8} {:>9} {:>9} {:>8}", "i", "x/G", "mean", "P(+1)", "empirical", "var");
    for (i, law) in sign_law(&x, &g)?.iter().enumerate() {
        println!(
            "{:>3} {:>8.4} {:>8.4} {:>9.4} {:>9.4} {:>8.4}",
            i,
            law.mean,
            sum[i] / draws as f64,
            law.p_plus,
            f64::from(plus[i]) / draws as f64,
            law.variance
        );
    }

    let snr = snr_metrics(&x, &g)?;
    println!("rms(x/G) = {:.4}, total variance = {:.4}", snr.rms_of_ratio, snr.total_variance);
    Ok(())
}
