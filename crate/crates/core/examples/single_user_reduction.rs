//! With a single cloud and `R_y = 0` the weak-user bound collapses to the
//! single-user expurgated exponent of a BSC, which has a one-parameter form.

use abcx::ml::e_weak_ml1;
use abcx::opt::SolverConfig;
use abcx::prob::{ChannelModel, EnsembleSpec, RatePair};

fn closed_form(p: f64, rate: f64) -> f64 {
    let d_b = -(2.0 * (p * (1.0 - p)).sqrt()).ln();
    let h = |x: f64| {
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            -x * x.ln() - (1.0 - x) * (1.0 - x).ln()
        }
    };
    // Off-diagonal mass d of a symmetric pair distribution.
    (0..=100_000)
        .map(|k| k as f64 / 100_000.0)
        .filter(|&d| std::f64::consts::LN_2 - h(d) <= rate)
        .map(|d| d * d_b + std::f64::consts::LN_2 - h(d))
        .fold(f64::INFINITY, f64::min)
        - rate
}

fn main() -> abcx::Result<()> {
    let ensemble = EnsembleSpec::from_vectors(&[1.0], &[vec![0.5, 0.5]])?;
    let p = 0.1;
    let channel = ChannelModel::bsc_pair(p, p)?;
    for r_z in [0.01, 0.05, 0.1, 0.2] {
        let lib = e_weak_ml1(RatePair::new(0.0, r_z)?, &ensemble, &channel, &SolverConfig::default())?.value;
        println!("R={r_z:.2}: library {lib:.6}, closed form {:.6}", closed_form(p, r_z));
    }
    Ok(())
}
