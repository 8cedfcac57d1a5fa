//! Weak-user expurgated exponents of both methods along `R_y` with `R_z = 0`,
//! showing where the second method overtakes the first.

use abcx::ml::{e_weak_ml1, e_weak_ml2};
use abcx::opt::SolverConfig;
use abcx::prob::{ChannelModel, EnsembleSpec, RatePair};

fn main() -> abcx::Result<()> {
    let ensemble = EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.85, 0.15], vec![0.15, 0.85]])?;
    let channel = ChannelModel::bsc_pair(0.0005, 0.001)?;
    let cfg = SolverConfig::default();
    println!("{:>6} {:>10} {:>10}", "R_y", "method 1", "method 2");
    for k in 0..10 {
        let r = RatePair::new(0.08 * k as f64, 0.0)?;
        let a = e_weak_ml1(r, &ensemble, &channel, &cfg)?.value;
        let b = e_weak_ml2(r, &ensemble, &channel, &cfg)?.value;
        println!("{:>6.2} {a:>10.6} {b:>10.6}{}", r.r_y, if b > a { "  *" } else { "" });
    }
    Ok(())
}
