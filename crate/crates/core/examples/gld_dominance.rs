//! Generalized-likelihood exponents against the bounds they dominate: the
//! likelihood metric against the first expurgation method and the
//! mutual-information metric against random coding.

use abcx::gld::{e_weak_gld, DecodingMetric};
use abcx::ml::e_weak_ml1;
use abcx::opt::SolverConfig;
use abcx::prob::{ChannelModel, EnsembleSpec, RatePair};
use abcx::rc::e_weak_rc;

fn main() -> abcx::Result<()> {
    let ensemble = EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.85, 0.15], vec![0.15, 0.85]])?;
    let channel = ChannelModel::bsc_pair(0.02, 0.05)?;
    let cfg = SolverConfig::default();
    let mi = DecodingMetric::MutualInfo { beta: 1.0 };
    println!(
        "{:>5} {:>5} {:>10} {:>10} {:>10} {:>10}",
        "R_y", "R_z", "gld-ll", "ml1", "gld-mi", "rc"
    );
    for (r_y, r_z) in [(0.0, 0.0), (0.05, 0.05), (0.1, 0.1), (0.2, 0.05)] {
        let r = RatePair::new(r_y, r_z)?;
        let ll = e_weak_gld(r, &ensemble, &channel, &DecodingMetric::Likelihood, &cfg)?.value;
        let ml = e_weak_ml1(r, &ensemble, &channel, &cfg)?.value;
        let gm = e_weak_gld(r, &ensemble, &channel, &mi, &cfg)?.value;
        let rc = e_weak_rc(r, &ensemble, &channel, &cfg)?.value;
        println!("{r_y:>5.2} {r_z:>5.2} {ll:>10.6} {ml:>10.6} {gm:>10.6} {rc:>10.6}");
    }
    Ok(())
}
