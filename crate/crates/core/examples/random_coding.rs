//! Random-coding exponents of both users over a small rate grid.

use abcx::opt::SolverConfig;
use abcx::prob::{ChannelModel, EnsembleSpec, RatePair};
use abcx::rc::{e_strong_rc, e_weak_rc};

fn main() -> abcx::Result<()> {
    let ensemble = EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.85, 0.15], vec![0.15, 0.85]])?;
    let channel = ChannelModel::bsc_pair(0.05, 0.1)?;
    let cfg = SolverConfig::default();
    println!("{:>6} {:>6} {:>10} {:>10}", "R_y", "R_z", "weak", "strong");
    for r_z in [0.0, 0.05, 0.1] {
        for r_y in [0.0, 0.1, 0.2, 0.3] {
            let r = RatePair::new(r_y, r_z)?;
            let weak = e_weak_rc(r, &ensemble, &channel, &cfg)?.value;
            let strong = e_strong_rc(r, &ensemble, &channel, &cfg)?.value;
            println!("{r_y:>6.2} {r_z:>6.2} {weak:>10.6} {strong:>10.6}");
        }
    }
    Ok(())
}
