//! Strong-user expurgated exponents with their named components at `R_z = 0.2`.

use abcx::ml::{e_strong_ml1, e_strong_ml2};
use abcx::opt::SolverConfig;
use abcx::prob::{ChannelModel, EnsembleSpec, RatePair};

fn main() -> abcx::Result<()> {
    let ensemble = EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.85, 0.15], vec![0.15, 0.85]])?;
    let channel = ChannelModel::bsc_pair(0.0005, 0.001)?;
    let cfg = SolverConfig::default();
    for k in 0..6 {
        let r = RatePair::new(0.06 * k as f64, 0.2)?;
        for (name, res) in [
            ("method 1", e_strong_ml1(r, &ensemble, &channel, &cfg)?),
            ("method 2", e_strong_ml2(r, &ensemble, &channel, &cfg)?),
        ] {
            let parts: Vec<String> = res.components.iter().map(|(n, v)| format!("{n}={v:.5}")).collect();
            println!(
                "R_y={:.2} {name}: {:.6} (s={:.3}) [{}]",
                r.r_y,
                res.value,
                res.param.unwrap_or(f64::NAN),
                parts.join(", ")
            );
        }
    }
    Ok(())
}
