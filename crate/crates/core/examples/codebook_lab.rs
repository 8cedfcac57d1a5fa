//! Samples hierarchical codes, estimates their error probabilities and checks
//! how codeword-pair type counts concentrate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use abcx::lab::{enumerator_concentration, estimate_error, exact_error, Decoder, HccCode};
use abcx::prob::{ChannelModel, EnsembleSpec, RatePair};

fn main() -> abcx::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let ensemble = EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.85, 0.15], vec![0.15, 0.85]])?;
    let channel = ChannelModel::bsc_pair(0.05, 0.1)?;
    let rates = RatePair::new(0.1, 0.1)?;

    for n in [8, 12] {
        let code = HccCode::sample(&ensemble, rates, n, &mut rng)?;
        let strong = estimate_error(&code, &channel, &Decoder::MlStrong, 2000, &mut rng)?;
        let weak = exact_error(&code, &channel, &Decoder::BinWeak)?;
        println!(
            "n={n}: {} clouds x {} satellites; strong ML {:.4} +- {:.4}; weak (exact) {:.4}",
            code.m_z(),
            code.m_y(),
            strong.avg_error,
            strong.avg_half_width,
            weak.avg_error
        );
    }

    let single = EnsembleSpec::from_vectors(&[1.0], &[vec![0.5, 0.5]])?;
    let rep = enumerator_concentration(&single, RatePair::new(0.05, 0.05)?, 32, 500, &mut rng)?;
    println!(
        "n=32: {} joint types, largest rate deviation {:.4}",
        rep.rows.len(),
        rep.max_deviation()
    );
    Ok(())
}
