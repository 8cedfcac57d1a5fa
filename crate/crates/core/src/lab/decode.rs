//! Exact small-blocklength decoders.

use rand::Rng;

use super::code::HccCode;
use crate::error::{Error, Result};
use crate::gld::{BoundMetric, DecodingMetric};
use crate::prob::{ChannelModel, CondPmf, User};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    /// `(m, i)`: cloud and satellite.
    Pair(usize, usize),
    /// Cloud index only.
    Cloud(usize),
}

fn check_output(code: &HccCode, out: &[usize], w: &CondPmf) -> Result<()> {
    if out.len() != code.n() {
        return Err(Error::ShapeMismatch(format!(
            "output length {} vs n = {}",
            out.len(),
            code.n()
        )));
    }
    if code.nx() != w.n_from() {
        return Err(Error::ShapeMismatch("code and channel input alphabets differ".into()));
    }
    if let Some(b) = out.iter().find(|&&b| b >= w.n_to()) {
        return Err(Error::Index(format!("output symbol {b}")));
    }
    Ok(())
}

/// `ln W(out | x)` summed from the joint `(x, o)` counts in a fixed order, so
/// codewords with the same joint type score identically.
fn log_likelihood(x: &[usize], out: &[usize], w: &CondPmf) -> f64 {
    let no = w.n_to();
    let mut counts = vec![0u32; w.n_from() * no];
    for (&a, &b) in x.iter().zip(out) {
        counts[a * no + b] += 1;
    }
    let mut s = 0.0;
    for (c, &k) in counts.iter().enumerate() {
        if k > 0 {
            s += k as f64 * w.get(c / no, c % no).ln();
        }
    }
    s
}

fn log_sum_exp(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| b.total_cmp(a));
    let top = v[0];
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + v.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

/// Maximum-likelihood decoding of `(m, i)` from `y`; ties go to the
/// lexicographically smallest pair.
pub fn decode_ml_strong(code: &HccCode, y: &[usize], channel: &ChannelModel) -> Result<(usize, usize)> {
    let w = channel.w1();
    check_output(code, y, w)?;
    let mut best = (f64::NEG_INFINITY, (0, 0));
    for m in 0..code.m_z() {
        for i in 0..code.m_y() {
            let s = log_likelihood(code.word(m, i), y, w);
            if s > best.0 {
                best = (s, (m, i));
            }
        }
    }
    Ok(best.1)
}

/// `ln sum_i W_2(z | x_{mi})` for every cloud.
pub fn bin_scores(code: &HccCode, z: &[usize], w: &CondPmf) -> Vec<f64> {
    (0..code.m_z())
        .map(|m| {
            let mut s: Vec<f64> = (0..code.m_y()).map(|i| log_likelihood(code.word(m, i), z, w)).collect();
            log_sum_exp(&mut s)
        })
        .collect()
}

/// Bin-index decoding of the cloud from `z`; ties go to the smallest index.
pub fn decode_weak_bin(code: &HccCode, z: &[usize], channel: &ChannelModel) -> Result<usize> {
    let w = channel.w2();
    check_output(code, z, w)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (m, s) in bin_scores(code, z, w).into_iter().enumerate() {
        if s > best.0 {
            best = (s, m);
        }
    }
    Ok(best.1)
}

/// `n g(P̂_{U X O})` for codeword `(m, i)`.
fn metric_score(code: &HccCode, m: usize, i: usize, out: &[usize], g: &BoundMetric, no: usize) -> f64 {
    let (nx, n) = (code.nx(), code.n() as f64);
    let mut q = vec![0.0; code.nu() * nx * no];
    for ((&u, &x), &o) in code.center(m).iter().zip(code.word(m, i)).zip(out) {
        q[(u * nx + x) * no + o] += 1.0 / n;
    }
    n * g.g(&q)
}

/// Decision probabilities of the generalized likelihood decoder: indexed by
/// `m * M_y + i` for the strong user and by `m` for the weak user. When every
/// weight vanishes the decision is uniform.
pub fn gld_posterior(
    code: &HccCode,
    out: &[usize],
    g: &DecodingMetric,
    channel: &ChannelModel,
    user: User,
) -> Result<Vec<f64>> {
    let w = channel.for_user(user);
    check_output(code, out, w)?;
    let bound = g.bind(code.nu(), w)?;
    let no = w.n_to();
    let mut logw: Vec<f64> = match user {
        User::Strong => (0..code.m_z())
            .flat_map(|m| (0..code.m_y()).map(move |i| (m, i)))
            .map(|(m, i)| metric_score(code, m, i, out, &bound, no))
            .collect(),
        User::Weak => (0..code.m_z())
            .map(|m| {
                let mut s: Vec<f64> = (0..code.m_y())
                    .map(|i| metric_score(code, m, i, out, &bound, no))
                    .collect();
                log_sum_exp(&mut s)
            })
            .collect(),
    };
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY || top.is_nan() {
        let k = logw.len() as f64;
        return Ok(vec![1.0 / k; logw.len()]);
    }
    for v in &mut logw {
        *v = (*v - top).exp();
    }
    let z: f64 = logw.iter().sum();
    Ok(logw.into_iter().map(|v| v / z).collect())
}

/// Inverse-CDF draw from a probability vector.
pub(crate) fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return k;
        }
    }
    // Rounding left `acc` just below 1: fall back to the last positive entry.
    p.iter().rposition(|&v| v > 0.0).unwrap_or(0)
}

/// Randomized decision of the generalized likelihood decoder.
pub fn decode_gld<R: Rng + ?Sized>(
    code: &HccCode,
    out: &[usize],
    g: &DecodingMetric,
    channel: &ChannelModel,
    user: User,
    rng: &mut R,
) -> Result<Decision> {
    let p = gld_posterior(code, out, g, channel, user)?;
    let k = sample_index(&p, rng);
    Ok(match user {
        User::Strong => Decision::Pair(k / code.m_y(), k % code.m_y()),
        User::Weak => Decision::Cloud(k),
    })
}
