//! Error-probability estimates for sampled codes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::code::HccCode;
use super::decode::{decode_ml_strong, decode_weak_bin, gld_posterior, sample_index};
use crate::error::{Error, Result};
use crate::gld::DecodingMetric;
use crate::prob::{ChannelModel, User};

/// Largest output space `|O|^n` summed over by [`exact_error`].
pub const MAX_EXACT_OUTPUTS: usize = 1 << 20;

/// Normal quantile for two-sided 95% intervals.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq)]
pub enum Decoder {
    /// Maximum likelihood over `(m, i)` at the strong receiver.
    MlStrong,
    /// Cloud-summed likelihood at the weak receiver.
    BinWeak,
    Gld {
        metric: DecodingMetric,
        user: User,
    },
}

impl Decoder {
    pub fn user(&self) -> User {
        match self {
            Decoder::MlStrong => User::Strong,
            Decoder::BinWeak => User::Weak,
            Decoder::Gld { user, .. } => *user,
        }
    }

    /// Probability of each candidate (pairs for the strong user, clouds for
    /// the weak user) being decided on `out`.
    fn decision_probs(&self, code: &HccCode, out: &[usize], channel: &ChannelModel) -> Result<Vec<f64>> {
        let k = match self.user() {
            User::Strong => code.m_z() * code.m_y(),
            User::Weak => code.m_z(),
        };
        match self {
            Decoder::MlStrong => {
                let (m, i) = decode_ml_strong(code, out, channel)?;
                let mut p = vec![0.0; k];
                p[m * code.m_y() + i] = 1.0;
                Ok(p)
            }
            Decoder::BinWeak => {
                let m = decode_weak_bin(code, out, channel)?;
                let mut p = vec![0.0; k];
                p[m] = 1.0;
                Ok(p)
            }
            Decoder::Gld { metric, user } => gld_posterior(code, out, metric, channel, *user),
        }
    }
}

/// Error estimate of one transmitted message.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageError {
    pub m: usize,
    /// Satellite index for strong-user rows; `None` for weak-user rows, which
    /// average over the satellites of cloud `m`.
    pub i: Option<usize>,
    pub errors: f64,
    pub trials: u64,
    pub probability: f64,
    /// Wilson 95% half-width; zero for exact computations.
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorEstimate {
    pub max_error: f64,
    pub max_half_width: f64,
    pub avg_error: f64,
    pub avg_half_width: f64,
    pub table: Vec<MessageError>,
}

/// Wilson 95% half-width for `errors` out of `trials`.
pub fn wilson_half_width(errors: f64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let p = errors / n;
    let z2 = Z95 * Z95;
    Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

fn summarize(table: Vec<MessageError>, exact: bool) -> ErrorEstimate {
    let (mut worst, mut err_sum, mut trial_sum) = (0usize, 0.0, 0u64);
    for (k, r) in table.iter().enumerate() {
        if r.probability > table[worst].probability {
            worst = k;
        }
        err_sum += r.errors;
        trial_sum += r.trials;
    }
    let avg_error = table.iter().map(|r| r.probability).sum::<f64>() / table.len() as f64;
    ErrorEstimate {
        max_error: table[worst].probability,
        max_half_width: table[worst].half_width,
        avg_error,
        avg_half_width: if exact {
            0.0
        } else {
            wilson_half_width(err_sum, trial_sum)
        },
        table,
    }
}

fn transmit<R: Rng + ?Sized>(x: &[usize], channel: &ChannelModel, user: User, rng: &mut R) -> Vec<usize> {
    let w = channel.for_user(user);
    x.iter().map(|&a| sample_index(w.row(a), rng)).collect()
}

fn is_correct(decoded: usize, m: usize, i: usize, code: &HccCode, user: User) -> bool {
    match user {
        User::Strong => decoded == m * code.m_y() + i,
        User::Weak => decoded == m,
    }
}

fn rows_from_pairs(code: &HccCode, user: User, per_pair: Vec<(f64, u64)>, exact: bool) -> Vec<MessageError> {
    let my = code.m_y();
    let row = |m, i, errors: f64, trials: u64| MessageError {
        m,
        i,
        errors,
        trials,
        probability: errors / trials as f64,
        half_width: if exact { 0.0 } else { wilson_half_width(errors, trials) },
    };
    match user {
        User::Strong => per_pair
            .into_iter()
            .enumerate()
            .map(|(k, (e, t))| row(k / my, Some(k % my), e, t))
            .collect(),
        User::Weak => per_pair
            .chunks(my)
            .enumerate()
            .map(|(m, c)| row(m, None, c.iter().map(|r| r.0).sum(), c.iter().map(|r| r.1).sum()))
            .collect(),
    }
}

/// Monte-Carlo error probabilities: `trials` channel uses per codeword
/// `(m, i)`. Each codeword owns an RNG seeded from `rng`, so results do not
/// depend on the thread count.
pub fn estimate_error<R: Rng + ?Sized>(
    code: &HccCode,
    channel: &ChannelModel,
    decoder: &Decoder,
    trials: u64,
    rng: &mut R,
) -> Result<ErrorEstimate> {
    if trials == 0 {
        return Err(Error::OutOfRange("trials must be at least 1".into()));
    }
    if channel.nx() != code.nx() {
        return Err(Error::ShapeMismatch("code and channel input alphabets differ".into()));
    }
    let user = decoder.user();
    let jobs: Vec<(usize, usize, u64)> = (0..code.m_z())
        .flat_map(|m| (0..code.m_y()).map(move |i| (m, i)))
        .map(|(m, i)| (m, i, rng.gen()))
        .collect();
    let per_pair = jobs
        .par_iter()
        .map(|&(m, i, seed)| -> Result<(f64, u64)> {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let mut errors = 0u64;
            for _ in 0..trials {
                let out = transmit(code.word(m, i), channel, user, &mut r);
                let p = decoder.decision_probs(code, &out, channel)?;
                if !is_correct(sample_index(&p, &mut r), m, i, code, user) {
                    errors += 1;
                }
            }
            Ok((errors as f64, trials))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(rows_from_pairs(code, user, per_pair, false), false))
}

/// Exact error probabilities by summing over every channel output.
pub fn exact_error(code: &HccCode, channel: &ChannelModel, decoder: &Decoder) -> Result<ErrorEstimate> {
    let user = decoder.user();
    let w = channel.for_user(user);
    if w.n_from() != code.nx() {
        return Err(Error::ShapeMismatch("code and channel input alphabets differ".into()));
    }
    let no = w.n_to();
    let outputs = (0..code.n()).try_fold(1usize, |acc, _| acc.checked_mul(no).filter(|&v| v <= MAX_EXACT_OUTPUTS));
    let outputs = outputs.ok_or_else(|| Error::BudgetExceeded(format!("{no}^{} outputs", code.n())))?;
    let pairs: Vec<(usize, usize)> = (0..code.m_z())
        .flat_map(|m| (0..code.m_y()).map(move |i| (m, i)))
        .collect();
    let n = code.n();
    let acc = (0..outputs)
        .into_par_iter()
        .map(|idx| -> Result<Vec<f64>> {
            let mut out = vec![0; n];
            let mut v = idx;
            for s in out.iter_mut().rev() {
                *s = v % no;
                v /= no;
            }
            let p = decoder.decision_probs(code, &out, channel)?;
            Ok(pairs
                .iter()
                .map(|&(m, i)| {
                    let lik: f64 = code.word(m, i).iter().zip(&out).map(|(&a, &b)| w.get(a, b)).product();
                    let k = match user {
                        User::Strong => m * code.m_y() + i,
                        User::Weak => m,
                    };
                    lik * (1.0 - p[k])
                })
                .collect())
        })
        .try_reduce(
            || vec![0.0; pairs.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let per_pair = acc.into_iter().map(|e| (e.clamp(0.0, 1.0), 1)).collect();
    Ok(summarize(rows_from_pairs(code, user, per_pair, true), true))
}

/// Illustrative expurgation: keeps the `keep` clouds with the smallest
/// estimated error (worst satellite for strong-user tables).
pub fn expurgate_clouds(code: &HccCode, estimate: &ErrorEstimate, keep: usize) -> Result<HccCode> {
    if keep == 0 || keep > code.m_z() {
        return Err(Error::OutOfRange(format!("keep {keep} of {} clouds", code.m_z())));
    }
    let mut cloud_err = vec![0.0f64; code.m_z()];
    for r in &estimate.table {
        let e = cloud_err
            .get_mut(r.m)
            .ok_or_else(|| Error::Index(format!("cloud {}", r.m)))?;
        *e = e.max(r.probability);
    }
    let mut order: Vec<usize> = (0..code.m_z()).collect();
    order.sort_by(|&a, &b| cloud_err[a].total_cmp(&cloud_err[b]).then(a.cmp(&b)));
    let mut kept = order[..keep].to_vec();
    kept.sort_unstable();
    code.select_clouds(&kept)
}
