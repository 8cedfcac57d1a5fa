//! Type-class enumerators of a codebook and their ensemble averages.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::code::HccCode;
use crate::error::{Error, Result};
use crate::prob::{entropy_of, Alphabet, Axis, EnsembleSpec, JointPmf, RatePair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnumeratorKind {
    /// Other codewords of the transmitted cloud, typed on `(U, X, X')`.
    Inner,
    /// Codewords of other clouds, typed on `(U, X, U', X')`.
    Outer,
    /// Triplets `(i, m', j)` with `m' != m`, typed on `(U, X, U', X')`.
    Triplet,
}

#[derive(Clone, Debug)]
pub struct EnumeratorReport {
    pub kind: EnumeratorKind,
    pub joint_type: JointPmf,
    pub count: u64,
    /// Exponential growth rate of the ensemble-average count at the code's rates.
    pub expected_exponent: f64,
}

type TypeKey = Vec<u16>;

fn pair_key(code: &HccCode, a: (usize, usize), b: (usize, usize)) -> TypeKey {
    let (nu, nx) = (code.nu(), code.nx());
    let mut key = vec![0u16; nu * nx * nu * nx];
    let (u, x) = (code.center(a.0), code.word(a.0, a.1));
    let (up, xp) = (code.center(b.0), code.word(b.0, b.1));
    for k in 0..code.n() {
        key[((u[k] * nx + x[k]) * nu + up[k]) * nx + xp[k]] += 1;
    }
    key
}

fn inner_key(code: &HccCode, m: usize, i: usize, j: usize) -> TypeKey {
    let nx = code.nx();
    let mut key = vec![0u16; code.nu() * nx * nx];
    let (u, x, xp) = (code.center(m), code.word(m, i), code.word(m, j));
    for k in 0..code.n() {
        key[(u[k] * nx + x[k]) * nx + xp[k]] += 1;
    }
    key
}

fn to_pmf(key: &[u16], axes: Vec<Alphabet>, n: usize) -> Result<JointPmf> {
    JointPmf::new(axes, key.iter().map(|&c| c as f64 / n as f64).collect())
}

fn ent(counts: &[f64], total: f64) -> f64 {
    let p: Vec<f64> = counts.iter().map(|c| c / total).collect();
    entropy_of(&p)
}

/// `I(UX; U'X')` of a `(u, x, u', x')` count key.
fn pair_info(key: &[u16], ux: usize) -> f64 {
    let n: f64 = key.iter().map(|&c| c as f64).sum();
    let mut a = vec![0.0; ux];
    let mut b = vec![0.0; ux];
    for (c, &k) in key.iter().enumerate() {
        a[c / ux] += k as f64;
        b[c % ux] += k as f64;
    }
    let joint: Vec<f64> = key.iter().map(|&k| k as f64).collect();
    (ent(&a, n) + ent(&b, n) - ent(&joint, n)).max(0.0)
}

/// `I(X; X' | U)` of a `(u, x, x')` count key.
fn inner_info(key: &[u16], nu: usize, nx: usize) -> f64 {
    let n: f64 = key.iter().map(|&c| c as f64).sum();
    let mut ux = vec![0.0; nu * nx];
    let mut uxp = vec![0.0; nu * nx];
    let mut u = vec![0.0; nu];
    for (c, &k) in key.iter().enumerate() {
        let (a, x, xp) = (c / (nx * nx), (c / nx) % nx, c % nx);
        ux[a * nx + x] += k as f64;
        uxp[a * nx + xp] += k as f64;
        u[a] += k as f64;
    }
    let joint: Vec<f64> = key.iter().map(|&k| k as f64).collect();
    (ent(&ux, n) + ent(&uxp, n) - ent(&joint, n) - ent(&u, n)).max(0.0)
}

fn pair_axes(code: &HccCode) -> Vec<Alphabet> {
    vec![
        Alphabet::new(Axis::U, code.nu()),
        Alphabet::new(Axis::X, code.nx()),
        Alphabet::new(Axis::Up, code.nu()),
        Alphabet::new(Axis::Xp, code.nx()),
    ]
}

/// Triplet counts `N̂_m` keyed by joint type.
fn triplet_counts(code: &HccCode, m: usize, into: &mut BTreeMap<TypeKey, u64>) {
    for i in 0..code.m_y() {
        for mp in (0..code.m_z()).filter(|&mp| mp != m) {
            for j in 0..code.m_y() {
                *into.entry(pair_key(code, (m, i), (mp, j))).or_default() += 1;
            }
        }
    }
}

/// Exact enumerators seen from codeword `(m, i)`: inner, outer and triplet
/// counts per realized joint type.
pub fn enumerators(code: &HccCode, m: usize, i: usize) -> Result<Vec<EnumeratorReport>> {
    if m >= code.m_z() || i >= code.m_y() {
        return Err(Error::Index(format!(
            "codeword ({m}, {i}) outside {} x {}",
            code.m_z(),
            code.m_y()
        )));
    }
    let rates = code.realized_rates();
    let (nu, nx, n) = (code.nu(), code.nx(), code.n());
    let mut inner = BTreeMap::new();
    for j in (0..code.m_y()).filter(|&j| j != i) {
        *inner.entry(inner_key(code, m, i, j)).or_insert(0u64) += 1;
    }
    let mut outer = BTreeMap::new();
    for mp in (0..code.m_z()).filter(|&mp| mp != m) {
        for j in 0..code.m_y() {
            *outer.entry(pair_key(code, (m, i), (mp, j))).or_insert(0u64) += 1;
        }
    }
    let mut triplets = BTreeMap::new();
    triplet_counts(code, m, &mut triplets);

    let inner_axes = vec![
        Alphabet::new(Axis::U, nu),
        Alphabet::new(Axis::X, nx),
        Alphabet::new(Axis::Xp, nx),
    ];
    let mut out = Vec::with_capacity(inner.len() + outer.len() + triplets.len());
    for (key, count) in inner {
        out.push(EnumeratorReport {
            kind: EnumeratorKind::Inner,
            joint_type: to_pmf(&key, inner_axes.clone(), n)?,
            count,
            expected_exponent: rates.r_y - inner_info(&key, nu, nx),
        });
    }
    for (kind, map, rate) in [
        (EnumeratorKind::Outer, outer, rates.r_y + rates.r_z),
        (EnumeratorKind::Triplet, triplets, 2.0 * rates.r_y + rates.r_z),
    ] {
        for (key, count) in map {
            out.push(EnumeratorReport {
                kind,
                joint_type: to_pmf(&key, pair_axes(code), n)?,
                count,
                expected_exponent: rate - pair_info(&key, nu * nx),
            });
        }
    }
    Ok(out)
}

/// Sum of the counts of one kind.
pub fn total(reports: &[EnumeratorReport], kind: EnumeratorKind) -> u64 {
    reports.iter().filter(|r| r.kind == kind).map(|r| r.count).sum()
}

#[derive(Clone, Debug)]
pub struct ConcentrationRow {
    pub joint_type: JointPmf,
    /// Mean of `N̂_m` over sampled codes and clouds `m`.
    pub mean: f64,
    /// Number of sampled codes in which the type occurred.
    pub hits: u64,
    /// `(1/n) ln mean`.
    pub empirical_rate: f64,
    /// `2R_y + R_z - I(UX; U'X')` at the realized rates.
    pub predicted_rate: f64,
    /// `(1/n) ln` of the exact finite-`n` ensemble average.
    pub exact_rate: f64,
}

impl ConcentrationRow {
    pub fn deviation(&self) -> f64 {
        (self.empirical_rate - self.predicted_rate).abs()
    }

    pub fn exact_deviation(&self) -> f64 {
        (self.empirical_rate - self.exact_rate).abs()
    }
}

#[derive(Clone, Debug)]
pub struct ConcentrationReport {
    pub n: usize,
    pub trials: usize,
    pub m_z: usize,
    pub m_y: usize,
    /// Realized `(u, x)` composition shared by all codewords.
    pub composition: Vec<usize>,
    pub rows: Vec<ConcentrationRow>,
}

impl ConcentrationReport {
    pub fn max_deviation(&self) -> f64 {
        self.rows.iter().map(ConcentrationRow::deviation).fold(0.0, f64::max)
    }

    pub fn max_exact_deviation(&self) -> f64 {
        self.rows
            .iter()
            .map(ConcentrationRow::exact_deviation)
            .fold(0.0, f64::max)
    }
}

/// Upper limit on `trials * M_z * (M_z - 1) * M_y^2 * n`.
const CONCENTRATION_WORK: f64 = 2e10;

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

/// `ln |T(Q_{U'X'|UX} | (u, x))| - ln |T(P_UX)|`: the log-probability that an
/// independent uniform draw from the type class lands in the conditional
/// class.
fn ln_type_probability(key: &[u16], ux: usize, lf: &[f64]) -> f64 {
    let n: usize = key.iter().map(|&c| c as usize).sum();
    let mut rows = vec![0usize; ux];
    for (c, &k) in key.iter().enumerate() {
        rows[c / ux] += k as usize;
    }
    let cond: f64 = rows.iter().map(|&r| lf[r]).sum::<f64>() - key.iter().map(|&k| lf[k as usize]).sum::<f64>();
    let class = lf[n] - rows.iter().map(|&r| lf[r]).sum::<f64>();
    cond - class
}

/// Samples `trials` codes and compares the empirical mean of every realized
/// triplet enumerator with its exponential-rate prediction. Each trial owns an
/// RNG seeded from `rng`.
pub fn enumerator_concentration<R: Rng + ?Sized>(
    ensemble: &EnsembleSpec,
    rates: RatePair,
    n: usize,
    trials: usize,
    rng: &mut R,
) -> Result<ConcentrationReport> {
    if n == 0 || n > 64 || trials == 0 || trials > 100_000 {
        return Err(Error::BudgetExceeded(format!("n = {n}, trials = {trials}")));
    }
    let seeds: Vec<u64> = (0..trials).map(|_| rng.gen()).collect();
    let probe = HccCode::sample(ensemble, rates, n, &mut ChaCha8Rng::seed_from_u64(seeds[0]))?;
    let (m_z, m_y) = (probe.m_z(), probe.m_y());
    let work = trials as f64 * (m_z * m_z.saturating_sub(1)) as f64 * (m_y * m_y) as f64 * n as f64;
    if work > CONCENTRATION_WORK {
        return Err(Error::BudgetExceeded(format!("{work:.3e} symbol comparisons")));
    }

    let merged = seeds
        .par_iter()
        .map(|&seed| -> Result<BTreeMap<TypeKey, u64>> {
            let code = HccCode::sample(ensemble, rates, n, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let mut counts = BTreeMap::new();
            for m in 0..code.m_z() {
                triplet_counts(&code, m, &mut counts);
            }
            Ok(counts)
        })
        .try_fold(BTreeMap::new, |mut acc: BTreeMap<TypeKey, (u64, u64)>, trial| {
            for (key, c) in trial? {
                let e = acc.entry(key).or_default();
                e.0 += c;
                e.1 += 1;
            }
            Ok::<_, Error>(acc)
        })
        .try_reduce(BTreeMap::new, |mut a, b| {
            for (key, (c, h)) in b {
                let e = a.entry(key).or_default();
                e.0 += c;
                e.1 += h;
            }
            Ok(a)
        })?;

    let realized = probe.realized_rates();
    let ux = probe.nu() * probe.nx();
    let lf = ln_factorials(n);
    let pairs = ((m_z - 1) * m_y * m_y) as f64;
    let samples = (trials * m_z) as f64;
    let nf = n as f64;
    let rows = merged
        .into_iter()
        .map(|(key, (count, hits))| {
            let mean = count as f64 / samples;
            Ok(ConcentrationRow {
                joint_type: to_pmf(&key, pair_axes(&probe), n)?,
                mean,
                hits,
                empirical_rate: mean.ln() / nf,
                predicted_rate: 2.0 * realized.r_y + realized.r_z - pair_info(&key, ux),
                exact_rate: (pairs.ln() + ln_type_probability(&key, ux, &lf)) / nf,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConcentrationReport {
        n,
        trials,
        m_z,
        m_y,
        composition: probe.composition(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ens() -> EnsembleSpec {
        EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap()
    }

    fn code(r_y: f64, r_z: f64, seed: u64) -> HccCode {
        HccCode::sample(
            &ens(),
            RatePair::new(r_y, r_z).unwrap(),
            8,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn totals_are_exact() {
        let c = code(0.15, 0.2, 1);
        let (mz, my) = (c.m_z() as u64, c.m_y() as u64);
        for m in 0..c.m_z() {
            for i in 0..c.m_y() {
                let r = enumerators(&c, m, i).unwrap();
                assert_eq!(total(&r, EnumeratorKind::Inner), my - 1);
                assert_eq!(total(&r, EnumeratorKind::Outer), (mz - 1) * my);
                assert_eq!(total(&r, EnumeratorKind::Triplet), (mz - 1) * my * my);
            }
        }
        assert!(enumerators(&c, c.m_z(), 0).is_err());
    }

    #[test]
    fn degenerate_codes_have_empty_enumerators() {
        let single_cloud = code(0.2, 0.0, 2);
        let r = enumerators(&single_cloud, 0, 0).unwrap();
        assert_eq!(total(&r, EnumeratorKind::Outer), 0);
        let single_word = code(0.0, 0.2, 3);
        let r = enumerators(&single_word, 0, 0).unwrap();
        assert_eq!(total(&r, EnumeratorKind::Inner), 0);
    }

    #[test]
    fn matches_naive_recount() {
        let c = code(0.15, 0.15, 4);
        let (m, i) = (1, 2);
        let reports = enumerators(&c, m, i).unwrap();
        for r in reports.iter().filter(|r| r.kind == EnumeratorKind::Outer) {
            let mut naive = 0;
            for mp in 0..c.m_z() {
                for j in 0..c.m_y() {
                    if mp == m {
                        continue;
                    }
                    let mut q = vec![0.0; 16];
                    for k in 0..8 {
                        let cell = c.center(m)[k] * 8 + c.word(m, i)[k] * 4 + c.center(mp)[k] * 2 + c.word(mp, j)[k];
                        q[cell] += 1.0 / 8.0;
                    }
                    if q.iter().zip(r.joint_type.probs()).all(|(a, b)| (a - b).abs() < 1e-12) {
                        naive += 1;
                    }
                }
            }
            assert_eq!(naive, r.count);
        }
    }

    #[test]
    fn independent_type_predicts_full_rate() {
        // A key with product form has zero information.
        let key: Vec<u16> = vec![1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1];
        assert!(pair_info(&key, 4).abs() < 1e-12);
    }

    #[test]
    fn exact_probabilities_sum_to_one() {
        // All conditional types of (u', x') given a fixed (u, x) with |U| = 1, n = 4.
        let lf = ln_factorials(4);
        let total: f64 = (0..=2u16)
            .map(|k| ln_type_probability(&[k, 2 - k, 2 - k, k], 2, &lf).exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
