//! Cross-checks of every exponent and functional against brute-force lattice
//! searches on small alphabets, plus the dominance relations between bounds.
//!
//! The reference values here never call the fast solvers they check. They
//! minimize the defining expressions directly on a refined lattice over the
//! free cells of the relevant joint pmf, nesting lattices where a definition
//! nests optimizations. The one exception is the clip term of `Omega` and
//! `Upsilon`, which takes `phi` and `psi` from the library; those two are
//! checked on their own.
//!
//! Instances come from four families of binary-input ensembles, chosen per
//! operation so the nested lattices stay small:
//! a single cloud (`|U| = 1`), `X = U`, a skewed ensemble whose first cloud
//! always sends `0`, and a generic full-support ensemble.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gld::{self, DecodingMetric};
use crate::metrics::{self, avg_log_likelihood, chernoff_distance, e0};
use crate::ml;
use crate::opt::{grid_oracle_refined, ConstraintSet, InfoExpr, OracleSpec, SolverConfig};
use crate::prob::{
    conditional_mutual_info, entropy, mutual_info, Alphabet, Axis, ChannelModel, CondPmf, EnsembleSpec, JointPmf,
    RatePair,
};
use crate::rc;

/// Every operation with a lattice reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleOp {
    RcWeak,
    RcStrong,
    Ml1Weak,
    Ml1Strong,
    Ml2Weak,
    Ml2Strong,
    GldWeak,
    GldStrong,
    Phi,
    Psi,
    Upsilon,
    Omega,
    E1,
    B,
    K,
    DHat,
}

impl OracleOp {
    pub const ALL: [OracleOp; 16] = [
        OracleOp::RcWeak,
        OracleOp::RcStrong,
        OracleOp::Ml1Weak,
        OracleOp::Ml1Strong,
        OracleOp::Ml2Weak,
        OracleOp::Ml2Strong,
        OracleOp::GldWeak,
        OracleOp::GldStrong,
        OracleOp::Phi,
        OracleOp::Psi,
        OracleOp::Upsilon,
        OracleOp::Omega,
        OracleOp::E1,
        OracleOp::B,
        OracleOp::K,
        OracleOp::DHat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OracleOp::RcWeak => "rc-weak",
            OracleOp::RcStrong => "rc-strong",
            OracleOp::Ml1Weak => "ml1-weak",
            OracleOp::Ml1Strong => "ml1-strong",
            OracleOp::Ml2Weak => "ml2-weak",
            OracleOp::Ml2Strong => "ml2-strong",
            OracleOp::GldWeak => "gld-weak",
            OracleOp::GldStrong => "gld-strong",
            OracleOp::Phi => "phi",
            OracleOp::Psi => "psi",
            OracleOp::Upsilon => "upsilon",
            OracleOp::Omega => "omega",
            OracleOp::E1 => "e1",
            OracleOp::B => "b",
            OracleOp::K => "k",
            OracleOp::DHat => "d-hat",
        }
    }

    /// Agreement tolerance in nats.
    pub fn tolerance(self) -> f64 {
        match self {
            OracleOp::RcWeak | OracleOp::RcStrong => 1e-3,
            OracleOp::Phi | OracleOp::Psi | OracleOp::E1 | OracleOp::B | OracleOp::K => 1e-3,
            OracleOp::Ml1Weak | OracleOp::Ml1Strong | OracleOp::Ml2Weak | OracleOp::Ml2Strong => 2e-3,
            OracleOp::Upsilon | OracleOp::Omega | OracleOp::DHat => 2e-3,
            OracleOp::GldWeak | OracleOp::GldStrong => 5e-3,
        }
    }
}

/// Ensemble shapes used by the generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SingleCloud,
    Mirror,
    Skewed,
    Full,
}

/// A serializable description of one checked point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub family: Family,
    pub p_u: Vec<f64>,
    pub p_x_given_u: Vec<Vec<f64>>,
    pub w1: Vec<Vec<f64>>,
    pub w2: Vec<Vec<f64>>,
    pub r_y: f64,
    pub r_z: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<DecodingMetric>,
    /// Flat cells of the point a functional is evaluated at.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
}

impl Instance {
    fn ensemble(&self) -> Result<EnsembleSpec> {
        EnsembleSpec::from_vectors(&self.p_u, &self.p_x_given_u)
    }

    fn channel(&self) -> Result<ChannelModel> {
        ChannelModel::from_matrices(&self.w1, &self.w2)
    }

    fn rates(&self) -> Result<RatePair> {
        RatePair::new(self.r_y, self.r_z)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub op: String,
    pub instance: Instance,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    round2(rng.gen_range(lo..=hi))
}

fn ensemble_vectors<R: Rng>(family: Family, rng: &mut R) -> (Vec<f64>, Vec<Vec<f64>>) {
    let a = uniform(rng, 0.25, 0.75);
    match family {
        Family::SingleCloud => (vec![1.0], vec![vec![a, 1.0 - a]]),
        Family::Mirror => (vec![a, 1.0 - a], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
        Family::Skewed => {
            let b = uniform(rng, 0.2, 0.8);
            (vec![a, 1.0 - a], vec![vec![1.0, 0.0], vec![b, 1.0 - b]])
        }
        Family::Full => {
            let b = uniform(rng, 0.1, 0.9);
            let c = uniform(rng, 0.1, 0.9);
            (vec![a, 1.0 - a], vec![vec![b, 1.0 - b], vec![c, 1.0 - c]])
        }
    }
}

fn binary_channel<R: Rng>(rng: &mut R) -> Vec<Vec<f64>> {
    let p = uniform(rng, 0.02, 0.3);
    let q = uniform(rng, 0.02, 0.3);
    vec![vec![1.0 - p, p], vec![q, 1.0 - q]]
}

fn metric_for<R: Rng>(k: usize, rng: &mut R) -> DecodingMetric {
    match k % 4 {
        0 => DecodingMetric::Likelihood,
        1 => DecodingMetric::TemperedLikelihood {
            beta: uniform(rng, 0.5, 2.0),
        },
        2 => DecodingMetric::Mismatched {
            beta: 1.0,
            channel: binary_channel(rng),
        },
        _ => DecodingMetric::MutualInfo {
            beta: uniform(rng, 0.5, 1.5),
        },
    }
}

fn family_for(op: OracleOp, k: usize) -> Family {
    use Family::*;
    let cycle: &[Family] = match op {
        OracleOp::RcWeak | OracleOp::RcStrong | OracleOp::Phi | OracleOp::Psi | OracleOp::E1 => &[Full],
        OracleOp::Ml1Weak | OracleOp::Ml1Strong | OracleOp::K => &[SingleCloud, Mirror, Skewed],
        OracleOp::Ml2Weak | OracleOp::Ml2Strong => &[SingleCloud, Mirror],
        OracleOp::GldWeak | OracleOp::GldStrong | OracleOp::Upsilon | OracleOp::Omega => &[SingleCloud, Mirror],
        OracleOp::B | OracleOp::DHat => &[SingleCloud, Skewed],
    };
    cycle[k % cycle.len()]
}

/// Random instance `k` of `op`; deterministic in `(op, k, seed)`.
pub fn instance(op: OracleOp, k: usize, seed: u64) -> Instance {
    let op_index = OracleOp::ALL.iter().position(|&o| o == op).unwrap_or(0) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (op_index << 32) ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let family = family_for(op, k);
    let (p_u, p_x_given_u) = ensemble_vectors(family, &mut rng);
    let w1 = binary_channel(&mut rng);
    let w2 = binary_channel(&mut rng);
    let mut r_y = uniform(&mut rng, 0.0, 0.3);
    let mut r_z = uniform(&mut rng, 0.0, 0.3);
    if op == OracleOp::Ml2Weak && family == Family::Mirror {
        // The cloud-pair lattice would nest a four-dimensional search.
        r_z = 0.0;
    }
    if matches!(op, OracleOp::Ml1Weak | OracleOp::Ml2Weak | OracleOp::GldWeak) && k % 3 == 2 {
        r_y = 0.0;
    }
    let param = match op {
        OracleOp::E1 | OracleOp::B | OracleOp::K | OracleOp::DHat => Some(uniform(&mut rng, 0.0, 1.0)),
        _ => None,
    };
    let metric = match op {
        OracleOp::GldWeak
        | OracleOp::GldStrong
        | OracleOp::Phi
        | OracleOp::Psi
        | OracleOp::Upsilon
        | OracleOp::Omega => Some(metric_for(k, &mut rng)),
        _ => None,
    };
    let point = match op {
        OracleOp::Phi | OracleOp::E1 => {
            // Q_UO = P_U x random rows.
            let mut q = Vec::new();
            for &pu in &p_u {
                let c = uniform(&mut rng, 0.05, 0.95);
                q.extend([pu * c, pu * (1.0 - c)]);
            }
            Some(q)
        }
        OracleOp::Psi => {
            let c = uniform(&mut rng, 0.05, 0.95);
            Some(vec![c, 1.0 - c])
        }
        OracleOp::Upsilon => {
            let lambda = uniform(&mut rng, 0.0, 1.0);
            Some(mix_s(&p_u, &p_x_given_u, lambda))
        }
        OracleOp::Omega => {
            let lambda = uniform(&mut rng, 0.0, 1.0);
            Some(mix_p(&p_u, &p_x_given_u, lambda))
        }
        OracleOp::B | OracleOp::DHat | OracleOp::K => Some(cloud_pair(&p_u, k, family, &mut rng)),
        _ => None,
    };
    Instance {
        family,
        p_u,
        p_x_given_u,
        w1,
        w2,
        r_y,
        r_z,
        param,
        metric,
        point,
    }
}

/// `lambda` times the within-cloud diagonal coupling plus the rest times the
/// conditional product, on `(U, X, X')`.
fn mix_s(p_u: &[f64], rows: &[Vec<f64>], lambda: f64) -> Vec<f64> {
    let nx = rows[0].len();
    let mut q = Vec::new();
    for (u, &pu) in p_u.iter().enumerate() {
        for x in 0..nx {
            for xp in 0..nx {
                let diag = if x == xp { rows[u][x] } else { 0.0 };
                q.push(pu * (lambda * diag + (1.0 - lambda) * rows[u][x] * rows[u][xp]));
            }
        }
    }
    q
}

/// Same mixture for the pair `(U, X)`, `(U', X')` on `(U, U', X, X')`.
fn mix_p(p_u: &[f64], rows: &[Vec<f64>], lambda: f64) -> Vec<f64> {
    let (nu, nx) = (p_u.len(), rows[0].len());
    let mut q = Vec::new();
    for u in 0..nu {
        for v in 0..nu {
            for x in 0..nx {
                for xp in 0..nx {
                    let pa = p_u[u] * rows[u][x];
                    let pb = p_u[v] * rows[v][xp];
                    let diag = if u == v && x == xp { pa } else { 0.0 };
                    q.push(lambda * diag + (1.0 - lambda) * pa * pb);
                }
            }
        }
    }
    q
}

/// A `Q_UU'` with marginals `P_U` and at most three positive cells, so the
/// lattice over `Q_{Z|UU'}` stays small.
fn cloud_pair<R: Rng>(p_u: &[f64], k: usize, family: Family, rng: &mut R) -> Vec<f64> {
    if p_u.len() == 1 {
        return vec![1.0];
    }
    let (a, b) = (p_u[0], p_u[1]);
    if family != Family::Skewed && rng.gen_bool(0.5) {
        let lambda = uniform(rng, 0.0, 1.0);
        return vec![
            lambda * a + (1.0 - lambda) * a * a,
            (1.0 - lambda) * a * b,
            (1.0 - lambda) * a * b,
            lambda * b + (1.0 - lambda) * b * b,
        ];
    }
    if k % 2 == 0 {
        vec![a, 0.0, 0.0, b]
    } else if a >= b {
        vec![a - b, b, b, 0.0]
    } else {
        vec![0.0, a, a, b - a]
    }
}

// ---------------------------------------------------------------------------
// Lattice helpers.

fn lattice(step: f64, levels: usize) -> OracleSpec {
    OracleSpec::new(step).zoom(levels).refine(2.0)
}

fn lattice_min(
    obj: &dyn Fn(&JointPmf) -> f64,
    cs: &ConstraintSet,
    shape: &[Alphabet],
    spec: &OracleSpec,
) -> Result<f64> {
    Ok(grid_oracle_refined(obj, cs, shape, spec)?.0)
}

fn lattice_max(
    obj: &dyn Fn(&JointPmf) -> f64,
    cs: &ConstraintSet,
    shape: &[Alphabet],
    spec: &OracleSpec,
) -> Result<f64> {
    let neg = |q: &JointPmf| -obj(q);
    Ok(-grid_oracle_refined(&neg, cs, shape, spec)?.0)
}

/// Lattice spacing that keeps a search of dimension `d` near `1e5` points.
fn spec_for_dim(d: usize) -> OracleSpec {
    match d {
        0..=2 => lattice(0.02, 7),
        3 => lattice(0.05, 7),
        _ => lattice(0.1, 7),
    }
}

fn ax(axis: Axis, n: usize) -> Alphabet {
    Alphabet::new(axis, n)
}

fn pmf(axes: Vec<Alphabet>, cells: &[f64]) -> Result<JointPmf> {
    JointPmf::new(axes, cells.to_vec())
}

fn mi(q: &JointPmf, a: &[Axis], b: &[Axis]) -> f64 {
    mutual_info(q, a, b).unwrap_or(f64::NAN)
}

fn cmi(q: &JointPmf, a: &[Axis], b: &[Axis], c: &[Axis]) -> f64 {
    conditional_mutual_info(q, a, b, c).unwrap_or(f64::NAN)
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// `D(Q_{O|given} || W(o|x) | Q_given)`, where `x` is one of the `given` axes.
fn channel_divergence(q: &JointPmf, given: &[Axis], x: Axis, out: Axis, w: &CondPmf) -> f64 {
    let mut axes = given.to_vec();
    axes.push(out);
    let (Ok(m), Ok(mg)) = (q.marginal(&axes), q.marginal(given)) else {
        return f64::NAN;
    };
    let px = given.iter().position(|&a| a == x).unwrap_or(0);
    let no = w.n_to();
    let mut d = 0.0;
    for (i, &v) in m.probs().iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        let idx = m.multi_index(i);
        let wv = w.get(idx[px], idx[idx.len() - 1]);
        if wv <= 0.0 {
            return f64::INFINITY;
        }
        d += v * (v / (mg.probs()[i / no] * wv)).ln();
    }
    d.max(0.0)
}

/// Maximum of a concave function on `[0, 1]`: an 11-point scan, then golden
/// section around the best scan point.
fn concave_max(f: &dyn Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let v = f(t)?;
        if v > best.1 {
            best = (t, v);
        }
    }
    let (mut a, mut b) = ((best.0 - 0.1).max(0.0), (best.0 + 0.1).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 2e-3 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (t, v);
        }
    }
    Ok(best)
}

fn set_p_axes(nu: usize, nx: usize) -> Vec<Alphabet> {
    vec![ax(Axis::U, nu), ax(Axis::Up, nu), ax(Axis::X, nx), ax(Axis::Xp, nx)]
}

// ---------------------------------------------------------------------------
// References, one per operation.

fn out_axis(w: &CondPmf) -> Alphabet {
    w.to_axes()[0]
}

fn uxo_axes(e: &EnsembleSpec, w: &CondPmf) -> Vec<Alphabet> {
    vec![ax(Axis::U, e.nu()), ax(Axis::X, e.nx()), out_axis(w)]
}

fn ref_rc(e: &EnsembleSpec, w: &CondPmf, rates: RatePair, strong: bool) -> Result<f64> {
    let o = out_axis(w).axis;
    let cs = ConstraintSet::new().fix(e.p_ux());
    let obj = |q: &JointPmf| {
        let d = channel_divergence(q, &[Axis::U, Axis::X], Axis::X, o, w);
        let i_uo = mi(q, &[Axis::U], &[o]);
        let i_xo_u = cmi(q, &[Axis::X], &[o], &[Axis::U]);
        if strong {
            d + pos(i_uo + i_xo_u - rates.r_y - rates.r_z).min(pos(i_xo_u - rates.r_y))
        } else {
            d + pos(i_uo + pos(i_xo_u - rates.r_y) - rates.r_z)
        }
    };
    lattice_min(&obj, &cs, &uxo_axes(e, w), &lattice(0.1, 7))
}

/// `min { I(UX;U'X') + D_t(Q_XX') : Q in P, I(UX;U'X') <= cap }`.
fn ref_pair(e: &EnsembleSpec, w: &CondPmf, t: f64, cap: f64) -> Result<f64> {
    let cs = ConstraintSet::set_p(e).bound(InfoExpr::mi(&[Axis::U, Axis::X], &[Axis::Up, Axis::Xp]), cap);
    let obj = |q: &JointPmf| {
        let xx = q.marginal(&[Axis::X, Axis::Xp]).expect("pair axes");
        mi(q, &[Axis::U, Axis::X], &[Axis::Up, Axis::Xp]) + chernoff_distance(&xx, w, t).unwrap_or(f64::NAN)
    };
    lattice_min(&obj, &cs, &set_p_axes(e.nu(), e.nx()), &lattice(0.05, 7))
}

fn ref_su1(e: &EnsembleSpec, w: &CondPmf, s: f64, r_y: f64) -> Result<f64> {
    let cs = ConstraintSet::set_s(e).bound(InfoExpr::cmi(&[Axis::X], &[Axis::Xp], &[Axis::U]), r_y);
    let obj = |q: &JointPmf| {
        let xx = q.marginal(&[Axis::X, Axis::Xp]).expect("pair axes");
        cmi(q, &[Axis::X], &[Axis::Xp], &[Axis::U]) + chernoff_distance(&xx, w, s).unwrap_or(f64::NAN)
    };
    let shape = vec![ax(Axis::U, e.nu()), ax(Axis::X, e.nx()), ax(Axis::Xp, e.nx())];
    Ok(lattice_min(&obj, &cs, &shape, &lattice(0.02, 7))? - r_y)
}

/// `min_{Q_UU' in Q, I(U;U') <= R_z} J_s(Q_UU')`, each `J_s` a lattice over completions.
fn ref_su2_ml2(e: &EnsembleSpec, w: &CondPmf, s: f64, rates: RatePair) -> Result<f64> {
    let (nu, nx) = (e.nu(), e.nx());
    let inner = |quu: &JointPmf| -> f64 {
        let cs = ConstraintSet::set_p(e).fix(quu.clone());
        let obj = |q: &JointPmf| {
            let xx = q.marginal(&[Axis::X, Axis::Xp]).expect("pair axes");
            mi(q, &[Axis::U, Axis::X], &[Axis::Up, Axis::Xp]) + chernoff_distance(&xx, w, s).unwrap_or(f64::NAN)
        };
        lattice_min(&obj, &cs, &set_p_axes(nu, nx), &lattice(0.02, 7)).unwrap_or(f64::NAN)
    };
    let cs = ConstraintSet::set_q(e).bound(InfoExpr::mi(&[Axis::U], &[Axis::Up]), rates.r_z);
    let shape = vec![ax(Axis::U, nu), ax(Axis::Up, nu)];
    Ok(lattice_min(&inner, &cs, &shape, &lattice(0.02, 7))? - rates.r_y - rates.r_z)
}

fn ref_e1(e: &EnsembleSpec, w: &CondPmf, r_y: f64, q_uo: &JointPmf, t: f64) -> Result<f64> {
    let cs = ConstraintSet::new().fix(e.p_ux()).fix(q_uo.clone());
    let o = out_axis(w).axis;
    let obj = |q: &JointPmf| {
        let xo = q.marginal(&[Axis::X, o]).expect("uxo axes");
        e0(r_y, q, t).unwrap_or(f64::NAN) + t * avg_log_likelihood(&xo, w).unwrap_or(f64::NAN)
    };
    lattice_max(&obj, &cs, &uxo_axes(e, w), &spec_for_dim(2))
}

/// `min_{Q_{X|UO} in S(Q_UO)} wd D(Q_{O|UX} || W | P_UX) + wc [I(X;O|U) - R_y]_+`.
fn ref_satellite(e: &EnsembleSpec, w: &CondPmf, r_y: f64, q_uo: &JointPmf, wd: f64, wc: f64) -> Result<f64> {
    let cs = ConstraintSet::new().fix(e.p_ux()).fix(q_uo.clone());
    let o = out_axis(w).axis;
    let obj = |q: &JointPmf| {
        let d = if wd > 0.0 {
            wd * channel_divergence(q, &[Axis::U, Axis::X], Axis::X, o, w)
        } else {
            0.0
        };
        d + wc * pos(cmi(q, &[Axis::X], &[o], &[Axis::U]) - r_y)
    };
    lattice_min(&obj, &cs, &uxo_axes(e, w), &spec_for_dim(2))
}

fn uuo_axes(nu: usize, w: &CondPmf) -> Vec<Alphabet> {
    vec![ax(Axis::U, nu), ax(Axis::Up, nu), out_axis(w)]
}

/// The `(U', O)` marginal renamed to `(U, O)`.
fn primed_side(q: &JointPmf, o: Axis) -> JointPmf {
    q.marginal(&[Axis::Up, o])
        .and_then(|m| m.relabel(&[(Axis::Up, Axis::U)]))
        .expect("uuo axes")
}

fn ref_d_hat(e: &EnsembleSpec, w: &CondPmf, r_y: f64, t: f64, q_uu: &JointPmf) -> Result<f64> {
    let o = out_axis(w).axis;
    let tb = 1.0 - t;
    let cs = ConstraintSet::new().fix(q_uu.clone());
    let obj = |q: &JointPmf| {
        let uo = q.marginal(&[Axis::U, o]).expect("uuo axes");
        let a = ref_satellite(e, w, r_y, &uo, tb, t).unwrap_or(f64::NAN);
        let b = ref_satellite(e, w, r_y, &primed_side(q, o), t, tb).unwrap_or(f64::NAN);
        a + b + tb * cmi(q, &[o], &[Axis::Up], &[Axis::U]) + t * cmi(q, &[o], &[Axis::U], &[Axis::Up])
    };
    lattice_min(&obj, &cs, &uuo_axes(e.nu(), w), &spec_for_dim(3))
}

fn ref_b(e: &EnsembleSpec, w: &CondPmf, r_y: f64, t: f64, q_uu: &JointPmf) -> Result<f64> {
    let o = out_axis(w).axis;
    let cs = ConstraintSet::new().fix(q_uu.clone());
    let obj = |q: &JointPmf| {
        let h = entropy(q, &[Axis::U, Axis::Up, o]).unwrap_or(f64::NAN)
            - entropy(q, &[Axis::U, Axis::Up]).unwrap_or(f64::NAN);
        let uo = q.marginal(&[Axis::U, o]).expect("uuo axes");
        h + ref_e1(e, w, r_y, &uo, 1.0 - t).unwrap_or(f64::NAN)
            + ref_e1(e, w, r_y, &primed_side(q, o), t).unwrap_or(f64::NAN)
    };
    lattice_max(&obj, &cs, &uuo_axes(e.nu(), w), &spec_for_dim(3))
}

fn ref_k(e: &EnsembleSpec, w: &CondPmf, r_y: f64, s: f64, q_uu: &JointPmf) -> Result<f64> {
    let cs = ConstraintSet::set_p(e).fix(q_uu.clone());
    let obj = |q: &JointPmf| {
        let xx = q.marginal(&[Axis::X, Axis::Xp]).expect("pair axes");
        r_y - cmi(q, &[Axis::X], &[Axis::Up], &[Axis::U])
            - cmi(q, &[Axis::U, Axis::X], &[Axis::Xp], &[Axis::Up])
            - chernoff_distance(&xx, w, s).unwrap_or(f64::NAN)
    };
    lattice_max(&obj, &cs, &set_p_axes(e.nu(), e.nx()), &spec_for_dim(3))
}

fn ref_ml2_weak(e: &EnsembleSpec, w: &CondPmf, rates: RatePair) -> Result<f64> {
    let nu = e.nu();
    let quu_shape = vec![ax(Axis::U, nu), ax(Axis::Up, nu)];
    let inner = |t: f64| -> Result<f64> {
        let obj =
            |quu: &JointPmf| mi(quu, &[Axis::U], &[Axis::Up]) + ref_d_hat(e, w, rates.r_y, t, quu).unwrap_or(f64::NAN);
        let cs = ConstraintSet::set_q(e).bound(InfoExpr::mi(&[Axis::U], &[Axis::Up]), rates.r_z);
        lattice_min(&obj, &cs, &quu_shape, &lattice(0.02, 7))
    };
    Ok(concave_max(&inner)?.1 - rates.r_z)
}

/// Memoized library `phi` and `psi`, the only library calls inside the
/// `Omega`/`Upsilon` references.
struct ClipTerms<'a> {
    rates: RatePair,
    g: &'a DecodingMetric,
    e: &'a EnsembleSpec,
    w: &'a CondPmf,
    cache: RefCell<HashMap<(bool, Vec<u64>), f64>>,
}

impl<'a> ClipTerms<'a> {
    fn new(rates: RatePair, g: &'a DecodingMetric, e: &'a EnsembleSpec, w: &'a CondPmf) -> Self {
        ClipTerms {
            rates,
            g,
            e,
            w,
            cache: RefCell::new(HashMap::new()),
        }
    }

    fn get(&self, is_phi: bool, q: &JointPmf) -> f64 {
        let key = (is_phi, q.probs().iter().map(|v| v.to_bits()).collect());
        if let Some(&v) = self.cache.borrow().get(&key) {
            return v;
        }
        let v = if is_phi {
            gld::phi(self.rates.r_y, q, self.g, self.e, self.w)
        } else {
            gld::psi(self.rates, q, self.g, self.e, self.w)
        }
        .unwrap_or(f64::NAN);
        self.cache.borrow_mut().insert(key, v);
        v
    }

    /// `[max{g(Q_UXO), phi(Q_UO), psi(Q_O)} - g(Q_{other O})]_+`.
    fn clip(&self, q: &JointPmf, other: &[Axis]) -> f64 {
        let o = out_axis(self.w).axis;
        let uxo = q.marginal(&[Axis::U, Axis::X, o]).expect("pair axes");
        let g1 = self.g.eval(&uxo, self.w).unwrap_or(f64::NAN);
        let mut axes = other.to_vec();
        axes.push(o);
        let renames: Vec<(Axis, Axis)> = other
            .iter()
            .map(|&a| {
                (
                    a,
                    if matches!(a, Axis::U | Axis::Up) {
                        Axis::U
                    } else {
                        Axis::X
                    },
                )
            })
            .filter(|(a, b)| a != b)
            .collect();
        let other_q = q.marginal(&axes).and_then(|m| m.relabel(&renames)).expect("pair axes");
        let g2 = self.g.eval(&other_q, self.w).unwrap_or(f64::NAN);
        if g2 == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        let phi = self.get(true, &q.marginal(&[Axis::U, o]).expect("pair axes"));
        let psi = self.get(false, &q.marginal(&[o]).expect("pair axes"));
        pos(g1.max(phi).max(psi) - g2)
    }
}

/// The `Omega`-type objective on a joint of the pair axes and the output;
/// `primed` names the competitor's `(cloud, word)` axes.
fn omega_objective(q: &JointPmf, clip: &ClipTerms, w: &CondPmf, primed: &[Axis]) -> f64 {
    let o = out_axis(w).axis;
    let d = channel_divergence(q, &[Axis::U, Axis::X], Axis::X, o, w);
    // A shared cloud adds nothing given `(U, X)`.
    let fresh: Vec<Axis> = primed.iter().copied().filter(|&a| a != Axis::U).collect();
    d + cmi(q, &fresh, &[o], &[Axis::U, Axis::X]) + clip.clip(q, primed)
}

fn with_out(shape: &[Alphabet], w: &CondPmf) -> Vec<Alphabet> {
    let mut s = shape.to_vec();
    s.push(out_axis(w));
    s
}

fn ref_omega(
    e: &EnsembleSpec,
    w: &CondPmf,
    rates: RatePair,
    g: &DecodingMetric,
    q: &JointPmf,
    primed: &[Axis],
) -> Result<f64> {
    let clip = ClipTerms::new(rates, g, e, w);
    let shape = with_out(q.axes(), w);
    let cs = ConstraintSet::new().fix(q.clone());
    let obj = |p: &JointPmf| omega_objective(p, &clip, w, primed);
    lattice_min(&obj, &cs, &shape, &lattice(0.1, 7))
}

fn ref_gld_pair(
    e: &EnsembleSpec,
    w: &CondPmf,
    rates: RatePair,
    g: &DecodingMetric,
    cs: ConstraintSet,
    base: Vec<Alphabet>,
    info: &dyn Fn(&JointPmf) -> f64,
    primed: &[Axis],
    offset: f64,
) -> Result<f64> {
    let clip = ClipTerms::new(rates, g, e, w);
    let shape = with_out(&base, w);
    let obj = |p: &JointPmf| info(p) + omega_objective(p, &clip, w, primed);
    Ok(lattice_min(&obj, &cs, &shape, &lattice(0.1, 7))? - offset)
}

fn ref_gld_weak(e: &EnsembleSpec, ch: &ChannelModel, rates: RatePair, g: &DecodingMetric) -> Result<f64> {
    let cs = ConstraintSet::set_p(e)
        .bound(
            InfoExpr::mi(&[Axis::U, Axis::X], &[Axis::Up, Axis::Xp]),
            2.0 * rates.r_y + rates.r_z,
        )
        .bound(InfoExpr::mi(&[Axis::U], &[Axis::Up]), rates.r_z);
    let info = |q: &JointPmf| mi(q, &[Axis::U, Axis::X], &[Axis::Up, Axis::Xp]);
    ref_gld_pair(
        e,
        ch.w2(),
        rates,
        g,
        cs,
        set_p_axes(e.nu(), e.nx()),
        &info,
        &[Axis::Up, Axis::Xp],
        rates.r_y + rates.r_z,
    )
}

fn ref_gld_strong(e: &EnsembleSpec, ch: &ChannelModel, rates: RatePair, g: &DecodingMetric) -> Result<f64> {
    let w1 = ch.w1();
    let cs1 = ConstraintSet::set_s(e).bound(InfoExpr::cmi(&[Axis::X], &[Axis::Xp], &[Axis::U]), rates.r_y);
    let info1 = |q: &JointPmf| cmi(q, &[Axis::X], &[Axis::Xp], &[Axis::U]);
    let shape_s = vec![ax(Axis::U, e.nu()), ax(Axis::X, e.nx()), ax(Axis::Xp, e.nx())];
    let su1 = ref_gld_pair(e, w1, rates, g, cs1, shape_s, &info1, &[Axis::U, Axis::Xp], rates.r_y)?;
    let cs2 = ConstraintSet::set_p(e)
        .bound(
            InfoExpr::mi(&[Axis::U, Axis::X], &[Axis::Up, Axis::Xp]),
            rates.r_y + rates.r_z,
        )
        .bound(InfoExpr::mi(&[Axis::U, Axis::X], &[Axis::Up]), rates.r_z);
    let info2 = |q: &JointPmf| mi(q, &[Axis::U, Axis::X], &[Axis::Up, Axis::Xp]);
    let su2 = ref_gld_pair(
        e,
        w1,
        rates,
        g,
        cs2,
        set_p_axes(e.nu(), e.nx()),
        &info2,
        &[Axis::Up, Axis::Xp],
        rates.r_y + rates.r_z,
    )?;
    Ok(su1.min(su2))
}

fn ref_phi(e: &EnsembleSpec, w: &CondPmf, r_y: f64, g: &DecodingMetric, q_uo: &JointPmf) -> Result<f64> {
    let o = out_axis(w).axis;
    let cs = ConstraintSet::new()
        .fix(e.p_ux())
        .fix(q_uo.clone())
        .bound(InfoExpr::cmi(&[Axis::X], &[o], &[Axis::U]), r_y);
    let obj = |q: &JointPmf| g.eval(q, w).unwrap_or(f64::NAN) - cmi(q, &[Axis::X], &[o], &[Axis::U]);
    Ok(lattice_max(&obj, &cs, &uxo_axes(e, w), &spec_for_dim(2))? + r_y)
}

fn ref_psi(e: &EnsembleSpec, w: &CondPmf, rates: RatePair, g: &DecodingMetric, q_o: &JointPmf) -> Result<f64> {
    let o = out_axis(w).axis;
    let sum = rates.r_y + rates.r_z;
    let cs = ConstraintSet::new()
        .fix(e.p_ux())
        .fix(q_o.clone())
        .bound(InfoExpr::mi(&[Axis::U], &[o]), rates.r_z)
        .bound(InfoExpr::mi(&[Axis::U, Axis::X], &[o]), sum);
    let obj = |q: &JointPmf| g.eval(q, w).unwrap_or(f64::NAN) - mi(q, &[Axis::U, Axis::X], &[o]);
    Ok(lattice_max(&obj, &cs, &uxo_axes(e, w), &lattice(0.005, 7))? + sum)
}

// ---------------------------------------------------------------------------
// Library side and comparison.

fn point_pmf(inst: &Instance, axes: Vec<Alphabet>) -> Result<JointPmf> {
    let cells = inst
        .point
        .as_deref()
        .ok_or_else(|| Error::Parse("instance needs a point".into()))?;
    pmf(axes, cells)
}

fn param(inst: &Instance) -> Result<f64> {
    inst.param
        .ok_or_else(|| Error::Parse("instance needs a parameter".into()))
}

fn metric(inst: &Instance) -> Result<&DecodingMetric> {
    inst.metric
        .as_ref()
        .ok_or_else(|| Error::Parse("instance needs a metric".into()))
}

/// Library value and lattice reference for one instance.
pub fn evaluate(op: OracleOp, inst: &Instance, cfg: &SolverConfig) -> Result<(f64, f64)> {
    let e = inst.ensemble()?;
    let ch = inst.channel()?;
    let rates = inst.rates()?;
    let (nu, nx) = (e.nu(), e.nx());
    Ok(match op {
        OracleOp::RcWeak => (
            rc::e_weak_rc(rates, &e, &ch, cfg)?.value,
            ref_rc(&e, ch.w2(), rates, false)?,
        ),
        OracleOp::RcStrong => (
            rc::e_strong_rc(rates, &e, &ch, cfg)?.value,
            ref_rc(&e, ch.w1(), rates, true)?,
        ),
        OracleOp::Ml1Weak => {
            let lib = ml::e_weak_ml1(rates, &e, &ch, cfg)?.value;
            let cap = 2.0 * rates.r_y + rates.r_z;
            let (_, v) = concave_max(&|t| ref_pair(&e, ch.w2(), t, cap))?;
            (lib, v - rates.r_y - rates.r_z)
        }
        OracleOp::Ml1Strong => {
            let lib = ml::e_strong_ml1(rates, &e, &ch, cfg)?.value;
            let w1 = ch.w1();
            let f = |s: f64| -> Result<f64> {
                let a = ref_su1(&e, w1, s, rates.r_y)?;
                let b = ref_pair(&e, w1, s, rates.r_y + rates.r_z)? - rates.r_y - rates.r_z;
                Ok(a.min(b))
            };
            (lib, concave_max(&f)?.1)
        }
        OracleOp::Ml2Weak => (
            ml::e_weak_ml2(rates, &e, &ch, cfg)?.value,
            ref_ml2_weak(&e, ch.w2(), rates)?,
        ),
        OracleOp::Ml2Strong => {
            let lib = ml::e_strong_ml2(rates, &e, &ch, cfg)?.value;
            let w1 = ch.w1();
            let f = |s: f64| -> Result<f64> { Ok(ref_su1(&e, w1, s, rates.r_y)?.min(ref_su2_ml2(&e, w1, s, rates)?)) };
            (lib, concave_max(&f)?.1)
        }
        OracleOp::GldWeak => {
            let g = metric(inst)?;
            (
                gld::e_weak_gld(rates, &e, &ch, g, cfg)?.value,
                ref_gld_weak(&e, &ch, rates, g)?,
            )
        }
        OracleOp::GldStrong => {
            let g = metric(inst)?;
            (
                gld::e_strong_gld(rates, &e, &ch, g, cfg)?.value,
                ref_gld_strong(&e, &ch, rates, g)?,
            )
        }
        OracleOp::Phi => {
            let g = metric(inst)?;
            let q = point_pmf(inst, vec![ax(Axis::U, nu), out_axis(ch.w1())])?;
            (
                gld::phi(rates.r_y, &q, g, &e, ch.w1())?,
                ref_phi(&e, ch.w1(), rates.r_y, g, &q)?,
            )
        }
        OracleOp::Psi => {
            let g = metric(inst)?;
            let q = point_pmf(inst, vec![out_axis(ch.w1())])?;
            (
                gld::psi(rates, &q, g, &e, ch.w1())?,
                ref_psi(&e, ch.w1(), rates, g, &q)?,
            )
        }
        OracleOp::Upsilon => {
            let g = metric(inst)?;
            let q = point_pmf(inst, vec![ax(Axis::U, nu), ax(Axis::X, nx), ax(Axis::Xp, nx)])?;
            let lib = gld::upsilon(&q, rates, g, &e, ch.w1(), cfg)?.value;
            (lib, ref_omega(&e, ch.w1(), rates, g, &q, &[Axis::U, Axis::Xp])?)
        }
        OracleOp::Omega => {
            let g = metric(inst)?;
            let q = point_pmf(inst, set_p_axes(nu, nx))?;
            let lib = gld::omega(&q, rates, g, &e, ch.w2(), cfg)?.value;
            (lib, ref_omega(&e, ch.w2(), rates, g, &q, &[Axis::Up, Axis::Xp])?)
        }
        OracleOp::E1 => {
            let t = param(inst)?;
            let q = point_pmf(inst, vec![ax(Axis::U, nu), out_axis(ch.w2())])?;
            (
                metrics::e1(rates.r_y, &q, t, &e, ch.w2())?,
                ref_e1(&e, ch.w2(), rates.r_y, &q, t)?,
            )
        }
        OracleOp::B => {
            let t = param(inst)?;
            let q = point_pmf(inst, vec![ax(Axis::U, nu), ax(Axis::Up, nu)])?;
            let lib = metrics::b_func(rates.r_y, t, &q, &e, ch.w2(), cfg)?.value;
            (lib, ref_b(&e, ch.w2(), rates.r_y, t, &q)?)
        }
        OracleOp::K => {
            let s = param(inst)?;
            let q = point_pmf(inst, vec![ax(Axis::U, nu), ax(Axis::Up, nu)])?;
            (
                metrics::k_func(rates.r_y, s, &q, &e, ch.w1())?,
                ref_k(&e, ch.w1(), rates.r_y, s, &q)?,
            )
        }
        OracleOp::DHat => {
            let t = param(inst)?;
            let q = point_pmf(inst, vec![ax(Axis::U, nu), ax(Axis::Up, nu)])?;
            let lib = metrics::d_hat(rates.r_y, t, &q, &e, ch.w2(), cfg)?.value;
            (lib, ref_d_hat(&e, ch.w2(), rates.r_y, t, &q)?)
        }
    })
}

fn agree(value: f64, reference: f64, tol: f64) -> bool {
    if value.is_infinite() || reference.is_infinite() {
        return value == reference;
    }
    (value - reference).abs() <= tol
}

/// Options of the oracle and inequality suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteOptions {
    /// Random instances per operation.
    pub instances: usize,
    pub seed: u64,
    /// Overrides every per-operation tolerance.
    pub tolerance: Option<f64>,
    /// Operations to check; empty means all.
    pub ops: Vec<OracleOp>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            instances: 1,
            seed: 0,
            tolerance: None,
            ops: Vec::new(),
        }
    }
}

/// Runs `instances` random checks of every selected operation, in order.
pub fn oracle_suite(opts: &SuiteOptions, cfg: &SolverConfig) -> Result<Vec<Check>> {
    let ops: Vec<OracleOp> = if opts.ops.is_empty() {
        OracleOp::ALL.to_vec()
    } else {
        opts.ops.clone()
    };
    let mut out = Vec::new();
    for op in ops {
        for k in 0..opts.instances {
            let inst = instance(op, k, opts.seed);
            let (value, reference) = evaluate(op, &inst, cfg)?;
            let tolerance = opts.tolerance.unwrap_or(op.tolerance());
            out.push(Check {
                suite: "oracle".into(),
                op: op.name().into(),
                passed: agree(value, reference, tolerance),
                instance: inst,
                value,
                reference,
                tolerance,
            });
        }
    }
    Ok(out)
}

/// Dominance checks on one channel and ensemble: the likelihood-metric GLD
/// weak bound against ML1, the mutual-information-metric GLD weak bound
/// against random coding, and ML1 against ML2 on the strong user. Each check
/// passes when `value >= reference - tolerance`.
pub fn inequality_suite(
    ensemble: &EnsembleSpec,
    channel: &ChannelModel,
    points: &[RatePair],
    tolerance: f64,
    cfg: &SolverConfig,
) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let inst = |r: RatePair, metric: Option<DecodingMetric>| Instance {
        family: Family::Full,
        p_u: ensemble.p_u().probs().to_vec(),
        p_x_given_u: ensemble.p_x_given_u().matrix(),
        w1: channel.w1().matrix(),
        w2: channel.w2().matrix(),
        r_y: r.r_y,
        r_z: r.r_z,
        param: None,
        metric,
        point: None,
    };
    for &r in points {
        let ll = DecodingMetric::Likelihood;
        let a = gld::e_weak_gld(r, ensemble, channel, &ll, cfg)?.value;
        let b = ml::e_weak_ml1(r, ensemble, channel, cfg)?.value;
        out.push(dominance(
            "gld-likelihood>=ml1-weak",
            inst(r, Some(ll)),
            a,
            b,
            tolerance,
        ));
        let mi_metric = DecodingMetric::MutualInfo { beta: 1.0 };
        let a = gld::e_weak_gld(r, ensemble, channel, &mi_metric, cfg)?.value;
        let b = rc::e_weak_rc(r, ensemble, channel, cfg)?.value;
        out.push(dominance(
            "gld-mutual-info>=rc-weak",
            inst(r, Some(mi_metric)),
            a,
            b,
            tolerance,
        ));
    }
    Ok(out)
}

fn dominance(op: &str, instance: Instance, value: f64, reference: f64, tolerance: f64) -> Check {
    Check {
        suite: "inequality".into(),
        op: op.into(),
        instance,
        value,
        reference,
        tolerance,
        passed: value >= reference - tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_deterministic_and_valid() {
        for op in OracleOp::ALL {
            for k in 0..4 {
                let a = instance(op, k, 7);
                assert_eq!(a, instance(op, k, 7));
                a.ensemble().unwrap();
                a.channel().unwrap();
                if let Some(p) = &a.point {
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{op:?} {p:?}");
                    assert!(p.iter().all(|&v| v >= 0.0));
                }
            }
        }
    }

    #[test]
    fn concave_max_finds_interior_peak() {
        let (t, v) = concave_max(&|t| Ok(-(t - 0.37) * (t - 0.37))).unwrap();
        assert!((t - 0.37).abs() < 2e-3 && v.abs() < 1e-5);
    }

    #[test]
    fn channel_divergence_vanishes_at_the_channel() {
        let e = EnsembleSpec::from_vectors(&[0.3, 0.7], &[vec![0.6, 0.4], vec![0.2, 0.8]]).unwrap();
        let w = CondPmf::bsc(Axis::X, Axis::Z, 0.1).unwrap();
        let q = e.p_ux().compose(&w).unwrap();
        assert!(channel_divergence(&q, &[Axis::U, Axis::X], Axis::X, Axis::Z, &w).abs() < 1e-12);
    }
}
