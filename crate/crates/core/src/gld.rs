//! Expurgated exponents of generalized likelihood decoders.
//!
//! `Omega` and `Upsilon` minimize over a channel `Q_{Y|C}` from the pair
//! configuration `C` to the output. Their objective is the divergence from
//! `W(y|x)` plus a clipped term that only sees a few marginals of the joint
//! (those entering `g`, `phi` and `psi`). For fixed values of those marginals
//! the divergence is minimized by an I-projection, so the search runs over the
//! exponential family `W(y|x) exp(theta . features(c, y))` instead of the full
//! conditional. The outer search and `theta` go to the engine jointly.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opt::{
    coupling_info, golden_max, maximize, min_cost_plus_info, solve, Block, ConstraintSet, ExponentResult, InfoExpr,
    InfoPenalty, Problem, SolverConfig,
};
use crate::prob::{entropy_of, Alphabet, Axis, ChannelModel, CondPmf, EnsembleSpec, JointPmf, RatePair};

const THETA_BOX: f64 = 25.0;
const MEMO_QUANTUM: f64 = 1e-6;

/// Decoding metric `g(Q)` of the generalized likelihood decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DecodingMetric {
    /// `E_Q ln W(O|X)` with the user's own channel.
    Likelihood,
    /// `beta E_Q ln W(O|X)`.
    TemperedLikelihood { beta: f64 },
    /// `beta E_Q ln W'(O|X)` for a fixed `W'` (rows indexed by `x`).
    Mismatched { beta: f64, channel: Vec<Vec<f64>> },
    /// `beta I_Q(UX;O)`.
    MutualInfo { beta: f64 },
}

impl DecodingMetric {
    pub fn validate(&self) -> Result<()> {
        let beta = self.beta();
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::OutOfRange(format!("beta = {beta}")));
        }
        if let DecodingMetric::Mismatched { channel, .. } = self {
            CondPmf::from_matrix(Axis::X, Axis::Y, channel)
                .map_err(|e| Error::InvalidChannel(format!("mismatched metric: {e}")))?;
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        match self {
            DecodingMetric::Likelihood => 1.0,
            DecodingMetric::TemperedLikelihood { beta }
            | DecodingMetric::Mismatched { beta, .. }
            | DecodingMetric::MutualInfo { beta } => *beta,
        }
    }

    pub fn name(&self) -> String {
        match self {
            DecodingMetric::Likelihood => "likelihood".into(),
            DecodingMetric::TemperedLikelihood { beta } => format!("tempered-likelihood({beta})"),
            DecodingMetric::Mismatched { beta, .. } => format!("mismatched({beta})"),
            DecodingMetric::MutualInfo { beta } => format!("mutual-info({beta})"),
        }
    }

    fn resolve(&self, w: &CondPmf) -> Result<Resolved> {
        self.validate()?;
        let (nx, no) = (w.n_from(), w.n_to());
        let beta = self.beta();
        let reference = match self {
            DecodingMetric::MutualInfo { .. } => return Ok(Resolved::Mi { beta }),
            DecodingMetric::Mismatched { channel, .. } => {
                if channel.len() != nx || channel.iter().any(|r| r.len() != no) {
                    return Err(Error::ShapeMismatch("mismatched metric vs channel".into()));
                }
                channel.concat()
            }
            _ => w.rows().to_vec(),
        };
        let mut gain = vec![0.0; nx * no];
        let mut cost = vec![0.0; no * nx];
        if beta > 0.0 {
            for x in 0..nx {
                for o in 0..no {
                    let p = reference[x * no + o];
                    let g = if p > 0.0 { beta * p.ln() } else { f64::NEG_INFINITY };
                    gain[x * no + o] = g;
                    cost[o * nx + x] = -g;
                }
            }
        }
        Ok(Resolved::Linear { gain, cost })
    }

    /// `g` of a pmf containing `U`, `X` and one output axis (`Y` or `Z`).
    /// `w` is the user's channel, used by the likelihood kinds.
    pub fn eval(&self, q: &JointPmf, w: &CondPmf) -> Result<f64> {
        let out = output_axis(q)?;
        let m = q.marginal(&[Axis::U, Axis::X, out])?;
        let s = m.sizes();
        if s[1] != w.n_from() || s[2] != w.n_to() {
            return Err(Error::ShapeMismatch("pmf vs channel".into()));
        }
        Ok(self.resolve(w)?.g(m.probs(), s[0], s[1], s[2]))
    }
}

/// A metric tied to one user channel, evaluated on flat `(u, x, o)` pmfs.
#[derive(Clone, Debug)]
pub struct BoundMetric {
    inner: Resolved,
    nu: usize,
    nx: usize,
    no: usize,
}

impl DecodingMetric {
    pub fn bind(&self, nu: usize, w: &CondPmf) -> Result<BoundMetric> {
        Ok(BoundMetric {
            inner: self.resolve(w)?,
            nu,
            nx: w.n_from(),
            no: w.n_to(),
        })
    }
}

impl BoundMetric {
    pub fn g(&self, q_uxo: &[f64]) -> f64 {
        self.inner.g(q_uxo, self.nu, self.nx, self.no)
    }
}

fn output_axis(q: &JointPmf) -> Result<Axis> {
    let labels = q.labels();
    [Axis::Y, Axis::Z]
        .into_iter()
        .find(|a| labels.contains(a))
        .ok_or_else(|| Error::UnknownAxis("pmf has no output axis".into()))
}

#[derive(Clone, Debug)]
enum Resolved {
    /// `g = <gain, Q_XO>`; `cost` is `-gain` laid out `(o, x)` for couplings.
    Linear {
        gain: Vec<f64>,
        cost: Vec<f64>,
    },
    Mi {
        beta: f64,
    },
}

fn info_of(joint: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (entropy_of(a) + entropy_of(b) - entropy_of(joint)).max(0.0)
}

impl Resolved {
    /// `g` on flat `(u, x, o)` cells.
    fn g(&self, q: &[f64], nu: usize, nx: usize, no: usize) -> f64 {
        match self {
            Resolved::Linear { gain, .. } => {
                let mut v = 0.0;
                for (i, &p) in q.iter().enumerate() {
                    if p > 0.0 {
                        v += p * gain[i % (nx * no)];
                    }
                }
                v
            }
            Resolved::Mi { beta } => {
                if *beta == 0.0 {
                    return 0.0;
                }
                let mut a = vec![0.0; nu * nx];
                let mut b = vec![0.0; no];
                for (i, &p) in q.iter().enumerate() {
                    a[i / no] += p;
                    b[i % no] += p;
                }
                beta * info_of(q, &a, &b)
            }
        }
    }
}

/// Largest `I(R;C)` over couplings of `r` and `c`: the maximum of a convex
/// function over the transportation polytope, taken over its north-west
/// corner vertices under all row and column orders.
fn max_coupling_info(r: &[f64], c: &[f64]) -> f64 {
    let (nr, nc) = (r.len(), c.len());
    let mut best: f64 = 0.0;
    let rows = permutations(nr);
    let cols = permutations(nc);
    let mut q = vec![0.0; nr * nc];
    for pr in &rows {
        for pc in &cols {
            q.iter_mut().for_each(|v| *v = 0.0);
            let mut rr: Vec<f64> = pr.iter().map(|&i| r[i]).collect();
            let mut cc: Vec<f64> = pc.iter().map(|&j| c[j]).collect();
            let (mut i, mut j) = (0, 0);
            while i < nr && j < nc {
                let m = rr[i].min(cc[j]);
                q[pr[i] * nc + pc[j]] += m;
                rr[i] -= m;
                cc[j] -= m;
                if rr[i] <= cc[j] {
                    i += 1;
                } else {
                    j += 1;
                }
            }
            best = best.max(coupling_info(&q, r, c));
        }
    }
    best
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut v = p.clone();
            v.insert(k, n - 1);
            out.push(v);
        }
    }
    out
}

#[derive(Default)]
struct Memo {
    map: RwLock<HashMap<Vec<i64>, f64>>,
}

impl Memo {
    /// Looks up `cells` on the `1e-6` lattice; misses are evaluated at the
    /// (renormalized) lattice point so the cached value depends on the key only.
    fn get(&self, cells: &[f64], f: impl FnOnce(&[f64]) -> f64) -> f64 {
        let key: Vec<i64> = cells.iter().map(|&v| (v / MEMO_QUANTUM).round() as i64).collect();
        if let Some(&v) = self.map.read().unwrap().get(&key) {
            return v;
        }
        let total: i64 = key.iter().sum();
        let point: Vec<f64> = key.iter().map(|&k| k as f64 / total as f64).collect();
        let v = f(&point);
        self.map.write().unwrap().insert(key, v);
        v
    }
}

/// Everything `phi`, `psi`, `Omega` and `Upsilon` need, in flat form.
pub(crate) struct GldCtx {
    nu: usize,
    nx: usize,
    no: usize,
    p_u: Vec<f64>,
    p_x_u: Vec<f64>,
    p_ux: Vec<f64>,
    ln_w: Vec<f64>,
    metric: Resolved,
    rates: RatePair,
    phi_memo: Memo,
    psi_memo: Memo,
}

impl GldCtx {
    pub fn new(rates: RatePair, ensemble: &EnsembleSpec, w: &CondPmf, g: &DecodingMetric) -> Result<Self> {
        if w.n_from() != ensemble.nx() {
            return Err(Error::ShapeMismatch("channel input vs ensemble X".into()));
        }
        Ok(GldCtx {
            nu: ensemble.nu(),
            nx: ensemble.nx(),
            no: w.n_to(),
            p_u: ensemble.p_u().probs().to_vec(),
            p_x_u: ensemble.p_x_given_u().rows().to_vec(),
            p_ux: ensemble.p_ux().into_probs(),
            ln_w: w
                .rows()
                .iter()
                .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
                .collect(),
            metric: g.resolve(w)?,
            rates,
            phi_memo: Memo::default(),
            psi_memo: Memo::default(),
        })
    }

    /// `phi(r, Q_UO)` on flat `(u, o)` cells, uncached.
    fn phi_raw(&self, r: f64, q_uo: &[f64]) -> f64 {
        let (nu, nx, no) = (self.nu, self.nx, self.no);
        match &self.metric {
            Resolved::Linear { cost, .. } => {
                let blocks: Vec<Block> = (0..nu)
                    .map(|u| {
                        let row = &q_uo[u * no..(u + 1) * no];
                        let wgt: f64 = row.iter().sum();
                        Block {
                            weight: wgt,
                            rows: if wgt > 0.0 {
                                row.iter().map(|v| v / wgt).collect()
                            } else {
                                vec![1.0 / no as f64; no]
                            },
                            cols: self.p_x_u[u * nx..(u + 1) * nx].to_vec(),
                            cost: cost.clone(),
                        }
                    })
                    .collect();
                match min_cost_plus_info(&blocks, InfoPenalty::hard_cap(r)) {
                    Some(s) => r - s.value,
                    None => f64::NEG_INFINITY,
                }
            }
            Resolved::Mi { beta } => {
                let qu: Vec<f64> = q_uo.chunks(no).map(|c| c.iter().sum()).collect();
                let mut qo = vec![0.0; no];
                for (i, &p) in q_uo.iter().enumerate() {
                    qo[i % no] += p;
                }
                let i_uo = info_of(q_uo, &qu, &qo);
                let mut v = r + beta * i_uo;
                if *beta > 1.0 {
                    let mut i_max = 0.0;
                    for u in 0..nu {
                        if qu[u] > 0.0 {
                            let row: Vec<f64> = q_uo[u * no..(u + 1) * no].iter().map(|p| p / qu[u]).collect();
                            i_max += qu[u] * max_coupling_info(&row, &self.p_x_u[u * nx..(u + 1) * nx]);
                        }
                    }
                    v += (beta - 1.0) * r.min(i_max);
                }
                v
            }
        }
    }

    fn phi(&self, q_uo: &[f64]) -> f64 {
        self.phi_memo.get(q_uo, |q| self.phi_raw(self.rates.r_y, q))
    }

    /// `psi(R_y, R_z, Q_O)`, uncached.
    fn psi_raw(&self, q_o: &[f64]) -> f64 {
        let (nu, nx, no) = (self.nu, self.nx, self.no);
        let (r_y, r_z) = (self.rates.r_y, self.rates.r_z);
        let total = r_y + r_z;
        match &self.metric {
            Resolved::Mi { beta } if *beta <= 1.0 => return total,
            Resolved::Linear { cost, .. } => {
                // Without the I(U;O) cap this is one coupling of Q_O with P_UX.
                let nux = nu * nx;
                let mut c = vec![0.0; no * nux];
                for o in 0..no {
                    for ux in 0..nux {
                        c[o * nux + ux] = cost[o * nx + ux % nx];
                    }
                }
                let block = Block {
                    weight: 1.0,
                    rows: q_o.to_vec(),
                    cols: self.p_ux.clone(),
                    cost: c,
                };
                match min_cost_plus_info(&[block], InfoPenalty::hard_cap(total)) {
                    None => return f64::NEG_INFINITY,
                    Some(s) => {
                        let mut q_uo = vec![0.0; nu * no];
                        for (i, &p) in s.couplings[0].iter().enumerate() {
                            let (o, ux) = (i / nux, i % nux);
                            q_uo[(ux / nx) * no + o] += p;
                        }
                        if info_of(&q_uo, &self.p_u, q_o) <= r_z + 1e-12 {
                            return total - s.value;
                        }
                    }
                }
            }
            Resolved::Mi { .. } => {}
        }
        self.psi_search(q_o)
    }

    /// `max { phi(R_y + R_z - I(U;O), Q_UO) : Q_UO in coupling(P_U, Q_O), I(U;O) <= R_z }`.
    /// The objective is concave in `Q_UO`.
    fn psi_search(&self, q_o: &[f64]) -> f64 {
        let (nu, no) = (self.nu, self.no);
        let (r_y, r_z) = (self.rates.r_y, self.rates.r_z);
        let obj = |q_uo: &[f64]| {
            let i = info_of(q_uo, &self.p_u, q_o);
            if i > r_z + 1e-12 {
                return f64::NEG_INFINITY;
            }
            self.phi_raw(r_y + r_z - i, q_uo)
        };
        if nu == 2 && no == 2 {
            let (p0, q0) = (self.p_u[0], q_o[0]);
            let cells = |a: f64| [a, p0 - a, q0 - a, 1.0 - p0 - q0 + a].map(|v: f64| v.max(0.0));
            let info = |a: f64| info_of(&cells(a), &self.p_u, q_o);
            let (lo, hi) = ((p0 + q0 - 1.0).max(0.0), p0.min(q0));
            let mid = (p0 * q0).clamp(lo, hi);
            // I is convex in `a` and vanishes at the product point.
            let edge = |end: f64| {
                if info(end) <= r_z {
                    return end;
                }
                let (mut inside, mut out) = (mid, end);
                for _ in 0..100 {
                    let m = 0.5 * (inside + out);
                    if info(m) <= r_z {
                        inside = m;
                    } else {
                        out = m;
                    }
                }
                inside
            };
            let (a, b) = (edge(lo), edge(hi));
            if b - a < 1e-15 {
                return obj(&cells(a));
            }
            let (_, v) = golden_max(&|x| obj(&cells(x)), a, b, 1e-10);
            return v.max(obj(&cells(a))).max(obj(&cells(b))).max(obj(&cells(mid)));
        }
        let shape = vec![Alphabet::new(Axis::U, nu), Alphabet::new(Axis::Y, no)];
        let pu = JointPmf::from_raw(vec![shape[0]], self.p_u.clone());
        let po = JointPmf::from_raw(vec![shape[1]], q_o.to_vec());
        let cs = ConstraintSet::new()
            .fix(pu)
            .fix(po)
            .bound(InfoExpr::mi(&[Axis::U], &[Axis::Y]), r_z);
        let f = |q: &JointPmf| obj(q.probs());
        let cfg = SolverConfig::default().with_starts(4);
        maximize(&f, &cs, &shape, &cfg).map_or(f64::NEG_INFINITY, |r| r.value)
    }

    fn psi(&self, q_o: &[f64]) -> f64 {
        self.psi_memo.get(q_o, |q| self.psi_raw(q))
    }

    fn n_theta(&self) -> usize {
        let k = self.no - 1;
        match self.metric {
            Resolved::Linear { .. } => k * (2 * self.nx + self.nu),
            Resolved::Mi { .. } => 2 * k * self.nu * self.nx,
        }
    }

    /// Feature weight of `(c, o)` for `o >= 1`, where `c` is described by
    /// the true pair `(u, x)` and the competitor `(u2, x2)`.
    fn feature(&self, theta: &[f64], u: usize, x: usize, u2: usize, x2: usize, o: usize) -> f64 {
        let k = self.no - 1;
        let j = o - 1;
        match self.metric {
            Resolved::Linear { .. } => {
                let (nx, nu) = (self.nx, self.nu);
                theta[x * k + j] + theta[nx * k + u * k + j] + theta[(nx + nu) * k + x2 * k + j]
            }
            Resolved::Mi { .. } => {
                let half = k * self.nu * self.nx;
                theta[(u * self.nx + x) * k + j] + theta[half + (u2 * self.nx + x2) * k + j]
            }
        }
    }

    /// `D(Q_{Y|C} || W | Q_C) + [max{g(Q_UXO), phi, psi} - g(Q_U2X2O)]_+` with
    /// `Q_{Y|C}` from `theta`. `pairs[c] = (u, x, u2, x2)`.
    fn inner(&self, q_c: &[f64], pairs: &[[usize; 4]], theta: &[f64]) -> f64 {
        let (nu, nx, no) = (self.nu, self.nx, self.no);
        let mut div = 0.0;
        let mut t_uxo = vec![0.0; nu * nx * no];
        let mut c_uxo = vec![0.0; nu * nx * no];
        let mut logits = vec![0.0; no];
        for (c, &[u, x, u2, x2]) in pairs.iter().enumerate() {
            let w = q_c[c];
            if w <= 0.0 {
                continue;
            }
            let mut top = f64::NEG_INFINITY;
            for o in 0..no {
                let lw = self.ln_w[x * no + o];
                logits[o] = if lw == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else if o == 0 {
                    lw
                } else {
                    lw + self.feature(theta, u, x, u2, x2, o)
                };
                top = top.max(logits[o]);
            }
            let z: f64 = logits.iter().map(|&l| (l - top).exp()).sum();
            let log_z = top + z.ln();
            for o in 0..no {
                if logits[o] == f64::NEG_INFINITY {
                    continue;
                }
                let lp = logits[o] - log_z;
                let p = lp.exp();
                if p > 0.0 {
                    div += w * p * (lp - self.ln_w[x * no + o]);
                }
                t_uxo[(u * nx + x) * no + o] += w * p;
                c_uxo[(u2 * nx + x2) * no + o] += w * p;
            }
        }
        let g1 = self.metric.g(&t_uxo, nu, nx, no);
        let g2 = self.metric.g(&c_uxo, nu, nx, no);
        if g2 == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        let mut q_uo = vec![0.0; nu * no];
        let mut q_o = vec![0.0; no];
        for (i, &p) in t_uxo.iter().enumerate() {
            let (u, o) = (i / (nx * no), i % no);
            q_uo[u * no + o] += p;
            q_o[o] += p;
        }
        let top = g1.max(self.phi(&q_uo)).max(self.psi(&q_o));
        div.max(0.0) + (top - g2).max(0.0)
    }

    fn pairs_p(&self) -> Vec<[usize; 4]> {
        let (nu, nx) = (self.nu, self.nx);
        let mut v = Vec::with_capacity(nu * nu * nx * nx);
        for u in 0..nu {
            for u2 in 0..nu {
                for x in 0..nx {
                    for x2 in 0..nx {
                        v.push([u, x, u2, x2]);
                    }
                }
            }
        }
        v
    }

    fn pairs_s(&self) -> Vec<[usize; 4]> {
        let (nu, nx) = (self.nu, self.nx);
        let mut v = Vec::with_capacity(nu * nx * nx);
        for u in 0..nu {
            for x in 0..nx {
                for x2 in 0..nx {
                    v.push([u, x, u, x2]);
                }
            }
        }
        v
    }

    fn theta_box(&self) -> (Vec<(f64, f64)>, Vec<f64>) {
        let k = self.n_theta();
        (vec![(-THETA_BOX, THETA_BOX); k], vec![0.0; k])
    }
}

fn shape_p(nu: usize, nx: usize) -> Vec<Alphabet> {
    vec![
        Alphabet::new(Axis::U, nu),
        Alphabet::new(Axis::Up, nu),
        Alphabet::new(Axis::X, nx),
        Alphabet::new(Axis::Xp, nx),
    ]
}

fn shape_s(nu: usize, nx: usize) -> Vec<Alphabet> {
    vec![
        Alphabet::new(Axis::U, nu),
        Alphabet::new(Axis::X, nx),
        Alphabet::new(Axis::Xp, nx),
    ]
}

/// `I(A;B)` where the flat cells are grouped as `(a, b)` after permuting.
fn split_info(q: &[f64], key_a: impl Fn(usize) -> usize, na: usize, key_b: impl Fn(usize) -> usize, nb: usize) -> f64 {
    let mut a = vec![0.0; na];
    let mut b = vec![0.0; nb];
    let mut ab = vec![0.0; na * nb];
    for (i, &p) in q.iter().enumerate() {
        let (ia, ib) = (key_a(i), key_b(i));
        a[ia] += p;
        b[ib] += p;
        ab[ia * nb + ib] += p;
    }
    info_of(&ab, &a, &b)
}

/// `phi(R_y, Q_UO) = max { g(Q) - I(X;O|U) : Q_{X|UO}, Q_UX = P_UX, I(X;O|U) <= R_y } + R_y`.
/// `w` is the user's channel (its output axis must match `q_uo`).
pub fn phi(r_y: f64, q_uo: &JointPmf, g: &DecodingMetric, ensemble: &EnsembleSpec, w: &CondPmf) -> Result<f64> {
    let ctx = GldCtx::new(RatePair::new(r_y, 0.0)?, ensemble, w, g)?;
    let out = output_axis(q_uo)?;
    let m = q_uo.marginal(&[Axis::U, out])?;
    if m.sizes() != [ctx.nu, ctx.no] {
        return Err(Error::ShapeMismatch("Q_UO vs ensemble and channel".into()));
    }
    for (u, row) in m.probs().chunks(ctx.no).enumerate() {
        let s: f64 = row.iter().sum();
        if (s - ctx.p_u[u]).abs() > 1e-9 {
            return Err(Error::Infeasible(format!("Q_U({u}) = {s} differs from P_U")));
        }
    }
    Ok(ctx.phi_raw(r_y, m.probs()))
}

/// `psi(R_y, R_z, Q_O) = max { g(Q) - I(UX;O) : Q_{UX|O}, Q_UX = P_UX,
/// I(U;O) <= R_z, I(UX;O) <= R_y + R_z } + R_y + R_z`.
pub fn psi(rates: RatePair, q_o: &JointPmf, g: &DecodingMetric, ensemble: &EnsembleSpec, w: &CondPmf) -> Result<f64> {
    let ctx = GldCtx::new(rates, ensemble, w, g)?;
    let out = output_axis(q_o)?;
    let m = q_o.marginal(&[out])?;
    if m.len() != ctx.no {
        return Err(Error::ShapeMismatch("Q_O vs channel".into()));
    }
    Ok(ctx.psi_raw(m.probs()))
}

fn theta_only(
    ctx: &GldCtx,
    q: &JointPmf,
    shape: Vec<Alphabet>,
    pairs: Vec<[usize; 4]>,
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    let m = q.marginal(&shape.iter().map(|a| a.axis).collect::<Vec<_>>())?;
    if m.sizes() != shape.iter().map(|a| a.size).collect::<Vec<_>>() {
        return Err(Error::ShapeMismatch("pair pmf vs ensemble".into()));
    }
    let cs = ConstraintSet::new().fix(m.clone());
    let cells = m.probs().to_vec();
    let obj = |_: &[f64], theta: &[f64]| ctx.inner(&cells, &pairs, theta);
    let (bounds, start) = ctx.theta_box();
    let problem = Problem::new(&shape, &cs, &obj).with_params(bounds, start);
    let s = solve(&problem, cfg)?;
    Ok(ExponentResult::from_solution(s, &shape, false))
}

/// `Omega(Q_UU'XX', R_y, R_z)` on the channel `w` (the weak user's for the weak
/// bound, the strong user's for the strong one).
pub fn omega(
    q: &JointPmf,
    rates: RatePair,
    g: &DecodingMetric,
    ensemble: &EnsembleSpec,
    w: &CondPmf,
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    let ctx = GldCtx::new(rates, ensemble, w, g)?;
    let (shape, pairs) = (shape_p(ctx.nu, ctx.nx), ctx.pairs_p());
    theta_only(&ctx, q, shape, pairs, cfg)
}

/// `Upsilon(Q_UXX', R_y, R_z)` on the channel `w`.
pub fn upsilon(
    q: &JointPmf,
    rates: RatePair,
    g: &DecodingMetric,
    ensemble: &EnsembleSpec,
    w: &CondPmf,
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    let ctx = GldCtx::new(rates, ensemble, w, g)?;
    let (shape, pairs) = (shape_s(ctx.nu, ctx.nx), ctx.pairs_s());
    theta_only(&ctx, q, shape, pairs, cfg)
}

fn joint_min(
    ctx: &GldCtx,
    shape: Vec<Alphabet>,
    pairs: Vec<[usize; 4]>,
    cs: &ConstraintSet,
    info: &(dyn Fn(&[f64]) -> f64 + Sync),
    offset: f64,
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    let obj = |cells: &[f64], theta: &[f64]| info(cells) + ctx.inner(cells, &pairs, theta);
    let (bounds, start) = ctx.theta_box();
    let problem = Problem::new(&shape, cs, &obj).with_params(bounds, start);
    let s = solve(&problem, cfg)?;
    let mut r = ExponentResult::from_solution(s, &shape, false);
    r.value -= offset;
    Ok(r)
}

fn uxux_info(nu: usize, nx: usize) -> impl Fn(&[f64]) -> f64 + Sync {
    // Cells are (u, u', x, x'); pair (u,x) against (u',x').
    move |q: &[f64]| {
        split_info(
            q,
            |i| {
                let (u, x) = (i / (nu * nx * nx), (i / nx) % nx);
                u * nx + x
            },
            nu * nx,
            |i| {
                let (u2, x2) = ((i / (nx * nx)) % nu, i % nx);
                u2 * nx + x2
            },
            nu * nx,
        )
    }
}

/// Weak-user bound: minimum over `P` with `I(UX;U'X') <= 2R_y + R_z` and
/// `I(U;U') <= R_z` of `I(UX;U'X') + Omega` on `W_2`, minus `R_y + R_z`.
pub fn e_weak_gld(
    rates: RatePair,
    ensemble: &EnsembleSpec,
    channel: &ChannelModel,
    g: &DecodingMetric,
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    let ctx = GldCtx::new(rates, ensemble, channel.w2(), g)?;
    let (nu, nx) = (ctx.nu, ctx.nx);
    let cs = ConstraintSet::set_p(ensemble)
        .strict_bound(
            InfoExpr::mi(&[Axis::U, Axis::X], &[Axis::Up, Axis::Xp]),
            2.0 * rates.r_y + rates.r_z,
        )
        .strict_bound(InfoExpr::mi(&[Axis::U], &[Axis::Up]), rates.r_z);
    let info = uxux_info(nu, nx);
    joint_min(
        &ctx,
        shape_p(nu, nx),
        ctx.pairs_p(),
        &cs,
        &info,
        rates.r_y + rates.r_z,
        cfg,
    )
}

/// Within-cloud strong-user term: minimum over `S` with `I(X;X'|U) <= R_y`
/// of `I(X;X'|U) + Upsilon` on `W_1`, minus `R_y`.
pub fn e_su1_gld(
    rates: RatePair,
    ensemble: &EnsembleSpec,
    channel: &ChannelModel,
    g: &DecodingMetric,
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    let ctx = GldCtx::new(rates, ensemble, channel.w1(), g)?;
    let (nu, nx) = (ctx.nu, ctx.nx);
    let cs = ConstraintSet::set_s(ensemble).strict_bound(InfoExpr::cmi(&[Axis::X], &[Axis::Xp], &[Axis::U]), rates.r_y);
    let p_u = ctx.p_u.clone();
    let info = move |q: &[f64]| {
        (0..nu)
            .map(|u| {
                let block = &q[u * nx * nx..(u + 1) * nx * nx];
                if p_u[u] <= 0.0 {
                    return 0.0;
                }
                let s: f64 = block.iter().sum();
                let mut a = vec![0.0; nx];
                let mut b = vec![0.0; nx];
                for (i, &p) in block.iter().enumerate() {
                    a[i / nx] += p;
                    b[i % nx] += p;
                }
                // I(X;X'|U=u) scaled by the block mass.
                let n = |v: &[f64]| v.iter().map(|p| p / s).collect::<Vec<_>>();
                if s > 0.0 {
                    s * info_of(&n(block), &n(&a), &n(&b))
                } else {
                    0.0
                }
            })
            .sum::<f64>()
    };
    joint_min(&ctx, shape_s(nu, nx), ctx.pairs_s(), &cs, &info, rates.r_y, cfg)
}

/// Cross-cloud strong-user term: minimum over `P` with `I(UX;U'X') <= R_y + R_z`
/// and `I(UX;U') <= R_z` of `I(UX;U'X') + Omega` on `W_1`, minus `R_y + R_z`.
pub fn e_su2_gld(
    rates: RatePair,
    ensemble: &EnsembleSpec,
    channel: &ChannelModel,
    g: &DecodingMetric,
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    let ctx = GldCtx::new(rates, ensemble, channel.w1(), g)?;
    let (nu, nx) = (ctx.nu, ctx.nx);
    let cs = ConstraintSet::set_p(ensemble)
        .strict_bound(
            InfoExpr::mi(&[Axis::U, Axis::X], &[Axis::Up, Axis::Xp]),
            rates.r_y + rates.r_z,
        )
        .strict_bound(InfoExpr::mi(&[Axis::U, Axis::X], &[Axis::Up]), rates.r_z);
    let info = uxux_info(nu, nx);
    joint_min(
        &ctx,
        shape_p(nu, nx),
        ctx.pairs_p(),
        &cs,
        &info,
        rates.r_y + rates.r_z,
        cfg,
    )
}

/// Strong-user bound `min{E_su1, E_su2}` on `W_1`; components `su1`, `su2`.
pub fn e_strong_gld(
    rates: RatePair,
    ensemble: &EnsembleSpec,
    channel: &ChannelModel,
    g: &DecodingMetric,
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    let a = e_su1_gld(rates, ensemble, channel, g, cfg)?;
    let b = e_su2_gld(rates, ensemble, channel, g, cfg)?;
    let components = vec![("su1".to_string(), a.value), ("su2".to_string(), b.value)];
    let evaluations = a.evaluations + b.evaluations;
    let mut r = if b.value < a.value { b } else { a };
    r.components = components;
    r.evaluations = evaluations;
    Ok(r)
}
