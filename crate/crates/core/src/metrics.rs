//! Chernoff distances and the auxiliary functionals of the second
//! expurgation method.
//!
//! The inner maximizations over `Q_{X|UZ}` are convex once written as
//! couplings of `Q_{Z|U=u}` with `P_{X|U=u}`: a linear cost `-ln W` plus a
//! piecewise-linear penalty of `I(X;Z|U)`. They go to the coupling solver.
//! The outer searches over `Q_{Z|UU'}` go to the general engine.

use crate::error::{Error, Result};
use crate::opt::{
    ipf_fit, kl, linear_cost, maximize, min_cost_plus_info, minimize, Block, ConstraintSet, ExponentResult,
    InfoPenalty, SolverConfig,
};
use crate::prob::{entropy_of, mul0, Alphabet, Axis, CondPmf, EnsembleSpec, JointPmf, User};

const MARGINAL_TOL: f64 = 1e-9;

/// Chernoff parameter and the user whose channel the distance is built on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChernoffParams {
    pub s: f64,
    pub user: User,
}

impl ChernoffParams {
    pub fn new(s: f64, user: User) -> Result<Self> {
        check_unit("s", s)?;
        Ok(ChernoffParams { s, user })
    }
}

pub(crate) fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{name} = {v} outside [0, 1]")))
    }
}

/// `a^e` with `0^0 = 1`.
fn pow0(a: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if a == 0.0 {
        0.0
    } else {
        a.powf(e)
    }
}

/// `c_s(x, x') = -ln sum_y W^{1-s}(y|x) W^s(y|x')`, row-major over `(x, x')`.
pub fn chernoff_cost(w: &CondPmf, s: f64) -> Result<Vec<f64>> {
    check_unit("s", s)?;
    let nx = w.n_from();
    let mut c = vec![0.0; nx * nx];
    for x in 0..nx {
        for xp in 0..nx {
            let sum: f64 = w
                .row(x)
                .iter()
                .zip(w.row(xp))
                .map(|(&a, &b)| pow0(a, 1.0 - s) * pow0(b, s))
                .sum();
            c[x * nx + xp] = if sum > 0.0 { (-sum.ln()).max(0.0) } else { f64::INFINITY };
        }
    }
    Ok(c)
}

/// `D_s(Q_{XX'}) = sum Q(x,x') c_s(x,x')`; `q_xx` must carry axes `X` and `X'`.
pub fn chernoff_distance(q_xx: &JointPmf, w: &CondPmf, s: f64) -> Result<f64> {
    let c = chernoff_cost(w, s)?;
    let q = q_xx.marginal(&[Axis::X, Axis::Xp])?;
    if q.len() != c.len() {
        return Err(Error::ShapeMismatch("input alphabet of the channel".into()));
    }
    Ok(q.probs().iter().zip(&c).map(|(&a, &b)| mul0(a, b)).sum())
}

/// `f(Q_{XO}) = sum Q(x,o) ln W(o|x)`, with `O` the output axis of `w`.
pub fn avg_log_likelihood(q_xo: &JointPmf, w: &CondPmf) -> Result<f64> {
    let out = w.to_axes()[0].axis;
    let q = q_xo.marginal(&[Axis::X, out])?;
    if q.len() != w.rows().len() {
        return Err(Error::ShapeMismatch("channel and pmf disagree".into()));
    }
    Ok(q.probs()
        .iter()
        .zip(w.rows())
        .map(|(&a, &b)| if a > 0.0 { a * b.ln() } else { 0.0 })
        .sum())
}

/// `E_0` from the value of `I(X;Z|U)`.
pub fn e0_from_info(r_y: f64, info: f64, t: f64) -> Result<f64> {
    check_unit("t", t)?;
    let d = r_y - info;
    Ok(if d >= 0.0 { d * t } else { d })
}

/// `E_0(R_y, Q_{UXZ}, t)`; the output axis is whichever axis is not `U` or `X`.
pub fn e0(r_y: f64, q_uxo: &JointPmf, t: f64) -> Result<f64> {
    let out = output_axis(q_uxo)?;
    let info = crate::prob::conditional_mutual_info(q_uxo, &[Axis::X], &[out], &[Axis::U])?;
    e0_from_info(r_y, info, t)
}

fn output_axis(q: &JointPmf) -> Result<Axis> {
    let others: Vec<Axis> = q
        .labels()
        .into_iter()
        .filter(|a| *a != Axis::U && *a != Axis::X)
        .collect();
    match others.as_slice() {
        [a] => Ok(*a),
        _ => Err(Error::ShapeMismatch("expected axes U, X and one output".into())),
    }
}

/// Ensemble and channel data in flat form, shared by the inner solvers.
#[derive(Clone, Debug)]
pub(crate) struct Inner {
    pub nu: usize,
    pub nx: usize,
    pub no: usize,
    pub p_u: Vec<f64>,
    /// `P_{X|U}` row-major over `(u, x)`.
    pub p_x_u: Vec<f64>,
    /// `-ln W(o|x)` row-major over `(o, x)`.
    pub cost: Vec<f64>,
}

impl Inner {
    pub fn new(ensemble: &EnsembleSpec, w: &CondPmf) -> Result<Self> {
        if w.n_from() != ensemble.nx() {
            return Err(Error::ShapeMismatch("channel input vs ensemble X".into()));
        }
        let (nx, no) = (w.n_from(), w.n_to());
        let mut cost = vec![0.0; no * nx];
        for x in 0..nx {
            for o in 0..no {
                let p = w.get(x, o);
                cost[o * nx + x] = if p > 0.0 { -p.ln() } else { f64::INFINITY };
            }
        }
        Ok(Inner {
            nu: ensemble.nu(),
            nx,
            no,
            p_u: ensemble.p_u().probs().to_vec(),
            p_x_u: ensemble.p_x_given_u().rows().to_vec(),
            cost,
        })
    }

    /// One coupling block per `u` between `Q_{O|U=u}` and `P_{X|U=u}`.
    pub fn blocks(&self, q_uo: &[f64], cost: &[f64]) -> Vec<Block> {
        (0..self.nu)
            .map(|u| {
                let row = &q_uo[u * self.no..(u + 1) * self.no];
                let wgt: f64 = row.iter().sum();
                let rows = if wgt > 0.0 {
                    row.iter().map(|v| v / wgt).collect()
                } else {
                    vec![1.0 / self.no as f64; self.no]
                };
                Block {
                    weight: wgt,
                    rows,
                    cols: self.p_x_u[u * self.nx..(u + 1) * self.nx].to_vec(),
                    cost: cost.to_vec(),
                }
            })
            .collect()
    }

    fn check_u_marginal(&self, q_uo: &[f64]) -> Result<()> {
        for u in 0..self.nu {
            let m: f64 = q_uo[u * self.no..(u + 1) * self.no].iter().sum();
            if (m - self.p_u[u]).abs() > MARGINAL_TOL {
                return Err(Error::Infeasible(format!(
                    "U-marginal {m} differs from P_U({u}) = {}",
                    self.p_u[u]
                )));
            }
        }
        Ok(())
    }

    /// `H(O|U)` of a flat `(u, o)` array.
    pub fn cond_entropy(&self, q_uo: &[f64]) -> f64 {
        let qu: Vec<f64> = q_uo.chunks(self.no).map(|r| r.iter().sum()).collect();
        entropy_of(q_uo) - entropy_of(&qu)
    }

    /// `E_1` on a flat `(u, o)` array.
    pub fn e1(&self, r_y: f64, q_uo: &[f64], t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let pen = InfoPenalty {
            below: 1.0,
            above: 1.0 / t,
            knee: r_y,
        };
        match min_cost_plus_info(&self.blocks(q_uo, &self.cost), pen) {
            Some(s) => t * r_y - t * s.value,
            None => f64::NEG_INFINITY,
        }
    }

    /// Satellite part of `D_hat` with weight `w` on the divergence and `1 - w`
    /// on the clipped rate: `w min[<c,Q> + I + (1/w - 1)[I - R_y]_+] - w H(O|U)`.
    pub fn a_term(&self, r_y: f64, q_uo: &[f64], w: f64) -> f64 {
        if w == 0.0 {
            return 0.0;
        }
        let pen = InfoPenalty {
            below: 1.0,
            above: 1.0 / w,
            knee: r_y,
        };
        match min_cost_plus_info(&self.blocks(q_uo, &self.cost), pen) {
            Some(s) => w * s.value - w * self.cond_entropy(q_uo),
            None => f64::INFINITY,
        }
    }
}

fn uo_flat(q: &JointPmf, out: Axis, inner: &Inner) -> Result<Vec<f64>> {
    let m = q.marginal(&[Axis::U, out])?;
    if m.sizes() != [inner.nu, inner.no] {
        return Err(Error::ShapeMismatch("joint pmf vs ensemble and channel".into()));
    }
    Ok(m.into_probs())
}

/// `E_1(R_y, Q_{UZ}, t) = max_{Q_{X|UZ} in S(Q_UZ)} E_0 + t f`.
///
/// Fails with [`Error::Infeasible`] when `Q_U != P_U`. The value is `-inf`
/// when every admissible completion puts mass on a zero of `W`.
pub fn e1(r_y: f64, q_uz: &JointPmf, t: f64, ensemble: &EnsembleSpec, w2: &CondPmf) -> Result<f64> {
    check_unit("t", t)?;
    let inner = Inner::new(ensemble, w2)?;
    let q = uo_flat(q_uz, w2.to_axes()[0].axis, &inner)?;
    inner.check_u_marginal(&q)?;
    Ok(inner.e1(r_y, &q, t))
}

fn uu_constraints(q_uu: &JointPmf, ensemble: &EnsembleSpec) -> Result<(ConstraintSet, Vec<f64>)> {
    let q = q_uu.marginal(&[Axis::U, Axis::Up])?;
    let nu = ensemble.nu();
    if q.sizes() != [nu, nu] {
        return Err(Error::ShapeMismatch("Q_UU' vs ensemble".into()));
    }
    let p = ensemble.p_u().probs();
    for u in 0..nu {
        let row: f64 = (0..nu).map(|v| q.probs()[u * nu + v]).sum();
        let col: f64 = (0..nu).map(|v| q.probs()[v * nu + u]).sum();
        if (row - p[u]).abs() > MARGINAL_TOL || (col - p[u]).abs() > MARGINAL_TOL {
            return Err(Error::Infeasible("Q_UU' marginals differ from P_U".into()));
        }
    }
    let flat = q.probs().to_vec();
    Ok((ConstraintSet::new().fix(q), flat))
}

/// Splits a flat `(u, u', o)` array into the `(u, o)` and `(u', o)` marginals.
pub(crate) fn split_uuo(q: &[f64], nu: usize, no: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; nu * no];
    let mut b = vec![0.0; nu * no];
    for u in 0..nu {
        for v in 0..nu {
            for o in 0..no {
                let x = q[(u * nu + v) * no + o];
                a[u * no + o] += x;
                b[v * no + o] += x;
            }
        }
    }
    (a, b)
}

/// `I(O;U'|U)` and `I(O;U|U')` of a flat `(u, u', o)` array.
pub(crate) fn cross_infos(q: &[f64], nu: usize, no: usize) -> (f64, f64) {
    let (a, b) = split_uuo(q, nu, no);
    let quu: Vec<f64> = q.chunks(no).map(|r| r.iter().sum()).collect();
    let qu: Vec<f64> = quu.chunks(nu).map(|r| r.iter().sum()).collect();
    let qv: Vec<f64> = (0..nu).map(|v| (0..nu).map(|u| quu[u * nu + v]).sum()).collect();
    let h = entropy_of(q);
    let huu = entropy_of(&quu);
    let i1 = entropy_of(&a) + huu - h - entropy_of(&qu);
    let i2 = entropy_of(&b) + huu - h - entropy_of(&qv);
    (i1.max(0.0), i2.max(0.0))
}

fn uuo_shape(nu: usize, out: Alphabet) -> Vec<Alphabet> {
    vec![Alphabet::new(Axis::U, nu), Alphabet::new(Axis::Up, nu), out]
}

/// `B(R_y, t, Q_UU') = max_{Q_{Z|UU'}} H(Z|UU') + E_1(Q_UZ, 1-t) + E_1(Q_U'Z, t)`.
pub fn b_func(
    r_y: f64,
    t: f64,
    q_uu: &JointPmf,
    ensemble: &EnsembleSpec,
    w2: &CondPmf,
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    check_unit("t", t)?;
    let inner = Inner::new(ensemble, w2)?;
    let (cs, _) = uu_constraints(q_uu, ensemble)?;
    let (nu, no) = (inner.nu, inner.no);
    let shape = uuo_shape(nu, w2.to_axes()[0]);
    let obj = |q: &JointPmf| {
        let p = q.probs();
        let quu: Vec<f64> = p.chunks(no).map(|r| r.iter().sum()).collect();
        let h = entropy_of(p) - entropy_of(&quu);
        let (a, b) = split_uuo(p, nu, no);
        h + inner.e1(r_y, &a, 1.0 - t) + inner.e1(r_y, &b, t)
    };
    maximize(&obj, &cs, &shape, cfg)
}

/// Objective of `D_hat` at a point `Q_{UU'Z}`.
pub(crate) fn d_hat_objective(inner: &Inner, r_y: f64, t: f64, q: &[f64]) -> f64 {
    let (a, b) = split_uuo(q, inner.nu, inner.no);
    let (i1, i2) = cross_infos(q, inner.nu, inner.no);
    let tb = 1.0 - t;
    inner.a_term(r_y, &a, tb) + inner.a_term(r_y, &b, t) + tb * i1 + t * i2
}

/// `D_hat_t(R_y, Q_UU')`: the minimum over `Q_{Z|UU'}` and both satellite
/// conditionals. For fixed `Q_{UU'Z}` the satellite minimizations are solved
/// exactly, so the engine only searches over `Q_{Z|UU'}`.
pub fn d_hat(
    r_y: f64,
    t: f64,
    q_uu: &JointPmf,
    ensemble: &EnsembleSpec,
    w2: &CondPmf,
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    check_unit("t", t)?;
    let inner = Inner::new(ensemble, w2)?;
    let (cs, _) = uu_constraints(q_uu, ensemble)?;
    let shape = uuo_shape(inner.nu, w2.to_axes()[0]);
    let obj = |q: &JointPmf| d_hat_objective(&inner, r_y, t, q.probs());
    minimize(&obj, &cs, &shape, cfg)
}

/// `min { D(Q || P_UX x P_U'X') + <c, Q_XX'> : Q in P, Q_UU' fixed }` on axes
/// `(U, U', X, X')`, with its minimizer. Solved by proportional fitting of the
/// tilted product.
pub(crate) fn tilted_projection(q_uu: &[f64], ensemble: &EnsembleSpec, cost_xx: &[f64]) -> Option<(f64, Vec<f64>)> {
    let (nu, nx) = (ensemble.nu(), ensemble.nx());
    let pux = ensemble.p_ux();
    let p = pux.probs();
    let n = nu * nu * nx * nx;
    let mut prod = vec![0.0; n];
    let mut reference = vec![0.0; n];
    for u in 0..nu {
        for v in 0..nu {
            for x in 0..nx {
                for xp in 0..nx {
                    let i = ((u * nu + v) * nx + x) * nx + xp;
                    prod[i] = p[u * nx + x] * p[v * nx + xp];
                    let c = cost_xx[x * nx + xp];
                    reference[i] = if c.is_finite() { prod[i] * (-c).exp() } else { 0.0 };
                }
            }
        }
    }
    let sizes = [nu, nu, nx, nx];
    let margs = vec![
        (vec![0, 2], p.to_vec()),
        (vec![1, 3], p.to_vec()),
        (vec![0, 1], q_uu.to_vec()),
    ];
    let q = ipf_fit(&reference, &sizes, &margs)?;
    let mut cost_full = vec![0.0; n];
    for (i, c) in cost_full.iter_mut().enumerate() {
        *c = cost_xx[(i / nx % nx) * nx + i % nx];
    }
    let value = kl(&q, &prod) + linear_cost(&q, &cost_full);
    value.is_finite().then_some((value, q))
}

/// `K(R_y, s, Q_UU') = max_{Q_{XX'|UU'}} R_y - I(X;U'|U) - I(UX;X'|U') - D_s`,
/// with the conditional ranging over completions whose `(U,X)` and `(U',X')`
/// marginals equal `P_UX`.
pub fn k_func(r_y: f64, s: f64, q_uu: &JointPmf, ensemble: &EnsembleSpec, w: &CondPmf) -> Result<f64> {
    let cost = chernoff_cost(w, s)?;
    if w.n_from() != ensemble.nx() {
        return Err(Error::ShapeMismatch("channel input vs ensemble X".into()));
    }
    let (_, flat) = uu_constraints(q_uu, ensemble)?;
    let nu = ensemble.nu();
    let pu = ensemble.p_u().probs();
    let mut i_uu = 0.0;
    for u in 0..nu {
        for v in 0..nu {
            let x = flat[u * nu + v];
            if x > 0.0 {
                i_uu += x * (x / (pu[u] * pu[v])).ln();
            }
        }
    }
    Ok(match tilted_projection(&flat, ensemble, &cost) {
        Some((j, _)) => r_y + i_uu.max(0.0) - j,
        None => f64::NEG_INFINITY,
    })
}
