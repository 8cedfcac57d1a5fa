//! Constrained optimization over joint pmfs.
//!
//! Fixed marginals are eliminated by working in the polytope they cut out:
//! moves follow null-space directions and are clipped at the nonnegativity
//! boundary. Information inequalities go through an augmented Lagrangian with
//! an exterior quadratic penalty, followed by a mixing repair toward the
//! product witness. Nonconvex objectives get multistarts.

mod coupling;
mod oracle;
mod polytope;
mod scalar;
mod search;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{entropy_of, Alphabet, Axis, EnsembleSpec, JointPmf, Projector};

pub use coupling::{
    coupling_info, ipf_fit, kl, linear_cost, min_cost_plus_info, sinkhorn, Block, CouplingSolution, InfoPenalty,
};
pub use oracle::{grid_oracle, grid_oracle_max, grid_oracle_refined, OracleSpec};
pub use scalar::{golden_max, scalar_max, scalar_max_with};
pub use search::{solve, Problem, Solution};

pub(crate) use polytope::Polytope;

/// `I(a; b | given)` on named axes.
#[derive(Clone, Debug, PartialEq)]
pub struct InfoExpr {
    pub a: Vec<Axis>,
    pub b: Vec<Axis>,
    pub given: Vec<Axis>,
}

impl InfoExpr {
    pub fn mi(a: &[Axis], b: &[Axis]) -> Self {
        InfoExpr {
            a: a.to_vec(),
            b: b.to_vec(),
            given: Vec::new(),
        }
    }

    pub fn cmi(a: &[Axis], b: &[Axis], given: &[Axis]) -> Self {
        InfoExpr {
            a: a.to_vec(),
            b: b.to_vec(),
            given: given.to_vec(),
        }
    }

    pub fn eval(&self, q: &JointPmf) -> Result<f64> {
        crate::prob::conditional_mutual_info(q, &self.a, &self.b, &self.given)
    }

    pub(crate) fn compile(&self, shape: &[Alphabet]) -> Result<CompiledInfo> {
        let sizes: Vec<usize> = shape.iter().map(|a| a.size).collect();
        let pos = |axes: &[Axis]| -> Result<Vec<usize>> {
            axes.iter()
                .map(|x| {
                    shape
                        .iter()
                        .position(|a| a.axis == *x)
                        .ok_or_else(|| Error::UnknownAxis(x.to_string()))
                })
                .collect()
        };
        let cat = |x: &[Axis], y: &[Axis]| {
            let mut v = x.to_vec();
            v.extend_from_slice(y);
            v
        };
        let ac = cat(&self.a, &self.given);
        let bc = cat(&self.b, &self.given);
        let abc = cat(&ac, &self.b);
        Ok(CompiledInfo {
            pac: Projector::new(&sizes, &pos(&ac)?),
            pbc: Projector::new(&sizes, &pos(&bc)?),
            pabc: Projector::new(&sizes, &pos(&abc)?),
            pc: if self.given.is_empty() {
                None
            } else {
                Some(Projector::new(&sizes, &pos(&self.given)?))
            },
        })
    }
}

impl fmt::Display for InfoExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[Axis]| v.iter().map(|a| a.label()).collect::<String>();
        write!(f, "I({};{}", join(&self.a), join(&self.b))?;
        if !self.given.is_empty() {
            write!(f, "|{}", join(&self.given))?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug)]
pub(crate) struct CompiledInfo {
    pac: Projector,
    pbc: Projector,
    pabc: Projector,
    pc: Option<Projector>,
}

impl CompiledInfo {
    pub fn eval(&self, q: &[f64]) -> f64 {
        let h = |p: &Projector| entropy_of(&p.project_vec(q));
        let hc = self.pc.as_ref().map_or(0.0, h);
        (h(&self.pac) + h(&self.pbc) - h(&self.pabc) - hc).max(0.0)
    }
}

/// `expr <= bound` (or `< bound` when `strict`, closed to `<=` by the solver).
#[derive(Clone, Debug, PartialEq)]
pub struct InfoBound {
    pub expr: InfoExpr,
    pub strict: bool,
    pub bound: f64,
}

/// Fixed marginals and information bounds defining a feasible set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintSet {
    pub fixed_marginals: Vec<JointPmf>,
    pub info_bounds: Vec<InfoBound>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        ConstraintSet::default()
    }

    /// Requires the marginal on `target`'s axes to equal `target`.
    pub fn fix(mut self, target: JointPmf) -> Self {
        self.fixed_marginals.push(target);
        self
    }

    pub fn bound(mut self, expr: InfoExpr, bound: f64) -> Self {
        self.info_bounds.push(InfoBound {
            expr,
            strict: false,
            bound,
        });
        self
    }

    pub fn strict_bound(mut self, expr: InfoExpr, bound: f64) -> Self {
        self.info_bounds.push(InfoBound {
            expr,
            strict: true,
            bound,
        });
        self
    }

    /// `Q_UX = Q_UX' = P_UX` on axes `(U, X, X')`.
    pub fn set_s(ensemble: &EnsembleSpec) -> Self {
        let pux = ensemble.p_ux();
        let puxp = pux.relabel(&[(Axis::X, Axis::Xp)]).expect("distinct labels");
        ConstraintSet::new().fix(pux).fix(puxp)
    }

    /// `Q_UX = Q_U'X' = P_UX` on axes `(U, U', X, X')`.
    pub fn set_p(ensemble: &EnsembleSpec) -> Self {
        let pux = ensemble.p_ux();
        let pupxp = pux
            .relabel(&[(Axis::U, Axis::Up), (Axis::X, Axis::Xp)])
            .expect("distinct labels");
        ConstraintSet::new().fix(pux).fix(pupxp)
    }

    /// `Q_U = Q_U' = P_U` on axes `(U, U')`.
    pub fn set_q(ensemble: &EnsembleSpec) -> Self {
        let pu = ensemble.p_u().clone();
        let pup = pu.relabel(&[(Axis::U, Axis::Up)]).expect("distinct labels");
        ConstraintSet::new().fix(pu).fix(pup)
    }

    /// Checks fixed marginals and bounds at `q`.
    pub fn is_satisfied(&self, q: &JointPmf, tol: f64) -> Result<bool> {
        for m in &self.fixed_marginals {
            let got = q.marginal(&m.labels())?;
            if got.max_abs_diff(m)? > tol {
                return Ok(false);
            }
        }
        for b in &self.info_bounds {
            if b.expr.eval(q)? > b.bound + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Replaces bounds of the form `I(A;B|C) <= 0` by the fixed marginal
    /// `Q_ABC = Q_AC Q_BC / Q_C` whenever `Q_AC` and `Q_BC` are pinned down by
    /// existing fixed marginals.
    pub(crate) fn absorb_zero_bounds(&self) -> Result<ConstraintSet> {
        let mut out = ConstraintSet {
            fixed_marginals: self.fixed_marginals.clone(),
            info_bounds: Vec::new(),
        };
        for b in &self.info_bounds {
            if b.bound > 1e-12 || b.bound < -1e-12 {
                out.info_bounds.push(b.clone());
                continue;
            }
            let cat = |x: &[Axis], y: &[Axis]| {
                let mut v = x.to_vec();
                v.extend_from_slice(y);
                v
            };
            let ac = cat(&b.expr.a, &b.expr.given);
            let bc = cat(&b.expr.b, &b.expr.given);
            let find = |axes: &[Axis]| {
                out.fixed_marginals
                    .iter()
                    .find(|m| axes.iter().all(|x| m.labels().contains(x)))
                    .map(|m| m.marginal(axes))
            };
            match (find(&ac), find(&bc)) {
                (Some(qac), Some(qbc)) => {
                    let qac = qac?;
                    let qbc = qbc?;
                    // Q_AC Q_{B|C} on axes (A, C, B).
                    let joint = if b.expr.given.is_empty() {
                        qac.product(&qbc)?
                    } else {
                        qac.compose(&qbc.conditional(&b.expr.b, &b.expr.given)?)?
                    };
                    out.fixed_marginals.push(joint);
                }
                _ => out.info_bounds.push(b.clone()),
            }
        }
        Ok(out)
    }
}

/// Solver knobs; exposed verbatim in the CLI config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub coarse_grid_points: usize,
    pub refine_iterations: usize,
    pub multistart_count: usize,
    pub tolerance_nats: f64,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            coarse_grid_points: 7,
            refine_iterations: 200,
            multistart_count: 16,
            tolerance_nats: 1e-4,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_grid_points < 2 || self.multistart_count == 0 || !(self.tolerance_nats > 0.0) {
            return Err(Error::OutOfRange(format!("solver config {self:?}")));
        }
        Ok(())
    }

    pub fn with_starts(&self, n: usize) -> Self {
        SolverConfig {
            multistart_count: n.max(1),
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SolverConfig {
            rng_seed: seed,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Converged,
    GridOnly,
    Infeasible,
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverStatus::Converged => "converged",
            SolverStatus::GridOnly => "grid-only",
            SolverStatus::Infeasible => "infeasible",
        })
    }
}

/// Exponent value in nats with the optimizer that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentResult {
    pub value: f64,
    pub argmin: Option<JointPmf>,
    /// Maximizing `s` or `t`, when the exponent has an outer scalar max.
    pub param: Option<f64>,
    /// Named component values (e.g. the two strong-user terms).
    pub components: Vec<(String, f64)>,
    pub active_constraints: Vec<String>,
    pub status: SolverStatus,
    pub evaluations: u64,
}

impl ExponentResult {
    /// `max(value, 0)`: a negative exponent is a vacuous bound.
    pub fn clamped(&self) -> f64 {
        crate::prob::pos_part(self.value)
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub(crate) fn from_solution(s: Solution, shape: &[Alphabet], negate: bool) -> Self {
        let value = if negate { -s.value } else { s.value };
        ExponentResult {
            value,
            argmin: (s.status != SolverStatus::Infeasible).then(|| JointPmf::from_raw(shape.to_vec(), s.cells)),
            param: None,
            components: Vec::new(),
            active_constraints: s.active,
            status: s.status,
            evaluations: s.evaluations,
        }
    }
}

/// Minimizes `objective` over the pmfs on `shape` satisfying `constraints`.
pub fn minimize(
    objective: &(dyn Fn(&JointPmf) -> f64 + Sync),
    constraints: &ConstraintSet,
    shape: &[Alphabet],
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    minimize_from(objective, constraints, shape, cfg, Vec::new())
}

/// As [`minimize`], with extra starting points (cells on `shape`).
pub fn minimize_from(
    objective: &(dyn Fn(&JointPmf) -> f64 + Sync),
    constraints: &ConstraintSet,
    shape: &[Alphabet],
    cfg: &SolverConfig,
    starts: Vec<Vec<f64>>,
) -> Result<ExponentResult> {
    let f = |cells: &[f64], _: &[f64]| objective(&JointPmf::from_raw(shape.to_vec(), cells.to_vec()));
    let mut problem = Problem::new(shape, constraints, &f);
    problem.starts = starts;
    Ok(ExponentResult::from_solution(solve(&problem, cfg)?, shape, false))
}

/// Maximizes `objective`; the value is `-inf` on an empty feasible set.
pub fn maximize(
    objective: &(dyn Fn(&JointPmf) -> f64 + Sync),
    constraints: &ConstraintSet,
    shape: &[Alphabet],
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    let f = |cells: &[f64], _: &[f64]| -objective(&JointPmf::from_raw(shape.to_vec(), cells.to_vec()));
    let problem = Problem::new(shape, constraints, &f);
    Ok(ExponentResult::from_solution(solve(&problem, cfg)?, shape, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{mutual_info, CondPmf};

    fn binary_ensemble() -> EnsembleSpec {
        EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.85, 0.15], vec![0.15, 0.85]]).unwrap()
    }

    fn shape_p() -> Vec<Alphabet> {
        [Axis::U, Axis::Up, Axis::X, Axis::Xp]
            .iter()
            .map(|&axis| Alphabet { axis, size: 2 })
            .collect()
    }

    #[test]
    fn independence_minimizes_mutual_information() {
        let e = binary_ensemble();
        let cs = ConstraintSet::set_p(&e);
        let f = |q: &JointPmf| mutual_info(q, &[Axis::U, Axis::X], &[Axis::Up, Axis::Xp]).unwrap();
        let r = minimize(&f, &cs, &shape_p(), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolverStatus::Converged);
        assert!(r.value.abs() < 1e-9, "{}", r.value);
        assert!(cs.is_satisfied(r.argmin.as_ref().unwrap(), 1e-9).unwrap());
    }

    #[test]
    fn constant_objective() {
        let e = binary_ensemble();
        let cs = ConstraintSet::set_p(&e);
        let r = maximize(&|_| 2.5, &cs, &shape_p(), &SolverConfig::default()).unwrap();
        assert_eq!(r.value, 2.5);
    }

    #[test]
    fn linear_objective_matches_oracle() {
        let e = binary_ensemble();
        let cs = ConstraintSet::set_s(&e);
        let shape: Vec<Alphabet> = [Axis::U, Axis::X, Axis::Xp]
            .iter()
            .map(|&axis| Alphabet { axis, size: 2 })
            .collect();
        let c = [0.3, -1.2, 0.7, 0.1, -0.4, 0.9, 0.05, -0.8];
        let f = |q: &JointPmf| q.probs().iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        let r = minimize(&f, &cs, &shape, &SolverConfig::default()).unwrap();
        let o = grid_oracle_refined(&f, &cs, &shape, &OracleSpec::new(0.02).zoom(3))
            .unwrap()
            .0;
        assert!(r.value <= o + 1e-9 && o - r.value < 1e-3, "{} vs {}", r.value, o);
    }

    #[test]
    fn info_bound_is_respected() {
        let e = binary_ensemble();
        let bound = 0.05;
        let shape: Vec<Alphabet> = [Axis::U, Axis::Up]
            .iter()
            .map(|&axis| Alphabet { axis, size: 2 })
            .collect();
        let cs = ConstraintSet::set_q(&e).bound(InfoExpr::mi(&[Axis::U], &[Axis::Up]), bound);
        // Pull U and U' together; the bound must stop it.
        let f = |q: &JointPmf| q.get(&[0, 1]).unwrap();
        let r = minimize(&f, &cs, &shape, &SolverConfig::default()).unwrap();
        let q = r.argmin.unwrap();
        let i = mutual_info(&q, &[Axis::U], &[Axis::Up]).unwrap();
        assert!(i <= bound + 1e-6, "{i}");
        assert!((i - bound).abs() < 1e-4);
        assert_eq!(r.active_constraints.len(), 1);
        let o = grid_oracle_refined(&f, &cs, &shape, &OracleSpec::new(0.02).zoom(3))
            .unwrap()
            .0;
        assert!(r.value <= o + 1e-6 && o - r.value < 1e-3, "{} vs {}", r.value, o);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let e = binary_ensemble();
        let cs = ConstraintSet::set_p(&e).bound(InfoExpr::mi(&[Axis::U, Axis::X], &[Axis::Up, Axis::Xp]), 0.1);
        let w = CondPmf::bsc(Axis::X, Axis::Y, 0.2).unwrap();
        let f = |q: &JointPmf| -(q.get(&[0, 0, 0, 0]).unwrap() * w.get(0, 1)).sqrt() - q.get(&[1, 0, 1, 1]).unwrap();
        let cfg = SolverConfig::default().with_seed(7);
        let a = minimize(&f, &cs, &shape_p(), &cfg).unwrap();
        let b = minimize(&f, &cs, &shape_p(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_bound_is_infeasible() {
        let e = binary_ensemble();
        let cs = ConstraintSet::set_p(&e).bound(InfoExpr::mi(&[Axis::U], &[Axis::Up]), -0.1);
        let r = minimize(&|_| 0.0, &cs, &shape_p(), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolverStatus::Infeasible);
        assert_eq!(r.value, f64::INFINITY);
    }

    #[test]
    fn oracle_entropy_on_simplex() {
        let shape = vec![Alphabet { axis: Axis::X, size: 2 }];
        let neg_h = |q: &JointPmf| -crate::prob::entropy(q, &[Axis::X]).unwrap();
        let v = grid_oracle(&neg_h, &ConstraintSet::new(), &shape, 0.01).unwrap();
        assert!((v + 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn oracle_budget_guard() {
        let shape: Vec<Alphabet> = [Axis::U, Axis::X, Axis::Y, Axis::Z]
            .iter()
            .map(|&axis| Alphabet { axis, size: 4 })
            .collect();
        let r = grid_oracle(&|_| 0.0, &ConstraintSet::new(), &shape, 0.01);
        assert!(matches!(r, Err(Error::BudgetExceeded(_))));
    }
}
