//! Brute-force lattice oracle over the free coordinates of a marginal polytope.

use super::{ConstraintSet, Polytope};
use crate::error::{Error, Result};
use crate::prob::{Alphabet, JointPmf};

const DEFAULT_BUDGET: f64 = 1e8;

/// Lattice spacing, number of zoom passes, the factor by which each pass
/// shrinks the spacing, and a cap on the points per pass.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSpec {
    pub step: f64,
    pub zoom_levels: usize,
    pub refine: f64,
    pub budget: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            step: 0.02,
            zoom_levels: 0,
            refine: 5.0,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl OracleSpec {
    pub fn new(step: f64) -> Self {
        OracleSpec {
            step,
            ..OracleSpec::default()
        }
    }

    pub fn zoom(mut self, levels: usize) -> Self {
        self.zoom_levels = levels;
        self
    }

    /// Spacing ratio between consecutive passes (at least 2).
    pub fn refine(mut self, factor: f64) -> Self {
        self.refine = factor;
        self
    }
}

/// Minimum of `objective` over the lattice points (spacing `step` in every
/// free coordinate) that satisfy `constraints`; `+inf` if none does.
pub fn grid_oracle(
    objective: &dyn Fn(&JointPmf) -> f64,
    constraints: &ConstraintSet,
    shape: &[Alphabet],
    step: f64,
) -> Result<f64> {
    Ok(grid_oracle_refined(objective, constraints, shape, &OracleSpec::new(step))?.0)
}

/// Maximum over the same lattice; `-inf` if no point is feasible.
pub fn grid_oracle_max(
    objective: &dyn Fn(&JointPmf) -> f64,
    constraints: &ConstraintSet,
    shape: &[Alphabet],
    spec: &OracleSpec,
) -> Result<f64> {
    let neg = |q: &JointPmf| -objective(q);
    Ok(-grid_oracle_refined(&neg, constraints, shape, spec)?.0)
}

/// Lattice minimum followed by `zoom_levels` passes, each on a lattice
/// `refine` times finer, centred on the incumbent and spanning two coarse
/// steps each way.
pub fn grid_oracle_refined(
    objective: &dyn Fn(&JointPmf) -> f64,
    constraints: &ConstraintSet,
    shape: &[Alphabet],
    spec: &OracleSpec,
) -> Result<(f64, Option<JointPmf>)> {
    if !(spec.step > 0.0) || !(spec.refine >= 2.0) {
        return Err(Error::OutOfRange(format!(
            "oracle step {} refine {}",
            spec.step, spec.refine
        )));
    }
    let sizes: Vec<usize> = shape.iter().map(|a| a.size).collect();
    let cs = constraints.absorb_zero_bounds()?;
    let mut margs = Vec::new();
    for m in &cs.fixed_marginals {
        let mut pos = Vec::new();
        for a in m.axes() {
            pos.push(
                shape
                    .iter()
                    .position(|s| s.axis == a.axis && s.size == a.size)
                    .ok_or_else(|| Error::ShapeMismatch(format!("axis {}", a.axis)))?,
            );
        }
        margs.push((pos, m.probs().to_vec()));
    }
    let poly = match Polytope::new(&sizes, margs) {
        Ok(p) => p,
        Err(Error::Infeasible(_)) => return Ok((f64::INFINITY, None)),
        Err(e) => return Err(e),
    };
    let mut infos = Vec::new();
    for b in &cs.info_bounds {
        infos.push((b.expr.compile(shape)?, b.bound));
    }
    let d = poly.dim();
    let eval = |vals: &[f64]| -> Option<(f64, Vec<f64>)> {
        let mut q = poly.complete(vals);
        if q.iter().any(|&v| v < -1e-12) {
            return None;
        }
        q.iter_mut().for_each(|v| *v = v.max(0.0));
        if infos.iter().any(|(c, b)| c.eval(&q) > b + 1e-12) {
            return None;
        }
        let v = objective(&JointPmf::from_raw(shape.to_vec(), q.clone()));
        Some((if v.is_nan() { f64::INFINITY } else { v }, q))
    };
    if d == 0 {
        return Ok(match eval(&[]) {
            Some((v, q)) => (v, Some(JointPmf::from_raw(shape.to_vec(), q))),
            None => (f64::INFINITY, None),
        });
    }

    let mut lo = vec![0.0; d];
    let mut hi: Vec<f64> = poly.free.iter().map(|&c| poly.upper[c]).collect();
    let mut step = spec.step;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for level in 0..=spec.zoom_levels {
        let counts: Vec<usize> = (0..d)
            .map(|k| ((hi[k] - lo[k]) / step + 1e-9).floor() as usize + 1)
            .collect();
        let total: f64 = counts.iter().map(|&c| c as f64).product();
        if total > spec.budget {
            return Err(Error::BudgetExceeded(format!(
                "{total:.3e} lattice points exceed {:.3e}",
                spec.budget
            )));
        }
        let mut idx = vec![0usize; d];
        let mut vals = vec![0.0; d];
        'outer: loop {
            for k in 0..d {
                vals[k] = lo[k] + step * idx[k] as f64;
            }
            if let Some((v, q)) = eval(&vals) {
                if best.as_ref().map_or(true, |b| v < b.0) {
                    best = Some((v, vals.clone(), q));
                }
            }
            let mut k = 0;
            loop {
                if k == d {
                    break 'outer;
                }
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
        if level == spec.zoom_levels {
            break;
        }
        let Some((_, centre, _)) = &best else { break };
        for k in 0..d {
            let top = poly.upper[poly.free[k]];
            lo[k] = (centre[k] - 2.0 * step).max(0.0);
            hi[k] = (centre[k] + 2.0 * step).min(top);
        }
        step /= spec.refine;
    }
    Ok(match best {
        Some((v, _, q)) => (v, Some(JointPmf::from_raw(shape.to_vec(), q))),
        None => (f64::INFINITY, None),
    })
}
