//! Polytopes `{q >= 0 : q has the given marginals}` in cell coordinates.

use crate::error::{Error, Result};
use crate::prob::Projector;

const PIVOT_TOL: f64 = 1e-10;
const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub(crate) struct Polytope {
    pub n: usize,
    pub forced_zero: Vec<bool>,
    pub upper: Vec<f64>,
    pub marginals: Vec<(Projector, Vec<f64>)>,
    /// Free cells (lattice coordinates).
    pub free: Vec<usize>,
    /// Pivot cell, right-hand side, and `(free position, coefficient)` terms.
    pub pivots: Vec<(usize, f64, Vec<(usize, f64)>)>,
    /// Sparse feasible directions, one per free cell.
    pub dirs: Vec<Vec<(usize, f64)>>,
}

impl Polytope {
    pub fn new(sizes: &[usize], marginals: Vec<(Vec<usize>, Vec<f64>)>) -> Result<Polytope> {
        let n: usize = sizes.iter().product();
        let mut forced_zero = vec![false; n];
        let mut upper = vec![1.0f64; n];
        let mut compiled = Vec::with_capacity(marginals.len());
        for (pos, target) in marginals {
            let proj = Projector::new(sizes, &pos);
            if target.len() != proj.out_len() {
                return Err(Error::ShapeMismatch("marginal target size".into()));
            }
            for (i, &c) in proj.map().iter().enumerate() {
                upper[i] = upper[i].min(target[c]);
                if target[c] <= 0.0 {
                    forced_zero[i] = true;
                }
            }
            compiled.push((proj, target));
        }
        let active: Vec<usize> = (0..n).filter(|&i| !forced_zero[i]).collect();
        let mut var_of = vec![usize::MAX; n];
        for (v, &i) in active.iter().enumerate() {
            var_of[i] = v;
        }
        let nv = active.len();

        // Equality rows over active cells, augmented with the right-hand side.
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (proj, target) in &compiled {
            for (c, &t) in target.iter().enumerate() {
                if t <= 0.0 {
                    continue;
                }
                let mut row = vec![0.0; nv + 1];
                for (i, &m) in proj.map().iter().enumerate() {
                    if m == c && var_of[i] != usize::MAX {
                        row[var_of[i]] = 1.0;
                    }
                }
                row[nv] = t;
                rows.push(row);
            }
        }
        if compiled.is_empty() {
            let mut row = vec![1.0; nv + 1];
            row[nv] = 1.0;
            rows.push(row);
        }
        if nv == 0 {
            return Err(Error::Infeasible("every cell is forced to zero".into()));
        }

        let pivot_cols = rref(&mut rows, nv);
        for row in rows.iter().skip(pivot_cols.len()) {
            if row[nv].abs() > CONSISTENCY_TOL {
                return Err(Error::Infeasible("marginal constraints are inconsistent".into()));
            }
        }
        let is_pivot: Vec<bool> = {
            let mut v = vec![false; nv];
            for &c in &pivot_cols {
                v[c] = true;
            }
            v
        };
        let free_vars: Vec<usize> = (0..nv).filter(|&v| !is_pivot[v]).collect();
        let free: Vec<usize> = free_vars.iter().map(|&v| active[v]).collect();
        let mut pivots = Vec::with_capacity(pivot_cols.len());
        for (r, &pc) in pivot_cols.iter().enumerate() {
            let terms: Vec<(usize, f64)> = free_vars
                .iter()
                .enumerate()
                .filter(|(_, &fv)| rows[r][fv].abs() > PIVOT_TOL)
                .map(|(k, &fv)| (k, rows[r][fv]))
                .collect();
            pivots.push((active[pc], rows[r][nv], terms));
        }
        let mut dirs = Vec::with_capacity(free.len());
        for (k, &cell) in free.iter().enumerate() {
            let mut d = vec![(cell, 1.0)];
            for (pcell, _, terms) in &pivots {
                if let Some(&(_, c)) = terms.iter().find(|(fk, _)| *fk == k) {
                    d.push((*pcell, -c));
                }
            }
            let scale = d.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
            d.iter_mut().for_each(|(_, v)| *v /= scale);
            d.sort_by_key(|(i, _)| *i);
            dirs.push(d);
        }
        Ok(Polytope {
            n,
            forced_zero,
            upper,
            marginals: compiled,
            free,
            pivots,
            dirs,
        })
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// Largest marginal violation of `q`.
    pub fn residual(&self, q: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (proj, target) in &self.marginals {
            let m = proj.project_vec(q);
            for (a, b) in m.iter().zip(target) {
                worst = worst.max((a - b).abs());
            }
        }
        if self.marginals.is_empty() {
            worst = (q.iter().sum::<f64>() - 1.0).abs();
        }
        worst
    }

    /// Iterative proportional fitting from a positive starting tensor.
    pub fn ipf(&self, mut q: Vec<f64>) -> Option<Vec<f64>> {
        for (i, v) in q.iter_mut().enumerate() {
            if self.forced_zero[i] {
                *v = 0.0;
            }
        }
        if self.marginals.is_empty() {
            let s: f64 = q.iter().sum();
            if !(s > 0.0) {
                return None;
            }
            q.iter_mut().for_each(|v| *v /= s);
            return Some(q);
        }
        for _ in 0..5000 {
            for (proj, target) in &self.marginals {
                let m = proj.project_vec(&q);
                for (i, &c) in proj.map().iter().enumerate() {
                    if m[c] > 0.0 {
                        q[i] *= target[c] / m[c];
                    } else if target[c] > 0.0 {
                        return None;
                    }
                }
            }
            if self.residual(&q) < 1e-14 {
                break;
            }
        }
        (self.residual(&q) < 1e-10).then_some(q)
    }

    /// Cells from free-coordinate values; pivots solved from the equalities.
    pub fn complete(&self, free_vals: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.n];
        for (&cell, &v) in self.free.iter().zip(free_vals) {
            q[cell] = v;
        }
        for (cell, rhs, terms) in &self.pivots {
            q[*cell] = rhs - terms.iter().map(|&(k, c)| c * free_vals[k]).sum::<f64>();
        }
        q
    }
}

/// In-place reduced row echelon form on the first `ncols` columns; returns the
/// pivot column of each leading row.
fn rref(rows: &mut [Vec<f64>], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r >= rows.len() {
            break;
        }
        let (best, val) = (r..rows.len())
            .map(|i| (i, rows[i][c].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= PIVOT_TOL {
            continue;
        }
        rows.swap(r, best);
        let p = rows[r][c];
        rows[r].iter_mut().for_each(|v| *v /= p);
        for i in 0..rows.len() {
            if i != r {
                let f = rows[i][c];
                if f != 0.0 {
                    for j in 0..rows[i].len() {
                        let delta = f * rows[r][j];
                        rows[i][j] -= delta;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}
