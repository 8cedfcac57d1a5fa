//! Multistart pattern search over a marginal polytope times a parameter box.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CompiledInfo, ConstraintSet, Polytope, SolverConfig, SolverStatus};
use crate::error::{Error, Result};
use crate::prob::Alphabet;

const CELL_MIN_STEP: f64 = 1e-10;
const PARAM_MIN_STEP: f64 = 1e-8;
const FEAS_TOL: f64 = 1e-6;

/// A minimization over pmfs on `shape` (cells, row-major) jointly with a box of
/// auxiliary real parameters.
pub struct Problem<'a> {
    pub shape: Vec<Alphabet>,
    pub constraints: &'a ConstraintSet,
    pub params: Vec<(f64, f64)>,
    pub param_start: Vec<f64>,
    /// Extra starting cells, tried right after the product witness.
    pub starts: Vec<Vec<f64>>,
    pub objective: &'a (dyn Fn(&[f64], &[f64]) -> f64 + Sync),
}

impl<'a> Problem<'a> {
    pub fn new(
        shape: &[Alphabet],
        constraints: &'a ConstraintSet,
        objective: &'a (dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    ) -> Self {
        Problem {
            shape: shape.to_vec(),
            constraints,
            params: Vec::new(),
            param_start: Vec::new(),
            starts: Vec::new(),
            objective,
        }
    }

    /// Adds a starting point; it is projected onto the marginal polytope.
    pub fn with_start(mut self, cells: Vec<f64>) -> Self {
        self.starts.push(cells);
        self
    }

    /// Adds box-bounded parameters with their starting values.
    pub fn with_params(mut self, bounds: Vec<(f64, f64)>, start: Vec<f64>) -> Self {
        self.params = bounds;
        self.param_start = start;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub value: f64,
    pub cells: Vec<f64>,
    pub params: Vec<f64>,
    pub status: SolverStatus,
    pub active: Vec<String>,
    pub evaluations: u64,
}

struct Bound {
    info: CompiledInfo,
    bound: f64,
    label: String,
}

struct Engine<'a> {
    problem: &'a Problem<'a>,
    poly: Polytope,
    n: usize,
    bounds: Vec<Bound>,
    dirs: Vec<Vec<(usize, f64)>>,
    is_param_dir: Vec<bool>,
    witness: Vec<f64>,
    evals: AtomicU64,
    cfg: SolverConfig,
}

struct Candidate {
    x: Vec<f64>,
    value: f64,
    viol: f64,
}

/// Runs the multistart search. An empty feasible set is reported through the
/// status, not as an error.
pub fn solve(problem: &Problem, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    if problem.params.len() != problem.param_start.len() {
        return Err(Error::ShapeMismatch("parameter bounds and start differ".into()));
    }
    let shape = &problem.shape;
    let sizes: Vec<usize> = shape.iter().map(|a| a.size).collect();
    let n: usize = sizes.iter().product();
    let infeasible = |evals| Solution {
        value: f64::INFINITY,
        cells: vec![0.0; n],
        params: problem.param_start.clone(),
        status: SolverStatus::Infeasible,
        active: Vec::new(),
        evaluations: evals,
    };
    let cs = problem.constraints.absorb_zero_bounds()?;
    let mut margs = Vec::with_capacity(cs.fixed_marginals.len());
    for m in &cs.fixed_marginals {
        let mut pos = Vec::new();
        for a in m.axes() {
            let k = shape
                .iter()
                .position(|s| s.axis == a.axis)
                .ok_or_else(|| Error::UnknownAxis(a.axis.to_string()))?;
            if shape[k].size != a.size {
                return Err(Error::ShapeMismatch(format!("axis {}", a.axis)));
            }
            pos.push(k);
        }
        margs.push((pos, m.probs().to_vec()));
    }
    let poly = match Polytope::new(&sizes, margs) {
        Ok(p) => p,
        Err(Error::Infeasible(_)) => return Ok(infeasible(0)),
        Err(e) => return Err(e),
    };
    let Some(witness) = poly.ipf(vec![1.0; n]) else {
        return Ok(infeasible(0));
    };
    let mut bounds = Vec::new();
    for b in &cs.info_bounds {
        bounds.push(Bound {
            info: b.expr.compile(shape)?,
            bound: b.bound,
            label: if b.strict {
                format!("{} < {} (closed)", b.expr, b.bound)
            } else {
                format!("{} <= {}", b.expr, b.bound)
            },
        });
    }
    let mut dirs = poly.dirs.clone();
    let mut is_param_dir = vec![false; dirs.len()];
    for k in 0..problem.params.len() {
        dirs.push(vec![(n + k, 1.0)]);
        is_param_dir.push(true);
    }
    let engine = Engine {
        problem,
        poly,
        n,
        bounds,
        dirs,
        is_param_dir,
        witness,
        evals: AtomicU64::new(0),
        cfg: cfg.clone(),
    };
    Ok(engine.run())
}

impl<'a> Engine<'a> {
    fn eval(&self, x: &[f64]) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        let v = (self.problem.objective)(&x[..self.n], &x[self.n..]);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn slacks(&self, x: &[f64]) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|b| b.info.eval(&x[..self.n]) - b.bound)
            .collect()
    }

    fn violation(&self, x: &[f64]) -> f64 {
        self.slacks(x).into_iter().fold(0.0, f64::max)
    }

    fn run(&self) -> Solution {
        let np = self.problem.params.len();
        let mut w = self.witness.clone();
        w.extend_from_slice(&self.problem.param_start);
        let mut starts = vec![w];
        for cells in &self.problem.starts {
            if cells.len() != self.n {
                continue;
            }
            let init = cells.iter().map(|&v| v.max(1e-300)).collect();
            if let Some(mut x) = self.poly.ipf(init) {
                x.extend_from_slice(&self.problem.param_start);
                starts.push(x);
            }
        }
        let searchable = !self.dirs.is_empty() && self.cfg.refine_iterations > 0;
        if np == 0 && self.poly.dim() > 0 {
            starts.extend(self.coarse_grid_starts());
        }
        if searchable {
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.rng_seed ^ 0x5eed_0f5e_a7c4);
            let mut tries = 0;
            while starts.len() < self.cfg.multistart_count && tries < 4 * self.cfg.multistart_count {
                tries += 1;
                let sigma = 0.5 + 2.5 * rng.gen::<f64>();
                let init: Vec<f64> = (0..self.n).map(|_| (sigma * standard_normal(&mut rng)).exp()).collect();
                if let Some(mut x) = self.poly.ipf(init) {
                    for &(lo, hi) in &self.problem.params {
                        let (a, b) = (lo.max(-2.0), hi.min(2.0));
                        x.push(if a < b { rng.gen_range(a..=b) } else { lo });
                    }
                    starts.push(x);
                }
            }
        }
        starts.truncate(self.cfg.multistart_count.max(1));

        let candidates: Vec<Candidate> = if searchable {
            starts
                .into_par_iter()
                .enumerate()
                .map(|(k, x0)| self.local(x0, self.cfg.rng_seed.wrapping_add(1 + k as u64)))
                .collect()
        } else {
            starts
                .into_iter()
                .map(|x| {
                    let value = self.eval(&x);
                    let viol = self.violation(&x);
                    Candidate { x, value, viol }
                })
                .collect()
        };
        let best = candidates
            .into_iter()
            .min_by(|a, b| {
                let fa = a.viol <= FEAS_TOL;
                let fb = b.viol <= FEAS_TOL;
                fb.cmp(&fa)
                    .then(a.value.total_cmp(&b.value))
                    .then_with(|| lex_cmp(&a.x, &b.x))
            })
            .expect("at least the witness start");
        let evaluations = self.evals.load(Ordering::Relaxed);
        if best.viol > FEAS_TOL {
            return Solution {
                value: f64::INFINITY,
                cells: best.x[..self.n].to_vec(),
                params: best.x[self.n..].to_vec(),
                status: SolverStatus::Infeasible,
                active: Vec::new(),
                evaluations,
            };
        }
        let slack = self.slacks(&best.x);
        let active = self
            .bounds
            .iter()
            .zip(&slack)
            .filter(|(_, s)| s.abs() <= self.cfg.tolerance_nats)
            .map(|(b, _)| b.label.clone())
            .collect();
        Solution {
            value: best.value,
            cells: best.x[..self.n].to_vec(),
            params: best.x[self.n..].to_vec(),
            // A point polytope has nothing to search.
            status: if searchable || self.dirs.is_empty() {
                SolverStatus::Converged
            } else {
                SolverStatus::GridOnly
            },
            active,
            evaluations,
        }
    }

    /// Best lattice points of a coarse grid over the free coordinates.
    fn coarse_grid_starts(&self) -> Vec<Vec<f64>> {
        let d = self.poly.dim();
        let pts = self.cfg.coarse_grid_points;
        let total = (pts as f64).powi(d as i32);
        if total > 4096.0 {
            return Vec::new();
        }
        let keep = (self.cfg.multistart_count / 4).max(1);
        let mut scored: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut idx = vec![0usize; d];
        let mut vals = vec![0.0; d];
        loop {
            for k in 0..d {
                vals[k] = self.poly.upper[self.poly.free[k]] * idx[k] as f64 / (pts - 1) as f64;
            }
            let mut q = self.poly.complete(&vals);
            if q.iter().all(|&v| v >= -1e-12) {
                q.iter_mut().for_each(|v| *v = v.max(0.0));
                if self.violation(&q) <= 1e-12 {
                    let v = self.eval(&q);
                    if v.is_finite() {
                        scored.push((v, q));
                    }
                }
            }
            let mut k = 0;
            loop {
                if k == d {
                    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lex_cmp(&a.1, &b.1)));
                    scored.truncate(keep);
                    return scored.into_iter().map(|(_, q)| q).collect();
                }
                idx[k] += 1;
                if idx[k] < pts {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// Local solve from one start: augmented Lagrangian rounds of pattern search.
    fn local(&self, x0: Vec<f64>, seed: u64) -> Candidate {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sweeps = self.cfg.refine_iterations;
        if self.bounds.is_empty() {
            let f = |x: &[f64]| self.eval(x);
            let fx = f(&x0);
            let (x, value) = self.pattern_search(&f, x0, fx, &mut rng, sweeps, 1.0);
            return Candidate { x, value, viol: 0.0 };
        }
        let m = self.bounds.len();
        let mut lam = vec![0.0; m];
        let mut mu = 10.0;
        let mut x = x0;
        let mut prev_viol = f64::INFINITY;
        let mut prev_f = f64::INFINITY;
        for round in 0..12 {
            let aug = |x: &[f64]| {
                let v = self.eval(x);
                if !v.is_finite() {
                    return v;
                }
                let s = self.slacks(x);
                v + s
                    .iter()
                    .zip(&lam)
                    .map(|(&c, &l)| ((l + mu * c).max(0.0).powi(2) - l * l) / (2.0 * mu))
                    .sum::<f64>()
            };
            let fx = aug(&x);
            let scale = if round == 0 { 1.0 } else { 0.05 };
            x = self.pattern_search(&aug, x, fx, &mut rng, sweeps, scale).0;
            let s = self.slacks(&x);
            let viol = s.iter().cloned().fold(0.0, f64::max);
            for (l, &c) in lam.iter_mut().zip(&s) {
                *l = (*l + mu * c).max(0.0);
            }
            let fval = self.eval(&x);
            let settled = (fval - prev_f).abs() < 1e-10;
            if viol <= 1e-10 && (lam.iter().all(|&l| l == 0.0) || settled) {
                break;
            }
            if viol > 0.25 * prev_viol {
                mu = (mu * 10.0).min(1e8);
            }
            prev_viol = viol;
            prev_f = fval;
        }
        if self.violation(&x) > 1e-10 {
            x = self.repair(x);
        }
        let value = self.eval(&x);
        let viol = self.violation(&x);
        Candidate { x, value, viol }
    }

    /// Mixes toward the witness until every bound holds.
    fn repair(&self, x: Vec<f64>) -> Vec<f64> {
        let mix = |lambda: f64| {
            let mut y = x.clone();
            for i in 0..self.n {
                y[i] = (1.0 - lambda) * x[i] + lambda * self.witness[i];
            }
            y
        };
        if self.violation(&mix(1.0)) > 1e-10 {
            return x;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.violation(&mix(mid)) > 1e-10 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        mix(hi)
    }

    fn min_step(&self, k: usize) -> f64 {
        if self.is_param_dir[k] {
            PARAM_MIN_STEP
        } else {
            CELL_MIN_STEP
        }
    }

    /// Largest `a` keeping `x + a * sign * d` inside the polytope and the box.
    fn max_step(&self, x: &[f64], d: &[(usize, f64)], sign: f64) -> f64 {
        let mut a = f64::INFINITY;
        for &(i, v) in d {
            let v = v * sign;
            if i < self.n {
                if v < 0.0 {
                    a = a.min(x[i].max(0.0) / -v);
                }
            } else {
                let (lo, hi) = self.problem.params[i - self.n];
                if v > 0.0 {
                    a = a.min((hi - x[i]).max(0.0) / v);
                } else if v < 0.0 {
                    a = a.min((x[i] - lo).max(0.0) / -v);
                }
            }
        }
        a
    }

    fn apply(&self, y: &mut [f64], d: &[(usize, f64)], a: f64) {
        for &(i, v) in d {
            y[i] += a * v;
            if i < self.n {
                if y[i] < 0.0 {
                    y[i] = 0.0;
                }
            } else {
                let (lo, hi) = self.problem.params[i - self.n];
                y[i] = y[i].clamp(lo, hi);
            }
        }
    }

    fn pattern_search(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        mut x: Vec<f64>,
        mut fx: f64,
        rng: &mut ChaCha8Rng,
        sweeps: usize,
        scale: f64,
    ) -> (Vec<f64>, f64) {
        let nd = self.dirs.len();
        if nd == 0 {
            return (x, fx);
        }
        let mut step: Vec<f64> = (0..nd)
            .map(|k| if self.is_param_dir[k] { 1.0 } else { 0.2 } * scale)
            .collect();
        let cap = |k: usize| if self.is_param_dir[k] { 8.0 } else { 0.5 };
        let mut pref = vec![1.0f64; nd];
        let mut y = x.clone();
        for _ in 0..sweeps {
            let x_start = x.clone();
            let mut any = false;
            for k in 0..nd {
                if step[k] < self.min_step(k) {
                    continue;
                }
                let d = &self.dirs[k];
                let mut ok = false;
                for sg in [pref[k], -pref[k]] {
                    let amax = self.max_step(&x, d, sg);
                    if amax < 1e-15 {
                        continue;
                    }
                    let a = step[k].min(amax);
                    y.copy_from_slice(&x);
                    self.apply(&mut y, d, sg * a);
                    let fy = f(&y);
                    if fy < fx {
                        x.copy_from_slice(&y);
                        fx = fy;
                        pref[k] = sg;
                        ok = true;
                        break;
                    }
                }
                if ok {
                    step[k] = (step[k] * 2.0).min(cap(k));
                    any = true;
                } else {
                    step[k] *= 0.5;
                }
            }
            if any {
                // Pattern move along the net displacement of the sweep.
                let delta: Vec<(usize, f64)> = x
                    .iter()
                    .zip(&x_start)
                    .enumerate()
                    .filter(|(_, (a, b))| a != b)
                    .map(|(i, (a, b))| (i, a - b))
                    .collect();
                let a = self.max_step(&x, &delta, 1.0).min(1.0);
                if a > 1e-12 {
                    y.copy_from_slice(&x);
                    self.apply(&mut y, &delta, a);
                    let fy = f(&y);
                    if fy < fx {
                        x.copy_from_slice(&y);
                        fx = fy;
                    }
                }
                continue;
            }
            // Random combinations of the basis escape kinks the basis cannot.
            let mut ok = false;
            let tries = (2 * nd).min(12);
            for _ in 0..tries {
                let mut dense = vec![0.0; x.len()];
                for k in 0..nd {
                    let s = step[k].max(10.0 * self.min_step(k));
                    let u = rng.gen_range(-1.0..1.0) * s;
                    for &(i, v) in &self.dirs[k] {
                        dense[i] += u * v;
                    }
                }
                let d: Vec<(usize, f64)> = dense
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i, *v))
                    .collect();
                for sg in [1.0, -1.0] {
                    let a = self.max_step(&x, &d, sg).min(1.0);
                    if a < 1e-15 {
                        continue;
                    }
                    y.copy_from_slice(&x);
                    self.apply(&mut y, &d, sg * a);
                    let fy = f(&y);
                    if fy < fx {
                        x.copy_from_slice(&y);
                        fx = fy;
                        ok = true;
                        break;
                    }
                }
                if ok {
                    break;
                }
            }
            if ok {
                for k in 0..nd {
                    step[k] = step[k].max(20.0 * self.min_step(k));
                }
                continue;
            }
            if (0..nd).all(|k| step[k] < self.min_step(k)) {
                break;
            }
        }
        (x, fx)
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one draw per call keeps the stream layout simple.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
