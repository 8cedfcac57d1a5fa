//! Entropy-regularized coupling solvers.
//!
//! The convex pieces of the exponents reduce to problems of the form
//! `min sum_b w_b <Q_b, C_b> + h(sum_b w_b I(Q_b))` over couplings `Q_b` with
//! fixed row and column marginals, where `h` is convex piecewise linear. For a
//! fixed slope `k` the minimizer is the Sinkhorn scaling of `exp(-C_b / k)`, so
//! only a scalar root search remains.

use crate::prob::Projector;

const SINKHORN_TOL: f64 = 1e-14;

/// Scales `kernel` (row-major `r.len() x c.len()`) to have row sums `r` and
/// column sums `c`. Returns `None` when no coupling is supported by the kernel.
pub fn sinkhorn(r: &[f64], c: &[f64], kernel: &[f64]) -> Option<Vec<f64>> {
    let (nr, nc) = (r.len(), c.len());
    if nr == 2 && nc == 2 {
        return coupling_2x2(r, c, kernel);
    }
    let mut a = vec![1.0; nr];
    let mut b = vec![1.0; nc];
    for it in 0..100_000 {
        for i in 0..nr {
            let s: f64 = (0..nc).map(|j| kernel[i * nc + j] * b[j]).sum();
            a[i] = if r[i] > 0.0 {
                if s > 0.0 {
                    r[i] / s
                } else {
                    return None;
                }
            } else {
                0.0
            };
        }
        let mut err: f64 = 0.0;
        for j in 0..nc {
            let s: f64 = (0..nr).map(|i| kernel[i * nc + j] * a[i]).sum();
            if c[j] > 0.0 {
                if s <= 0.0 {
                    return None;
                }
                err = err.max((s * b[j] - c[j]).abs());
                b[j] = c[j] / s;
            } else {
                b[j] = 0.0;
            }
        }
        if err < SINKHORN_TOL || (it > 2000 && err < 1e-11) {
            break;
        }
        if it == 99_999 && err > 1e-9 {
            return None;
        }
    }
    let mut q = vec![0.0; nr * nc];
    for i in 0..nr {
        for j in 0..nc {
            q[i * nc + j] = a[i] * kernel[i * nc + j] * b[j];
        }
    }
    Some(q)
}

/// Closed form for 2x2: the cross ratio of the coupling equals that of the kernel.
fn coupling_2x2(r: &[f64], c: &[f64], k: &[f64]) -> Option<Vec<f64>> {
    let total = r[0] + r[1];
    let lo = (r[0] - c[1]).max(0.0);
    let hi = r[0].min(c[0]).max(lo);
    let build = |x: f64| {
        let x = x.clamp(lo, hi);
        vec![x, r[0] - x, c[0] - x, total - r[0] - c[0] + x]
            .into_iter()
            .map(|v| v.max(0.0))
            .collect::<Vec<f64>>()
    };
    let supported = |q: &[f64]| q.iter().zip(k).all(|(&v, &kv)| v <= 1e-15 || kv > 0.0);
    if hi - lo <= 0.0 {
        let q = build(lo);
        return supported(&q).then_some(q);
    }
    let num = k[0] * k[3];
    let den = k[1] * k[2];
    let x = if den == 0.0 && num == 0.0 {
        // Both diagonals blocked somewhere: only an endpoint can be supported.
        let a = build(lo);
        if supported(&a) {
            return Some(a);
        }
        let b = build(hi);
        return supported(&b).then_some(b);
    } else if den == 0.0 {
        hi
    } else if num == 0.0 {
        lo
    } else {
        let rho = num / den;
        // x (d + x) = rho (r0 - x)(c0 - x), d = total - r0 - c0.
        let d = total - r[0] - c[0];
        let qa = 1.0 - rho;
        let qb = d + rho * (r[0] + c[0]);
        let qc = -rho * r[0] * c[0];
        if qa.abs() < 1e-12 * qb.abs().max(1.0) {
            -qc / qb
        } else {
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
            let t = -0.5 * (qb + qb.signum() * disc);
            let (x1, x2) = (t / qa, if t != 0.0 { qc / t } else { f64::NAN });
            let inside = |x: f64| x.is_finite() && x >= lo - 1e-15 && x <= hi + 1e-15;
            match (inside(x1), inside(x2)) {
                (true, false) => x1,
                (false, true) => x2,
                (true, true) => {
                    // Pick the root matching the cross ratio more closely.
                    let err = |x: f64| {
                        let q = build(x);
                        (q[0] * q[3] - rho * q[1] * q[2]).abs()
                    };
                    if err(x1) <= err(x2) {
                        x1
                    } else {
                        x2
                    }
                }
                (false, false) => {
                    if rho > 1.0 {
                        hi
                    } else {
                        lo
                    }
                }
            }
        }
    };
    let q = build(x);
    supported(&q).then_some(q)
}

/// Mutual information of a coupling with the given marginals. Cells under a
/// zero marginal carry only rounding residue and are skipped.
pub fn coupling_info(q: &[f64], r: &[f64], c: &[f64]) -> f64 {
    let nc = c.len();
    let mut v = 0.0;
    for (i, &ri) in r.iter().enumerate() {
        for (j, &cj) in c.iter().enumerate() {
            let x = q[i * nc + j];
            if x > 0.0 && ri > 0.0 && cj > 0.0 {
                v += x * (x / (ri * cj)).ln();
            }
        }
    }
    v.max(0.0)
}

/// `<Q, C>` with `0 * inf = 0`.
pub fn linear_cost(q: &[f64], cost: &[f64]) -> f64 {
    q.iter()
        .zip(cost)
        .map(|(&x, &c)| if x > 0.0 { x * c } else { 0.0 })
        .sum()
}

/// One coupling block: rows and columns sum to one, weighted by `weight`.
#[derive(Clone, Debug)]
pub struct Block {
    pub weight: f64,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub cost: Vec<f64>,
}

/// `h(I) = below * I + (above - below) [I - knee]_+`; `above = inf` is a hard cap.
#[derive(Clone, Copy, Debug)]
pub struct InfoPenalty {
    pub below: f64,
    pub above: f64,
    pub knee: f64,
}

impl InfoPenalty {
    pub fn hard_cap(knee: f64) -> Self {
        InfoPenalty {
            below: 1.0,
            above: f64::INFINITY,
            knee,
        }
    }

    pub fn eval(&self, info: f64) -> f64 {
        if self.above.is_infinite() {
            if info > self.knee + 1e-9 {
                f64::INFINITY
            } else {
                self.below * info
            }
        } else {
            self.below * info + (self.above - self.below) * (info - self.knee).max(0.0)
        }
    }
}

#[derive(Clone, Debug)]
pub struct CouplingSolution {
    pub couplings: Vec<Vec<f64>>,
    pub linear: f64,
    pub info: f64,
    pub value: f64,
    pub gamma: f64,
}

struct Eval {
    couplings: Vec<Vec<f64>>,
    linear: f64,
    info: f64,
}

fn solve_at(blocks: &[Block], gamma: f64) -> Option<Eval> {
    let mut couplings = Vec::with_capacity(blocks.len());
    let (mut linear, mut info) = (0.0, 0.0);
    for b in blocks {
        if b.weight <= 0.0 {
            couplings.push(vec![0.0; b.cost.len()]);
            continue;
        }
        let nc = b.cols.len();
        let mut kernel = vec![0.0; b.cost.len()];
        for (krow, crow) in kernel.chunks_mut(nc).zip(b.cost.chunks(nc)) {
            // Row shifts leave the scaled coupling unchanged and avoid underflow.
            let shift = crow.iter().cloned().fold(f64::INFINITY, f64::min);
            for (k, &c) in krow.iter_mut().zip(crow) {
                *k = if c.is_infinite() {
                    0.0
                } else if gamma == 0.0 {
                    1.0
                } else {
                    (-gamma * (c - shift)).exp()
                };
            }
        }
        let q = sinkhorn(&b.rows, &b.cols, &kernel)?;
        linear += b.weight * linear_cost(&q, &b.cost);
        info += b.weight * coupling_info(&q, &b.rows, &b.cols);
        couplings.push(q);
    }
    Some(Eval {
        couplings,
        linear,
        info,
    })
}

/// Minimizes `sum w <Q,C> + h(sum w I)` over the product of coupling polytopes.
/// Returns `None` when no coupling has finite cost under the information cap.
pub fn min_cost_plus_info(blocks: &[Block], pen: InfoPenalty) -> Option<CouplingSolution> {
    let finish = |e: Eval, gamma: f64| {
        let value = e.linear + pen.eval(e.info);
        CouplingSolution {
            couplings: e.couplings,
            linear: e.linear,
            info: e.info,
            value,
            gamma,
        }
    };
    let g_hi = 1.0 / pen.below;
    let at_hi = solve_at(blocks, g_hi)?;
    if at_hi.info <= pen.knee {
        return Some(finish(at_hi, g_hi));
    }
    let g_lo = if pen.above.is_finite() { 1.0 / pen.above } else { 0.0 };
    let at_lo = solve_at(blocks, g_lo)?;
    if at_lo.info >= pen.knee {
        if pen.above.is_finite() {
            return Some(finish(at_lo, g_lo));
        }
        // Even the least informative supported coupling exceeds the cap.
        if at_lo.info > pen.knee + 1e-9 {
            return None;
        }
        return Some(finish(at_lo, g_lo));
    }
    // Root of info(gamma) = knee on (g_lo, g_hi): Illinois regula falsi.
    let (mut a, mut fa) = (g_lo, at_lo.info - pen.knee);
    let (mut b, mut fb) = (g_hi, at_hi.info - pen.knee);
    let mut best = (at_lo, g_lo);
    let mut side = 0i8;
    for _ in 0..200 {
        let mut g = (a * fb - b * fa) / (fb - fa);
        if !(g > a && g < b) {
            g = 0.5 * (a + b);
        }
        let e = solve_at(blocks, g)?;
        let f = e.info - pen.knee;
        if f <= 0.0 {
            a = g;
            fa = f;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
            best = (e, g);
            if f.abs() < 1e-13 {
                break;
            }
        } else {
            b = g;
            fb = f;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
            if f < 1e-13 {
                best = (e, g);
                break;
            }
        }
        if b - a < 1e-15 * b.max(1.0) {
            break;
        }
    }
    Some(finish(best.0, best.1))
}

/// Iterative proportional fitting of `reference` to several marginals
/// (`(kept axis positions, target)`). Returns `None` if the fit fails.
pub fn ipf_fit(reference: &[f64], sizes: &[usize], marginals: &[(Vec<usize>, Vec<f64>)]) -> Option<Vec<f64>> {
    let projs: Vec<(Projector, &Vec<f64>)> = marginals
        .iter()
        .map(|(pos, t)| (Projector::new(sizes, pos), t))
        .collect();
    let mut q = reference.to_vec();
    let residual = |q: &[f64]| {
        projs
            .iter()
            .map(|(p, t)| {
                p.project_vec(q)
                    .iter()
                    .zip(t.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };
    for it in 0..20_000 {
        for (p, t) in &projs {
            let m = p.project_vec(&q);
            for (i, &c) in p.map().iter().enumerate() {
                if m[c] > 0.0 {
                    q[i] *= t[c] / m[c];
                } else if t[c] > 0.0 {
                    return None;
                }
            }
        }
        if it % 8 == 7 && residual(&q) < 1e-14 {
            break;
        }
    }
    (residual(&q) < 1e-9).then_some(q)
}

/// `D(q || r)` on flat vectors with the usual zero conventions.
pub fn kl(q: &[f64], r: &[f64]) -> f64 {
    let mut v = 0.0;
    for (&a, &b) in q.iter().zip(r) {
        if a > 0.0 {
            if b > 0.0 {
                v += a * (a / b).ln();
            } else {
                return f64::INFINITY;
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_matches_iterations() {
        let r = [0.3, 0.7];
        let c = [0.45, 0.55];
        let k = [2.0, 0.3, 0.5, 1.7];
        let q = coupling_2x2(&r, &c, &k).unwrap();
        // Generic loop on a padded 2x3 problem with an empty column agrees.
        let k3 = [2.0, 0.3, 1.0, 0.5, 1.7, 1.0];
        let q3 = sinkhorn(&r, &[0.45, 0.55, 0.0], &k3).unwrap();
        assert!((q[0] - q3[0]).abs() < 1e-12 && (q[3] - q3[4]).abs() < 1e-12);
        let cross = q[0] * q[3] / (q[1] * q[2]);
        assert!((cross - 2.0 * 1.7 / (0.3 * 0.5)).abs() < 1e-8);
    }

    #[test]
    fn blocked_cells_stay_empty() {
        let q = sinkhorn(&[0.5, 0.5], &[0.5, 0.5], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(q, vec![0.5, 0.0, 0.0, 0.5]);
        assert!(sinkhorn(&[0.4, 0.6], &[0.5, 0.5], &[1.0, 0.0, 0.0, 1.0]).is_none());
    }

    #[test]
    fn hard_cap_is_met() {
        let b = Block {
            weight: 1.0,
            rows: vec![0.5, 0.5],
            cols: vec![0.5, 0.5],
            cost: vec![0.0, 3.0, 3.0, 0.0],
        };
        let s = min_cost_plus_info(&[b], InfoPenalty::hard_cap(0.05)).unwrap();
        assert!((s.info - 0.05).abs() < 1e-10);
    }

    #[test]
    fn degenerate_column_has_zero_information() {
        // Row sums off by one ulp leave residue under the empty column.
        let b = Block {
            weight: 1.0,
            rows: vec![0.9775000000000001, 0.022499999999999968],
            cols: vec![1.0, 0.0],
            cost: vec![0.3, 2.9, 3.7, 0.5],
        };
        let s = min_cost_plus_info(&[b], InfoPenalty::hard_cap(0.03)).unwrap();
        assert_eq!(s.info, 0.0);
    }
}
