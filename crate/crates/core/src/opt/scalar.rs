//! One-dimensional maximization on an interval.

const GRID: usize = 101;
const GOLDEN_TOL: f64 = 1e-9;

fn sane(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Maximizes `f` on `[0, 1]`: a 101-point grid, then golden section between
/// the neighbours of the best grid point. Returns `(arg, value)`.
pub fn scalar_max(f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    scalar_max_with(f, 0.0, 1.0, GRID)
}

/// As [`scalar_max`] on `[lo, hi]` with `points >= 2` grid points.
pub fn scalar_max_with(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let points = points.max(2);
    let at = |i: usize| lo + (hi - lo) * i as f64 / (points - 1) as f64;
    let vals: Vec<f64> = (0..points).map(|i| sane(f(at(i)))).collect();
    let mut best = 0;
    for i in 1..points {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    let (mut arg, mut val) = (at(best), vals[best]);
    if !val.is_finite() {
        return (arg, val);
    }
    let a = at(best.saturating_sub(1));
    let b = at((best + 1).min(points - 1));
    let (ga, gv) = golden_max(f, a, b, GOLDEN_TOL);
    if gv > val {
        arg = ga;
        val = gv;
    }
    (arg, val)
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = sane(f(c));
    let mut fd = sane(f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = sane(f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = sane(f(d));
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_peaks_at_one() {
        let (t, v) = scalar_max(&|t| t);
        assert_eq!((t, v), (1.0, 1.0));
    }

    #[test]
    fn quadratic_peak() {
        let (t, v) = scalar_max(&|t| -(t - 0.3217) * (t - 0.3217));
        assert!((t - 0.3217).abs() < 1e-4);
        assert!(v <= 0.0 && v > -1e-8);
    }

    #[test]
    fn nan_is_ignored() {
        let (t, _) = scalar_max(&|t| if t < 0.5 { f64::NAN } else { -t });
        assert!((t - 0.5).abs() < 1e-12);
    }
}
