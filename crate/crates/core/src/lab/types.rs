//! Exact compositions and uniform sampling from (conditional) type classes.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::prob::CondPmf;

const INTEGRALITY_TOL: f64 = 1e-9;

/// Symbol counts `n p(a)`, which must all be integers.
pub fn composition(p: &[f64], n: usize) -> Result<Vec<usize>> {
    p.iter()
        .map(|&q| {
            let c = q * n as f64;
            let r = c.round();
            if (c - r).abs() > INTEGRALITY_TOL * n.max(1) as f64 || r < 0.0 {
                Err(Error::Composition(format!("n p = {c} is not an integer count")))
            } else {
                Ok(r as usize)
            }
        })
        .collect()
}

/// Nearest integer composition summing to `n` (largest-remainder rounding).
pub fn quantize_composition(p: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = p.iter().map(|&q| q * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|c| c.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..p.len()).collect();
    // Stable sort keeps ties in symbol order.
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &a in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[a] += 1;
        left -= 1;
    }
    counts
}

/// A uniformly random arrangement of the given symbol counts.
pub fn shuffle_counts<R: Rng + ?Sized>(counts: &[usize], rng: &mut R) -> Vec<usize> {
    let mut seq: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(a, &c)| std::iter::repeat(a).take(c))
        .collect();
    seq.shuffle(rng);
    seq
}

/// Uniform draw from the type class `T(p)` of length `n`.
pub fn sample_type_sequence<R: Rng + ?Sized>(p: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    Ok(shuffle_counts(&composition(p, n)?, rng))
}

/// Per-`u` section counts of `x` for the conditional type class `T(P_{X|U} | u)`.
pub fn conditional_counts(u: &[usize], p_x_given_u: &CondPmf) -> Result<Vec<Vec<usize>>> {
    let nu = p_x_given_u.n_from();
    let mut len = vec![0usize; nu];
    for &a in u {
        if a >= nu {
            return Err(Error::Index(format!("symbol {a} outside U")));
        }
        len[a] += 1;
    }
    (0..nu).map(|a| composition(p_x_given_u.row(a), len[a])).collect()
}

/// Fills the positions of each `u`-section with a uniform arrangement of its counts.
pub fn fill_sections<R: Rng + ?Sized>(u: &[usize], counts: &[Vec<usize>], rng: &mut R) -> Vec<usize> {
    let mut x = vec![0; u.len()];
    for (a, c) in counts.iter().enumerate() {
        let section = shuffle_counts(c, rng);
        let positions = u.iter().enumerate().filter(|(_, &s)| s == a).map(|(k, _)| k);
        for (k, v) in positions.zip(section) {
            x[k] = v;
        }
    }
    x
}

/// Uniform draw from `T(P_{X|U} | u)`.
pub fn sample_conditional_type<R: Rng + ?Sized>(u: &[usize], p_x_given_u: &CondPmf, rng: &mut R) -> Result<Vec<usize>> {
    let counts = conditional_counts(u, p_x_given_u)?;
    Ok(fill_sections(u, &counts, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Axis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn uniform_over_six_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hist: HashMap<Vec<usize>, usize> = HashMap::new();
        let draws = 60_000;
        for _ in 0..draws {
            *hist
                .entry(sample_type_sequence(&[0.5, 0.5], 4, &mut rng).unwrap())
                .or_default() += 1;
        }
        assert_eq!(hist.len(), 6);
        let e = draws as f64 / 6.0;
        let chi2: f64 = hist.values().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 5 degrees of freedom; 20.5 is the 0.999 quantile.
        assert!(chi2 < 20.5, "chi2 = {chi2}");
    }

    #[test]
    fn point_mass_and_exact_type() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(sample_type_sequence(&[0.0, 1.0], 3, &mut rng).unwrap(), vec![1, 1, 1]);
        let s = sample_type_sequence(&[0.15, 0.85], 20, &mut rng).unwrap();
        assert_eq!(s.iter().filter(|&&a| a == 0).count(), 3);
        assert!(sample_type_sequence(&[0.15, 0.85], 10, &mut rng).is_err());
    }

    #[test]
    fn conditional_sections_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = CondPmf::from_matrix(Axis::U, Axis::X, &[vec![0.25, 0.75], vec![0.5, 0.5]]).unwrap();
        let u = vec![0, 1, 0, 0, 1, 0, 1, 1];
        let x = sample_conditional_type(&u, &w, &mut rng).unwrap();
        let count = |a, b| u.iter().zip(&x).filter(|(&p, &q)| p == a && q == b).count();
        assert_eq!((count(0, 0), count(0, 1), count(1, 0), count(1, 1)), (1, 3, 2, 2));
        assert!(sample_conditional_type(&[0, 1, 1], &w, &mut rng).is_err());
    }

    #[test]
    fn largest_remainder_rounding() {
        assert_eq!(quantize_composition(&[0.15, 0.85], 8), vec![1, 7]);
        assert_eq!(quantize_composition(&[1.0 / 3.0; 3], 4), vec![2, 1, 1]);
    }
}
