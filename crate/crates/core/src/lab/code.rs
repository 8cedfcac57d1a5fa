//! Hierarchical constant-composition codebooks.

use std::fmt::Write as _;

use rand::Rng;

use super::types::{fill_sections, quantize_composition, shuffle_counts};
use crate::error::{Error, Result};
use crate::prob::{EnsembleSpec, RatePair};

/// Largest codebook (clouds times satellites) the lab will build.
pub const MAX_CODEWORDS: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cloud {
    pub center: Vec<usize>,
    pub words: Vec<Vec<usize>>,
}

/// A codebook of `M_z` clouds with `M_y` satellites each, all of blocklength `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HccCode {
    n: usize,
    nu: usize,
    nx: usize,
    clouds: Vec<Cloud>,
}

/// `ceil(exp(n R))`, guarded against absurd sizes. A relative slack absorbs
/// rounding when `exp(n R)` is an integer.
pub fn message_count(rate: f64, n: usize) -> Result<usize> {
    let m = ((n as f64 * rate).exp() * (1.0 - 1e-12)).ceil().max(1.0);
    if !(m.is_finite() && m <= MAX_CODEWORDS as f64) {
        return Err(Error::BudgetExceeded(format!("exp({n} * {rate}) messages")));
    }
    Ok(m as usize)
}

impl HccCode {
    pub fn new(n: usize, nu: usize, nx: usize, clouds: Vec<Cloud>) -> Result<Self> {
        if clouds.is_empty() || clouds[0].words.is_empty() {
            return Err(Error::ShapeMismatch("a code needs at least one codeword".into()));
        }
        let m_y = clouds[0].words.len();
        for (m, c) in clouds.iter().enumerate() {
            if c.words.len() != m_y {
                return Err(Error::ShapeMismatch(format!(
                    "cloud {m} has {} satellites",
                    c.words.len()
                )));
            }
            let seqs = std::iter::once(&c.center).chain(&c.words);
            for (k, s) in seqs.enumerate() {
                let size = if k == 0 { nu } else { nx };
                if s.len() != n || s.iter().any(|&a| a >= size) {
                    return Err(Error::ShapeMismatch(format!("cloud {m}: bad sequence {k}")));
                }
            }
        }
        Ok(HccCode { n, nu, nx, clouds })
    }

    /// Draws a code from the ensemble: centers uniform over one type class of
    /// length `n`, satellites uniform over the conditional type class of their
    /// center. Compositions are the nearest integer ones.
    pub fn sample<R: Rng + ?Sized>(ensemble: &EnsembleSpec, rates: RatePair, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfRange("blocklength 0".into()));
        }
        let m_z = message_count(rates.r_z, n)?;
        let m_y = message_count(rates.r_y, n)?;
        if m_z.saturating_mul(m_y) > MAX_CODEWORDS {
            return Err(Error::BudgetExceeded(format!("{m_z} x {m_y} codewords")));
        }
        let u_counts = quantize_composition(ensemble.p_u().probs(), n);
        let x_counts: Vec<Vec<usize>> = u_counts
            .iter()
            .enumerate()
            .map(|(a, &len)| quantize_composition(ensemble.p_x_given_u().row(a), len))
            .collect();
        let clouds = (0..m_z)
            .map(|_| {
                let center = shuffle_counts(&u_counts, rng);
                let words = (0..m_y).map(|_| fill_sections(&center, &x_counts, rng)).collect();
                Cloud { center, words }
            })
            .collect();
        HccCode::new(n, ensemble.nu(), ensemble.nx(), clouds)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn m_z(&self) -> usize {
        self.clouds.len()
    }

    pub fn m_y(&self) -> usize {
        self.clouds[0].words.len()
    }

    pub fn clouds(&self) -> &[Cloud] {
        &self.clouds
    }

    pub fn center(&self, m: usize) -> &[usize] {
        &self.clouds[m].center
    }

    pub fn word(&self, m: usize, i: usize) -> &[usize] {
        &self.clouds[m].words[i]
    }

    /// `(ln M_y / n, ln M_z / n)`.
    pub fn realized_rates(&self) -> RatePair {
        let n = self.n as f64;
        RatePair {
            r_y: (self.m_y() as f64).ln() / n,
            r_z: (self.m_z() as f64).ln() / n,
        }
    }

    /// Joint `(u, x)` symbol counts of cloud 0's first codeword, shared by all
    /// codewords of an ensemble-drawn code.
    pub fn composition(&self) -> Vec<usize> {
        let mut c = vec![0; self.nu * self.nx];
        for (&u, &x) in self.clouds[0].center.iter().zip(&self.clouds[0].words[0]) {
            c[u * self.nx + x] += 1;
        }
        c
    }

    /// Keeps the clouds at the given indices, in that order.
    pub fn select_clouds(&self, keep: &[usize]) -> Result<Self> {
        let clouds = keep
            .iter()
            .map(|&m| {
                self.clouds
                    .get(m)
                    .cloned()
                    .ok_or_else(|| Error::Index(format!("cloud {m}")))
            })
            .collect::<Result<Vec<_>>>()?;
        HccCode::new(self.n, self.nu, self.nx, clouds)
    }

    /// Plain-text form: a header line `n= m_z= m_y= nu= nx=`, then per cloud a
    /// `u` line followed by `m_y` `x` lines, symbols written as digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "n={} m_z={} m_y={} nu={} nx={}",
            self.n,
            self.m_z(),
            self.m_y(),
            self.nu,
            self.nx
        );
        let digits = |v: &[usize]| {
            v.iter()
                .map(|a| char::from_digit(*a as u32, 10).unwrap_or('?'))
                .collect::<String>()
        };
        for c in &self.clouds {
            let _ = writeln!(s, "u {}", digits(&c.center));
            for w in &c.words {
                let _ = writeln!(s, "x {}", digits(w));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty codebook".into()))?;
        let field = |name: &str| -> Result<usize> {
            header
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(name).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| Error::Parse(format!("missing {name}")))?
                .parse()
                .map_err(|e| Error::Parse(format!("{name}: {e}")))
        };
        let (n, m_z, m_y, nu, nx) = (field("n")?, field("m_z")?, field("m_y")?, field("nu")?, field("nx")?);
        if nu > 10 || nx > 10 {
            return Err(Error::Parse("alphabets above 10 symbols have no digit form".into()));
        }
        let mut seq = |tag: &str| -> Result<Vec<usize>> {
            let line = lines.next().ok_or_else(|| Error::Parse("truncated codebook".into()))?;
            let body = line
                .strip_prefix(tag)
                .ok_or_else(|| Error::Parse(format!("expected '{tag}' line, got '{line}'")))?;
            body.trim()
                .chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as usize)
                        .ok_or_else(|| Error::Parse(format!("bad symbol '{c}'")))
                })
                .collect()
        };
        let mut clouds = Vec::with_capacity(m_z);
        for _ in 0..m_z {
            let center = seq("u")?;
            let words = (0..m_y).map(|_| seq("x")).collect::<Result<Vec<_>>>()?;
            clouds.push(Cloud { center, words });
        }
        HccCode::new(n, nu, nx, clouds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampled_code_has_exact_types() {
        let e = EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let code = HccCode::sample(&e, RatePair::new(0.1, 0.15).unwrap(), 8, &mut rng).unwrap();
        assert_eq!((code.m_y(), code.m_z()), (3, 4));
        let comp = code.composition();
        assert_eq!(comp, vec![3, 1, 1, 3]);
        for m in 0..code.m_z() {
            for i in 0..code.m_y() {
                let mut c = vec![0; 4];
                for (&u, &x) in code.center(m).iter().zip(code.word(m, i)) {
                    c[u * 2 + x] += 1;
                }
                assert_eq!(c, comp);
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let e = EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let code = HccCode::sample(&e, RatePair::new(0.2, 0.1).unwrap(), 6, &mut rng).unwrap();
        assert_eq!(HccCode::from_text(&code.to_text()).unwrap(), code);
        assert!(HccCode::from_text("n=2 m_z=1 m_y=1 nu=2 nx=2\nu 01\n").is_err());
    }

    #[test]
    fn message_counts_round_up() {
        assert_eq!(message_count(0.0, 10).unwrap(), 1);
        assert_eq!(message_count((2.0f64).ln() / 4.0, 4).unwrap(), 2);
        assert_eq!(message_count(0.1, 8).unwrap(), 3);
        assert!(message_count(5.0, 64).is_err());
    }
}
