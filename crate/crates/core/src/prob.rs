//! Finite-alphabet probability objects and the information measures built on them.
//!
//! Natural logarithms throughout. `0 ln 0 = 0`, and a positive mass set against a
//! zero reference gives `+inf` rather than an error.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a pmf (and on every row of a conditional).
pub const NORM_TOL: f64 = 1e-12;
/// Measures within this distance below zero are clamped to zero.
pub const CLAMP_TOL: f64 = 1e-10;

/// Axis labels used by the exponent formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    U,
    Up,
    X,
    Xp,
    Y,
    Z,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::U => "U",
            Axis::Up => "U'",
            Axis::X => "X",
            Axis::Xp => "X'",
            Axis::Y => "Y",
            Axis::Z => "Z",
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        match s.trim() {
            "U" => Some(Axis::U),
            "U'" | "U′" | "Up" => Some(Axis::Up),
            "X" => Some(Axis::X),
            "X'" | "X′" | "Xp" => Some(Axis::Xp),
            "Y" => Some(Axis::Y),
            "Z" => Some(Axis::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A labeled finite alphabet `{0, .., size-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    pub axis: Axis,
    pub size: usize,
}

impl Alphabet {
    pub fn new(axis: Axis, size: usize) -> Self {
        Alphabet { axis, size }
    }
}

/// Which receiver a quantity refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum User {
    Strong,
    Weak,
}

fn check_axes(axes: &[Alphabet]) -> Result<()> {
    for (i, a) in axes.iter().enumerate() {
        if a.size == 0 {
            return Err(Error::ShapeMismatch(format!("axis {} has size 0", a.axis)));
        }
        if axes[..i].iter().any(|b| b.axis == a.axis) {
            return Err(Error::DuplicateAxis(a.axis.to_string()));
        }
    }
    Ok(())
}

pub(crate) fn strides(sizes: &[usize]) -> Vec<usize> {
    let mut st = vec![1; sizes.len()];
    for k in (0..sizes.len().saturating_sub(1)).rev() {
        st[k] = st[k + 1] * sizes[k + 1];
    }
    st
}

/// Maps every cell of a row-major tensor to the cell of its marginal on a
/// subset of axes (kept in the given order).
#[derive(Clone, Debug)]
pub struct Projector {
    map: Vec<usize>,
    out_len: usize,
}

impl Projector {
    pub fn new(sizes: &[usize], keep: &[usize]) -> Self {
        let out_sizes: Vec<usize> = keep.iter().map(|&k| sizes[k]).collect();
        let out_strides = strides(&out_sizes);
        let mut weight = vec![0usize; sizes.len()];
        for (j, &k) in keep.iter().enumerate() {
            weight[k] += out_strides[j];
        }
        let total: usize = sizes.iter().product();
        let mut map = Vec::with_capacity(total);
        let mut idx = vec![0usize; sizes.len()];
        let mut cur = 0usize;
        for _ in 0..total {
            map.push(cur);
            for k in (0..sizes.len()).rev() {
                idx[k] += 1;
                cur += weight[k];
                if idx[k] < sizes[k] {
                    break;
                }
                cur -= weight[k] * idx[k];
                idx[k] = 0;
            }
        }
        Projector {
            map,
            out_len: out_sizes.iter().product(),
        }
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn project(&self, probs: &[f64], out: &mut [f64]) {
        out[..self.out_len].fill(0.0);
        for (p, &j) in probs.iter().zip(&self.map) {
            out[j] += p;
        }
    }

    pub fn project_vec(&self, probs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_len];
        self.project(probs, &mut out);
        out
    }
}

/// `x ln x` with `0 ln 0 = 0`.
#[inline]
pub fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Entropy of a flat mass vector (need not be normalized).
pub fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().map(|&x| xlnx(x)).sum::<f64>()
}

/// Clamp measures that are negative only through rounding.
#[inline]
pub fn clamp_measure(v: f64) -> f64 {
    if v < 0.0 && v > -CLAMP_TOL {
        0.0
    } else {
        v
    }
}

/// `[x]_+ = max(0, x)`.
#[inline]
pub fn pos_part(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `a * b` with `0 * (+-inf) = 0`.
#[inline]
pub fn mul0(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// Dense joint pmf over labeled axes, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPmf {
    axes: Vec<Alphabet>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(axes: Vec<Alphabet>, probs: Vec<f64>) -> Result<Self> {
        check_axes(&axes)?;
        let len: usize = axes.iter().map(|a| a.size).product();
        if probs.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "expected {len} cells, got {}",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidPmf(format!("cell value {bad}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidPmf(format!("total mass {total}")));
        }
        Ok(JointPmf { axes, probs })
    }

    /// Builds a pmf from unnormalized nonnegative weights.
    pub fn normalized(axes: Vec<Alphabet>, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidPmf(format!("total weight {total}")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        JointPmf::new(axes, weights)
    }

    pub fn uniform(axes: Vec<Alphabet>) -> Result<Self> {
        let len: usize = axes.iter().map(|a| a.size).product();
        JointPmf::new(axes, vec![1.0 / len as f64; len])
    }

    pub fn point_mass(axes: Vec<Alphabet>, index: &[usize]) -> Result<Self> {
        check_axes(&axes)?;
        let len: usize = axes.iter().map(|a| a.size).product();
        let sizes: Vec<usize> = axes.iter().map(|a| a.size).collect();
        let flat = flat_index(&sizes, index)?;
        let mut probs = vec![0.0; len];
        probs[flat] = 1.0;
        JointPmf::new(axes, probs)
    }

    /// Single-axis pmf from a probability vector.
    pub fn from_vec(axis: Axis, p: &[f64]) -> Result<Self> {
        JointPmf::new(vec![Alphabet::new(axis, p.len())], p.to_vec())
    }

    /// Unchecked constructor for solver internals; mass is assumed valid.
    pub(crate) fn from_raw(axes: Vec<Alphabet>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(axes.iter().map(|a| a.size).product::<usize>(), probs.len());
        JointPmf { axes, probs }
    }

    pub fn axes(&self) -> &[Alphabet] {
        &self.axes
    }

    pub fn labels(&self) -> Vec<Axis> {
        self.axes.iter().map(|a| a.axis).collect()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.size).collect()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn size_of(&self, axis: Axis) -> Result<usize> {
        Ok(self.axes[self.position(axis)?].size)
    }

    pub fn position(&self, axis: Axis) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.axis == axis)
            .ok_or_else(|| Error::UnknownAxis(axis.to_string()))
    }

    pub fn positions(&self, axes: &[Axis]) -> Result<Vec<usize>> {
        let pos = axes.iter().map(|&a| self.position(a)).collect::<Result<Vec<_>>>()?;
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(Error::DuplicateAxis(a.to_string()));
            }
        }
        Ok(pos)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.probs[flat_index(&self.sizes(), index)?])
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let sizes = self.sizes();
        let mut idx = vec![0; sizes.len()];
        let mut rem = flat;
        for k in (0..sizes.len()).rev() {
            idx[k] = rem % sizes[k];
            rem /= sizes[k];
        }
        idx
    }

    /// Marginal on `axes`, in the requested order.
    pub fn marginal(&self, axes: &[Axis]) -> Result<JointPmf> {
        let pos = self.positions(axes)?;
        let proj = Projector::new(&self.sizes(), &pos);
        let out_axes = pos.iter().map(|&k| self.axes[k]).collect();
        Ok(JointPmf::from_raw(out_axes, proj.project_vec(&self.probs)))
    }

    /// Reorders the axes; `order` must list every axis exactly once.
    pub fn permute(&self, order: &[Axis]) -> Result<JointPmf> {
        if order.len() != self.axes.len() {
            return Err(Error::ShapeMismatch(format!(
                "permutation of {} axes given {} labels",
                self.axes.len(),
                order.len()
            )));
        }
        self.marginal(order)
    }

    /// Renames axes; pairs are `(old, new)`.
    pub fn relabel(&self, pairs: &[(Axis, Axis)]) -> Result<JointPmf> {
        let mut axes = self.axes.clone();
        for &(old, new) in pairs {
            let k = self.position(old)?;
            axes[k].axis = new;
        }
        check_axes(&axes)?;
        Ok(JointPmf::from_raw(axes, self.probs.clone()))
    }

    /// Outer product with a pmf on disjoint axes.
    pub fn product(&self, other: &JointPmf) -> Result<JointPmf> {
        let mut axes = self.axes.clone();
        axes.extend_from_slice(&other.axes);
        check_axes(&axes)?;
        let mut probs = Vec::with_capacity(self.len() * other.len());
        for &p in &self.probs {
            for &q in &other.probs {
                probs.push(p * q);
            }
        }
        Ok(JointPmf::from_raw(axes, probs))
    }

    /// `self(a) * cond(b | a_from)`, appending `cond`'s output axes.
    pub fn compose(&self, cond: &CondPmf) -> Result<JointPmf> {
        let mut from_pos = Vec::with_capacity(cond.from.len());
        for a in &cond.from {
            let k = self.position(a.axis)?;
            if self.axes[k].size != a.size {
                return Err(Error::ShapeMismatch(format!(
                    "axis {} has size {} but the conditional expects {}",
                    a.axis, self.axes[k].size, a.size
                )));
            }
            from_pos.push(k);
        }
        let mut axes = self.axes.clone();
        axes.extend_from_slice(&cond.to);
        check_axes(&axes)?;
        let proj = Projector::new(&self.sizes(), &from_pos);
        let nto = cond.n_to();
        let mut probs = Vec::with_capacity(self.len() * nto);
        for (i, &p) in self.probs.iter().enumerate() {
            let row = cond.row(proj.map[i]);
            probs.extend(row.iter().map(|&w| p * w));
        }
        Ok(JointPmf::from_raw(axes, probs))
    }

    /// Conditional `Q(to | from)`; rows with zero mass are set uniform.
    pub fn conditional(&self, to: &[Axis], from: &[Axis]) -> Result<CondPmf> {
        disjoint(to, from)?;
        let mut order = from.to_vec();
        order.extend_from_slice(to);
        let joint = self.marginal(&order)?;
        let from_axes: Vec<Alphabet> = joint.axes[..from.len()].to_vec();
        let to_axes: Vec<Alphabet> = joint.axes[from.len()..].to_vec();
        let nto: usize = to_axes.iter().map(|a| a.size).product();
        let mut rows = joint.probs;
        for row in rows.chunks_mut(nto) {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            } else {
                row.iter_mut().for_each(|v| *v = 1.0 / nto as f64);
            }
        }
        Ok(CondPmf {
            from: from_axes,
            to: to_axes,
            rows,
        })
    }

    /// Largest absolute cell difference against a pmf with identical axes.
    pub fn max_abs_diff(&self, other: &JointPmf) -> Result<f64> {
        if self.axes != other.axes {
            return Err(Error::ShapeMismatch("axes differ".into()));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn flat_index(sizes: &[usize], index: &[usize]) -> Result<usize> {
    if index.len() != sizes.len() {
        return Err(Error::ShapeMismatch(format!(
            "index of length {} for {} axes",
            index.len(),
            sizes.len()
        )));
    }
    let mut flat = 0;
    for (&i, &n) in index.iter().zip(sizes) {
        if i >= n {
            return Err(Error::Index(format!("{i} >= {n}")));
        }
        flat = flat * n + i;
    }
    Ok(flat)
}

fn disjoint(a: &[Axis], b: &[Axis]) -> Result<()> {
    if let Some(x) = a.iter().find(|x| b.contains(x)) {
        return Err(Error::OverlappingAxes(x.to_string()));
    }
    Ok(())
}

/// Stochastic tensor `Q(to | from)`, one row per cell of the `from` axes.
#[derive(Clone, Debug, PartialEq)]
pub struct CondPmf {
    from: Vec<Alphabet>,
    to: Vec<Alphabet>,
    rows: Vec<f64>,
}

impl CondPmf {
    pub fn new(from: Vec<Alphabet>, to: Vec<Alphabet>, rows: Vec<f64>) -> Result<Self> {
        let mut all = from.clone();
        all.extend_from_slice(&to);
        check_axes(&all)?;
        let nfrom: usize = from.iter().map(|a| a.size).product();
        let nto: usize = to.iter().map(|a| a.size).product();
        if rows.len() != nfrom * nto {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries, got {}",
                nfrom * nto,
                rows.len()
            )));
        }
        for (r, row) in rows.chunks(nto).enumerate() {
            if let Some(bad) = row.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidChannel(format!("row {r} has entry {bad}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidChannel(format!("row {r} sums to {s}")));
            }
        }
        Ok(CondPmf { from, to, rows })
    }

    /// Single-axis channel from a row-major matrix.
    pub fn from_matrix(from: Axis, to: Axis, m: &[Vec<f64>]) -> Result<Self> {
        let nto = m.first().map_or(0, |r| r.len());
        if m.iter().any(|r| r.len() != nto) {
            return Err(Error::ShapeMismatch("ragged matrix".into()));
        }
        CondPmf::new(
            vec![Alphabet::new(from, m.len())],
            vec![Alphabet::new(to, nto)],
            m.concat(),
        )
    }

    pub fn bsc(from: Axis, to: Axis, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange(format!("crossover {p}")));
        }
        CondPmf::from_matrix(from, to, &[vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    pub fn identity(from: Alphabet, to: Axis) -> Result<Self> {
        let n = from.size;
        let mut rows = vec![0.0; n * n];
        for i in 0..n {
            rows[i * n + i] = 1.0;
        }
        CondPmf::new(vec![from], vec![Alphabet::new(to, n)], rows)
    }

    pub fn uniform(from: Vec<Alphabet>, to: Vec<Alphabet>) -> Result<Self> {
        let nfrom: usize = from.iter().map(|a| a.size).product();
        let nto: usize = to.iter().map(|a| a.size).product();
        CondPmf::new(from, to, vec![1.0 / nto as f64; nfrom * nto])
    }

    pub fn from_axes(&self) -> &[Alphabet] {
        &self.from
    }

    pub fn to_axes(&self) -> &[Alphabet] {
        &self.to
    }

    pub fn n_from(&self) -> usize {
        self.from.iter().map(|a| a.size).product()
    }

    pub fn n_to(&self) -> usize {
        self.to.iter().map(|a| a.size).product()
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_to();
        &self.rows[i * n..(i + 1) * n]
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.rows[from * self.n_to() + to]
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n_from()).map(|i| self.row(i).to_vec()).collect()
    }

    /// Extends the conditioning to a superset of axes; the value ignores the
    /// added axes.
    pub fn broadcast(&self, from: Vec<Alphabet>) -> Result<CondPmf> {
        let sizes: Vec<usize> = from.iter().map(|a| a.size).collect();
        let mut pos = Vec::with_capacity(self.from.len());
        for a in &self.from {
            let k = from
                .iter()
                .position(|b| b.axis == a.axis && b.size == a.size)
                .ok_or_else(|| Error::UnknownAxis(a.axis.to_string()))?;
            pos.push(k);
        }
        let proj = Projector::new(&sizes, &pos);
        let mut rows = Vec::with_capacity(proj.map.len() * self.n_to());
        for &r in &proj.map {
            rows.extend_from_slice(self.row(r));
        }
        CondPmf::new(from, self.to.clone(), rows)
    }

    pub fn relabel(&self, pairs: &[(Axis, Axis)]) -> Result<CondPmf> {
        let mut from = self.from.clone();
        let mut to = self.to.clone();
        for &(old, new) in pairs {
            let mut hit = false;
            for a in from.iter_mut().chain(to.iter_mut()) {
                if a.axis == old {
                    a.axis = new;
                    hit = true;
                }
            }
            if !hit {
                return Err(Error::UnknownAxis(old.to_string()));
            }
        }
        CondPmf::new(from, to, self.rows.clone())
    }
}

/// `H_Q` of the marginal on `axes`.
pub fn entropy(q: &JointPmf, axes: &[Axis]) -> Result<f64> {
    let m = q.marginal(axes)?;
    Ok(clamp_measure(entropy_of(&m.probs)))
}

/// `H_Q(target | given)`.
pub fn conditional_entropy(q: &JointPmf, target: &[Axis], given: &[Axis]) -> Result<f64> {
    disjoint(target, given)?;
    let mut all = target.to_vec();
    all.extend_from_slice(given);
    Ok(clamp_measure(entropy(q, &all)? - entropy(q, given)?))
}

/// `I_Q(a; b)`.
pub fn mutual_info(q: &JointPmf, a: &[Axis], b: &[Axis]) -> Result<f64> {
    conditional_mutual_info(q, a, b, &[])
}

/// `I_Q(a; b | given)`.
pub fn conditional_mutual_info(q: &JointPmf, a: &[Axis], b: &[Axis], given: &[Axis]) -> Result<f64> {
    disjoint(a, b)?;
    disjoint(a, given)?;
    disjoint(b, given)?;
    let cat = |x: &[Axis], y: &[Axis]| {
        let mut v = x.to_vec();
        v.extend_from_slice(y);
        v
    };
    let ac = cat(a, given);
    let bc = cat(b, given);
    let abc = cat(&ac, b);
    let v = entropy_of(&q.marginal(&ac)?.probs) + entropy_of(&q.marginal(&bc)?.probs)
        - entropy_of(&q.marginal(&abc)?.probs)
        - entropy_of(&q.marginal(given)?.probs);
    Ok(clamp_measure(v))
}

/// `D(q_cond || w | weight) = sum_a weight(a) sum_b q(b|a) ln(q(b|a)/w(b|a))`.
pub fn weighted_divergence(q_cond: &CondPmf, w: &CondPmf, weight: &JointPmf) -> Result<f64> {
    let qs: Vec<usize> = q_cond.from.iter().map(|a| a.size).collect();
    let ws: Vec<usize> = w.from.iter().map(|a| a.size).collect();
    let ps = weight.sizes();
    let qt: Vec<usize> = q_cond.to.iter().map(|a| a.size).collect();
    let wt: Vec<usize> = w.to.iter().map(|a| a.size).collect();
    if qs != ws || qs != ps || qt != wt {
        return Err(Error::ShapeMismatch(
            "conditionals and weight must share their shapes".into(),
        ));
    }
    let mut d = 0.0;
    for (a, &pa) in weight.probs.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        d += pa * row_divergence(q_cond.row(a), w.row(a));
    }
    Ok(clamp_measure(d))
}

/// `sum_b q(b) ln(q(b)/w(b))` with the usual zero conventions.
pub fn row_divergence(q: &[f64], w: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&qb, &wb) in q.iter().zip(w) {
        if qb > 0.0 {
            if wb > 0.0 {
                d += qb * (qb / wb).ln();
            } else {
                return f64::INFINITY;
            }
        }
    }
    d
}

pub fn compose(p: &JointPmf, cond: &CondPmf) -> Result<JointPmf> {
    p.compose(cond)
}

pub fn marginalize(q: &JointPmf, axes: &[Axis]) -> Result<JointPmf> {
    q.marginal(axes)
}

pub fn permute_axes(q: &JointPmf, order: &[Axis]) -> Result<JointPmf> {
    q.permute(order)
}

/// The two DMCs: `w1: X -> Y` (strong user) and `w2: X -> Z` (weak user).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelModel {
    w1: CondPmf,
    w2: CondPmf,
}

impl ChannelModel {
    pub fn new(w1: CondPmf, w2: CondPmf) -> Result<Self> {
        let ok = |w: &CondPmf, out: Axis| {
            w.from.len() == 1 && w.to.len() == 1 && w.from[0].axis == Axis::X && w.to[0].axis == out
        };
        if !ok(&w1, Axis::Y) || !ok(&w2, Axis::Z) {
            return Err(Error::InvalidChannel(
                "w1 must map X to Y and w2 must map X to Z".into(),
            ));
        }
        if w1.from[0].size != w2.from[0].size {
            return Err(Error::InvalidChannel("input alphabets differ".into()));
        }
        Ok(ChannelModel { w1, w2 })
    }

    pub fn from_matrices(w1: &[Vec<f64>], w2: &[Vec<f64>]) -> Result<Self> {
        ChannelModel::new(
            CondPmf::from_matrix(Axis::X, Axis::Y, w1)?,
            CondPmf::from_matrix(Axis::X, Axis::Z, w2)?,
        )
    }

    /// Binary symmetric channels with crossovers `p_y` and `p_z`.
    pub fn bsc_pair(p_y: f64, p_z: f64) -> Result<Self> {
        ChannelModel::new(
            CondPmf::bsc(Axis::X, Axis::Y, p_y)?,
            CondPmf::bsc(Axis::X, Axis::Z, p_z)?,
        )
    }

    pub fn w1(&self) -> &CondPmf {
        &self.w1
    }

    pub fn w2(&self) -> &CondPmf {
        &self.w2
    }

    pub fn for_user(&self, user: User) -> &CondPmf {
        match user {
            User::Strong => &self.w1,
            User::Weak => &self.w2,
        }
    }

    pub fn nx(&self) -> usize {
        self.w1.from[0].size
    }
}

/// Cloud distribution `P_U` and satellite conditional `P_{X|U}`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    p_u: JointPmf,
    p_x_given_u: CondPmf,
}

impl EnsembleSpec {
    pub fn new(p_u: JointPmf, p_x_given_u: CondPmf) -> Result<Self> {
        if p_u.labels() != [Axis::U] {
            return Err(Error::ShapeMismatch("P_U must live on axis U".into()));
        }
        let f = p_x_given_u.from_axes();
        let t = p_x_given_u.to_axes();
        if f.len() != 1 || t.len() != 1 || f[0] != p_u.axes[0] || t[0].axis != Axis::X {
            return Err(Error::ShapeMismatch("P_X|U must map U to X".into()));
        }
        Ok(EnsembleSpec { p_u, p_x_given_u })
    }

    pub fn from_vectors(p_u: &[f64], p_x_given_u: &[Vec<f64>]) -> Result<Self> {
        EnsembleSpec::new(
            JointPmf::from_vec(Axis::U, p_u)?,
            CondPmf::from_matrix(Axis::U, Axis::X, p_x_given_u)?,
        )
    }

    pub fn p_u(&self) -> &JointPmf {
        &self.p_u
    }

    pub fn p_x_given_u(&self) -> &CondPmf {
        &self.p_x_given_u
    }

    /// `P_UX` on axes `(U, X)`.
    pub fn p_ux(&self) -> JointPmf {
        self.p_u.compose(&self.p_x_given_u).expect("validated at construction")
    }

    pub fn nu(&self) -> usize {
        self.p_u.len()
    }

    pub fn nx(&self) -> usize {
        self.p_x_given_u.n_to()
    }
}

/// Rates in nats per symbol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r_y: f64,
    pub r_z: f64,
}

impl RatePair {
    pub fn new(r_y: f64, r_z: f64) -> Result<Self> {
        for (name, r) in [("r_y", r_y), ("r_z", r_z)] {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::OutOfRange(format!("{name} = {r}")));
            }
        }
        Ok(RatePair { r_y, r_z })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bin(axis: Axis) -> Alphabet {
        Alphabet::new(axis, 2)
    }

    #[test]
    fn entropy_examples() {
        let u = JointPmf::uniform(vec![bin(Axis::U)]).unwrap();
        assert!((entropy(&u, &[Axis::U]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let pm = JointPmf::point_mass(vec![bin(Axis::U)], &[1]).unwrap();
        assert_eq!(entropy(&pm, &[Axis::U]).unwrap(), 0.0);
        let b = JointPmf::from_vec(Axis::X, &[0.15, 0.85]).unwrap();
        assert!((entropy(&b, &[Axis::X]).unwrap() - 0.422_709_087_805_990_9).abs() < 1e-9);
    }

    #[test]
    fn conditional_entropy_examples() {
        let ens = EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.85, 0.15], vec![0.15, 0.85]]).unwrap();
        let q = ens.p_ux();
        let h = conditional_entropy(&q, &[Axis::X], &[Axis::U]).unwrap();
        assert!((h - 0.422_709_087_805_990_9).abs() < 1e-9);
        let prod = JointPmf::from_vec(Axis::U, &[0.3, 0.7])
            .unwrap()
            .product(&JointPmf::from_vec(Axis::X, &[0.6, 0.4]).unwrap())
            .unwrap();
        let a = conditional_entropy(&prod, &[Axis::X], &[Axis::U]).unwrap();
        assert!((a - entropy(&prod, &[Axis::X]).unwrap()).abs() < 1e-14);
        let diag = JointPmf::new(vec![bin(Axis::U), bin(Axis::X)], vec![0.4, 0.0, 0.0, 0.6]).unwrap();
        assert_eq!(conditional_entropy(&diag, &[Axis::X], &[Axis::U]).unwrap(), 0.0);
        assert!(matches!(
            conditional_entropy(&diag, &[Axis::X], &[Axis::X]),
            Err(Error::OverlappingAxes(_))
        ));
    }

    #[test]
    fn mutual_info_examples() {
        let ens = EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.85, 0.15], vec![0.15, 0.85]]).unwrap();
        let q = ens.p_ux();
        let i = mutual_info(&q, &[Axis::U], &[Axis::X]).unwrap();
        assert!((i - 0.270_438_092_753_954_4).abs() < 1e-9);
        let copy = JointPmf::new(vec![bin(Axis::U), bin(Axis::X)], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((mutual_info(&copy, &[Axis::U], &[Axis::X]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let prod = JointPmf::uniform(vec![bin(Axis::U), bin(Axis::X)]).unwrap();
        assert_eq!(mutual_info(&prod, &[Axis::U], &[Axis::X]).unwrap(), 0.0);
    }

    #[test]
    fn weighted_divergence_examples() {
        let w = CondPmf::bsc(Axis::X, Axis::Z, 0.1).unwrap();
        let id = CondPmf::identity(bin(Axis::X), Axis::Z).unwrap();
        let weight = JointPmf::uniform(vec![bin(Axis::X)]).unwrap();
        let d = weighted_divergence(&id, &w, &weight).unwrap();
        assert!((d - 0.105_360_515_657_826_3).abs() < 1e-12);
        assert_eq!(weighted_divergence(&w, &w, &weight).unwrap(), 0.0);
        let one_row = JointPmf::from_vec(Axis::X, &[1.0, 0.0]).unwrap();
        let q = CondPmf::from_matrix(Axis::X, Axis::Z, &[vec![0.9, 0.1], vec![0.0, 1.0]]).unwrap();
        let zero_w = CondPmf::from_matrix(Axis::X, Axis::Z, &[vec![0.9, 0.1], vec![1.0, 0.0]]).unwrap();
        assert_eq!(weighted_divergence(&q, &zero_w, &one_row).unwrap(), 0.0);
        assert_eq!(weighted_divergence(&q, &zero_w, &weight).unwrap(), f64::INFINITY);
    }

    #[test]
    fn pos_part_examples() {
        assert_eq!(pos_part(-0.3), 0.0);
        assert_eq!(pos_part(0.7), 0.7);
        assert_eq!(pos_part(0.0), 0.0);
        assert_eq!(pos_part(f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn plumbing_examples() {
        let pu = JointPmf::uniform(vec![bin(Axis::U)]).unwrap();
        let id = CondPmf::identity(bin(Axis::U), Axis::X).unwrap();
        let diag = compose(&pu, &id).unwrap();
        assert_eq!(diag.probs(), &[0.5, 0.0, 0.0, 0.5]);
        let ens = EnsembleSpec::from_vectors(&[0.3, 0.7], &[vec![0.85, 0.15], vec![0.2, 0.8]]).unwrap();
        let pux = ens.p_ux();
        assert_eq!(marginalize(&pux, &[Axis::U]).unwrap().probs(), ens.p_u().probs());
        let back = permute_axes(&permute_axes(&pux, &[Axis::X, Axis::U]).unwrap(), &[Axis::U, Axis::X]).unwrap();
        assert_eq!(back, pux);
        let cond = pux.conditional(&[Axis::X], &[Axis::U]).unwrap();
        let again = ens.p_u().compose(&cond).unwrap();
        assert!(again.max_abs_diff(&pux).unwrap() < 1e-15);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(JointPmf::new(vec![bin(Axis::U)], vec![0.5, 0.6]).is_err());
        assert!(JointPmf::new(vec![bin(Axis::U), bin(Axis::U)], vec![0.25; 4]).is_err());
        assert!(CondPmf::from_matrix(Axis::X, Axis::Y, &[vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(matches!(
            entropy(&JointPmf::uniform(vec![bin(Axis::U)]).unwrap(), &[Axis::Z]),
            Err(Error::UnknownAxis(_))
        ));
        assert!(RatePair::new(-0.1, 0.0).is_err());
    }

    #[test]
    fn broadcast_ignores_added_axes() {
        let w = CondPmf::bsc(Axis::X, Axis::Z, 0.2).unwrap();
        let b = w.broadcast(vec![bin(Axis::U), bin(Axis::X)]).unwrap();
        assert_eq!(b.row(2), w.row(0));
        assert_eq!(b.row(3), w.row(1));
    }
}
