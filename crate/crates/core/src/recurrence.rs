//! Delay embedding, recurrence and cross-recurrence matrices, and the
//! cross-transitivity / cross-clustering measures of inter-system
//! recurrence networks.
//!
//! Binary matrices are stored as packed bit rows, so the triangle count
//! `Σ_v Σ_{p≠q} CR[v][p] R[p][q] CR[v][q]` becomes, for every `v` and every
//! neighbour `p` of `v`, a popcount of `R[p] & CR[v]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Euclidean,
    Supremum,
}

impl Metric {
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        if a.len() == 1 {
            return (a[0] - b[0]).abs();
        }
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Supremum => a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    FixedEpsilon,
    FixedRecurrenceRate,
}

/// Which matrices of a pair share a recurrence-rate threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdScope {
    /// One ε from the pooled cross distances, used for `CR`, `Rⁱ` and `Rʲ`.
    Shared,
    /// `CR`, `Rⁱ` and `Rʲ` each get the ε that gives them density ρ.
    #[default]
    PerMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecurrenceConfig {
    pub embed_dim: usize,
    /// Embedding delay in samples.
    pub embed_delay: usize,
    pub threshold_mode: ThresholdMode,
    /// Distance threshold, only read in fixed-epsilon mode.
    pub epsilon: f64,
    /// Target cross-recurrence density in fixed-recurrence-rate mode.
    pub recurrence_rate: f64,
    pub threshold_scope: ThresholdScope,
    pub metric: Metric,
    /// Dead band on `T^{ij} - T^{ji}` inside which a pair is bidirectional.
    pub direction_tol: f64,
}

impl Default for RecurrenceConfig {
    fn default() -> Self {
        Self {
            embed_dim: 1,
            embed_delay: 1,
            threshold_mode: ThresholdMode::FixedRecurrenceRate,
            epsilon: 0.1,
            recurrence_rate: 0.10,
            threshold_scope: ThresholdScope::PerMatrix,
            metric: Metric::Euclidean,
            direction_tol: 0.08,
        }
    }
}

impl RecurrenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::invalid("embed_dim", "must be at least 1"));
        }
        if self.embed_delay == 0 {
            return Err(Error::invalid("embed_delay", "must be at least 1"));
        }
        if !(self.recurrence_rate > 0.0 && self.recurrence_rate < 1.0) {
            return Err(Error::invalid(
                "recurrence_rate",
                format!("must lie in (0, 1), got {}", self.recurrence_rate),
            ));
        }
        if self.threshold_mode == ThresholdMode::FixedEpsilon && !(self.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon", "must be non-negative"));
        }
        if !(self.direction_tol >= 0.0) {
            return Err(Error::invalid("direction_tol", "must be non-negative"));
        }
        Ok(())
    }
}

/// Row-major set of embedded points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::invalid("dim", "data length must be a multiple of dim"));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Time-delay embedding: row `k` is `(s[k], s[k+delay], …, s[k+(dim-1)·delay])`.
pub fn embed(series: &[f64], dim: usize, delay: usize) -> Result<PointCloud> {
    if dim == 0 || delay == 0 {
        return Err(Error::invalid("embedding", "dim and delay must be at least 1"));
    }
    let span = (dim - 1) * delay;
    if series.len() <= span {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            span: span + 1,
        });
    }
    let rows = series.len() - span;
    let mut data = Vec::with_capacity(rows * dim);
    for k in 0..rows {
        data.extend((0..dim).map(|d| series[k + d * delay]));
    }
    PointCloud::new(dim, data)
}

/// Dense binary matrix with bit-packed rows.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    words: usize,
    bits: Vec<u64>,
}

impl std::fmt::Debug for BinaryMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let line: String = (0..self.cols).map(|c| if self.get(r, c) { '1' } else { '0' }).collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64);
        Self {
            rows,
            cols,
            words,
            bits: vec![0; rows * words],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.words + c / 64] >> (c % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        let w = &mut self.bits[r * self.words + c / 64];
        if value {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    #[inline]
    fn row_words(&self, r: usize) -> &[u64] {
        &self.bits[r * self.words..(r + 1) * self.words]
    }

    pub fn row_count(&self, r: usize) -> u64 {
        self.row_words(r).iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Column indices of the ones in row `r`, ascending.
    pub fn row_ones(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_words(r).iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn density(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        self.count_ones() as f64 / (self.rows * self.cols) as f64
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in self.row_ones(r) {
                t.set(c, r, true);
            }
        }
        t
    }

    /// `Σ_{p ∈ row_a} |row_a ∩ other[p]|`.
    #[inline]
    fn closed_pairs(&self, r: usize, other: &BinaryMatrix) -> u64 {
        let row = self.row_words(r);
        self.row_ones(r)
            .map(|p| {
                other
                    .row_words(p)
                    .iter()
                    .zip(row)
                    .map(|(a, b)| (a & b).count_ones() as u64)
                    .sum::<u64>()
            })
            .sum()
    }

    /// CSV dump, one row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows * (2 * self.cols + 1));
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c > 0 {
                    out.push(',');
                }
                out.push(if self.get(r, c) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossRecurrenceMatrix {
    pub entries: BinaryMatrix,
    pub epsilon_used: f64,
    pub density: f64,
}

fn check_dims(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

/// Distance threshold at which the cross-recurrence density between the two
/// clouds is `rho`: the `round(rho·P·Q)`-th smallest cross distance.
pub fn threshold_for_rate(a: &PointCloud, b: &PointCloud, rho: f64, metric: Metric) -> Result<f64> {
    check_dims(a, b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("cloud", "point clouds must be non-empty"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid("rho", format!("must lie in (0, 1), got {rho}")));
    }
    let mut d: Vec<f64> = Vec::with_capacity(a.len() * b.len());
    for pa in a.points() {
        d.extend(b.points().map(|pb| metric.distance(pa, pb)));
    }
    rate_quantile(d, rho)
}

/// Distance threshold at which the off-diagonal density of the cloud's own
/// recurrence matrix is `rho`.
pub fn threshold_for_recurrence_rate(cloud: &PointCloud, rho: f64, metric: Metric) -> Result<f64> {
    let n = cloud.len();
    if n < 2 {
        return Err(Error::invalid("cloud", "need at least two points"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid("rho", format!("must lie in (0, 1), got {rho}")));
    }
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for p in 0..n {
        d.extend(((p + 1)..n).map(|q| metric.distance(cloud.point(p), cloud.point(q))));
    }
    rate_quantile(d, rho)
}

fn rate_quantile(mut d: Vec<f64>, rho: f64) -> Result<f64> {
    let (lo, hi) = d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if lo == hi {
        return Err(Error::DegenerateDistances { distance: lo });
    }
    let k = ((rho * d.len() as f64).round() as usize).clamp(1, d.len());
    let (_, eps, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*eps)
}

/// `CR[p][q] = 1` iff `dist(a_p, b_q) <= epsilon`.
pub fn cross_recurrence_matrix(
    a: &PointCloud,
    b: &PointCloud,
    epsilon: f64,
    metric: Metric,
) -> Result<CrossRecurrenceMatrix> {
    check_dims(a, b)?;
    let entries = BinaryMatrix::from_fn(a.len(), b.len(), |p, q| {
        metric.distance(a.point(p), b.point(q)) <= epsilon
    });
    let density = entries.density();
    Ok(CrossRecurrenceMatrix {
        entries,
        epsilon_used: epsilon,
        density,
    })
}

/// Recurrence matrix of one cloud with the main diagonal cleared.
pub fn recurrence_matrix(cloud: &PointCloud, epsilon: f64, metric: Metric) -> BinaryMatrix {
    let n = cloud.len();
    let mut m = BinaryMatrix::zeros(n, n);
    for p in 0..n {
        for q in (p + 1)..n {
            if metric.distance(cloud.point(p), cloud.point(q)) <= epsilon {
                m.set(p, q, true);
                m.set(q, p, true);
            }
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossTransitivity {
    pub value: f64,
    /// Closed cross-triangles, ordered `(p, q)` pairs.
    pub triangles: u64,
    /// Cross-triples, ordered `(p, q)` pairs.
    pub triples: u64,
}

impl CrossTransitivity {
    /// No cross-triples at all; `value` is reported as 0.
    pub fn is_degenerate(&self) -> bool {
        self.triples == 0
    }
}

fn check_compatible(cr_ab: &BinaryMatrix, rec_b: &BinaryMatrix) -> Result<()> {
    if rec_b.rows() != rec_b.cols() {
        return Err(Error::DimensionMismatch {
            expected: rec_b.rows(),
            actual: rec_b.cols(),
        });
    }
    if cr_ab.cols() != rec_b.rows() {
        return Err(Error::DimensionMismatch {
            expected: rec_b.rows(),
            actual: cr_ab.cols(),
        });
    }
    Ok(())
}

/// Probability that two cross-neighbours (in system B) of a node of system A
/// are themselves recurrent in B.
///
/// `rec_b` must have an empty diagonal; `p = q` terms then vanish from the
/// numerator automatically.
pub fn cross_transitivity(cr_ab: &BinaryMatrix, rec_b: &BinaryMatrix) -> Result<CrossTransitivity> {
    check_compatible(cr_ab, rec_b)?;
    let mut triangles = 0u64;
    let mut triples = 0u64;
    for v in 0..cr_ab.rows() {
        let k = cr_ab.row_count(v);
        if k < 2 {
            continue;
        }
        triples += k * (k - 1);
        triangles += cr_ab.closed_pairs(v, rec_b);
    }
    let value = if triples == 0 { 0.0 } else { triangles as f64 / triples as f64 };
    Ok(CrossTransitivity {
        value,
        triangles,
        triples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossClustering {
    pub per_node: Vec<f64>,
    pub mean: f64,
}

/// Local cross-clustering `C_v` for every row node of `cr_ab`, and their mean.
pub fn cross_clustering(cr_ab: &BinaryMatrix, rec_b: &BinaryMatrix) -> Result<CrossClustering> {
    check_compatible(cr_ab, rec_b)?;
    let per_node: Vec<f64> = (0..cr_ab.rows())
        .map(|v| {
            let k = cr_ab.row_count(v);
            if k < 2 {
                0.0
            } else {
                cr_ab.closed_pairs(v, rec_b) as f64 / (k * (k - 1)) as f64
            }
        })
        .collect();
    let mean = if per_node.is_empty() {
        0.0
    } else {
        per_node.iter().sum::<f64>() / per_node.len() as f64
    };
    Ok(CrossClustering { per_node, mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud1(v: &[f64]) -> PointCloud {
        PointCloud::new(1, v.to_vec()).unwrap()
    }

    #[test]
    fn embedding_shapes() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(embed(&s, 1, 1).unwrap(), cloud1(&s));
        let e = embed(&s, 2, 1).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e.point(0), &[1.0, 2.0]);
        assert_eq!(e.point(2), &[3.0, 4.0]);
        let s10: Vec<f64> = (0..10).map(f64::from).collect();
        let e = embed(&s10, 3, 2).unwrap();
        assert_eq!(e.len(), 6);
        assert_eq!(e.point(5), &[5.0, 7.0, 9.0]);
        assert!(matches!(embed(&s, 3, 2), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn metrics() {
        assert_eq!(Metric::Euclidean.distance(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
        assert_eq!(Metric::Supremum.distance(&[0.0, 0.0], &[3.0, -4.0]), 4.0);
    }

    #[test]
    fn degenerate_threshold() {
        let c = cloud1(&[0.5; 5]);
        assert!(matches!(
            threshold_for_rate(&c, &c, 0.1, Metric::Euclidean),
            Err(Error::DegenerateDistances { .. })
        ));
    }

    #[test]
    fn threshold_near_one_covers_everything() {
        let a = cloud1(&[0.0, 1.0, 2.5, -1.0]);
        let b = cloud1(&[0.3, 4.0, -2.0]);
        let eps = threshold_for_rate(&a, &b, 0.999, Metric::Euclidean).unwrap();
        assert_eq!(eps, 5.0);
        let cr = cross_recurrence_matrix(&a, &b, eps, Metric::Euclidean).unwrap();
        assert_eq!(cr.density, 1.0);
    }

    #[test]
    fn threshold_is_enumerated_median() {
        // 3x3 grid of planar points; all nine cross distances by hand
        let a = PointCloud::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 2.0]).unwrap();
        let b = PointCloud::new(2, vec![3.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let mut all = vec![
            3.0,
            1.0,
            2f64.sqrt(),
            2.0,
            2f64.sqrt(),
            1.0,
            13f64.sqrt(),
            1.0,
            2f64.sqrt(),
        ];
        all.sort_by(f64::total_cmp);
        let eps = threshold_for_rate(&a, &b, 0.5, Metric::Euclidean).unwrap();
        assert_eq!(eps, all[4]);
    }

    #[test]
    fn cross_recurrence_basics() {
        let a = cloud1(&[0.0, 1.0, 2.0, 3.0]);
        let cr = cross_recurrence_matrix(&a, &a, 0.5, Metric::Euclidean).unwrap();
        for i in 0..4 {
            assert!(cr.entries.get(i, i));
        }
        let z = cross_recurrence_matrix(&a, &cloud1(&[0.5, 1.5, 2.5, 3.5]), 0.0, Metric::Euclidean).unwrap();
        assert_eq!(z.entries.count_ones(), 0);

        // hand-computed 4x4: |a_p - b_q|
        let b = cloud1(&[0.2, 2.6, -1.0, 5.0]);
        let cr = cross_recurrence_matrix(&a, &b, 1.0, Metric::Euclidean).unwrap();
        let expected = [
            [true, false, true, false],
            [true, false, false, false],
            [false, true, false, false],
            [false, true, false, false],
        ];
        for p in 0..4 {
            for q in 0..4 {
                assert_eq!(cr.entries.get(p, q), expected[p][q], "({p},{q})");
            }
        }
        assert_eq!(cr.density, 5.0 / 16.0);
        let mismatched = PointCloud::new(2, vec![0.0; 4]).unwrap();
        assert!(cross_recurrence_matrix(&a, &mismatched, 1.0, Metric::Euclidean).is_err());
    }

    #[test]
    fn recurrence_matrix_cases() {
        let single = recurrence_matrix(&cloud1(&[3.0]), 1.0, Metric::Euclidean);
        assert_eq!((single.rows(), single.count_ones()), (1, 0));

        let line = recurrence_matrix(&cloud1(&[0.0, 1.0, 2.0, 3.0, 4.0]), 1.0, Metric::Euclidean);
        for p in 0..5 {
            for q in 0..5 {
                assert_eq!(line.get(p, q), p.abs_diff(q) == 1);
            }
        }
        let full = recurrence_matrix(&cloud1(&[0.0, 1.0, 2.0, 3.0]), 10.0, Metric::Euclidean);
        assert_eq!(full.count_ones(), 12);
    }

    #[test]
    fn transitivity_trivial_cases() {
        let cr = BinaryMatrix::from_fn(3, 4, |v, p| (v + p) % 2 == 0);
        let complete = BinaryMatrix::from_fn(4, 4, |p, q| p != q);
        assert_eq!(cross_transitivity(&cr, &complete).unwrap().value, 1.0);
        let empty = BinaryMatrix::zeros(4, 4);
        let t = cross_transitivity(&cr, &empty).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(!t.is_degenerate());
        let t = cross_transitivity(&BinaryMatrix::zeros(3, 4), &complete).unwrap();
        assert!(t.is_degenerate());
        assert!(cross_transitivity(&cr, &BinaryMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn clustering_trivial_cases() {
        let cr = BinaryMatrix::from_fn(2, 4, |v, p| if v == 0 { p == 1 } else { p < 3 });
        let complete = BinaryMatrix::from_fn(4, 4, |p, q| p != q);
        let c = cross_clustering(&cr, &complete).unwrap();
        assert_eq!(c.per_node, vec![0.0, 1.0]);
        assert_eq!(c.mean, 0.5);
    }

    #[test]
    fn clustering_hand_instance() {
        // row 0 neighbours {0,1,2}; R has edges 0-1 only → 2 ordered closed of 6
        // row 1 neighbours {1,3};   R has edge 1-3 → 2 of 2
        let cr = BinaryMatrix::from_fn(2, 4, |v, p| match v {
            0 => p < 3,
            _ => p == 1 || p == 3,
        });
        let rec = BinaryMatrix::from_fn(4, 4, |p, q| {
            matches!((p.min(q), p.max(q)), (0, 1) | (1, 3))
        });
        let c = cross_clustering(&cr, &rec).unwrap();
        assert_eq!(c.per_node, vec![2.0 / 6.0, 1.0]);
        let t = cross_transitivity(&cr, &rec).unwrap();
        assert_eq!((t.triangles, t.triples), (4, 8));
    }

    #[test]
    fn transpose_and_csv() {
        let m = BinaryMatrix::from_fn(2, 70, |r, c| c == 65 + r);
        let t = m.transpose();
        assert!(t.get(65, 0) && t.get(66, 1));
        assert_eq!(t.count_ones(), 2);
        let small = BinaryMatrix::from_fn(2, 2, |r, c| r == c);
        assert_eq!(small.to_csv(), "1,0\n0,1\n");
        assert_eq!(m.row_ones(1).collect::<Vec<_>>(), vec![66]);
    }
}
