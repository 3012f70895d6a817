//! Finite metric spaces and probability measures on them.
//!
//! A [`MetricSpace`] is a list of labelled points together with a dense
//! distance matrix. Construction only enforces structural well-formedness
//! (square matrix, unique labels); the metric axioms themselves are checked
//! by [`MetricSpace::validate`], which reports every violation instead of
//! failing on the first, so that `space validate` style tooling can list
//! all problems of an input at once.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Absolute tolerance for triangle-inequality and symmetry checks.
///
/// Metrics derived from covariance matrices carry floating-point noise of
/// roughly this size.
pub const METRIC_TOL: f64 = 1e-9;

/// Tolerance for probability masses summing to one.
pub const MASS_TOL: f64 = 1e-12;

/// Above this point count the covering number is computed greedily and
/// flagged as an upper bound instead of exactly.
pub const EXACT_COVER_LIMIT: usize = 20;

/// A finite metric space: labelled points plus a dense distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    labels: Vec<String>,
    dist: Vec<f64>,
    n: usize,
}

/// One violated metric axiom, reported by [`MetricSpace::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum MetricViolation {
    NotFinite { i: usize, j: usize },
    Negative { i: usize, j: usize, value: f64 },
    NonzeroDiagonal { i: usize, value: f64 },
    Asymmetric { i: usize, j: usize, delta: f64 },
    Triangle { i: usize, j: usize, k: usize, excess: f64 },
}

impl fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricViolation::NotFinite { i, j } => {
                write!(f, "d({i},{j}) is not finite")
            }
            MetricViolation::Negative { i, j, value } => {
                write!(f, "d({i},{j}) = {value} is negative")
            }
            MetricViolation::NonzeroDiagonal { i, value } => {
                write!(f, "d({i},{i}) = {value} is nonzero")
            }
            MetricViolation::Asymmetric { i, j, delta } => {
                write!(f, "d({i},{j}) and d({j},{i}) differ by {delta}")
            }
            MetricViolation::Triangle { i, j, k, excess } => {
                write!(f, "triangle violated: d({i},{j}) > d({i},{k}) + d({k},{j}) by {excess}")
            }
        }
    }
}

/// Result of a covering-number computation.
///
/// `exact` is true when the value came from branch-and-bound; false when the
/// point count exceeded [`EXACT_COVER_LIMIT`] and only the greedy upper
/// bound is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoveringNumber {
    pub value: usize,
    pub exact: bool,
}

impl MetricSpace {
    /// Builds a space from labels and a full distance matrix.
    ///
    /// Only structural properties are enforced here: at least one point, a
    /// square matrix matching the label count, unique labels. Metric axioms
    /// are checked by [`validate`](Self::validate).
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Shape("a metric space needs at least one point".into()));
        }
        if rows.len() != n {
            return Err(Error::Shape(format!(
                "distance matrix has {} rows for {} labels",
                rows.len(),
                n
            )));
        }
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            dist.extend_from_slice(row);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if labels[i] == labels[j] {
                    return Err(Error::Shape(format!("duplicate label {:?}", labels[i])));
                }
            }
        }
        Ok(MetricSpace { labels, dist, n })
    }

    /// Builds a Euclidean space from coordinate vectors.
    pub fn from_points(labels: Vec<String>, points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        if n != labels.len() {
            return Err(Error::Shape(format!(
                "{} coordinate rows for {} labels",
                n,
                labels.len()
            )));
        }
        if n == 0 {
            return Err(Error::Shape("a metric space needs at least one point".into()));
        }
        let dim = points[0].len();
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            if points[i].len() != dim {
                return Err(Error::Shape(format!(
                    "point {i} has dimension {}, expected {dim}",
                    points[i].len()
                )));
            }
            for j in (i + 1)..n {
                let d = euclidean(&points[i], &points[j]);
                rows[i][j] = d;
                rows[j][i] = d;
            }
        }
        Self::new(labels, rows)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// Resolves a label to its point index.
    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    /// Point indices ordered by label, used wherever a deterministic
    /// "lexicographically smallest" choice is needed.
    pub fn lex_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| self.labels[a].cmp(&self.labels[b]));
        order
    }

    /// Checks all metric axioms and returns every violation found.
    pub fn validate(&self) -> Vec<MetricViolation> {
        let mut out = Vec::new();
        for i in 0..self.n {
            let dii = self.dist(i, i);
            if !dii.is_finite() {
                out.push(MetricViolation::NotFinite { i, j: i });
            } else if dii.abs() > METRIC_TOL {
                out.push(MetricViolation::NonzeroDiagonal { i, value: dii });
            }
            for j in (i + 1)..self.n {
                let dij = self.dist(i, j);
                let dji = self.dist(j, i);
                if !dij.is_finite() || !dji.is_finite() {
                    out.push(MetricViolation::NotFinite { i, j });
                    continue;
                }
                if dij < -METRIC_TOL {
                    out.push(MetricViolation::Negative { i, j, value: dij });
                }
                let delta = (dij - dji).abs();
                if delta > METRIC_TOL {
                    out.push(MetricViolation::Asymmetric { i, j, delta });
                }
            }
        }
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                let dij = self.dist(i, j);
                if !dij.is_finite() {
                    continue;
                }
                for k in 0..self.n {
                    if k == i || k == j {
                        continue;
                    }
                    let through = self.dist(i, k) + self.dist(k, j);
                    if through.is_finite() && dij > through + METRIC_TOL {
                        out.push(MetricViolation::Triangle { i, j, k, excess: dij - through });
                    }
                }
            }
        }
        out
    }

    /// Closed ball: every point within `radius` of `center`, center included.
    pub fn ball(&self, center: usize, radius: f64) -> Result<Vec<usize>> {
        if center >= self.n {
            return Err(Error::Parameter(format!(
                "center index {center} out of range for {} points",
                self.n
            )));
        }
        if radius < 0.0 {
            return Err(Error::Parameter("ball radius must be nonnegative".into()));
        }
        Ok((0..self.n).filter(|&s| self.dist(center, s) <= radius).collect())
    }

    /// Closed ball restricted to a subset of points.
    pub fn ball_within(&self, subset: &[usize], center: usize, radius: f64) -> Vec<usize> {
        subset
            .iter()
            .copied()
            .filter(|&s| self.dist(center, s) <= radius)
            .collect()
    }

    /// Largest pairwise distance; zero for a single point.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.dist(i, j) > d {
                    d = self.dist(i, j);
                }
            }
        }
        d
    }

    /// Largest pairwise distance within a subset.
    pub fn subset_diameter(&self, subset: &[usize]) -> f64 {
        let mut d = 0.0;
        for (a, &i) in subset.iter().enumerate() {
            for &j in subset.iter().skip(a + 1) {
                if self.dist(i, j) > d {
                    d = self.dist(i, j);
                }
            }
        }
        d
    }

    /// Rescales all distances so the diameter becomes exactly one.
    ///
    /// Idempotent on already-normalized spaces; fails on zero-diameter
    /// spaces.
    pub fn normalize_diameter(&self) -> Result<MetricSpace> {
        let d = self.diameter();
        if d <= 0.0 {
            return Err(Error::DegenerateSpace);
        }
        let mut out = self.clone();
        for v in &mut out.dist {
            *v /= d;
        }
        Ok(out)
    }

    /// Minimal number of closed `eps`-balls (centered at points of the
    /// space) needed to cover it.
    ///
    /// Exact by branch-and-bound up to [`EXACT_COVER_LIMIT`] points, greedy
    /// upper bound beyond that.
    pub fn covering_number(&self, eps: f64) -> CoveringNumber {
        let all: Vec<usize> = (0..self.n).collect();
        self.covering_number_within(&all, eps)
    }

    /// Covering number of a subset, with balls centered at subset points
    /// and intersected with the subset.
    pub fn covering_number_within(&self, subset: &[usize], eps: f64) -> CoveringNumber {
        let eps = eps.max(0.0);
        let m = subset.len();
        if m == 0 {
            return CoveringNumber { value: 0, exact: true };
        }
        if m <= EXACT_COVER_LIMIT {
            let masks: Vec<u32> = subset
                .iter()
                .map(|&c| {
                    let mut mask = 0u32;
                    for (bit, &s) in subset.iter().enumerate() {
                        if self.dist(c, s) <= eps {
                            mask |= 1 << bit;
                        }
                    }
                    mask
                })
                .collect();
            let full = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
            let greedy = greedy_cover(&masks, full);
            let value = exact_cover(&masks, full, greedy);
            CoveringNumber { value, exact: true }
        } else {
            let value = greedy_cover_large(self, subset, eps);
            CoveringNumber { value, exact: false }
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(not(feature = "std"))]
    use num_traits::Float;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Greedy set cover on bitmasks; returns the number of sets used.
fn greedy_cover(masks: &[u32], full: u32) -> usize {
    let mut uncovered = full;
    let mut used = 0;
    while uncovered != 0 {
        let best = masks
            .iter()
            .enumerate()
            .max_by_key(|(i, &mask)| ((mask & uncovered).count_ones(), usize::MAX - i))
            .map(|(_, &mask)| mask)
            .unwrap();
        debug_assert!(best & uncovered != 0, "every point covers itself");
        uncovered &= !best;
        used += 1;
    }
    used
}

/// Exact minimal cover via depth-first search with pruning, starting from a
/// known upper bound.
fn exact_cover(masks: &[u32], full: u32, upper: usize) -> usize {
    fn dfs(masks: &[u32], uncovered: u32, depth: usize, best: &mut usize, max_ball: u32) {
        if uncovered == 0 {
            if depth < *best {
                *best = depth;
            }
            return;
        }
        let lower = (uncovered.count_ones() as usize).div_ceil(max_ball as usize);
        if depth + lower >= *best {
            return;
        }
        // Branch on the uncovered point with the fewest covering balls.
        let mut pick = 0usize;
        let mut fewest = usize::MAX;
        let mut rest = uncovered;
        while rest != 0 {
            let bit = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let count = masks.iter().filter(|&&mask| mask & (1 << bit) != 0).count();
            if count < fewest {
                fewest = count;
                pick = bit;
            }
        }
        let mut candidates: Vec<usize> = (0..masks.len())
            .filter(|&i| masks[i] & (1 << pick) != 0)
            .collect();
        candidates.sort_by_key(|&i| u32::MAX - (masks[i] & uncovered).count_ones());
        for i in candidates {
            dfs(masks, uncovered & !masks[i], depth + 1, best, max_ball);
        }
    }

    let max_ball = masks.iter().map(|m| m.count_ones()).max().unwrap_or(1).max(1);
    let mut best = upper;
    dfs(masks, full, 0, &mut best, max_ball);
    best
}

/// Greedy cover for large subsets, without bitmasks.
fn greedy_cover_large(space: &MetricSpace, subset: &[usize], eps: f64) -> usize {
    let mut covered = vec![false; subset.len()];
    let mut remaining = subset.len();
    let mut used = 0;
    while remaining > 0 {
        let mut best_center = 0usize;
        let mut best_gain = 0usize;
        for &c in subset {
            let gain = subset
                .iter()
                .enumerate()
                .filter(|(idx, &s)| !covered[*idx] && space.dist(c, s) <= eps)
                .count();
            if gain > best_gain {
                best_gain = gain;
                best_center = c;
            }
        }
        for (idx, &s) in subset.iter().enumerate() {
            if !covered[idx] && space.dist(best_center, s) <= eps {
                covered[idx] = true;
                remaining -= 1;
            }
        }
        used += 1;
    }
    used
}

/// A probability measure as a weight vector aligned with a space's labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMeasure {
    weights: Vec<f64>,
}

impl ProbabilityMeasure {
    /// Wraps a weight vector, requiring nonnegative entries summing to one
    /// within [`MASS_TOL`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Shape("a measure needs at least one weight".into()));
        }
        let mut total = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Parameter(format!("weight {i} = {w} is not a valid mass")));
            }
            total += w;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Parameter(format!(
                "weights sum to {total}, expected 1 within {MASS_TOL:e}"
            )));
        }
        Ok(ProbabilityMeasure { weights })
    }

    /// Rescales a nonnegative vector with positive total mass to sum to one.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Shape("a measure needs at least one weight".into()));
        }
        let mut total = 0.0;
        for (i, &w) in raw.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Parameter(format!("weight {i} = {w} is not a valid mass")));
            }
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::ZeroMass("total mass is zero".into()));
        }
        Ok(ProbabilityMeasure {
            weights: raw.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        ProbabilityMeasure { weights: vec![1.0 / n as f64; n] }
    }

    /// Point mass at index `i`.
    pub fn dirac(n: usize, i: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        ProbabilityMeasure { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass of a set of point indices.
    pub fn mass(&self, points: &[usize]) -> f64 {
        points.iter().map(|&i| self.weights[i]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn three_point_line() -> MetricSpace {
        MetricSpace::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec![0.0, 0.5, 1.0],
                vec![0.5, 0.0, 0.5],
                vec![1.0, 0.5, 0.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn validate_accepts_valid_spaces() {
        let one = MetricSpace::new(vec!["a".into()], vec![vec![0.0]]).unwrap();
        assert!(one.validate().is_empty());
        assert!(three_point_line().validate().is_empty());
    }

    #[test]
    fn validate_reports_triangle_violation() {
        let space = MetricSpace::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec![0.0, 1.0, 3.0],
                vec![1.0, 0.0, 1.0],
                vec![3.0, 1.0, 0.0],
            ],
        )
        .unwrap();
        let violations = space.validate();
        assert!(violations
            .iter()
            .any(|v| matches!(v, MetricViolation::Triangle { .. })));
    }

    #[test]
    fn construction_rejects_bad_shapes() {
        assert!(MetricSpace::new(vec!["a".into()], vec![vec![0.0, 1.0]]).is_err());
        assert!(MetricSpace::new(vec!["a".into(), "a".into()], vec![vec![0.0; 2]; 2]).is_err());
        assert!(MetricSpace::new(vec![], vec![]).is_err());
    }

    #[test]
    fn closed_balls_include_the_boundary() {
        let space = three_point_line();
        assert_eq!(space.ball(0, 0.5).unwrap(), vec![0, 1]);
        assert_eq!(space.ball(0, 0.49).unwrap(), vec![0]);
        assert_eq!(space.ball(1, space.diameter()).unwrap(), vec![0, 1, 2]);
        assert!(space.ball(7, 0.1).is_err());
        assert!(space.ball(0, -0.1).is_err());
    }

    #[test]
    fn diameter_and_normalization() {
        let one = MetricSpace::new(vec!["a".into()], vec![vec![0.0]]).unwrap();
        assert_eq!(one.diameter(), 0.0);
        assert!(one.normalize_diameter().is_err());

        let two = MetricSpace::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 2.0], vec![2.0, 0.0]],
        )
        .unwrap();
        let normed = two.normalize_diameter().unwrap();
        assert_eq!(normed.diameter(), 1.0);
        assert_eq!(normed.normalize_diameter().unwrap(), normed);

        let line = three_point_line();
        let scaled = MetricSpace::new(
            line.labels().to_vec(),
            (0..3)
                .map(|i| (0..3).map(|j| 5.0 * line.dist(i, j)).collect())
                .collect(),
        )
        .unwrap();
        assert_eq!(scaled.normalize_diameter().unwrap(), line);
    }

    #[test]
    fn covering_numbers_on_the_line() {
        let space = three_point_line();
        assert_eq!(space.covering_number(0.5), CoveringNumber { value: 1, exact: true });
        assert_eq!(space.covering_number(0.4), CoveringNumber { value: 3, exact: true });
        assert_eq!(space.covering_number(1.0).value, 1);
        assert_eq!(space.covering_number(0.0).value, 3);
    }

    #[test]
    fn covering_number_counts_distinct_points_at_zero() {
        // Two labels at distance zero collapse into one zero-radius ball.
        let space = MetricSpace::new(
            vec!["a".into(), "a2".into(), "b".into()],
            vec![
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, 1.0],
                vec![1.0, 1.0, 0.0],
            ],
        )
        .unwrap();
        assert_eq!(space.covering_number(0.0).value, 2);
    }

    #[test]
    fn measure_constructors() {
        assert!(ProbabilityMeasure::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbabilityMeasure::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityMeasure::new(vec![-0.1, 1.1]).is_err());
        let normed = ProbabilityMeasure::normalized(vec![2.0, 2.0]).unwrap();
        assert_eq!(normed.weights(), &[0.5, 0.5]);
        assert!(ProbabilityMeasure::normalized(vec![0.0, 0.0]).is_err());
        let dirac = ProbabilityMeasure::dirac(3, 1);
        assert_eq!(dirac.mass(&[1]), 1.0);
        assert_eq!(dirac.mass(&[0, 2]), 0.0);
    }
}
