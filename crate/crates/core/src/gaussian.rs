//! Gaussian models on the index set: seeded sampling, the canonical metric,
//! Monte Carlo supremum estimation, and empirical tail checks.
//!
//! Sampling is batched: batch `b` draws from an independent ChaCha stream
//! keyed by `(seed, b)`, and estimates merge per-batch statistics in batch
//! order. Parallel drivers that evaluate batches out of order therefore
//! reproduce the sequential results bit for bit.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::functionals::{sigma_bar, WeightSequence};
use crate::metric::MetricSpace;
use crate::vlc::VlcSequence;

/// Samples per independent RNG stream.
pub const BATCH_SIZE: u64 = 4096;

/// Two-sided 95% normal quantile, used for mean confidence intervals and
/// Wilson score intervals.
pub const Z_95: f64 = 1.959963984540054;

/// A covariance matrix over labelled points.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    labels: Vec<String>,
    cov: Vec<f64>,
    n: usize,
}

impl GaussianModel {
    /// Wraps a covariance matrix; requires symmetry within `1e-12`.
    /// Positive semidefiniteness is enforced where it matters: the
    /// canonical metric rejects negative squared distances and sampling
    /// rejects matrices that defeat jittered factorization.
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Shape("a model needs at least one point".into()));
        }
        if rows.len() != n {
            return Err(Error::Shape(format!("covariance has {} rows for {n} labels", rows.len())));
        }
        let mut cov = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "covariance row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::Shape("covariance entries must be finite".into()));
                }
            }
            cov.extend_from_slice(row);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (cov[i * n + j] - cov[j * n + i]).abs() > 1e-12 {
                    return Err(Error::Shape(format!(
                        "covariance is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(GaussianModel { labels, cov, n })
    }

    /// Squared-exponential covariance from coordinates:
    /// `K_ij = exp(-|x_i - x_j|^2 / (2 l^2))`.
    pub fn rbf(labels: Vec<String>, points: &[Vec<f64>], lengthscale: f64) -> Result<Self> {
        if !(lengthscale > 0.0) {
            return Err(Error::Parameter(format!("lengthscale {lengthscale} must be positive")));
        }
        let n = points.len();
        if n != labels.len() {
            return Err(Error::Shape(format!("{n} coordinate rows for {} labels", labels.len())));
        }
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let sq: f64 = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                rows[i][j] = (-sq / (2.0 * lengthscale * lengthscale)).exp();
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

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.n + j]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.into()))
    }

    /// Rescales the process amplitude by `c` (covariance by `c^2`).
    pub fn scale_amplitude(&self, c: f64) -> GaussianModel {
        GaussianModel {
            labels: self.labels.clone(),
            cov: self.cov.iter().map(|v| v * c * c).collect(),
            n: self.n,
        }
    }

    /// The metric `d(s,t) = scale * sqrt(K_ss + K_tt - 2 K_st)`.
    ///
    /// Squared distances below `-1e-10` mean the matrix is not positive
    /// semidefinite; smaller negatives are rounding and clamp to zero.
    /// Perfectly correlated distinct points give distance zero (a
    /// pseudometric); see [`degenerate_pairs`].
    pub fn canonical_metric(&self, scale: f64) -> Result<MetricSpace> {
        if !(scale > 0.0) {
            return Err(Error::Parameter(format!("metric scale {scale} must be positive")));
        }
        let n = self.n;
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let sq = self.cov(i, i) + self.cov(j, j) - 2.0 * self.cov(i, j);
                if sq < -1e-10 {
                    return Err(Error::NotPositiveSemiDefinite(format!(
                        "squared distance between points {i} and {j} is {sq}"
                    )));
                }
                let d = scale * sq.max(0.0).sqrt();
                rows[i][j] = d;
                rows[j][i] = d;
            }
        }
        MetricSpace::new(self.labels.clone(), rows)
    }

    /// Lower-triangular factor, escalating diagonal jitter from `1e-12` to
    /// `1e-8` on failure.
    pub fn factor(&self) -> Result<CholeskyFactor> {
        for jitter in [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8] {
            if let Some(lower) = cholesky(&self.cov, self.n, jitter) {
                return Ok(CholeskyFactor { lower, n: self.n, jitter });
            }
        }
        Err(Error::Factorization(
            "covariance resists Cholesky factorization with jitter up to 1e-8".into(),
        ))
    }

    /// Draws `n_samples` vectors from `N(0, K)`, deterministically in
    /// `(seed)` and identically batched to the estimators.
    pub fn sample(&self, n_samples: u64, seed: u64) -> Result<Vec<Vec<f64>>> {
        let factor = self.factor()?;
        let mut out = Vec::with_capacity(n_samples as usize);
        let mut z = vec![0.0; self.n];
        for batch in 0..n_batches(n_samples) {
            let mut rng = batch_rng(seed, batch);
            for _ in 0..batch_len(n_samples, batch) {
                draw(&mut rng, &mut z);
                out.push(factor.apply_full(&z));
            }
        }
        Ok(out)
    }
}

/// Distinct-label pairs at distance zero in a (pseudo)metric.
pub fn degenerate_pairs(metric: &MetricSpace) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..metric.len() {
        for j in (i + 1)..metric.len() {
            if metric.dist(i, j) == 0.0 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Rescales a model so that its sqrt(2)-scaled canonical metric has
/// diameter one, and returns the rescaled model with that metric.
///
/// The sub-Gaussian increment exponent is scale-invariant, so tail checks on
/// the rescaled pair are equivalent to checks on the original process while
/// meeting the unit-diameter precondition of the partition builders.
pub fn normalize_for_chaining(model: &GaussianModel) -> Result<(GaussianModel, MetricSpace)> {
    let metric = model.canonical_metric(core::f64::consts::SQRT_2)?;
    let diam = metric.diameter();
    if diam <= 0.0 {
        return Err(Error::DegenerateSpace);
    }
    let scaled = model.scale_amplitude(1.0 / diam);
    let metric = scaled.canonical_metric(core::f64::consts::SQRT_2)?;
    Ok((scaled, metric))
}

/// Lower-triangular Cholesky factor of a covariance (plus any jitter used).
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lower: Vec<f64>,
    n: usize,
    pub jitter: f64,
}

impl CholeskyFactor {
    /// `L z` over all coordinates.
    pub fn apply_full(&self, z: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for i in 0..self.n {
            let mut v = 0.0;
            for j in 0..=i {
                v += self.lower[i * self.n + j] * z[j];
            }
            x[i] = v;
        }
        x
    }

    /// Row `i` of `L z`.
    pub fn apply_row(&self, z: &[f64], i: usize) -> f64 {
        let mut v = 0.0;
        for j in 0..=i {
            v += self.lower[i * self.n + j] * z[j];
        }
        v
    }
}

/// Positive-semidefinite-tolerant Cholesky. Zero pivots are accepted when
/// the residual column is numerically zero; genuine negatives fail.
fn cholesky(cov: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let scale = 1.0 + (0..n).map(|i| cov[i * n + i].abs()).fold(0.0, f64::max);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = cov[j * n + j] + jitter;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d > 1e-14 * scale {
            let pivot = d.sqrt();
            l[j * n + j] = pivot;
            for i in (j + 1)..n {
                let mut v = cov[i * n + j];
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / pivot;
            }
        } else if d >= -1e-10 * scale {
            // Semi-definite direction: the rest of the column must vanish.
            l[j * n + j] = 0.0;
            for i in (j + 1)..n {
                let mut v = cov[i * n + j];
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                if v.abs() > 1e-7 * scale {
                    return None;
                }
                l[i * n + j] = 0.0;
            }
        } else {
            return None;
        }
    }
    Some(l)
}

/// Independent RNG stream for one batch of one seeded computation.
pub fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

fn draw(rng: &mut ChaCha8Rng, z: &mut [f64]) {
    for v in z.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

pub fn n_batches(n_samples: u64) -> u64 {
    n_samples.div_ceil(BATCH_SIZE)
}

pub fn batch_len(n_samples: u64, batch: u64) -> u64 {
    (n_samples - batch * BATCH_SIZE).min(BATCH_SIZE)
}

/// Running first and second moments of one batch of scalar draws.
#[derive(Debug, Clone, Copy, Default)]
pub struct BatchStat {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl BatchStat {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    /// Folds `other` onto `self`; estimates fold batches in index order.
    pub fn merge(&mut self, other: &BatchStat) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }
}

/// A Monte Carlo mean with a 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub half_width: f64,
    pub samples: u64,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_stats(stat: &BatchStat, seed: u64) -> McEstimate {
        let n = stat.count as f64;
        let mean = stat.sum / n;
        let var = if stat.count > 1 {
            ((stat.sum_sq - stat.sum * stat.sum / n) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        McEstimate {
            value: mean,
            half_width: Z_95 * (var / n).sqrt(),
            samples: stat.count,
            seed,
        }
    }
}

/// Batched estimator of `E[sup_{t in subset} X_t]`, or of
/// `E[sup |X_t - X_c|]` when centered.
pub struct SupSampler {
    factor: CholeskyFactor,
    n_points: usize,
    subset: Vec<usize>,
    centered_at: Option<usize>,
    n_samples: u64,
    seed: u64,
}

impl SupSampler {
    pub fn new(
        model: &GaussianModel,
        subset: &[usize],
        n_samples: u64,
        seed: u64,
        centered_at: Option<usize>,
    ) -> Result<Self> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if n_samples == 0 {
            return Err(Error::Parameter("need at least one sample".into()));
        }
        for &t in subset.iter().chain(centered_at.iter()) {
            if t >= model.len() {
                return Err(Error::Parameter(format!("point index {t} out of range")));
            }
        }
        Ok(SupSampler {
            factor: model.factor()?,
            n_points: model.len(),
            subset: subset.to_vec(),
            centered_at,
            n_samples,
            seed,
        })
    }

    pub fn num_batches(&self) -> u64 {
        n_batches(self.n_samples)
    }

    /// Statistics of one batch; independent of every other batch.
    pub fn batch(&self, batch: u64) -> BatchStat {
        let mut rng = batch_rng(self.seed, batch);
        let mut z = vec![0.0; self.n_points];
        let mut stat = BatchStat::default();
        for _ in 0..batch_len(self.n_samples, batch) {
            draw(&mut rng, &mut z);
            let center = self.centered_at.map(|c| self.factor.apply_row(&z, c));
            let mut best = f64::NEG_INFINITY;
            for &t in &self.subset {
                let mut v = self.factor.apply_row(&z, t);
                if let Some(c) = center {
                    v = (v - c).abs();
                }
                if v > best {
                    best = v;
                }
            }
            stat.push(best);
        }
        stat
    }

    /// Merges per-batch statistics (in batch order) into the estimate.
    pub fn estimate(&self, stats: impl IntoIterator<Item = BatchStat>) -> McEstimate {
        let mut total = BatchStat::default();
        for s in stats {
            total.merge(&s);
        }
        McEstimate::from_stats(&total, self.seed)
    }

    /// Sequential driver over all batches.
    pub fn run(&self) -> McEstimate {
        let stats: Vec<BatchStat> = (0..self.num_batches()).map(|b| self.batch(b)).collect();
        self.estimate(stats)
    }
}

/// Monte Carlo estimate of the expected supremum over a subset.
pub fn estimate_sup(
    model: &GaussianModel,
    subset: &[usize],
    n_samples: u64,
    seed: u64,
    centered_at: Option<usize>,
) -> Result<McEstimate> {
    Ok(SupSampler::new(model, subset, n_samples, seed, centered_at)?.run())
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(count: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = count as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One pair–threshold row of an increment-condition check.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceRow {
    pub s: usize,
    pub t: usize,
    pub u: f64,
    pub count: u64,
    pub samples: u64,
    pub rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Outcome of [`check_increment_condition`].
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementReport {
    pub rows: Vec<ExceedanceRow>,
    /// Zero-distance pairs whose increment has positive variance; skipped.
    pub skipped: Vec<(usize, usize)>,
    pub pass: bool,
}

/// Estimates `P[|X_s - X_t| >= u d(s,t)]` for every pair and threshold,
/// comparing the Wilson lower limit against `2 exp(-exponent u^2)`.
///
/// `exponent = 1` is the sub-Gaussian condition matched by the
/// sqrt(2)-scaled canonical metric; `exponent = 1/2` matches the unscaled
/// canonical metric of a Gaussian process.
pub fn check_increment_condition(
    model: &GaussianModel,
    metric: &MetricSpace,
    u_grid: &[f64],
    n_samples: u64,
    seed: u64,
    exponent: f64,
) -> Result<IncrementReport> {
    if metric.len() != model.len() {
        return Err(Error::Shape(format!(
            "metric has {} points, model has {}",
            metric.len(),
            model.len()
        )));
    }
    if u_grid.is_empty() {
        return Err(Error::Parameter("need at least one threshold u".into()));
    }
    let factor = model.factor()?;
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for s in 0..model.len() {
        for t in (s + 1)..model.len() {
            if metric.dist(s, t) > 0.0 {
                pairs.push((s, t));
            } else {
                let var = model.cov(s, s) + model.cov(t, t) - 2.0 * model.cov(s, t);
                if var > 1e-10 {
                    skipped.push((s, t));
                }
            }
        }
    }
    let mut counts = vec![0u64; pairs.len() * u_grid.len()];
    let mut z = vec![0.0; model.len()];
    for batch in 0..n_batches(n_samples) {
        let mut rng = batch_rng(seed, batch);
        for _ in 0..batch_len(n_samples, batch) {
            draw(&mut rng, &mut z);
            let x = factor.apply_full(&z);
            for (pi, &(s, t)) in pairs.iter().enumerate() {
                let dx = (x[s] - x[t]).abs();
                let d = metric.dist(s, t);
                for (ui, &u) in u_grid.iter().enumerate() {
                    if dx >= u * d {
                        counts[pi * u_grid.len() + ui] += 1;
                    }
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(counts.len());
    let mut pass = true;
    for (pi, &(s, t)) in pairs.iter().enumerate() {
        for (ui, &u) in u_grid.iter().enumerate() {
            let count = counts[pi * u_grid.len() + ui];
            let (lo, hi) = wilson_interval(count, n_samples, Z_95);
            let bound = 2.0 * (-exponent * u * u).exp();
            let row_pass = lo <= bound;
            pass &= row_pass;
            rows.push(ExceedanceRow {
                s,
                t,
                u,
                count,
                samples: n_samples,
                rate: count as f64 / n_samples as f64,
                wilson_low: lo,
                wilson_high: hi,
                bound,
                pass: row_pass,
            });
        }
    }
    Ok(IncrementReport { rows, skipped, pass })
}

/// One threshold row of a whole-process tail check.
#[derive(Debug, Clone, PartialEq)]
pub struct TailRow {
    pub u: f64,
    pub count: u64,
    pub samples: u64,
    pub rate: f64,
    pub wilson_low: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Outcome of [`check_theorem1`].
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    pub t0: usize,
    /// Per-point series values used as thresholds.
    pub sigma: Vec<f64>,
    pub rows: Vec<TailRow>,
    pub pass: bool,
}

/// Estimates `P[exists t: |X_t - X_t0| > sigma_bar(t) (u+1)]` for each `u`
/// and compares the Wilson lower limit against `exp(-u^2)`.
pub fn check_theorem1(
    model: &GaussianModel,
    vlc: &VlcSequence,
    p: &WeightSequence,
    t0: usize,
    u_grid: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<Theorem1Report> {
    if vlc.n_points() != model.len() {
        return Err(Error::Shape(format!(
            "codes cover {} points, model has {}",
            vlc.n_points(),
            model.len()
        )));
    }
    if t0 >= model.len() {
        return Err(Error::Parameter(format!("center index {t0} out of range")));
    }
    if u_grid.is_empty() {
        return Err(Error::Parameter("need at least one threshold u".into()));
    }
    let sigma: Vec<f64> = (0..model.len())
        .map(|t| sigma_bar(vlc, p, t).map(|s| s.value))
        .collect::<Result<_>>()?;
    let factor = model.factor()?;
    let mut counts = vec![0u64; u_grid.len()];
    let mut z = vec![0.0; model.len()];
    for batch in 0..n_batches(n_samples) {
        let mut rng = batch_rng(seed, batch);
        for _ in 0..batch_len(n_samples, batch) {
            draw(&mut rng, &mut z);
            let x = factor.apply_full(&z);
            let x0 = x[t0];
            let mut worst = 0.0f64;
            for (t, &xt) in x.iter().enumerate() {
                if sigma[t] > 0.0 {
                    let ratio = (xt - x0).abs() / sigma[t];
                    if ratio > worst {
                        worst = ratio;
                    }
                }
            }
            for (ui, &u) in u_grid.iter().enumerate() {
                if worst > u + 1.0 {
                    counts[ui] += 1;
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(u_grid.len());
    let mut pass = true;
    for (ui, &u) in u_grid.iter().enumerate() {
        let (lo, _) = wilson_interval(counts[ui], n_samples, Z_95);
        let bound = (-u * u).exp();
        let row_pass = lo <= bound;
        pass &= row_pass;
        rows.push(TailRow {
            u,
            count: counts[ui],
            samples: n_samples,
            rate: counts[ui] as f64 / n_samples as f64,
            wilson_low: lo,
            bound,
            pass: row_pass,
        });
    }
    Ok(Theorem1Report { t0, sigma, rows, pass })
}
