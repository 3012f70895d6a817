//! Chaining functionals: the ball-measure integral, its partition-tree upper
//! bounds, and the code-length series.
//!
//! All information quantities (code lengths, entropies, log mass ratios) are
//! in bits; the square-root integrand of the code-length series uses natural
//! log. The two constants are kept explicit and never conflated.
//!
//! Series over all levels `k > 0` are truncated at the stored depth of the
//! code sequence, where lengths become constant; the remaining tail is either
//! summed in closed form (geometric) or bounded analytically, and the bound
//! is added to the returned value so results are always upper values.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::metric::{MetricSpace, ProbabilityMeasure, MASS_TOL};
use crate::partition::PartitionTree;
use crate::vlc::VlcSequence;

use core::f64::consts::LN_2;

/// Analytic tail bounds are tightened below this size before truncating.
pub const TAIL_TOL: f64 = 1e-9;

/// Positive weights over coding levels `k >= 1`.
///
/// The closed-form variants are defined on all levels and admit analytic
/// tail bounds; `Finite` covers only its listed levels, so functionals that
/// sum over every level reject it as divergent.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSequence {
    /// `p_k = 2^-k`.
    Dyadic,
    /// `p_k = (1 - ratio) * ratio^(k-1)`.
    Geometric { ratio: f64 },
    /// Explicit weights for levels `1..=m`, summing to one.
    Finite(Vec<f64>),
}

impl WeightSequence {
    pub fn dyadic() -> Self {
        WeightSequence::Dyadic
    }

    pub fn geometric(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Parameter(format!(
                "geometric level-weight ratio {ratio} must lie in (0,1)"
            )));
        }
        Ok(WeightSequence::Geometric { ratio })
    }

    pub fn finite(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Parameter("level weights must cover at least level 1".into()));
        }
        let mut total = 0.0;
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!(
                    "level weight p_{} = {v} must be positive",
                    i + 1
                )));
            }
            total += v;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Parameter(format!(
                "level weights sum to {total}, expected 1 within {MASS_TOL:e}"
            )));
        }
        Ok(WeightSequence::Finite(values))
    }

    pub fn name(&self) -> String {
        match self {
            WeightSequence::Dyadic => "dyadic".into(),
            WeightSequence::Geometric { ratio } => format!("geometric({ratio})"),
            WeightSequence::Finite(v) => format!("finite({} levels)", v.len()),
        }
    }

    /// `p_k`, or `None` when the sequence does not define level `k`.
    pub fn weight(&self, k: usize) -> Option<f64> {
        debug_assert!(k >= 1);
        match self {
            WeightSequence::Dyadic => Some(2f64.powi(-(k as i32))),
            WeightSequence::Geometric { ratio } => {
                Some((1.0 - ratio) * ratio.powi(k as i32 - 1))
            }
            WeightSequence::Finite(v) => v.get(k - 1).copied(),
        }
    }

    /// `ln(1/p_k)`.
    pub fn log_inv_weight(&self, k: usize) -> Option<f64> {
        match self {
            WeightSequence::Dyadic => Some(k as f64 * LN_2),
            WeightSequence::Geometric { ratio } => {
                Some(-(1.0 - ratio).ln() + (k as f64 - 1.0) * (1.0 / ratio).ln())
            }
            WeightSequence::Finite(v) => v.get(k - 1).map(|&p| (1.0 / p).ln()),
        }
    }

    /// Coefficients `(a, b)` with `ln(1/p_k) = a + b k`, when the sequence
    /// is defined on all levels.
    pub fn affine_log_inv(&self) -> Option<(f64, f64)> {
        match self {
            WeightSequence::Dyadic => Some((0.0, LN_2)),
            WeightSequence::Geometric { ratio } => {
                let b = (1.0 / ratio).ln();
                Some((-(1.0 - ratio).ln() - b, b))
            }
            WeightSequence::Finite(_) => None,
        }
    }

    /// Total mass of levels `k >= from`.
    pub fn tail_mass(&self, from: usize) -> Option<f64> {
        debug_assert!(from >= 1);
        match self {
            WeightSequence::Dyadic => Some(2f64.powi(-(from as i32 - 1))),
            WeightSequence::Geometric { ratio } => Some(ratio.powi(from as i32 - 1)),
            WeightSequence::Finite(v) => {
                if from - 1 < v.len() {
                    Some(v[from - 1..].iter().sum())
                } else {
                    None
                }
            }
        }
    }
}

/// A truncated series value together with the analytic bound that was added
/// for the untruncated tail. `value` already includes `tail_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailSum {
    pub value: f64,
    pub tail_bound: f64,
}

impl TailSum {
    fn exact(value: f64) -> Self {
        TailSum { value, tail_bound: 0.0 }
    }
}

/// The ball-measure integral `int_0^diam sqrt(log2 1/mu(B(t,eps))) d eps`.
///
/// On a finite space the ball mass is a step function of the radius with
/// breakpoints at the sorted distances from `t`, so the integral is an exact
/// finite sum over those steps.
pub fn ft_functional(space: &MetricSpace, mu: &ProbabilityMeasure, t: usize) -> Result<f64> {
    check_measure(space, mu)?;
    if t >= space.len() {
        return Err(Error::Parameter(format!("point index {t} out of range")));
    }
    let mut by_dist: Vec<(f64, usize)> = (0..space.len()).map(|s| (space.dist(t, s), s)).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Group equal distances into breakpoints with cumulative mass.
    let mut breaks: Vec<(f64, f64)> = Vec::new();
    let mut cum = 0.0;
    let mut i = 0;
    while i < by_dist.len() {
        let eps = by_dist[i].0;
        while i < by_dist.len() && by_dist[i].0 == eps {
            cum += mu.weight(by_dist[i].1);
            i += 1;
        }
        breaks.push((eps, cum));
    }
    if !(breaks[0].0 == 0.0 && breaks[0].1 > 0.0) {
        return Err(Error::ZeroMass(format!(
            "measure vanishes on every ball around point {t}; the integrand diverges"
        )));
    }
    let diam = space.diameter();
    let mut integral = 0.0;
    for (j, &(eps, mass)) in breaks.iter().enumerate() {
        if eps >= diam {
            break;
        }
        let next = breaks.get(j + 1).map(|&(e, _)| e.min(diam)).unwrap_or(diam);
        integral += (next - eps) * sqrt_log2_inv(mass);
    }
    Ok(integral)
}

/// Average of the ball-measure integral under a second measure:
/// `sum_t nu({t}) ft_functional(mu, t)`.
pub fn m_functional(
    space: &MetricSpace,
    mu: &ProbabilityMeasure,
    nu: &ProbabilityMeasure,
) -> Result<f64> {
    check_measure(space, nu)?;
    let mut total = 0.0;
    for t in 0..space.len() {
        let w = nu.weight(t);
        if w > 0.0 {
            total += w * ft_functional(space, mu, t)?;
        }
    }
    Ok(total)
}

/// The full code-length series
/// `sum_{k>0} rho_{k-1} sqrt(ln(2^(len_k(t)+1) / p_k))`,
/// with `rho_0` the space diameter and `rho_k = r^-k`.
///
/// Lengths are constant beyond the stored depth; the remaining tail is
/// summed until its analytic bound drops below [`TAIL_TOL`] and the bound is
/// added to the value. Level weights without full support make the series
/// divergent.
pub fn sigma_bar(vlc: &VlcSequence, p: &WeightSequence, t: usize) -> Result<TailSum> {
    check_point(vlc, t)?;
    let depth = vlc.stored_depth();
    let mut stored = Vec::with_capacity(depth);
    for k in 1..=depth {
        let lw = divergent_if_none(p.log_inv_weight(k), k)?;
        stored.push(LN_2 * (vlc.len_at(k, t) as f64 + 1.0) + lw);
    }
    let (a, b) = match p.affine_log_inv() {
        Some(ab) => ab,
        None => {
            return Err(Error::DivergentSeries(
                "finite level weights leave no mass on deep levels; the series diverges".into(),
            ))
        }
    };
    let c = LN_2 * (vlc.len_at(depth, t) as f64 + 1.0) + a;
    series_with_tail(vlc, &stored, c, b)
}

/// The length-only component `sum_{k>0} rho_{k-1} sqrt(len_k(t))`
/// (integer-length channel). Exact: the tail is a geometric series.
pub fn sigma_code(vlc: &VlcSequence, t: usize) -> Result<TailSum> {
    check_point(vlc, t)?;
    sigma_code_channel(vlc, |k| vlc.len_at(k, t) as f64)
}

/// Same series on the ideal (real-valued) length channel.
pub fn sigma_code_ideal(vlc: &VlcSequence, t: usize) -> Result<TailSum> {
    check_point(vlc, t)?;
    sigma_code_channel(vlc, |k| vlc.ideal_at(k, t).max(0.0))
}

fn sigma_code_channel(vlc: &VlcSequence, len: impl Fn(usize) -> f64) -> Result<TailSum> {
    let depth = vlc.stored_depth();
    let r = vlc.ratio();
    let q = 1.0 / r;
    let mut value = 0.0;
    for k in 1..=depth {
        value += vlc.resolution(k - 1) * len(k).sqrt();
    }
    // Constant lengths beyond the stored depth: geometric closed form.
    value += len(depth).sqrt() * q.powi(depth as i32) / (1.0 - q);
    Ok(TailSum::exact(value))
}

/// The weight-only component `sum_{k>0} rho_{k-1} sqrt(ln(2/p_k))`.
/// Independent of the point.
pub fn sigma_prime(vlc: &VlcSequence, p: &WeightSequence) -> Result<TailSum> {
    let depth = vlc.stored_depth();
    let mut stored = Vec::with_capacity(depth);
    for k in 1..=depth {
        let lw = divergent_if_none(p.log_inv_weight(k), k)?;
        stored.push(LN_2 + lw);
    }
    let (a, b) = match p.affine_log_inv() {
        Some(ab) => ab,
        None => {
            return Err(Error::DivergentSeries(
                "finite level weights leave no mass on deep levels; the series diverges".into(),
            ))
        }
    };
    series_with_tail(vlc, &stored, LN_2 + a, b)
}

/// `sum_{k>0} r^(-k+1) sqrt(len_k(t) - len_(k-1)(t))` on the integer
/// channel. Zero beyond the stored depth, so the sum is finite.
pub fn refinement_sum(vlc: &VlcSequence, t: usize) -> Result<f64> {
    check_point(vlc, t)?;
    let r = vlc.ratio();
    let mut total = 0.0;
    for k in 1..=vlc.stored_depth() {
        let cur = vlc.len_at(k, t);
        let prev = vlc.len_at(k - 1, t);
        if cur < prev {
            return Err(Error::Parameter(format!(
                "lengths decrease at level {k}; the sequence is not admissible"
            )));
        }
        total += r.powi(-(k as i32) + 1) * ((cur - prev) as f64).sqrt();
    }
    Ok(total)
}

/// Ideal-channel refinement sum; tiny negative increments from rounding are
/// clamped to zero.
pub fn refinement_sum_ideal(vlc: &VlcSequence, t: usize) -> Result<f64> {
    check_point(vlc, t)?;
    let r = vlc.ratio();
    let mut total = 0.0;
    for k in 1..=vlc.stored_depth() {
        let delta = vlc.ideal_at(k, t) - vlc.ideal_at(k - 1, t);
        if delta < -1e-9 {
            return Err(Error::Parameter(format!(
                "ideal lengths decrease at level {k}; the sequence is not admissible"
            )));
        }
        total += r.powi(-(k as i32) + 1) * delta.max(0.0).sqrt();
    }
    Ok(total)
}

/// Refinement upper bound `2 sum_{k>0} r^(-k+1) sqrt(len_k - len_(k-1))`;
/// dominates [`sigma_code`] for ratios `r >= 2`.
pub fn refinement_bound(vlc: &VlcSequence, t: usize) -> Result<f64> {
    Ok(2.0 * refinement_sum(vlc, t)?)
}

/// Partition bound on the ball-measure integral:
/// `sum_{k>0} r^(-k+1) sqrt(log2(mu(A_(k-1)(t)) / mu(A_k(t))))`.
pub fn bednorz_partition_bound(
    space: &MetricSpace,
    tree: &PartitionTree,
    mu: &ProbabilityMeasure,
    t: usize,
) -> Result<f64> {
    check_measure(space, mu)?;
    if t >= space.len() {
        return Err(Error::Parameter(format!("point index {t} out of range")));
    }
    let r = tree.ratio();
    let mut prev_mass = mu.mass(&tree.cell_of(0, t)?.points);
    let mut total = 0.0;
    for k in 1..=tree.depth() {
        let mass = mu.mass(&tree.cell_of(k, t)?.points);
        if !(mass > 0.0) {
            return Err(Error::ZeroMass(format!(
                "cell of point {t} at level {k} has zero mass"
            )));
        }
        let ratio_log = (prev_mass / mass).log2().max(0.0);
        total += r.powi(-(k as i32) + 1) * ratio_log.sqrt();
        prev_mass = mass;
    }
    Ok(total)
}

/// Entropy form of the partition bound:
/// `sum_{k>0} r^(-k+1) sum_B mu(B) sqrt(H(children of B | B))` with
/// conditional entropies in bits.
pub fn entropy_chain_bound(
    space: &MetricSpace,
    tree: &PartitionTree,
    mu: &ProbabilityMeasure,
) -> Result<f64> {
    check_measure(space, mu)?;
    let r = tree.ratio();
    let mut total = 0.0;
    for k in 1..=tree.depth() {
        let coeff = r.powi(-(k as i32) + 1);
        for parent_idx in 0..tree.level(k - 1).len() {
            let h = conditional_entropy(space, tree, k, parent_idx, mu)?;
            let parent_mass = mu.mass(&tree.level(k - 1)[parent_idx].points);
            total += coeff * parent_mass * h.sqrt();
        }
    }
    Ok(total)
}

/// Entropy (bits) of the split of parent cell `parent` (at level `k-1`)
/// into its level-`k` children, under `mu` conditioned on the parent.
pub fn conditional_entropy(
    space: &MetricSpace,
    tree: &PartitionTree,
    k: usize,
    parent: usize,
    mu: &ProbabilityMeasure,
) -> Result<f64> {
    let (parent_mass, children) = split_masses(space, tree, k, parent, mu)?;
    let mut h = 0.0;
    for &mass in &children {
        let x = mass / parent_mass;
        if x > 0.0 && x < 1.0 {
            h -= x * x.log2();
        }
    }
    Ok(h.max(0.0))
}

/// Cross-entropy (bits) between the conditional child distributions of `mu`
/// and `nu` on the given parent cell. At least the entropy, with equality
/// when the conditionals agree.
pub fn cross_entropy(
    space: &MetricSpace,
    tree: &PartitionTree,
    k: usize,
    parent: usize,
    mu: &ProbabilityMeasure,
    nu: &ProbabilityMeasure,
) -> Result<f64> {
    let (mu_parent, mu_children) = split_masses(space, tree, k, parent, mu)?;
    let (nu_parent, nu_children) = split_masses(space, tree, k, parent, nu)?;
    let mut h = 0.0;
    for (&ma, &na) in mu_children.iter().zip(&nu_children) {
        let x = ma / mu_parent;
        if x <= 0.0 {
            continue;
        }
        let y = na / nu_parent;
        if !(y > 0.0) {
            return Err(Error::ZeroMass(format!(
                "nu vanishes on a child of parent {parent} where mu does not; cross-entropy is infinite"
            )));
        }
        h -= x * y.min(1.0).log2();
    }
    Ok(h.max(0.0))
}

fn split_masses(
    space: &MetricSpace,
    tree: &PartitionTree,
    k: usize,
    parent: usize,
    mu: &ProbabilityMeasure,
) -> Result<(f64, Vec<f64>)> {
    check_measure(space, mu)?;
    if k == 0 || k > tree.depth() {
        return Err(Error::Parameter(format!(
            "level {k} is not a refining level of this tree"
        )));
    }
    if parent >= tree.level(k - 1).len() {
        return Err(Error::Parameter(format!("no cell {parent} at level {}", k - 1)));
    }
    let parent_mass = mu.mass(&tree.level(k - 1)[parent].points);
    if !(parent_mass > 0.0) {
        return Err(Error::ZeroMass(format!(
            "parent cell {parent} at level {} has zero mass; conditionals are undefined",
            k - 1
        )));
    }
    let children: Vec<f64> = tree
        .level(k)
        .iter()
        .filter(|c| c.parent == Some(parent))
        .map(|c| mu.mass(&c.points))
        .collect();
    Ok((parent_mass, children))
}

/// Sums `sum_k rho_(k-1) sqrt(stored[k-1])` over stored levels, then extends
/// with terms `r^(-k+1) sqrt(c + b k)` and stops once the closed-form bound
/// on the remainder is below [`TAIL_TOL`]; the bound is added to the value.
fn series_with_tail(vlc: &VlcSequence, stored: &[f64], c: f64, b: f64) -> Result<TailSum> {
    let r = vlc.ratio();
    let q = 1.0 / r;
    let mut value = 0.0;
    for (i, &inside) in stored.iter().enumerate() {
        value += vlc.resolution(i) * inside.max(0.0).sqrt();
    }
    let depth = stored.len();
    let mut m = depth;
    let tail_bound = loop {
        // Remainder bound for terms k > m: sqrt(c + b k) <= A + sqrt(b) (k - m - 1)
        // with A = sqrt(c + b (m+1)), summed against the geometric weights.
        let a_head = (c + b * (m as f64 + 1.0)).max(0.0).sqrt();
        let bound = a_head * q.powi(m as i32) / (1.0 - q)
            + b.max(0.0).sqrt() * q.powi(m as i32 + 1) / ((1.0 - q) * (1.0 - q));
        if bound <= TAIL_TOL || m >= depth + 65_536 {
            break bound;
        }
        m += 1;
        let inside = c + b * m as f64;
        if !(inside >= 0.0) {
            return Err(Error::DivergentSeries(format!(
                "series integrand becomes negative at level {m}"
            )));
        }
        value += q.powi(m as i32 - 1) * inside.sqrt();
    };
    Ok(TailSum { value: value + tail_bound, tail_bound })
}

fn sqrt_log2_inv(mass: f64) -> f64 {
    if mass >= 1.0 {
        0.0
    } else {
        (-(mass.log2())).max(0.0).sqrt()
    }
}

fn divergent_if_none(v: Option<f64>, k: usize) -> Result<f64> {
    v.ok_or_else(|| {
        Error::DivergentSeries(format!(
            "level weights are not defined at level {k}; the series diverges"
        ))
    })
}

fn check_measure(space: &MetricSpace, mu: &ProbabilityMeasure) -> Result<()> {
    if mu.len() != space.len() {
        return Err(Error::Shape(format!(
            "measure has {} weights for {} points",
            mu.len(),
            space.len()
        )));
    }
    Ok(())
}

fn check_point(vlc: &VlcSequence, t: usize) -> Result<()> {
    if t >= vlc.n_points() {
        return Err(Error::Parameter(format!("point index {t} out of range")));
    }
    Ok(())
}

/// One row of a [`BoundReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct PointBound {
    pub label: String,
    pub value: f64,
    pub tail_bound: f64,
}

/// Named per-point functional values with their supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub functional: String,
    pub construction: Option<String>,
    pub ratio: Option<f64>,
    pub depth: Option<usize>,
    pub per_point: Vec<PointBound>,
    pub sup_value: f64,
    pub sup_label: String,
}

impl BoundReport {
    /// Evaluates a per-point functional over the whole space.
    pub fn from_fn(
        functional: &str,
        space: &MetricSpace,
        ratio: Option<f64>,
        depth: Option<usize>,
        construction: Option<String>,
        mut eval: impl FnMut(usize) -> Result<TailSum>,
    ) -> Result<Self> {
        let mut per_point = Vec::with_capacity(space.len());
        let mut sup_value = f64::NEG_INFINITY;
        let mut sup_label = String::new();
        for t in 0..space.len() {
            let ts = eval(t)?;
            if ts.value > sup_value {
                sup_value = ts.value;
                sup_label = space.label(t).into();
            }
            per_point.push(PointBound {
                label: space.label(t).into(),
                value: ts.value,
                tail_bound: ts.tail_bound,
            });
        }
        Ok(BoundReport {
            functional: functional.into(),
            construction,
            ratio,
            depth,
            per_point,
            sup_value,
            sup_label,
        })
    }

    /// Wraps a single scalar value (for whole-space functionals).
    pub fn scalar(functional: &str, value: f64) -> Self {
        BoundReport {
            functional: functional.into(),
            construction: None,
            ratio: None,
            depth: None,
            per_point: vec![PointBound { label: "(all)".into(), value, tail_bound: 0.0 }],
            sup_value: value,
            sup_label: "(all)".into(),
        }
    }
}
