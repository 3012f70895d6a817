//! Greedy supremum-driven partitions and the code assignment that turns
//! them into a lower-bound certificate.
//!
//! The greedy builder repeatedly selects, inside each parent cell, the
//! center whose small selection ball has the largest estimated expected
//! supremum, then carves the larger concentric ball out of the cell. All
//! candidate evaluations within one selection step share one sample stream
//! (common random numbers), so the argmax is stable and the whole
//! construction is deterministic in the seed.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::gaussian::{batch_len, batch_rng, n_batches, BatchStat, GaussianModel, McEstimate};
use crate::metric::MetricSpace;
use crate::partition::{Cell, PartitionTree};
use crate::vlc::{Construction, VlcSequence};

/// Monte Carlo budget for expected-supremum evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McParams {
    pub n: u64,
    pub seed: u64,
}

/// Result of [`greedy_gaussian_partition`].
#[derive(Debug, Clone)]
pub struct GreedyBuild {
    pub tree: PartitionTree,
    /// Selection steps whose top two candidates were within Monte Carlo
    /// noise of each other; ties break toward the smaller label.
    pub warnings: Vec<String>,
}

/// Builds a partition tree by greedy expected-supremum carving.
///
/// At level `k`, inside each parent: the candidate `t` maximizing the
/// estimated `E[sup]` over `ball(t, r^-(k+1)/2)` (within the uncarved rest)
/// is selected, and `ball(t, r^-k/2)` is carved as the next child. The
/// selected center becomes the cell representative and children record
/// their selection order.
pub fn greedy_gaussian_partition(
    model: &GaussianModel,
    metric: &MetricSpace,
    r: f64,
    max_depth: usize,
    mc: McParams,
) -> Result<GreedyBuild> {
    if !(r >= 2.0) {
        return Err(Error::Parameter(format!("partition ratio r = {r} must be at least 2")));
    }
    if max_depth == 0 {
        return Err(Error::Parameter("max_depth must be at least 1".into()));
    }
    if mc.n == 0 {
        return Err(Error::Parameter("Monte Carlo budget must be positive".into()));
    }
    if metric.len() != model.len() {
        return Err(Error::Shape(format!(
            "metric has {} points, model has {}",
            metric.len(),
            model.len()
        )));
    }
    if metric.diameter() > 1.0 + 1e-9 {
        return Err(Error::Parameter(format!(
            "metric diameter {} exceeds 1; normalize it first",
            metric.diameter()
        )));
    }
    let factor = model.factor()?;
    let lex = metric.lex_order();
    let root = Cell {
        points: (0..metric.len()).collect(),
        rep: lex[0],
        parent: None,
        child_index: 1,
    };
    let mut levels = vec![vec![root]];
    let mut warnings = Vec::new();
    let mut step_counter: u64 = 0;
    for k in 1..=max_depth {
        if levels[k - 1]
            .iter()
            .all(|cell| metric.subset_diameter(&cell.points) == 0.0)
        {
            break;
        }
        let carve_radius = 0.5 * r.powi(-(k as i32));
        let select_radius = 0.5 * r.powi(-(k as i32) - 1);
        let mut level = Vec::new();
        for (parent_idx, parent) in levels[k - 1].iter().enumerate() {
            let mut remaining = parent.points.clone();
            let mut child_index = 1;
            while !remaining.is_empty() {
                let candidates: Vec<usize> =
                    lex.iter().copied().filter(|p| remaining.contains(p)).collect();
                let chosen = if candidates.len() == 1 {
                    candidates[0]
                } else {
                    let step_seed = mix_seed(mc.seed, step_counter);
                    step_counter += 1;
                    let (best, warning) = select_center(
                        metric,
                        &factor,
                        model.len(),
                        &remaining,
                        &candidates,
                        select_radius,
                        mc.n,
                        step_seed,
                    );
                    if let Some(second) = warning {
                        warnings.push(format!(
                            "level {k} parent {parent_idx} child {child_index}: estimates for {:?} and {:?} overlap within Monte Carlo noise; tie broken toward the smaller label",
                            metric.label(best),
                            metric.label(second),
                        ));
                    }
                    best
                };
                let cell_points = metric.ball_within(&remaining, chosen, carve_radius);
                remaining.retain(|p| !cell_points.contains(p));
                level.push(Cell {
                    points: cell_points,
                    rep: chosen,
                    parent: Some(parent_idx),
                    child_index,
                });
                child_index += 1;
            }
        }
        levels.push(level);
    }
    let tree = PartitionTree::from_cells(metric, r, levels)?;
    Ok(GreedyBuild { tree, warnings })
}

/// Evaluates every candidate's selection ball on one shared sample stream
/// and returns the argmax (first in label order on exact ties), plus the
/// runner-up when the two estimates overlap within their half-widths.
#[allow(clippy::too_many_arguments)]
fn select_center(
    metric: &MetricSpace,
    factor: &crate::gaussian::CholeskyFactor,
    n_points: usize,
    remaining: &[usize],
    candidates: &[usize],
    select_radius: f64,
    n_samples: u64,
    seed: u64,
) -> (usize, Option<usize>) {
    let balls: Vec<Vec<usize>> = candidates
        .iter()
        .map(|&c| metric.ball_within(remaining, c, select_radius))
        .collect();
    let mut stats = vec![BatchStat::default(); candidates.len()];
    let mut z = vec![0.0; n_points];
    for batch in 0..n_batches(n_samples) {
        let mut rng = batch_rng(seed, batch);
        for _ in 0..batch_len(n_samples, batch) {
            for v in z.iter_mut() {
                *v = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
            }
            for (ci, ball) in balls.iter().enumerate() {
                let mut best = f64::NEG_INFINITY;
                for &t in ball {
                    let v = factor.apply_row(&z, t);
                    if v > best {
                        best = v;
                    }
                }
                stats[ci].push(best);
            }
        }
    }
    let estimates: Vec<McEstimate> =
        stats.iter().map(|s| McEstimate::from_stats(s, seed)).collect();
    let mut best = 0usize;
    for ci in 1..candidates.len() {
        if estimates[ci].value > estimates[best].value {
            best = ci;
        }
    }
    let mut runner: Option<usize> = None;
    for ci in 0..candidates.len() {
        if ci != best && (runner.is_none() || estimates[ci].value > estimates[runner.unwrap()].value)
        {
            runner = Some(ci);
        }
    }
    let warning = runner.filter(|&ru| {
        estimates[best].value - estimates[best].half_width
            <= estimates[ru].value + estimates[ru].half_width
    });
    (candidates[best], warning.map(|ru| candidates[ru]))
}

fn mix_seed(seed: u64, step: u64) -> u64 {
    // splitmix64 step keyed by the selection counter.
    let mut x = seed ^ (step.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Assigns the selection-order code lengths along a greedy tree:
/// each cell adds `2 log2(child_index + 1)` bits to its parent's ideal
/// length. Per level and parent the Kraft contribution is at most
/// `sum 1/(i+1)^2 < 1`, so every level satisfies the Kraft inequality.
pub fn assign_lower_codes(space: &MetricSpace, tree: &PartitionTree) -> Result<VlcSequence> {
    for k in 1..=tree.depth() {
        for (c, cell) in tree.level(k).iter().enumerate() {
            if cell.child_index == 0 {
                return Err(Error::Shape(format!(
                    "cell {c} at level {k} has no selection order"
                )));
            }
        }
    }
    let depth = tree.depth().max(1);
    let mut ideal_by_level: Vec<Vec<f64>> = vec![vec![0.0]];
    let mut int_lengths = Vec::with_capacity(depth);
    let mut ideal_lengths = Vec::with_capacity(depth);
    for k in 1..=depth {
        let ideal: Vec<f64> = if k > tree.depth() {
            // Root-only tree: a single forced child.
            vec![2.0]
        } else {
            tree.level(k)
                .iter()
                .map(|cell| {
                    ideal_by_level[k - 1][cell.parent.unwrap_or(0)]
                        + 2.0 * (cell.child_index as f64 + 1.0).log2()
                })
                .collect()
        };
        int_lengths.push(ideal.iter().map(|&l| (l.ceil().max(1.0)) as u32).collect());
        ideal_lengths.push(ideal.clone());
        ideal_by_level.push(ideal);
    }
    VlcSequence::from_lengths(space, tree.clone(), int_lengths, ideal_lengths, Construction::LowerCodes)
}

/// One point's length-increment series and its ratio to the estimated
/// supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct LenDiffRow {
    pub point: usize,
    pub label: String,
    pub s_value: f64,
    pub ratio: f64,
}

/// Outcome of [`verify_len_diff`].
#[derive(Debug, Clone, PartialEq)]
pub struct LenDiffReport {
    pub g_hat: McEstimate,
    /// Diameter of the space the codes were built on; absorbs the additive
    /// constant in the denominator.
    pub c0: f64,
    pub rows: Vec<LenDiffRow>,
    pub sup_ratio: f64,
    pub sup_label: String,
}

/// Computes `S(t) = sum_k r^-k sqrt(len_k(t) - len_(k-1)(t))` for every
/// point and reports `S(t) / (G_hat(T) + diam)`.
///
/// Uses the ideal-length channel: the selection-order assignment defines
/// real-valued lengths, and the per-level ceilings of the integer channel
/// would add up to one spurious bit per level to every increment.
pub fn verify_len_diff(model: &GaussianModel, vlc: &VlcSequence, mc: McParams) -> Result<LenDiffReport> {
    if vlc.n_points() != model.len() {
        return Err(Error::Shape(format!(
            "codes cover {} points, model has {}",
            vlc.n_points(),
            model.len()
        )));
    }
    let all: Vec<usize> = (0..model.len()).collect();
    let g_hat = crate::gaussian::estimate_sup(model, &all, mc.n, mc.seed, None)?;
    let c0 = vlc.diam();
    let denom = g_hat.value + c0;
    if denom <= 1e-9 {
        return Err(Error::Parameter(
            "degenerate instance: estimated supremum and diameter are both zero".into(),
        ));
    }
    let r = vlc.ratio();
    let mut rows = Vec::with_capacity(model.len());
    let mut sup_ratio = f64::NEG_INFINITY;
    let mut sup_label = String::new();
    for t in 0..model.len() {
        let mut s = 0.0;
        for k in 1..=vlc.stored_depth() {
            let delta = (vlc.ideal_at(k, t) - vlc.ideal_at(k - 1, t)).max(0.0);
            s += r.powi(-(k as i32)) * delta.sqrt();
        }
        let ratio = s / denom;
        if ratio > sup_ratio {
            sup_ratio = ratio;
            sup_label = model.labels()[t].clone();
        }
        rows.push(LenDiffRow { point: t, label: model.labels()[t].clone(), s_value: s, ratio });
    }
    Ok(LenDiffReport { g_hat, c0, rows, sup_ratio, sup_label })
}

/// Outcome of [`sudakov_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct SudakovReport {
    pub m: usize,
    /// Minimal pairwise canonical distance among the selected points.
    pub separation: f64,
    /// Largest canonical distance from a selected point to its group.
    pub b_radius: f64,
    pub g_union: McEstimate,
    pub group_estimates: Vec<McEstimate>,
    pub min_group: usize,
    /// `separation * sqrt(log2 m)`.
    pub sqrt_term: f64,
    /// `(G(H) - min_l G(H_l)) / sqrt_term`.
    pub c_hat: f64,
}

/// Separation diagnostic: estimates the expected supremum over a union of
/// groups around well-separated points and reports the fitted constant
/// relating the gain over the worst group to `a sqrt(log2 m)`.
pub fn sudakov_check(
    model: &GaussianModel,
    points: &[usize],
    groups: Option<&[Vec<usize>]>,
    mc: McParams,
) -> Result<SudakovReport> {
    let m = points.len();
    if m < 2 {
        return Err(Error::Parameter("need at least two separated points".into()));
    }
    for &t in points {
        if t >= model.len() {
            return Err(Error::Parameter(format!("point index {t} out of range")));
        }
    }
    let metric = model.canonical_metric(1.0)?;
    let mut separation = f64::INFINITY;
    for (i, &s) in points.iter().enumerate() {
        for &t in points.iter().skip(i + 1) {
            separation = separation.min(metric.dist(s, t));
        }
    }
    if !(separation > 0.0) {
        return Err(Error::Parameter(
            "selected points are not separated under the canonical metric".into(),
        ));
    }
    let groups: Vec<Vec<usize>> = match groups {
        Some(gs) => {
            if gs.len() != m {
                return Err(Error::Shape(format!("{} groups for {m} points", gs.len())));
            }
            points
                .iter()
                .zip(gs)
                .map(|(&t, g)| {
                    let mut set = vec![t];
                    for &h in g {
                        if h >= model.len() {
                            return Err(Error::Parameter(format!("point index {h} out of range")));
                        }
                        if !set.contains(&h) {
                            set.push(h);
                        }
                    }
                    Ok(set)
                })
                .collect::<Result<_>>()?
        }
        None => points.iter().map(|&t| vec![t]).collect(),
    };
    let mut b_radius = 0.0f64;
    for (gi, group) in groups.iter().enumerate() {
        for &h in group {
            b_radius = b_radius.max(metric.dist(points[gi], h));
        }
    }
    let mut union: Vec<usize> = Vec::new();
    for group in &groups {
        for &h in group {
            if !union.contains(&h) {
                union.push(h);
            }
        }
    }
    // Shared seed across all estimates: common random numbers keep the
    // gain G(H) - min G(H_l) stable.
    let g_union = crate::gaussian::estimate_sup(model, &union, mc.n, mc.seed, None)?;
    let group_estimates: Vec<McEstimate> = groups
        .iter()
        .map(|g| crate::gaussian::estimate_sup(model, g, mc.n, mc.seed, None))
        .collect::<Result<_>>()?;
    let min_group = group_estimates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .map(|(i, _)| i)
        .unwrap();
    let sqrt_term = separation * (m as f64).log2().sqrt();
    let c_hat = (g_union.value - group_estimates[min_group].value) / sqrt_term;
    Ok(SudakovReport {
        m,
        separation,
        b_radius,
        g_union,
        group_estimates,
        min_group,
        sqrt_term,
        c_hat,
    })
}
