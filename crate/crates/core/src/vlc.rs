//! Multiscale variable-length code sequences over a partition tree.
//!
//! Codes are represented by their length functions only; the Kraft–McMillan
//! inequality guarantees that a prefix code exists for any stored lengths,
//! and no operation here needs the actual strings. An optional canonical
//! prefix-code emitter is provided for tooling that wants them.
//!
//! Every sequence carries two channels per level: integer lengths (ceilings,
//! floored at 1 from level 1 on) and real-valued ideal lengths, so that
//! exact inequalities can be checked without rounding slack.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::functionals::WeightSequence;
use crate::metric::{MetricSpace, ProbabilityMeasure, MASS_TOL};
use crate::partition::{Cell, PartitionTree};

/// Kraft sums may exceed one by at most this much (floating-point noise).
pub const KRAFT_TOL: f64 = 1e-12;

/// Which construction produced a sequence; carried into reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    FromMeasures,
    LabeledNet,
    SingleMeasure,
    LowerCodes,
    Custom,
}

impl Construction {
    pub fn name(self) -> &'static str {
        match self {
            Construction::FromMeasures => "from-measures",
            Construction::LabeledNet => "labeled-net",
            Construction::SingleMeasure => "single-measure",
            Construction::LowerCodes => "lower-codes",
            Construction::Custom => "custom",
        }
    }
}

/// Per-level code lengths over the cells of a partition tree.
///
/// Level 0 is always the single whole-space cell with length zero. At least
/// one coding level is stored even for a root-only tree, since a uniquely
/// decodable code on a nonempty alphabet needs length at least one.
/// Beyond the stored depth both the partition and the lengths are constant,
/// so per-point queries accept any level index.
#[derive(Debug, Clone, PartialEq)]
pub struct VlcSequence {
    tree: PartitionTree,
    diam: f64,
    int_lengths: Vec<Vec<u32>>,
    ideal_lengths: Vec<Vec<f64>>,
    construction: Construction,
}

/// A violated admissibility condition, from [`VlcSequence::validate_admissible`].
#[derive(Debug, Clone, PartialEq)]
pub enum AdmissibilityViolation {
    RootNotTrivial,
    KraftExceeded { level: usize, sum: f64 },
    ZeroLength { level: usize, cell: usize },
    LengthDecreased { level: usize, point: usize },
    ProjectionNotIdempotent { level: usize, point: usize },
    NotRefining { level: usize, point: usize },
    ResolutionExceeded { level: usize, cell: usize, diameter: f64, bound: f64 },
    ResolutionNotVanishing { diameter: f64 },
}

impl fmt::Display for AdmissibilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use AdmissibilityViolation::*;
        match self {
            RootNotTrivial => write!(f, "level 0 is not a single zero-length cell"),
            KraftExceeded { level, sum } => {
                write!(f, "level {level}: Kraft sum {sum} exceeds 1")
            }
            ZeroLength { level, cell } => {
                write!(f, "level {level} cell {cell}: length below 1")
            }
            LengthDecreased { level, point } => {
                write!(f, "point {point}: length decreases entering level {level}")
            }
            ProjectionNotIdempotent { level, point } => {
                write!(f, "level {level}: projection of point {point} is not idempotent")
            }
            NotRefining { level, point } => {
                write!(f, "level {level}: cell of point {point} is not inside its level-{} cell", level - 1)
            }
            ResolutionExceeded { level, cell, diameter, bound } => {
                write!(f, "level {level} cell {cell}: diameter {diameter} exceeds resolution {bound}")
            }
            ResolutionNotVanishing { diameter } => {
                write!(f, "final level still has diameter {diameter}; resolutions do not reach 0")
            }
        }
    }
}

/// `sum 2^-len` over a list of integer code lengths.
pub fn kraft_sum(lengths: &[u32]) -> f64 {
    lengths.iter().map(|&l| 2f64.powi(-(l as i32))).sum()
}

/// `sum 2^-len` over real-valued code lengths.
pub fn kraft_sum_ideal(lengths: &[f64]) -> f64 {
    lengths.iter().map(|&l| (-l).exp2()).sum()
}

/// Shannon code lengths `ceil(log2(1/w))`, floored at 1.
///
/// The floor keeps every coding level uniquely decodable; it never breaks
/// the Kraft inequality since it only lengthens codewords.
pub fn shannon_lengths(weights: &[f64]) -> Result<Vec<u32>> {
    weights
        .iter()
        .map(|&w| {
            if !(w > 0.0) {
                return Err(Error::ZeroMass("zero weight has infinite code length".into()));
            }
            let raw = (-w.log2()).ceil();
            Ok((raw.max(1.0)) as u32)
        })
        .collect()
}

/// Family of conditional measures, one per parent cell per refining level.
///
/// `family[k-1][b]` is the conditional for splitting cell `b` of level `k`
/// into its level-`k+1` children; it must be supported on that cell and
/// positive on every child.
#[derive(Debug, Clone)]
pub struct ConditionalFamily {
    per_level: Vec<Vec<ProbabilityMeasure>>,
}

impl ConditionalFamily {
    pub fn new(per_level: Vec<Vec<ProbabilityMeasure>>) -> Self {
        ConditionalFamily { per_level }
    }

    /// Uniform over the children of each parent, spread uniformly over each
    /// child's points.
    pub fn uniform_over_children(space: &MetricSpace, tree: &PartitionTree) -> Self {
        let mut per_level = Vec::new();
        for k in 1..tree.depth() {
            let mut for_level = Vec::new();
            for parent_idx in 0..tree.level(k).len() {
                let children: Vec<&Cell> = tree
                    .level(k + 1)
                    .iter()
                    .filter(|c| c.parent == Some(parent_idx))
                    .collect();
                let m = children.len() as f64;
                let mut weights = vec![0.0; space.len()];
                for child in children {
                    let share = 1.0 / (m * child.points.len() as f64);
                    for &p in &child.points {
                        weights[p] = share;
                    }
                }
                for_level.push(
                    ProbabilityMeasure::normalized(weights).expect("children cover the parent"),
                );
            }
            per_level.push(for_level);
        }
        ConditionalFamily { per_level }
    }

    fn get(&self, k: usize, parent: usize) -> Result<&ProbabilityMeasure> {
        self.per_level
            .get(k - 1)
            .and_then(|lvl| lvl.get(parent))
            .ok_or_else(|| {
                Error::Shape(format!("missing conditional for level {k} parent {parent}"))
            })
    }
}

impl VlcSequence {
    /// Assembles a sequence from explicit per-level lengths.
    ///
    /// `int_lengths`/`ideal_lengths` are indexed by coding level starting at
    /// 1 and by cell within the corresponding stored tree level. Used by the
    /// deserializer and by code-assignment routines.
    pub fn from_lengths(
        space: &MetricSpace,
        tree: PartitionTree,
        int_lengths: Vec<Vec<u32>>,
        ideal_lengths: Vec<Vec<f64>>,
        construction: Construction,
    ) -> Result<Self> {
        let depth = tree.depth().max(1);
        if int_lengths.len() != depth || ideal_lengths.len() != depth {
            return Err(Error::Shape(format!(
                "expected lengths for {depth} coding levels, got {} / {}",
                int_lengths.len(),
                ideal_lengths.len()
            )));
        }
        for k in 1..=depth {
            let cells = tree.level(tree.stored_level(k)).len();
            if int_lengths[k - 1].len() != cells || ideal_lengths[k - 1].len() != cells {
                return Err(Error::Shape(format!(
                    "level {k} has {cells} cells but {} / {} lengths",
                    int_lengths[k - 1].len(),
                    ideal_lengths[k - 1].len()
                )));
            }
        }
        let mut int_full = Vec::with_capacity(depth + 1);
        let mut ideal_full = Vec::with_capacity(depth + 1);
        int_full.push(vec![0u32; tree.level(0).len()]);
        ideal_full.push(vec![0f64; tree.level(0).len()]);
        int_full.extend(int_lengths);
        ideal_full.extend(ideal_lengths);
        Ok(VlcSequence {
            diam: space.diameter(),
            tree,
            int_lengths: int_full,
            ideal_lengths: ideal_full,
            construction,
        })
    }

    /// Builds codes from a first-level measure and a family of conditionals
    /// via the product recursion: the mass of a child cell is its
    /// conditional share times its parent's mass, so masses never increase
    /// along a chain and Shannon lengths never decrease.
    ///
    /// Returns the sequence together with the per-level point measures the
    /// recursion produced.
    pub fn from_measures(
        space: &MetricSpace,
        tree: &PartitionTree,
        mu1: &ProbabilityMeasure,
        conditionals: &ConditionalFamily,
    ) -> Result<(Self, Vec<ProbabilityMeasure>)> {
        check_alignment(space, tree)?;
        if mu1.len() != space.len() {
            return Err(Error::Shape(format!(
                "measure has {} weights for {} points",
                mu1.len(),
                space.len()
            )));
        }
        let depth = tree.depth().max(1);
        let mut measures: Vec<ProbabilityMeasure> = vec![mu1.clone()];
        for k in 1..tree.depth() {
            let prev = measures.last().unwrap();
            let mut next = vec![0.0; space.len()];
            for (parent_idx, parent) in tree.level(k).iter().enumerate() {
                let nu = conditionals.get(k, parent_idx)?;
                if nu.len() != space.len() {
                    return Err(Error::Shape(format!(
                        "conditional for level {k} parent {parent_idx} has {} weights",
                        nu.len()
                    )));
                }
                let outside: f64 = (0..space.len())
                    .filter(|p| !parent.points.contains(p))
                    .map(|p| nu.weight(p))
                    .sum();
                if outside > MASS_TOL {
                    return Err(Error::Shape(format!(
                        "conditional for level {k} parent {parent_idx} puts mass {outside} outside the parent"
                    )));
                }
                let parent_mass = prev.mass(&parent.points);
                for &p in &parent.points {
                    next[p] = nu.weight(p) * parent_mass;
                }
            }
            measures.push(ProbabilityMeasure::new(next).map_err(|e| {
                Error::Shape(format!("conditional recursion left an invalid measure: {e}"))
            })?);
        }
        let mut int_lengths = Vec::new();
        let mut ideal_lengths = Vec::new();
        for k in 1..=depth {
            let mu_k = &measures[(k - 1).min(measures.len() - 1)];
            let cells = tree.level(tree.stored_level(k));
            let masses: Vec<f64> = cells.iter().map(|c| mu_k.mass(&c.points)).collect();
            if let Some(idx) = masses.iter().position(|&m| !(m > 0.0)) {
                return Err(Error::ZeroMass(format!(
                    "level {k} cell {idx} has zero mass under its level measure"
                )));
            }
            int_lengths.push(shannon_lengths(&masses)?);
            ideal_lengths.push(masses.iter().map(|&m| -m.log2()).collect());
        }
        let vlc = Self::from_lengths(space, tree.clone(), int_lengths, ideal_lengths, Construction::FromMeasures)?;
        Ok((vlc, measures))
    }

    /// Builds codes from a labeled net: sibling cells carry labels `1..=m`,
    /// and each cell receives conditional mass `6 / (pi^2 L^2)`, completed
    /// to a probability by spreading the slack uniformly over the siblings.
    ///
    /// `labels[k-1][c]` is the label of cell `c` at level `k`.
    pub fn from_labeled_net(
        space: &MetricSpace,
        tree: &PartitionTree,
        labels: &[Vec<u32>],
    ) -> Result<Self> {
        check_alignment(space, tree)?;
        if labels.len() != tree.depth() {
            return Err(Error::Shape(format!(
                "labels cover {} levels, tree has {}",
                labels.len(),
                tree.depth()
            )));
        }
        for k in 1..=tree.depth() {
            let level = tree.level(k);
            if labels[k - 1].len() != level.len() {
                return Err(Error::Shape(format!(
                    "level {k} has {} cells but {} labels",
                    level.len(),
                    labels[k - 1].len()
                )));
            }
            for parent_idx in 0..tree.level(k - 1).len() {
                let mut sibling_labels: Vec<u32> = level
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.parent == Some(parent_idx))
                    .map(|(i, _)| labels[k - 1][i])
                    .collect();
                sibling_labels.sort_unstable();
                let m = sibling_labels.len() as u32;
                if sibling_labels.iter().enumerate().any(|(i, &l)| l != i as u32 + 1) {
                    return Err(Error::Shape(format!(
                        "labels of the children of level-{} cell {parent_idx} are not 1..={m}",
                        k - 1
                    )));
                }
            }
        }
        let six_over_pi2 = 6.0 / (core::f64::consts::PI * core::f64::consts::PI);
        let depth = tree.depth().max(1);
        // Cell masses per level, via the same product recursion.
        let mut masses: Vec<Vec<f64>> = vec![vec![1.0; 1]];
        for k in 1..=tree.depth() {
            let level = tree.level(k);
            let mut level_mass = vec![0.0; level.len()];
            for parent_idx in 0..tree.level(k - 1).len() {
                let children: Vec<usize> = (0..level.len())
                    .filter(|&c| level[c].parent == Some(parent_idx))
                    .collect();
                let sub_total: f64 = children
                    .iter()
                    .map(|&c| six_over_pi2 / (labels[k - 1][c] as f64).powi(2))
                    .sum();
                let slack = (1.0 - sub_total) / children.len() as f64;
                let parent_mass = masses[k - 1][parent_idx];
                for &c in &children {
                    let nu = six_over_pi2 / (labels[k - 1][c] as f64).powi(2) + slack;
                    level_mass[c] = nu * parent_mass;
                }
            }
            masses.push(level_mass);
        }
        let mut int_lengths = Vec::new();
        let mut ideal_lengths = Vec::new();
        for k in 1..=depth {
            let level_mass = &masses[k.min(tree.depth())];
            int_lengths.push(shannon_lengths(level_mass)?);
            ideal_lengths.push(level_mass.iter().map(|&m| -m.log2()).collect());
        }
        Self::from_lengths(space, tree.clone(), int_lengths, ideal_lengths, Construction::LabeledNet)
    }

    /// Builds codes from one measure: level-`k` lengths are
    /// `ceil(log2(1/mu(A)))` over the level-`k` cells. Monotone because cell
    /// masses shrink along every chain.
    pub fn from_single_measure(
        space: &MetricSpace,
        tree: &PartitionTree,
        mu: &ProbabilityMeasure,
    ) -> Result<Self> {
        check_alignment(space, tree)?;
        if mu.len() != space.len() {
            return Err(Error::Shape(format!(
                "measure has {} weights for {} points",
                mu.len(),
                space.len()
            )));
        }
        if let Some(idx) = mu.weights().iter().position(|&w| !(w > 0.0)) {
            return Err(Error::ZeroMass(format!(
                "point {idx} has zero mass; some cell would get an infinite length"
            )));
        }
        let depth = tree.depth().max(1);
        let mut int_lengths = Vec::new();
        let mut ideal_lengths = Vec::new();
        for k in 1..=depth {
            let cells = tree.level(tree.stored_level(k));
            let masses: Vec<f64> = cells.iter().map(|c| mu.mass(&c.points)).collect();
            int_lengths.push(shannon_lengths(&masses)?);
            ideal_lengths.push(masses.iter().map(|&m| -m.log2()).collect());
        }
        Self::from_lengths(space, tree.clone(), int_lengths, ideal_lengths, Construction::SingleMeasure)
    }

    pub fn tree(&self) -> &PartitionTree {
        &self.tree
    }

    pub fn ratio(&self) -> f64 {
        self.tree.ratio()
    }

    /// Diameter of the space the codes were built on.
    pub fn diam(&self) -> f64 {
        self.diam
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    /// Deepest stored coding level (at least 1).
    pub fn stored_depth(&self) -> usize {
        self.int_lengths.len() - 1
    }

    pub fn n_points(&self) -> usize {
        self.tree.n_points()
    }

    /// Resolution of coding level `k`: the space diameter at `k = 0`, then
    /// `r^-k`.
    pub fn resolution(&self, k: usize) -> f64 {
        if k == 0 {
            self.diam
        } else {
            self.ratio().powi(-(k as i32))
        }
    }

    /// Cells carrying the level-`k` lengths.
    pub fn cells_at(&self, k: usize) -> &[Cell] {
        let k = k.min(self.stored_depth());
        self.tree.level(self.tree.stored_level(k))
    }

    pub fn int_level(&self, k: usize) -> &[u32] {
        &self.int_lengths[k.min(self.stored_depth())]
    }

    pub fn ideal_level(&self, k: usize) -> &[f64] {
        &self.ideal_lengths[k.min(self.stored_depth())]
    }

    fn cell_index(&self, k: usize, t: usize) -> usize {
        let k = k.min(self.stored_depth());
        self.tree
            .cell_index_of(self.tree.stored_level(k), t)
            .expect("point index in range")
    }

    /// Integer code length of point `t` at level `k` (constant beyond the
    /// stored depth).
    pub fn len_at(&self, k: usize, t: usize) -> u32 {
        if k == 0 {
            return 0;
        }
        self.int_lengths[k.min(self.stored_depth())][self.cell_index(k, t)]
    }

    /// Ideal (real-valued) code length of point `t` at level `k`.
    pub fn ideal_at(&self, k: usize, t: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.ideal_lengths[k.min(self.stored_depth())][self.cell_index(k, t)]
    }

    /// Representative coding point of `t` at level `k`.
    pub fn projection(&self, k: usize, t: usize) -> usize {
        let k = k.min(self.stored_depth());
        self.tree
            .projection(self.tree.stored_level(k), t)
            .expect("point index in range")
    }

    /// The atomic measure induced by the codes and level weights:
    /// mass proportional to `p_k 2^-len` at each level-`k` representative,
    /// summed over levels and normalized. Levels beyond the stored depth
    /// repeat the final level, so their weight collapses into its tail mass.
    pub fn mixture_from_codes(&self, p: &WeightSequence) -> Result<ProbabilityMeasure> {
        let depth = self.stored_depth();
        let mut raw = vec![0.0; self.n_points()];
        for k in 1..=depth {
            let w = if k == depth {
                p.tail_mass(k).ok_or_else(|| {
                    Error::Parameter(format!(
                        "level weights are not defined through level {k}"
                    ))
                })?
            } else {
                p.weight(k).ok_or_else(|| {
                    Error::Parameter(format!("level weights are not defined at level {k}"))
                })?
            };
            if !(w > 0.0) {
                return Err(Error::Parameter(format!("level weight at {k} must be positive")));
            }
            for (c, cell) in self.cells_at(k).iter().enumerate() {
                raw[cell.rep] += w * 2f64.powi(-(self.int_lengths[k][c] as i32));
            }
        }
        ProbabilityMeasure::normalized(raw)
    }

    /// Checks every admissibility condition and reports all violations:
    /// per-level Kraft sums, pointwise nondecreasing lengths, idempotent and
    /// refining projections, geometric resolutions that reach zero within
    /// the stored depth.
    pub fn validate_admissible(&self, space: &MetricSpace) -> Vec<AdmissibilityViolation> {
        let mut out = Vec::new();
        if self.int_lengths[0].len() != 1 || self.int_lengths[0][0] != 0 {
            out.push(AdmissibilityViolation::RootNotTrivial);
        }
        let depth = self.stored_depth();
        for k in 1..=depth {
            let sum = kraft_sum(&self.int_lengths[k]);
            if sum > 1.0 + KRAFT_TOL {
                out.push(AdmissibilityViolation::KraftExceeded { level: k, sum });
            }
            for (c, &l) in self.int_lengths[k].iter().enumerate() {
                if l < 1 {
                    out.push(AdmissibilityViolation::ZeroLength { level: k, cell: c });
                }
            }
            let bound = self.resolution(k);
            for (c, cell) in self.cells_at(k).iter().enumerate() {
                let diameter = space.subset_diameter(&cell.points);
                if diameter > bound + 1e-9 {
                    out.push(AdmissibilityViolation::ResolutionExceeded {
                        level: k,
                        cell: c,
                        diameter,
                        bound,
                    });
                }
            }
        }
        for t in 0..self.n_points() {
            for k in 1..=depth {
                if self.len_at(k, t) < self.len_at(k - 1, t) {
                    out.push(AdmissibilityViolation::LengthDecreased { level: k, point: t });
                }
                let pi_t = self.projection(k, t);
                if self.projection(k, pi_t) != pi_t {
                    out.push(AdmissibilityViolation::ProjectionNotIdempotent { level: k, point: t });
                }
                let coarse = self.cells_at(k - 1)[self.cell_index(k - 1, t)].points.clone();
                let fine = &self.cells_at(k)[self.cell_index(k, t)].points;
                if fine.iter().any(|p| !coarse.contains(p)) {
                    out.push(AdmissibilityViolation::NotRefining { level: k, point: t });
                }
            }
        }
        let final_diam = self
            .cells_at(depth)
            .iter()
            .map(|c| space.subset_diameter(&c.points))
            .fold(0.0, f64::max);
        if final_diam > 0.0 {
            out.push(AdmissibilityViolation::ResolutionNotVanishing { diameter: final_diam });
        }
        out
    }
}

fn check_alignment(space: &MetricSpace, tree: &PartitionTree) -> Result<()> {
    if tree.n_points() != space.len() {
        return Err(Error::Shape(format!(
            "tree covers {} points, space has {}",
            tree.n_points(),
            space.len()
        )));
    }
    Ok(())
}

/// Emits canonical prefix codewords for a list of lengths with Kraft sum at
/// most one: codewords are assigned in order of (length, position), each one
/// the previous value plus one, shifted to the new length.
pub fn canonical_prefix_codes(lengths: &[u32]) -> Result<Vec<String>> {
    if kraft_sum(lengths) > 1.0 + KRAFT_TOL {
        return Err(Error::Parameter(
            "lengths violate the Kraft inequality; no prefix code exists".into(),
        ));
    }
    if let Some(&l) = lengths.iter().find(|&&l| l > 64) {
        return Err(Error::Parameter(format!("length {l} too large to emit")));
    }
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by_key(|&i| (lengths[i], i));
    let mut codes = vec![String::new(); lengths.len()];
    let mut value: u64 = 0;
    let mut prev_len: u32 = 0;
    for (pos, &i) in order.iter().enumerate() {
        let l = lengths[i];
        if pos > 0 {
            value = (value + 1) << (l - prev_len);
        } else {
            value = 0;
        }
        prev_len = l;
        let mut s = String::with_capacity(l as usize);
        for bit in (0..l).rev() {
            s.push(if value >> bit & 1 == 1 { '1' } else { '0' });
        }
        codes[i] = s;
    }
    Ok(codes)
}
