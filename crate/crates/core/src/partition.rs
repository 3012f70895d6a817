//! Increasing sequences of partitions with geometric diameter decay.
//!
//! Level `k` of a [`PartitionTree`] partitions the whole space into cells of
//! diameter at most `r^-k`. Levels are stored until every cell has zero
//! diameter (or a depth cap is hit); beyond the stored depth the partition
//! no longer changes, so queries against deeper levels resolve to the final
//! stored level when that level is fully resolved.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::metric::MetricSpace;

/// One cell of a partition level.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Member point indices, ascending.
    pub points: Vec<usize>,
    /// Representative point; always a member.
    pub rep: usize,
    /// Index of the containing cell one level up; `None` at the root.
    pub parent: Option<usize>,
    /// 1-based position of this cell among its parent's children, in
    /// construction order.
    pub child_index: usize,
}

/// An increasing sequence of partitions of a finite metric space.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTree {
    ratio: f64,
    levels: Vec<Vec<Cell>>,
    /// `point_cells[k][t]` = index of the level-`k` cell containing `t`.
    point_cells: Vec<Vec<usize>>,
    n_points: usize,
    /// True when the final stored level consists of zero-diameter cells, so
    /// deeper levels are implicitly identical to it.
    resolved: bool,
}

/// A violated tree invariant, reported by [`PartitionTree::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum TreeViolation {
    RootNotWhole,
    NotAPartition { level: usize, point: usize, count: usize },
    DiameterExceeded { level: usize, cell: usize, diameter: f64, bound: f64 },
    NotNested { level: usize, cell: usize },
    BadChildIndex { level: usize, parent: usize },
    RepOutsideCell { level: usize, cell: usize },
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeViolation::RootNotWhole => {
                write!(f, "level 0 is not the single whole-space cell")
            }
            TreeViolation::NotAPartition { level, point, count } => {
                write!(f, "level {level}: point {point} lies in {count} cells")
            }
            TreeViolation::DiameterExceeded { level, cell, diameter, bound } => {
                write!(f, "level {level} cell {cell}: diameter {diameter} exceeds {bound}")
            }
            TreeViolation::NotNested { level, cell } => {
                write!(f, "level {level} cell {cell} is not contained in its parent")
            }
            TreeViolation::BadChildIndex { level, parent } => {
                write!(f, "level {level}: children of parent {parent} are not indexed 1..=m")
            }
            TreeViolation::RepOutsideCell { level, cell } => {
                write!(f, "level {level} cell {cell}: representative is not a member")
            }
        }
    }
}

impl PartitionTree {
    /// Carves a tree by repeated greedy ball removal.
    ///
    /// At level `k`, each parent cell is consumed by removing closed balls
    /// of radius `r^-k / 2` around centers chosen in label order (smallest
    /// remaining label first), which caps every cell diameter at `r^-k`.
    /// The carving center becomes the cell representative. Construction
    /// stops at `max_depth` or at the first level whose cells all have zero
    /// diameter, whichever comes first.
    pub fn build_radial(space: &MetricSpace, r: f64, max_depth: usize) -> Result<Self> {
        if !(r >= 2.0) {
            return Err(Error::Parameter(format!("partition ratio r = {r} must be at least 2")));
        }
        if max_depth == 0 {
            return Err(Error::Parameter("max_depth must be at least 1".into()));
        }
        if space.diameter() > 1.0 + 1e-9 {
            return Err(Error::Parameter(format!(
                "space diameter {} exceeds 1; normalize it first",
                space.diameter()
            )));
        }
        let lex = space.lex_order();
        let root_rep = lex[0];
        let root = Cell {
            points: (0..space.len()).collect(),
            rep: root_rep,
            parent: None,
            child_index: 1,
        };
        let mut levels = vec![vec![root]];
        for k in 1..=max_depth {
            if all_zero_diameter(space, levels.last().unwrap()) {
                break;
            }
            let radius = 0.5 * r.powi(-(k as i32));
            let mut level = Vec::new();
            for (parent_idx, parent) in levels[k - 1].iter().enumerate() {
                let mut remaining = parent.points.clone();
                let mut child_index = 1;
                while !remaining.is_empty() {
                    let center = first_in_lex_order(&lex, &remaining);
                    let cell_points = space.ball_within(&remaining, center, radius);
                    remaining.retain(|p| !cell_points.contains(p));
                    level.push(Cell {
                        points: cell_points,
                        rep: center,
                        parent: Some(parent_idx),
                        child_index,
                    });
                    child_index += 1;
                }
            }
            levels.push(level);
        }
        Self::from_cells(space, r, levels)
    }

    /// Assembles a tree from explicit levels, checking only structural
    /// well-formedness (indices in range, membership maps computable).
    /// Invariant violations are left to [`validate`](Self::validate) so that
    /// intentionally broken trees can be constructed and inspected.
    pub fn from_cells(space: &MetricSpace, ratio: f64, levels: Vec<Vec<Cell>>) -> Result<Self> {
        if !(ratio > 1.0) {
            return Err(Error::Parameter(format!("partition ratio r = {ratio} must exceed 1")));
        }
        if levels.is_empty() {
            return Err(Error::Shape("a tree needs at least the root level".into()));
        }
        let n_points = space.len();
        let mut point_cells = Vec::with_capacity(levels.len());
        for (k, level) in levels.iter().enumerate() {
            if level.is_empty() {
                return Err(Error::Shape(format!("level {k} has no cells")));
            }
            let mut map = vec![usize::MAX; n_points];
            for (c, cell) in level.iter().enumerate() {
                if cell.points.is_empty() {
                    return Err(Error::Shape(format!("level {k} cell {c} is empty")));
                }
                for &p in &cell.points {
                    if p >= n_points {
                        return Err(Error::Shape(format!(
                            "level {k} cell {c} refers to point {p} outside the space"
                        )));
                    }
                    if map[p] == usize::MAX {
                        map[p] = c;
                    }
                    // Duplicate membership is reported by validate().
                }
                if cell.rep >= n_points {
                    return Err(Error::Shape(format!(
                        "level {k} cell {c} has representative {} outside the space",
                        cell.rep
                    )));
                }
                if k > 0 {
                    match cell.parent {
                        Some(p) if p < levels[k - 1].len() => {}
                        _ => {
                            return Err(Error::Shape(format!(
                                "level {k} cell {c} has no valid parent link"
                            )))
                        }
                    }
                }
            }
            point_cells.push(map);
        }
        let resolved = all_zero_diameter(space, levels.last().unwrap());
        Ok(PartitionTree { ratio, levels, point_cells, n_points, resolved })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Index of the deepest stored level.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// True when the final stored level is fully resolved (all cells have
    /// zero diameter), so the partition no longer changes below it.
    pub fn is_resolved(&self) -> bool {
        self.resolved
    }

    pub fn level(&self, k: usize) -> &[Cell] {
        &self.levels[k]
    }

    /// Maps a nominal level to the stored level that realizes it.
    pub fn stored_level(&self, k: usize) -> usize {
        k.min(self.depth())
    }

    /// Index of the level-`k` cell containing `t`.
    ///
    /// Levels beyond the stored depth resolve to the final level when the
    /// tree is fully resolved; otherwise they are out of range.
    pub fn cell_index_of(&self, k: usize, t: usize) -> Result<usize> {
        if t >= self.n_points {
            return Err(Error::Parameter(format!("point index {t} out of range")));
        }
        if k > self.depth() && !self.resolved {
            return Err(Error::Parameter(format!(
                "level {k} exceeds stored depth {} of an unresolved tree",
                self.depth()
            )));
        }
        let idx = self.point_cells[self.stored_level(k)][t];
        if idx == usize::MAX {
            return Err(Error::Shape(format!("point {t} is missing from level {k}")));
        }
        Ok(idx)
    }

    /// The level-`k` cell containing `t`.
    pub fn cell_of(&self, k: usize, t: usize) -> Result<&Cell> {
        let idx = self.cell_index_of(k, t)?;
        Ok(&self.levels[self.stored_level(k)][idx])
    }

    /// Representative of the level-`k` cell containing `t`.
    pub fn projection(&self, k: usize, t: usize) -> Result<usize> {
        Ok(self.cell_of(k, t)?.rep)
    }

    /// Checks every tree invariant against the space and reports all
    /// violations: single whole root, disjoint covering levels, per-level
    /// diameter bounds, nesting, child indexing, representative membership.
    pub fn validate(&self, space: &MetricSpace) -> Vec<TreeViolation> {
        let mut out = Vec::new();
        let root_level = &self.levels[0];
        if root_level.len() != 1 || root_level[0].points.len() != self.n_points {
            out.push(TreeViolation::RootNotWhole);
        }
        for (k, level) in self.levels.iter().enumerate() {
            let bound = self.ratio.powi(-(k as i32));
            let mut counts = vec![0usize; self.n_points];
            for (c, cell) in level.iter().enumerate() {
                for &p in &cell.points {
                    counts[p] += 1;
                }
                if !cell.points.contains(&cell.rep) {
                    out.push(TreeViolation::RepOutsideCell { level: k, cell: c });
                }
                let diameter = space.subset_diameter(&cell.points);
                if diameter > bound + 1e-9 {
                    out.push(TreeViolation::DiameterExceeded { level: k, cell: c, diameter, bound });
                }
                if k > 0 {
                    let parent = &self.levels[k - 1][cell.parent.unwrap()];
                    if cell.points.iter().any(|p| !parent.points.contains(p)) {
                        out.push(TreeViolation::NotNested { level: k, cell: c });
                    }
                }
            }
            for (p, &count) in counts.iter().enumerate() {
                if count != 1 {
                    out.push(TreeViolation::NotAPartition { level: k, point: p, count });
                }
            }
            if k > 0 {
                for parent_idx in 0..self.levels[k - 1].len() {
                    let mut indices: Vec<usize> = level
                        .iter()
                        .filter(|cell| cell.parent == Some(parent_idx))
                        .map(|cell| cell.child_index)
                        .collect();
                    indices.sort_unstable();
                    if indices.iter().enumerate().any(|(i, &ci)| ci != i + 1) {
                        out.push(TreeViolation::BadChildIndex { level: k, parent: parent_idx });
                    }
                }
            }
        }
        out
    }
}

fn all_zero_diameter(space: &MetricSpace, level: &[Cell]) -> bool {
    level.iter().all(|cell| space.subset_diameter(&cell.points) == 0.0)
}

fn first_in_lex_order(lex: &[usize], remaining: &[usize]) -> usize {
    *lex.iter().find(|p| remaining.contains(p)).expect("remaining set is nonempty")
}

/// Convenience used in messages and reports.
pub fn describe_cell(space: &MetricSpace, cell: &Cell) -> String {
    let names: Vec<&str> = cell.points.iter().map(|&p| space.label(p)).collect();
    format!("{{{}}}", names.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_point_line() -> MetricSpace {
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

    fn two_point_space() -> MetricSpace {
        MetricSpace::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap()
    }

    /// The 3-point-line tree with level 1 = {{a,b},{c}} used across the
    /// code-construction tests; built by hand since half-radius carving at
    /// r = 2 separates all three points immediately.
    pub(crate) fn hand_tree_ab_c(space: &MetricSpace) -> PartitionTree {
        let levels = vec![
            vec![Cell { points: vec![0, 1, 2], rep: 0, parent: None, child_index: 1 }],
            vec![
                Cell { points: vec![0, 1], rep: 0, parent: Some(0), child_index: 1 },
                Cell { points: vec![2], rep: 2, parent: Some(0), child_index: 2 },
            ],
            vec![
                Cell { points: vec![0], rep: 0, parent: Some(0), child_index: 1 },
                Cell { points: vec![1], rep: 1, parent: Some(0), child_index: 2 },
                Cell { points: vec![2], rep: 2, parent: Some(1), child_index: 1 },
            ],
        ];
        PartitionTree::from_cells(space, 2.0, levels).unwrap()
    }

    #[test]
    fn single_point_space_builds_a_root_only_tree() {
        let space = MetricSpace::new(vec!["a".into()], vec![vec![0.0]]).unwrap();
        let tree = PartitionTree::build_radial(&space, 2.0, 5).unwrap();
        assert_eq!(tree.depth(), 0);
        assert!(tree.is_resolved());
        // Implicit deeper levels all resolve to the singleton.
        assert_eq!(tree.cell_of(3, 0).unwrap().points, vec![0]);
        assert!(tree.validate(&space).is_empty());
    }

    #[test]
    fn two_point_space_splits_once_and_stops() {
        let tree = PartitionTree::build_radial(&two_point_space(), 2.0, 3).unwrap();
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.level(1).len(), 2);
        assert!(tree.is_resolved());
        assert_eq!(tree.cell_of(3, 1).unwrap().points, vec![1]);
    }

    #[test]
    fn three_point_line_separates_at_level_one() {
        // Carving radius at level 1 is 1/4, which is below the 1/2 spacing,
        // so every point lands in its own cell.
        let space = three_point_line();
        let tree = PartitionTree::build_radial(&space, 2.0, 4).unwrap();
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.level(1).len(), 3);
        assert!(tree.validate(&space).is_empty());
    }

    #[test]
    fn rejects_bad_parameters() {
        let space = two_point_space();
        assert!(PartitionTree::build_radial(&space, 1.5, 3).is_err());
        assert!(PartitionTree::build_radial(&space, 2.0, 0).is_err());
        let wide = MetricSpace::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 2.0], vec![2.0, 0.0]],
        )
        .unwrap();
        assert!(PartitionTree::build_radial(&wide, 2.0, 3).is_err());
    }

    #[test]
    fn hand_tree_passes_validation_and_cell_queries() {
        let space = three_point_line();
        let tree = hand_tree_ab_c(&space);
        assert!(tree.validate(&space).is_empty());
        assert_eq!(tree.cell_of(0, 1).unwrap().points, vec![0, 1, 2]);
        assert_eq!(tree.cell_of(1, 1).unwrap().points, vec![0, 1]);
        assert_eq!(tree.cell_of(2, 1).unwrap().points, vec![1]);
        assert_eq!(tree.cell_of(9, 1).unwrap().points, vec![1]);
    }

    #[test]
    fn validate_reports_nesting_and_diameter_violations() {
        let space = three_point_line();
        // Level-1 cell {a,c} has diameter 1.0 > 0.5 and ignores b.
        let levels = vec![
            vec![Cell { points: vec![0, 1, 2], rep: 0, parent: None, child_index: 1 }],
            vec![
                Cell { points: vec![0, 2], rep: 0, parent: Some(0), child_index: 1 },
                Cell { points: vec![1], rep: 1, parent: Some(0), child_index: 2 },
            ],
        ];
        let tree = PartitionTree::from_cells(&space, 2.0, levels).unwrap();
        let violations = tree.validate(&space);
        assert!(violations
            .iter()
            .any(|v| matches!(v, TreeViolation::DiameterExceeded { level: 1, .. })));

        // A level-2 cell that straddles two level-1 cells.
        let levels = vec![
            vec![Cell { points: vec![0, 1, 2], rep: 0, parent: None, child_index: 1 }],
            vec![
                Cell { points: vec![0, 1], rep: 0, parent: Some(0), child_index: 1 },
                Cell { points: vec![2], rep: 2, parent: Some(0), child_index: 2 },
            ],
            vec![
                Cell { points: vec![0], rep: 0, parent: Some(0), child_index: 1 },
                Cell { points: vec![1, 2], rep: 1, parent: Some(0), child_index: 2 },
            ],
        ];
        let tree = PartitionTree::from_cells(&space, 2.0, levels).unwrap();
        let violations = tree.validate(&space);
        assert!(violations
            .iter()
            .any(|v| matches!(v, TreeViolation::NotNested { level: 2, .. })));
    }

    #[test]
    fn child_indices_count_within_each_parent() {
        let space = three_point_line();
        let tree = PartitionTree::build_radial(&space, 2.0, 4).unwrap();
        for k in 1..=tree.depth() {
            for parent_idx in 0..tree.level(k - 1).len() {
                let mut seen: Vec<usize> = tree
                    .level(k)
                    .iter()
                    .filter(|c| c.parent == Some(parent_idx))
                    .map(|c| c.child_index)
                    .collect();
                seen.sort_unstable();
                assert_eq!(seen, (1..=seen.len()).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn zero_distance_points_stay_together() {
        let space = MetricSpace::new(
            vec!["a".into(), "a2".into(), "b".into()],
            vec![
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, 1.0],
                vec![1.0, 1.0, 0.0],
            ],
        )
        .unwrap();
        let tree = PartitionTree::build_radial(&space, 2.0, 6).unwrap();
        assert!(tree.is_resolved());
        let cell = tree.cell_of(tree.depth(), 0).unwrap();
        assert_eq!(cell.points, vec![0, 1]);
    }
}
