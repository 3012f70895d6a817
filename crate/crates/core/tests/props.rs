//! Property tests for the structural invariants of the metric, partition,
//! and code layers.

mod common;

use chainlab_core::functionals::{
    bednorz_partition_bound, conditional_entropy, cross_entropy, ft_functional, refinement_bound,
    refinement_sum, refinement_sum_ideal, sigma_code, WeightSequence,
};
use chainlab_core::metric::{MetricSpace, ProbabilityMeasure};
use chainlab_core::partition::PartitionTree;
use chainlab_core::vlc::{kraft_sum, shannon_lengths, ConditionalFamily, VlcSequence};
use proptest::prelude::*;

fn arb_points(max_n: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
    (2usize..=max_n, 0usize..5).prop_flat_map(|(n, kind)| {
        let dim = match kind {
            0 | 4 => 1,
            2 => 3,
            _ => 2,
        };
        (
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, dim), n),
            Just(kind),
        )
    })
}

fn space_from(points: &[Vec<f64>]) -> Option<MetricSpace> {
    let labels = (0..points.len()).map(|i| format!("p{i:02}")).collect();
    let space = MetricSpace::from_points(labels, points).ok()?;
    space.normalize_diameter().ok()
}

fn arb_ratio() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![2.0, 3.0, 4.0])
}

/// Positive weights for a measure over `n` points.
fn arb_weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_monotonicity((points, _) in arb_points(20), r1 in 0.0f64..1.2, r2 in 0.0f64..1.2) {
        let Some(space) = space_from(&points) else { return Ok(()) };
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        for t in 0..space.len() {
            let small = space.ball(t, lo).unwrap();
            let big = space.ball(t, hi).unwrap();
            prop_assert!(small.iter().all(|s| big.contains(s)));
            prop_assert!(big.contains(&t));
        }
    }

    #[test]
    fn covering_number_is_monotone((points, _) in arb_points(16), eps in 0.0f64..1.2) {
        let Some(space) = space_from(&points) else { return Ok(()) };
        let at = space.covering_number(eps).value;
        let coarser = space.covering_number(eps + 0.1).value;
        prop_assert!(coarser <= at);
        // At zero: one ball per distinct point.
        let distinct = {
            let mut classes = 0;
            let mut seen: Vec<usize> = Vec::new();
            for i in 0..space.len() {
                if !seen.iter().any(|&j| space.dist(i, j) == 0.0) {
                    classes += 1;
                    seen.push(i);
                }
            }
            classes
        };
        prop_assert_eq!(space.covering_number(0.0).value, distinct);
        // Any radius at or above the diameter needs one ball.
        prop_assert_eq!(space.covering_number(space.diameter()).value, 1);
    }

    #[test]
    fn exact_cover_never_beats_greedy_from_above((points, _) in arb_points(14), eps in 0.05f64..1.0) {
        let Some(space) = space_from(&points) else { return Ok(()) };
        let exact = space.covering_number(eps);
        prop_assert!(exact.exact);
        // Independent greedy reimplementation.
        let mut covered = vec![false; space.len()];
        let mut greedy = 0usize;
        while covered.iter().any(|&c| !c) {
            let best = (0..space.len())
                .max_by_key(|&c| {
                    (0..space.len())
                        .filter(|&s| !covered[s] && space.dist(c, s) <= eps)
                        .count()
                })
                .unwrap();
            for s in 0..space.len() {
                if space.dist(best, s) <= eps {
                    covered[s] = true;
                }
            }
            greedy += 1;
        }
        prop_assert!(exact.value <= greedy);
    }

    #[test]
    fn normalization_is_idempotent((points, _) in arb_points(12)) {
        let Some(space) = space_from(&points) else { return Ok(()) };
        let again = space.normalize_diameter().unwrap();
        prop_assert_eq!(space, again);
    }

    #[test]
    fn radial_trees_validate_and_nest((points, _) in arb_points(20), r in arb_ratio()) {
        let Some(space) = space_from(&points) else { return Ok(()) };
        let tree = PartitionTree::build_radial(&space, r, 64).unwrap();
        prop_assert!(tree.is_resolved());
        prop_assert!(tree.validate(&space).is_empty());
        for t in 0..space.len() {
            for k in 0..tree.depth() {
                let coarse = &tree.cell_of(k, t).unwrap().points;
                let fine = &tree.cell_of(k + 1, t).unwrap().points;
                prop_assert!(fine.iter().all(|p| coarse.contains(p)));
            }
            // Representatives are within the level resolution.
            for k in 0..=tree.depth() {
                let rep = tree.projection(k, t).unwrap();
                prop_assert!(space.dist(t, rep) <= r.powi(-(k as i32)) + 1e-9);
            }
        }
        // Greedy ball carving packs centers more than a carve radius apart,
        // so child counts are capped by covering numbers at half that.
        for k in 0..tree.depth() {
            let carve = 0.5 * r.powi(-(k as i32 + 1));
            for (parent_idx, parent) in tree.level(k).iter().enumerate() {
                let children = tree
                    .level(k + 1)
                    .iter()
                    .filter(|c| c.parent == Some(parent_idx))
                    .count();
                let cover = space.covering_number_within(&parent.points, carve / 2.0);
                prop_assert!(children <= cover.value);
            }
        }
    }

    #[test]
    fn shannon_lengths_respect_kraft(weights in prop::collection::vec(0.01f64..1.0, 1..20)) {
        let total: f64 = weights.iter().sum();
        let normalized: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let lengths = shannon_lengths(&normalized).unwrap();
        prop_assert!(kraft_sum(&lengths) <= 1.0 + 1e-12);
        for (&l, &w) in lengths.iter().zip(&normalized) {
            let ideal = -(w.log2());
            prop_assert!((l as f64) >= ideal - 1e-9);
            prop_assert!((l as f64) <= ideal.max(0.0) + 1.0 + 1e-9);
        }
    }

    #[test]
    fn constructions_are_admissible((points, _) in arb_points(16), r in arb_ratio(), raw in arb_weights(16)) {
        let Some(space) = space_from(&points) else { return Ok(()) };
        let n = space.len();
        let tree = PartitionTree::build_radial(&space, r, 64).unwrap();
        let mu = ProbabilityMeasure::normalized(raw[..n].to_vec()).unwrap();

        let single = VlcSequence::from_single_measure(&space, &tree, &mu).unwrap();
        prop_assert!(single.validate_admissible(&space).is_empty());

        let family = ConditionalFamily::uniform_over_children(&space, &tree);
        let (from_measures, measures) =
            VlcSequence::from_measures(&space, &tree, &mu, &family).unwrap();
        prop_assert!(from_measures.validate_admissible(&space).is_empty());

        // Mass monotonicity along every chain.
        for t in 0..n {
            for k in 1..measures.len() {
                let coarse = measures[k - 1].mass(&tree.cell_of(k, t).unwrap().points);
                let fine = measures[k].mass(&tree.cell_of(k + 1, t).unwrap().points);
                prop_assert!(fine <= coarse + 1e-12);
            }
        }

        let labels: Vec<Vec<u32>> = (1..=tree.depth())
            .map(|k| tree.level(k).iter().map(|c| c.child_index as u32).collect())
            .collect();
        let net = VlcSequence::from_labeled_net(&space, &tree, &labels).unwrap();
        prop_assert!(net.validate_admissible(&space).is_empty());

        let lower = chainlab_core::lower::assign_lower_codes(&space, &tree).unwrap();
        prop_assert!(lower.validate_admissible(&space).is_empty());

        // Theorem-3 style domination for every construction.
        for vlc in [&single, &from_measures, &net, &lower] {
            for t in 0..n {
                prop_assert!(sigma_code(vlc, t).unwrap().value <= refinement_bound(vlc, t).unwrap() + 1e-12);
            }
        }

        // Mixture measure inequality.
        let p = WeightSequence::dyadic();
        let mix = single.mixture_from_codes(&p).unwrap();
        for t in 0..n {
            for k in 1..=single.stored_depth() {
                let cell = single.tree().cell_of(single.tree().stored_level(k), t).unwrap();
                let lhs = (1.0 / mix.mass(&cell.points)).log2();
                let rhs = single.len_at(k, t) as f64 + (1.0 / p.weight(k).unwrap()).log2();
                prop_assert!(lhs <= rhs + 1e-9);
            }
        }
    }

    #[test]
    fn partition_bound_mechanism((points, _) in arb_points(14), r in arb_ratio(), raw in arb_weights(14)) {
        let Some(space) = space_from(&points) else { return Ok(()) };
        let n = space.len();
        let tree = PartitionTree::build_radial(&space, r, 64).unwrap();
        let mu = ProbabilityMeasure::normalized(raw[..n].to_vec()).unwrap();
        let vlc = VlcSequence::from_single_measure(&space, &tree, &mu).unwrap();
        let slack = r / (r - 1.0);
        for t in 0..n {
            let bed = bednorz_partition_bound(&space, &tree, &mu, t).unwrap();
            // Ideal increments telescope exactly into the partition bound.
            prop_assert!((refinement_sum_ideal(&vlc, t).unwrap() - bed).abs() <= 1e-9);
            // Integer rounding costs at most one bit per level.
            prop_assert!(refinement_sum(&vlc, t).unwrap() <= bed + slack + 1e-9);
        }
    }

    #[test]
    fn step_sum_matches_quadrature((points, _) in arb_points(16), raw in arb_weights(16)) {
        let Some(space) = space_from(&points) else { return Ok(()) };
        let n = space.len();
        let mu = ProbabilityMeasure::normalized(raw[..n].to_vec()).unwrap();
        for t in 0..n {
            let exact = ft_functional(&space, &mu, t).unwrap();
            let oracle = common::ft_quadrature_oracle(&space, &mu, t, 1e-8);
            prop_assert!((exact - oracle).abs() <= 1e-6, "{exact} vs {oracle}");
        }
    }

    #[test]
    fn gibbs_and_jensen((points, _) in arb_points(12), raw_mu in arb_weights(12), raw_nu in arb_weights(12)) {
        let Some(space) = space_from(&points) else { return Ok(()) };
        let n = space.len();
        let tree = PartitionTree::build_radial(&space, 2.0, 64).unwrap();
        let mu = ProbabilityMeasure::normalized(raw_mu[..n].to_vec()).unwrap();
        let nu = ProbabilityMeasure::normalized(raw_nu[..n].to_vec()).unwrap();
        for k in 1..=tree.depth() {
            for parent in 0..tree.level(k - 1).len() {
                let h = conditional_entropy(&space, &tree, k, parent, &mu).unwrap();
                let x = cross_entropy(&space, &tree, k, parent, &mu, &nu).unwrap();
                prop_assert!(x >= h - 1e-12);

                // Jensen: average of sqrt vs sqrt of average surprisal.
                let parent_cell = &tree.level(k - 1)[parent];
                let parent_mass = mu.mass(&parent_cell.points);
                let mut avg_sqrt = 0.0;
                for cell in tree.level(k).iter().filter(|c| c.parent == Some(parent)) {
                    let cond = mu.mass(&cell.points) / parent_mass;
                    if cond > 0.0 && cond < 1.0 {
                        avg_sqrt += cond * (-(cond.log2())).sqrt();
                    }
                }
                prop_assert!(avg_sqrt <= h.sqrt() + 1e-12);
            }
        }
    }
}
