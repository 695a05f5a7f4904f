//! Property and invariant tests: every module's stated invariants, run with
//! seeded randomized batteries plus a few proptest properties.

mod common;

use mvpose::heatmap::Heatmap;
use mvpose::refine::{filter_cloud, ScoredCloud};
use mvpose::score::verdict;
use proptest::prelude::*;

#[test]
fn rigid_align_is_exact_on_noiseless_data() {
    println!("{}", common::check_rigid_align_exactness(1000));
}

#[test]
fn projection_consistent_with_composition() {
    println!("{}", common::check_projection_composition_consistency(1000));
}

#[test]
fn composition_chains_stay_orthonormal() {
    println!("{}", common::check_composition_chains(100));
}

#[test]
fn uncertainty_monotone_in_heatmap_values() {
    println!("{}", common::check_uncertainty_monotonicity(1000));
}

#[test]
fn product_and_sum_forms_agree_above_floor() {
    println!("{}", common::check_product_sum_consistency(1000));
}

#[test]
fn fusion_is_view_permutation_invariant() {
    println!("{}", common::check_view_permutation_invariance(1000));
}

#[test]
fn bilinear_lookup_is_continuous() {
    println!("{}", common::check_lookup_continuity(1000));
}

#[test]
fn keypoints_transform_rigidly() {
    println!("{}", common::check_keypoint_rigidity(1000));
}

#[test]
fn ransac_deterministic_sorted_and_consistent() {
    println!("{}", common::check_ransac_contract());
}

#[test]
fn ransac_recovers_exact_noiseless_cluster() {
    println!("{}", common::check_ransac_exact_recovery());
}

#[test]
fn backprojection_roundtrips_all_masked_pixels() {
    println!("{}", common::check_backprojection_roundtrip());
}

#[test]
fn icp_objective_improves_per_iteration() {
    println!("{}", common::check_icp_monotonicity(100));
}

#[test]
fn filter_cloud_respects_quantile_contract() {
    println!("{}", common::check_filter_cloud_contract(1000));
}

#[test]
fn add_error_symmetric_and_frame_invariant() {
    println!("{}", common::check_add_error_invariance(1000));
}

#[test]
fn verdict_bands_partition_the_line() {
    println!("{}", common::check_verdict_partition(1000));
}

#[test]
fn matching_exclusive_and_recall_monotone() {
    println!("{}", common::check_matching_and_recall_monotonicity(200));
}

#[test]
fn simulator_is_deterministic() {
    println!("{}", common::check_simulator_determinism());
}

#[test]
fn rendered_depth_lies_on_the_surface() {
    println!("{}", common::check_render_geometry());
}

#[test]
fn file_formats_roundtrip() {
    println!("{}", common::check_io_roundtrips(50));
}

proptest! {
    /// Lookups stay within [0, 1] for any finite pixel on any valid grid.
    #[test]
    fn lookup_stays_in_unit_interval(
        values in proptest::collection::vec(0.0f32..=1.0, 16),
        x in -10.0f64..14.0,
        y in -10.0f64..14.0,
    ) {
        let map = Heatmap::new(0, 0, 4, 4, values).unwrap();
        let v = map.lookup(&mvpose::geometry::Point2::new(x, y));
        prop_assert!((0.0..=1.0).contains(&v));
    }

    /// Filtering keeps ceil(q * N) points for any scores and quantile.
    #[test]
    fn filter_size_matches_quantile(
        scores in proptest::collection::vec(0.0f64..=1.0, 1..80),
        q in 0.01f64..=1.0,
    ) {
        let cloud = ScoredCloud {
            points: (0..scores.len())
                .map(|i| mvpose::geometry::Point3::new(i as f64, 0.0, 0.0))
                .collect(),
            scores,
        };
        let kept = filter_cloud(&cloud, q);
        let expected = ((q * cloud.len() as f64).ceil() as usize).clamp(1, cloud.len());
        prop_assert_eq!(kept.len(), expected);
    }

    /// Exactly one verdict band fires for any non-negative error.
    #[test]
    fn verdict_total_function(add in 0.0f64..10.0, diameter in 0.01f64..10.0) {
        let v = verdict(add, diameter);
        let correct = add < 0.10 * diameter;
        let intermediate = !correct && add < 0.30 * diameter;
        match v {
            mvpose::score::Verdict::Correct => prop_assert!(correct),
            mvpose::score::Verdict::Intermediate => prop_assert!(intermediate),
            mvpose::score::Verdict::Incorrect => prop_assert!(!correct && !intermediate),
        }
    }
}
