mod common;

use common::coverage_oracle;
use nalgebra::{Point3, Vector3};
use nbv_core::evaluation::{observable_mask, point_cloud_coverage, sample_surface, side_face_mask, travel_distance};
use nbv_core::scenes::box_scene;
use nbv_core::Pose;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
    (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..0.5),
            )
        })
        .collect()
}

#[test]
fn kd_tree_coverage_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for thr in [0.02, 0.0433, 0.1, 0.3] {
        let gt = cloud(&mut rng, 800);
        let acc = cloud(&mut rng, 600);
        let r = point_cloud_coverage(&gt, &acc, thr).unwrap();
        assert_eq!(r.n_ground_truth, 800);
        assert!((r.c_p - coverage_oracle(&gt, &acc, thr)).abs() < 1e-12);
    }
}

#[test]
fn half_of_the_ground_truth_is_covered() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // spread out so no point is near another
    let gt: Vec<Point3<f64>> = (0..100)
        .map(|i| Point3::new(i as f64, rng.random_range(0.0..0.5), 0.0))
        .collect();
    let acc: Vec<Point3<f64>> = gt.iter().step_by(2).copied().collect();
    assert_eq!(point_cloud_coverage(&gt, &acc, 0.01).unwrap().c_p, 0.5);
    assert_eq!(point_cloud_coverage(&gt, &gt, 0.0).unwrap().c_p, 1.0);
    assert_eq!(point_cloud_coverage(&gt, &[], 1.0).unwrap().c_p, 0.0);
    assert!(point_cloud_coverage(&[], &gt, 1.0).is_err());
}

proptest! {
    #[test]
    fn coverage_is_monotone_and_order_free(seed in 0u64..1000, extra in 1usize..200, thr in 0.01f64..0.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = cloud(&mut rng, 300);
        let acc = cloud(&mut rng, 150);
        let base = point_cloud_coverage(&gt, &acc, thr).unwrap().c_p;

        let mut grown = acc.clone();
        grown.extend(cloud(&mut rng, extra));
        prop_assert!(point_cloud_coverage(&gt, &grown, thr).unwrap().c_p >= base);
        prop_assert!(point_cloud_coverage(&gt, &acc, thr * 1.5).unwrap().c_p >= base);

        let mut permuted = acc.clone();
        permuted.reverse();
        permuted.extend_from_slice(&acc[..acc.len() / 3]);
        prop_assert_eq!(point_cloud_coverage(&gt, &permuted, thr).unwrap().c_p, base);
    }
}

#[test]
fn surface_sampling_density_and_normals() {
    let scene = box_scene();
    let gt = sample_surface(&scene.mesh, 0.05, 0).unwrap();
    // open-bottom box 4 x 2 x 1.6: four walls plus the lid
    let area = 2.0 * (4.0 + 2.0) * 1.6 + 4.0 * 2.0;
    let expected = area / (0.05 * 0.05);
    assert!(
        (gt.len() as f64 - expected).abs() < 0.02 * expected,
        "{} vs {expected}",
        gt.len()
    );
    let bb = scene.mesh.object_bbox();
    for (p, n) in gt.points.iter().zip(&gt.normals) {
        assert!(bb.inflate(1e-9).contains(p));
        assert!((n.norm() - 1.0).abs() < 1e-9);
    }
    assert_eq!(sample_surface(&scene.mesh, 0.05, 0).unwrap().points, gt.points);
}

#[test]
fn lid_is_unobservable_from_ground_level() {
    let scene = box_scene();
    let gt = sample_surface(&scene.mesh, 0.05, 0).unwrap();
    let obs = observable_mask(&gt, 0.7, 45f64.to_radians());
    let side = side_face_mask(&gt);
    for ((p, n), (o, s)) in gt.points.iter().zip(&gt.normals).zip(obs.iter().zip(&side)) {
        let is_lid = n.dot(&Vector3::z()).abs() > 0.99;
        assert_eq!(*s, !is_lid);
        if is_lid {
            // lid at 1.6 m seen from 0.7 m, so every beam arrives from below
            assert!(!o, "{p:?}");
        } else {
            assert!(*o, "{p:?}");
        }
    }
}

#[test]
fn travel_distance_sums_horizontal_steps() {
    let poses = [
        Pose::new(0.0, 0.0, 0.0, 0.0),
        Pose::new(3.0, 4.0, 1.0, 0.0),
        Pose::new(3.0, 4.0, 0.0, 2.0),
    ];
    assert_eq!(travel_distance(&poses), 5.0);
    assert_eq!(travel_distance(&poses[..1]), 0.0);
}
