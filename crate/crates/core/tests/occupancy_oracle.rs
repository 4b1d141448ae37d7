//! Grid traversal and sweep insertion checked against an independent
//! plane-crossing traversal.

mod common;

use common::{oracle_voxels, random_unit};
use nalgebra::Point3;
use nbv_core::occupancy::{logit, OccupancyOctree, OccupancyParams, RayTerminal, VoxelKey};
use nbv_core::Aabb;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn empty_map(res: f64) -> OccupancyOctree {
    let b = Aabb::new(Point3::new(-1.0, -2.0, 0.5), Point3::new(3.0, 2.0, 3.5));
    OccupancyOctree::new(
        &b,
        &OccupancyParams {
            resolution: res,
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn raycast_matches_plane_crossing_oracle() {
    let map = empty_map(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let o = Point3::new(
            rng.random_range(-0.9..2.9),
            rng.random_range(-1.9..1.9),
            rng.random_range(0.6..3.4),
        );
        let d = random_unit(&mut rng);
        let range = rng.random_range(0.05..6.0);
        let got = map.raycast(&o, &d, range);
        let want = oracle_voxels(o, d, range, map.origin(), map.resolution(), map.dims());
        assert_eq!(got.voxels, want, "origin {o:?} dir {d:?} range {range}");
        assert!(matches!(got.terminal, RayTerminal::MaxRange | RayTerminal::Boundary));
    }
}

#[test]
fn raycast_stops_at_first_occupied() {
    let mut map = empty_map(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cells: Vec<VoxelKey> = (0..400)
        .map(|_| VoxelKey {
            i: rng.random_range(0..40),
            j: rng.random_range(0..40),
            k: rng.random_range(0..30),
        })
        .collect();
    for c in &cells {
        map.set_log_odds(*c, 3.0);
    }
    for _ in 0..300 {
        let o = Point3::new(
            rng.random_range(-0.9..2.9),
            rng.random_range(-1.9..1.9),
            rng.random_range(0.6..3.4),
        );
        let d = random_unit(&mut rng);
        let got = map.raycast(&o, &d, 10.0);
        let full = oracle_voxels(o, d, 10.0, map.origin(), map.resolution(), map.dims());
        let stop = full.iter().position(|k| map.is_occupied(k));
        match stop {
            Some(i) => {
                assert_eq!(got.voxels, full[..=i].to_vec());
                assert_eq!(got.terminal, RayTerminal::Hit);
            }
            None => assert_eq!(got.voxels, full),
        }
    }
}

#[test]
fn sweep_insertion_matches_per_ray_oracle() {
    let params = OccupancyParams {
        resolution: 0.1,
        ..Default::default()
    };
    let mut map = empty_map(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let origin = Point3::new(1.03, 0.02, 2.01);
    let points: Vec<Point3<f64>> = (0..200)
        .map(|_| origin + random_unit(&mut rng) * rng.random_range(0.3..1.4))
        .collect();
    map.insert_sweep(&points, &origin).unwrap();

    // hits and misses as sets; a voxel hit in the sweep is not also missed
    let key_of = |p: &Point3<f64>| {
        let idx = |a: usize| ((p[a] - map.origin()[a]) / 0.1).floor() as i32;
        VoxelKey {
            i: idx(0),
            j: idx(1),
            k: idx(2),
        }
    };
    let mut hits = std::collections::BTreeSet::new();
    let mut misses = std::collections::BTreeSet::new();
    for p in &points {
        let end = key_of(p);
        hits.insert(end);
        let d = p - origin;
        for k in oracle_voxels(origin, d / d.norm(), d.norm(), map.origin(), 0.1, map.dims()) {
            if k != end {
                misses.insert(k);
            }
        }
    }
    let l_hit = logit(params.hit_probability);
    let l_miss = logit(params.miss_probability);
    for h in &hits {
        assert!((map.log_odds(h).unwrap() - l_hit).abs() < 1e-12, "{h:?}");
    }
    for m in misses.difference(&hits) {
        assert!((map.log_odds(m).unwrap() - l_miss).abs() < 1e-12, "{m:?}");
    }
    assert_eq!(map.len(), hits.len() + misses.difference(&hits).count());
}

#[test]
fn dump_round_trip_random_map() {
    let mut map = empty_map(0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let k = VoxelKey {
            i: rng.random_range(0..80),
            j: rng.random_range(0..80),
            k: rng.random_range(0..60),
        };
        map.set_log_odds(k, rng.random_range(-3.0..3.0));
    }
    let text = map.to_dump();
    let back = OccupancyOctree::from_dump(text.as_bytes(), &OccupancyParams::default()).unwrap();
    assert_eq!(back.sorted_cells(), map.sorted_cells());
    assert_eq!(back.dims(), map.dims());
    assert_eq!(back.to_dump(), text);
}

proptest! {
    #[test]
    fn stored_log_odds_stay_clamped(updates in prop::collection::vec((0i32..4, any::<bool>()), 1..200)) {
        let mut map = empty_map(0.5);
        for (i, hit) in updates {
            let k = VoxelKey { i, j: 1, k: 1 };
            if hit { map.apply_hit(k) } else { map.apply_miss(k) }
        }
        let (lo, hi) = map.clamp_range();
        for (_, l) in map.sorted_cells() {
            prop_assert!(l >= lo - 1e-12 && l <= hi + 1e-12);
        }
    }

    #[test]
    fn unstored_voxels_are_unknown(i in 0i32..8, j in 0i32..8, k in 0i32..6) {
        let map = empty_map(0.5);
        prop_assert_eq!(map.probability(&VoxelKey { i, j, k }), 0.5);
    }
}
