//! BVH ray casting against brute force, and the sweep filters against direct
//! computations.

use nalgebra::{Point3, Vector3};
use nbv_core::geometry::Pose;
use nbv_core::scenes::helicopter_scene;
use nbv_core::sensor::{
    downsample_filter, intersect_triangle, ray_mesh_intersect, simulate_scan, statistical_outlier_mask,
    voxel_downsample, FilterParams, LidarModel, ScanActionModel, SceneMesh, Sweep,
};
use nbv_core::Aabb;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_force(scene: &SceneMesh, o: &Point3<f64>, d: &Vector3<f64>) -> Option<f64> {
    (0..scene.triangles().len())
        .filter_map(|t| {
            let [a, b, c] = scene.triangle(t);
            intersect_triangle(o, d, &a, &b, &c)
        })
        .min_by(f64::total_cmp)
}

#[test]
fn bvh_agrees_with_brute_force_on_1000_rays() {
    let scene = helicopter_scene().mesh;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut hits = 0;
    for _ in 0..1000 {
        let o = Point3::new(
            rng.random_range(-7.0..7.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(0.1..4.0),
        );
        let d = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        let got = ray_mesh_intersect(&o, &d, &scene).map(|h| h.distance);
        let want = brute_force(&scene, &o, &d);
        match (got, want) {
            (Some(g), Some(w)) => {
                hits += 1;
                assert!((g - w).abs() < 1e-9, "{g} vs {w}");
            }
            (None, None) => {}
            other => panic!("mismatch {other:?} for ray {o:?} {d:?}"),
        }
    }
    assert!(hits > 500);
}

fn closed_unit_cube() -> SceneMesh {
    let v: Vec<Point3<f64>> = (0..8)
        .map(|i| {
            Point3::new(
                (i & 1) as f64 * 2.0 - 1.0,
                ((i >> 1) & 1) as f64 * 2.0 - 1.0,
                ((i >> 2) & 1) as f64 * 2.0 - 1.0,
            )
        })
        .collect();
    let quads = [
        [0, 1, 3, 2],
        [4, 6, 7, 5],
        [0, 4, 5, 1],
        [2, 3, 7, 6],
        [0, 2, 6, 4],
        [1, 5, 7, 3],
    ];
    let t = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    SceneMesh::new(
        v,
        t,
        Aabb::new(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0)),
    )
    .unwrap()
}

#[test]
fn ray_from_cube_centre_towards_corner() {
    let cube = closed_unit_cube();
    let d = Vector3::new(1.0, 1.0, 1.0).normalize();
    let hit = ray_mesh_intersect(&Point3::origin(), &d, &cube).unwrap();
    assert!((hit.distance - 3f64.sqrt()).abs() < 1e-9);
    let hit = ray_mesh_intersect(&Point3::origin(), &Vector3::x(), &cube).unwrap();
    assert!((hit.distance - 1.0).abs() < 1e-12);
}

#[test]
fn ray_pointing_away_misses() {
    let cube = closed_unit_cube();
    assert!(ray_mesh_intersect(&Point3::new(3.0, 0.0, 0.0), &Vector3::x(), &cube).is_none());
}

#[test]
fn scan_is_deterministic_and_noise_bounded() {
    let scene = helicopter_scene();
    let lidar = LidarModel::default();
    let action = ScanActionModel::default();
    let a = simulate_scan(&scene.mesh, &scene.start, &lidar, &action, 5).unwrap();
    let b = simulate_scan(&scene.mesh, &scene.start, &lidar, &action, 5).unwrap();
    assert_eq!(a, b);
    let c = simulate_scan(&scene.mesh, &scene.start, &lidar, &action, 6).unwrap();
    assert_ne!(a.points, c.points);

    let quiet = LidarModel {
        noise_sigma: 0.0,
        ..lidar
    };
    let exact = simulate_scan(&scene.mesh, &scene.start, &quiet, &action, 5).unwrap();
    assert_eq!(exact.points.len(), a.points.len());
    for (p, q) in a.points.iter().zip(&exact.points) {
        assert!((p - q).norm() <= 3.0 * lidar.noise_sigma + 1e-12);
    }
    // every noiseless return lies on the scene surface along its beam
    for p in exact.points.iter().step_by(97) {
        let d = (p - exact.sensor_origin).normalize();
        let hit = ray_mesh_intersect(&exact.sensor_origin, &d, &scene.mesh).unwrap();
        assert!((hit.distance - (p - exact.sensor_origin).norm()).abs() < 1e-6);
    }
}

#[test]
fn scan_action_widens_vertical_coverage() {
    let scene = helicopter_scene();
    let lidar = LidarModel {
        noise_sigma: 0.0,
        ..Default::default()
    };
    let pose = Pose::new(0.0, -3.2, 0.0, 0.0);
    let max_el = |s: &Sweep| {
        s.points
            .iter()
            .map(|p| {
                let d = p - s.sensor_origin;
                d.z.atan2(d.x.hypot(d.y)).to_degrees()
            })
            .fold(f64::MIN, f64::max)
    };
    let still = simulate_scan(&scene.mesh, &pose, &lidar, &ScanActionModel::disabled(), 1).unwrap();
    let rolled = simulate_scan(&scene.mesh, &pose, &lidar, &ScanActionModel::default(), 1).unwrap();
    assert!(max_el(&still) <= 15.0 + 1e-9);
    assert!(max_el(&rolled) > 40.0);
    assert!(max_el(&rolled) <= 55.0 + 1e-9);
}

#[test]
fn downsample_keeps_one_centroid_per_leaf() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts: Vec<Point3<f64>> = (0..5000)
        .map(|_| {
            Point3::new(
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..0.2),
            )
        })
        .collect();
    let out = voxel_downsample(&pts, 0.1).unwrap();
    let mut cells = std::collections::BTreeMap::<(i64, i64, i64), Vec<Point3<f64>>>::new();
    for p in &pts {
        cells
            .entry((
                (p.x / 0.1).floor() as i64,
                (p.y / 0.1).floor() as i64,
                (p.z / 0.1).floor() as i64,
            ))
            .or_default()
            .push(*p);
    }
    assert_eq!(out.len(), cells.len());
    for (o, members) in out.iter().zip(cells.values()) {
        let c = members.iter().fold(Vector3::zeros(), |s, p| s + p.coords) / members.len() as f64;
        assert!((o.coords - c).norm() < 1e-12);
    }
}

#[test]
fn outlier_removal_drops_isolated_point() {
    // 20 x 20 plane at 5 cm spacing plus one point a metre above it
    let mut pts: Vec<Point3<f64>> = (0..400)
        .map(|i| Point3::new((i % 20) as f64 * 0.05, (i / 20) as f64 * 0.05, 0.0))
        .collect();
    pts.push(Point3::new(0.5, 0.5, 1.0));
    let mask = statistical_outlier_mask(&pts, 10, 1.0).unwrap();
    assert!(!mask[400]);
    assert!(mask.iter().filter(|m| **m).count() > 300);

    // direct computation of the rule for the isolated point
    let mean_knn = |p: &Point3<f64>| {
        let mut d: Vec<f64> = pts.iter().map(|q| (p - q).norm()).collect();
        d.sort_by(f64::total_cmp);
        d[1..=10].iter().sum::<f64>() / 10.0
    };
    let all: Vec<f64> = pts.iter().map(mean_knn).collect();
    let mu = all.iter().sum::<f64>() / all.len() as f64;
    let sd = (all.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / all.len() as f64).sqrt();
    for (keep, m) in mask.iter().zip(&all) {
        assert_eq!(*keep, *m <= mu + sd + 1e-12);
    }

    let sweep = Sweep {
        points: pts,
        sensor_origin: Point3::new(0.5, 0.5, 0.7),
        robot_pose: Pose::new(0.5, 0.5, 0.0, 0.0),
    };
    let filtered = downsample_filter(&sweep, &FilterParams::default()).unwrap();
    assert!(filtered.points.iter().all(|p| p.z < 0.5));
    assert_eq!(filtered.sensor_origin, sweep.sensor_origin);
}
