use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenegrasp_core::floor::{
    extract_floor_vertices, fit_window_transform, floor_stats, refine_scene, FloorError, RefineConfig, RefineMode,
    WindowLattice,
};
use scenegrasp_core::geometry::shapes::{cuboid, height_grid};
use scenegrasp_core::{LabelTable, Point, RigidTransform, TriMesh, Vec3};

const FLOOR: i32 = 1;
const FURNITURE: i32 = 2;

fn labels() -> LabelTable {
    let mut t = LabelTable::new();
    t.insert("floor", FLOOR);
    t.insert("table", FURNITURE);
    t
}

fn scene_with(floor: TriMesh) -> TriMesh {
    let table = cuboid(Point::new(2.0, 2.0, 0.4), Point::new(2.8, 2.6, 0.75)).labeled(FURNITURE);
    TriMesh::merge(&[floor.labeled(FLOOR), table])
}

fn warped(x: f64, y: f64) -> f64 {
    0.12 + 0.03 * (std::f64::consts::TAU * x / 4.0).sin() * (std::f64::consts::TAU * y / 5.0).cos() + 0.01 * (x - 3.0)
}

fn plane_points(rng: &mut ChaCha8Rng, n: usize, t: &RigidTransform) -> Vec<Point> {
    // points on z = 0 pulled back through the inverse of the alignment
    let inv = t.inverse();
    (0..n)
        .map(|_| inv.apply(&Point::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), 0.0)))
        .collect()
}

fn alignment(r_x: f64, r_y: f64, t_z: f64) -> RigidTransform {
    let r = nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), r_y) * nalgebra::Rotation3::from_axis_angle(&Vec3::x_axis(), r_x);
    RigidTransform::from_rotation(r, Vec3::new(0.0, 0.0, t_z))
}

#[test]
fn floor_vertices_from_labels() {
    let quad = height_grid(0.0, 0.0, 2.0, 2.0, 1, 1, |_, _| 0.0);
    let scene = scene_with(quad);
    assert_eq!(extract_floor_vertices(&scene, &labels(), "floor").unwrap(), vec![0, 1, 2, 3]);

    let all = height_grid(0.0, 0.0, 1.0, 1.0, 3, 3, |_, _| 0.0).labeled(FLOOR);
    assert_eq!(extract_floor_vertices(&all, &labels(), "floor").unwrap(), (0..16).collect::<Vec<_>>());

    let none = cuboid(Point::origin(), Point::new(1.0, 1.0, 1.0)).labeled(FURNITURE);
    assert!(matches!(extract_floor_vertices(&none, &labels(), "floor"), Err(FloorError::NoFloorFaces)));
    assert!(matches!(extract_floor_vertices(&all, &LabelTable::new(), "floor"), Err(FloorError::NoFloorLabel(_))));
}

#[test]
fn tilted_plane_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth = alignment(2f64.to_radians(), 0.0, 0.05);
    let pts = plane_points(&mut rng, 200, &truth);
    let fit = fit_window_transform(&pts, &RefineConfig::default()).unwrap();
    assert!((fit.r_x - 2f64.to_radians()).abs() < 1e-4);
    assert!(fit.r_y.abs() < 1e-4);
    assert!((fit.t_z - 0.05).abs() < 1e-4);
    assert!(*fit.residuals.last().unwrap() < 1e-6);
    assert!(fit.residuals.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn random_transforms_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let lim = 3f64.to_radians();
    for _ in 0..50 {
        let (rx, ry, tz) = (rng.random_range(-lim..lim), rng.random_range(-lim..lim), rng.random_range(-0.2..0.2));
        let pts = plane_points(&mut rng, 100, &alignment(rx, ry, tz));
        let fit = fit_window_transform(&pts, &RefineConfig::default()).unwrap();
        assert!((fit.r_x - rx).abs() < 1e-4 && (fit.r_y - ry).abs() < 1e-4 && (fit.t_z - tz).abs() < 1e-4);
    }
}

#[test]
fn stats_match_direct_recomputation() {
    let half = height_grid(0.0, 0.0, 1.0, 1.0, 1, 1, |x, _| if x < 0.5 { 0.1 } else { -0.1 }).labeled(FLOOR);
    let s = floor_stats(&half, FLOOR).unwrap();
    assert!((s.mean_abs_dev - 0.1).abs() < 1e-15 && (s.std_dev - 0.1).abs() < 1e-15);

    let flat = height_grid(0.0, 0.0, 1.0, 1.0, 4, 4, |_, _| 0.0).labeled(FLOOR);
    let s = floor_stats(&flat, FLOOR).unwrap();
    assert_eq!((s.mean_abs_dev, s.std_dev), (0.0, 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let zs: Vec<f64> = (0..121).map(|_| rng.random_range(-0.3..0.3)).collect();
    let bumpy = height_grid(0.0, 0.0, 1.0, 1.0, 10, 10, |x, y| zs[(y * 10.0).round() as usize * 11 + (x * 10.0).round() as usize])
        .labeled(FLOOR);
    let s = floor_stats(&bumpy, FLOOR).unwrap();
    let n = zs.len() as f64;
    let mean_abs = zs.iter().map(|z| z.abs()).sum::<f64>() / n;
    let mean = zs.iter().sum::<f64>() / n;
    let std = (zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((s.mean_abs_dev - mean_abs).abs() < 1e-12);
    assert!((s.std_dev - std).abs() < 1e-12);
}

#[test]
fn flat_scene_is_unchanged() {
    let scene = scene_with(height_grid(0.0, 0.0, 4.0, 4.0, 40, 40, |_, _| 0.0));
    let r = refine_scene(&scene, FLOOR, &RefineConfig::default()).unwrap();
    for (a, b) in scene.vertices().iter().zip(r.scene.vertices()) {
        assert!((a - b).norm() < 1e-9);
    }
    assert_eq!(r.before.mean_abs_dev, 0.0);
    assert_eq!(r.after.mean_abs_dev, 0.0);
}

#[test]
fn warped_floor_is_flattened() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise: Vec<f64> = (0..61 * 61).map(|_| rng.random_range(-0.002..0.002)).collect();
    let floor = height_grid(0.0, 0.0, 6.0, 6.0, 60, 60, |x, y| {
        warped(x, y) + noise[(y * 10.0).round() as usize * 61 + (x * 10.0).round() as usize]
    });
    let scene = scene_with(floor);
    let t = std::time::Instant::now();
    let r = refine_scene(&scene, FLOOR, &RefineConfig::default()).unwrap();
    assert!(t.elapsed().as_secs_f64() < 10.0);
    assert!((r.before.mean_abs_dev - 0.12).abs() < 0.01, "{}", r.before.mean_abs_dev);
    assert!(r.after.mean_abs_dev <= 0.005, "{}", r.after.mean_abs_dev);
    assert_eq!(r.mode, RefineMode::Windowed);
    assert_eq!(r.after.per_window.len(), r.windows.len());

    // a second pass barely moves the statistic
    let again = refine_scene(&r.scene, FLOOR, &RefineConfig::default()).unwrap();
    assert!((again.after.mean_abs_dev - r.after.mean_abs_dev).abs() < 1e-6);
}

#[test]
fn single_window_equals_direct_fit() {
    let truth = alignment(0.01, -0.02, -0.07);
    let floor = height_grid(0.3, 0.3, 0.7, 0.7, 8, 8, |_, _| 0.0).transformed(&truth.inverse());
    let scene = scene_with(floor.clone());
    let r = refine_scene(&scene, FLOOR, &RefineConfig::default()).unwrap();
    assert_eq!(r.windows.len(), 1);
    let fit = fit_window_transform(floor.vertices(), &RefineConfig::default()).unwrap().to_rigid();
    for (a, b) in scene.vertices().iter().zip(r.scene.vertices()) {
        assert!((fit.apply(a) - b).norm() < 1e-9);
    }
}

#[test]
fn sparse_windows_inherit_nearest_fit() {
    // dense floor on the left, three stray vertices far to the right
    let mut floor = height_grid(0.0, 0.0, 1.0, 1.0, 10, 10, |_, _| 0.05);
    let stray = height_grid(3.0, 0.0, 3.1, 0.1, 1, 1, |_, _| 0.05);
    floor = TriMesh::merge(&[floor, stray]);
    let r = refine_scene(&floor.labeled(FLOOR), FLOOR, &RefineConfig::default()).unwrap();
    assert!(r.windows.iter().any(|w| w.inherited_from.is_some()));
    for w in &r.windows {
        if let Some(src) = w.inherited_from {
            assert!(r.windows[src].inherited_from.is_none());
            assert_eq!(w.t_z, r.windows[src].t_z);
        }
    }
    assert!(r.after.mean_abs_dev < 1e-9);
}

#[test]
fn cores_move_rigidly_and_blend_is_continuous() {
    let floor = height_grid(0.0, 0.0, 3.0, 3.0, 30, 30, |x, y| warped(x, y));
    let scene = scene_with(floor);
    let cfg = RefineConfig::default();
    let r = refine_scene(&scene, FLOOR, &cfg).unwrap();
    let pts: Vec<Point> = scene.vertices().to_vec();
    let lattice = WindowLattice::over(&pts[..31 * 31], &cfg).unwrap();
    // vertices whose blend weight is a single window keep pairwise distances
    for w in 0..lattice.len() {
        let core: Vec<usize> = (0..pts.len()).filter(|&i| lattice.weights(pts[i].x, pts[i].y) == vec![(w, 1.0)]).collect();
        for (a, &i) in core.iter().enumerate() {
            for &j in &core[a + 1..] {
                let before = (pts[i] - pts[j]).norm();
                let after = (r.scene.vertices()[i] - r.scene.vertices()[j]).norm();
                assert!((before - after).abs() < 1e-9);
            }
        }
    }
    // continuity: displacement difference of neighbours is bounded by the
    // largest difference between window transforms at those points
    let disp = |i: usize| r.scene.vertices()[i] - pts[i];
    let rigid: Vec<RigidTransform> = r.windows.iter().map(|w| w.to_rigid()).collect();
    for i in 0..31 * 31 {
        for j in [i + 1, i + 31] {
            if j >= 31 * 31 {
                continue;
            }
            let spread = |p: &Point| {
                let out: Vec<Point> = rigid.iter().map(|t| t.apply(p)).collect();
                out.iter().flat_map(|a| out.iter().map(move |b| (a - b).norm())).fold(0.0, f64::max)
            };
            let bound = spread(&pts[i]).max(spread(&pts[j])) + 0.2 * (pts[i] - pts[j]).norm();
            assert!((disp(i) - disp(j)).norm() <= bound);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refinement_never_increases_deviation(
        seed in 0u64..10_000,
        amp in 0.0f64..0.3,
        offset in -0.3f64..0.3,
        tilt in -0.2f64..0.2,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..21 * 21).map(|_| rng.random_range(-amp..=amp)).collect();
        let floor = height_grid(0.0, 0.0, 2.0, 2.0, 20, 20, |x, y| {
            offset + tilt * x + noise[(y * 10.0).round() as usize * 21 + (x * 10.0).round() as usize]
        });
        let r = refine_scene(&scene_with(floor), FLOOR, &RefineConfig::default()).unwrap();
        prop_assert!(r.after.mean_abs_dev <= r.before.mean_abs_dev);
    }
}
