//! Parallel vs forced-sequential execution of the data-parallel kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use scenegrasp_core::exec;
use scenegrasp_core::floor::{refine_scene, RefineConfig};
use scenegrasp_core::geometry::shapes::{height_grid, icosphere, table};
use scenegrasp_core::geometry::MeshQuery;
use scenegrasp_core::penetration::{scene_grid, scene_penetration_points, voxelize, DEFAULT_CELL_BUDGET};
use scenegrasp_core::synth::{augment_pelvis, AugmentConfig, AugmentContext};
use scenegrasp_core::{Aabb, Point, TriMesh};

const MODES: [(&str, bool); 2] = [("parallel", false), ("sequential", true)];

fn scene() -> TriMesh {
    let floor = height_grid(-3.0, -3.0, 3.0, 3.0, 60, 60, |x, y| 0.1 + 0.02 * (x * 1.3).sin() * (y * 0.9).cos()).labeled(0);
    let furniture = TriMesh::merge(&[
        table(0.0, 0.0, 0.5, 0.4, 0.75, 24),
        table(1.8, -1.2, 0.4, 0.4, 0.9, 16),
        icosphere(Point::new(-1.5, 1.5, 0.6), 0.5, 3),
    ])
    .labeled(1);
    TriMesh::merge(&[floor, furniture])
}

fn bench_modes(c: &mut Criterion) {
    let scene = scene();
    let region = Aabb::new(Point::new(-3.0, -3.0, 0.0), Point::new(3.0, 3.0, 2.0));
    let grid = scene_grid(&scene, &[0], &region, 0.05, DEFAULT_CELL_BUDGET).unwrap();
    let body: Vec<Point> = icosphere(Point::new(0.3, 0.2, 0.8), 0.6, 5).vertices().to_vec();
    let sphere = MeshQuery::new(&icosphere(Point::new(0.0, 0.0, 0.8), 0.1, 3));
    let rb = Aabb::new(Point::new(-0.5, -0.4, 0.0), Point::new(0.5, 0.4, 0.75));
    let ctx = AugmentContext {
        grid: &grid,
        scene_bounds: scene.aabb().unwrap(),
        receptacle_bounds: rb,
        object_center: Point::new(0.0, 0.0, 0.8),
    };

    let mut g = c.benchmark_group("exec");
    g.sample_size(10);
    for (name, seq) in MODES {
        exec::set_sequential(seq);
        g.bench_with_input(BenchmarkId::new("voxelize", name), &seq, |b, _| {
            b.iter(|| voxelize(&scene, &region, 0.05).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("scene_penetration", name), &seq, |b, _| {
            b.iter(|| scene_penetration_points(&body, &grid).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("signed_distance", name), &seq, |b, _| {
            b.iter(|| exec::map(&body, |p| sphere.signed_distance(p).unwrap().distance))
        });
        g.bench_with_input(BenchmarkId::new("refine_floor", name), &seq, |b, _| {
            b.iter(|| refine_scene(&scene, 0, &RefineConfig::default()).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("augment_pelvis", name), &seq, |b, _| {
            b.iter(|| augment_pelvis(&ctx, &Point::new(-0.9, 0.0, 0.9), &AugmentConfig::default(), 7).unwrap())
        });
    }
    exec::set_sequential(false);
    g.finish();
}

criterion_group!(benches, bench_modes);
criterion_main!(benches);
