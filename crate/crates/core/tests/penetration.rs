use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenegrasp_core::geometry::shapes::{cuboid, icosphere};
use scenegrasp_core::geometry::MeshQuery;
use scenegrasp_core::penetration::{
    downward_fill, floor_penetration, object_penetration, pen_loss, scene_grid, scene_penetration, voxelize, BodyFrame,
    BodyPart, LossKind, PenetrationError, VoxelGrid, DEFAULT_CELL_BUDGET,
};
use scenegrasp_core::{Aabb, Point, TriMesh, Vec3};

/// Generic 13-axis separating-axis test, written independently of the
/// production overlap routine.
fn oracle_overlap(bmin: &Point, bmax: &Point, tri: &[Point; 3]) -> bool {
    let c = nalgebra::center(bmin, bmax);
    let h = (bmax - bmin) / 2.0;
    let e = [tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2]];
    let mut axes: Vec<Vec3> = vec![Vec3::x(), Vec3::y(), Vec3::z(), e[0].cross(&e[1])];
    for ei in &e {
        for u in [Vec3::x(), Vec3::y(), Vec3::z()] {
            axes.push(ei.cross(&u));
        }
    }
    for a in axes {
        if a.norm_squared() < 1e-24 {
            continue;
        }
        let r = h.x * a.x.abs() + h.y * a.y.abs() + h.z * a.z.abs();
        let pc = a.dot(&c.coords);
        let ps: Vec<f64> = tri.iter().map(|p| a.dot(&p.coords)).collect();
        let lo = ps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo > pc + r || hi < pc - r {
            return false;
        }
    }
    true
}

fn oracle_grid(mesh: &TriMesh, origin: Point, s: f64, dims: [usize; 3]) -> Vec<bool> {
    let mut out = Vec::new();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let lo = Point::new(origin.x + i as f64 * s, origin.y + j as f64 * s, origin.z + k as f64 * s);
                let hi = Point::new(
                    origin.x + (i + 1) as f64 * s,
                    origin.y + (j + 1) as f64 * s,
                    origin.z + (k + 1) as f64 * s,
                );
                out.push((0..mesh.face_count()).any(|f| oracle_overlap(&lo, &hi, &mesh.triangle(f))));
            }
        }
    }
    out
}

fn column_fill_oracle(g: &VoxelGrid) -> Vec<bool> {
    let [nx, ny, nz] = g.dims();
    let mut out = vec![false; nx * ny * nz];
    for i in 0..nx {
        for j in 0..ny {
            let mut seen = false;
            for k in (0..nz).rev() {
                seen |= g.get(i, j, k);
                out[i + nx * (j + ny * k)] = seen;
            }
        }
    }
    out
}

fn grid_bits(g: &VoxelGrid) -> Vec<bool> {
    let [nx, ny, nz] = g.dims();
    let mut out = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                out.push(g.get(i, j, k));
            }
        }
    }
    out
}

fn random_soup(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> TriMesh {
    let mut v = Vec::new();
    let mut f = Vec::new();
    for t in 0..n {
        let c = Point::new(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi));
        for _ in 0..3 {
            v.push(c + Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)));
        }
        let b = (3 * t) as u32;
        f.push([b, b + 1, b + 2]);
    }
    TriMesh::new(v, f, None).unwrap()
}

#[test]
fn empty_scene_voxelizes_empty() {
    let region = Aabb::new(Point::origin(), Point::new(1.0, 1.0, 1.0));
    let g = voxelize(&TriMesh::from_vertices(vec![]), &region, 0.1).unwrap();
    assert_eq!(g.dims(), [10, 10, 10]);
    assert!(g.is_empty());
    assert!(downward_fill(&g).is_empty());
}

#[test]
fn horizontal_quad_occupies_one_layer() {
    let quad = TriMesh::new(
        vec![
            Point::new(0.05, 0.05, 0.125),
            Point::new(0.95, 0.05, 0.125),
            Point::new(0.95, 0.95, 0.125),
            Point::new(0.05, 0.95, 0.125),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
        None,
    )
    .unwrap();
    let region = Aabb::new(Point::origin(), Point::new(1.0, 1.0, 0.5));
    let g = voxelize(&quad, &region, 0.1).unwrap();
    assert_eq!(g.dims(), [10, 10, 5]);
    let cells: Vec<[usize; 3]> = g.occupied_cells().collect();
    assert_eq!(cells.len(), 100);
    assert!(cells.iter().all(|c| c[2] == 1));
    let filled = downward_fill(&g);
    assert_eq!(filled.occupied_count(), 200);
    assert!(filled.is_filled());
}

#[test]
fn cell_budget_is_enforced() {
    let region = Aabb::new(Point::origin(), Point::new(100.0, 100.0, 100.0));
    let err = voxelize(&TriMesh::from_vertices(vec![]), &region, 0.01).unwrap_err();
    assert!(matches!(err, PenetrationError::CellBudget { .. }));
    let flat = Aabb::new(Point::origin(), Point::new(1.0, 1.0, 0.0));
    assert!(matches!(
        voxelize(&TriMesh::from_vertices(vec![]), &flat, 0.1),
        Err(PenetrationError::EmptyRegion)
    ));
}

#[test]
fn voxelize_and_fill_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..100 {
        let dims = [rng.random_range(1..=32), rng.random_range(1..=32), rng.random_range(1..=32)];
        let s = rng.random_range(0.03..0.2);
        let origin = Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let region = Aabb::new(
            origin,
            origin + Vec3::new(dims[0] as f64 * s, dims[1] as f64 * s, dims[2] as f64 * s),
        );
        let n_tris = rng.random_range(0..12);
        let soup = random_soup(&mut rng, n_tris, -1.5, 3.5);
        let g = voxelize(&soup, &region, s).unwrap();
        assert_eq!(g.dims(), dims, "trial {trial}");
        assert_eq!(grid_bits(&g), oracle_grid(&soup, origin, s, dims), "trial {trial}");
        let filled = downward_fill(&g);
        assert_eq!(grid_bits(&filled), column_fill_oracle(&g), "trial {trial}");
        assert_eq!(downward_fill(&filled), filled, "idempotence, trial {trial}");
        assert!(filled.occupied_count() >= g.occupied_count());
    }
}

#[test]
fn single_cell_fills_its_column() {
    let mut g = VoxelGrid::empty(Point::origin(), 1.0, [3, 3, 5]);
    g.set(1, 2, 3, true);
    let f = downward_fill(&g);
    let cells: Vec<[usize; 3]> = f.occupied_cells().collect();
    assert_eq!(cells, vec![[1, 2, 0], [1, 2, 1], [1, 2, 2], [1, 2, 3]]);
}

fn body(vertices: Vec<Point>, parts: Vec<BodyPart>) -> BodyFrame {
    BodyFrame::with_derived_pelvis(vertices, parts).unwrap()
}

#[test]
fn scene_penetration_fixtures() {
    let mut g = VoxelGrid::empty(Point::origin(), 0.1, [10, 10, 10]);
    g.set(2, 2, 5, true);
    let g = downward_fill(&g);
    // 3 of 10 vertices in the filled column, one outside the grid entirely
    let mut v: Vec<Point> = (0..3).map(|k| Point::new(0.25, 0.25, 0.05 + 0.2 * k as f64)).collect();
    v.extend((0..6).map(|i| Point::new(0.75, 0.05 + 0.1 * i as f64, 0.3)));
    v.push(Point::new(5.0, 5.0, 5.0));
    let b = body(v, vec![BodyPart::Other; 10]);
    assert_eq!(scene_penetration(&b, &g).unwrap(), 0.3);
    assert_eq!(pen_loss(b.vertices(), &g, LossKind::Indicator).unwrap(), 0.3);

    let clear = body(vec![Point::new(0.75, 0.75, 0.5)], vec![BodyPart::Other]);
    assert_eq!(scene_penetration(&clear, &g).unwrap(), 0.0);
    assert_eq!(pen_loss(clear.vertices(), &g, LossKind::DepthWeighted).unwrap(), 0.0);

    let unfilled = VoxelGrid::empty(Point::origin(), 0.1, [2, 2, 2]);
    assert!(matches!(scene_penetration(&clear, &unfilled), Err(PenetrationError::GridNotFilled)));
    let empty = body(vec![], vec![]);
    assert!(matches!(scene_penetration(&empty, &g), Err(PenetrationError::EmptyBody)));
}

#[test]
fn depth_weighted_loss_under_tabletop() {
    // tabletop slab at z ∈ [0.70, 0.75] over a small footprint; grid aligned
    // so the slab top is a cell boundary
    let top = cuboid(Point::new(0.0, 0.0, 0.70), Point::new(0.4, 0.4, 0.75));
    let region = Aabb::new(Point::new(-0.025, -0.025, 0.0), Point::new(0.625, 0.625, 1.0));
    let g = downward_fill(&voxelize(&top, &region, 0.05).unwrap());
    let [i, j, _] = g.cell_of(&Point::new(0.2, 0.2, 0.0)).unwrap();
    let top_k = g.column_top(i, j).unwrap();
    let column_top_z = g.origin().z + (top_k + 1) as f64 * g.voxel_size();
    // vertex 0.10 m below the column's occupied top
    let v = Point::new(0.2, 0.2, column_top_z - 0.10);
    let loss = pen_loss(&[v], &g, LossKind::DepthWeighted).unwrap();
    assert!((loss - 0.10).abs() < 1e-12, "{loss}");
}

#[test]
fn floor_penetration_counts_feet_below_plane() {
    let mut v = Vec::new();
    let mut parts = Vec::new();
    for i in 0..100 {
        v.push(Point::new(i as f64 * 0.01, 0.0, if i < 29 { -0.01 } else { 0.0 }));
        parts.push(BodyPart::Foot);
    }
    // non-foot vertices below the floor are ignored
    v.push(Point::new(0.0, 0.0, -1.0));
    parts.push(BodyPart::HandLeft);
    let b = body(v, parts);
    assert_eq!(floor_penetration(&b).unwrap(), 0.29);
    assert_eq!(floor_penetration(&b.translated(Vec3::new(0.0, 0.0, 0.5))).unwrap(), 0.0);

    let no_feet = body(vec![Point::origin()], vec![BodyPart::Other]);
    assert!(matches!(floor_penetration(&no_feet), Err(PenetrationError::NoFootVertices)));
}

#[test]
fn object_penetration_mean_sdf() {
    let cube = cuboid(Point::new(-0.5, -0.5, -0.5), Point::new(0.5, 0.5, 0.5));
    let q = MeshQuery::new(&cube);
    // hand vertices at signed distances -0.02 and +0.04
    let b = body(
        vec![Point::new(0.48, 0.0, 0.0), Point::new(0.0, 0.54, 0.0), Point::new(9.0, 9.0, 9.0)],
        vec![BodyPart::HandRight, BodyPart::HandLeft, BodyPart::Foot],
    );
    let r = object_penetration(&b, &q).unwrap();
    assert!((r.mean_sdf - 0.01).abs() < 1e-12);
    assert_eq!((r.penetrating, r.hand_vertices), (1, 2));

    let far = body(vec![Point::new(0.7, 0.0, 0.0), Point::new(0.0, 0.0, -0.8)], vec![BodyPart::HandRight; 2]);
    assert!(object_penetration(&far, &q).unwrap().mean_sdf >= 0.1);

    let (open, _) = cube.submesh(&[0, 1, 2]);
    assert!(matches!(
        object_penetration(&b, &MeshQuery::new(&open)),
        Err(PenetrationError::NotWatertight)
    ));
}

#[test]
fn object_penetration_random_vs_brute_force() {
    let cube = cuboid(Point::new(-0.5, -0.5, -0.5), Point::new(0.5, 0.5, 0.5));
    let q = MeshQuery::new(&cube);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let n = rng.random_range(1..60);
        let v: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)))
            .collect();
        // analytic box SDF
        let expected: f64 = v
            .iter()
            .map(|p| {
                let d = p.coords.abs() - Vec3::repeat(0.5);
                let outside = d.sup(&Vec3::zeros()).norm();
                let inside = d.max().min(0.0);
                outside + inside
            })
            .sum::<f64>()
            / n as f64;
        let b = body(v, vec![BodyPart::HandRight; n]);
        let got = object_penetration(&b, &q).unwrap().mean_sdf;
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
    }
}

#[test]
fn halving_voxel_size_keeps_colliding_vertices() {
    let obstacle = TriMesh::merge(&[
        cuboid(Point::new(0.3, 0.3, 0.0), Point::new(0.9, 0.7, 0.8)),
        icosphere(Point::new(1.5, 1.5, 1.2), 0.3, 2),
    ]);
    let region = Aabb::new(Point::origin(), Point::new(2.0, 2.0, 2.0));
    let coarse = downward_fill(&voxelize(&obstacle, &region, 0.1).unwrap());
    let fine = downward_fill(&voxelize(&obstacle, &region, 0.05).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q = MeshQuery::new(&cuboid(Point::new(0.3, 0.3, 0.0), Point::new(0.9, 0.7, 0.8)));
    for _ in 0..500 {
        let p = Point::new(rng.random_range(0.3..0.9), rng.random_range(0.3..0.7), rng.random_range(0.0..0.8));
        assert!(q.signed_distance(&p).unwrap().distance <= 0.0);
        assert!(coarse.occupied_at(&p) && fine.occupied_at(&p), "{p:?} {:?} {:?}", coarse.cell_of(&p), fine.cell_of(&p));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scene_penetration_invariances(
        cells in prop::collection::vec((0usize..8, 0usize..8, 0usize..8), 0..40),
        pts in prop::collection::vec((-0.1f64..0.9, -0.1f64..0.9, -0.1f64..0.9), 1..50),
        shift in (-5i32..5, -5i32..5, -5i32..5),
        seed in 0u64..1000,
    ) {
        let s = 0.1;
        let mut g = VoxelGrid::empty(Point::origin(), s, [8, 8, 8]);
        for (i, j, k) in cells { g.set(i, j, k, true); }
        let g = downward_fill(&g);
        let verts: Vec<Point> = pts.iter().map(|&(x, y, z)| Point::new(x, y, z)).collect();
        let b = body(verts.clone(), vec![BodyPart::Other; verts.len()]);
        let base = scene_penetration(&b, &g).unwrap();

        let mut perm: Vec<usize> = (0..verts.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..perm.len()).rev() { perm.swap(i, rng.random_range(0..=i)); }
        prop_assert_eq!(scene_penetration(&b.permuted(&perm), &g).unwrap(), base);

        // shift grid and body by whole cells (exact in binary at s = 0.125)
        let s2 = 0.125;
        let mut g2 = VoxelGrid::empty(Point::origin(), s2, [8, 8, 8]);
        for c in g.occupied_cells() { g2.set(c[0], c[1], c[2], true); }
        let g2 = downward_fill(&g2);
        let scaled: Vec<Point> = verts.iter().map(|p| Point::from(p.coords * 1.25)).collect();
        let b2 = body(scaled.clone(), vec![BodyPart::Other; scaled.len()]);
        let off = Vec3::new(shift.0 as f64 * s2, shift.1 as f64 * s2, shift.2 as f64 * s2);
        let mut g3 = VoxelGrid::empty(Point::from(off), s2, [8, 8, 8]);
        for c in g2.occupied_cells() { g3.set(c[0], c[1], c[2], true); }
        let g3 = downward_fill(&g3);
        prop_assert_eq!(
            scene_penetration(&b2.translated(off), &g3).unwrap(),
            scene_penetration(&b2, &g2).unwrap()
        );
    }

    #[test]
    fn fill_is_monotone_and_idempotent(cells in prop::collection::vec((0usize..6, 0usize..6, 0usize..6), 0..50)) {
        let mut g = VoxelGrid::empty(Point::origin(), 1.0, [6, 6, 6]);
        for &(i, j, k) in &cells { g.set(i, j, k, true); }
        let f = downward_fill(&g);
        for &(i, j, k) in &cells { prop_assert!(f.get(i, j, k)); }
        prop_assert!(f.occupied_count() >= g.occupied_count());
        prop_assert_eq!(downward_fill(&f), f);
    }

    #[test]
    fn scene_grids_share_the_lattice(
        seed in 0u64..1000,
        a in prop::array::uniform4(0.0f64..0.4),
        b in prop::array::uniform4(0.0f64..0.4),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = random_soup(&mut rng, 6, 0.0, 1.0);
        let region = |m: [f64; 4]| Aabb::new(Point::new(0.3 - m[0], 0.3 - m[1], -0.2), Point::new(0.7 + m[2], 0.7 + m[3], 1.2));
        let ga = scene_grid(&mesh, &[], &region(a), 0.1, DEFAULT_CELL_BUDGET).unwrap();
        let gb = scene_grid(&mesh, &[], &region(b), 0.1, DEFAULT_CELL_BUDGET).unwrap();
        for [i, j, k] in ga.occupied_cells().collect::<Vec<_>>() {
            let c = ga.cell_bounds(i, j, k).center();
            if gb.bounds().contains(&c) {
                prop_assert!(gb.occupied_at(&c));
            }
        }
        for [i, j, k] in gb.occupied_cells().collect::<Vec<_>>() {
            let c = gb.cell_bounds(i, j, k).center();
            if ga.bounds().contains(&c) {
                prop_assert!(ga.occupied_at(&c));
            }
        }
    }
}
