use super::tribox::tri_box_overlap;
use super::{PenetrationError, VoxelGrid};
use crate::exec;
use crate::geometry::{Aabb, LabelId, TriMesh, Vec3};

/// Default ceiling on grid size (cells).
pub const DEFAULT_CELL_BUDGET: usize = 64 * 1024 * 1024;

/// Voxelize every face of `mesh` inside `region`.
pub fn voxelize(mesh: &TriMesh, region: &Aabb, voxel_size: f64) -> Result<VoxelGrid, PenetrationError> {
    voxelize_filtered(mesh, |_| true, region, voxel_size, DEFAULT_CELL_BUDGET)
}

/// Voxelize the faces accepted by `keep`. A cell is occupied iff its closed
/// box intersects at least one kept triangle.
pub fn voxelize_filtered<F>(
    mesh: &TriMesh,
    keep: F,
    region: &Aabb,
    voxel_size: f64,
    cell_budget: usize,
) -> Result<VoxelGrid, PenetrationError>
where
    F: Fn(usize) -> bool + Sync + Send,
{
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(PenetrationError::InvalidVoxelSize(voxel_size));
    }
    let ext = region.extent();
    if !(ext.x > 0.0 && ext.y > 0.0 && ext.z > 0.0) {
        return Err(PenetrationError::EmptyRegion);
    }
    let dims = [0, 1, 2].map(|a| {
        // tolerate round-off when the extent is a whole number of voxels
        let r = ext[a] / voxel_size;
        let n = if (r - r.round()).abs() <= 1e-9 * r.max(1.0) { r.round() } else { r.ceil() };
        (n as usize).max(1)
    });
    let cells = dims.iter().map(|&d| d as u128).product::<u128>();
    if cells > cell_budget as u128 {
        return Err(PenetrationError::CellBudget {
            cells,
            budget: cell_budget,
        });
    }
    let mut grid = VoxelGrid::empty(region.min, voxel_size, dims);
    let bounds = grid.bounds();
    // cells are widened by a hair so that faces lying exactly on a cell
    // boundary register on both sides despite round-off
    let slack = 1e-9 * voxel_size;

    let hits: Vec<Vec<usize>> = exec::map_range(mesh.face_count(), |f| {
        if !keep(f) {
            return Vec::new();
        }
        let tri = mesh.triangle(f);
        let tb = Aabb::from_points(&tri).unwrap();
        if !tb.overlaps(&bounds) {
            return Vec::new();
        }
        let (Some((i0, i1)), Some((j0, j1)), Some((k0, k1))) = (
            grid.touching_range(0, tb.min.x, tb.max.x),
            grid.touching_range(1, tb.min.y, tb.max.y),
            grid.touching_range(2, tb.min.z, tb.max.z),
        ) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for k in k0..=k1 {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let cb = grid.cell_bounds(i, j, k);
                    if tri_box_overlap(&cb.center(), &(cb.extent() / 2.0).add_scalar(slack), &tri) {
                        out.push(grid.linear(i, j, k));
                    }
                }
            }
        }
        out
    });
    for idx in hits.into_iter().flatten() {
        let [i, j, k] = grid.unlinear(idx);
        grid.set(i, j, k, true);
    }
    Ok(grid)
}

/// `region` grown outward to the lattice of multiples of `voxel_size`.
pub fn snap_to_lattice(region: &Aabb, voxel_size: f64) -> Aabb {
    let s = voxel_size;
    Aabb::new(
        (region.min.coords / s).map(f64::floor).scale(s).into(),
        (region.max.coords / s).map(f64::ceil).scale(s).into(),
    )
}

/// Voxelize a scene around a region, leaving out faces with the given labels
/// (the floor, usually), then apply [`downward_fill`]. The region is snapped
/// to the global voxel lattice so that grids built around different centers
/// agree on shared cells.
pub fn scene_grid(
    scene: &TriMesh,
    exclude: &[LabelId],
    region: &Aabb,
    voxel_size: f64,
    cell_budget: usize,
) -> Result<VoxelGrid, PenetrationError> {
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(PenetrationError::InvalidVoxelSize(voxel_size));
    }
    let grid = voxelize_filtered(
        scene,
        |f| !exclude.contains(&scene.face_label(f)),
        &snap_to_lattice(region, voxel_size),
        voxel_size,
        cell_budget,
    )?;
    Ok(downward_fill(&grid))
}

/// Mark every cell at or below an occupied cell in the same column.
pub fn downward_fill(grid: &VoxelGrid) -> VoxelGrid {
    let [nx, ny, _] = grid.dims();
    let tops = exec::map_range(nx * ny, |c| grid.column_top(c % nx, c / nx));
    let mut out = grid.clone();
    for (c, top) in tops.into_iter().enumerate() {
        if let Some(top) = top {
            for k in 0..top {
                out.set(c % nx, c / nx, k, true);
            }
        }
    }
    out.set_filled(true);
    out
}

/// Box of half-width `radius` around `center`, optionally clipped to `clip`.
pub fn region_around(center: &crate::geometry::Point, radius: f64, clip: Option<&Aabb>) -> Option<Aabb> {
    let r = Aabb::centered(*center, Vec3::repeat(radius));
    match clip {
        Some(c) => r.intersection(c),
        None => Some(r),
    }
}
