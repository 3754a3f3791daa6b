use serde::{Deserialize, Serialize};

use super::{BodyFrame, PenetrationError, VoxelGrid};
use crate::exec;
use crate::geometry::{MeshQuery, Point};

/// Feet lower than this below z = 0 count as sinking into the floor.
pub const FLOOR_EPS: f64 = 1e-6;

fn require_filled(grid: &VoxelGrid) -> Result<(), PenetrationError> {
    if grid.is_filled() {
        Ok(())
    } else {
        Err(PenetrationError::GridNotFilled)
    }
}

/// Fraction of `vertices` lying in occupied cells. Vertices outside the grid
/// are free. The grid must be downward-filled.
pub fn scene_penetration_points(vertices: &[Point], grid: &VoxelGrid) -> Result<f64, PenetrationError> {
    if vertices.is_empty() {
        return Err(PenetrationError::EmptyBody);
    }
    require_filled(grid)?;
    let hits = exec::count(vertices, |v| grid.occupied_at(v));
    Ok(hits as f64 / vertices.len() as f64)
}

pub fn scene_penetration(body: &BodyFrame, grid: &VoxelGrid) -> Result<f64, PenetrationError> {
    scene_penetration_points(body.vertices(), grid)
}

/// Fraction of foot vertices strictly below the floor plane.
pub fn floor_penetration(body: &BodyFrame) -> Result<f64, PenetrationError> {
    let feet = body.foot_ids();
    if feet.is_empty() {
        return Err(PenetrationError::NoFootVertices);
    }
    let below = feet.iter().filter(|&&i| body.vertices()[i].z < -FLOOR_EPS).count();
    Ok(below as f64 / feet.len() as f64)
}

/// Hand-object penetration summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectPenetration {
    /// Mean signed distance over hand vertices (meters; negative = inside).
    pub mean_sdf: f64,
    /// Hand vertices with negative signed distance.
    pub penetrating: usize,
    pub hand_vertices: usize,
}

pub fn object_penetration(body: &BodyFrame, object: &MeshQuery) -> Result<ObjectPenetration, PenetrationError> {
    if !object.is_watertight() {
        return Err(PenetrationError::NotWatertight);
    }
    let hands = body.hand_ids();
    if hands.is_empty() {
        return Err(PenetrationError::NoHandVertices);
    }
    let sdf = exec::map(&hands, |&i| object.signed_distance(&body.vertices()[i]).map(|s| s.distance));
    let sdf: Vec<f64> = sdf.into_iter().collect::<Result<_, _>>()?;
    // sequential sum keeps the result independent of thread count
    let total: f64 = sdf.iter().sum();
    Ok(ObjectPenetration {
        mean_sdf: total / sdf.len() as f64,
        penetrating: sdf.iter().filter(|&&d| d < 0.0).count(),
        hand_vertices: sdf.len(),
    })
}

/// Form of the penetration loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean of `[vertex cell occupied]`.
    #[default]
    Indicator,
    /// Mean distance from each penetrating vertex up to the bottom of the
    /// first free cell above it in its column; free vertices contribute 0.
    DepthWeighted,
}

pub fn pen_loss(vertices: &[Point], grid: &VoxelGrid, kind: LossKind) -> Result<f64, PenetrationError> {
    match kind {
        LossKind::Indicator => scene_penetration_points(vertices, grid),
        LossKind::DepthWeighted => {
            if vertices.is_empty() {
                return Err(PenetrationError::EmptyBody);
            }
            require_filled(grid)?;
            let depths = exec::map(vertices, |v| match grid.cell_of(v) {
                Some([i, j, k]) if grid.get(i, j, k) => {
                    let nz = grid.dims()[2];
                    let free = (k..nz).find(|&kk| !grid.get(i, j, kk)).unwrap_or(nz);
                    let top = grid.origin().z + free as f64 * grid.voxel_size();
                    top - v.z
                }
                _ => 0.0,
            });
            Ok(depths.iter().sum::<f64>() / vertices.len() as f64)
        }
    }
}
