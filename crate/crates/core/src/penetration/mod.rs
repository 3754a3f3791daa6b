//! Voxel occupancy around objects and the penetration metrics built on it.
//!
//! Scene grids exclude the floor (floor contact is scored separately) and are
//! downward-filled: every voxel below an occupied voxel in the same column is
//! occupied too. Note that the fill also closes legroom under tables; the
//! rule is applied as-is.

mod body;
mod grid;
mod metrics;
mod tribox;
mod voxelize;

pub use body::{BodyFrame, BodyPart, PartMap};
pub use grid::{GridDump, VoxelGrid, JSON_DUMP_MAX_CELLS};
pub use metrics::{
    floor_penetration, object_penetration, pen_loss, scene_penetration, scene_penetration_points, LossKind,
    ObjectPenetration, FLOOR_EPS,
};
pub use tribox::tri_box_overlap;
pub use voxelize::{downward_fill, region_around, scene_grid, snap_to_lattice, voxelize, voxelize_filtered, DEFAULT_CELL_BUDGET};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum PenetrationError {
    #[error("voxel size must be positive and finite, got {0}")]
    InvalidVoxelSize(f64),
    #[error("voxelization region has zero volume")]
    EmptyRegion,
    #[error("grid of {cells} cells exceeds the budget of {budget}; use a coarser voxel size")]
    CellBudget { cells: u128, budget: usize },
    #[error("grid has not been downward-filled")]
    GridNotFilled,
    #[error("body frame has no vertices")]
    EmptyBody,
    #[error("body frame has no foot vertices")]
    NoFootVertices,
    #[error("body frame has no hand vertices")]
    NoHandVertices,
    #[error("object mesh is not watertight; signed distance is undefined")]
    NotWatertight,
    #[error("invalid part map: {0}")]
    PartMap(String),
    #[error("invalid grid file: {0}")]
    GridFormat(String),
    #[error("grid has {0} cells; the JSON dump is limited to 32^3")]
    TooLargeForDump(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Voxelization settings for penetration scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenConfig {
    /// Edge length of a voxel (meters).
    pub voxel_size: f64,
    /// Half-width of the box voxelized around the object (meters).
    pub region_radius: f64,
    pub clip_to_scene: bool,
    pub cell_budget: usize,
}

impl Default for PenConfig {
    fn default() -> Self {
        Self {
            voxel_size: 0.05,
            region_radius: 2.0,
            clip_to_scene: true,
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }
}

impl PenConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.voxel_size > 0.0 && self.region_radius > 0.0 && self.cell_budget > 0) {
            return Err("pen: voxel_size, region_radius and cell_budget must be positive".into());
        }
        Ok(())
    }
}
