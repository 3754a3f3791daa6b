//! Scene synthesis: walk alignment, object placement on receptacles and
//! sampling of alternative grasp-target pelvis positions.

mod augment;
mod place;
mod walk;

pub use augment::{
    augment_pelvis, forward_grasp_target, room_is_free, standing_room, AugmentConfig, AugmentContext, AugmentResult,
    FilterReport, PelvisCandidate,
};
pub use place::{place_object, upward_vertex_normals, PlaceConfig, PlacementResult};
pub use walk::{
    align_walk, AlignCandidate, AlignConfig, AlignResult, Trajectory, Violations, WalkAligner,
};

use thiserror::Error;

use crate::geometry::{GeometryError, LabelId};
use crate::penetration::PenetrationError;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("scene has no faces with receptacle label {0}")]
    NoReceptacle(LabelId),
    #[error("object mesh is empty")]
    EmptyObject,
    #[error("object mesh is not watertight")]
    ObjectNotWatertight,
    #[error("no upward-facing receptacle point within {reach} m of the end position")]
    NoSupport { reach: f64 },
    #[error("invalid trajectory: {0}")]
    BadTrajectory(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "no feasible walk alignment among {candidates} candidates; best infeasible: \
         {} frames off the floor, {} colliding frames, {:.3} m beyond reach",
        best.out_of_bounds_frames, best.colliding_frames, best.reach_excess
    )]
    NoSolution { candidates: usize, best: Violations },
    #[error(transparent)]
    Penetration(#[from] PenetrationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
