//! Synthesis and evaluation toolkit for scene-aware full-body grasping data.
//!
//! - [`geometry`]: meshes, OBJ/PLY I/O, KD-tree, signed distance queries
//! - [`floor`]: piecewise rigid alignment of scanned floors to z = 0
//! - [`penetration`]: voxel occupancy with downward fill and penetration metrics
//! - [`contact`]: contact annotation, precision/recall/F1 and table aggregation
//! - [`synth`]: walk alignment, object placement, pelvis target augmentation
//! - [`exec`]: data-parallel helpers with a sequential fallback

pub mod contact;
pub mod exec;
pub mod floor;
pub mod geometry;
pub mod penetration;
pub mod synth;

pub use geometry::{Aabb, LabelTable, Point, RigidTransform, TriMesh, Vec3};
