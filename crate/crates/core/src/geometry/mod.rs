//! Meshes, rigid transforms, spatial indexing and distance queries.
//!
//! Everything here works in meters with z up; the floor is the z = 0 plane.

mod aabb;
mod bvh;
mod distance;
pub mod io;
mod kdtree;
mod mesh;
mod sdf;
pub mod shapes;
mod transform;

pub use aabb::Aabb;
pub use distance::{closest_point_on_triangle, point_triangle_distance, ray_triangle, RayHit};
pub use io::{load_mesh, write_mesh, MeshFormat};
pub use kdtree::SpatialIndex;
pub use mesh::{LabelId, LabelTable, TriMesh, UNLABELED};
pub use sdf::{signed_distance, MeshQuery, SignedDistance};
pub use transform::RigidTransform;

pub type Point = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{format} parse error at {location}: {message}")]
    Parse {
        format: &'static str,
        location: String,
        message: String,
    },
    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("face {face} is degenerate (repeated vertex index)")]
    DegenerateFace { face: usize },
    #[error("face label count {labels} does not match face count {faces}")]
    LabelCount { labels: usize, faces: usize },
    #[error("rotation is not orthonormal with determinant +1")]
    NotARotation,
    #[error("spatial index is empty")]
    EmptyIndex,
    #[error("query point has a non-finite coordinate")]
    NonFinite,
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("unknown label name `{0}`")]
    UnknownLabel(String),
}
