use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::geometry::{Aabb, LabelId, Point, RigidTransform, SpatialIndex, TriMesh, Vec3};
use crate::penetration::{region_around, scene_grid, scene_penetration_points, DEFAULT_CELL_BUDGET};

/// Contact tolerance between object and support (meters).
pub const SUPPORT_EPS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaceConfig {
    pub reach_max: f64,
    /// Minimum z of the vertex normal for a support point.
    pub normal_z_min: f64,
    pub voxel_size: f64,
    pub cell_budget: usize,
}

impl Default for PlaceConfig {
    fn default() -> Self {
        Self { reach_max: 0.8, normal_z_min: 0.8, voxel_size: 0.05, cell_budget: DEFAULT_CELL_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementResult {
    pub pose: RigidTransform,
    pub support_point: Point,
    /// Scene vertex id of the support point.
    pub support_vertex: usize,
    pub receptacle: LabelId,
    /// Center of the placed object's bounding box.
    pub object_center: Point,
    /// Placed object's lowest z minus the support z.
    pub gap: f64,
}

/// Area-weighted vertex normals over the given faces; vertices not touched
/// by any face get a zero vector.
pub fn upward_vertex_normals(mesh: &TriMesh, faces: &[usize]) -> Vec<Vec3> {
    let mut n = vec![Vec3::zeros(); mesh.vertex_count()];
    for &f in faces {
        let raw = mesh.face_normal_raw(f);
        for &v in &mesh.faces()[f] {
            n[v as usize] += raw;
        }
    }
    n.into_iter().map(|v| v.try_normalize(0.0).unwrap_or_else(Vec3::zeros)).collect()
}

fn over_triangle(p: &Point, t: &[Point; 3]) -> bool {
    let cross = |a: &Point, b: &Point| (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    let (d0, d1, d2) = (cross(&t[0], &t[1]), cross(&t[1], &t[2]), cross(&t[2], &t[0]));
    let eps = 1e-12;
    (d0 >= -eps && d1 >= -eps && d2 >= -eps) || (d0 <= eps && d1 <= eps && d2 <= eps)
}

/// Every footprint corner lies over an upward-facing receptacle face.
fn footprint_supported(scene: &TriMesh, up_faces: &[usize], placed: &Aabb) -> bool {
    let corners = [
        Point::new(placed.min.x, placed.min.y, 0.0),
        Point::new(placed.max.x, placed.min.y, 0.0),
        Point::new(placed.max.x, placed.max.y, 0.0),
        Point::new(placed.min.x, placed.max.y, 0.0),
    ];
    corners.iter().all(|c| up_faces.iter().any(|&f| over_triangle(c, &scene.triangle(f))))
}

/// Rest `object` on the highest reachable upward-facing point of the
/// receptacle. `exclude` lists labels ignored by the occupancy check
/// besides the receptacle itself (the floor).
///
/// Candidates are tried highest first (ties: nearest to `end_position`,
/// then lowest vertex id). A candidate is rejected if receptacle vertices
/// under the object footprint stand above the support by more than
/// [`SUPPORT_EPS`], if a corner of the footprint is not over an
/// upward-facing receptacle face, or if any object vertex lands in an
/// occupied voxel of the rest of the scene.
pub fn place_object(
    scene: &TriMesh,
    receptacle: LabelId,
    exclude: &[LabelId],
    end_position: &Point,
    object: &TriMesh,
    cfg: &PlaceConfig,
) -> Result<PlacementResult, SynthError> {
    let obox = object.aabb().ok_or(SynthError::EmptyObject)?;
    if !object.is_watertight() {
        return Err(SynthError::ObjectNotWatertight);
    }
    let faces = scene.faces_with_label(receptacle);
    if faces.is_empty() {
        return Err(SynthError::NoReceptacle(receptacle));
    }
    let normals = upward_vertex_normals(scene, &faces);
    let rverts = scene.vertices_of_faces(&faces);
    let index = SpatialIndex::new(rverts.iter().map(|&v| scene.vertices()[v]).collect());
    let mut cands: Vec<usize> = index
        .within_radius(end_position, cfg.reach_max)
        .into_iter()
        .map(|k| rverts[k])
        .filter(|&v| normals[v].z > cfg.normal_z_min)
        .collect();
    let verts = scene.vertices();
    cands.sort_by(|&a, &b| {
        verts[b].z
            .total_cmp(&verts[a].z)
            .then((verts[a] - end_position).norm().total_cmp(&(verts[b] - end_position).norm()))
            .then(a.cmp(&b))
    });

    let up_faces: Vec<usize> = faces.iter().copied().filter(|&f| scene.face_normal(f).z > cfg.normal_z_min).collect();
    let mut skip = exclude.to_vec();
    skip.push(receptacle);
    let ocenter = obox.center();
    let half = 0.5 * obox.extent();
    let reach = half.norm() + cfg.voxel_size * 2.0;
    for v in cands {
        let s = verts[v];
        let t = Vec3::new(s.x - ocenter.x, s.y - ocenter.y, s.z - obox.min.z);
        let placed_box = Aabb::new(obox.min + t, obox.max + t);
        // receptacle must not rise above the support under the footprint
        let blocked = rverts.iter().any(|&r| {
            let p = verts[r];
            placed_box.contains_xy(&p) && p.z <= placed_box.max.z && p.z - s.z > SUPPORT_EPS
        });
        if blocked || !footprint_supported(scene, &up_faces, &placed_box) {
            continue;
        }
        let pose = RigidTransform::from_translation(t);
        let placed = object.transformed(&pose);
        let center = placed_box.center();
        let region = region_around(&center, reach, None).expect("unclipped region");
        let grid = scene_grid(scene, &skip, &region, cfg.voxel_size, cfg.cell_budget)?;
        if scene_penetration_points(placed.vertices(), &grid)? > 0.0 {
            continue;
        }
        let low = placed.vertices().iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        return Ok(PlacementResult {
            pose,
            support_point: s,
            support_vertex: v,
            receptacle,
            object_center: center,
            gap: low - s.z,
        });
    }
    Err(SynthError::NoSupport { reach: cfg.reach_max })
}
