use super::bvh::Bvh;
use super::{GeometryError, Point, TriMesh, Vec3};

/// Barycentric slack (meters) under which a ray crossing counts as grazing.
const GRAZE_EPS: f64 = 1e-9;

/// Primary +x ray followed by fixed pseudo-random fallback directions.
const RAY_DIRECTIONS: [[f64; 3]; 9] = [
    [1.0, 0.0, 0.0],
    [0.267_261_24, 0.534_522_48, 0.801_783_73],
    [-0.617_213_4, 0.771_516_75, -0.154_303_35],
    [0.408_248_29, -0.408_248_29, 0.816_496_58],
    [-0.801_783_73, -0.267_261_24, 0.534_522_48],
    [0.123_091_49, 0.984_731_93, -0.123_091_49],
    [-0.316_227_77, 0.0, -0.948_683_3],
    [0.707_106_78, 0.5, -0.5],
    [-0.57735027, -0.57735027, -0.57735027],
];

/// Signed distance query result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedDistance {
    /// Negative inside the surface.
    pub distance: f64,
    /// False when the mesh is open; the sign is then unreliable.
    pub watertight: bool,
}

/// Distance and inside/outside queries against one triangle mesh.
#[derive(Debug, Clone)]
pub struct MeshQuery {
    bvh: Bvh,
    watertight: bool,
}

impl MeshQuery {
    pub fn new(mesh: &TriMesh) -> Self {
        let tris = (0..mesh.face_count()).map(|f| mesh.triangle(f)).collect();
        Self {
            bvh: Bvh::new(tris),
            watertight: mesh.is_watertight(),
        }
    }

    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn triangle_count(&self) -> usize {
        self.bvh.triangles().len()
    }

    /// Minimum distance from `p` to the surface.
    pub fn distance(&self, p: &Point) -> Result<f64, GeometryError> {
        if !p.coords.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        self.bvh.closest(p).map(|(d, _)| d).ok_or(GeometryError::EmptyMesh)
    }

    /// Ray-parity inside test. A clean primary ray decides alone; when it
    /// grazes an edge or vertex, the first three clean rays vote.
    pub fn is_inside(&self, p: &Point) -> bool {
        let mut votes = Vec::with_capacity(3);
        let mut fallback = None;
        for (k, d) in RAY_DIRECTIONS.iter().enumerate() {
            let dir = Vec3::new(d[0], d[1], d[2]);
            let hits = self.bvh.ray_hits(p, &dir, GRAZE_EPS);
            let odd = hits.len() % 2 == 1;
            if hits.iter().any(|h| h.grazing) {
                fallback.get_or_insert(odd);
                continue;
            }
            if k == 0 {
                return odd;
            }
            votes.push(odd);
            if votes.len() == 3 {
                break;
            }
        }
        match votes.len() {
            0 => fallback.unwrap_or(false),
            n => votes.iter().filter(|&&v| v).count() * 2 > n,
        }
    }

    pub fn signed_distance(&self, p: &Point) -> Result<SignedDistance, GeometryError> {
        let d = self.distance(p)?;
        let distance = if d > 0.0 && self.is_inside(p) { -d } else { d };
        Ok(SignedDistance {
            distance,
            watertight: self.watertight,
        })
    }
}

/// One-shot signed distance; build a [`MeshQuery`] for repeated queries.
pub fn signed_distance(mesh: &TriMesh, p: &Point) -> Result<SignedDistance, GeometryError> {
    MeshQuery::new(mesh).signed_distance(p)
}
