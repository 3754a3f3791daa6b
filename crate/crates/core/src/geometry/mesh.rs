use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Aabb, GeometryError, Point, RigidTransform, Vec3};

/// Integer semantic id attached to a face.
pub type LabelId = i32;

/// Marker for faces without a semantic label.
pub const UNLABELED: LabelId = -1;

/// Indexed triangle mesh with optional per-face semantic labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    faces: Vec<[u32; 3]>,
    face_labels: Option<Vec<LabelId>>,
}

impl TriMesh {
    pub fn new(
        vertices: Vec<Point>,
        faces: Vec<[u32; 3]>,
        face_labels: Option<Vec<LabelId>>,
    ) -> Result<Self, GeometryError> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i as usize >= n {
                    return Err(GeometryError::IndexOutOfRange {
                        face: fi,
                        index: i as usize,
                        vertex_count: n,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(GeometryError::DegenerateFace { face: fi });
            }
        }
        if let Some(labels) = &face_labels {
            if labels.len() != faces.len() {
                return Err(GeometryError::LabelCount {
                    labels: labels.len(),
                    faces: faces.len(),
                });
            }
        }
        Ok(Self {
            vertices,
            faces,
            face_labels,
        })
    }

    /// A mesh with vertices only (body frames, point clouds).
    pub fn from_vertices(vertices: Vec<Point>) -> Self {
        Self {
            vertices,
            faces: Vec::new(),
            face_labels: None,
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face_labels(&self) -> Option<&[LabelId]> {
        self.face_labels.as_deref()
    }

    pub fn face_label(&self, face: usize) -> LabelId {
        self.face_labels.as_ref().map_or(UNLABELED, |l| l[face])
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, face: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized face normal (length = twice the area).
    pub fn face_normal_raw(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_normal(&self, face: usize) -> Vec3 {
        let n = self.face_normal_raw(face);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriMesh {
        Self {
            vertices: self.vertices.iter().map(|v| t.apply(v)).collect(),
            faces: self.faces.clone(),
            face_labels: self.face_labels.clone(),
        }
    }

    /// Same topology with replaced vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> TriMesh {
        assert_eq!(vertices.len(), self.vertices.len());
        Self {
            vertices,
            faces: self.faces.clone(),
            face_labels: self.face_labels.clone(),
        }
    }

    /// Indices of faces carrying `label`.
    pub fn faces_with_label(&self, label: LabelId) -> Vec<usize> {
        match &self.face_labels {
            Some(l) => (0..self.faces.len()).filter(|&f| l[f] == label).collect(),
            None => Vec::new(),
        }
    }

    /// Submesh made of the given faces. Vertices keep their relative order;
    /// the second value maps new vertex ids back to ids in `self`.
    pub fn submesh(&self, faces: &[usize]) -> (TriMesh, Vec<usize>) {
        let mut used = vec![false; self.vertices.len()];
        for &f in faces {
            for &i in &self.faces[f] {
                used[i as usize] = true;
            }
        }
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut back = Vec::new();
        for (i, &u) in used.iter().enumerate() {
            if u {
                remap[i] = back.len() as u32;
                back.push(i);
            }
        }
        let vertices = back.iter().map(|&i| self.vertices[i]).collect();
        let new_faces = faces
            .iter()
            .map(|&f| self.faces[f].map(|i| remap[i as usize]))
            .collect();
        let labels = self
            .face_labels
            .as_ref()
            .map(|l| faces.iter().map(|&f| l[f]).collect());
        (
            TriMesh {
                vertices,
                faces: new_faces,
                face_labels: labels,
            },
            back,
        )
    }

    /// Concatenate meshes; labels default to [`UNLABELED`] where absent.
    pub fn merge(parts: &[TriMesh]) -> TriMesh {
        let any_labels = parts.iter().any(|m| m.face_labels.is_some());
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut labels = Vec::new();
        for m in parts {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            faces.extend(m.faces.iter().map(|f| f.map(|i| i + base)));
            if any_labels {
                labels.extend((0..m.faces.len()).map(|f| m.face_label(f)));
            }
        }
        TriMesh {
            vertices,
            faces,
            face_labels: any_labels.then_some(labels),
        }
    }

    /// Returns a copy with every face carrying `label`.
    pub fn labeled(mut self, label: LabelId) -> TriMesh {
        self.face_labels = Some(vec![label; self.faces.len()]);
        self
    }

    /// Closed two-manifold check: every undirected edge is used by exactly
    /// two faces, once in each direction.
    pub fn is_watertight(&self) -> bool {
        if self.faces.is_empty() {
            return false;
        }
        let mut edges: HashMap<(u32, u32), (u32, u32)> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let e = edges.entry((a.min(b), a.max(b))).or_default();
                if a < b {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        edges.values().all(|&(fwd, back)| fwd == 1 && back == 1)
    }

    /// Ids of vertices incident to at least one of `faces`, ascending.
    pub fn vertices_of_faces(&self, faces: &[usize]) -> Vec<usize> {
        let mut used = vec![false; self.vertices.len()];
        for &f in faces {
            for &i in &self.faces[f] {
                used[i as usize] = true;
            }
        }
        used.iter()
            .enumerate()
            .filter_map(|(i, &u)| u.then_some(i))
            .collect()
    }
}

/// Mapping from group/material name to semantic id, stored as a JSON object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelTable(BTreeMap<String, LabelId>);

impl LabelTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, id: LabelId) {
        self.0.insert(name.into(), id);
    }

    pub fn id(&self, name: &str) -> Option<LabelId> {
        self.0.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<LabelId, GeometryError> {
        self.id(name)
            .ok_or_else(|| GeometryError::UnknownLabel(name.to_string()))
    }

    /// First name (alphabetically) mapped to `id`.
    pub fn name(&self, id: LabelId) -> Option<&str> {
        self.0
            .iter()
            .find(|(_, &v)| v == id)
            .map(|(k, _)| k.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, LabelId)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn load(path: &Path) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| GeometryError::Parse {
            format: "label table",
            location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
            message: e.to_string(),
        })
    }
}
