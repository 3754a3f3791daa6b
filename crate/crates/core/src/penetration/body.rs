use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PenetrationError;
use crate::geometry::{Point, Vec3};

/// Body region a vertex belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BodyPart {
    #[serde(rename = "hand_R")]
    HandRight,
    #[serde(rename = "hand_L")]
    HandLeft,
    #[serde(rename = "foot")]
    Foot,
    #[serde(rename = "lower_leg")]
    LowerLeg,
    #[serde(rename = "pelvis")]
    Pelvis,
    #[serde(rename = "other")]
    Other,
}

impl BodyPart {
    pub fn is_hand(self) -> bool {
        matches!(self, Self::HandRight | Self::HandLeft)
    }
}

/// Vertex → part assignment, stored as `{"vertex_count": n, "<part>": [ids]}`.
/// Vertices not listed under any part are `other`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartMap {
    pub vertex_count: usize,
    #[serde(flatten)]
    pub parts: BTreeMap<BodyPart, Vec<usize>>,
}

impl PartMap {
    /// Expand into a per-vertex table, rejecting out-of-range or doubly
    /// assigned ids.
    pub fn to_vec(&self) -> Result<Vec<BodyPart>, PenetrationError> {
        let mut out = vec![BodyPart::Other; self.vertex_count];
        let mut seen = vec![false; self.vertex_count];
        for (&part, ids) in &self.parts {
            for &v in ids {
                if v >= self.vertex_count {
                    return Err(PenetrationError::PartMap(format!(
                        "vertex {v} out of range for {} vertices",
                        self.vertex_count
                    )));
                }
                if seen[v] && out[v] != part {
                    return Err(PenetrationError::PartMap(format!("vertex {v} assigned to two parts")));
                }
                seen[v] = true;
                out[v] = part;
            }
        }
        Ok(out)
    }

    pub fn from_parts(parts: &[BodyPart]) -> Self {
        let mut map: BTreeMap<BodyPart, Vec<usize>> = BTreeMap::new();
        for (v, &p) in parts.iter().enumerate() {
            if p != BodyPart::Other {
                map.entry(p).or_default().push(v);
            }
        }
        Self {
            vertex_count: parts.len(),
            parts: map,
        }
    }
}

/// One time-step of a body: vertices with part labels and a pelvis marker.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyFrame {
    vertices: Vec<Point>,
    parts: Vec<BodyPart>,
    pelvis: Point,
}

impl BodyFrame {
    pub fn new(vertices: Vec<Point>, parts: Vec<BodyPart>, pelvis: Point) -> Result<Self, PenetrationError> {
        if vertices.len() != parts.len() {
            return Err(PenetrationError::PartMap(format!(
                "part map covers {} vertices, body has {}",
                parts.len(),
                vertices.len()
            )));
        }
        Ok(Self { vertices, parts, pelvis })
    }

    /// Pelvis marker taken as the centroid of pelvis-labeled vertices (or of
    /// all vertices when none are labeled).
    pub fn with_derived_pelvis(vertices: Vec<Point>, parts: Vec<BodyPart>) -> Result<Self, PenetrationError> {
        let pick: Vec<&Point> = vertices
            .iter()
            .zip(&parts)
            .filter(|(_, &p)| p == BodyPart::Pelvis)
            .map(|(v, _)| v)
            .collect();
        let set: Vec<&Point> = if pick.is_empty() { vertices.iter().collect() } else { pick };
        let pelvis = if set.is_empty() {
            Point::origin()
        } else {
            Point::from(set.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / set.len() as f64)
        };
        Self::new(vertices, parts, pelvis)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn parts(&self) -> &[BodyPart] {
        &self.parts
    }

    pub fn pelvis(&self) -> Point {
        self.pelvis
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Ids of vertices whose part satisfies `pred`, ascending.
    pub fn ids_where(&self, pred: impl Fn(BodyPart) -> bool) -> Vec<usize> {
        (0..self.parts.len()).filter(|&i| pred(self.parts[i])).collect()
    }

    pub fn hand_ids(&self) -> Vec<usize> {
        self.ids_where(BodyPart::is_hand)
    }

    pub fn foot_ids(&self) -> Vec<usize> {
        self.ids_where(|p| p == BodyPart::Foot)
    }

    /// Reorder vertices: new vertex `i` is old vertex `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> BodyFrame {
        Self {
            vertices: perm.iter().map(|&i| self.vertices[i]).collect(),
            parts: perm.iter().map(|&i| self.parts[i]).collect(),
            pelvis: self.pelvis,
        }
    }

    pub fn translated(&self, by: Vec3) -> BodyFrame {
        Self {
            vertices: self.vertices.iter().map(|v| v + by).collect(),
            parts: self.parts.clone(),
            pelvis: self.pelvis + by,
        }
    }

    pub fn transformed(&self, t: &crate::geometry::RigidTransform) -> BodyFrame {
        Self {
            vertices: self.vertices.iter().map(|v| t.apply(v)).collect(),
            parts: self.parts.clone(),
            pelvis: t.apply(&self.pelvis),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn part_map_json_shape() {
        let json = r#"{"vertex_count": 5, "hand_R": [0], "foot": [3, 4]}"#;
        let pm: PartMap = serde_json::from_str(json).unwrap();
        let parts = pm.to_vec().unwrap();
        assert_eq!(parts[0], BodyPart::HandRight);
        assert_eq!(parts[1], BodyPart::Other);
        assert_eq!(parts[4], BodyPart::Foot);
        assert_eq!(PartMap::from_parts(&parts), pm);
    }

    #[test]
    fn part_map_rejects_bad_ids() {
        let pm: PartMap = serde_json::from_str(r#"{"vertex_count": 2, "foot": [2]}"#).unwrap();
        assert!(pm.to_vec().is_err());
        let pm: PartMap = serde_json::from_str(r#"{"vertex_count": 2, "foot": [1], "hand_L": [1]}"#).unwrap();
        assert!(pm.to_vec().is_err());
    }
}
