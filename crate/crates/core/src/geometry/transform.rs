use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{GeometryError, Point, Vec3};

const ROTATION_TOL: f64 = 1e-9;

/// Rotation followed by translation: `v' = rotation * v + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, GeometryError> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(ortho <= ROTATION_TOL && (rotation.determinant() - 1.0).abs() <= ROTATION_TOL) {
            return Err(GeometryError::NotARotation);
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about +z by `yaw` radians, then translation.
    pub fn from_yaw(yaw: f64, translation: Vec3) -> Self {
        Self {
            rotation: *Rotation3::from_axis_angle(&Vec3::z_axis(), yaw).matrix(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Rotation3<f64>, translation: Vec3) -> Self {
        Self {
            rotation: *rotation.matrix(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == Matrix3::identity() && self.translation == Vec3::zeros()
    }

    /// Rotation as three rows.
    pub fn rows(&self) -> [[f64; 3]; 3] {
        let r = &self.rotation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ]
    }
}

/// Wire form: row-major 3×3 rotation plus translation.
#[derive(Serialize, Deserialize)]
struct TransformRepr {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows = self.rows();
        let mut rotation = [0.0; 9];
        for (i, row) in rows.iter().enumerate() {
            rotation[i * 3..i * 3 + 3].copy_from_slice(row);
        }
        TransformRepr {
            rotation,
            translation: self.translation.into(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = TransformRepr::deserialize(d)?;
        let rotation = Matrix3::from_row_slice(&repr.rotation);
        RigidTransform::new(rotation, Vec3::from(repr.translation)).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_rotations() {
        let scaled = Matrix3::identity() * 2.0;
        assert!(RigidTransform::new(scaled, Vec3::zeros()).is_err());
        let reflect = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(reflect, Vec3::zeros()).is_err());
    }

    #[test]
    fn compose_and_inverse() {
        let a = RigidTransform::from_yaw(0.3, Vec3::new(1.0, 2.0, 0.5));
        let b = RigidTransform::from_yaw(-1.1, Vec3::new(-0.2, 0.0, 3.0));
        let p = Point::new(0.4, -0.7, 1.3);
        let ab = a.compose(&b);
        assert!((ab.apply(&p) - a.apply(&b.apply(&p))).norm() < 1e-12);
        assert!((a.inverse().apply(&a.apply(&p)) - p).norm() < 1e-12);
    }

    #[test]
    fn json_is_row_major() {
        let t = RigidTransform::from_yaw(std::f64::consts::FRAC_PI_2, Vec3::new(1.0, 2.0, 3.0));
        let v: serde_json::Value = serde_json::to_value(t).unwrap();
        let rot: Vec<f64> = serde_json::from_value(v["rotation"].clone()).unwrap();
        // first row of a +90° yaw is (cos, -sin, 0)
        assert!(rot[0].abs() < 1e-15 && (rot[1] + 1.0).abs() < 1e-15);
        let back: RigidTransform = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }
}
