//! Rigid transforms shared by every module.
//!
//! A [`Pose`] is a position in meters plus a unit quaternion. Composition
//! follows the usual frame convention: `a.compose(&b)` maps points from
//! frame `b` into the frame in which `a` is expressed.

use nalgebra::{Quaternion, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation: renormalize(orientation),
        }
    }

    pub fn from_translation(position: Vector3<f64>) -> Self {
        Self::new(position, UnitQuaternion::identity())
    }

    pub fn from_rotation(orientation: UnitQuaternion<f64>) -> Self {
        Self::new(Vector3::zeros(), orientation)
    }

    /// Builds a pose from `[x, y, z, qw, qx, qy, qz]`; the quaternion is normalized
/// unless it already is.
    pub fn from_array(v: [f64; 7]) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite pose component".into()));
        }
        let q = Quaternion::new(v[3], v[4], v[5], v[6]);
        if q.norm() < 1e-12 {
            return Err(Error::InvalidParameter("zero quaternion".into()));
        }
        let position = Vector3::new(v[0], v[1], v[2]);
        // stored unit quaternions are kept bit-exact so logs round-trip
        if (q.norm() - 1.0).abs() <= 1e-12 && q.w >= 0.0 {
            return Ok(Self {
                position,
                orientation: UnitQuaternion::new_unchecked(q),
            });
        }
        Ok(Self::new(position, UnitQuaternion::from_quaternion(q)))
    }

    pub fn to_array(&self) -> [f64; 7] {
        let q = self.orientation.quaternion();
        [
            self.position.x,
            self.position.y,
            self.position.z,
            q.w,
            q.i,
            q.j,
            q.k,
        ]
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.position + self.orientation * other.position,
            self.orientation * other.orientation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose::new(-(inv * self.position), inv)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    /// Unit axes of this frame expressed in the parent frame.
    pub fn x_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::x()
    }

    pub fn y_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::y()
    }

    pub fn z_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::z()
    }

    /// Twist-like error `[target.p - p; log(target.R * R^T)]` in the parent frame.
    pub fn error_to(&self, target: &Pose) -> Vector6<f64> {
        let dp = target.position - self.position;
        let dr = rotation_log(&(target.orientation * self.orientation.inverse()));
        Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
    }

    /// Angle of the relative rotation, insensitive to quaternion sign.
    pub fn angular_distance(&self, other: &Pose) -> f64 {
        rotation_log(&(other.orientation * self.orientation.inverse())).norm()
    }

    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.position - other.position).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Renormalizes and maps to the `w >= 0` hemisphere.
pub fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let raw = q.into_inner();
    let raw = if raw.w < 0.0 { -raw } else { raw };
    UnitQuaternion::new_normalize(raw)
}

/// Axis-angle vector of a rotation (log map), with angle in `[0, pi]`.
pub fn rotation_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let raw = q.quaternion();
    let (w, v) = if raw.w < 0.0 {
        (-raw.w, -raw.imag())
    } else {
        (raw.w, raw.imag())
    };
    let s = v.norm();
    if s < 1e-15 {
        return 2.0 * v;
    }
    let angle = 2.0 * s.atan2(w);
    v * (angle / s)
}

/// Spherical interpolation along the shorter arc.
pub fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, s: f64) -> UnitQuaternion<f64> {
    let delta = rotation_log(&(b * a.inverse()));
    renormalize(UnitQuaternion::from_scaled_axis(delta * s) * a)
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = <[f64; 7]>::deserialize(deserializer)?;
        Pose::from_array(v).map_err(serde::de::Error::custom)
    }
}
