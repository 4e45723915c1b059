//! The human side of a transfer: mouth contact, bite forces, food attachment
//! and head motion.
//!
//! Forces returned here act on the fork. The sensor model in the harness
//! negates their sum to obtain the measured tool wrench.

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::{Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::Wrench;
use crate::error::{Error, Result};
use crate::geometry::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MouthModel {
    pub center: Pose,
    /// Opening height between the teeth planes, m.
    pub aperture: f64,
    /// Lateral wall distance from the center, m.
    pub half_width: f64,
    pub stiffness: f64,
    pub damping: f64,
}

impl Default for MouthModel {
    fn default() -> Self {
        Self {
            center: Pose::identity(),
            aperture: 0.030,
            half_width: 0.025,
            stiffness: 1000.0,
            damping: 5.0,
        }
    }
}

impl MouthModel {
    pub fn new(center: Pose, aperture: f64, stiffness: f64, damping: f64) -> Result<Self> {
        let m = Self {
            center,
            aperture,
            stiffness,
            damping,
            ..Self::default()
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.aperture > 0.0) || !(self.half_width > 0.0) {
            return Err(Error::InvalidParameter("mouth aperture and width must be > 0".into()));
        }
        if !(self.stiffness >= 0.0) || !(self.damping >= 0.0) {
            return Err(Error::InvalidParameter("contact stiffness and damping must be >= 0".into()));
        }
        Ok(())
    }

    pub fn with_center(&self, center: Pose) -> Self {
        Self { center, ..*self }
    }

    /// Fork tip position in the mouth frame.
    pub fn local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.center.inverse().transform_point(p)
    }
}

/// Penalty contact between the fork tip and the mouth boundary planes.
///
/// `velocity` is the tip twist `[v; w]` in the world frame. The returned
/// wrench is the force on the fork in the world frame, with zero torque.
pub fn contact_force(tip: &Pose, velocity: &Vector6<f64>, mouth: &MouthModel) -> Wrench {
    let p = mouth.local(&tip.position);
    if p.z >= 0.0 {
        return Wrench::zero();
    }
    let v = mouth.center.orientation.inverse() * Vector3::new(velocity[0], velocity[1], velocity[2]);
    let half = mouth.aperture / 2.0;
    let w = mouth.half_width;
    let mut f = Vector3::zeros();
    let mut push = |depth: f64, normal: Vector3<f64>| {
        if depth > 0.0 {
            // penetration rate along the inward direction (-normal)
            let rate = -v.dot(&normal);
            f += normal * (mouth.stiffness * depth + mouth.damping * rate).max(0.0);
        }
    };
    push(-half - p.y, Vector3::y());
    push(p.y - half, -Vector3::y());
    push(-w - p.x, Vector3::x());
    push(p.x - w, -Vector3::x());
    Wrench::from_force(mouth.center.orientation * f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiteScript {
    /// Seconds after the bite wait begins.
    pub t_bite: f64,
    pub peak_force: f64,
    pub ramp: f64,
    pub refuse: bool,
}

impl Default for BiteScript {
    fn default() -> Self {
        Self {
            t_bite: 0.5,
            peak_force: 1.0,
            ramp: 0.0,
            refuse: false,
        }
    }
}

impl BiteScript {
    pub fn refusing() -> Self {
        Self {
            refuse: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_force >= 0.0) || !(self.ramp >= 0.0) || !(self.t_bite >= 0.0) {
            return Err(Error::InvalidParameter("bite script values must be >= 0".into()));
        }
        Ok(())
    }
}

/// Jaw-closing force on the fork in the mouth frame (along -y).
pub fn bite_force(script: &BiteScript, t_in_wait: f64) -> Wrench {
    if script.refuse || t_in_wait < script.t_bite {
        return Wrench::zero();
    }
    let s = if script.ramp > 0.0 {
        ((t_in_wait - script.t_bite) / script.ramp).min(1.0)
    } else {
        1.0
    };
    Wrench::from_force(Vector3::new(0.0, -script.peak_force * s, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Round,
    Cylinder,
    Cube,
    Irregular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deformability {
    Rigid,
    Robust,
    Fragile,
}

impl Deformability {
    /// Shear needed to pull the food off the tines, N.
    pub fn default_detachment_force(self) -> f64 {
        match self {
            Deformability::Fragile => 0.5,
            Deformability::Robust => 1.5,
            Deformability::Rigid => 2.5,
        }
    }
}

/// Food shape in millimeters, centered on its own origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Geometry {
    Box { size: [f64; 3] },
    Sphere { radius: f64 },
    /// Axis along local x.
    Cylinder { radius: f64, length: f64 },
    Composite { parts: Vec<Part> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub geometry: Geometry,
    #[serde(default)]
    pub offset: [f64; 3],
}

impl Geometry {
    pub fn cube(edge: f64) -> Self {
        Geometry::Box { size: [edge; 3] }
    }

    /// True when the shape encloses no volume.
    pub fn is_empty(&self) -> bool {
        match self {
            Geometry::Box { size } => size.iter().any(|s| *s <= 0.0),
            Geometry::Sphere { radius } => *radius <= 0.0,
            Geometry::Cylinder { radius, length } => *radius <= 0.0 || *length <= 0.0,
            Geometry::Composite { parts } => parts.iter().all(|p| p.geometry.is_empty()),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Geometry::Box { size } => size.iter().all(|s| s.is_finite()),
            Geometry::Sphere { radius } => radius.is_finite(),
            Geometry::Cylinder { radius, length } => radius.is_finite() && length.is_finite(),
            Geometry::Composite { parts } => parts
                .iter()
                .all(|p| p.geometry.is_finite() && p.offset.iter().all(|o| o.is_finite())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodPreset {
    pub name: String,
    pub geometry: Geometry,
    pub shape: ShapeClass,
    pub size: SizeClass,
    pub deformability: Deformability,
    pub detachment_force: f64,
    /// Pull the closed teeth can hold before the food slips back out, N.
    pub bite_release_force: f64,
    /// Geometry center relative to the fork tip in the mouth frame, mm.
    #[serde(default)]
    pub mount_mm: [f64; 3],
}

impl FoodPreset {
    pub fn validate(&self) -> Result<()> {
        if self.geometry.is_empty() || !self.geometry.is_finite() {
            return Err(Error::EmptyGeometry);
        }
        if !(self.detachment_force > 0.0) || !(self.bite_release_force > 0.0) {
            return Err(Error::InvalidParameter(format!("{}: forces must be > 0", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attachment {
    Attached,
    Detached,
}

/// Threshold model: the food comes off iff shear exceeds the detachment force.
pub fn food_attachment(food: &FoodPreset, applied_shear: f64) -> Attachment {
    if applied_shear > food.detachment_force {
        Attachment::Detached
    } else {
        Attachment::Attached
    }
}

impl Attachment {
    /// Latching update: detached food stays detached.
    pub fn update(self, food: &FoodPreset, applied_shear: f64) -> Attachment {
        match self {
            Attachment::Detached => Attachment::Detached,
            Attachment::Attached => food_attachment(food, applied_shear),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FoodStatus {
    OnFork,
    /// Teeth closed on the food; `anchor_z` is the tip depth at the bite, m.
    Gripped { anchor_z: f64 },
    /// Pulled off the tines into the mouth.
    Released,
    /// Fell off before the bite.
    Dropped,
    /// Teeth lost their hold; the food left the mouth on the fork.
    Slipped,
}

/// Food state along one trial, driven by contact shear and the mouth's grip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoodTracker {
    pub status: FoodStatus,
    /// Stiffness of the grip between teeth and fork along the mouth z axis, N/m.
    pub grip_stiffness: f64,
    pub changed_at: Option<f64>,
}

impl FoodTracker {
    pub fn new(grip_stiffness: f64) -> Self {
        Self {
            status: FoodStatus::OnFork,
            grip_stiffness,
            changed_at: None,
        }
    }

    pub fn grip(&self, tip_z: f64) -> Self {
        match self.status {
            FoodStatus::OnFork => Self {
                status: FoodStatus::Gripped { anchor_z: tip_z },
                ..*self
            },
            _ => *self,
        }
    }

    /// Grip tension for a tip at mouth-frame depth `tip_z`.
    pub fn tension(&self, tip_z: f64) -> f64 {
        match self.status {
            FoodStatus::Gripped { anchor_z } => self.grip_stiffness * (tip_z - anchor_z).max(0.0),
            _ => 0.0,
        }
    }

    /// Force on the fork from the grip, in the mouth frame.
    pub fn grip_force(&self, tip_z: f64) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.tension(tip_z))
    }

    pub fn update(&self, food: &FoodPreset, contact_shear: f64, tip_z: f64, t: f64) -> Self {
        let next = match self.status {
            FoodStatus::OnFork => match food_attachment(food, contact_shear) {
                Attachment::Detached => FoodStatus::Dropped,
                Attachment::Attached => FoodStatus::OnFork,
            },
            FoodStatus::Gripped { .. } => {
                let tension = self.tension(tip_z);
                if tension > food.detachment_force && food.detachment_force <= food.bite_release_force {
                    FoodStatus::Released
                } else if tension > food.bite_release_force {
                    FoodStatus::Slipped
                } else {
                    self.status
                }
            }
            s => s,
        };
        if next == self.status {
            *self
        } else {
            Self {
                status: next,
                changed_at: Some(t),
                ..*self
            }
        }
    }
}

pub const MAX_HEAD_AMPLITUDE: f64 = 0.020;
const WALK_KNOT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HeadPerturbation {
    #[default]
    None,
    /// `axis` is in the mouth frame and is normalized before use.
    Sinusoid { amplitude: f64, period: f64, axis: [f64; 3] },
    /// Uniform steps of up to `step` per axis every 10 ms, kept within `max_amplitude`.
    RandomWalk { step: f64, max_amplitude: f64 },
}

impl HeadPerturbation {
    pub fn validate(&self) -> Result<()> {
        let amp = match *self {
            HeadPerturbation::None => return Ok(()),
            HeadPerturbation::Sinusoid { amplitude, period, axis } => {
                if !(period > 0.0) || Vector3::from(axis).norm() == 0.0 {
                    return Err(Error::InvalidParameter("sinusoid needs period > 0 and an axis".into()));
                }
                amplitude
            }
            HeadPerturbation::RandomWalk { step, max_amplitude } => {
                if !(step >= 0.0) {
                    return Err(Error::InvalidParameter("random-walk step must be >= 0".into()));
                }
                max_amplitude
            }
        };
        if !(0.0..=MAX_HEAD_AMPLITUDE).contains(&amp) {
            return Err(Error::InvalidParameter(format!("head amplitude {amp} m outside [0, 0.02]")));
        }
        Ok(())
    }
}

/// Mouth displacement in the mouth frame at time `t`.
pub fn head_perturbation(kind: &HeadPerturbation, t: f64, seed: u64) -> Result<Pose> {
    kind.validate()?;
    Ok(Pose::from_translation(HeadMotion::build(kind, seed, t.max(0.0)).offset(t)))
}

/// Precomputed head motion for a whole trial.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadMotion {
    kind: HeadPerturbation,
    knots: Vec<Vector3<f64>>,
}

impl HeadMotion {
    pub fn new(kind: &HeadPerturbation, seed: u64, horizon: f64) -> Result<Self> {
        kind.validate()?;
        Ok(Self::build(kind, seed, horizon))
    }

    fn build(kind: &HeadPerturbation, seed: u64, horizon: f64) -> Self {
        let knots = match *kind {
            HeadPerturbation::RandomWalk { step, max_amplitude } => {
                let n = (horizon / WALK_KNOT).ceil() as usize + 2;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut p = Vector3::zeros();
                let mut knots = Vec::with_capacity(n);
                knots.push(p);
                for _ in 1..n {
                    let d = Vector3::new(
                        rng.gen_range(-1.0..=1.0),
                        rng.gen_range(-1.0..=1.0),
                        rng.gen_range(-1.0..=1.0),
                    ) * step;
                    p += d;
                    let norm = p.norm();
                    if norm > max_amplitude {
                        p *= max_amplitude / norm;
                    }
                    knots.push(p);
                }
                knots
            }
            _ => Vec::new(),
        };
        Self { kind: *kind, knots }
    }

    pub fn offset(&self, t: f64) -> Vector3<f64> {
        match self.kind {
            HeadPerturbation::None => Vector3::zeros(),
            HeadPerturbation::Sinusoid { amplitude, period, axis } => {
                Vector3::from(axis).normalize() * amplitude * (TAU * t / period).sin()
            }
            HeadPerturbation::RandomWalk { .. } => {
                let x = (t / WALK_KNOT).max(0.0);
                let k = (x.floor() as usize).min(self.knots.len() - 2);
                let s = (x - k as f64).min(1.0);
                self.knots[k] + (self.knots[k + 1] - self.knots[k]) * s
            }
        }
    }
}

/// External force on the fork, in the mouth frame, independent of the contact model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Disturbance {
    #[default]
    None,
    Constant { force: [f64; 3] },
    /// Three seeded sines per active axis; `axes` masks x, y, z.
    SumOfSines { amplitude: f64, seed: u64, axes: [bool; 3] },
    /// Piecewise-linear trace, held constant outside its span.
    Recorded { t: Vec<f64>, force: Vec<[f64; 3]> },
}

impl Disturbance {
    pub fn validate(&self) -> Result<()> {
        match self {
            Disturbance::Recorded { t, force } => {
                if t.is_empty() || t.len() != force.len() {
                    return Err(Error::InvalidParameter("recorded disturbance needs matching t/force".into()));
                }
                if t.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidParameter("recorded disturbance times must increase".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Samples a seeded sum of sines into a recorded trace at `rate` Hz.
    pub fn record(&self, horizon: f64, rate: f64) -> Disturbance {
        let n = (horizon * rate).round() as usize + 1;
        let t: Vec<f64> = (0..n).map(|k| k as f64 / rate).collect();
        let force = t.iter().map(|&s| self.at(s).into()).collect();
        Disturbance::Recorded { t, force }
    }

    pub fn at(&self, time: f64) -> Vector3<f64> {
        match self {
            Disturbance::None => Vector3::zeros(),
            Disturbance::Constant { force } => Vector3::from(*force),
            Disturbance::SumOfSines { amplitude, seed, axes } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut f = Vector3::zeros();
                for (axis, active) in axes.iter().enumerate() {
                    for _ in 0..3 {
                        let freq: f64 = rng.gen_range(0.3..3.0);
                        let phase: f64 = rng.gen_range(0.0..TAU);
                        if *active {
                            f[axis] += amplitude / 3.0 * (TAU * freq * time + phase).sin();
                        }
                    }
                }
                f
            }
            Disturbance::Recorded { t, force } => {
                let k = t.partition_point(|s| *s <= time);
                if k == 0 {
                    return Vector3::from(force[0]);
                }
                if k == t.len() {
                    return Vector3::from(force[k - 1]);
                }
                let s = (time - t[k - 1]) / (t[k] - t[k - 1]);
                let a = Vector3::from(force[k - 1]);
                a + (Vector3::from(force[k]) - a) * s
            }
        }
    }

    /// Reads a `t_s,fx,fy,fz` CSV (mouth frame, N); `#` lines are comments.
    pub fn load_csv(path: &Path) -> Result<Disturbance> {
        let text = std::fs::read_to_string(path)?;
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut t = Vec::new();
        let mut force = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("t_s") {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
            if vals.len() != 4 {
                return Err(bad(format!("line {}: expected 4 columns", i + 1)));
            }
            t.push(vals[0]);
            force.push([vals[1], vals[2], vals[3]]);
        }
        let d = Disturbance::Recorded { t, force };
        d.validate().map_err(|e| bad(e.to_string()))?;
        Ok(d)
    }

    pub fn write_csv(&self, path: &Path, horizon: f64, rate: f64) -> Result<()> {
        use std::fmt::Write as _;
        let Disturbance::Recorded { t, force } = self.record(horizon, rate) else {
            unreachable!("record always yields a trace")
        };
        let mut out = String::from("t_s,fx,fy,fz\n");
        for (s, f) in t.iter().zip(&force) {
            let _ = writeln!(out, "{s},{},{},{}", f[0], f[1], f[2]);
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mouth() -> MouthModel {
        MouthModel::new(Pose::identity(), 0.03, 1000.0, 5.0).unwrap()
    }

    #[test]
    fn no_contact_outside_mouth() {
        let tip = Pose::from_translation(Vector3::new(0.0, -0.05, 0.01));
        assert_eq!(contact_force(&tip, &Vector6::zeros(), &mouth()), Wrench::zero());
        let tip = Pose::from_translation(Vector3::new(0.0, 0.0, -0.01));
        assert_eq!(contact_force(&tip, &Vector6::zeros(), &mouth()), Wrench::zero());
    }

    #[test]
    fn lower_plane_spring() {
        let tip = Pose::from_translation(Vector3::new(0.0, -0.016, -0.01));
        let w = contact_force(&tip, &Vector6::zeros(), &mouth());
        assert!((w.force - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
        assert_eq!(w.torque, Vector3::zeros());
    }

    #[test]
    fn contact_is_clamped_without_adhesion() {
        // receding fast from a shallow penetration
        let tip = Pose::from_translation(Vector3::new(0.0, -0.0151, -0.01));
        let v = Vector6::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(contact_force(&tip, &v, &mouth()).force, Vector3::zeros());
    }

    #[test]
    fn bite_profile() {
        let s = BiteScript {
            t_bite: 0.5,
            peak_force: 1.0,
            ramp: 0.2,
            refuse: false,
        };
        assert_eq!(bite_force(&s, 0.4), Wrench::zero());
        assert!((bite_force(&s, 0.6).force.y + 0.5).abs() < 1e-12);
        assert!((bite_force(&s, 2.0).force.y + 1.0).abs() < 1e-12);
        for k in 0..100 {
            assert_eq!(bite_force(&BiteScript::refusing(), k as f64 * 0.05), Wrench::zero());
        }
    }

    fn cheesecake() -> FoodPreset {
        crate::presets::food("cheesecake").unwrap()
    }

    #[test]
    fn attachment_threshold() {
        let f = cheesecake();
        assert_eq!(food_attachment(&f, 0.0), Attachment::Attached);
        assert_eq!(food_attachment(&f, 0.6), Attachment::Detached);
        assert_eq!(Attachment::Detached.update(&f, 0.0), Attachment::Detached);
        let carrot = crate::presets::food("carrot").unwrap();
        assert!(carrot.detachment_force > f.detachment_force);
    }

    #[test]
    fn grip_releases_food_past_detachment() {
        let f = cheesecake();
        let tr = FoodTracker::new(200.0).grip(-0.02);
        let held = tr.update(&f, 0.0, -0.019, 1.0);
        assert!(matches!(held.status, FoodStatus::Gripped { .. }));
        let pulled = tr.update(&f, 0.0, -0.017, 1.0);
        assert_eq!(pulled.status, FoodStatus::Released);
        assert_eq!(pulled.changed_at, Some(1.0));
    }

    #[test]
    fn weak_grip_slips() {
        let mut f = cheesecake();
        f.bite_release_force = 0.2;
        let tr = FoodTracker::new(200.0).grip(0.0);
        assert_eq!(tr.update(&f, 0.0, 0.0015, 0.0).status, FoodStatus::Slipped);
    }

    #[test]
    fn head_motion_examples() {
        let none = head_perturbation(&HeadPerturbation::None, 3.0, 1).unwrap();
        assert_eq!(none, Pose::identity());
        let sine = HeadPerturbation::Sinusoid {
            amplitude: 0.005,
            period: 2.0,
            axis: [0.0, 1.0, 0.0],
        };
        let p = head_perturbation(&sine, 0.5, 0).unwrap();
        assert!((p.position.y - 0.005).abs() < 1e-15);
        let walk = HeadPerturbation::RandomWalk {
            step: 0.001,
            max_amplitude: 0.01,
        };
        let a = HeadMotion::new(&walk, 9, 10.0).unwrap();
        let b = HeadMotion::new(&walk, 9, 10.0).unwrap();
        assert_eq!(a, b);
        assert!((0..1000).all(|k| a.offset(k as f64 * 0.01).norm() <= 0.01 + 1e-15));
        let too_big = HeadPerturbation::Sinusoid {
            amplitude: 0.03,
            period: 1.0,
            axis: [1.0, 0.0, 0.0],
        };
        assert!(head_perturbation(&too_big, 0.0, 0).is_err());
    }

    #[test]
    fn recorded_disturbance_roundtrip() {
        let d = Disturbance::SumOfSines {
            amplitude: 0.15,
            seed: 3,
            axes: [true, false, true],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        d.write_csv(&path, 1.0, 1000.0).unwrap();
        let r = Disturbance::load_csv(&path).unwrap();
        for k in 0..=1000 {
            let t = k as f64 * 0.001;
            assert!((r.at(t) - d.at(t)).norm() < 1e-12);
            assert_eq!(d.at(t).y, 0.0);
        }
    }

    proptest! {
        #[test]
        fn zero_force_without_penetration(x in -0.025f64..0.025, y in -0.015f64..0.015, z in -0.05f64..0.05,
                                          v in prop::array::uniform3(-1.0f64..1.0)) {
            let tip = Pose::from_translation(Vector3::new(x, y, z));
            let tw = Vector6::new(v[0], v[1], v[2], 0.0, 0.0, 0.0);
            prop_assert_eq!(contact_force(&tip, &tw, &mouth()).force, Vector3::zeros());
        }

        #[test]
        fn food_never_detaches_without_shear(idx in 0usize..8) {
            let f = &crate::presets::foods()[idx];
            prop_assert_eq!(food_attachment(f, 0.0), Attachment::Attached);
        }
    }
}
