//! Food scanning and mouth targeting.
//!
//! Scans are synthesized by casting rays from a camera on the +z side of
//! the mouth frame onto the food primitives mounted at the fork tip. All
//! cloud coordinates are millimeters in the mouth frame anchored at the tip.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::human::{FoodPreset, Geometry};
use crate::transfer::transfer_orientation;

pub const DEFAULT_RESOLUTION_MM: f64 = 0.1;
/// Uniform depth noise amplitude along the camera axis, mm.
pub const DEPTH_NOISE_MM: f64 = 0.05;
pub const OFFSET_LIMIT_MM: f64 = 50.0;
pub const DEFAULT_ENTRY_DEPTH: f64 = 0.018;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub resolution: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::InvalidParameter("resolution must be > 0".into()));
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParameter("non-finite point".into()));
        }
        Ok(Self { points, resolution })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translated(&self, t: &Vector3<f64>) -> Self {
        Self {
            points: self.points.iter().map(|p| p + t).collect(),
            resolution: self.resolution,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# frame=mouth resolution_mm={}", self.resolution)?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.x, p.y, p.z)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("missing header".into()))?;
        let resolution = parse_header(header).ok_or_else(|| bad(format!("bad header '{header}'")))?;
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
            if v.len() != 3 {
                return Err(bad(format!("line {}: expected x,y,z", i + 2)));
            }
            points.push(Vector3::new(v[0], v[1], v[2]));
        }
        PointCloud::new(points, resolution).map_err(|e| bad(e.to_string()))
    }

    const MAGIC: &'static [u8; 4] = b"BTPC";

    /// Little-endian binary: magic, resolution, count, then x,y,z triples.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(Self::MAGIC)?;
        out.write_all(&self.resolution.to_le_bytes())?;
        out.write_all(&(self.points.len() as u64).to_le_bytes())?;
        for p in &self.points {
            for c in p.iter() {
                out.write_all(&c.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let bad = |reason: &str| Error::Format {
            path: path.to_path_buf(),
            reason: reason.into(),
        };
        if bytes.len() < 20 || &bytes[..4] != Self::MAGIC {
            return Err(bad("not a BTPC point cloud"));
        }
        let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
        let resolution = f(4);
        let n = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        if bytes.len() != 20 + n * 24 {
            return Err(bad("truncated point data"));
        }
        let points = (0..n)
            .map(|k| {
                let o = 20 + k * 24;
                Vector3::new(f(o), f(o + 8), f(o + 16))
            })
            .collect();
        PointCloud::new(points, resolution).map_err(|e| bad(&e.to_string()))
    }

    /// Reads either format, picking binary when the magic matches.
    pub fn load(path: &Path) -> Result<Self> {
        let mut head = [0u8; 4];
        let n = std::fs::File::open(path)?.read(&mut head)?;
        if n == 4 && &head == Self::MAGIC {
            Self::read_binary(path)
        } else {
            Self::read_csv(path)
        }
    }
}

fn parse_header(line: &str) -> Option<f64> {
    let body = line.trim().strip_prefix('#')?;
    let mut frame = None;
    let mut res = None;
    for tok in body.split_whitespace() {
        match tok.split_once('=') {
            Some(("frame", v)) => frame = Some(v),
            Some(("resolution_mm", v)) => res = v.parse().ok(),
            _ => {}
        }
    }
    (frame == Some("mouth")).then_some(res?)
}

/// Ray along -z from (x, y, +inf); returns the entry height if it hits.
fn ray_hit(geom: &Geometry, frame: &Pose, x: f64, y: f64) -> Option<f64> {
    const FAR: f64 = 1e4;
    let inv = frame.orientation.inverse();
    let o = inv * (Vector3::new(x, y, FAR) - frame.position);
    let d = inv * Vector3::new(0.0, 0.0, -1.0);
    let t = match geom {
        Geometry::Box { size } => {
            let mut t0 = f64::NEG_INFINITY;
            let mut t1 = f64::INFINITY;
            for k in 0..3 {
                let h = size[k] / 2.0;
                if d[k].abs() < 1e-15 {
                    if o[k].abs() > h {
                        return None;
                    }
                } else {
                    let a = (-h - o[k]) / d[k];
                    let b = (h - o[k]) / d[k];
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
            }
            (t0 <= t1).then_some(t0)?
        }
        Geometry::Sphere { radius } => {
            let b = o.dot(&d);
            let c = o.norm_squared() - radius * radius;
            let disc = b * b - c;
            (disc >= 0.0).then(|| -b - disc.sqrt())?
        }
        Geometry::Cylinder { radius, length } => {
            let h = length / 2.0;
            let r2 = radius * radius;
            let mut best = f64::INFINITY;
            let a = d.y * d.y + d.z * d.z;
            if a > 1e-15 {
                let b = o.y * d.y + o.z * d.z;
                let c = o.y * o.y + o.z * o.z - r2;
                let disc = b * b - a * c;
                if disc >= 0.0 {
                    let t = (-b - disc.sqrt()) / a;
                    if (o.x + t * d.x).abs() <= h {
                        best = best.min(t);
                    }
                }
            }
            if d.x.abs() > 1e-15 {
                for cap in [-h, h] {
                    let t = (cap - o.x) / d.x;
                    let p = o + d * t;
                    if p.y * p.y + p.z * p.z <= r2 {
                        best = best.min(t);
                    }
                }
            }
            best.is_finite().then_some(best)?
        }
        Geometry::Composite { parts } => {
            return parts
                .iter()
                .filter_map(|p| ray_hit(&p.geometry, &frame.compose(&Pose::from_translation(p.offset.into())), x, y))
                .reduce(f64::max);
        }
    };
    Some(FAR - t)
}

/// Conservative radius bounding the geometry around its own origin, mm.
fn bounding_radius(geom: &Geometry) -> f64 {
    match geom {
        Geometry::Box { size } => Vector3::from(*size).norm() / 2.0,
        Geometry::Sphere { radius } => *radius,
        Geometry::Cylinder { radius, length } => (radius * radius + length * length / 4.0).sqrt(),
        Geometry::Composite { parts } => parts
            .iter()
            .map(|p| Vector3::from(p.offset).norm() + bounding_radius(&p.geometry))
            .fold(0.0, f64::max),
    }
}

/// Synthetic single-view depth scan of `food` placed at `fork_pose_on_scan`
/// (geometry frame in the tip-anchored mouth frame, mm).
pub fn synth_depth_scan(food: &FoodPreset, fork_pose_on_scan: &Pose, resolution: f64, seed: u64) -> Result<PointCloud> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter("resolution must be > 0".into()));
    }
    if food.geometry.is_empty() {
        return Err(Error::EmptyGeometry);
    }
    let r = bounding_radius(&food.geometry);
    let c = fork_pose_on_scan.position;
    let range = |lo: f64, hi: f64| (lo / resolution).floor() as i64..=(hi / resolution).ceil() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    for j in range(c.y - r, c.y + r) {
        let y = j as f64 * resolution;
        for i in range(c.x - r, c.x + r) {
            let x = i as f64 * resolution;
            if let Some(z) = ray_hit(&food.geometry, fork_pose_on_scan, x, y) {
                let noise = rng.gen_range(-DEPTH_NOISE_MM..=DEPTH_NOISE_MM);
                points.push(Vector3::new(x, y, z + noise));
            }
        }
    }
    PointCloud::new(points, resolution)
}

/// Placement of a preset's geometry on the fork.
pub fn mounted(food: &FoodPreset) -> Pose {
    Pose::from_translation(food.mount_mm.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

pub fn food_bounding_box(cloud: &PointCloud) -> Result<Aabb> {
    let first = cloud.points.first().ok_or(Error::EmptyCloud)?;
    let (min, max) = cloud
        .points
        .iter()
        .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    Ok(Aabb { min, max })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DyRule {
    /// Lower the target by the food's extent above the tip plane.
    #[default]
    TopExtent,
    /// Adjust by the minimum y coordinate instead.
    MinY,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoodOffsets {
    pub dx: f64,
    pub dy: f64,
}

impl FoodOffsets {
    pub fn zero() -> Self {
        Self { dx: 0.0, dy: 0.0 }
    }

    pub fn check(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v.abs() <= OFFSET_LIMIT_MM;
        if ok(self.dx) && ok(self.dy) {
            Ok(())
        } else {
            Err(Error::OffsetsOutOfBounds { dx: self.dx, dy: self.dy })
        }
    }
}

pub fn compute_offsets(bbox: &Aabb) -> FoodOffsets {
    compute_offsets_with(bbox, DyRule::TopExtent)
}

pub fn compute_offsets_with(bbox: &Aabb, rule: DyRule) -> FoodOffsets {
    // adding 0.0 folds -0.0 into +0.0
    let dx = -(bbox.min.x + bbox.max.x) / 2.0 + 0.0;
    let dy = match rule {
        DyRule::TopExtent => -bbox.max.y.max(0.0) + 0.0,
        DyRule::MinY => bbox.min.y.min(0.0) + 0.0,
    };
    FoodOffsets { dx, dy }
}

/// Pre-mouth target: mouth center shifted by the offsets in the face plane,
/// in the transfer orientation tilted up by `pitch`.
pub fn target_pose(mouth_center: &Pose, offsets: &FoodOffsets, entry_depth: f64, pitch: f64) -> Result<Pose> {
    if !(entry_depth > 0.0) {
        return Err(Error::InvalidParameter("entry depth must be > 0".into()));
    }
    offsets.check()?;
    let position = mouth_center.position
        + mouth_center.x_axis() * (offsets.dx / 1000.0)
        + mouth_center.y_axis() * (offsets.dy / 1000.0);
    Ok(Pose::new(position, transfer_orientation(mouth_center, pitch)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Pinhole camera; `pose` maps camera coordinates (z forward, x right, y down) to world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    pub pose: Pose,
    /// Depth along the optical axis assumed for 2D landmarks, m.
    pub nominal_depth: f64,
}

impl CameraModel {
    /// Camera `nominal_depth` in front of the mouth, looking into it with image y down.
    pub fn facing(mouth: &Pose, nominal_depth: f64) -> Self {
        let z = -mouth.z_axis();
        let y = -mouth.y_axis();
        let x = y.cross(&z);
        let rot = Rotation3::from_basis_unchecked(&[x, y, z]);
        Self {
            intrinsics: Intrinsics {
                fx: 615.0,
                fy: 615.0,
                cx: 320.0,
                cy: 240.0,
            },
            pose: Pose::new(mouth.position - z * nominal_depth, UnitQuaternion::from_rotation_matrix(&rot)),
            nominal_depth,
        }
    }

    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        let c = self.pose.inverse().transform_point(p);
        if c.z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy))
    }

    pub fn back_project(&self, u: f64, v: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        let z = self.nominal_depth;
        self.pose
            .transform_point(&Vector3::new((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KeypointCoords {
    World { x: f64, y: f64, z: f64 },
    Pixel { u: f64, v: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub label: String,
    #[serde(flatten)]
    pub coords: KeypointCoords,
}

/// Inner-lip labels of the 68-point face landmark scheme.
pub const INNER_LIP: [&str; 8] = ["60", "61", "62", "63", "64", "65", "66", "67"];
const RIGHT_CORNER: &str = "60";
const TOP_LIP: &str = "62";
const LEFT_CORNER: &str = "64";
const BOTTOM_LIP: &str = "66";

pub fn load_keypoints(path: &Path) -> Result<Vec<Keypoint>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Mouth pose from inner-lip landmarks: centroid for position, corners and
/// lip midpoints for the axes.
pub fn mouth_center_from_keypoints(keypoints: &[Keypoint], camera: &CameraModel) -> Result<Pose> {
    let world = |k: &Keypoint| match k.coords {
        KeypointCoords::World { x, y, z } => Vector3::new(x, y, z),
        KeypointCoords::Pixel { u, v } => camera.back_project(u, v),
    };
    let find = |label: &str| {
        keypoints
            .iter()
            .find(|k| k.label == label)
            .map(world)
            .ok_or_else(|| Error::MissingLandmark(label.into()))
    };
    let right = find(RIGHT_CORNER)?;
    let left = find(LEFT_CORNER)?;
    let top = find(TOP_LIP)?;
    let bottom = find(BOTTOM_LIP)?;

    let lip: Vec<Vector3<f64>> = keypoints
        .iter()
        .filter(|k| INNER_LIP.contains(&k.label.as_str()))
        .map(world)
        .collect();
    let center = lip.iter().sum::<Vector3<f64>>() / lip.len() as f64;

    let across = left - right;
    if across.norm() < 1e-9 {
        return Err(Error::DegenerateLandmarks);
    }
    let x = across.normalize();
    let up = top - bottom;
    let y = up - x * up.dot(&x);
    if y.norm() < 1e-9 * up.norm().max(1.0) || y.norm() < 1e-12 {
        return Err(Error::DegenerateLandmarks);
    }
    let y = y.normalize();
    let z = x.cross(&y);
    let rot = Rotation3::from_basis_unchecked(&[x, y, z]);
    Ok(Pose::new(center, UnitQuaternion::from_rotation_matrix(&rot)))
}

/// Inner-lip landmarks on an ellipse in the mouth plane, in world coordinates.
pub fn render_lip_keypoints(mouth: &Pose, width: f64, height: f64) -> Vec<Keypoint> {
    // label 60 is the user's right corner (-x), 62 the top (+y)
    let angles = [PI, 3.0 * FRAC_PI_4, FRAC_PI_2, FRAC_PI_4, 0.0, -FRAC_PI_4, -FRAC_PI_2, -3.0 * FRAC_PI_4];
    INNER_LIP
        .iter()
        .zip(angles)
        .map(|(label, a)| {
            let p = mouth.transform_point(&Vector3::new(width / 2.0 * a.cos(), height / 2.0 * a.sin(), 0.0));
            Keypoint {
                label: label.to_string(),
                coords: KeypointCoords::World { x: p.x, y: p.y, z: p.z },
            }
        })
        .collect()
}

/// Projects world keypoints into pixel keypoints.
pub fn to_pixels(keypoints: &[Keypoint], camera: &CameraModel) -> Vec<Keypoint> {
    keypoints
        .iter()
        .filter_map(|k| match k.coords {
            KeypointCoords::World { x, y, z } => camera.project(&Vector3::new(x, y, z)).map(|(u, v)| Keypoint {
                label: k.label.clone(),
                coords: KeypointCoords::Pixel { u, v },
            }),
            KeypointCoords::Pixel { .. } => Some(k.clone()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::human::{Deformability, ShapeClass, SizeClass};
    use proptest::prelude::*;

    fn food(geometry: Geometry) -> FoodPreset {
        FoodPreset {
            name: "test".into(),
            geometry,
            shape: ShapeClass::Cube,
            size: SizeClass::Medium,
            deformability: Deformability::Robust,
            detachment_force: 1.5,
            bite_release_force: 4.0,
            mount_mm: [0.0; 3],
        }
    }

    #[test]
    fn cube_scan_matches_extents() {
        let cloud = synth_depth_scan(&food(Geometry::cube(10.0)), &Pose::identity(), 0.1, 1).unwrap();
        let b = food_bounding_box(&cloud).unwrap();
        for k in 0..2 {
            assert!((b.min[k] + 5.0).abs() <= 0.1);
            assert!((b.max[k] - 5.0).abs() <= 0.1);
        }
        assert!((b.max.z - 5.0).abs() <= 0.1);
        assert_eq!(compute_offsets(&b).dx, 0.0);
    }

    #[test]
    fn scan_is_seed_deterministic() {
        let f = crate::presets::food("broccoli").unwrap();
        let a = synth_depth_scan(&f, &mounted(&f), 0.2, 5).unwrap();
        let b = synth_depth_scan(&f, &mounted(&f), 0.2, 5).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn zero_size_food_is_flagged() {
        let r = synth_depth_scan(&food(Geometry::cube(0.0)), &Pose::identity(), 0.1, 1);
        assert!(matches!(r, Err(Error::EmptyGeometry)));
        assert!(synth_depth_scan(&food(Geometry::cube(1.0)), &Pose::identity(), 0.0, 1).is_err());
    }

    #[test]
    fn cylinder_and_sphere_extents() {
        let c = synth_depth_scan(
            &food(Geometry::Cylinder {
                radius: 5.0,
                length: 40.0,
            }),
            &Pose::identity(),
            0.1,
            2,
        )
        .unwrap();
        let b = food_bounding_box(&c).unwrap();
        assert!((b.max.x - 20.0).abs() <= 0.1 && (b.min.x + 20.0).abs() <= 0.1);
        assert!((b.max.y - 5.0).abs() <= 0.1 && (b.min.y + 5.0).abs() <= 0.1);
        let s = synth_depth_scan(&food(Geometry::Sphere { radius: 6.0 }), &Pose::identity(), 0.1, 2).unwrap();
        let b = food_bounding_box(&s).unwrap();
        assert!((b.max.z - 6.0).abs() <= 0.1);
    }

    fn bbox(min: [f64; 3], max: [f64; 3]) -> Aabb {
        Aabb {
            min: min.into(),
            max: max.into(),
        }
    }

    #[test]
    fn bounding_box_examples() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        let b = food_bounding_box(&PointCloud::new(vec![p], 0.1).unwrap()).unwrap();
        assert_eq!((b.min, b.max), (p, p));
        let two = PointCloud::new(vec![Vector3::new(-1.0, 0.0, 0.0), p], 0.1).unwrap();
        let b = food_bounding_box(&two).unwrap();
        assert_eq!(b.min, Vector3::new(-1.0, 0.0, 0.0));
        assert_eq!(b.max, p);
        let empty = PointCloud::new(vec![], 0.1).unwrap();
        assert!(matches!(food_bounding_box(&empty), Err(Error::EmptyCloud)));
    }

    #[test]
    fn offset_examples() {
        assert_eq!(compute_offsets(&bbox([-5.0, 0.0, 0.0], [5.0, 1.0, 1.0])).dx, 0.0);
        assert_eq!(compute_offsets(&bbox([2.0, 0.0, 0.0], [8.0, 1.0, 1.0])).dx, -5.0);
        assert_eq!(compute_offsets(&bbox([0.0, 0.0, 0.0], [1.0, 10.0, 1.0])).dy, -10.0);
        assert_eq!(compute_offsets(&bbox([0.0, -4.0, 0.0], [1.0, -1.0, 1.0])).dy, 0.0);
        let caption = compute_offsets_with(&bbox([0.0, -4.0, 0.0], [1.0, -1.0, 1.0]), DyRule::MinY);
        assert_eq!(caption.dy, -4.0);
    }

    fn mouth() -> Pose {
        crate::presets::default_mouth_pose()
    }

    #[test]
    fn target_pose_frame_arithmetic() {
        let m = mouth();
        let pitch = 0.4;
        let t0 = target_pose(&m, &FoodOffsets::zero(), DEFAULT_ENTRY_DEPTH, pitch).unwrap();
        assert!(t0.translation_distance(&m) < 1e-15);
        let t = target_pose(&m, &FoodOffsets { dx: -5.0, dy: 0.0 }, DEFAULT_ENTRY_DEPTH, pitch).unwrap();
        let shift = m.inverse().transform_point(&t.position);
        assert!((shift - Vector3::new(-0.005, 0.0, 0.0)).norm() < 1e-12);
        assert!(target_pose(&m, &FoodOffsets { dx: 60.0, dy: 0.0 }, DEFAULT_ENTRY_DEPTH, pitch).is_err());
        assert!(target_pose(&m, &FoodOffsets::zero(), 0.0, pitch).is_err());
    }

    #[test]
    fn keypoints_roundtrip_world_and_pixels() {
        let m = Pose::new(
            mouth().position + Vector3::new(0.01, -0.02, 0.03),
            mouth().orientation * UnitQuaternion::from_euler_angles(0.1, -0.05, 0.2),
        );
        let kp = render_lip_keypoints(&m, 0.05, 0.02);
        let cam = CameraModel::facing(&m, 0.45);
        let got = mouth_center_from_keypoints(&kp, &cam).unwrap();
        assert!(got.translation_distance(&m) < 1e-9);
        assert!(got.angular_distance(&m) < 1e-9);

        let px = to_pixels(&kp, &cam);
        let got = mouth_center_from_keypoints(&px, &cam).unwrap();
        assert!(got.translation_distance(&m) < 1e-3);
        assert!(got.angular_distance(&m) < 1f64.to_radians());
    }

    #[test]
    fn keypoint_errors() {
        let cam = CameraModel::facing(&mouth(), 0.45);
        let mut kp = render_lip_keypoints(&mouth(), 0.05, 0.02);
        kp.retain(|k| k.label != "62");
        assert!(matches!(mouth_center_from_keypoints(&kp, &cam), Err(Error::MissingLandmark(l)) if l == "62"));
        let same: Vec<Keypoint> = INNER_LIP
            .iter()
            .map(|l| Keypoint {
                label: l.to_string(),
                coords: KeypointCoords::World { x: 1.0, y: 1.0, z: 1.0 },
            })
            .collect();
        assert!(matches!(mouth_center_from_keypoints(&same, &cam), Err(Error::DegenerateLandmarks)));
    }

    #[test]
    fn keypoint_json_forms() {
        let text = r#"[{"label":"60","u":1.0,"v":2.0},{"label":"64","x":0.1,"y":0.2,"z":0.3}]"#;
        let kp: Vec<Keypoint> = serde_json::from_str(text).unwrap();
        assert_eq!(kp[0].coords, KeypointCoords::Pixel { u: 1.0, v: 2.0 });
        assert_eq!(kp[1].coords, KeypointCoords::World { x: 0.1, y: 0.2, z: 0.3 });
    }

    #[test]
    fn cloud_file_roundtrips() {
        let f = crate::presets::food("blueberry").unwrap();
        let cloud = synth_depth_scan(&f, &mounted(&f), 0.5, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("c.csv");
        let bin = dir.path().join("c.btpc");
        cloud.write_csv(&csv).unwrap();
        cloud.write_binary(&bin).unwrap();
        assert_eq!(PointCloud::load(&csv).unwrap(), cloud);
        assert_eq!(PointCloud::load(&bin).unwrap(), cloud);
        let header = std::fs::read_to_string(&csv).unwrap();
        assert!(header.starts_with("# frame=mouth resolution_mm=0.5\n"));
    }

    fn arb_cloud() -> impl Strategy<Value = Vec<Vector3<f64>>> {
        prop::collection::vec(prop::array::uniform3(-20.0f64..20.0).prop_map(Vector3::from), 1..200)
    }

    proptest! {
        #[test]
        fn offsets_ignore_point_order(mut pts in arb_cloud(), seed in any::<u64>()) {
            let a = compute_offsets(&food_bounding_box(&PointCloud::new(pts.clone(), 0.1).unwrap()).unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(pts.as_mut_slice(), &mut rng);
            let b = compute_offsets(&food_bounding_box(&PointCloud::new(pts, 0.1).unwrap()).unwrap());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn x_translation_shifts_dx(pts in arb_cloud(), tx in -10.0f64..10.0) {
            let mut pts = pts;
            // keep the top above the tip plane
            pts.push(Vector3::new(0.0, 25.0, 0.0));
            let cloud = PointCloud::new(pts, 0.1).unwrap();
            let a = compute_offsets(&food_bounding_box(&cloud).unwrap());
            let b = compute_offsets(&food_bounding_box(&cloud.translated(&Vector3::new(tx, 0.0, 0.0))).unwrap());
            prop_assert!((b.dx - (a.dx - tx)).abs() < 1e-9);
            prop_assert_eq!(a.dy, b.dy);
        }
    }
}
