//! Wrist comfort study: IK over sampled fork poses with and without the
//! wrist, comparing arm-joint displacement from home and a personal-space
//! cost.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::kinematics::{ik_damped_least_squares, joint_displacement, ChainModel, IkParams, JointConfig, ARM_DOF};
use crate::presets;

/// Uniform box of fork poses around `center`, with bounds in the axes of `frame`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseDistribution {
    pub center: Pose,
    /// Orientation whose axes the bounds refer to (the mouth frame).
    pub frame: UnitQuaternion<f64>,
    pub translation: [[f64; 2]; 3],
    /// Rotation-vector bounds, rad.
    pub rotation: [[f64; 2]; 3],
    pub count: usize,
    pub seed: u64,
}

impl PoseDistribution {
    /// Default study box: +/-0.1 m and +/-30 degrees about the mouth axes.
    pub fn around_pre_mouth(count: usize, seed: u64) -> Self {
        let r = 30f64.to_radians();
        Self {
            center: presets::pre_mouth_pose(),
            frame: presets::default_mouth_pose().orientation,
            translation: [[-0.1, 0.1]; 3],
            rotation: [[-r, r]; 3],
            count,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidParameter("sample count must be > 0".into()));
        }
        let ok = |b: &[f64; 2]| b[0].is_finite() && b[1].is_finite() && b[0] <= b[1];
        if !self.translation.iter().chain(&self.rotation).all(ok) {
            return Err(Error::InvalidParameter("bounds must be finite with min <= max".into()));
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, b: &[f64; 2]) -> f64 {
    // always consume one draw so samples stay aligned across bound changes
    let u: f64 = rng.gen();
    if b[0] == b[1] {
        b[0]
    } else {
        b[0] + (b[1] - b[0]) * u
    }
}

pub fn sample_fork_poses(dist: &PoseDistribution) -> Result<Vec<Pose>> {
    dist.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(dist.seed);
    let poses = (0..dist.count)
        .map(|_| {
            let t = Vector3::new(
                draw(&mut rng, &dist.translation[0]),
                draw(&mut rng, &dist.translation[1]),
                draw(&mut rng, &dist.translation[2]),
            );
            let r = Vector3::new(
                draw(&mut rng, &dist.rotation[0]),
                draw(&mut rng, &dist.rotation[1]),
                draw(&mut rng, &dist.rotation[2]),
            );
            let position = dist.center.position + dist.frame * t;
            let orientation = if r == Vector3::zeros() {
                dist.center.orientation
            } else {
                let world_axis = dist.frame * r;
                UnitQuaternion::from_scaled_axis(world_axis) * dist.center.orientation
            };
            Pose::new(position, orientation)
        })
        .collect();
    Ok(poses)
}

/// Personal-space cone at the user's head plus per-point penalty weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortParams {
    pub head: Vector3<f64>,
    /// Cone axis, pointing from the face toward the robot.
    pub axis: Vector3<f64>,
    pub half_angle: f64,
    pub length: f64,
    /// Weight of each arm-joint origin.
    pub arm_weight: f64,
    /// Weight of each wrist-joint origin.
    pub wrist_weight: f64,
    /// Weight of the fork tip.
    pub tip_weight: f64,
}

impl ComfortParams {
    /// Cone opening from behind the default mouth toward the robot.
    pub fn default_for_scene() -> Self {
        let m = presets::default_mouth_pose();
        let axis = m.z_axis();
        Self {
            head: m.position - axis * 0.10,
            axis,
            half_angle: 30f64.to_radians(),
            length: 0.5,
            arm_weight: 1.0,
            wrist_weight: 0.0,
            tip_weight: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_angle > 0.0 && self.half_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParameter("cone half-angle must be in (0, pi/2)".into()));
        }
        if !(self.length > 0.0) || (self.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("cone needs length > 0 and a unit axis".into()));
        }
        if !(self.arm_weight >= 0.0 && self.wrist_weight >= 0.0 && self.tip_weight >= 0.0) {
            return Err(Error::InvalidParameter("weights must be >= 0".into()));
        }
        Ok(())
    }

    /// Radial depth of `p` inside the cone; zero outside.
    pub fn penetration(&self, p: &Vector3<f64>) -> f64 {
        let rel = p - self.head;
        let depth = rel.dot(&self.axis);
        if depth <= 0.0 || depth > self.length {
            return 0.0;
        }
        let radial = (rel - self.axis * depth).norm();
        (depth * self.half_angle.tan() - radial).max(0.0)
    }
}

/// Weighted cone penetration of every joint origin and the fork tip.
pub fn comfort_cost(chain: &ChainModel, q: &JointConfig, params: &ComfortParams) -> Result<f64> {
    let (frames, tip) = chain.joint_frames(q)?;
    let arm = chain.arm_dof();
    let joints: f64 = frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let w = if i < arm { params.arm_weight } else { params.wrist_weight };
            w * params.penetration(&f.position)
        })
        .sum();
    Ok(joints + params.tip_weight * params.penetration(&tip.position))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub pose: Pose,
    pub converged_with: bool,
    pub converged_without: bool,
    pub displacement_with: Vec<f64>,
    pub displacement_without: Vec<f64>,
    pub mean_displacement_with: f64,
    pub mean_displacement_without: f64,
    pub cost_with: f64,
    pub cost_without: f64,
}

impl SampleRecord {
    pub fn included(&self) -> bool {
        self.converged_with && self.converged_without
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub per_joint_displacement: [f64; ARM_DOF],
    pub mean_displacement: f64,
    pub mean_cost: f64,
    pub max_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    /// Sum of ranks of positive differences (without minus with).
    pub w_plus: f64,
    /// Non-zero differences entering the test.
    pub n: usize,
    pub z: f64,
    /// One-sided p-value for "without exceeds with".
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub sample_count: usize,
    pub included_count: usize,
    pub convergence_rate: f64,
    pub seed: u64,
    pub with_wrist: ChainStats,
    pub without_wrist: ChainStats,
    pub displacement_test: PairedTest,
    pub cost_test: PairedTest,
    #[serde(skip)]
    pub samples: Vec<SampleRecord>,
}

impl StudyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn samples_csv(&self) -> String {
        let mut out = String::from("index,px,py,pz,qw,qx,qy,qz,converged_with,converged_without");
        for side in ["with", "without"] {
            for j in 1..=ARM_DOF {
                let _ = write!(out, ",dq{j}_{side}");
            }
        }
        out.push_str(",mean_disp_with,mean_disp_without,cost_with,cost_without\n");
        for s in &self.samples {
            let _ = write!(out, "{}", s.index);
            for v in s.pose.to_array() {
                let _ = write!(out, ",{v}");
            }
            let _ = write!(out, ",{},{}", s.converged_with as u8, s.converged_without as u8);
            for v in s.displacement_with.iter().chain(&s.displacement_without) {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(
                out,
                ",{},{},{},{}",
                s.mean_displacement_with, s.mean_displacement_without, s.cost_with, s.cost_without
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("study_report.json"), self.to_json())?;
        std::fs::write(dir.join("study_samples.csv"), self.samples_csv())?;
        Ok(())
    }
}

/// One-sided Wilcoxon signed-rank test (normal approximation with tie and
/// continuity corrections) that the differences are positive. Zeros are dropped.
pub fn wilcoxon_signed_rank(differences: &[f64]) -> PairedTest {
    let mut d: Vec<f64> = differences.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return PairedTest {
            w_plus: 0.0,
            n: 0,
            z: 0.0,
            p_value: 1.0,
        };
    }
    d.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut w_plus = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        w_plus += d[i..=j].iter().filter(|v| **v > 0.0).count() as f64 * rank;
        i = j + 1;
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let diff = w_plus - mean;
    let corrected = diff - 0.5 * diff.signum();
    let z = if var > 0.0 { corrected / var.sqrt() } else { 0.0 };
    let normal = Normal::standard();
    PairedTest {
        w_plus,
        n,
        z,
        p_value: normal.sf(z),
    }
}

fn check_shared_arm(a: &ChainModel, b: &ChainModel) -> Result<()> {
    let (ra, rb) = (a.records(), b.records());
    let same = a.arm_dof() == ARM_DOF
        && b.arm_dof() == ARM_DOF
        && ra[..ARM_DOF]
            .iter()
            .zip(&rb[..ARM_DOF])
            .all(|(x, y)| x.fixed_offset == y.fixed_offset && x.axis == y.axis && x.limits == y.limits);
    if same {
        Ok(())
    } else {
        Err(Error::InvalidParameter("chains must share the same 7 arm joints".into()))
    }
}

/// Solves one sampled pose on both chains from the shared home seed.
pub fn evaluate_sample(
    index: usize,
    pose: &Pose,
    chain_with: &ChainModel,
    chain_without: &ChainModel,
    ik: &IkParams,
    comfort: &ComfortParams,
    home: &JointConfig,
) -> Result<SampleRecord> {
    let arm: Vec<usize> = (0..ARM_DOF).collect();
    let solve = |chain: &ChainModel| -> Result<(bool, Vec<f64>, f64, f64)> {
        let seed = home.padded(chain.dof());
        let sol = ik_damped_least_squares(chain, pose, &seed, ik)?;
        let disp = joint_displacement(&sol.q, &seed, &arm)?;
        let cost = comfort_cost(chain, &sol.q, comfort)?;
        Ok((sol.converged, disp.per_joint, disp.mean, cost))
    };
    let (cw, dw, mw, kw) = solve(chain_with)?;
    let (co, d_o, mo, ko) = solve(chain_without)?;
    Ok(SampleRecord {
        index,
        pose: *pose,
        converged_with: cw,
        converged_without: co,
        displacement_with: dw,
        displacement_without: d_o,
        mean_displacement_with: mw,
        mean_displacement_without: mo,
        cost_with: kw,
        cost_without: ko,
    })
}

fn chain_stats(samples: &[&SampleRecord], with: bool) -> ChainStats {
    let n = samples.len().max(1) as f64;
    let mut per_joint = [0.0; ARM_DOF];
    let mut disp = 0.0;
    let mut cost = 0.0;
    let mut max_cost: f64 = 0.0;
    for s in samples {
        let (d, m, c) = if with {
            (&s.displacement_with, s.mean_displacement_with, s.cost_with)
        } else {
            (&s.displacement_without, s.mean_displacement_without, s.cost_without)
        };
        for (acc, v) in per_joint.iter_mut().zip(d) {
            *acc += v;
        }
        disp += m;
        cost += c;
        max_cost = max_cost.max(c);
    }
    ChainStats {
        per_joint_displacement: per_joint.map(|v| v / n),
        mean_displacement: disp / n,
        mean_cost: cost / n,
        max_cost,
    }
}

/// Reduces per-sample records (in index order) into a report.
pub fn summarize(samples: Vec<SampleRecord>, seed: u64) -> Result<StudyReport> {
    let included: Vec<&SampleRecord> = samples.iter().filter(|s| s.included()).collect();
    let rate = included.len() as f64 / samples.len().max(1) as f64;
    if rate < 0.5 {
        return Err(Error::StudyInvalid { rate });
    }
    let disp_diff: Vec<f64> = included
        .iter()
        .map(|s| s.mean_displacement_without - s.mean_displacement_with)
        .collect();
    let cost_diff: Vec<f64> = included.iter().map(|s| s.cost_without - s.cost_with).collect();
    Ok(StudyReport {
        sample_count: samples.len(),
        included_count: included.len(),
        convergence_rate: rate,
        seed,
        with_wrist: chain_stats(&included, true),
        without_wrist: chain_stats(&included, false),
        displacement_test: wilcoxon_signed_rank(&disp_diff),
        cost_test: wilcoxon_signed_rank(&cost_diff),
        samples,
    })
}

pub fn run_wrist_study(
    chain_with: &ChainModel,
    chain_without: &ChainModel,
    dist: &PoseDistribution,
    ik_params: &IkParams,
    comfort: &ComfortParams,
    home: &JointConfig,
) -> Result<StudyReport> {
    check_shared_arm(chain_with, chain_without)?;
    comfort.validate()?;
    if home.len() < ARM_DOF {
        return Err(Error::DimensionMismatch {
            expected: ARM_DOF,
            got: home.len(),
        });
    }
    let arm_home = JointConfig(home.as_slice()[..ARM_DOF].to_vec());
    let poses = sample_fork_poses(dist)?;
    let samples = poses
        .par_iter()
        .enumerate()
        .map(|(i, p)| evaluate_sample(i, p, chain_with, chain_without, ik_params, comfort, &arm_home))
        .collect::<Result<Vec<_>>>()?;
    summarize(samples, dist.seed)
}

/// Study description as read from a config file; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub count: usize,
    pub seed: u64,
    pub translation_bound_m: f64,
    pub rotation_bound_deg: f64,
    pub ik: IkParams,
    pub comfort: Option<ComfortParams>,
    pub chain_with: Option<String>,
    pub chain_without: Option<String>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            count: 10_000,
            seed: 0,
            translation_bound_m: 0.1,
            rotation_bound_deg: 30.0,
            ik: IkParams::default(),
            comfort: None,
            chain_with: None,
            chain_without: None,
        }
    }
}

impl StudyConfig {
    pub fn distribution(&self) -> PoseDistribution {
        let t = self.translation_bound_m;
        let r = self.rotation_bound_deg.to_radians();
        PoseDistribution {
            translation: [[-t, t]; 3],
            rotation: [[-r, r]; 3],
            ..PoseDistribution::around_pre_mouth(self.count, self.seed)
        }
    }

    pub fn run(&self, base_dir: Option<&Path>) -> Result<StudyReport> {
        let load = |name: &Option<String>, fallback: fn() -> ChainModel| -> Result<ChainModel> {
            match name {
                None => Ok(fallback()),
                Some(n) => match presets::chain_by_name(n) {
                    Ok(c) => Ok(c),
                    Err(_) => {
                        let p = Path::new(n);
                        let p = match base_dir {
                            Some(b) if p.is_relative() => b.join(p),
                            _ => p.to_path_buf(),
                        };
                        ChainModel::load(&p)
                    }
                },
            }
        };
        let with = load(&self.chain_with, presets::chain_with_wrist)?;
        let without = load(&self.chain_without, presets::chain_without_wrist)?;
        let comfort = self.comfort.unwrap_or_else(ComfortParams::default_for_scene);
        let home = presets::home_config(&without);
        run_wrist_study(&with, &without, &self.distribution(), &self.ik, &comfort, &home)
    }
}
