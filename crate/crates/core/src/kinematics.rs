//! Serial-chain kinematics for the arm with or without the two-joint wrist.
//!
//! Each joint is a fixed offset followed by a revolute rotation about a unit
//! axis expressed in the offset frame. The tool tip is a fixed transform
//! after the last joint.

use std::path::Path;

use nalgebra::{Matrix6, Matrix6xX, UnitQuaternion, Unit, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;

/// Number of arm joints; the wrist adds two more.
pub const ARM_DOF: usize = 7;
pub const WRIST_DOF: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub fixed_offset: Pose,
    pub axis: [f64; 3],
    pub limits: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChainFile {
    #[serde(default)]
    name: String,
    has_wrist: bool,
    joints: Vec<JointRecord>,
    tool_tip: Pose,
}

#[derive(Debug, Clone, PartialEq)]
struct Joint {
    offset: Pose,
    axis: Unit<Vector3<f64>>,
    limits: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    name: String,
    joints: Vec<Joint>,
    has_wrist: bool,
    tool_tip: Pose,
}

/// Joint angles in radians, ordered base to tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(pub Vec<f64>);

impl JointConfig {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Extends an arm configuration with trailing zeros up to `n` joints.
    pub fn padded(&self, n: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(n.max(v.len()), 0.0);
        Self(v)
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl ChainModel {
    /// Builds a chain from joint records. Any DOF count is accepted here;
    /// [`ChainModel::from_json`] enforces the 7/9 arm layout.
    pub fn new(name: impl Into<String>, records: &[JointRecord], tool_tip: Pose, has_wrist: bool) -> Result<Self> {
        let mut joints = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let axis = Vector3::from(r.axis);
            if !axis.iter().all(|x| x.is_finite()) || axis.norm() < 1e-12 {
                return Err(Error::InvalidParameter(format!("joint {i}: degenerate axis")));
            }
            if !(r.limits[0] <= r.limits[1]) {
                return Err(Error::InvalidParameter(format!("joint {i}: limits min > max")));
            }
            joints.push(Joint {
                offset: r.fixed_offset,
                axis: Unit::new_normalize(axis),
                limits: r.limits,
            });
        }
        if has_wrist && joints.len() < WRIST_DOF {
            return Err(Error::InvalidParameter("wrist chain needs at least two joints".into()));
        }
        Ok(Self {
            name: name.into(),
            joints,
            has_wrist,
            tool_tip,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ChainFile = serde_json::from_str(text)?;
        let expected = if file.has_wrist { ARM_DOF + WRIST_DOF } else { ARM_DOF };
        if file.joints.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: file.joints.len(),
            });
        }
        Self::new(file.name, &file.joints, file.tool_tip, file.has_wrist)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let file = ChainFile {
            name: self.name.clone(),
            has_wrist: self.has_wrist,
            joints: self.records(),
            tool_tip: self.tool_tip,
        };
        serde_json::to_string_pretty(&file).expect("chain serializes")
    }

    pub fn records(&self) -> Vec<JointRecord> {
        self.joints
            .iter()
            .map(|j| JointRecord {
                name: None,
                fixed_offset: j.offset,
                axis: [j.axis.x, j.axis.y, j.axis.z],
                limits: j.limits,
            })
            .collect()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn has_wrist(&self) -> bool {
        self.has_wrist
    }

    /// Joints belonging to the arm proper (excludes the wrist).
    pub fn arm_dof(&self) -> usize {
        if self.has_wrist {
            self.dof() - WRIST_DOF
        } else {
            self.dof()
        }
    }

    pub fn tool_tip(&self) -> &Pose {
        &self.tool_tip
    }

    pub fn limits(&self) -> Vec<[f64; 2]> {
        self.joints.iter().map(|j| j.limits).collect()
    }

    /// Returns a copy with the given joint's limits replaced.
    pub fn with_limits(&self, joint: usize, limits: [f64; 2]) -> Result<Self> {
        if joint >= self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: joint,
            });
        }
        let mut out = self.clone();
        out.joints[joint].limits = limits;
        Ok(out)
    }

    pub fn check(&self, q: &JointConfig) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    pub fn clamp(&self, q: &mut JointConfig) {
        for (a, j) in q.0.iter_mut().zip(&self.joints) {
            *a = a.clamp(j.limits[0], j.limits[1]);
        }
    }

    pub fn within_limits(&self, q: &JointConfig) -> bool {
        q.0.iter()
            .zip(&self.joints)
            .all(|(a, j)| *a >= j.limits[0] && *a <= j.limits[1])
    }

    /// World frames at each joint (after the fixed offset, before the joint
    /// rotation), followed by the tool tip.
    pub fn joint_frames(&self, q: &JointConfig) -> Result<(Vec<Pose>, Pose)> {
        self.check(q)?;
        let mut frames = Vec::with_capacity(self.dof());
        let mut t = Pose::identity();
        for (j, &angle) in self.joints.iter().zip(q.as_slice()) {
            t = t.compose(&j.offset);
            frames.push(t);
            t = t.compose(&Pose::from_rotation(UnitQuaternion::from_axis_angle(&j.axis, angle)));
        }
        Ok((frames, t.compose(&self.tool_tip)))
    }

    /// Transform from the last arm joint's rotated frame to the tool tip with
    /// the wrist joints at zero. For a chain without wrist this is the tool tip.
    pub fn arm_to_tip_at_zero_wrist(&self) -> Pose {
        let first = if self.has_wrist { self.arm_dof() } else { self.dof() };
        self.joints[first..]
            .iter()
            .fold(Pose::identity(), |acc, j| acc.compose(&j.offset))
            .compose(&self.tool_tip)
    }

    /// Fixed transform that maps the tip of `without` onto the tip of `self`
    /// when both share arm joints and the wrist sits at zero.
    pub fn wrist_offset_relative_to(&self, without: &ChainModel) -> Pose {
        without
            .arm_to_tip_at_zero_wrist()
            .inverse()
            .compose(&self.arm_to_tip_at_zero_wrist())
    }
}

pub fn forward_kinematics(chain: &ChainModel, q: &JointConfig) -> Result<Pose> {
    Ok(chain.joint_frames(q)?.1)
}

/// Geometric Jacobian at the tool tip; rows are linear then angular velocity.
pub fn jacobian(chain: &ChainModel, q: &JointConfig) -> Result<Matrix6xX<f64>> {
    let (frames, tip) = chain.joint_frames(q)?;
    Ok(jacobian_from_frames(chain, &frames, &tip))
}

fn jacobian_from_frames(chain: &ChainModel, frames: &[Pose], tip: &Pose) -> Matrix6xX<f64> {
    let mut j = Matrix6xX::zeros(frames.len());
    for (i, (f, joint)) in frames.iter().zip(&chain.joints).enumerate() {
        let z = f.orientation * joint.axis.into_inner();
        let lin = z.cross(&(tip.position - f.position));
        j.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        j.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
    }
    j
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams {
    pub damping: f64,
    pub pos_tol: f64,
    pub rot_tol: f64,
    pub max_iter: usize,
    /// Per-iteration cap on the position error fed to the solver, m.
    pub max_step_pos: f64,
    /// Per-iteration cap on the rotation error fed to the solver, rad.
    pub max_step_rot: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            damping: 0.05,
            pos_tol: 1e-3,
            rot_tol: 1e-2,
            max_iter: 200,
            max_step_pos: 0.1,
            max_step_rot: 0.5,
        }
    }
}

impl IkParams {
    fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0) || !(self.pos_tol > 0.0) || !(self.rot_tol > 0.0) || !(self.max_step_pos > 0.0) || !(self.max_step_rot > 0.0) {
            return Err(Error::InvalidParameter(
                "damping and tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub q: JointConfig,
    pub converged: bool,
    pub iterations: usize,
    /// Remaining `[position; rotation]` error of the returned configuration.
    pub residual: Vector6<f64>,
}

impl IkSolution {
    pub fn position_error(&self) -> f64 {
        self.residual.fixed_rows::<3>(0).norm()
    }

    pub fn rotation_error(&self) -> f64 {
        self.residual.fixed_rows::<3>(3).norm()
    }
}

pub fn ik_damped_least_squares(
    chain: &ChainModel,
    target: &Pose,
    seed: &JointConfig,
    params: &IkParams,
) -> Result<IkSolution> {
    ik_with_trace(chain, target, seed, params, None)
}

/// Same as [`ik_damped_least_squares`], optionally recording every iterate.
pub fn ik_with_trace(
    chain: &ChainModel,
    target: &Pose,
    seed: &JointConfig,
    params: &IkParams,
    trace: Option<&mut Vec<JointConfig>>,
) -> Result<IkSolution> {
    chain.check(seed)?;
    params.validate()?;
    let a = attempt(chain, target, seed.clone(), params, params.max_iter, None, trace)?;
    Ok(a.into_solution(params.max_iter))
}

/// Restart schedule for [`ik_multistart`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RestartParams {
    /// An attempt is abandoned when its best score has not dropped by
    /// `stall_ratio` within this many iterations.
    pub stall_window: usize,
    pub stall_ratio: f64,
    /// Seed for the uniformly drawn restart configurations.
    pub rng_seed: u64,
}

impl Default for RestartParams {
    fn default() -> Self {
        Self {
            stall_window: 10,
            stall_ratio: 0.5,
            rng_seed: 0,
        }
    }
}

/// DLS with restarts from random in-limit configurations, sharing a total
/// budget of `params.max_iter` iterations. The first attempt starts at `seed`.
pub fn ik_multistart(
    chain: &ChainModel,
    target: &Pose,
    seed: &JointConfig,
    params: &IkParams,
    restarts: &RestartParams,
) -> Result<IkSolution> {
    use rand::{Rng, SeedableRng};

    chain.check(seed)?;
    params.validate()?;
    if restarts.stall_window == 0 || !(restarts.stall_ratio > 0.0 && restarts.stall_ratio < 1.0) {
        return Err(Error::InvalidParameter("stall window must be > 0 and ratio in (0, 1)".into()));
    }
    let limits = chain.limits();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(restarts.rng_seed);
    let mut q0 = seed.clone();
    let mut used = 0;
    let mut best: Option<Attempt> = None;
    while used < params.max_iter {
        let a = attempt(chain, target, q0, params, params.max_iter - used, Some(restarts), None)?;
        used += a.iterations;
        if a.converged {
            return Ok(IkSolution {
                q: a.q,
                converged: true,
                iterations: used,
                residual: a.residual,
            });
        }
        if best.as_ref().is_none_or(|b| a.score < b.score) {
            best = Some(a);
        }
        q0 = JointConfig(limits.iter().map(|l| rng.gen_range(l[0]..=l[1])).collect());
    }
    let b = best.expect("budget allows at least one attempt");
    Ok(b.into_solution(params.max_iter))
}

struct Attempt {
    q: JointConfig,
    converged: bool,
    iterations: usize,
    residual: Vector6<f64>,
    score: f64,
}

impl Attempt {
    fn into_solution(self, max_iter: usize) -> IkSolution {
        IkSolution {
            q: self.q,
            converged: self.converged,
            iterations: if self.converged { self.iterations } else { max_iter },
            residual: self.residual,
        }
    }
}

/// One DLS descent. `iterations` counts the steps taken.
fn attempt(
    chain: &ChainModel,
    target: &Pose,
    mut q: JointConfig,
    params: &IkParams,
    budget: usize,
    stall: Option<&RestartParams>,
    mut trace: Option<&mut Vec<JointConfig>>,
) -> Result<Attempt> {
    let lambda2 = params.damping * params.damping;
    let mut best: Option<(f64, JointConfig, Vector6<f64>)> = None;
    let mut history: Vec<f64> = Vec::new();

    for iteration in 0..=budget {
        let (frames, tip) = chain.joint_frames(&q)?;
        let e = tip.error_to(target);
        let pos_err = e.fixed_rows::<3>(0).norm();
        let rot_err = e.fixed_rows::<3>(3).norm();
        if pos_err < params.pos_tol && rot_err < params.rot_tol {
            return Ok(Attempt {
                q,
                converged: true,
                iterations: iteration,
                residual: e,
                score: 0.0,
            });
        }
        let score = pos_err / params.pos_tol + rot_err / params.rot_tol;
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, q.clone(), e));
        }
        let best_score = best.as_ref().map_or(score, |b| b.0);
        history.push(best_score);
        let stalled = stall.is_some_and(|r| {
            history.len() > r.stall_window && best_score > history[history.len() - 1 - r.stall_window] * r.stall_ratio
        });
        if iteration == budget || stalled {
            let (score, q, residual) = best.expect("at least one iterate evaluated");
            return Ok(Attempt {
                q,
                converged: false,
                iterations: iteration.max(1),
                residual,
                score,
            });
        }

        let j = jacobian_from_frames(chain, &frames, &tip);
        let Some(dq) = limited_step(j, &clamp_error(&e, params), lambda2, &q, chain) else {
            let (score, q, residual) = best.expect("at least one iterate evaluated");
            return Ok(Attempt {
                q,
                converged: false,
                iterations: iteration.max(1),
                residual,
                score,
            });
        };
        for (a, d) in q.0.iter_mut().zip(dq.iter()) {
            *a += d;
        }
        chain.clamp(&mut q);
        if let Some(t) = trace.as_deref_mut() {
            t.push(q.clone());
        }
    }
    unreachable!("loop returns on the final iteration")
}

/// DLS step that drops joints pinned at a limit and pushing outward, so the
/// remaining joints absorb the error instead of the clamp eating the step.
fn limited_step(
    mut j: Matrix6xX<f64>,
    e: &Vector6<f64>,
    lambda2: f64,
    q: &JointConfig,
    chain: &ChainModel,
) -> Option<nalgebra::DVector<f64>> {
    let limits = chain.limits();
    let mut dq = None;
    for _ in 0..3 {
        let jjt: Matrix6<f64> = &j * j.transpose() + Matrix6::identity() * lambda2;
        let step = j.transpose() * jjt.cholesky()?.solve(e);
        let mut masked = false;
        for (i, (a, lim)) in q.0.iter().zip(&limits).enumerate() {
            let pinned_low = *a <= lim[0] && step[i] < 0.0;
            let pinned_high = *a >= lim[1] && step[i] > 0.0;
            if (pinned_low || pinned_high) && j.column(i).iter().any(|v| *v != 0.0) {
                j.column_mut(i).fill(0.0);
                masked = true;
            }
        }
        dq = Some(step);
        if !masked {
            break;
        }
    }
    dq
}

fn clamp_error(e: &Vector6<f64>, params: &IkParams) -> Vector6<f64> {
    let mut out = *e;
    let p = e.fixed_rows::<3>(0).norm();
    if p > params.max_step_pos {
        out.fixed_rows_mut::<3>(0).scale_mut(params.max_step_pos / p);
    }
    let r = e.fixed_rows::<3>(3).norm();
    if r > params.max_step_rot {
        out.fixed_rows_mut::<3>(3).scale_mut(params.max_step_rot / r);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub per_joint: Vec<f64>,
    pub mean: f64,
}

/// Absolute per-joint difference restricted to `subset`, with its arithmetic mean.
pub fn joint_displacement(a: &JointConfig, b: &JointConfig, subset: &[usize]) -> Result<Displacement> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if subset.is_empty() {
        return Err(Error::InvalidParameter("empty joint subset".into()));
    }
    let mut per_joint = Vec::with_capacity(subset.len());
    for &i in subset {
        if i >= a.len() {
            return Err(Error::InvalidParameter(format!("joint index {i} out of range")));
        }
        per_joint.push((a.0[i] - b.0[i]).abs());
    }
    let mean = per_joint.iter().sum::<f64>() / per_joint.len() as f64;
    Ok(Displacement { per_joint, mean })
}
