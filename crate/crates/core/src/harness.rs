//! 1 kHz trial loop: perception, planning, state machine, reactive
//! impedance control and the simulated user, plus outcome classification,
//! batch suites and trajectory export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{
    desired_wrench, reactive_term, ControllerState, GainSchedule, ImpedanceParams, SafetyLatch, SafetyRule,
    Wrench, DEFAULT_SAFETY_LIMIT, TICK_PERIOD,
};
use crate::error::{Error, Result};
use crate::geometry::{rotation_log, Pose};
use crate::human::{
    bite_force, contact_force, BiteScript, Disturbance, FoodPreset, FoodStatus, FoodTracker, HeadMotion,
    HeadPerturbation, MouthModel,
};
use crate::kinematics::{ik_damped_least_squares, ChainModel, IkParams, JointConfig};
use crate::perception::{
    compute_offsets, food_bounding_box, mounted, synth_depth_scan, target_pose, FoodOffsets, DEFAULT_RESOLUTION_MM,
};
use crate::presets;
use crate::transfer::{
    min_jerk, plan_transfer, step, BiteDetector, EventKind, FsmContext, FsmEvent, Sensors, TrajectoryConfig,
    TrajectoryPlan, TransferPhase,
};

pub const DEFAULT_VIRTUAL_MASS: [f64; 6] = [2.0, 2.0, 2.0, 0.02, 0.02, 0.02];
pub const DEFAULT_STIFFNESS: [f64; 6] = [200.0, 200.0, 200.0, 10.0, 10.0, 10.0];
pub const BITE_THRESHOLD: f64 = 0.3;
/// Head lean toward a stationary fork in fixed-pose mode, m.
pub const FIXED_POSE_LEAN: f64 = 0.018;

pub const TRAJECTORY_HEADER: &str = "t_s,px,py,pz,qw,qx,qy,qz,fx,fy,fz,tau_x,tau_y,tau_z,phase,\
sp_px,sp_py,sp_pz,sp_qw,sp_qx,sp_qy,sp_qz,deviation_m";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Ours,
    LessReactive,
    MoreReactive,
    FixedPose,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ours, Method::LessReactive, Method::MoreReactive, Method::FixedPose];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::LessReactive => "less-reactive",
            Method::MoreReactive => "more-reactive",
            Method::FixedPose => "fixed-pose",
        }
    }

    pub fn from_name(name: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == name.trim().to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| Error::UnknownPreset(name.into()))
    }

    pub fn gains(self) -> GainSchedule {
        match self {
            Method::Ours | Method::FixedPose => GainSchedule::phased(),
            Method::LessReactive => GainSchedule::less_reactive(),
            Method::MoreReactive => GainSchedule::more_reactive(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TransferMode {
    #[default]
    InMouth,
    /// The fork holds at the pre-mouth pose and the user leans in by `lean_m`.
    FixedPose { lean_m: f64 },
}

fn scene_mouth() -> MouthModel {
    MouthModel {
        center: presets::default_mouth_pose(),
        ..MouthModel::default()
    }
}

fn default_chain() -> String {
    "fixed".into()
}

fn default_food() -> String {
    "pineapple".into()
}

fn default_impedance() -> ImpedanceParams {
    ImpedanceParams::critically_damped(DEFAULT_STIFFNESS, &DEFAULT_VIRTUAL_MASS)
}

fn default_mass() -> [f64; 6] {
    DEFAULT_VIRTUAL_MASS
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY_LIMIT
}

fn default_grip() -> f64 {
    500.0
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION_MM
}

fn default_true() -> bool {
    true
}

/// Everything one trial needs. Only `seed` is required in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    /// Preset name or path to a chain JSON file.
    #[serde(default = "default_chain")]
    pub chain: String,
    #[serde(default = "default_food")]
    pub food: String,
    #[serde(default = "scene_mouth")]
    pub mouth: MouthModel,
    /// Perception error on the mouth center, mouth frame, m.
    #[serde(default)]
    pub mouth_error: [f64; 3],
    #[serde(default)]
    pub bite: BiteScript,
    #[serde(default)]
    pub head: HeadPerturbation,
    #[serde(default)]
    pub disturbance: Disturbance,
    #[serde(default)]
    pub gains: GainSchedule,
    #[serde(default = "default_impedance")]
    pub impedance: ImpedanceParams,
    #[serde(default = "default_mass")]
    pub virtual_mass: [f64; 6],
    #[serde(default = "default_safety")]
    pub safety_limit: f64,
    #[serde(default)]
    pub safety_rule: SafetyRule,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub mode: TransferMode,
    /// Teeth-on-food grip stiffness along the mouth z axis, N/m.
    #[serde(default = "default_grip")]
    pub grip_stiffness: f64,
    #[serde(default = "default_resolution")]
    pub scan_resolution_mm: f64,
    /// Recover joint configurations per tick for the log.
    #[serde(default = "default_true")]
    pub log_joints: bool,
}

impl Scenario {
    pub fn nominal(seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({ "seed": seed })).expect("defaults deserialize")
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.gains = method.gains();
        self.mode = match method {
            Method::FixedPose => TransferMode::FixedPose { lean_m: FIXED_POSE_LEAN },
            _ => TransferMode::InMouth,
        };
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn resolve_chain(&self) -> Result<ChainModel> {
        match presets::chain_by_name(&self.chain) {
            Ok(c) => Ok(c),
            Err(_) if Path::new(&self.chain).exists() => ChainModel::load(Path::new(&self.chain)),
            Err(_) => Err(Error::Config(format!("unknown chain {:?}", self.chain))),
        }
    }

    pub fn resolve_food(&self) -> Result<FoodPreset> {
        presets::food(&self.food).map_err(|_| Error::Config(format!("unknown food preset {:?}", self.food)))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.mouth.validate().map_err(cfg)?;
        self.bite.validate().map_err(cfg)?;
        self.head.validate().map_err(cfg)?;
        self.disturbance.validate().map_err(cfg)?;
        self.gains.validate().map_err(cfg)?;
        self.impedance.validate().map_err(cfg)?;
        if !self.virtual_mass.iter().all(|m| *m > 0.0 && m.is_finite()) {
            return Err(Error::Config("virtual mass entries must be > 0".into()));
        }
        if !(self.safety_limit > 0.0) || !(self.grip_stiffness >= 0.0) || !(self.scan_resolution_mm > 0.0) {
            return Err(Error::Config("safety limit, grip stiffness and scan resolution must be positive".into()));
        }
        if let TransferMode::FixedPose { lean_m } = self.mode {
            if !(lean_m >= 0.0) {
                return Err(Error::Config("lean must be >= 0".into()));
            }
        }
        if !self.mouth_error.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("mouth error must be finite".into()));
        }
        Ok(())
    }
}

/// Counter-based seed derivation (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualRobotState {
    pub pose: Pose,
    /// `[v; w]`, world frame.
    pub twist: Vector6<f64>,
    pub mass: [f64; 6],
    pub q: Option<JointConfig>,
}

impl VirtualRobotState {
    pub fn at_rest(pose: Pose, mass: [f64; 6]) -> Self {
        Self {
            pose,
            twist: Vector6::zeros(),
            mass,
            q: None,
        }
    }
}

/// Semi-implicit Euler step of the virtual-mass plant under `net`.
pub fn admittance_step(state: &VirtualRobotState, net: &Wrench, dt: f64) -> VirtualRobotState {
    let n = net.to_vector();
    let mut next = state.clone();
    for i in 0..6 {
        next.twist[i] += n[i] / state.mass[i] * dt;
    }
    let v = next.twist.fixed_rows::<3>(0).into_owned();
    let w = next.twist.fixed_rows::<3>(3).into_owned();
    next.pose = Pose::new(
        state.pose.position + v * dt,
        UnitQuaternion::from_scaled_axis(w * dt) * state.pose.orientation,
    );
    next
}

/// Static inputs of a trial after perception and planning.
#[derive(Debug, Clone)]
pub struct World {
    pub mouth: MouthModel,
    pub head: HeadMotion,
    pub mode: TransferMode,
    pub bite: BiteScript,
    pub disturbance: Disturbance,
    pub food: FoodPreset,
    pub gains: GainSchedule,
    pub impedance: ImpedanceParams,
    pub plan: TrajectoryPlan,
    pub exit_axis: Vector3<f64>,
    pub chain: Option<ChainModel>,
}

impl World {
    /// True mouth pose at `t`, given the phase timing of the state machine.
    pub fn mouth_at(&self, t: f64, fsm: &FsmContext, cfg: &TrajectoryConfig) -> MouthModel {
        let m = self.mouth.center;
        let mut offset = self.head.offset(t);
        if let TransferMode::FixedPose { lean_m } = self.mode {
            let local = t - fsm.phase_start;
            let s = match fsm.phase {
                TransferPhase::Entry => min_jerk(local / cfg.entry_s),
                TransferPhase::BiteWait => 1.0,
                TransferPhase::Exit => 1.0 - min_jerk(local / cfg.exit_s),
                _ => 0.0,
            };
            offset.z += lean_m * s;
        }
        self.mouth
            .with_center(Pose::new(m.position + m.orientation * offset, m.orientation))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickState {
    pub tick: u64,
    pub robot: VirtualRobotState,
    pub ctrl: ControllerState,
    pub fsm: FsmContext,
    pub latch: SafetyLatch,
    pub food: FoodTracker,
    pub prev_setpoint: Option<Pose>,
}

impl TickState {
    pub fn clock(&self, dt: f64) -> f64 {
        self.tick as f64 * dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub pose: Pose,
    pub setpoint: Pose,
    /// Measured wrench at the tool.
    pub f_m: Wrench,
    pub phase: TransferPhase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
}

impl TickRecord {
    pub fn deviation(&self) -> f64 {
        self.pose.translation_distance(&self.setpoint)
    }
}

/// One control tick: sense, safety, state machine, impedance, reactive term,
/// plant integration, log.
pub fn simulate_tick(
    state: &TickState,
    world: &World,
    cfg: &TrajectoryConfig,
    dt: f64,
) -> Result<(TickState, TickRecord, Vec<FsmEvent>)> {
    let clock = state.clock(dt);
    let robot = &state.robot;

    // (1) sensors
    let mouth = world.mouth_at(clock, &state.fsm, cfg);
    let r_m = mouth.center.orientation;
    let contact = contact_force(&robot.pose, &robot.twist, &mouth);
    let tip_z = mouth.local(&robot.pose.position).z;
    let bite = if state.fsm.phase == TransferPhase::BiteWait && clock > state.fsm.phase_start && tip_z < 0.0 {
        bite_force(&world.bite, clock - state.fsm.phase_start).force
    } else {
        Vector3::zeros()
    };
    let on_fork = contact.force + r_m * (bite + state.food.grip_force(tip_z) + world.disturbance.at(clock));
    let f_m = Wrench {
        force: -on_fork,
        torque: -contact.torque,
    };

    // (2) safety
    let (latch, safety) = state.latch.update(&f_m);

    // (3) state machine
    let out = step(
        &state.fsm,
        &world.plan,
        &Sensors {
            f_m,
            clock,
            dt,
            safety,
        },
    )?;
    let mut ctrl = state.ctrl;
    if out.ctx.phase.uses_exit_gains() != state.fsm.phase.uses_exit_gains() && out.ctx.phase != TransferPhase::Aborted {
        let gains = world.gains.phase_gains(out.ctx.phase, &world.exit_axis)?;
        ctrl = ctrl.with_phase_gains(gains, out.ctx.phase.uses_exit_gains());
    }
    let mut food = state.food;
    for e in &out.events {
        if e.event == EventKind::Bite {
            food = food.grip(tip_z);
        }
    }
    food = food.update(&world.food, contact.force.norm(), tip_z, clock);

    let (next_robot, setpoint) = match out.setpoint {
        Some(sp) => {
            // (4) impedance toward the setpoint
            let sp_vel = match state.prev_setpoint {
                Some(prev) => {
                    let v = (sp.position - prev.position) / dt;
                    let w = rotation_log(&(sp.orientation * prev.orientation.inverse())) / dt;
                    Vector6::new(v.x, v.y, v.z, w.x, w.y, w.z)
                }
                None => Vector6::zeros(),
            };
            let f = desired_wrench(&world.impedance, &robot.pose.error_to(&sp), &(sp_vel - robot.twist))?;
            // (5) reactive term
            let (f_bar, c) = reactive_term(&ctrl, &f_m, dt)?;
            ctrl = c;
            // (6) plant
            let net = f - f_bar - f_m;
            (admittance_step(robot, &net, dt), sp)
        }
        None => {
            let mut frozen = robot.clone();
            frozen.twist = Vector6::zeros();
            (frozen, robot.pose)
        }
    };

    let record = TickRecord {
        t: clock,
        pose: robot.pose,
        setpoint,
        f_m,
        phase: out.ctx.phase,
        q: robot.q.as_ref().map(|q| q.0.clone()),
    };
    let mut next_robot = next_robot;
    if let (Some(chain), Some(q)) = (&world.chain, &robot.q) {
        let params = IkParams {
            max_iter: 5,
            ..IkParams::default()
        };
        next_robot.q = Some(ik_damped_least_squares(chain, &next_robot.pose, q, &params)?.q);
    }
    let next = TickState {
        tick: state.tick + 1,
        robot: next_robot,
        ctrl,
        fsm: out.ctx,
        latch,
        food,
        prev_setpoint: out.setpoint,
    };
    Ok((next, record, out.events))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    BiteFailure,
    Drop,
    Imprecise,
    Aborted,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::Success,
        Outcome::BiteFailure,
        Outcome::Drop,
        Outcome::Imprecise,
        Outcome::Aborted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::BiteFailure => "bite_failure",
            Outcome::Drop => "drop",
            Outcome::Imprecise => "imprecise",
            Outcome::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub name: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub events: Vec<FsmEvent>,
    pub final_phase: TransferPhase,
    pub offsets_mm: FoodOffsets,
    pub food_status: FoodStatus,
    /// Largest measured force component, N.
    pub peak_force: f64,
    pub bite_time: Option<f64>,
    pub timeout_time: Option<f64>,
    pub abort_time: Option<f64>,
    /// Mouth-frame x/y error between the planned and true mouth at entry, m.
    pub entry_error: [f64; 2],
    pub mean_deviation: f64,
    pub ticks: usize,
}

/// Scenario plus its tick log; enough to replay and compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub scenario: Scenario,
    pub rows: Vec<TickRecord>,
}

impl TrialLog {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Re-runs the scenario and checks the rows are bit-identical.
    pub fn replay_matches(&self) -> Result<bool> {
        let fresh = run_trial(&self.scenario)?;
        Ok(fresh.log.rows == self.rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub report: TrialReport,
    pub log: TrialLog,
}

/// Perception and planning for a scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub world: World,
    pub offsets_mm: FoodOffsets,
    pub perceived_mouth: Pose,
    pub initial: TickState,
}

pub fn prepare(scenario: &Scenario) -> Result<Prepared> {
    scenario.validate()?;
    let food = scenario.resolve_food()?;
    let chain = scenario.resolve_chain()?;
    let cfg = &scenario.trajectory;

    let cloud = synth_depth_scan(
        &food,
        &mounted(&food),
        scenario.scan_resolution_mm,
        derive_seed(scenario.seed, 1),
    )?;
    let offsets = compute_offsets(&food_bounding_box(&cloud)?);

    let true_mouth = scenario.mouth.center;
    let perceived = Pose::new(
        true_mouth.position + true_mouth.orientation * Vector3::from(scenario.mouth_error),
        true_mouth.orientation,
    );
    let target = target_pose(&perceived, &offsets, cfg.entry_depth_m, cfg.fork_pitch_rad)?;
    let mut plan_cfg = *cfg;
    if let TransferMode::FixedPose { .. } = scenario.mode {
        plan_cfg.entry_depth_m = 0.0;
        plan_cfg.lowering_m = 0.0;
    }
    let plan = plan_transfer(&target, &perceived, &plan_cfg)?;

    let exit_axis = perceived.z_axis();
    let detector = BiteDetector::new(BITE_THRESHOLD, perceived.y_axis(), cfg.bite_wait_s)?;
    let fsm = FsmContext::new(detector);
    let gains = scenario.gains.phase_gains(TransferPhase::Scan, &exit_axis)?;
    let mut robot = VirtualRobotState::at_rest(plan.first_pose(), scenario.virtual_mass);
    let log_chain = if scenario.log_joints {
        let home = presets::home_config(&chain);
        let params = IkParams {
            max_iter: 500,
            ..IkParams::default()
        };
        robot.q = Some(ik_damped_least_squares(&chain, &robot.pose, &home, &params)?.q);
        Some(chain)
    } else {
        None
    };
    let world = World {
        mouth: scenario.mouth,
        head: HeadMotion::new(&scenario.head, derive_seed(scenario.seed, 2), cfg.total_duration() + 1.0)?,
        mode: scenario.mode,
        bite: scenario.bite,
        disturbance: scenario.disturbance.clone(),
        food,
        gains: scenario.gains,
        impedance: scenario.impedance,
        plan,
        exit_axis,
        chain: log_chain,
    };
    let initial = TickState {
        tick: 0,
        robot,
        ctrl: ControllerState::new(gains, exit_axis),
        fsm,
        latch: SafetyLatch::new(scenario.safety_limit, scenario.safety_rule)?,
        food: FoodTracker::new(scenario.grip_stiffness),
        prev_setpoint: None,
    };
    Ok(Prepared {
        world,
        offsets_mm: offsets,
        perceived_mouth: perceived,
        initial,
    })
}

pub fn tick_count(cfg: &TrajectoryConfig) -> usize {
    (cfg.total_duration() / TICK_PERIOD).round() as usize + 1
}

pub fn run_trial(scenario: &Scenario) -> Result<TrialResult> {
    let prepared = prepare(scenario)?;
    let cfg = &scenario.trajectory;
    let world = &prepared.world;
    let n = tick_count(cfg);
    let mut state = prepared.initial.clone();
    let mut rows = Vec::with_capacity(n);
    let mut events = Vec::new();
    let mut entry_error = None;
    for _ in 0..n {
        let (next, row, ev) = simulate_tick(&state, world, cfg, TICK_PERIOD)?;
        for e in &ev {
            if e.phase_to == TransferPhase::Entry {
                let m = world.mouth_at(e.t, &next.fsm, cfg).center;
                let local = m.inverse().transform_point(&prepared.perceived_mouth.position);
                entry_error = Some([local.x, local.y]);
            }
        }
        events.extend(ev);
        rows.push(row);
        state = next;
    }

    let find = |kind: EventKind| events.iter().find(|e| e.event == kind);
    let abort = find(EventKind::SafetyAbort);
    let bite = find(EventKind::Bite);
    let timeout = find(EventKind::Timeout);
    let entry_error = entry_error.unwrap_or([0.0, 0.0]);
    let half = scenario.mouth.aperture / 2.0;

    let outcome = if entry_error[0].abs() > half || entry_error[1].abs() > half {
        Outcome::Imprecise
    } else if let Some(a) = abort {
        if a.phase_from == TransferPhase::BiteWait {
            Outcome::BiteFailure
        } else {
            Outcome::Aborted
        }
    } else if state.food.status == FoodStatus::Dropped {
        Outcome::Drop
    } else if timeout.is_some() || state.food.status != FoodStatus::Released {
        Outcome::BiteFailure
    } else {
        Outcome::Success
    };

    let peak_force = rows
        .iter()
        .map(|r| r.f_m.force.amax())
        .fold(0.0, f64::max);
    let mean_deviation = rows.iter().map(TickRecord::deviation).sum::<f64>() / rows.len() as f64;
    let report = TrialReport {
        name: scenario.name.clone(),
        seed: scenario.seed,
        outcome,
        final_phase: state.fsm.phase,
        offsets_mm: prepared.offsets_mm,
        food_status: state.food.status,
        peak_force,
        bite_time: bite.map(|e| e.t),
        timeout_time: timeout.map(|e| e.t),
        abort_time: abort.map(|e| e.t),
        entry_error,
        mean_deviation,
        ticks: rows.len(),
        events,
    };
    Ok(TrialResult {
        report,
        log: TrialLog {
            scenario: scenario.clone(),
            rows,
        },
    })
}

pub fn trajectory_csv(rows: &[TickRecord]) -> String {
    let mut out = String::with_capacity(rows.len() * 256);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}", r.t);
        for v in r.pose.to_array() {
            let _ = write!(out, ",{v}");
        }
        for v in r.f_m.to_vector().iter() {
            let _ = write!(out, ",{v}");
        }
        let _ = write!(out, ",{}", r.phase.name());
        for v in r.setpoint.to_array() {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{}", r.deviation());
    }
    out
}

pub fn export_trajectory(rows: &[TickRecord], path: &Path) -> Result<()> {
    std::fs::write(path, trajectory_csv(rows))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "one")]
    pub count: usize,
    /// Scenario fields without `seed`; seeds come from the suite.
    #[serde(default = "empty_object")]
    pub scenario: serde_json::Value,
}

fn one() -> usize {
    1
}

fn empty_object() -> serde_json::Value {
    serde_json::json!({})
}

impl SuiteEntry {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.method.name().into())
    }

    pub fn scenario(&self, seed: u64) -> Result<Scenario> {
        let mut v = self.scenario.clone();
        let obj = v
            .as_object_mut()
            .ok_or_else(|| Error::Config("suite scenario must be an object".into()))?;
        obj.insert("seed".into(), seed.into());
        let custom_gains = obj.contains_key("gains");
        let mut s: Scenario = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        let gains = s.gains;
        s = s.with_method(self.method);
        if custom_gains {
            s.gains = gains;
        }
        if s.name.is_empty() {
            s.name = self.label();
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    pub entries: Vec<SuiteEntry>,
}

impl Suite {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Expanded trial list in a fixed order, each with its derived seed.
    pub fn trials(&self) -> Result<Vec<(String, Scenario)>> {
        if self.entries.is_empty() {
            return Err(Error::Config("suite has no entries".into()));
        }
        let mut out = Vec::new();
        for _ in 0..self.repetitions {
            for e in &self.entries {
                for _ in 0..e.count {
                    let seed = derive_seed(self.seed, out.len() as u64);
                    out.push((e.label(), e.scenario(seed)?));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MethodSummary {
    pub trials: usize,
    pub counts: BTreeMap<Outcome, usize>,
    pub success_rate: f64,
}

impl MethodSummary {
    pub fn count(&self, o: Outcome) -> usize {
        self.counts.get(&o).copied().unwrap_or(0)
    }

    pub fn failures(&self) -> usize {
        self.trials - self.count(Outcome::Success)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub index: usize,
    pub label: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub refuse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub trial_count: usize,
    pub methods: BTreeMap<String, MethodSummary>,
    pub trials: Vec<TrialSummary>,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table: one row per method.
    pub fn table(&self) -> String {
        let mut out = String::from("method            trials  success  bite_failure  drop  imprecise  aborted  rate\n");
        for (name, m) in &self.methods {
            let _ = writeln!(
                out,
                "{name:<17} {:>6}  {:>7}  {:>12}  {:>4}  {:>9}  {:>7}  {:.3}",
                m.trials,
                m.count(Outcome::Success),
                m.count(Outcome::BiteFailure),
                m.count(Outcome::Drop),
                m.count(Outcome::Imprecise),
                m.count(Outcome::Aborted),
                m.success_rate
            );
        }
        out
    }
}

pub fn run_suite(suite: &Suite) -> Result<SuiteReport> {
    let trials = suite.trials()?;
    let results = trials
        .par_iter()
        .enumerate()
        .map(|(i, (label, s))| {
            let mut s = s.clone();
            s.log_joints = false;
            run_trial(&s).map(|r| TrialSummary {
                index: i,
                label: label.clone(),
                seed: s.seed,
                outcome: r.report.outcome,
                refuse: s.bite.refuse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut methods: BTreeMap<String, MethodSummary> = BTreeMap::new();
    for t in &results {
        let m = methods.entry(t.label.clone()).or_default();
        m.trials += 1;
        *m.counts.entry(t.outcome).or_insert(0) += 1;
    }
    for m in methods.values_mut() {
        m.success_rate = m.count(Outcome::Success) as f64 / m.trials as f64;
    }
    Ok(SuiteReport {
        seed: suite.seed,
        trial_count: results.len(),
        methods,
        trials: results,
    })
}
