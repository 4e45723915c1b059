//! Bite-transfer protocol: trajectory segments and the phase state machine.
//!
//! The plan is an approach arc ending just in front of the mouth, a linear
//! entry with a small drop, a stationary bite wait, a linear exit and the
//! arc back down. The state machine walks those segments, switching to the
//! exit half on a detected bite or on timeout.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::controller::{SafetyStatus, Wrench};
use crate::error::{Error, Result};
use crate::geometry::{slerp, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferPhase {
    Scan,
    FaceDetect,
    ApproachArc,
    Entry,
    BiteWait,
    Exit,
    RetractArc,
    Done,
    Aborted,
}

impl TransferPhase {
    pub const ALL: [TransferPhase; 9] = [
        TransferPhase::Scan,
        TransferPhase::FaceDetect,
        TransferPhase::ApproachArc,
        TransferPhase::Entry,
        TransferPhase::BiteWait,
        TransferPhase::Exit,
        TransferPhase::RetractArc,
        TransferPhase::Done,
        TransferPhase::Aborted,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn uses_exit_gains(self) -> bool {
        matches!(self, TransferPhase::Exit | TransferPhase::RetractArc)
    }

    /// Successor along the nominal protocol.
    pub fn next(self) -> Option<TransferPhase> {
        use TransferPhase::*;
        match self {
            Scan => Some(FaceDetect),
            FaceDetect => Some(ApproachArc),
            ApproachArc => Some(Entry),
            Entry => Some(BiteWait),
            BiteWait => Some(Exit),
            Exit => Some(RetractArc),
            RetractArc => Some(Done),
            Done | Aborted => None,
        }
    }

    pub fn is_allowed_transition(from: TransferPhase, to: TransferPhase) -> bool {
        to == TransferPhase::Aborted && from != TransferPhase::Aborted || from.next() == Some(to)
    }

    fn segment(self) -> Option<SegmentLabel> {
        use TransferPhase::*;
        match self {
            ApproachArc => Some(SegmentLabel::Arc),
            Entry => Some(SegmentLabel::LinearEntry),
            BiteWait => Some(SegmentLabel::Dwell),
            Exit => Some(SegmentLabel::LinearExit),
            RetractArc => Some(SegmentLabel::ArcReturn),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        use TransferPhase::*;
        match self {
            Scan => "scan",
            FaceDetect => "face_detect",
            ApproachArc => "approach_arc",
            Entry => "entry",
            BiteWait => "bite_wait",
            Exit => "exit",
            RetractArc => "retract_arc",
            Done => "done",
            Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentLabel {
    Arc,
    LinearEntry,
    Dwell,
    LinearExit,
    ArcReturn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub label: SegmentLabel,
    pub t_start: f64,
    pub t_end: f64,
    /// Index range into the waypoint list, inclusive of both ends.
    pub first: usize,
    pub last: usize,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPlan {
    pub waypoints: Vec<Waypoint>,
    pub segments: Vec<Segment>,
    /// Fork orientation during the scan, before the upside-down flip.
    pub scan_orientation: UnitQuaternion<f64>,
}

impl TrajectoryPlan {
    fn single(label: SegmentLabel, waypoints: Vec<Waypoint>) -> Self {
        let last = waypoints.len() - 1;
        let seg = Segment {
            label,
            t_start: waypoints[0].t,
            t_end: waypoints[last].t,
            first: 0,
            last,
        };
        let scan_orientation = waypoints[0].pose.orientation;
        Self {
            waypoints,
            segments: vec![seg],
            scan_orientation,
        }
    }

    pub fn start_time(&self) -> f64 {
        self.waypoints.first().map_or(0.0, |w| w.t)
    }

    pub fn end_time(&self) -> f64 {
        self.waypoints.last().map_or(0.0, |w| w.t)
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    pub fn first_pose(&self) -> Pose {
        self.waypoints[0].pose
    }

    pub fn last_pose(&self) -> Pose {
        self.waypoints[self.waypoints.len() - 1].pose
    }

    pub fn segment(&self, label: SegmentLabel) -> Option<&Segment> {
        self.segments.iter().find(|s| s.label == label)
    }

    pub fn segment_waypoints(&self, label: SegmentLabel) -> &[Waypoint] {
        match self.segment(label) {
            Some(s) => &self.waypoints[s.first..=s.last],
            None => &[],
        }
    }

    /// Appends `other` so that its first waypoint coincides with this plan's end.
    pub fn append(&mut self, other: &TrajectoryPlan) {
        let offset = self.end_time() - other.start_time();
        let base = self.waypoints.len() - 1;
        for seg in &other.segments {
            self.segments.push(Segment {
                label: seg.label,
                t_start: seg.t_start + offset,
                t_end: seg.t_end + offset,
                first: seg.first + base,
                last: seg.last + base,
            });
        }
        // the junction waypoint is shared
        self.waypoints
            .extend(other.waypoints.iter().skip(1).map(|w| Waypoint { t: w.t + offset, pose: w.pose }));
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.waypoints.windows(2).all(|w| w[1].t > w[0].t)
    }
}

/// Position lerp plus orientation slerp between bracketing waypoints.
pub fn interpolate(plan: &TrajectoryPlan, t: f64) -> Result<Pose> {
    let (start, end) = (plan.start_time(), plan.end_time());
    if plan.waypoints.is_empty() || !(t >= start && t <= end) {
        return Err(Error::TimeOutOfRange { t, start, end });
    }
    let wps = &plan.waypoints;
    let k = wps.partition_point(|w| w.t <= t);
    if k == 0 {
        return Ok(wps[0].pose);
    }
    let a = &wps[k - 1];
    if a.t == t || k == wps.len() {
        return Ok(a.pose);
    }
    let b = &wps[k];
    let s = (t - a.t) / (b.t - a.t);
    Ok(Pose::new(
        a.pose.position + (b.pose.position - a.pose.position) * s,
        slerp(&a.pose.orientation, &b.pose.orientation, s),
    ))
}

/// Quintic time scaling with zero boundary velocity and acceleration.
/// Quintic time scaling with zero end velocity and acceleration.
pub fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

fn sample_count(duration: f64, sample_rate: f64) -> Result<usize> {
    if !(duration > 0.0) || !(sample_rate > 0.0) {
        return Err(Error::InvalidParameter("duration and sample rate must be > 0".into()));
    }
    Ok((duration * sample_rate).round() as usize + 1)
}

fn sample_times(duration: f64, n: usize) -> impl Iterator<Item = f64> {
    let last = n - 1;
    (0..n).map(move |k| if k == last { duration } else { duration * k as f64 / last as f64 })
}

pub const WORLD_UP: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);

/// Horizontal direction pointing out of the mouth (projection of mouth z).
fn arc_plane_horizontal(mouth_z: &Vector3<f64>) -> Result<Vector3<f64>> {
    let h = mouth_z - WORLD_UP * mouth_z.dot(&WORLD_UP);
    if h.norm() < 1e-9 {
        return Err(Error::InvalidParameter("mouth z axis is vertical".into()));
    }
    Ok(h.normalize())
}

/// Circular arc in the vertical plane through the mouth z axis, centered
/// `radius` straight below `target`, ending at `target`.
///
/// Angles are measured from the out-of-mouth horizontal toward world up;
/// the target sits at 90 degrees. Orientation rotates rigidly with the arc.
pub fn plan_arc(
    target: &Pose,
    mouth_z: &Vector3<f64>,
    radius: f64,
    start_angle: f64,
    duration: f64,
    sample_rate: f64,
) -> Result<TrajectoryPlan> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter("degenerate arc radius".into()));
    }
    let n = sample_count(duration, sample_rate)?;
    let h = arc_plane_horizontal(mouth_z)?;
    let normal = Unit::new_normalize(h.cross(&WORLD_UP));
    let center = arc_center(target, radius);
    let final_angle = FRAC_PI_2;
    let sweep = final_angle - start_angle;

    let waypoints = sample_times(duration, n)
        .enumerate()
        .map(|(k, t)| {
            if k == n - 1 {
                return Waypoint { t, pose: *target };
            }
            let phi = start_angle + sweep * min_jerk(t / duration);
            let radial = UnitQuaternion::from_axis_angle(&normal, phi) * h;
            let rot = UnitQuaternion::from_axis_angle(&normal, phi - final_angle);
            Waypoint {
                t,
                pose: Pose::new(center + radial * radius, rot * target.orientation),
            }
        })
        .collect();
    Ok(TrajectoryPlan::single(SegmentLabel::Arc, waypoints))
}

pub fn arc_center(target: &Pose, radius: f64) -> Vector3<f64> {
    target.position - WORLD_UP * radius
}

/// Straight entry along the mouth's -z by `entry_depth`, then a drop of
/// `lowering` along the mouth's -y. Orientation is held.
pub fn entry_segment(
    pre_mouth: &Pose,
    mouth_frame: &Pose,
    entry_depth: f64,
    lowering: f64,
    duration: f64,
    sample_rate: f64,
) -> Result<TrajectoryPlan> {
    if !(entry_depth >= 0.0) || !(lowering >= 0.0) {
        return Err(Error::InvalidParameter("entry depth and lowering must be >= 0".into()));
    }
    let n = sample_count(duration, sample_rate)?;
    let z = mouth_frame.z_axis();
    let y = mouth_frame.y_axis();
    let p0 = pre_mouth.position;
    let p_in = p0 - z * entry_depth;
    let p_end = p0 - z * entry_depth - y * lowering;
    let total = entry_depth + lowering;

    let waypoints = sample_times(duration, n)
        .enumerate()
        .map(|(k, t)| {
            let position = if k == n - 1 {
                p_end
            } else if total == 0.0 {
                p0
            } else {
                let d = total * min_jerk(t / duration);
                if d <= entry_depth {
                    p0 - z * d
                } else {
                    p_in - y * (d - entry_depth)
                }
            };
            Waypoint {
                t,
                pose: Pose::new(position, pre_mouth.orientation),
            }
        })
        .collect();
    Ok(TrajectoryPlan::single(SegmentLabel::LinearEntry, waypoints))
}

fn linear_segment(label: SegmentLabel, from: &Pose, to: &Pose, duration: f64, sample_rate: f64) -> Result<TrajectoryPlan> {
    let n = sample_count(duration, sample_rate)?;
    let waypoints = sample_times(duration, n)
        .enumerate()
        .map(|(k, t)| {
            let pose = if k == n - 1 {
                *to
            } else {
                let s = min_jerk(t / duration);
                Pose::new(
                    from.position + (to.position - from.position) * s,
                    slerp(&from.orientation, &to.orientation, s),
                )
            };
            Waypoint { t, pose }
        })
        .collect();
    Ok(TrajectoryPlan::single(label, waypoints))
}

fn dwell(pose: &Pose, duration: f64) -> Result<TrajectoryPlan> {
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter("dwell duration must be > 0".into()));
    }
    Ok(TrajectoryPlan::single(
        SegmentLabel::Dwell,
        vec![Waypoint { t: 0.0, pose: *pose }, Waypoint { t: duration, pose: *pose }],
    ))
}

fn reversed(plan: &TrajectoryPlan, label: SegmentLabel) -> TrajectoryPlan {
    let end = plan.end_time();
    let waypoints = plan
        .waypoints
        .iter()
        .rev()
        .map(|w| Waypoint { t: end - w.t, pose: w.pose })
        .collect();
    TrajectoryPlan::single(label, waypoints)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryConfig {
    pub arc_radius: f64,
    /// Arc start, radians from the out-of-mouth horizontal (target at pi/2).
    pub arc_start_angle: f64,
    pub approach_s: f64,
    pub entry_s: f64,
    /// Dwell window reserved for the bite wait; matches the bite timeout.
    pub bite_wait_s: f64,
    pub exit_s: f64,
    pub retract_s: f64,
    pub sample_rate_hz: f64,
    pub entry_depth_m: f64,
    pub lowering_m: f64,
    /// Upward tilt of the fork at the pre-mouth pose.
    pub fork_pitch_rad: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            arc_radius: 0.45,
            arc_start_angle: 0.0,
            approach_s: 3.5,
            entry_s: 1.5,
            bite_wait_s: 1.5,
            exit_s: 1.5,
            retract_s: 2.0,
            sample_rate_hz: 1000.0,
            entry_depth_m: 0.018,
            lowering_m: 0.003,
            fork_pitch_rad: 25f64.to_radians(),
        }
    }
}

impl TrajectoryConfig {
    pub fn total_duration(&self) -> f64 {
        self.approach_s + self.entry_s + self.bite_wait_s + self.exit_s + self.retract_s
    }
}

/// Fork orientation for transfer: tool z into the mouth, flipped upside
/// down, tilted up by `pitch`.
pub fn transfer_orientation(mouth_frame: &Pose, pitch: f64) -> UnitQuaternion<f64> {
    mouth_frame.orientation * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI + pitch)
}

/// The upside-down flip applied between scan and approach: half a turn about the fork axis.
pub fn fork_flip() -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), PI)
}

/// Full transfer plan from the pre-mouth target.
pub fn plan_transfer(pre_mouth: &Pose, mouth_frame: &Pose, cfg: &TrajectoryConfig) -> Result<TrajectoryPlan> {
    let mouth_z = mouth_frame.z_axis();
    let arc = plan_arc(
        pre_mouth,
        &mouth_z,
        cfg.arc_radius,
        cfg.arc_start_angle,
        cfg.approach_s,
        cfg.sample_rate_hz,
    )?;
    let entry = entry_segment(
        pre_mouth,
        mouth_frame,
        cfg.entry_depth_m,
        cfg.lowering_m,
        cfg.entry_s,
        cfg.sample_rate_hz,
    )?;
    let inside = entry.last_pose();
    let wait = dwell(&inside, cfg.bite_wait_s)?;
    let exit = linear_segment(SegmentLabel::LinearExit, &inside, pre_mouth, cfg.exit_s, cfg.sample_rate_hz)?;
    let back = plan_arc(
        pre_mouth,
        &mouth_z,
        cfg.arc_radius,
        cfg.arc_start_angle,
        cfg.retract_s,
        cfg.sample_rate_hz,
    )?;
    let back = reversed(&back, SegmentLabel::ArcReturn);

    let mut plan = arc;
    plan.append(&entry);
    plan.append(&wait);
    plan.append(&exit);
    plan.append(&back);
    plan.scan_orientation = plan.first_pose().orientation * fork_flip().inverse();
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiteDetector {
    pub threshold: f64,
    /// World direction of the mouth-frame y axis.
    pub axis: Vector3<f64>,
    pub timeout: f64,
    pub elapsed: f64,
    /// Consecutive above-threshold ticks required; 1 triggers on the first.
    pub debounce_ticks: u32,
    pub above: u32,
}

impl BiteDetector {
    pub fn new(threshold: f64, axis: Vector3<f64>, timeout: f64) -> Result<Self> {
        if !(threshold > 0.0) || !(timeout > 0.0) {
            return Err(Error::InvalidParameter("threshold and timeout must be > 0".into()));
        }
        Ok(Self {
            threshold,
            axis,
            timeout,
            elapsed: 0.0,
            debounce_ticks: 1,
            above: 0,
        })
    }

    pub fn reset(&self) -> Self {
        Self {
            elapsed: 0.0,
            above: 0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiteOutcome {
    Bitten,
    Waiting,
    TimedOut,
}

pub fn detect_bite(det: &BiteDetector, f_m: &Wrench, dt: f64) -> Result<(BiteOutcome, BiteDetector)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be > 0".into()));
    }
    let mut next = *det;
    let f_y = f_m.force.dot(&det.axis);
    next.above = if f_y.abs() > det.threshold { det.above + 1 } else { 0 };
    if next.above >= det.debounce_ticks.max(1) {
        return Ok((BiteOutcome::Bitten, next));
    }
    next.elapsed += dt;
    // tolerate accumulated rounding of dt sums
    if next.elapsed >= det.timeout - 1e-9 {
        return Ok((BiteOutcome::TimedOut, next));
    }
    Ok((BiteOutcome::Waiting, next))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Transition,
    Bite,
    Timeout,
    SafetyAbort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsmEvent {
    pub t: f64,
    pub phase_from: TransferPhase,
    pub phase_to: TransferPhase,
    pub event: EventKind,
    pub f_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsmContext {
    pub phase: TransferPhase,
    /// Clock value at which the current phase began.
    pub phase_start: f64,
    pub detector: BiteDetector,
}

impl FsmContext {
    pub fn new(detector: BiteDetector) -> Self {
        Self {
            phase: TransferPhase::Scan,
            phase_start: 0.0,
            detector,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensors {
    pub f_m: Wrench,
    pub clock: f64,
    pub dt: f64,
    pub safety: SafetyStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub ctx: FsmContext,
    /// `None` once aborted: the robot must not move.
    pub setpoint: Option<Pose>,
    pub events: Vec<FsmEvent>,
}

/// Advances the state machine by one tick.
pub fn step(ctx: &FsmContext, plan: &TrajectoryPlan, sensors: &Sensors) -> Result<StepOutput> {
    let mut c = *ctx;
    let mut events = Vec::new();
    let clock = sensors.clock;
    let f_y = sensors.f_m.force.dot(&ctx.detector.axis);

    if c.phase == TransferPhase::Aborted {
        return Ok(StepOutput { ctx: c, setpoint: None, events });
    }
    if sensors.safety == SafetyStatus::Abort {
        events.push(FsmEvent {
            t: clock,
            phase_from: c.phase,
            phase_to: TransferPhase::Aborted,
            event: EventKind::SafetyAbort,
            f_y,
        });
        c.phase = TransferPhase::Aborted;
        c.phase_start = clock;
        return Ok(StepOutput { ctx: c, setpoint: None, events });
    }

    let mut transition = |c: &mut FsmContext, to: TransferPhase, start: f64, kind: EventKind| {
        events.push(FsmEvent {
            t: clock,
            phase_from: c.phase,
            phase_to: to,
            event: kind,
            f_y,
        });
        c.phase = to;
        c.phase_start = start;
        if to == TransferPhase::BiteWait {
            c.detector = c.detector.reset();
        }
    };

    loop {
        match c.phase {
            TransferPhase::Scan | TransferPhase::FaceDetect => {
                let to = c.phase.next().expect("scan phases have successors");
                transition(&mut c, to, clock, EventKind::Transition);
            }
            TransferPhase::BiteWait => {
                // no detection on the tick the wait begins
                if c.phase_start == clock {
                    break;
                }
                let (outcome, det) = detect_bite(&c.detector, &sensors.f_m, sensors.dt)?;
                c.detector = det;
                match outcome {
                    BiteOutcome::Waiting => {}
                    BiteOutcome::Bitten => transition(&mut c, TransferPhase::Exit, clock, EventKind::Bite),
                    BiteOutcome::TimedOut => transition(&mut c, TransferPhase::Exit, clock, EventKind::Timeout),
                }
                break;
            }
            TransferPhase::ApproachArc | TransferPhase::Entry | TransferPhase::Exit | TransferPhase::RetractArc => {
                let seg = segment_for(plan, c.phase)?;
                let local = clock - c.phase_start;
                if local + 1e-9 >= seg.duration() {
                    let to = c.phase.next().expect("motion phases have successors");
                    // carry the exact segment boundary to avoid drift
                    let start = c.phase_start + seg.duration();
                    transition(&mut c, to, start.min(clock), EventKind::Transition);
                    continue;
                }
                break;
            }
            TransferPhase::Done | TransferPhase::Aborted => break,
        }
    }

    let setpoint = match c.phase {
        TransferPhase::Done => plan.last_pose(),
        TransferPhase::Scan | TransferPhase::FaceDetect => plan.first_pose(),
        TransferPhase::BiteWait => {
            let seg = segment_for(plan, c.phase)?;
            plan.waypoints[seg.first].pose
        }
        TransferPhase::Aborted => unreachable!("handled above"),
        phase => {
            let seg = segment_for(plan, phase)?;
            let local = (clock - c.phase_start).clamp(0.0, seg.duration());
            interpolate(plan, (seg.t_start + local).min(seg.t_end))?
        }
    };
    Ok(StepOutput {
        ctx: c,
        setpoint: Some(setpoint),
        events,
    })
}

fn segment_for(plan: &TrajectoryPlan, phase: TransferPhase) -> Result<&Segment> {
    let label = phase.segment().expect("phase has a segment");
    plan.segment(label)
        .ok_or_else(|| Error::InvalidParameter(format!("plan lacks a {label:?} segment")))
}
