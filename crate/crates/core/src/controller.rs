//! Impedance control with a phase-scheduled force-reactive PI term.
//!
//! The commanded task wrench is `f - f_bar`, where `f` comes from the
//! impedance law and `f_bar = k_P * f_m + k_I * integral(f_m dt)` is built
//! from the measured tool wrench. Joint torques follow as `J^T (f - f_bar)`.

use std::ops::{Add, Neg, Sub};

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::TransferPhase;

/// Control period of the 1 kHz loop.
pub const TICK_PERIOD: f64 = 0.001;
pub const DEFAULT_SAFETY_LIMIT: f64 = 3.0;
pub const DEFAULT_ANTI_WINDUP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_force(force: Vector3<f64>) -> Self {
        Self {
            force,
            torque: Vector3::zeros(),
        }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            force: v.fixed_rows::<3>(0).into(),
            torque: v.fixed_rows::<3>(3).into(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|x| x.is_finite())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            force: self.force * c,
            torque: self.torque * c,
        }
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench {
            force: self.force + rhs.force,
            torque: self.torque + rhs.torque,
        }
    }
}

impl Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        self + (-rhs)
    }
}

impl Neg for Wrench {
    type Output = Wrench;
    fn neg(self) -> Wrench {
        Wrench {
            force: -self.force,
            torque: -self.torque,
        }
    }
}

/// Per-axis reactive gains in a gain frame whose z axis is the exit
/// direction. Entries are force x/y/z then torque x/y/z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactivityGains {
    pub k_p: [f64; 6],
    /// Integral gains in Hz.
    pub k_i: [f64; 6],
    #[serde(skip, default = "UnitQuaternion::identity")]
    pub frame: UnitQuaternion<f64>,
}

impl ReactivityGains {
    pub fn new(k_p: [f64; 6], k_i: [f64; 6]) -> Result<Self> {
        if k_p.iter().chain(k_i.iter()).any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidParameter("reactive gains must be finite and >= 0".into()));
        }
        Ok(Self {
            k_p,
            k_i,
            frame: UnitQuaternion::identity(),
        })
    }

    /// Same gains on all three force axes, zero on torques.
    pub fn isotropic(k_p: f64, k_i: f64) -> Self {
        Self {
            k_p: [k_p, k_p, k_p, 0.0, 0.0, 0.0],
            k_i: [k_i, k_i, k_i, 0.0, 0.0, 0.0],
            frame: UnitQuaternion::identity(),
        }
    }

    pub fn zero() -> Self {
        Self::isotropic(0.0, 0.0)
    }

    pub fn with_frame(mut self, frame: UnitQuaternion<f64>) -> Self {
        self.frame = frame;
        self
    }

    pub fn k_p_force(&self) -> [f64; 3] {
        [self.k_p[0], self.k_p[1], self.k_p[2]]
    }

    pub fn k_i_force(&self) -> [f64; 3] {
        [self.k_i[0], self.k_i[1], self.k_i[2]]
    }

    pub fn k_p_torque(&self) -> [f64; 3] {
        [self.k_p[3], self.k_p[4], self.k_p[5]]
    }

    pub fn k_i_torque(&self) -> [f64; 3] {
        [self.k_i[3], self.k_i[4], self.k_i[5]]
    }

    fn world_matrix(&self, diag: [f64; 3]) -> Matrix3<f64> {
        let r: Matrix3<f64> = self.frame.to_rotation_matrix().into_inner();
        r * Matrix3::from_diagonal(&Vector3::from(diag)) * r.transpose()
    }

    /// World-frame 3x3 gain matrices `(P_force, I_force, P_torque, I_torque)`.
    pub fn world_matrices(&self) -> [Matrix3<f64>; 4] {
        [
            self.world_matrix(self.k_p_force()),
            self.world_matrix(self.k_i_force()),
            self.world_matrix(self.k_p_torque()),
            self.world_matrix(self.k_i_torque()),
        ]
    }
}

/// Gain presets for the two halves of the transfer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule {
    pub entry_gains: ReactivityGains,
    pub exit_gains: ReactivityGains,
}

impl Default for GainSchedule {
    fn default() -> Self {
        Self::phased()
    }
}

impl GainSchedule {
    /// High reactivity while entering; reduced only along the exit axis after.
    pub fn phased() -> Self {
        Self {
            entry_gains: ReactivityGains::isotropic(7.0, 20.0),
            exit_gains: ReactivityGains {
                k_p: [7.0, 7.0, 2.0, 0.0, 0.0, 0.0],
                k_i: [20.0, 20.0, 1.0, 0.0, 0.0, 0.0],
                frame: UnitQuaternion::identity(),
            },
        }
    }

    pub fn constant(gains: ReactivityGains) -> Self {
        Self {
            entry_gains: gains,
            exit_gains: gains,
        }
    }

    pub fn less_reactive() -> Self {
        Self::constant(ReactivityGains::isotropic(2.0, 2.0))
    }

    pub fn more_reactive() -> Self {
        Self::constant(ReactivityGains::isotropic(10.0, 30.0))
    }

    pub fn validate(&self) -> Result<()> {
        ReactivityGains::new(self.entry_gains.k_p, self.entry_gains.k_i)?;
        ReactivityGains::new(self.exit_gains.k_p, self.exit_gains.k_i)?;
        Ok(())
    }

    /// Gains for `phase`, with the gain frame's z axis aligned to `exit_axis`.
    pub fn phase_gains(&self, phase: TransferPhase, exit_axis: &Vector3<f64>) -> Result<ReactivityGains> {
        let frame = exit_frame(exit_axis)?;
        let g = if phase.uses_exit_gains() {
            self.exit_gains
        } else {
            self.entry_gains
        };
        Ok(g.with_frame(frame))
    }
}

/// Phase gains under the default phased schedule.
pub fn phase_gains(phase: TransferPhase, exit_axis: &Vector3<f64>) -> Result<ReactivityGains> {
    GainSchedule::phased().phase_gains(phase, exit_axis)
}

fn exit_frame(exit_axis: &Vector3<f64>) -> Result<UnitQuaternion<f64>> {
    if !((exit_axis.norm() - 1.0).abs() <= 1e-9) {
        return Err(Error::InvalidParameter(format!(
            "exit axis must be unit length, |a| = {}",
            exit_axis.norm()
        )));
    }
    let z = Vector3::z();
    Ok(match UnitQuaternion::rotation_between(&z, exit_axis) {
        Some(q) => q,
        // anti-parallel: flip about x
        None => UnitQuaternion::from_rotation_matrix(&Rotation3::from_axis_angle(
            &Vector3::x_axis(),
            std::f64::consts::PI,
        )),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceParams {
    pub stiffness: [f64; 6],
    pub damping: [f64; 6],
}

impl ImpedanceParams {
    pub fn new(stiffness: [f64; 6], damping: [f64; 6]) -> Result<Self> {
        let p = Self { stiffness, damping };
        p.validate()?;
        Ok(p)
    }

    /// Default stiffness with damping critical for the given virtual mass.
    pub fn critically_damped(stiffness: [f64; 6], mass: &[f64; 6]) -> Self {
        let mut damping = [0.0; 6];
        for i in 0..6 {
            damping[i] = 2.0 * (stiffness[i] * mass[i]).sqrt();
        }
        Self { stiffness, damping }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..6 {
            let (k, d) = (self.stiffness[i], self.damping[i]);
            if !(k >= 0.0) || !(d >= 0.0) || !k.is_finite() || !d.is_finite() {
                return Err(Error::InvalidParameter("impedance entries must be >= 0".into()));
            }
            if k > 0.0 && d <= 0.0 {
                return Err(Error::InvalidParameter(format!("axis {i} is stiff but undamped")));
            }
        }
        Ok(())
    }
}

/// `f = K * pose_error + D * velocity_error`, elementwise.
pub fn desired_wrench(
    params: &ImpedanceParams,
    pose_error: &Vector6<f64>,
    velocity_error: &Vector6<f64>,
) -> Result<Wrench> {
    if !pose_error.iter().chain(velocity_error.iter()).all(|x| x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite impedance error".into()));
    }
    let k = Vector6::from(params.stiffness);
    let d = Vector6::from(params.damping);
    Ok(Wrench::from_vector(
        &(k.component_mul(pose_error) + d.component_mul(velocity_error)),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    /// Running integral of the measured wrench (N*s, N*m*s), world frame.
    pub integral: Vector6<f64>,
    pub active_gains: ReactivityGains,
    pub exit_axis: Vector3<f64>,
    pub tick_period: f64,
    /// Bound on each `|k_I * integral|` component in the gain frame.
    pub anti_windup: f64,
    /// Optional first-order low-pass on the reactive input; `None` uses raw samples.
    pub filter_cutoff_hz: Option<f64>,
    pub filtered: Vector6<f64>,
}

impl ControllerState {
    pub fn new(gains: ReactivityGains, exit_axis: Vector3<f64>) -> Self {
        Self {
            integral: Vector6::zeros(),
            active_gains: gains,
            exit_axis,
            tick_period: TICK_PERIOD,
            anti_windup: DEFAULT_ANTI_WINDUP,
            filter_cutoff_hz: None,
            filtered: Vector6::zeros(),
        }
    }

    /// Switches gains; the integral restarts when moving from entry to exit gains.
    pub fn with_phase_gains(mut self, gains: ReactivityGains, reset_integral: bool) -> Self {
        self.active_gains = gains;
        if reset_integral {
            self.integral = Vector6::zeros();
        }
        self
    }
}

/// One tick of the PI reactive term. Returns `f_bar` and the next state.
pub fn reactive_term(state: &ControllerState, f_m: &Wrench, dt: f64) -> Result<(Wrench, ControllerState)> {
    if !f_m.is_finite() {
        return Err(Error::SensorFault);
    }
    if (dt - state.tick_period).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "dt {dt} differs from tick period {}",
            state.tick_period
        )));
    }
    let mut next = *state;
    let raw = f_m.to_vector();
    let input = match state.filter_cutoff_hz {
        Some(fc) if fc > 0.0 => {
            let rc = 1.0 / (2.0 * std::f64::consts::PI * fc);
            let alpha = dt / (rc + dt);
            next.filtered = state.filtered + (raw - state.filtered) * alpha;
            next.filtered
        }
        _ => raw,
    };
    next.integral += input * dt;

    let gains = &state.active_gains;
    let r: Matrix3<f64> = gains.frame.to_rotation_matrix().into_inner();
    let mut acc_f = r.transpose() * next.integral.fixed_rows::<3>(0);
    let mut acc_t = r.transpose() * next.integral.fixed_rows::<3>(3);
    for i in 0..3 {
        acc_f[i] = clamp_windup(acc_f[i], gains.k_i[i], state.anti_windup);
        acc_t[i] = clamp_windup(acc_t[i], gains.k_i[i + 3], state.anti_windup);
    }
    let acc_f_world = r * acc_f;
    let acc_t_world = r * acc_t;
    next.integral = Vector6::new(
        acc_f_world.x,
        acc_f_world.y,
        acc_f_world.z,
        acc_t_world.x,
        acc_t_world.y,
        acc_t_world.z,
    );

    let [pf, i_f, pt, it] = gains.world_matrices();
    let f_in = input.fixed_rows::<3>(0).into_owned();
    let t_in = input.fixed_rows::<3>(3).into_owned();
    let f_bar = Wrench {
        force: pf * f_in + i_f * acc_f_world,
        torque: pt * t_in + it * acc_t_world,
    };
    Ok((f_bar, next))
}

fn clamp_windup(acc: f64, k_i: f64, bound: f64) -> f64 {
    if k_i > 0.0 && bound.is_finite() {
        let lim = bound / k_i;
        acc.clamp(-lim, lim)
    } else {
        acc
    }
}

/// `tau = J^T (f - f_bar)`.
pub fn joint_torques(j: &DMatrix<f64>, f: &Wrench, f_bar: &Wrench) -> Result<DVector<f64>> {
    if j.nrows() != 6 {
        return Err(Error::DimensionMismatch {
            expected: 6,
            got: j.nrows(),
        });
    }
    let net = (*f - *f_bar).to_vector();
    Ok(j.transpose() * DVector::from_column_slice(net.as_slice()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyStatus {
    Ok,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyRule {
    /// Any force component magnitude above the limit.
    #[default]
    PerComponent,
    /// Force vector norm above the limit.
    Norm,
}

/// Strict `>` comparison against the force limit.
pub fn safety_check(f_m: &Wrench, limit: f64) -> SafetyStatus {
    safety_check_with(f_m, limit, SafetyRule::PerComponent)
}

pub fn safety_check_with(f_m: &Wrench, limit: f64, rule: SafetyRule) -> SafetyStatus {
    let exceeded = match rule {
        SafetyRule::PerComponent => f_m.force.iter().any(|c| c.abs() > limit),
        SafetyRule::Norm => f_m.force.norm() > limit,
    };
    // a corrupted reading must stop motion too
    if exceeded || !f_m.is_finite() {
        SafetyStatus::Abort
    } else {
        SafetyStatus::Ok
    }
}

/// Latching safety stop: once tripped it stays tripped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyLatch {
    pub limit: f64,
    pub rule: SafetyRule,
    pub tripped: bool,
}

impl SafetyLatch {
    pub fn new(limit: f64, rule: SafetyRule) -> Result<Self> {
        if !(limit > 0.0) {
            return Err(Error::InvalidParameter("safety limit must be > 0".into()));
        }
        Ok(Self {
            limit,
            rule,
            tripped: false,
        })
    }

    pub fn update(&self, f_m: &Wrench) -> (Self, SafetyStatus) {
        let mut next = *self;
        if !self.tripped && safety_check_with(f_m, self.limit, self.rule) == SafetyStatus::Abort {
            next.tripped = true;
        }
        let status = if next.tripped {
            SafetyStatus::Abort
        } else {
            SafetyStatus::Ok
        };
        (next, status)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state_with(g: ReactivityGains) -> ControllerState {
        let mut s = ControllerState::new(g, Vector3::z());
        s.anti_windup = f64::INFINITY;
        s
    }

    #[test]
    fn desired_wrench_examples() {
        let mut k = [0.0; 6];
        let mut d = [0.0; 6];
        k[0] = 100.0;
        d[1] = 10.0;
        let p = ImpedanceParams { stiffness: k, damping: [1.0, 10.0, 1.0, 1.0, 1.0, 1.0] };
        let z = Vector6::zeros();
        assert_eq!(desired_wrench(&p, &z, &z).unwrap(), Wrench::zero());

        let mut e = Vector6::zeros();
        e[0] = 0.01;
        let w = desired_wrench(&p, &e, &z).unwrap();
        assert!((w.force - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);

        let p = ImpedanceParams { stiffness: [0.0; 6], damping: d };
        let mut v = Vector6::zeros();
        v[1] = 0.2;
        let w = desired_wrench(&p, &z, &v).unwrap();
        assert!((w.force - Vector3::new(0.0, 2.0, 0.0)).norm() < 1e-15);

        v[2] = f64::NAN;
        assert!(desired_wrench(&p, &z, &v).is_err());
    }

    #[test]
    fn impedance_requires_damping_on_stiff_axes() {
        assert!(ImpedanceParams::new([1.0; 6], [0.0; 6]).is_err());
        assert!(ImpedanceParams::new([0.0; 6], [0.0; 6]).is_ok());
    }

    #[test]
    fn zero_measurement_keeps_zero_integral() {
        let mut s = ControllerState::new(ReactivityGains::isotropic(7.0, 20.0), Vector3::z());
        for _ in 0..100 {
            let (fb, n) = reactive_term(&s, &Wrench::zero(), TICK_PERIOD).unwrap();
            assert_eq!(fb, Wrench::zero());
            s = n;
        }
        assert_eq!(s.integral, Vector6::zeros());
    }

    #[test]
    fn torque_measurement_is_ignored_by_presets() {
        let s = ControllerState::new(phase_gains(TransferPhase::Entry, &Vector3::z()).unwrap(), Vector3::z());
        let w = Wrench {
            force: Vector3::zeros(),
            torque: Vector3::new(0.5, -0.3, 0.2),
        };
        let (fb, _) = reactive_term(&s, &w, TICK_PERIOD).unwrap();
        assert_eq!(fb.torque, Vector3::zeros());
        assert_eq!(fb.force, Vector3::zeros());
    }

    #[test]
    fn sensor_fault_and_wrong_dt() {
        let s = ControllerState::new(ReactivityGains::zero(), Vector3::z());
        let bad = Wrench::from_force(Vector3::new(f64::NAN, 0.0, 0.0));
        assert!(matches!(reactive_term(&s, &bad, TICK_PERIOD), Err(Error::SensorFault)));
        assert!(reactive_term(&s, &Wrench::zero(), 0.002).is_err());
    }

    #[test]
    fn anti_windup_bounds_integral_authority() {
        let mut s = ControllerState::new(ReactivityGains::isotropic(0.0, 20.0), Vector3::z());
        let w = Wrench::from_force(Vector3::new(5.0, 0.0, 0.0));
        let mut fb = Wrench::zero();
        for _ in 0..2000 {
            let (f, n) = reactive_term(&s, &w, TICK_PERIOD).unwrap();
            fb = f;
            s = n;
        }
        assert!((fb.force.x - 10.0).abs() < 1e-9);
    }

    #[test]
    fn phase_gain_table() {
        let z = Vector3::z();
        for phase in [TransferPhase::ApproachArc, TransferPhase::Entry, TransferPhase::BiteWait] {
            let g = phase_gains(phase, &z).unwrap();
            assert_eq!(g.k_p_force(), [7.0, 7.0, 7.0]);
            assert_eq!(g.k_i_force(), [20.0, 20.0, 20.0]);
            assert_eq!(g.k_p_torque(), [0.0; 3]);
            assert_eq!(g.k_i_torque(), [0.0; 3]);
        }
        for phase in [TransferPhase::Exit, TransferPhase::RetractArc] {
            let g = phase_gains(phase, &z).unwrap();
            assert_eq!(g.k_p_force(), [7.0, 7.0, 2.0]);
            assert_eq!(g.k_i_force(), [20.0, 20.0, 1.0]);
            assert_eq!(g.k_p_torque(), [0.0; 3]);
            assert_eq!(g.k_i_torque(), [0.0; 3]);
        }
        assert!(phase_gains(TransferPhase::Exit, &Vector3::new(0.0, 0.0, 2.0)).is_err());
    }

    #[test]
    fn oblique_exit_axis_projects_onto_subspaces() {
        let a = Vector3::new(1.0, 1.0, 0.0).normalize();
        let g = phase_gains(TransferPhase::Exit, &a).unwrap();
        let [p, ..] = g.world_matrices();
        assert!((p * a - a * 2.0).norm() < 1e-12);
        let ortho = Vector3::new(1.0, -1.0, 0.0).normalize();
        assert!((p * ortho - ortho * 7.0).norm() < 1e-12);
        assert!((p * Vector3::z() - Vector3::z() * 7.0).norm() < 1e-12);
        // anti-parallel axis still yields a valid frame
        let g = phase_gains(TransferPhase::Exit, &-Vector3::z()).unwrap();
        let [p, ..] = g.world_matrices();
        assert!((p * Vector3::z() - Vector3::z() * 2.0).norm() < 1e-12);
    }

    #[test]
    fn joint_torque_examples() {
        let j = DMatrix::from_column_slice(6, 1, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let f = Wrench::from_force(Vector3::new(0.0, 3.0, 0.0));
        let fb = Wrench::from_force(Vector3::new(0.0, 1.0, 0.0));
        let tau = joint_torques(&j, &f, &fb).unwrap();
        assert_eq!(tau.as_slice(), &[2.0]);
        assert!(joint_torques(&j, &f, &f).unwrap().iter().all(|t| *t == 0.0));
        assert!(joint_torques(&DMatrix::zeros(5, 2), &f, &fb).is_err());
    }

    #[test]
    fn safety_examples() {
        assert_eq!(safety_check(&Wrench::from_force(Vector3::new(0.0, 0.0, 3.1)), 3.0), SafetyStatus::Abort);
        assert_eq!(safety_check(&Wrench::zero(), 3.0), SafetyStatus::Ok);
        assert_eq!(safety_check(&Wrench::from_force(Vector3::new(0.0, 3.0, 0.0)), 3.0), SafetyStatus::Ok);
        assert_eq!(safety_check(&Wrench::from_force(Vector3::new(0.0, -3.0001, 0.0)), 3.0), SafetyStatus::Abort);
        let diag = Wrench::from_force(Vector3::new(2.5, 2.5, 0.0));
        assert_eq!(safety_check(&diag, 3.0), SafetyStatus::Ok);
        assert_eq!(safety_check_with(&diag, 3.0, SafetyRule::Norm), SafetyStatus::Abort);
    }

    #[test]
    fn safety_latch_stays_tripped() {
        let latch = SafetyLatch::new(3.0, SafetyRule::PerComponent).unwrap();
        let (latch, s) = latch.update(&Wrench::from_force(Vector3::new(4.0, 0.0, 0.0)));
        assert_eq!(s, SafetyStatus::Abort);
        let (_, s) = latch.update(&Wrench::zero());
        assert_eq!(s, SafetyStatus::Abort);
        assert!(SafetyLatch::new(0.0, SafetyRule::Norm).is_err());
    }

    proptest! {
        #[test]
        fn reactive_term_is_linear_in_force_history(
            trace in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..200),
            c in -5.0f64..5.0,
        ) {
            let g = ReactivityGains::isotropic(7.0, 20.0);
            let run = |scale: f64| {
                let mut s = state_with(g);
                let mut last = Wrench::zero();
                for f in &trace {
                    let w = Wrench::from_force(Vector3::from(*f) * scale);
                    let (fb, n) = reactive_term(&s, &w, TICK_PERIOD).unwrap();
                    last = fb;
                    s = n;
                }
                last
            };
            let base = run(1.0);
            let scaled = run(c);
            prop_assert!((scaled.force - base.force * c).norm() < 1e-9);
        }

        #[test]
        fn zero_gains_reduce_to_pure_impedance(
            jv in prop::collection::vec(-1.0f64..1.0, 6 * 7),
            f in prop::array::uniform6(-5.0f64..5.0),
            fm in prop::array::uniform3(-2.0f64..2.0),
        ) {
            let j = DMatrix::from_column_slice(6, 7, &jv);
            let s = state_with(ReactivityGains::zero());
            let (fb, _) = reactive_term(&s, &Wrench::from_force(Vector3::from(fm)), TICK_PERIOD).unwrap();
            let fw = Wrench::from_vector(&Vector6::from(f));
            let tau = joint_torques(&j, &fw, &fb).unwrap();
            let pure = j.transpose() * DVector::from_column_slice(&f);
            prop_assert!((tau - pure).norm() < 1e-12);
        }
    }
}
