use nalgebra::Vector3;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use bitesim::controller::{self, ControllerState, ReactivityGains, Wrench, TICK_PERIOD};
use bitesim::geometry::Pose;
use bitesim::harness::{self, Method};
use bitesim::kinematics::{self, ChainModel, IkParams, JointConfig, RestartParams};
use bitesim::perception::{self, PointCloud};
use bitesim::presets;
use bitesim::study::{StudyConfig, StudyReport};
use bitesim::transfer::TransferPhase;
use bitesim::Error;

create_exception!(pybitesim, BitesimError, PyException);
create_exception!(pybitesim, ConfigError, BitesimError);
create_exception!(pybitesim, StudyInvalidError, BitesimError);

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::UnknownPreset(_) | Error::Format { .. } | Error::Json(_) => {
            ConfigError::new_err(e.to_string())
        }
        Error::StudyInvalid { .. } => StudyInvalidError::new_err(e.to_string()),
        _ => BitesimError::new_err(e.to_string()),
    }
}

fn phase(name: &str) -> PyResult<TransferPhase> {
    serde_json::from_value(serde_json::Value::String(name.to_owned()))
        .map_err(|_| ConfigError::new_err(format!("unknown phase {name:?}")))
}

/// Serial chain with a fork tip; `name` is a preset ("fixed" or "wrist").
#[pyclass(frozen)]
struct Chain {
    inner: ChainModel,
}

#[pymethods]
impl Chain {
    #[new]
    #[pyo3(signature = (name = "fixed"))]
    fn new(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: presets::chain_by_name(name).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ChainModel::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn dof(&self) -> usize {
        self.inner.dof()
    }

    #[getter]
    fn has_wrist(&self) -> bool {
        self.inner.has_wrist()
    }

    fn home(&self) -> Vec<f64> {
        presets::home_config(&self.inner).0
    }

    /// Tip pose as `[px, py, pz, qw, qx, qy, qz]`.
    fn forward(&self, q: Vec<f64>) -> PyResult<[f64; 7]> {
        Ok(kinematics::forward_kinematics(&self.inner, &JointConfig(q))
            .map_err(err)?
            .to_array())
    }

    /// 6 x dof geometric Jacobian, rows `[v; w]`.
    fn jacobian(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let j = kinematics::jacobian(&self.inner, &JointConfig(q)).map_err(err)?;
        Ok((0..6).map(|r| j.row(r).iter().copied().collect()).collect())
    }

    /// Returns `(q, converged, iterations)`.
    #[pyo3(signature = (target, seed = None, restarts = true))]
    fn inverse(&self, target: [f64; 7], seed: Option<Vec<f64>>, restarts: bool) -> PyResult<(Vec<f64>, bool, usize)> {
        let target = Pose::from_array(target).map_err(err)?;
        let seed = seed.map(JointConfig).unwrap_or_else(|| presets::home_config(&self.inner));
        let params = IkParams::default();
        let sol = if restarts {
            kinematics::ik_multistart(&self.inner, &target, &seed, &params, &RestartParams::default())
        } else {
            kinematics::ik_damped_least_squares(&self.inner, &target, &seed, &params)
        }
        .map_err(err)?;
        Ok((sol.q.0, sol.converged, sol.iterations))
    }
}

/// Force-reactive PI term with its running integral.
#[pyclass]
struct Controller {
    state: ControllerState,
}

#[pymethods]
impl Controller {
    #[new]
    #[pyo3(signature = (k_p, k_i, exit_axis = [1.0, 0.0, 0.0]))]
    fn new(k_p: f64, k_i: f64, exit_axis: [f64; 3]) -> Self {
        Self {
            state: ControllerState::new(ReactivityGains::isotropic(k_p, k_i), Vector3::from(exit_axis)),
        }
    }

    /// Gains for a transfer phase, e.g. "entry" or "exit".
    #[staticmethod]
    #[pyo3(signature = (phase_name, exit_axis = [1.0, 0.0, 0.0]))]
    fn for_phase(phase_name: &str, exit_axis: [f64; 3]) -> PyResult<Self> {
        let axis = Vector3::from(exit_axis);
        let gains = controller::phase_gains(phase(phase_name)?, &axis).map_err(err)?;
        Ok(Self {
            state: ControllerState::new(gains, axis),
        })
    }

    /// Advances one tick with measured force and torque; returns the 6-vector reactive wrench.
    #[pyo3(signature = (force, torque = [0.0; 3]))]
    fn step(&mut self, force: [f64; 3], torque: [f64; 3]) -> PyResult<[f64; 6]> {
        let f_m = Wrench {
            force: Vector3::from(force),
            torque: Vector3::from(torque),
        };
        let (out, next) = controller::reactive_term(&self.state, &f_m, TICK_PERIOD).map_err(err)?;
        self.state = next;
        Ok(out.to_vector().into())
    }

    fn reset(&mut self) {
        self.state = ControllerState::new(self.state.active_gains, self.state.exit_axis);
    }
}

#[pyclass]
struct Scenario {
    inner: harness::Scenario,
}

#[pymethods]
impl Scenario {
    #[new]
    #[pyo3(signature = (seed, method = None, food = None))]
    fn new(seed: u64, method: Option<&str>, food: Option<String>) -> PyResult<Self> {
        let mut inner = harness::Scenario::nominal(seed);
        if let Some(m) = method {
            inner = inner.with_method(Method::from_name(m).map_err(err)?);
        }
        if let Some(f) = food {
            inner.food = f;
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: harness::Scenario::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn run(&self) -> PyResult<Trial> {
        let r = harness::run_trial(&self.inner).map_err(err)?;
        Ok(Trial { inner: r })
    }
}

#[pyclass(frozen)]
struct Trial {
    inner: harness::TrialResult,
}

#[pymethods]
impl Trial {
    #[getter]
    fn outcome(&self) -> &'static str {
        self.inner.report.outcome.name()
    }

    #[getter]
    fn bite_time(&self) -> Option<f64> {
        self.inner.report.bite_time
    }

    #[getter]
    fn peak_force(&self) -> f64 {
        self.inner.report.peak_force
    }

    #[getter]
    fn mean_deviation(&self) -> f64 {
        self.inner.report.mean_deviation
    }

    #[getter]
    fn ticks(&self) -> usize {
        self.inner.log.rows.len()
    }

    fn report_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner.report).map_err(|e| err(e.into()))
    }

    fn trajectory_csv(&self) -> String {
        harness::trajectory_csv(&self.inner.log.rows)
    }

    fn save_log(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.log.save(&path).map_err(err)
    }

    fn replay_matches(&self) -> PyResult<bool> {
        self.inner.log.replay_matches().map_err(err)
    }
}

#[pyclass(frozen)]
struct Study {
    inner: StudyReport,
}

#[pymethods]
impl Study {
    #[getter]
    fn sample_count(&self) -> usize {
        self.inner.sample_count
    }

    #[getter]
    fn included_count(&self) -> usize {
        self.inner.included_count
    }

    #[getter]
    fn convergence_rate(&self) -> f64 {
        self.inner.convergence_rate
    }

    /// `(with_wrist, without_wrist)` mean arm-joint displacement, rad.
    #[getter]
    fn mean_displacement(&self) -> (f64, f64) {
        (self.inner.with_wrist.mean_displacement, self.inner.without_wrist.mean_displacement)
    }

    /// `(with_wrist, without_wrist)` mean comfort cost.
    #[getter]
    fn mean_cost(&self) -> (f64, f64) {
        (self.inner.with_wrist.mean_cost, self.inner.without_wrist.mean_cost)
    }

    /// One-sided p-values `(displacement, cost)`.
    #[getter]
    fn p_values(&self) -> (f64, f64) {
        (self.inner.displacement_test.p_value, self.inner.cost_test.p_value)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn samples_csv(&self) -> String {
        self.inner.samples_csv()
    }
}

#[pyfunction]
#[pyo3(signature = (count = 10_000, seed = 0, translation_bound_m = 0.1, rotation_bound_deg = 30.0))]
fn run_wrist_study(count: usize, seed: u64, translation_bound_m: f64, rotation_bound_deg: f64) -> PyResult<Study> {
    let cfg = StudyConfig {
        count,
        seed,
        translation_bound_m,
        rotation_bound_deg,
        ..StudyConfig::default()
    };
    Ok(Study {
        inner: cfg.run(None).map_err(err)?,
    })
}

/// Runs a suite given as JSON text and returns the report as JSON text.
#[pyfunction]
fn run_suite(suite_json: &str) -> PyResult<String> {
    let suite: harness::Suite = serde_json::from_str(suite_json).map_err(|e| err(e.into()))?;
    Ok(harness::run_suite(&suite).map_err(err)?.to_json())
}

/// `(dx, dy)` in mm for points given in the mouth-aligned scan frame, mm.
#[pyfunction]
#[pyo3(signature = (points, resolution_mm = 0.1))]
fn compute_offsets(points: Vec<[f64; 3]>, resolution_mm: f64) -> PyResult<(f64, f64)> {
    let cloud = PointCloud::new(points.into_iter().map(Vector3::from).collect(), resolution_mm).map_err(err)?;
    let o = perception::compute_offsets(&perception::food_bounding_box(&cloud).map_err(err)?);
    Ok((o.dx, o.dy))
}

#[pyfunction]
fn derive_seed(seed: u64, stream: u64) -> u64 {
    harness::derive_seed(seed, stream)
}

#[pyfunction]
fn food_presets() -> Vec<String> {
    presets::foods().into_iter().map(|f| f.name).collect()
}

#[pymodule]
fn pybitesim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BitesimError", m.py().get_type::<BitesimError>())?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("StudyInvalidError", m.py().get_type::<StudyInvalidError>())?;
    m.add("TICK_PERIOD", TICK_PERIOD)?;
    m.add_class::<Chain>()?;
    m.add_class::<Controller>()?;
    m.add_class::<Scenario>()?;
    m.add_class::<Trial>()?;
    m.add_class::<Study>()?;
    m.add_function(wrap_pyfunction!(run_wrist_study, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(compute_offsets, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    m.add_function(wrap_pyfunction!(food_presets, m)?)?;
    Ok(())
}
