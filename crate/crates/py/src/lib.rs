//! Python bindings. Structured results come back as plain dicts and lists.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use rmader::geometry;
use rmader::harness::{self, ExperimentSpec};
use rmader::netsim::{self, Scenario};
use rmader::planner::{self, PeerTrajectory, PlanOutcome, PlanRequest, PlannerConfig};
use rmader::protocol::Mode;
use rmader::{BoundaryBox, DynamicLimits, PolySegment, StateSample, StopCriteria, Vec3};

type P3 = [f64; 3];

fn v3(p: P3) -> Vec3 {
    Vec3::new(p[0], p[1], p[2])
}

fn arr(v: &Vec3) -> P3 {
    [v.x, v.y, v.z]
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn bbox_from(half_extents: Option<P3>) -> BoundaryBox {
    half_extents.map_or_else(BoundaryBox::default, |h| BoundaryBox { half_extents: v3(h) })
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    match mode {
        "mader" => Ok(Mode::Mader),
        "rmader" => Ok(Mode::Rmader),
        _ => Err(PyValueError::new_err(format!("unknown mode {mode:?}"))),
    }
}

/// Piecewise cubic Bézier trajectory holding its final point forever.
///
/// ```python
/// Trajectory([(t0, t1, [p0, p1, p2, p3]), ...])
/// ```
#[pyclass(name = "Trajectory", module = "rmader_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyTrajectory {
    inner: Arc<rmader::Trajectory>,
}

impl PyTrajectory {
    fn wrap(t: rmader::Trajectory) -> Self {
        Self { inner: Arc::new(t) }
    }
}

#[pymethods]
impl PyTrajectory {
    #[new]
    fn new(segments: Vec<(f64, f64, [P3; 4])>) -> PyResult<Self> {
        let segs = segments
            .into_iter()
            .map(|(t0, t1, cps)| PolySegment::new(t0, t1, cps.map(v3)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_err)?;
        Ok(Self::wrap(rmader::Trajectory::new(segs).map_err(value_err)?))
    }

    /// Straight line from `start` to `end` over `[t0, t1]`.
    #[staticmethod]
    fn line(start: P3, end: P3, t0: f64, t1: f64) -> PyResult<Self> {
        let (a, b) = (v3(start), v3(end));
        let d = b - a;
        let seg = PolySegment::new(t0, t1, [a, a + d / 3.0, a + d * (2.0 / 3.0), b]).map_err(value_err)?;
        Ok(Self::wrap(rmader::Trajectory::new(vec![seg]).map_err(value_err)?))
    }

    #[staticmethod]
    fn hold(point: P3, t0: f64) -> Self {
        Self::wrap(rmader::Trajectory::hold(v3(point), t0))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self::wrap(serde_json::from_str(text).map_err(value_err)?))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&*self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn start_time(&self) -> f64 {
        self.inner.start_time()
    }

    #[getter]
    fn end_time(&self) -> f64 {
        self.inner.end_time()
    }

    #[getter]
    fn num_segments(&self) -> usize {
        self.inner.segments().len()
    }

    fn position(&self, t: f64) -> P3 {
        arr(&self.inner.position(t))
    }

    /// `(position, velocity, acceleration)` at `t`.
    fn evaluate(&self, t: f64) -> PyResult<(P3, P3, P3)> {
        let s = self.inner.evaluate(t).map_err(value_err)?;
        Ok((arr(&s.position), arr(&s.velocity), arr(&s.acceleration)))
    }

    /// `(∫‖a‖², ∫‖j‖²)` over the whole trajectory.
    fn smoothness_integrals(&self) -> (f64, f64) {
        let s = self.inner.smoothness_integrals();
        (s.accel_integral, s.jerk_integral)
    }

    #[pyo3(signature = (v_max = 10.0, a_max = 20.0, j_max = 30.0))]
    fn check_limits(&self, v_max: f64, a_max: f64, j_max: f64) -> bool {
        self.inner.check_limits(&DynamicLimits { v_max, a_max, j_max })
    }

    fn count_stops(&self) -> usize {
        self.inner.count_stops(&StopCriteria::default())
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(segments={}, t=[{}, {}])",
            self.inner.segments().len(),
            self.inner.start_time(),
            self.inner.end_time()
        )
    }
}

/// Conservative continuous-time check; `False` means the pair is safe.
#[pyfunction]
#[pyo3(signature = (a, b, t0, t1, half_extents = None))]
fn check_pair_collision(
    a: &PyTrajectory,
    b: &PyTrajectory,
    t0: f64,
    t1: f64,
    half_extents: Option<P3>,
) -> PyResult<bool> {
    geometry::check_pair_collision(&a.inner, &b.inner, &bbox_from(half_extents), (t0, t1)).map_err(value_err)
}

/// Ground truth by sampling every `dt` seconds.
#[pyfunction]
#[pyo3(signature = (a, b, t0, t1, dt = 1e-3, half_extents = None))]
fn sampled_collision(a: &PyTrajectory, b: &PyTrajectory, t0: f64, t1: f64, dt: f64, half_extents: Option<P3>) -> bool {
    geometry::sampling_oracle_collision(&a.inner, &b.inner, &bbox_from(half_extents), (t0, t1), dt)
}

/// `(normal, offset)` with `normal·a < offset < normal·b`, or `None`.
#[pyfunction]
fn separating_plane(a: Vec<P3>, b: Vec<P3>) -> Option<(P3, f64)> {
    let a: Vec<Vec3> = a.into_iter().map(v3).collect();
    let b: Vec<Vec3> = b.into_iter().map(v3).collect();
    geometry::compute_separating_plane(&a, &b).map(|p| (arr(&p.normal), p.offset))
}

/// Plans from a state to a goal around peer trajectories. Returns the new
/// trajectory, or `None` when no feasible plan was found.
#[pyfunction]
#[pyo3(signature = (start, goal, peers = Vec::new(), t_switch = 0.0, velocity = [0.0; 3], acceleration = [0.0; 3], segment_duration = None, config = None))]
#[allow(clippy::too_many_arguments)]
fn plan(
    start: P3,
    goal: P3,
    peers: Vec<PyTrajectory>,
    t_switch: f64,
    velocity: P3,
    acceleration: P3,
    segment_duration: Option<f64>,
    config: Option<&str>,
) -> PyResult<Option<PyTrajectory>> {
    let cfg: PlannerConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(value_err)?,
        None => PlannerConfig::default(),
    };
    let start = StateSample {
        t: t_switch,
        position: v3(start),
        velocity: v3(velocity),
        acceleration: v3(acceleration),
    };
    let goal = v3(goal);
    let limits = DynamicLimits::default();
    let req = PlanRequest {
        start,
        goal,
        t_switch,
        num_segments: cfg.num_segments,
        segment_duration: segment_duration.unwrap_or_else(|| cfg.segment_duration(&start, &goal, &limits)),
        limits,
        bbox: BoundaryBox::default(),
        constraints: peers
            .into_iter()
            .enumerate()
            .map(|(id, p)| PeerTrajectory {
                id,
                trajectory: p.inner,
            })
            .collect(),
    };
    match planner::plan(&req, &cfg).map_err(value_err)? {
        PlanOutcome::Feasible(r) => Ok(Some(PyTrajectory::wrap(r.trajectory))),
        PlanOutcome::Infeasible(_) => Ok(None),
    }
}

/// Runs a scenario given as JSON and returns its metrics as a dict.
#[pyfunction]
fn run_scenario<'py>(py: Python<'py>, scenario_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let scenario = Scenario::from_json(scenario_json).map_err(value_err)?;
    let out = py
        .detach(|| netsim::run(&scenario))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &out.metrics)
}

/// Runs a scripted two-agent case; returns collisions, discards and commits.
#[pyfunction]
fn run_case<'py>(py: Python<'py>, name: &str, mode: &str) -> PyResult<Bound<'py, PyAny>> {
    let mode = parse_mode(mode)?;
    let r = py.detach(|| harness::run_case(name, mode)).map_err(value_err)?;
    #[derive(Serialize)]
    struct Out<'a> {
        name: &'a str,
        mode: Mode,
        collisions: usize,
        discards: &'a [harness::Discard],
        commits: &'a [(f64, usize)],
    }
    to_py(
        py,
        &Out {
            name: &r.name,
            mode: r.mode,
            collisions: r.collisions,
            discards: &r.discards,
            commits: &r.commits,
        },
    )
}

/// Runs an experiment spec (JSON); writes the report when `out_dir` is set
/// and returns the per-cell summaries.
#[pyfunction]
#[pyo3(signature = (spec_json, out_dir = None, parallel = 1))]
fn run_experiment<'py>(
    py: Python<'py>,
    spec_json: &str,
    out_dir: Option<PathBuf>,
    parallel: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = ExperimentSpec::from_json(spec_json).map_err(value_err)?;
    let report = py
        .detach(|| harness::run_experiment(&spec, parallel))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    if let Some(dir) = out_dir {
        harness::emit_report(&report, &dir).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    }
    to_py(py, &report.summaries)
}

#[pymodule]
fn rmader_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(check_pair_collision, m)?)?;
    m.add_function(wrap_pyfunction!(sampled_collision, m)?)?;
    m.add_function(wrap_pyfunction!(separating_plane, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_case, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pyo3::types::PyDict;

    fn with_module(code: &str) {
        Python::initialize();
        Python::attach(|py| {
            let m = PyModule::new(py, "rmader_py").unwrap();
            rmader_py(&m).unwrap();
            let globals = PyDict::new(py);
            globals.set_item("rm", m).unwrap();
            let code = std::ffi::CString::new(code).unwrap();
            py.run(&code, Some(&globals), None).unwrap();
        });
    }

    #[test]
    fn trajectory_roundtrip_and_integrals() {
        with_module(
            "t = rm.Trajectory([(0.0, 1.0, [[0,0,0],[0,0,0],[0,0,0],[1,0,0]])])\n\
             a, j = t.smoothness_integrals()\n\
             assert abs(a - 12.0) < 1e-9 and abs(j - 36.0) < 1e-9\n\
             assert rm.Trajectory.from_json(t.to_json()).position(0.5) == t.position(0.5)\n",
        );
    }

    #[test]
    fn planning_and_cases() {
        with_module(
            "peer = rm.Trajectory.hold([2.5, 0, 1], 0.0)\n\
             t = rm.plan([0, 0, 1], [5, 0, 1], peers=[peer])\n\
             assert t is not None\n\
             assert not rm.check_pair_collision(t, peer, 0.0, t.end_time + 1.0)\n\
             r = rm.run_case('table3-case4', 'rmader')\n\
             assert r['collisions'] == 0 and r['discards'][0]['agent'] == 0\n",
        );
    }

    #[test]
    fn bad_mode_raises() {
        with_module(
            "try:\n    rm.run_case('table3-case1', 'fast')\nexcept ValueError:\n    pass\nelse:\n    raise AssertionError\n",
        );
    }
}
