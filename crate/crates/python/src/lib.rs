//! Python bindings for the plapsys simulator.
//!
//! Fields cross the boundary as nested lists of floats; every fallible call
//! raises `ValueError` with the core error message.

use std::collections::HashMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use plapsys_core as core;
use plapsys_core::diagnostics as diag;

fn to_py<T>(r: core::Result<T>) -> PyResult<T> {
    r.map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "SystemParams", frozen, from_py_object)]
#[derive(Clone)]
struct PySystemParams(core::SystemParams);

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (p, n, k, epsilon = 0.0))]
    fn new(p: f64, n: usize, k: usize, epsilon: f64) -> PyResult<Self> {
        to_py(core::SystemParams::new(p, n, k, epsilon)).map(Self)
    }
    #[getter]
    fn p(&self) -> f64 {
        self.0.p
    }
    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }
    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }
    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon
    }
    /// `(a1, a2)`.
    fn exponents(&self) -> (f64, f64) {
        self.0.exponents()
    }
    fn __repr__(&self) -> String {
        let s = &self.0;
        format!("SystemParams(p={}, n={}, k={}, epsilon={})", s.p, s.n, s.k, s.epsilon)
    }
}

#[pyclass(name = "Grid", frozen, from_py_object)]
#[derive(Clone)]
struct PyGrid(core::Grid);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(n: usize, cells: Vec<usize>, half_extent: f64) -> PyResult<Self> {
        to_py(core::Grid::new(n, &cells, half_extent)).map(Self)
    }
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }
    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.0.cells()
    }
    #[getter]
    fn half_extent(&self) -> f64 {
        self.0.half_extent()
    }
    #[getter]
    fn cell_volume(&self) -> f64 {
        self.0.cell_volume()
    }
    fn h(&self, axis: usize) -> PyResult<f64> {
        if axis >= self.0.n() {
            return Err(PyValueError::new_err(format!("axis {axis} out of range")));
        }
        Ok(self.0.h(axis))
    }
    /// Cell centres in storage order; one-dimensional grids give `[x, 0]`.
    fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.0.len()).map(|i| self.0.center(i)).collect()
    }
    fn radii(&self) -> Vec<f64> {
        self.0.radii()
    }
    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "VectorField", frozen, from_py_object)]
#[derive(Clone)]
struct PyVectorField(core::VectorField);

#[pymethods]
impl PyVectorField {
    #[new]
    #[pyo3(signature = (grid, components, time = 0.0))]
    fn new(grid: &PyGrid, components: Vec<Vec<f64>>, time: f64) -> PyResult<Self> {
        to_py(core::VectorField::new(grid.0.clone(), components, time)).map(Self)
    }
    #[staticmethod]
    fn from_snapshot(text: &str) -> PyResult<Self> {
        to_py(core::snapshot::read_snapshot(text.as_bytes())).map(Self)
    }
    fn to_snapshot(&self) -> String {
        core::snapshot::snapshot_to_string(&self.0)
    }
    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid().clone())
    }
    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }
    #[getter]
    fn time(&self) -> f64 {
        self.0.time()
    }
    fn components(&self) -> Vec<Vec<f64>> {
        self.0.components().to_vec()
    }
    fn component(&self, l: usize) -> PyResult<Vec<f64>> {
        to_py(self.0.component(l)).map(<[f64]>::to_vec)
    }
    fn magnitude(&self) -> Vec<f64> {
        self.0.magnitude()
    }
    fn masses(&self) -> Vec<f64> {
        core::operators::l1_mass(&self.0).masses().to_vec()
    }
    fn scaled(&self, factor: f64) -> PyResult<Self> {
        to_py(self.0.scaled(factor)).map(Self)
    }
}

#[pyclass(name = "BarenblattProfile", frozen, from_py_object)]
#[derive(Clone)]
struct PyBarenblattProfile(core::BarenblattProfile);

#[pymethods]
impl PyBarenblattProfile {
    #[new]
    fn new(mass: f64, p: f64, n: usize) -> PyResult<Self> {
        to_py(core::BarenblattProfile::new(mass, p, n)).map(Self)
    }
    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass
    }
    #[getter]
    fn c_m(&self) -> f64 {
        self.0.c_m
    }
    #[getter]
    fn c_rescaled(&self) -> f64 {
        self.0.c_rescaled
    }
    fn evaluate(&self, x: Vec<f64>, t: f64) -> PyResult<f64> {
        to_py(self.0.evaluate(&x, t))
    }
    fn rescaled(&self, eta_norm: f64) -> f64 {
        self.0.rescaled(eta_norm)
    }
    fn support_radius(&self, t: f64) -> f64 {
        self.0.support_radius(t)
    }
    fn sample(&self, grid: &PyGrid, t: f64) -> PyResult<Vec<f64>> {
        to_py(self.0.sample(&grid.0, t))
    }
    fn sample_field(&self, grid: &PyGrid, t: f64) -> PyResult<PyVectorField> {
        to_py(self.0.sample_field(&grid.0, t)).map(PyVectorField)
    }
    fn pde_residual(&self, grid: &PyGrid, t: f64) -> PyResult<f64> {
        to_py(core::barenblatt::pde_residual(&self.0, &grid.0, t))
    }
}

#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory(core::Trajectory);

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn initial(&self) -> PyVectorField {
        PyVectorField(self.0.initial.clone())
    }
    #[getter]
    fn snapshots(&self) -> Vec<PyVectorField> {
        self.0.snapshots.iter().cloned().map(PyVectorField).collect()
    }
    fn times(&self) -> Vec<f64> {
        self.0.snapshots.iter().map(|s| s.time()).collect()
    }
    fn final_field(&self) -> PyVectorField {
        PyVectorField(self.0.final_field().clone())
    }
    fn log_csv(&self) -> String {
        self.0.log.to_csv()
    }
    fn __len__(&self) -> usize {
        self.0.snapshots.len()
    }
}

#[pyclass(name = "DiagnosticsReport", frozen)]
struct PyReport(diag::DiagnosticsReport);

#[pymethods]
impl PyReport {
    #[getter]
    fn name(&self) -> &str {
        &self.0.name
    }
    #[getter]
    fn passed(&self) -> bool {
        self.0.passed()
    }
    #[getter]
    fn notes(&self) -> Vec<String> {
        self.0.notes.clone()
    }
    fn measured(&self) -> HashMap<String, f64> {
        self.0.measured.iter().cloned().collect()
    }
    /// `(label, value, limit, lower_bound, passed)` per check.
    fn checks(&self) -> Vec<(String, f64, f64, bool, bool)> {
        self.0
            .checks
            .iter()
            .map(|c| (c.label.clone(), c.value, c.limit, c.lower_bound, c.passed()))
            .collect()
    }
    fn verdict_line(&self) -> String {
        self.0.verdict_line()
    }
    fn checks_csv(&self) -> String {
        self.0.checks_csv()
    }
    fn to_csv(&self) -> String {
        self.0.to_csv()
    }
    fn __repr__(&self) -> String {
        self.0.verdict_line()
    }
}

/// Files, reports and notes produced by a configured study.
#[pyclass(name = "Outputs", frozen)]
struct PyOutputs(core::cli::Outputs);

#[pymethods]
impl PyOutputs {
    #[getter]
    fn passed(&self) -> bool {
        self.0.passed()
    }
    #[getter]
    fn notes(&self) -> Vec<String> {
        self.0.notes.clone()
    }
    fn files(&self) -> HashMap<String, String> {
        self.0.files.iter().cloned().collect()
    }
    fn reports(&self) -> Vec<PyReport> {
        self.0.reports.iter().cloned().map(PyReport).collect()
    }
    fn verdicts_csv(&self) -> String {
        self.0.verdicts_csv()
    }
    fn write(&self, dir: std::path::PathBuf) -> PyResult<()> {
        to_py(self.0.write(&dir))
    }
}

#[pyfunction]
fn similarity_exponents(p: f64, n: usize) -> PyResult<(f64, f64)> {
    to_py(core::similarity_exponents(p, n))
}

#[pyfunction]
fn profile_constant(mass: f64, p: f64, n: usize) -> PyResult<f64> {
    to_py(core::profile_constant(mass, p, n))
}

#[pyfunction]
#[pyo3(signature = (kind, weights, grid, params, width = 1.0, centers = None, total_mass = None, t0 = 1.0, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn make_initial(
    kind: &str,
    weights: Vec<f64>,
    grid: &PyGrid,
    params: &PySystemParams,
    width: f64,
    centers: Option<Vec<[f64; 2]>>,
    total_mass: Option<f64>,
    t0: f64,
    seed: u64,
) -> PyResult<PyVectorField> {
    let kind = core::PresetKind::parse(kind).ok_or_else(|| PyValueError::new_err(format!("unknown preset {kind:?}")))?;
    let mut preset = core::InitialPreset::new(kind, weights);
    preset.width = width;
    if let Some(c) = centers {
        preset.centers = c;
    }
    preset.total_mass = total_mass;
    preset.t0 = t0;
    preset.seed = seed;
    to_py(core::solver::make_initial(&preset, &grid.0, &params.0)).map(PyVectorField)
}

fn solver_config(t_end: f64, snapshot_times: Option<Vec<f64>>, cfl: f64, max_steps: u64) -> PyResult<core::SolverConfig> {
    to_py(core::SolverConfig::new(cfl, t_end, max_steps, snapshot_times.unwrap_or_else(|| vec![t_end])))
}

/// Evolve `initial` to `t_end`, recording snapshots at `snapshot_times`.
#[pyfunction]
#[pyo3(signature = (initial, params, t_end, snapshot_times = None, cfl = 0.4, max_steps = 100_000_000))]
fn run(
    py: Python<'_>,
    initial: &PyVectorField,
    params: &PySystemParams,
    t_end: f64,
    snapshot_times: Option<Vec<f64>>,
    cfl: f64,
    max_steps: u64,
) -> PyResult<PyTrajectory> {
    let cfg = solver_config(t_end, snapshot_times, cfl, max_steps)?;
    let (init, params) = (initial.0.clone(), params.0);
    let traj = py.detach(move || core::solver::run(&init, &params, &cfg, &mut []));
    to_py(traj).map(PyTrajectory)
}

/// Evolve several initial data with a shared time-step sequence.
#[pyfunction]
#[pyo3(signature = (initials, params, t_end, snapshot_times = None, cfl = 0.4, max_steps = 100_000_000))]
fn run_lockstep(
    py: Python<'_>,
    initials: Vec<PyVectorField>,
    params: &PySystemParams,
    t_end: f64,
    snapshot_times: Option<Vec<f64>>,
    cfl: f64,
    max_steps: u64,
) -> PyResult<Vec<PyTrajectory>> {
    let cfg = solver_config(t_end, snapshot_times, cfl, max_steps)?;
    let fields: Vec<_> = initials.into_iter().map(|f| f.0).collect();
    let params = params.0;
    let trajs = py.detach(move || core::solver::run_lockstep(&fields, &params, &cfg));
    Ok(to_py(trajs)?.into_iter().map(PyTrajectory).collect())
}

/// Parse a flat-text run configuration and return its canonical text.
#[pyfunction]
fn parse_config(text: &str) -> PyResult<String> {
    to_py(core::config::parse_config(text)).map(|c| c.to_text())
}

/// Run the `simulate` study for a configuration text.
#[pyfunction]
fn simulate(py: Python<'_>, config: &str) -> PyResult<(PyTrajectory, PyOutputs)> {
    let cfg = to_py(core::config::parse_config(config))?;
    let (traj, out) = to_py(py.detach(move || core::cli::simulate(&cfg)))?;
    Ok((PyTrajectory(traj), PyOutputs(out)))
}

/// Run the `entropy` study for a configuration text.
#[pyfunction]
fn entropy_study(py: Python<'_>, config: &str) -> PyResult<(PyTrajectory, PyOutputs)> {
    let cfg = to_py(core::config::parse_config(config))?;
    let (traj, out) = to_py(py.detach(move || core::cli::entropy_study(&cfg)))?;
    Ok((PyTrajectory(traj), PyOutputs(out)))
}

#[pyfunction]
#[pyo3(signature = (ps, ns, masses, cells = 400, half_extent = 4.0, t = 1.0))]
fn verify_barenblatt(ps: Vec<f64>, ns: Vec<usize>, masses: Vec<f64>, cells: usize, half_extent: f64, t: f64) -> PyResult<PyOutputs> {
    let mut cases = Vec::new();
    for &p in &ps {
        for &n in &ns {
            for &mass in &masses {
                cases.push(core::cli::BarenblattCase { p, n, mass });
            }
        }
    }
    to_py(core::cli::verify_barenblatt(&cases, cells, half_extent, t)).map(PyOutputs)
}

#[pyfunction]
#[pyo3(signature = (traj, tol = diag::MASS_TOLERANCE))]
fn mass_conservation_report(traj: &PyTrajectory, tol: f64) -> PyResult<PyReport> {
    to_py(diag::mass_conservation_report(&traj.0.log, tol)).map(PyReport)
}

#[pyfunction]
#[pyo3(signature = (traj, params, t_min, slack = diag::GRADIENT_SLACK))]
fn gradient_bound_report(traj: &PyTrajectory, params: &PySystemParams, t_min: f64, slack: f64) -> PyResult<PyReport> {
    to_py(diag::gradient_bound_report(&traj.0, t_min, &params.0, slack)).map(PyReport)
}

#[pyfunction]
#[pyo3(signature = (traj, params, rate_fraction = 0.6, component_reduction = 0.1))]
fn l1_convergence_report(traj: &PyTrajectory, params: &PySystemParams, rate_fraction: f64, component_reduction: f64) -> PyResult<PyReport> {
    let opts = diag::L1ConvergenceOptions {
        rate_fraction,
        component_reduction,
    };
    to_py(diag::l1_convergence_report(&traj.0, &params.0, opts)).map(PyReport)
}

#[pyfunction]
#[pyo3(signature = (a, b, rel_tol = diag::CONTRACTION_TOLERANCE))]
fn l2_contraction_report(a: &PyTrajectory, b: &PyTrajectory, rel_tol: f64) -> PyResult<PyReport> {
    to_py(diag::l2_contraction_report(&a.0, &b.0, rel_tol)).map(PyReport)
}

/// Returns the envelope report and the per-snapshot CSV.
#[pyfunction]
#[pyo3(signature = (traj, params, slack = core::selfsim::DEFAULT_DECAY_SLACK))]
fn entropy_decay_report(traj: &PyTrajectory, params: &PySystemParams, slack: f64) -> PyResult<(PyReport, String)> {
    let rep = to_py(core::selfsim::entropy_decay_report(&traj.0, &params.0, slack))?;
    Ok((PyReport(diag::entropy_decay_diagnostics(&rep)), rep.to_csv()))
}

#[pyfunction]
#[pyo3(signature = (traj, params, slack = 0.05, final_limit = 0.05))]
fn proportionality_report(traj: &PyTrajectory, params: &PySystemParams, slack: f64, final_limit: f64) -> PyResult<PyReport> {
    to_py(diag::proportionality_report(&traj.0, &params.0, slack, final_limit)).map(PyReport)
}

/// Returns the Harnack report together with the constants `C_hat[l][r]`.
#[pyfunction]
fn harnack_report(traj: &PyTrajectory, radii: Vec<f64>, t: f64, params: &PySystemParams) -> PyResult<(PyReport, Vec<Vec<f64>>)> {
    let rep = to_py(diag::harnack_report(&traj.0, &radii, t, &params.0))?;
    Ok((PyReport(rep.to_diagnostics()), rep.constants.clone()))
}

#[pymodule]
fn plapsys(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyVectorField>()?;
    m.add_class::<PyBarenblattProfile>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyOutputs>()?;
    m.add_function(wrap_pyfunction!(similarity_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(profile_constant, m)?)?;
    m.add_function(wrap_pyfunction!(make_initial, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_lockstep, m)?)?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_study, m)?)?;
    m.add_function(wrap_pyfunction!(verify_barenblatt, m)?)?;
    m.add_function(wrap_pyfunction!(mass_conservation_report, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_bound_report, m)?)?;
    m.add_function(wrap_pyfunction!(l1_convergence_report, m)?)?;
    m.add_function(wrap_pyfunction!(l2_contraction_report, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_decay_report, m)?)?;
    m.add_function(wrap_pyfunction!(proportionality_report, m)?)?;
    m.add_function(wrap_pyfunction!(harnack_report, m)?)?;
    Ok(())
}
