//! Conservative explicit scheme for the regularised system
//!
//! ```text
//! u^l_t = div((|∇u|^{p-2} + ε) ∇u^l)
//! ```
//!
//! Fluxes live on cell faces, `F^l = (Θ^{p-2} + ε) (u_{i+1} - u_i) / h` with `Θ`
//! the face value of the system gradient norm, and outer faces carry no flux.
//! The per-component sum therefore telescopes and discrete mass is conserved
//! up to rounding. Time steps follow the frozen-coefficient parabolic limit
//! `dt = cfl h² / (2n (max Θ^{p-2} + ε))`, under which the update is a convex
//! combination of neighbouring values and stays nonnegative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::barenblatt::BarenblattProfile;
use crate::error::{Error, Result};
use crate::field::{Grid, SystemParams, VectorField};
use crate::operators::{flux_divergence_into, FaceWorkspace};

/// Cells holding a value above this count as support.
pub const SUPPORT_THRESHOLD: f64 = 1e-14;
/// Minimum number of empty cells between the support and the boundary.
pub const SUPPORT_MARGIN_CELLS: usize = 2;
/// Grids at least this large update components in parallel.
const PARALLEL_CELLS: usize = 8192;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cfl_safety: f64,
    pub t_end: f64,
    pub max_steps: u64,
    pub snapshot_times: Vec<f64>,
    /// Run-log stride in steps; the initial and final states are always logged.
    pub log_interval: u64,
}

impl SolverConfig {
    pub fn with_log_interval(mut self, interval: u64) -> Self {
        self.log_interval = interval.max(1);
        self
    }

    pub fn new(cfl_safety: f64, t_end: f64, max_steps: u64, snapshot_times: Vec<f64>) -> Result<Self> {
        if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl_safety must lie in (0, 1], got {cfl_safety}"
            )));
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
        }
        if snapshot_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("snapshot times must be strictly increasing".into()));
        }
        if let Some(t) = snapshot_times.iter().find(|&&t| !(t > 0.0 && t <= t_end)) {
            return Err(Error::InvalidParameter(format!(
                "snapshot time {t} outside (0, t_end = {t_end}]"
            )));
        }
        Ok(Self {
            cfl_safety,
            t_end,
            max_steps,
            snapshot_times,
            log_interval: 1,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub field: VectorField,
    pub t: f64,
    pub step: u64,
    pub dt_last: f64,
    /// Cumulative mass removed by clipping negative values.
    pub clipped_mass: f64,
}

impl SimulationState {
    pub fn new(field: VectorField) -> Self {
        let t = field.time();
        Self {
            field,
            t,
            step: 0,
            dt_last: 0.0,
            clipped_mass: 0.0,
        }
    }
}

fn dt_from_sup(grid: &Grid, sup_theta: f64, params: &SystemParams, cfl: f64) -> f64 {
    let h = grid.min_spacing();
    let coef = sup_theta.powf(params.p - 2.0) + params.epsilon;
    if coef == 0.0 {
        cfl * h * h
    } else {
        cfl * h * h / (2.0 * grid.n() as f64 * coef)
    }
}

/// Largest stable explicit step for the current state.
pub fn stable_timestep(state: &SimulationState, params: &SystemParams, config: &SolverConfig) -> f64 {
    let grid = state.field.grid();
    let mut ws = FaceWorkspace::new(grid, state.field.k());
    ws.compute(grid, state.field.components());
    dt_from_sup(grid, ws.max_theta(), params, config.cfl_safety)
}

/// True when no support cell lies closer than the margin to the boundary.
fn margin_ok(grid: &Grid, components: &[Vec<f64>]) -> bool {
    let [c0, c1] = grid.shape();
    let band = SUPPORT_MARGIN_CELLS;
    let hot = |idx: usize| components.iter().any(|c| c[idx] > SUPPORT_THRESHOLD);
    let rows = (0..band.min(c0)).chain(c0.saturating_sub(band)..c0);
    for i in rows {
        if (0..c1).any(|j| hot(grid.index(i, j))) {
            return false;
        }
    }
    if grid.n() == 2 {
        let cols: Vec<usize> = (0..band.min(c1)).chain(c1.saturating_sub(band)..c1).collect();
        for i in 0..c0 {
            if cols.iter().any(|&j| hot(grid.index(i, j))) {
                return false;
            }
        }
    }
    true
}

/// Owns the scratch buffers of one evolving state.
struct Stepper {
    grid: Grid,
    params: SystemParams,
    ws: FaceWorkspace,
    sup_theta: f64,
}

impl Stepper {
    fn new(grid: &Grid, params: &SystemParams, k: usize) -> Self {
        Self {
            grid: grid.clone(),
            params: *params,
            ws: FaceWorkspace::new(grid, k),
            sup_theta: 0.0,
        }
    }

    /// Gradients and `Θ` of the current state; returns `max Θ`.
    fn prepare(&mut self, comps: &[Vec<f64>]) -> f64 {
        self.ws.compute(&self.grid, comps);
        self.sup_theta = self.ws.max_theta();
        self.sup_theta
    }

    fn stable_dt(&self, cfl: f64) -> f64 {
        dt_from_sup(&self.grid, self.sup_theta, &self.params, cfl)
    }

    /// Forward-Euler update of `comps` using the buffers from `prepare`.
    /// Returns the mass clipped from negative values.
    fn advance(&mut self, comps: &mut [Vec<f64>], dt: f64, step: u64) -> Result<f64> {
        self.ws.theta_to_coefficient(self.params.p, self.params.epsilon);
        let grid = &self.grid;
        let coef = &self.ws.theta;
        let dv = grid.cell_volume();
        let update = |(u, grad): (&mut Vec<f64>, &Vec<Vec<f64>>)| -> (f64, Option<usize>) {
            let mut div = vec![0.0; u.len()];
            flux_divergence_into(grid, coef, grad, &mut div);
            let mut clipped = 0.0;
            let mut bad = None;
            for (idx, (v, d)) in u.iter_mut().zip(&div).enumerate() {
                *v += dt * d;
                if !v.is_finite() {
                    bad.get_or_insert(idx);
                } else if *v < 0.0 {
                    clipped -= *v;
                    *v = 0.0;
                }
            }
            (clipped * dv, bad)
        };
        let results: Vec<(f64, Option<usize>)> = if grid.len() >= PARALLEL_CELLS {
            comps.par_iter_mut().zip(self.ws.grads.par_iter()).map(update).collect()
        } else {
            comps.iter_mut().zip(self.ws.grads.iter()).map(update).collect()
        };
        let mut clipped = 0.0;
        for (component, (c, bad)) in results.into_iter().enumerate() {
            if let Some(cell) = bad {
                return Err(Error::NonFinite {
                    step,
                    component,
                    cell,
                });
            }
            clipped += c;
        }
        Ok(clipped)
    }
}

/// One forward-Euler step with the stable time step, clamped to `t_end`.
pub fn step(state: &SimulationState, params: &SystemParams, config: &SolverConfig) -> Result<SimulationState> {
    let grid = state.field.grid();
    if !margin_ok(grid, state.field.components()) {
        return Err(Error::SupportOverflow {
            step: state.step,
            t: state.t,
        });
    }
    let mut stepper = Stepper::new(grid, params, state.field.k());
    let mut comps = state.field.components().to_vec();
    stepper.prepare(&comps);
    let mut dt = stepper.stable_dt(config.cfl_safety);
    let mut t_new = state.t + dt;
    if state.t < config.t_end && t_new >= config.t_end {
        dt = config.t_end - state.t;
        t_new = config.t_end;
    }
    let clipped = stepper.advance(&mut comps, dt, state.step + 1)?;
    Ok(SimulationState {
        field: VectorField::from_parts_unchecked(grid.clone(), comps, t_new),
        t: t_new,
        step: state.step + 1,
        dt_last: dt,
        clipped_mass: state.clipped_mass + clipped,
    })
}

/// Receives every recorded snapshot as it is produced.
pub trait Observer {
    fn on_snapshot(&mut self, snapshot: &VectorField);
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub step: u64,
    pub t: f64,
    /// Step that produced this state (0 for the initial state).
    pub dt: f64,
    pub masses: Vec<f64>,
    pub sup_grad: f64,
    /// Cumulative clipped mass.
    pub clipped_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub entries: Vec<LogEntry>,
}

impl RunLog {
    /// `step,t,dt,M_1..M_k,sup_grad,clipped_mass`
    pub fn to_csv(&self) -> String {
        let k = self.entries.first().map_or(0, |e| e.masses.len());
        let mut out = String::from("step,t,dt");
        for l in 1..=k {
            out.push_str(&format!(",M_{l}"));
        }
        out.push_str(",sup_grad,clipped_mass\n");
        for e in &self.entries {
            out.push_str(&format!("{},{:e},{:e}", e.step, e.t, e.dt));
            for m in &e.masses {
                out.push_str(&format!(",{m:.16e}"));
            }
            out.push_str(&format!(",{:e},{:e}\n", e.sup_grad, e.clipped_mass));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: VectorField,
    pub snapshots: Vec<VectorField>,
    pub log: RunLog,
}

impl Trajectory {
    /// A trajectory assembled from externally produced snapshots (no run log
    /// beyond the masses of each snapshot).
    pub fn from_snapshots(initial: VectorField, snapshots: Vec<VectorField>) -> Self {
        let entry = |f: &VectorField, step| LogEntry {
            step,
            t: f.time(),
            dt: 0.0,
            masses: crate::operators::l1_mass(f).masses().to_vec(),
            sup_grad: crate::operators::system_gradient_norm(f).max(),
            clipped_mass: 0.0,
        };
        let entries = std::iter::once(&initial)
            .chain(&snapshots)
            .enumerate()
            .map(|(i, f)| entry(f, i as u64))
            .collect();
        Self {
            initial,
            snapshots,
            log: RunLog { entries },
        }
    }

    /// The snapshot whose time equals `t` within a relative `1e-12`.
    pub fn snapshot_at(&self, t: f64) -> Option<&VectorField> {
        std::iter::once(&self.initial)
            .chain(&self.snapshots)
            .find(|f| (f.time() - t).abs() <= 1e-12 * t.abs().max(1e-300))
    }

    pub fn final_field(&self) -> &VectorField {
        self.snapshots.last().unwrap_or(&self.initial)
    }
}

fn interpolate(grid: &Grid, prev: &[Vec<f64>], cur: &[Vec<f64>], w: f64, t: f64) -> VectorField {
    let comps = prev
        .iter()
        .zip(cur)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect())
        .collect();
    VectorField::from_parts_unchecked(grid.clone(), comps, t)
}

fn masses(grid: &Grid, comps: &[Vec<f64>]) -> Vec<f64> {
    let dv = grid.cell_volume();
    comps.iter().map(|c| dv * c.iter().sum::<f64>()).collect()
}

struct Member {
    stepper: Stepper,
    cur: Vec<Vec<f64>>,
    prev: Vec<Vec<f64>>,
    clipped: f64,
    snapshots: Vec<VectorField>,
    log: RunLog,
}

/// Evolve several states with a shared time step (the minimum of their
/// stable steps). Snapshots are linear interpolants at the requested times.
fn evolve(
    initials: &[VectorField],
    params: &SystemParams,
    config: &SolverConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<Vec<Trajectory>> {
    let grid = initials
        .first()
        .ok_or_else(|| Error::InvalidParameter("nothing to evolve".into()))?
        .grid()
        .clone();
    let t0 = initials[0].time();
    for f in initials {
        if f.grid() != &grid || f.time() != t0 || f.k() != params.k {
            return Err(Error::MismatchedTrajectories(
                "lockstep members need a common grid, start time and k".into(),
            ));
        }
    }
    let mut members: Vec<Member> = initials
        .iter()
        .map(|f| Member {
            stepper: Stepper::new(&grid, params, f.k()),
            cur: f.components().to_vec(),
            prev: f.components().to_vec(),
            clipped: 0.0,
            snapshots: Vec::new(),
            log: RunLog::default(),
        })
        .collect();
    let mut t = t0;
    let mut step: u64 = 0;
    let mut dt_last = 0.0;
    let mut next_snap = config.snapshot_times.partition_point(|&s| s <= t0);
    loop {
        let mut dt = f64::INFINITY;
        let record = step.is_multiple_of(config.log_interval) || t >= config.t_end;
        for m in members.iter_mut() {
            let sup = m.stepper.prepare(&m.cur);
            if record {
                m.log.entries.push(LogEntry {
                    step,
                    t,
                    dt: dt_last,
                    masses: masses(&grid, &m.cur),
                    sup_grad: sup,
                    clipped_mass: m.clipped,
                });
            }
            dt = dt.min(m.stepper.stable_dt(config.cfl_safety));
        }
        if t >= config.t_end {
            break;
        }
        if step >= config.max_steps {
            return Err(Error::MaxStepsExhausted {
                max_steps: config.max_steps,
                t,
                t_end: config.t_end,
            });
        }
        if members.iter().any(|m| !margin_ok(&grid, &m.cur)) {
            return Err(Error::SupportOverflow { step, t });
        }
        let mut t_new = t + dt;
        if t_new >= config.t_end {
            dt = config.t_end - t;
            t_new = config.t_end;
        }
        step += 1;
        for m in members.iter_mut() {
            for (p, c) in m.prev.iter_mut().zip(&m.cur) {
                p.copy_from_slice(c);
            }
            m.clipped += m.stepper.advance(&mut m.cur, dt, step)?;
        }
        while next_snap < config.snapshot_times.len() && config.snapshot_times[next_snap] <= t_new {
            let ts = config.snapshot_times[next_snap];
            let w = if ts == t_new { 1.0 } else { (ts - t) / (t_new - t) };
            for m in members.iter_mut() {
                let snap = interpolate(&grid, &m.prev, &m.cur, w, ts);
                for o in observers.iter_mut() {
                    o.on_snapshot(&snap);
                }
                m.snapshots.push(snap);
            }
            next_snap += 1;
        }
        t = t_new;
        dt_last = dt;
    }
    Ok(initials
        .iter()
        .zip(members)
        .map(|(init, m)| Trajectory {
            initial: init.clone(),
            snapshots: m.snapshots,
            log: m.log,
        })
        .collect())
}

/// Iterate until `t_end`, recording snapshots at the configured times.
pub fn run(
    initial: &VectorField,
    params: &SystemParams,
    config: &SolverConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    Ok(evolve(std::slice::from_ref(initial), params, config, observers)?
        .pop()
        .expect("one member"))
}

/// Evolve several initial data with a common time-step sequence, so their
/// snapshots are directly comparable.
pub fn run_lockstep(
    initials: &[VectorField],
    params: &SystemParams,
    config: &SolverConfig,
) -> Result<Vec<Trajectory>> {
    evolve(initials, params, config, &mut [])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    /// `c^l (1 - |x - x_l|²/w²)_+²`
    Bump,
    /// `(c^l/|c|) B_M(x - x_l, t0)`
    BarenblattWeighted,
    /// Smoothed uniform noise on the ball `|x - x_l| < w`.
    RandomCompact,
}

impl PresetKind {
    pub fn name(&self) -> &'static str {
        match self {
            PresetKind::Bump => "bump",
            PresetKind::BarenblattWeighted => "barenblatt-weighted",
            PresetKind::RandomCompact => "random-compact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bump" => Some(PresetKind::Bump),
            "barenblatt-weighted" => Some(PresetKind::BarenblattWeighted),
            "random-compact" => Some(PresetKind::RandomCompact),
            _ => None,
        }
    }
}

/// Recipe for initial data.
///
/// When `total_mass` is set, component `l` is rescaled to carry mass
/// `total_mass * c^l / |c|`. Barenblatt-weighted data always uses this
/// normalisation, with `total_mass` defaulting to `|c|`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPreset {
    pub kind: PresetKind,
    pub weights: Vec<f64>,
    /// One centre shared by all components, or one per component.
    pub centers: Vec<[f64; 2]>,
    pub width: f64,
    pub total_mass: Option<f64>,
    /// Profile time for barenblatt-weighted data.
    pub t0: f64,
    pub seed: u64,
}

impl InitialPreset {
    pub fn new(kind: PresetKind, weights: Vec<f64>) -> Self {
        Self {
            kind,
            weights,
            centers: vec![[0.0, 0.0]],
            width: 1.0,
            total_mass: None,
            t0: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.weights.len() != k {
            return Err(Error::InvalidParameter(format!(
                "expected {k} weights, got {}",
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        if self.weights.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidParameter("weights must not all be zero".into()));
        }
        if self.centers.len() != 1 && self.centers.len() != k {
            return Err(Error::InvalidParameter(format!(
                "expected 1 or {k} centres, got {}",
                self.centers.len()
            )));
        }
        if !(self.width > 0.0) {
            return Err(Error::InvalidParameter(format!("width must be positive, got {}", self.width)));
        }
        if let Some(m) = self.total_mass {
            if !(m > 0.0) {
                return Err(Error::InvalidParameter(format!("mass must be positive, got {m}")));
            }
        }
        if self.kind == PresetKind::BarenblattWeighted && !(self.t0 > 0.0) {
            return Err(Error::InvalidParameter(format!("t0 must be positive, got {}", self.t0)));
        }
        Ok(())
    }

    fn center(&self, l: usize) -> [f64; 2] {
        if self.centers.len() == 1 {
            self.centers[0]
        } else {
            self.centers[l]
        }
    }
}

fn smooth(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let [c0, c1] = grid.shape();
    let mut out = vec![0.0; u.len()];
    for i in 0..c0 {
        for j in 0..c1 {
            let mut sum = u[grid.index(i, j)];
            let mut count = 1.0;
            let mut add = |ii: usize, jj: usize| {
                sum += u[grid.index(ii, jj)];
                count += 1.0;
            };
            if i > 0 {
                add(i - 1, j);
            }
            if i + 1 < c0 {
                add(i + 1, j);
            }
            if grid.n() == 2 {
                if j > 0 {
                    add(i, j - 1);
                }
                if j + 1 < c1 {
                    add(i, j + 1);
                }
            }
            out[grid.index(i, j)] = sum / count;
        }
    }
    out
}

pub fn make_initial(preset: &InitialPreset, grid: &Grid, params: &SystemParams) -> Result<VectorField> {
    preset.validate(params.k)?;
    let dist = |idx: usize, c: [f64; 2]| {
        let x = grid.center(idx);
        (x[0] - c[0]).hypot(if grid.n() == 2 { x[1] - c[1] } else { 0.0 })
    };
    let w = preset.width;
    let mut comps: Vec<Vec<f64>> = match preset.kind {
        PresetKind::Bump => (0..params.k)
            .map(|l| {
                let c = preset.center(l);
                (0..grid.len())
                    .map(|idx| {
                        let s = (1.0 - (dist(idx, c) / w).powi(2)).max(0.0);
                        preset.weights[l] * s * s
                    })
                    .collect()
            })
            .collect(),
        PresetKind::BarenblattWeighted => {
            let norm = preset.weights.iter().map(|c| c * c).sum::<f64>().sqrt();
            let profile = BarenblattProfile::new(preset.total_mass.unwrap_or(norm), params.p, grid.n())?;
            (0..params.k)
                .map(|l| {
                    let c = preset.center(l);
                    (0..grid.len())
                        .map(|idx| {
                            profile
                                .evaluate_radius(dist(idx, c), preset.t0)
                                .map(|b| preset.weights[l] / norm * b)
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?
        }
        PresetKind::RandomCompact => {
            let mut rng = ChaCha8Rng::seed_from_u64(preset.seed);
            (0..params.k)
                .map(|l| {
                    let c = preset.center(l);
                    let raw: Vec<f64> = (0..grid.len())
                        .map(|idx| if dist(idx, c) < w { rng.gen::<f64>() } else { 0.0 })
                        .collect();
                    let smoothed = smooth(grid, &smooth(grid, &raw));
                    smoothed.into_iter().map(|v| preset.weights[l] * v).collect()
                })
                .collect()
        }
    };
    let total = match preset.kind {
        PresetKind::BarenblattWeighted => {
            Some(preset.total_mass.unwrap_or_else(|| preset.weights.iter().map(|c| c * c).sum::<f64>().sqrt()))
        }
        _ => preset.total_mass,
    };
    if let Some(total) = total {
        let norm = preset.weights.iter().map(|c| c * c).sum::<f64>().sqrt();
        let dv = grid.cell_volume();
        for (l, u) in comps.iter_mut().enumerate() {
            let target = total * preset.weights[l] / norm;
            let current = dv * u.iter().sum::<f64>();
            if target == 0.0 {
                u.fill(0.0);
            } else if current > 0.0 {
                let s = target / current;
                u.iter_mut().for_each(|v| *v *= s);
            } else {
                return Err(Error::InvalidParameter(format!(
                    "component {l} has no support on this grid"
                )));
            }
        }
    }
    if !margin_ok(grid, &comps) {
        return Err(Error::SupportOverflow { step: 0, t: 0.0 });
    }
    let time = if preset.kind == PresetKind::BarenblattWeighted { preset.t0 } else { 0.0 };
    VectorField::new(grid.clone(), comps, time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::l1_mass;

    fn params(k: usize) -> SystemParams {
        SystemParams::new(3.0, 1, k, 0.0).unwrap()
    }

    fn cfg(t_end: f64, snaps: Vec<f64>) -> SolverConfig {
        SolverConfig::new(0.4, t_end, 1_000_000, snaps).unwrap()
    }

    fn bump(k: usize, cells: usize) -> VectorField {
        let g = Grid::new(1, &[cells], 4.0).unwrap();
        let mut preset = InitialPreset::new(PresetKind::Bump, (1..=k).map(|l| l as f64).collect());
        preset.centers = (0..k).map(|l| [0.3 * l as f64 - 0.2, 0.0]).collect();
        make_initial(&preset, &g, &params(k)).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.0, 1.0, 10, vec![]).is_err());
        assert!(SolverConfig::new(1.5, 1.0, 10, vec![]).is_err());
        assert!(SolverConfig::new(0.5, 0.0, 10, vec![]).is_err());
        assert!(SolverConfig::new(0.5, 1.0, 10, vec![0.5, 0.2]).is_err());
        assert!(SolverConfig::new(0.5, 1.0, 10, vec![0.0]).is_err());
        assert!(SolverConfig::new(0.5, 1.0, 10, vec![1.5]).is_err());
        assert!(SolverConfig::new(1.0, 1.0, 10, vec![0.5, 1.0]).is_ok());
    }

    #[test]
    fn timestep_formula() {
        let g = Grid::new(1, &[20], 1.0).unwrap();
        let zero = SimulationState::new(VectorField::zeros(g.clone(), 1, 0.0).unwrap());
        let c = SolverConfig::new(0.5, 1.0, 10, vec![]).unwrap();
        assert!((stable_timestep(&zero, &params(1), &c) - 0.5 * 0.01).abs() < 1e-16);
        let eps = SystemParams::new(3.0, 1, 1, 1.0).unwrap();
        assert!((stable_timestep(&zero, &eps, &c) - 0.0025).abs() < 1e-16);

        let f = bump(1, 200);
        let s1 = SimulationState::new(f.clone());
        let s2 = SimulationState::new(f.scaled(2.0).unwrap());
        let (d1, d2) = (stable_timestep(&s1, &params(1), &c), stable_timestep(&s2, &params(1), &c));
        assert!((d1 / d2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_points() {
        let g = Grid::new(2, &[12, 12], 1.0).unwrap();
        let p2 = SystemParams::new(3.0, 2, 2, 0.0).unwrap();
        let zero = SimulationState::new(VectorField::zeros(g.clone(), 2, 0.0).unwrap());
        let c = cfg(1.0, vec![]);
        assert_eq!(step(&zero, &p2, &c).unwrap().field.components(), zero.field.components());
        // constant data touches the boundary, so drive the raw stepper
        let comps = vec![vec![2.0; g.len()], vec![5.0; g.len()]];
        let mut st = Stepper::new(&g, &p2, 2);
        let mut cur = comps.clone();
        st.prepare(&cur);
        st.advance(&mut cur, 0.1, 1).unwrap();
        assert_eq!(cur, comps);
    }

    #[test]
    fn step_conserves_mass_per_component() {
        let f = bump(2, 400);
        let p = params(2);
        let c = cfg(10.0, vec![]);
        let mut s = SimulationState::new(f);
        let m0 = l1_mass(&s.field);
        for _ in 0..200 {
            s = step(&s, &p, &c).unwrap();
            let m = l1_mass(&s.field);
            for (a, b) in m.masses().iter().zip(m0.masses()) {
                assert!((a / b - 1.0).abs() < 1e-13 * (s.step as f64).sqrt().max(1.0));
            }
        }
        assert_eq!(s.clipped_mass, 0.0);
    }

    #[test]
    fn short_horizon_takes_one_step() {
        let f = bump(1, 100);
        let c = SolverConfig::new(0.4, 1e-12, 10, vec![1e-12]).unwrap();
        let traj = run(&f, &params(1), &c, &mut []).unwrap();
        assert_eq!(traj.log.entries.len(), 2);
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.snapshots[0].time(), 1e-12);
    }

    #[test]
    fn snapshots_only_at_requested_times() {
        let f = bump(1, 100);
        let c = cfg(0.5, vec![0.1, 0.25, 0.5]);
        let traj = run(&f, &params(1), &c, &mut []).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.time()).collect();
        assert_eq!(times, vec![0.1, 0.25, 0.5]);
    }

    #[test]
    fn log_interval_keeps_endpoints() {
        let f = bump(1, 100);
        let full = run(&f, &params(1), &cfg(0.2, vec![]), &mut []).unwrap();
        let c = cfg(0.2, vec![]).with_log_interval(7);
        let sparse = run(&f, &params(1), &c, &mut []).unwrap();
        let last = full.log.entries.last().unwrap();
        assert_eq!(sparse.log.entries.first(), full.log.entries.first());
        assert_eq!(sparse.log.entries.last(), Some(last));
        assert!(sparse.log.entries.iter().all(|e| e.step % 7 == 0 || e.step == last.step));
        assert_eq!(sparse.final_field(), full.final_field());
    }

    struct Count(usize);
    impl Observer for Count {
        fn on_snapshot(&mut self, _: &VectorField) {
            self.0 += 1;
        }
    }

    #[test]
    fn observers_see_every_snapshot() {
        let f = bump(1, 100);
        let mut count = Count(0);
        run(&f, &params(1), &cfg(0.3, vec![0.1, 0.2, 0.3]), &mut [&mut count]).unwrap();
        assert_eq!(count.0, 3);
    }

    #[test]
    fn max_steps_is_reported() {
        let f = bump(1, 100);
        let c = SolverConfig::new(0.4, 10.0, 3, vec![]).unwrap();
        assert!(matches!(
            run(&f, &params(1), &c, &mut []),
            Err(Error::MaxStepsExhausted { max_steps: 3, .. })
        ));
    }

    #[test]
    fn overflow_aborts() {
        let g = Grid::new(1, &[40], 1.5).unwrap();
        let preset = InitialPreset::new(PresetKind::Bump, vec![1.0]);
        let f = make_initial(&preset, &g, &params(1)).unwrap();
        let res = run(&f, &params(1), &cfg(100.0, vec![]), &mut []);
        assert!(matches!(res, Err(Error::SupportOverflow { .. })), "{res:?}");
        let mut wide = preset.clone();
        wide.width = 1.45;
        assert!(make_initial(&wide, &g, &params(1)).is_err());
    }

    #[test]
    fn presets() {
        let g = Grid::new(1, &[200], 5.0).unwrap();
        let mut b = InitialPreset::new(PresetKind::Bump, vec![1.0, 0.0]);
        let f = make_initial(&b, &g, &params(2)).unwrap();
        assert!(f.component(1).unwrap().iter().all(|v| *v == 0.0));
        b.weights = vec![0.0, 0.0];
        assert!(make_initial(&b, &g, &params(2)).is_err());

        let bw = InitialPreset::new(PresetKind::BarenblattWeighted, vec![3.0, 4.0]);
        let f = make_initial(&bw, &g, &params(2)).unwrap();
        let m = l1_mass(&f);
        assert!((m.masses()[0] / m.masses()[1] - 0.75).abs() < 1e-14);
        assert!((m.masses()[0] - 3.0).abs() < 1e-12);

        let mut rc = InitialPreset::new(PresetKind::RandomCompact, vec![1.0, 2.0]);
        rc.seed = 42;
        let a = make_initial(&rc, &g, &params(2)).unwrap();
        let b2 = make_initial(&rc, &g, &params(2)).unwrap();
        assert_eq!(a, b2);
        rc.seed = 43;
        assert_ne!(a, make_initial(&rc, &g, &params(2)).unwrap());
    }

    #[test]
    fn support_never_shrinks() {
        let f = bump(2, 300);
        let c = cfg(2.0, (1..=20).map(|i| 0.1 * i as f64).collect());
        let traj = run(&f, &params(2), &c, &mut []).unwrap();
        let support = |v: &VectorField| -> Vec<bool> {
            (0..v.grid().len())
                .map(|i| v.components().iter().any(|c| c[i] > SUPPORT_THRESHOLD))
                .collect()
        };
        let mut prev = support(&traj.initial);
        for s in &traj.snapshots {
            let cur = support(s);
            assert!(prev.iter().zip(&cur).all(|(a, b)| !a || *b));
            prev = cur;
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let f = bump(2, 200);
        let c = cfg(1.0, vec![0.5, 1.0]);
        let a = run(&f, &params(2), &c, &mut []).unwrap();
        let b = run(&f, &params(2), &c, &mut []).unwrap();
        assert_eq!(a, b);
    }
}
