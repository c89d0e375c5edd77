//! Verdicts on trajectories: mass conservation, the gradient envelope, L¹
//! convergence to the Barenblatt profile, L² contraction, the Harnack bracket
//! and the weak initial trace.
//!
//! Every report carries its measured values and a list of `value <= limit`
//! checks; the verdict is recomputed from those checks on demand.

use std::fmt::Write as _;

use crate::barenblatt::BarenblattProfile;
use crate::error::{Error, Result};
use crate::field::{Grid, SystemParams, VectorField};
use crate::operators::{l1_distance, l1_mass, system_gradient_norm};
use crate::selfsim::{component_proportionality, to_self_similar, EntropyDecayReport, EntropyRecord};
use crate::solver::{RunLog, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `value <= limit`, or `value >= limit` for a lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub limit: f64,
    pub lower_bound: bool,
}

impl Check {
    pub fn new(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            label: label.into(),
            value,
            limit,
            lower_bound: false,
        }
    }

    pub fn at_least(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            lower_bound: true,
            ..Self::new(label, value, limit)
        }
    }

    pub fn passed(&self) -> bool {
        if self.lower_bound {
            self.value >= self.limit
        } else {
            self.value <= self.limit
        }
    }

    /// How close the check is to failing; above 1 means failed.
    fn severity(&self) -> f64 {
        let (num, den) = if self.lower_bound {
            (self.limit, self.value)
        } else {
            (self.value, self.limit)
        };
        if num.is_nan() || den.is_nan() {
            f64::INFINITY
        } else if den > 0.0 {
            num / den
        } else if self.passed() {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Tabular body of a report: a header and preformatted rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub name: String,
    pub inputs: Vec<(String, String)>,
    pub measured: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub table: Table,
}

impl DiagnosticsReport {
    pub fn new(name: &str, table: Table) -> Self {
        Self {
            name: name.to_string(),
            inputs: Vec::new(),
            measured: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            table,
        }
    }

    pub fn input(&mut self, key: &str, value: impl ToString) {
        self.inputs.push((key.to_string(), value.to_string()));
    }

    pub fn measure(&mut self, key: impl Into<String>, value: f64) {
        self.measured.push((key.into(), value));
    }

    pub fn check(&mut self, label: impl Into<String>, value: f64, limit: f64) {
        self.checks.push(Check::new(label, value, limit));
    }

    pub fn check_at_least(&mut self, label: impl Into<String>, value: f64, limit: f64) {
        self.checks.push(Check::at_least(label, value, limit));
    }

    pub fn verdict(&self) -> Verdict {
        if self.checks.iter().all(Check::passed) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict() == Verdict::Pass
    }

    /// The check closest to (or furthest past) its limit.
    pub fn worst(&self) -> Option<&Check> {
        self.checks
            .iter()
            .max_by(|a, b| a.severity().total_cmp(&b.severity()))
    }

    pub fn measured_value(&self, key: &str) -> Option<f64> {
        self.measured.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }

    /// `name,verdict,worst_value,tolerance`
    pub fn verdict_line(&self) -> String {
        let (v, l) = self.worst().map_or((0.0, 0.0), |c| (c.value, c.limit));
        format!("{},{},{},{}", self.name, self.verdict(), num(v), num(l))
    }

    /// `check,value,limit,verdict` rows.
    pub fn checks_csv(&self) -> String {
        let mut out = String::from("check,value,limit,verdict\n");
        for c in &self.checks {
            let v = if c.passed() { Verdict::Pass } else { Verdict::Fail };
            let op = if c.lower_bound { ">=" } else { "<=" };
            let _ = writeln!(out, "{},{},{}{},{}", c.label, num(c.value), op, num(c.limit), v);
        }
        out
    }

    /// The table followed by a blank line and the verdict record.
    pub fn to_csv(&self) -> String {
        let mut out = self.table.to_csv();
        out.push('\n');
        out.push_str("name,verdict,worst_value,tolerance\n");
        out.push_str(&self.verdict_line());
        out.push('\n');
        out
    }
}

/// Relative per-component mass drift and clipped mass, each `<= tol`.
pub fn mass_conservation_report(log: &RunLog, tol: f64) -> Result<DiagnosticsReport> {
    let first = log
        .entries
        .first()
        .ok_or_else(|| Error::InsufficientSnapshots("empty run log".into()))?;
    let mut rep = DiagnosticsReport::new("mass_conservation", Table::new(&["step", "t", "max_drift", "clipped"]));
    rep.input("entries", log.entries.len());
    let m0 = &first.masses;
    let total0: f64 = m0.iter().map(|m| m * m).sum::<f64>().sqrt();
    for (l, m) in m0.iter().enumerate() {
        if *m == 0.0 {
            rep.notes.push(format!("component {} has zero initial mass; skipped", l + 1));
        }
    }
    let mut worst = 0.0f64;
    let mut worst_l = vec![0.0f64; m0.len()];
    for e in &log.entries {
        let mut row_max = 0.0f64;
        for (l, (m, m_init)) in e.masses.iter().zip(m0).enumerate() {
            if *m_init == 0.0 {
                continue;
            }
            let d = (m / m_init - 1.0).abs();
            worst_l[l] = worst_l[l].max(d);
            row_max = row_max.max(d);
        }
        worst = worst.max(row_max);
        let clipped = if total0 > 0.0 { e.clipped_mass / total0 } else { 0.0 };
        rep.table
            .push(vec![e.step.to_string(), num(e.t), num(row_max), num(clipped)]);
    }
    let last = log.entries.last().expect("nonempty");
    let clipped = if total0 > 0.0 { last.clipped_mass / total0 } else { 0.0 };
    for (l, d) in worst_l.iter().enumerate() {
        rep.measure(format!("drift_{}", l + 1), *d);
    }
    rep.measure("max_drift", worst);
    rep.measure("clipped_relative", clipped);
    rep.check("max_drift", worst, tol);
    rep.check("clipped_relative", clipped, tol);
    Ok(rep)
}

pub const MASS_TOLERANCE: f64 = 1e-10;

/// The exponent `n/(n(p-2)+2p)` of the gradient bound.
pub fn gradient_exponent(params: &SystemParams) -> f64 {
    let n = params.n as f64;
    n / (n * (params.p - 2.0) + 2.0 * params.p)
}

/// `E(t) = sup Θ(t) t^{n/(n(p-2)+2p)}` must not grow past `(1+slack)` times
/// its first value for snapshots with `t >= t_min`.
pub fn gradient_bound_report(traj: &Trajectory, t_min: f64, params: &SystemParams, slack: f64) -> Result<DiagnosticsReport> {
    let beta = gradient_exponent(params);
    let window: Vec<&VectorField> = std::iter::once(&traj.initial)
        .chain(&traj.snapshots)
        .filter(|f| f.time() >= t_min && f.time() > 0.0)
        .collect();
    if window.is_empty() {
        return Err(Error::InsufficientSnapshots(format!("no snapshot at t >= {t_min}")));
    }
    let mut rep = DiagnosticsReport::new("gradient_bound", Table::new(&["t", "sup_grad", "E", "running_max"]));
    rep.input("T", t_min);
    rep.input("exponent", beta);
    rep.input("slack", slack);
    let mut running = 0.0f64;
    let mut e_first = f64::NAN;
    for f in &window {
        let sup = system_gradient_norm(f).max();
        let e = sup * f.time().powf(beta);
        if e_first.is_nan() {
            e_first = e;
        }
        running = running.max(e);
        rep.table.push(vec![num(f.time()), num(sup), num(e), num(running)]);
    }
    if window.len() == 1 {
        rep.notes.push("single snapshot in window; bound holds vacuously".into());
    }
    rep.measure("E_first", e_first);
    rep.measure("E_max", running);
    rep.check("running_max_over_first", running, (1.0 + slack) * e_first);
    Ok(rep)
}

pub const GRADIENT_SLACK: f64 = 0.2;

/// `d(t) = ‖|u| - B_|M|(t)‖₁` and `d_l(t) = ‖u^l - (M_l/|M|) B_|M|(t)‖₁`.
pub fn l1_distances(field: &VectorField, profile: &BarenblattProfile, masses: &[f64]) -> Result<(f64, Vec<f64>)> {
    let grid = field.grid();
    let b = profile.sample(grid, field.time())?;
    let d = l1_distance(grid, &field.magnitude(), &b);
    let total = profile.mass;
    let per = field
        .components()
        .iter()
        .zip(masses)
        .map(|(c, m)| {
            let w = m / total;
            let target: Vec<f64> = b.iter().map(|v| w * v).collect();
            l1_distance(grid, c, &target)
        })
        .collect();
    Ok((d, per))
}

/// Allowance for `d`: the discrete mass defects of the sampled profile and of
/// `|u|`. Profiles are pointwise ordered in the mass, so for a sampled
/// profile of another mass `d` equals the mass difference and lies within it.
fn sampling_tolerance(field: &VectorField, profile: &BarenblattProfile) -> Result<f64> {
    let grid = field.grid();
    let dv = grid.cell_volume();
    let sampled: f64 = dv * profile.sample(grid, field.time())?.iter().sum::<f64>();
    let magnitude: f64 = dv * field.magnitude().iter().sum::<f64>();
    Ok((sampled - profile.mass).abs() + (magnitude - profile.mass).abs() + 1e-12 * profile.mass)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1ConvergenceOptions {
    /// Required fraction of the rate `a2/2`.
    pub rate_fraction: f64,
    /// Per-component `d_l(last)/d_l(first)` bound.
    pub component_reduction: f64,
}

impl Default for L1ConvergenceOptions {
    fn default() -> Self {
        Self {
            rate_fraction: 0.6,
            component_reduction: 0.1,
        }
    }
}

/// L¹ convergence to `B_|M|` over snapshots with `t >= a2`, with a log-log
/// rate fit.
pub fn l1_convergence_report(traj: &Trajectory, params: &SystemParams, opts: L1ConvergenceOptions) -> Result<DiagnosticsReport> {
    let (_, a2) = params.exponents();
    let mv = l1_mass(&traj.initial);
    if mv.total_norm() == 0.0 {
        return Err(Error::ZeroMass);
    }
    let profile = BarenblattProfile::for_params(mv.total_norm(), params)?;
    let window: Vec<&VectorField> = traj
        .snapshots
        .iter()
        .filter(|f| f.time() >= a2 * (1.0 - 1e-12))
        .collect();
    if window.len() < 4 {
        return Err(Error::InsufficientSnapshots(format!(
            "{} snapshots at t >= a2, need 4",
            window.len()
        )));
    }
    let (t0, t1) = (window[0].time(), window[window.len() - 1].time());
    if t1 < 10.0 * t0 * (1.0 - 1e-12) {
        return Err(Error::InsufficientSnapshots(format!(
            "window [{t0}, {t1}] spans less than a decade"
        )));
    }
    let mut columns = vec!["t".to_string(), "d".to_string()];
    columns.extend((1..=params.k).map(|l| format!("d_{l}")));
    columns.push("tolerance".into());
    let mut rep = DiagnosticsReport::new(
        "l1_convergence",
        Table {
            columns,
            rows: Vec::new(),
        },
    );
    rep.input("a2", a2);
    rep.input("mass", mv.total_norm());
    let mut ds = Vec::new();
    let mut dls: Vec<Vec<f64>> = Vec::new();
    let mut tols = Vec::new();
    for f in &window {
        let (d, per) = l1_distances(f, &profile, mv.masses())?;
        let tol = sampling_tolerance(f, &profile)?;
        let mut row = vec![num(f.time()), num(d)];
        row.extend(per.iter().map(|v| num(*v)));
        row.push(num(tol));
        rep.table.push(row);
        ds.push(d);
        dls.push(per);
        tols.push(tol);
    }
    for l in 0..params.k {
        rep.measure(format!("d_{}_first", l + 1), dls[0][l]);
        rep.measure(format!("d_{}_last", l + 1), dls[dls.len() - 1][l]);
    }
    rep.measure("d_first", ds[0]);
    rep.measure("d_last", ds[ds.len() - 1]);

    if ds.iter().zip(&tols).all(|(d, t)| d <= t) {
        rep.notes
            .push("distance within sampling tolerance at every snapshot; rate fit skipped".into());
        let worst = ds
            .iter()
            .zip(&tols)
            .map(|(d, t)| d / t)
            .fold(0.0f64, f64::max);
        rep.check("d_over_tolerance", worst, 1.0);
        return Ok(rep);
    }

    let increases = ds.windows(2).filter(|w| w[1] >= w[0]).count();
    rep.check("d_increases", increases as f64, 0.0);
    let xs: Vec<f64> = window.iter().map(|f| f.time().ln()).collect();
    let ys: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    let slope = fit_slope(&xs, &ys);
    rep.measure("slope", slope);
    rep.check("slope", slope, -opts.rate_fraction * a2 / 2.0);
    for (l, &m) in mv.masses().iter().enumerate() {
        if m == 0.0 {
            rep.notes.push(format!("component {} has zero mass; skipped", l + 1));
            continue;
        }
        let ratio = dls[dls.len() - 1][l] / dls[0][l];
        rep.measure(format!("d_{}_reduction", l + 1), ratio);
        rep.check(format!("d_{}_reduction", l + 1), ratio, opts.component_reduction);
    }
    Ok(rep)
}

/// `D = Σ_l h^n Σ (u₁^l - u₂^l)²`.
pub fn l2_distance_sq(a: &VectorField, b: &VectorField) -> f64 {
    let dv = a.grid().cell_volume();
    a.components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum::<f64>())
        .sum::<f64>()
        * dv
}

/// `max_t D(t) <= D(0) (1 + rel_tol)`.
pub fn l2_contraction_report(a: &Trajectory, b: &Trajectory, rel_tol: f64) -> Result<DiagnosticsReport> {
    let fa: Vec<&VectorField> = std::iter::once(&a.initial).chain(&a.snapshots).collect();
    let fb: Vec<&VectorField> = std::iter::once(&b.initial).chain(&b.snapshots).collect();
    if fa.len() != fb.len() {
        return Err(Error::MismatchedTrajectories(format!(
            "{} vs {} snapshots",
            fa.len(),
            fb.len()
        )));
    }
    for (x, y) in fa.iter().zip(&fb) {
        if x.grid() != y.grid() || x.k() != y.k() || x.time() != y.time() {
            return Err(Error::MismatchedTrajectories(format!(
                "snapshot at t = {} does not match t = {}",
                x.time(),
                y.time()
            )));
        }
    }
    let mut rep = DiagnosticsReport::new("l2_contraction", Table::new(&["t", "D"]));
    rep.input("snapshots", fa.len());
    let mut dmax = 0.0f64;
    let mut d0 = 0.0;
    for (i, (x, y)) in fa.iter().zip(&fb).enumerate() {
        let d = l2_distance_sq(x, y);
        if i == 0 {
            d0 = d;
        }
        dmax = dmax.max(d);
        rep.table.push(vec![num(x.time()), num(d)]);
    }
    rep.measure("D0", d0);
    rep.measure("D_max", dmax);
    rep.check("D_max", dmax, d0 * (1.0 + rel_tol));
    Ok(rep)
}

pub const CONTRACTION_TOLERANCE: f64 = 1e-8;

/// `R^{n+p/(p-2)} / T^{1/(p-2)} + T^{n/p} v^{1+n(p-2)/p}`.
pub fn harnack_bracket(r: f64, t: f64, center_value: f64, params: &SystemParams) -> f64 {
    let (p, n) = (params.p, params.n as f64);
    r.powf(n + p / (p - 2.0)) / t.powf(1.0 / (p - 2.0)) + t.powf(n / p) * center_value.powf(1.0 + n * (p - 2.0) / p)
}

/// `h^n Σ_{|x|<R} u`.
fn ball_mass(grid: &Grid, values: &[f64], radii: &[f64], r: f64) -> f64 {
    grid.cell_volume()
        * values
            .iter()
            .zip(radii)
            .filter(|(_, &rad)| rad < r)
            .map(|(v, _)| v)
            .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnackReport {
    pub r_values: Vec<f64>,
    pub t: f64,
    /// `[component][R]`.
    pub lhs: Vec<Vec<f64>>,
    pub bracket: Vec<Vec<f64>>,
    pub center_values: Vec<f64>,
    pub mu: Vec<f64>,
    pub mu0: f64,
    /// `Ĉ(R) = LHS (μ^l)^{1+n(p-2)/p} / bracket`, `[component][R]`.
    pub constants: Vec<Vec<f64>>,
    pub skipped: Vec<usize>,
    pub cap: f64,
    pub stability: f64,
}

impl HarnackReport {
    /// Largest `Ĉ` over the sweep and the non-skipped components.
    pub fn max_constant(&self) -> f64 {
        self.active()
            .flat_map(|l| self.constants[l].iter().copied())
            .fold(0.0, f64::max)
    }

    fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.constants.len()).filter(|l| !self.skipped.contains(l))
    }

    /// max/min of the positive `Ĉ` values of component `l`.
    pub fn sweep_ratio(&self, l: usize) -> f64 {
        let pos: Vec<f64> = self.constants[l].iter().copied().filter(|c| *c > 0.0).collect();
        if pos.is_empty() {
            return 1.0;
        }
        let max = pos.iter().copied().fold(f64::MIN, f64::max);
        let min = pos.iter().copied().fold(f64::MAX, f64::min);
        max / min
    }

    pub fn to_diagnostics(&self) -> DiagnosticsReport {
        let mut rep = DiagnosticsReport::new(
            "harnack",
            Table::new(&["component", "R", "lhs", "center_value", "bracket", "mu", "C_hat"]),
        );
        rep.input("T", self.t);
        rep.input("mu0", self.mu0);
        for l in 0..self.constants.len() {
            for (i, r) in self.r_values.iter().enumerate() {
                rep.table.push(vec![
                    (l + 1).to_string(),
                    num(*r),
                    num(self.lhs[l][i]),
                    num(self.center_values[l]),
                    num(self.bracket[l][i]),
                    num(self.mu[l]),
                    num(self.constants[l][i]),
                ]);
            }
        }
        for &l in &self.skipped {
            rep.notes.push(format!("component {} has zero mass; skipped", l + 1));
        }
        let max_c = self.max_constant();
        rep.measure("C_hat_max", max_c);
        rep.check("C_hat_max", if max_c.is_finite() { max_c } else { f64::INFINITY }, self.cap);
        let ratios: Vec<(usize, f64)> = self.active().map(|l| (l, self.sweep_ratio(l))).collect();
        for (l, ratio) in ratios {
            rep.measure(format!("sweep_ratio_{}", l + 1), ratio);
            rep.check(format!("sweep_ratio_{}", l + 1), ratio, self.stability);
        }
        rep
    }
}

pub const HARNACK_CAP: f64 = 1e3;
pub const HARNACK_STABILITY: f64 = 1e2;

/// Empirical Harnack constants over a radius sweep. The trajectory must
/// contain a snapshot at `t`.
pub fn harnack_report(traj: &Trajectory, r_values: &[f64], t: f64, params: &SystemParams) -> Result<HarnackReport> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let bound = t.powf(1.0 / params.p);
    let grid = traj.initial.grid();
    let mut rs = r_values.to_vec();
    rs.sort_by(f64::total_cmp);
    for &r in &rs {
        if r <= bound {
            return Err(Error::HarnackHypothesis { radius: r, bound });
        }
        if r > grid.half_extent() {
            return Err(Error::InvalidParameter(format!(
                "radius {r} exceeds the half-extent {}",
                grid.half_extent()
            )));
        }
    }
    let at_t = traj
        .snapshot_at(t)
        .ok_or_else(|| Error::InsufficientSnapshots(format!("no snapshot at t = {t}")))?;
    let masses = l1_mass(&traj.initial);
    let max_mass = masses.max();
    if max_mass == 0.0 {
        return Err(Error::ZeroMass);
    }
    let origin = grid.nearest_cell([0.0, 0.0]);
    let radii = grid.radii();
    let expo = 1.0 + params.n as f64 * (params.p - 2.0) / params.p;
    let mu: Vec<f64> = masses.masses().iter().map(|m| m / max_mass).collect();
    let skipped: Vec<usize> = (0..mu.len()).filter(|&l| mu[l] == 0.0).collect();
    let mu0 = mu
        .iter()
        .copied()
        .filter(|m| *m > 0.0)
        .fold(1.0, f64::min);
    let mut lhs = Vec::new();
    let mut bracket = Vec::new();
    let mut constants = Vec::new();
    let mut center_values = Vec::new();
    for l in 0..params.k {
        let u0 = &traj.initial.components()[l];
        let v = at_t.components()[l][origin];
        let row_l: Vec<f64> = rs.iter().map(|&r| ball_mass(grid, u0, &radii, r)).collect();
        let row_b: Vec<f64> = rs.iter().map(|&r| harnack_bracket(r, t, v, params)).collect();
        debug_assert!(row_l.windows(2).all(|w| w[0] <= w[1]));
        debug_assert!(row_b.windows(2).all(|w| w[0] <= w[1]));
        let scale = mu[l].powf(expo);
        constants.push(row_l.iter().zip(&row_b).map(|(a, b)| a * scale / b).collect());
        lhs.push(row_l);
        bracket.push(row_b);
        center_values.push(v);
    }
    Ok(HarnackReport {
        r_values: rs,
        t,
        lhs,
        bracket,
        center_values,
        mu,
        mu0,
        constants,
        skipped,
        cap: HARNACK_CAP,
        stability: HARNACK_STABILITY,
    })
}

/// Agreement of the largest empirical constants of two Harnack reports
/// within a multiplicative `factor`.
pub fn harnack_agreement(a: &HarnackReport, b: &HarnackReport, factor: f64) -> DiagnosticsReport {
    let mut rep = DiagnosticsReport::new("harnack_agreement", Table::new(&["run", "mu0", "C_hat_max"]));
    let (ca, cb) = (a.max_constant(), b.max_constant());
    rep.table.push(vec!["1".into(), num(a.mu0), num(ca)]);
    rep.table.push(vec!["2".into(), num(b.mu0), num(cb)]);
    let ratio = if ca > 0.0 && cb > 0.0 { (ca / cb).max(cb / ca) } else { f64::INFINITY };
    rep.measure("ratio", ratio);
    rep.check("ratio", ratio, factor);
    rep
}

/// Test functions for the weak trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    Constant,
    /// `(1 - |x - c|²/r²)₊²`.
    Bump { center: [f64; 2], radius: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match *self {
            TestFunction::Constant => 1.0,
            TestFunction::Bump { center, radius } => {
                let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                (1.0 - d2 / (radius * radius)).max(0.0).powi(2)
            }
        }
    }

    fn integrate(&self, grid: &Grid, values: &[f64]) -> f64 {
        grid.cell_volume()
            * values
                .iter()
                .enumerate()
                .map(|(i, v)| v * self.eval(grid.center(i)))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakTraceOptions {
    pub t: f64,
    pub radii: Vec<f64>,
    pub slack: f64,
    pub cap: f64,
}

/// Deviations `|∫u^l(t_j)φ - ∫u^l_0 φ|` over snapshots with `t_j < T`
/// taken in decreasing `t_j`, which must not grow by more than `slack`
/// from one to the next, and the trace growth bound
/// `∫_{|x|<R} u^l(t_j) <= cap · bracket(R, T, u^l(0, T))`.
pub fn weak_trace_report(traj: &Trajectory, tests: &[TestFunction], params: &SystemParams, opts: &WeakTraceOptions) -> Result<DiagnosticsReport> {
    let mut small: Vec<&VectorField> = traj.snapshots.iter().filter(|f| f.time() < opts.t).collect();
    if small.is_empty() {
        return Err(Error::InsufficientSnapshots(format!("no snapshot before t = {}", opts.t)));
    }
    small.sort_by(|a, b| b.time().total_cmp(&a.time()));
    let at_t = traj
        .snapshot_at(opts.t)
        .ok_or_else(|| Error::InsufficientSnapshots(format!("no snapshot at t = {}", opts.t)))?;
    let grid = traj.initial.grid();
    let origin = grid.nearest_cell([0.0, 0.0]);
    let radii = grid.radii();
    let total = l1_mass(&traj.initial).total_norm();
    let abs_floor = 1e-12 * total.max(f64::MIN_POSITIVE);

    let mut rep = DiagnosticsReport::new(
        "weak_trace",
        Table::new(&["t", "component", "test", "deviation", "trace_ratio"]),
    );
    rep.input("T", opts.t);
    rep.input("slack", opts.slack);
    let mut growth_violations = 0usize;
    let mut max_ratio = 0.0f64;
    for l in 0..params.k {
        let u0 = &traj.initial.components()[l];
        let v = at_t.components()[l][origin];
        let brackets: Vec<f64> = opts.radii.iter().map(|&r| harnack_bracket(r, opts.t, v, params)).collect();
        for (ti, phi) in tests.iter().enumerate() {
            let base = phi.integrate(grid, u0);
            let mut prev: Option<f64> = None;
            for f in &small {
                let dev = (phi.integrate(grid, &f.components()[l]) - base).abs();
                if let Some(p) = prev {
                    if dev > p * (1.0 + opts.slack) + abs_floor {
                        growth_violations += 1;
                    }
                }
                prev = Some(dev);
                let ratio = if ti == 0 {
                    let vals = &f.components()[l];
                    opts.radii
                        .iter()
                        .zip(&brackets)
                        .map(|(&r, b)| ball_mass(grid, vals, &radii, r) / b)
                        .fold(0.0, f64::max)
                } else {
                    f64::NAN
                };
                if ratio.is_finite() {
                    max_ratio = max_ratio.max(ratio);
                }
                rep.table
                    .push(vec![num(f.time()), (l + 1).to_string(), ti.to_string(), num(dev), num(ratio)]);
            }
            rep.measure(format!("final_deviation_{}_{}", l + 1, ti), prev.unwrap_or(0.0));
        }
    }
    rep.measure("trace_ratio_max", max_ratio);
    rep.check("deviation_growth", growth_violations as f64, 0.0);
    rep.check("trace_ratio_max", max_ratio, opts.cap);
    Ok(rep)
}

/// Decay of `Ĥ` against the envelope and strict monotonicity.
pub fn entropy_decay_diagnostics(rep: &EntropyDecayReport) -> DiagnosticsReport {
    let mut out = DiagnosticsReport::new("entropy_decay", Table::new(&["tau", "t", "Hhat", "envelope", "ratio"]));
    out.input("slack", rep.slack);
    let Some(o) = rep.origin else {
        out.notes.push("no snapshot at t >= a2; decay not tested".into());
        return out;
    };
    out.input("tau0", rep.records[o].tau);
    let mut worst = 0.0f64;
    for (r, env) in rep.records[o..].iter().zip(&rep.envelope[o..]) {
        let ratio = (r.hhat - r.tolerance) / env;
        worst = worst.max(ratio);
        out.table.push(vec![num(r.tau), num(r.t), num(r.hhat), num(*env), num(ratio)]);
    }
    let increases = rep.records[o..].windows(2).filter(|w| w[1].hhat >= w[0].hhat).count();
    let unordered = rep.records[o..].windows(2).filter(|w| w[1].tau <= w[0].tau).count();
    out.measure("worst_envelope_ratio", worst);
    out.check("envelope_ratio", worst, 1.0 + rep.slack);
    out.check("nondecreasing_steps", increases as f64, 0.0);
    out.check("unordered_tau", unordered as f64, 0.0);
    out
}

/// `Ĥ >= H >= -tol` at every record.
pub fn entropy_ordering_report(records: &[EntropyRecord]) -> DiagnosticsReport {
    let mut out = DiagnosticsReport::new("entropy_ordering", Table::new(&["tau", "H", "Hhat", "tolerance"]));
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    for r in records {
        if r.h < -r.tolerance || r.hhat < r.h - r.tolerance {
            violations += 1;
        }
        worst = worst.max(-r.h).max(r.h - r.hhat);
        out.table.push(vec![num(r.tau), num(r.h), num(r.hhat), num(r.tolerance)]);
    }
    out.measure("worst_violation", worst);
    out.check("violations", violations as f64, 0.0);
    out
}

/// Roundoff floor under which proportionality deviations count as zero.
pub const PROPORTIONALITY_FLOOR: f64 = 1e-12;

/// Component proportionality over the snapshots: nonincreasing within
/// `slack` between consecutive snapshots and below `final_limit` at the end.
pub fn proportionality_report(traj: &Trajectory, params: &SystemParams, slack: f64, final_limit: f64) -> Result<DiagnosticsReport> {
    let masses = l1_mass(&traj.initial);
    let mut out = DiagnosticsReport::new("proportionality", Table::new(&["tau", "deviation"]));
    out.input("slack", slack);
    let mut values = Vec::new();
    for s in &traj.snapshots {
        let rs = to_self_similar(s, params)?;
        let d = component_proportionality(&rs, &masses)?;
        out.table.push(vec![num(rs.tau), num(d)]);
        values.push(d);
    }
    let last = *values
        .last()
        .ok_or_else(|| Error::InsufficientSnapshots("no snapshots".into()))?;
    let growth = values
        .windows(2)
        .filter(|w| w[1] > w[0] * (1.0 + slack) + PROPORTIONALITY_FLOOR)
        .count();
    out.measure("final", last);
    out.check("growth_steps", growth as f64, 0.0);
    out.check("final", last, final_limit);
    Ok(out)
}
