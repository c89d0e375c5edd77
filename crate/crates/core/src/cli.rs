//! The `plapsys` command line front end.
//!
//! Each subcommand is backed by a library function returning [`Outputs`]:
//! named CSV files plus the diagnostics reports whose verdicts decide the
//! exit status. The same functions drive the acceptance tests.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::barenblatt::{pde_residual, sphere_area, BarenblattProfile};
use crate::config::{parse_config, RunConfig};
use crate::diagnostics::{
    entropy_decay_diagnostics, entropy_ordering_report, gradient_bound_report, harnack_report, l1_convergence_report,
    mass_conservation_report, num, proportionality_report, DiagnosticsReport, HarnackReport, L1ConvergenceOptions,
    Table, GRADIENT_SLACK, MASS_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::field::{Grid, SystemParams, VectorField};
use crate::operators::{l1_distance, l1_mass};
use crate::quad::integrate;
use crate::selfsim::{entropy_decay_report, entropy_record, proportionality_csv, DEFAULT_DECAY_SLACK};
use crate::snapshot::snapshot_to_string;
use crate::solver::{make_initial, run, PresetKind, Trajectory};

pub const PROPORTIONALITY_SLACK: f64 = 0.05;
pub const PROPORTIONALITY_LIMIT: f64 = 0.05;
pub const DEFAULT_LADDER: [f64; 4] = [1e-2, 1e-3, 1e-4, 0.0];
pub const LADDER_FRACTION: f64 = 0.01;
pub const MIN_REFINEMENT_RATIO: f64 = 1.7;

/// Files and verdicts produced by one subcommand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
    pub reports: Vec<DiagnosticsReport>,
    pub notes: Vec<String>,
}

impl Outputs {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(DiagnosticsReport::passed)
    }

    pub fn report(&self, name: &str) -> Option<&DiagnosticsReport> {
        self.reports.iter().find(|r| r.name == name)
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// `name,verdict,worst_value,tolerance` for every report.
    pub fn verdicts_csv(&self) -> String {
        let mut out = String::from("name,verdict,worst_value,tolerance\n");
        for r in &self.reports {
            out.push_str(&r.verdict_line());
            out.push('\n');
        }
        out
    }

    fn add_report(&mut self, rep: DiagnosticsReport) {
        self.files.push((format!("{}.csv", rep.name), rep.to_csv()));
        self.reports.push(rep);
    }

    /// Every file, each report's file and `verdicts.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, content)?;
        }
        fs::write(dir.join("verdicts.csv"), self.verdicts_csv())?;
        Ok(())
    }
}

fn setup(cfg: &RunConfig) -> Result<(SystemParams, Grid, VectorField)> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let init = make_initial(&cfg.initial_preset(), &grid, &params)?;
    Ok((params, grid, init))
}

fn dimension_notes(params: &SystemParams, out: &mut Outputs) {
    if let Some(n) = params.dimension_note() {
        out.notes.push(n.to_string());
    }
}

/// `Ĥ >= H >= -tol` over every snapshot of a trajectory.
pub fn entropy_ordering_for(traj: &Trajectory, params: &SystemParams, name: &str) -> Result<DiagnosticsReport> {
    let mass = l1_mass(&traj.initial).total_norm();
    let profile = BarenblattProfile::for_params(mass, params)?;
    let records = traj
        .snapshots
        .iter()
        .filter(|s| s.time() > 0.0)
        .map(|s| entropy_record(s, params, &profile))
        .collect::<Result<Vec<_>>>()?;
    let mut rep = entropy_ordering_report(&records);
    rep.name = name.to_string();
    Ok(rep)
}

/// The gradient window starts at `a2` when the run reaches it, else at the
/// first snapshot.
fn gradient_window(traj: &Trajectory, params: &SystemParams) -> f64 {
    let (_, a2) = params.exponents();
    if traj.final_field().time() >= a2 {
        a2
    } else {
        traj.snapshots.first().map_or(traj.initial.time(), |s| s.time())
    }
}

/// Run a configuration and emit the run log, snapshots and the mass and
/// gradient reports.
pub fn simulate(cfg: &RunConfig) -> Result<(Trajectory, Outputs)> {
    let (params, _, init) = setup(cfg)?;
    let traj = run(&init, &params, &cfg.solver_config()?, &mut [])?;
    let mut out = Outputs::default();
    dimension_notes(&params, &mut out);
    out.files.push(("run_log.csv".into(), traj.log.to_csv()));
    for (i, s) in traj.snapshots.iter().enumerate() {
        out.files
            .push((format!("snapshots/snapshot_{:04}.txt", i + 1), snapshot_to_string(s)));
    }
    out.add_report(mass_conservation_report(&traj.log, MASS_TOLERANCE)?);
    out.add_report(entropy_ordering_for(&traj, &params, "entropy_ordering")?);
    let t_min = gradient_window(&traj, &params);
    match gradient_bound_report(&traj, t_min, &params, GRADIENT_SLACK) {
        Ok(r) => out.add_report(r),
        Err(Error::InsufficientSnapshots(m)) => out.notes.push(format!("gradient bound skipped: {m}")),
        Err(e) => return Err(e),
    }
    Ok((traj, out))
}

/// Run a configuration and emit the entropy, proportionality, L¹
/// convergence, gradient and mass diagnostics.
pub fn entropy_study(cfg: &RunConfig) -> Result<(Trajectory, Outputs)> {
    let (params, _, init) = setup(cfg)?;
    let traj = run(&init, &params, &cfg.solver_config()?, &mut [])?;
    let mut out = Outputs::default();
    dimension_notes(&params, &mut out);
    out.files.push(("run_log.csv".into(), traj.log.to_csv()));
    let decay = entropy_decay_report(&traj, &params, DEFAULT_DECAY_SLACK)?;
    out.files.push(("entropy.csv".into(), decay.to_csv()));
    out.files
        .push(("proportionality.csv".into(), proportionality_csv(&traj, &params)?));
    out.add_report(mass_conservation_report(&traj.log, MASS_TOLERANCE)?);
    out.add_report(entropy_decay_diagnostics(&decay));
    out.add_report(entropy_ordering_report(&decay.records));
    if params.k > 1 {
        out.add_report(proportionality_report(
            &traj,
            &params,
            PROPORTIONALITY_SLACK,
            PROPORTIONALITY_LIMIT,
        )?);
    }
    match l1_convergence_report(&traj, &params, L1ConvergenceOptions::default()) {
        Ok(r) => out.add_report(r),
        Err(Error::InsufficientSnapshots(m)) => out.notes.push(format!("L1 convergence skipped: {m}")),
        Err(e) => return Err(e),
    }
    let t_min = gradient_window(&traj, &params);
    out.add_report(gradient_bound_report(&traj, t_min, &params, GRADIENT_SLACK)?);
    Ok((traj, out))
}

/// Radii with `R <= T^{1/p}` are dropped with a note.
pub fn harnack_study(cfg: &RunConfig, radii: &[f64], t: f64) -> Result<(HarnackReport, Outputs)> {
    let mut cfg = cfg.clone();
    cfg.t_end = t;
    cfg.snapshots = crate::config::SnapshotSchedule::List(vec![t]);
    let (params, _, init) = setup(&cfg)?;
    let mut out = Outputs::default();
    dimension_notes(&params, &mut out);
    let bound = t.powf(1.0 / params.p);
    let mut kept = Vec::new();
    for &r in radii {
        if r <= bound {
            out.notes
                .push(format!("R = {r} skipped: not above T^(1/p) = {bound}"));
        } else {
            kept.push(r);
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidParameter(format!("no radius above T^(1/p) = {bound}")));
    }
    let traj = run(&init, &params, &cfg.solver_config()?, &mut [])?;
    let h = harnack_report(&traj, &kept, t, &params)?;
    out.add_report(mass_conservation_report(&traj.log, MASS_TOLERANCE)?);
    out.add_report(entropy_ordering_for(&traj, &params, "entropy_ordering")?);
    let diag = h.to_diagnostics();
    out.notes.extend(diag.notes.iter().cloned());
    out.add_report(diag);
    Ok((h, out))
}

/// Cell averages over `2^n`-cell blocks of a field on the refined grid.
pub fn restrict(fine: &[f64], fine_grid: &Grid) -> Vec<f64> {
    let [f0, f1] = fine_grid.shape();
    if fine_grid.n() == 1 {
        (0..f0 / 2).map(|i| 0.5 * (fine[2 * i] + fine[2 * i + 1])).collect()
    } else {
        let (c0, c1) = (f0 / 2, f1 / 2);
        let mut out = Vec::with_capacity(c0 * c1);
        for i in 0..c0 {
            for j in 0..c1 {
                let s = fine[fine_grid.index(2 * i, 2 * j)]
                    + fine[fine_grid.index(2 * i + 1, 2 * j)]
                    + fine[fine_grid.index(2 * i, 2 * j + 1)]
                    + fine[fine_grid.index(2 * i + 1, 2 * j + 1)];
                out.push(0.25 * s);
            }
        }
        out
    }
}

/// Final-time errors at `cells`, `2 cells`, ... and the successive ratios.
///
/// Barenblatt-weighted data is compared with the closed form; other presets
/// with the next finer level restricted to the coarser grid.
pub fn convergence_study(cfg: &RunConfig, levels: usize) -> Result<Outputs> {
    if levels < 2 {
        return Err(Error::InvalidParameter("a convergence study needs at least 2 levels".into()));
    }
    let exact = cfg.preset == PresetKind::BarenblattWeighted;
    let mut finals = Vec::new();
    let mut drifts = Vec::new();
    let mut orderings = Vec::new();
    let mut out = Outputs::default();
    for lvl in 0..levels {
        let mut c = cfg.clone();
        c.cells = cfg.cells.iter().map(|n| n << lvl).collect();
        c.snapshots = crate::config::SnapshotSchedule::List(vec![cfg.t_end]);
        let (params, _, init) = setup(&c)?;
        if lvl == 0 {
            dimension_notes(&params, &mut out);
        }
        let traj = run(&init, &params, &c.solver_config()?, &mut [])?;
        let mut m = mass_conservation_report(&traj.log, MASS_TOLERANCE)?;
        m.name = format!("mass_conservation_level_{lvl}");
        drifts.push(m);
        orderings.push(entropy_ordering_for(&traj, &params, &format!("entropy_ordering_level_{lvl}"))?);
        finals.push((params, traj.final_field().clone()));
    }
    let errors: Vec<f64> = if exact {
        let weights = &cfg.weights;
        let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        let mass = cfg.mass.unwrap_or(norm);
        finals
            .iter()
            .map(|(params, f)| {
                let b = BarenblattProfile::for_params(mass, params)?;
                let exact = b.sample(f.grid(), f.time())?;
                Ok(f.components()
                    .iter()
                    .zip(weights)
                    .map(|(u, w)| {
                        let target: Vec<f64> = exact.iter().map(|v| w / norm * v).collect();
                        l1_distance(f.grid(), u, &target)
                    })
                    .sum())
            })
            .collect::<Result<_>>()?
    } else {
        finals
            .windows(2)
            .map(|w| {
                let (coarse, fine) = (&w[0].1, &w[1].1);
                coarse
                    .components()
                    .iter()
                    .zip(fine.components())
                    .map(|(c, f)| l1_distance(coarse.grid(), c, &restrict(f, fine.grid())))
                    .sum()
            })
            .collect()
    };
    let mut rep = DiagnosticsReport::new(
        "convergence",
        Table::new(&["level", "cells", "h", "error", "ratio", "order", "mass_drift"]),
    );
    rep.input("reference", if exact { "closed-form" } else { "next-finer" });
    for (i, e) in errors.iter().enumerate() {
        let grid = finals[i].1.grid();
        let ratio = if i > 0 { errors[i - 1] / e } else { f64::NAN };
        rep.table.push(vec![
            i.to_string(),
            grid.cells().iter().map(|c| c.to_string()).collect::<Vec<_>>().join("x"),
            num(grid.min_spacing()),
            num(*e),
            num(ratio),
            num(ratio.log2()),
            num(drifts[i].measured_value("max_drift").unwrap_or(0.0)),
        ]);
        rep.measure(format!("error_{i}"), *e);
        if i > 0 {
            rep.measure(format!("ratio_{i}"), ratio);
            rep.check_at_least(format!("ratio_{i}"), ratio, MIN_REFINEMENT_RATIO);
        }
    }
    if errors.len() < 2 {
        out.notes
            .push("self-convergence needs 3 levels for an observed order".into());
    }
    for r in drifts.into_iter().chain(orderings) {
        out.add_report(r);
    }
    out.add_report(rep);
    Ok(out)
}

/// Final-time L¹ distances between runs at successive regularisations.
/// Passes when the distances decrease and the last one is at most
/// `LADDER_FRACTION` of the total mass.
pub fn epsilon_ladder(cfg: &RunConfig, ladder: &[f64]) -> Result<Outputs> {
    if ladder.len() < 2 {
        return Err(Error::InvalidParameter("the ladder needs at least two values".into()));
    }
    let mut finals = Vec::new();
    let mut out = Outputs::default();
    for (i, &eps) in ladder.iter().enumerate() {
        let mut c = cfg.clone();
        c.epsilon = eps;
        c.snapshots = crate::config::SnapshotSchedule::List(vec![cfg.t_end]);
        let (params, _, init) = setup(&c)?;
        if i == 0 {
            dimension_notes(&params, &mut out);
        }
        let traj = run(&init, &params, &c.solver_config()?, &mut [])?;
        let mut m = mass_conservation_report(&traj.log, MASS_TOLERANCE)?;
        m.name = format!("mass_conservation_eps_{i}");
        out.add_report(m);
        out.add_report(entropy_ordering_for(&traj, &params, &format!("entropy_ordering_eps_{i}"))?);
        finals.push(traj.final_field().clone());
    }
    let total: f64 = l1_mass(&finals[0]).masses().iter().sum();
    let mut rep = DiagnosticsReport::new("epsilon_ladder", Table::new(&["eps_a", "eps_b", "l1_distance"]));
    rep.input("total_mass", total);
    let mut dists = Vec::new();
    for (i, w) in finals.windows(2).enumerate() {
        let d: f64 = w[0]
            .components()
            .iter()
            .zip(w[1].components())
            .map(|(a, b)| l1_distance(w[0].grid(), a, b))
            .sum();
        rep.table
            .push(vec![num(ladder[i]), num(ladder[i + 1]), num(d)]);
        rep.measure(format!("distance_{i}"), d);
        dists.push(d);
    }
    let increases = dists.windows(2).filter(|w| w[1] >= w[0]).count();
    rep.check("nondecreasing_steps", increases as f64, 0.0);
    let last = *dists.last().expect("two values");
    rep.check("final_relative", last / total, LADDER_FRACTION);
    out.add_report(rep);
    Ok(out)
}

/// `∫ B_M(x, 1) dx` by radial quadrature of the physical profile.
fn physical_mass(b: &BarenblattProfile) -> Result<f64> {
    let r = b.support_radius(1.0);
    let nm1 = (b.n - 1) as i32;
    let scale = b.evaluate_radius(0.0, 1.0)? * r.powi(b.n as i32);
    let v = integrate(
        |x| x.powi(nm1) * b.evaluate_radius(x, 1.0).unwrap_or(0.0),
        0.0,
        r,
        1e-14 * scale,
    )?;
    Ok(sphere_area(b.n) * v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarenblattCase {
    pub p: f64,
    pub n: usize,
    pub mass: f64,
}

/// Normalisation and residual refinement of Barenblatt profiles. The
/// residual is measured at time `t` on `cells` and `2 cells`.
pub fn verify_barenblatt(cases: &[BarenblattCase], cells: usize, half_extent: f64, t: f64) -> Result<Outputs> {
    let mut rep = DiagnosticsReport::new(
        "verify_barenblatt",
        Table::new(&["p", "n", "M", "C_M", "mass_error", "residual_h", "residual_h2", "ratio"]),
    );
    for c in cases {
        let b = BarenblattProfile::new(c.mass, c.p, c.n)?;
        let mass_error = (physical_mass(&b)? - c.mass).abs() / c.mass;
        let coarse = Grid::new(c.n, &[cells], half_extent)?;
        let fine = Grid::new(c.n, &[2 * cells], half_extent)?;
        let rh = pde_residual(&b, &coarse, t)?;
        let rh2 = pde_residual(&b, &fine, t)?;
        let ratio = rh / rh2;
        rep.table.push(vec![
            c.p.to_string(),
            c.n.to_string(),
            c.mass.to_string(),
            num(b.c_m),
            num(mass_error),
            num(rh),
            num(rh2),
            num(ratio),
        ]);
        let tag = format!("p{}_n{}_M{}", c.p, c.n, c.mass);
        rep.check(format!("mass_error_{tag}"), mass_error, 1e-8);
        rep.check_at_least(format!("residual_ratio_{tag}"), ratio, 1.5);
    }
    let mut out = Outputs::default();
    out.add_report(rep);
    Ok(out)
}

#[derive(Debug, Parser)]
#[command(name = "plapsys", version, about = "Simulator and diagnostics for the p-Laplacian system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat `key = value` run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run and emit the run log, snapshots and mass/gradient reports.
    Simulate(RunArgs),
    /// Check profile normalisation and the residual under refinement.
    VerifyBarenblatt {
        #[arg(long, value_delimiter = ',', default_value = "3")]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        mass: Vec<f64>,
        #[arg(long, default_value_t = 400)]
        cells: usize,
        #[arg(long = "L", default_value_t = 4.0)]
        half_extent: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run and emit entropy, proportionality and convergence diagnostics.
    Entropy(RunArgs),
    /// Empirical Harnack constants over a radius sweep.
    Harnack {
        #[command(flatten)]
        run: RunArgs,
        /// `lin:start:end:count` or a comma-separated list.
        #[arg(long)]
        radii: String,
        #[arg(long = "T", default_value_t = 1.0)]
        t: f64,
    },
    /// Repeat a run at h, h/2, ... and report observed orders.
    ConvergenceStudy {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Runs at decreasing regularisation and their pairwise distances.
    EpsilonLadder {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
    },
}

/// `lin:a:b:count` or `r1,r2,...`.
pub fn parse_radii(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: String| Error::InvalidParameter(format!("radii: {m}"));
    if let Some(rest) = spec.strip_prefix("lin:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected lin:start:end:count".into()));
        }
        let a: f64 = parts[0].parse().map_err(|_| bad(parts[0].into()))?;
        let b: f64 = parts[1].parse().map_err(|_| bad(parts[1].into()))?;
        let n: usize = parts[2].parse().map_err(|_| bad(parts[2].into()))?;
        if n < 2 || !(b > a) {
            return Err(bad("need start < end and count >= 2".into()));
        }
        Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
    } else {
        spec.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad(s.into())))
            .collect()
    }
}

fn load(args: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let text = fs::read_to_string(&args.config)?;
    let cfg = parse_config(&text)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("plapsys-out"));
    Ok((cfg, out))
}

/// `PLAPSYS_THREADS` caps the data-parallel width; 0 or unset means auto.
fn configure_threads() {
    if let Some(n) = std::env::var("PLAPSYS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // the global pool can only be set once per process
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn execute(cli: Cli) -> Result<(Outputs, Option<PathBuf>)> {
    configure_threads();
    Ok(match cli.command {
        Command::Simulate(a) => {
            let (cfg, out) = load(&a)?;
            (simulate(&cfg)?.1, Some(out))
        }
        Command::Entropy(a) => {
            let (cfg, out) = load(&a)?;
            (entropy_study(&cfg)?.1, Some(out))
        }
        Command::Harnack { run, radii, t } => {
            let (cfg, out) = load(&run)?;
            (harnack_study(&cfg, &parse_radii(&radii)?, t)?.1, Some(out))
        }
        Command::ConvergenceStudy { run, levels } => {
            let (cfg, out) = load(&run)?;
            (convergence_study(&cfg, levels)?, Some(out))
        }
        Command::EpsilonLadder { run, ladder } => {
            let (cfg, out) = load(&run)?;
            let ladder = ladder.unwrap_or_else(|| DEFAULT_LADDER.to_vec());
            (epsilon_ladder(&cfg, &ladder)?, Some(out))
        }
        Command::VerifyBarenblatt {
            p,
            n,
            mass,
            cells,
            half_extent,
            t,
            out,
        } => {
            let mut cases = Vec::new();
            for &p in &p {
                for &n in &n {
                    for &m in &mass {
                        cases.push(BarenblattCase { p, n, mass: m });
                    }
                }
            }
            let outputs = verify_barenblatt(&cases, cells, half_extent, t)?;
            if out.is_none() {
                print!("{}", outputs.reports[0].table.to_csv());
            }
            (outputs, out)
        }
    })
}

/// Parse arguments, run, write outputs and return the exit status:
/// 0 when every verdict passes, 1 on any FAIL, 2 on errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok((outputs, dir)) => {
            for n in &outputs.notes {
                eprintln!("note: {n}");
            }
            if let Some(dir) = dir {
                if let Err(e) = outputs.write(&dir) {
                    eprintln!("error: {e}");
                    return 2;
                }
            }
            print!("{}", outputs.verdicts_csv());
            if outputs.passed() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(extra: &str) -> RunConfig {
        parse_config(&format!(
            "p = 3\nn = 1\nk = 2\ncells = 100\nL = 4\nt_end = 0.5\nweights = 1, 2\nwidth = 0.8\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn radii_specs() {
        assert_eq!(parse_radii("lin:2:5:4").unwrap(), vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(parse_radii("2, 3.5").unwrap(), vec![2.0, 3.5]);
        assert!(parse_radii("lin:5:2:4").is_err());
        assert!(parse_radii("two").is_err());
    }

    #[test]
    fn restriction_averages_blocks() {
        let g = Grid::new(1, &[4], 1.0).unwrap();
        assert_eq!(restrict(&[1.0, 3.0, 5.0, 7.0], &g), vec![2.0, 6.0]);
        let g2 = Grid::new(2, &[2, 2], 1.0).unwrap();
        assert_eq!(restrict(&[1.0, 2.0, 3.0, 4.0], &g2), vec![2.5]);
    }

    #[test]
    fn simulate_emits_log_snapshots_and_reports() {
        let cfg = small("snapshots = 0.1, 0.5\n");
        let (traj, out) = simulate(&cfg).unwrap();
        assert_eq!(traj.snapshots.len(), 2);
        assert!(out.file("run_log.csv").unwrap().starts_with("step,t,dt,M_1,M_2,sup_grad,clipped_mass\n"));
        assert!(out.file("snapshots/snapshot_0002.txt").is_some());
        assert!(out.report("mass_conservation").unwrap().passed());
        assert!(out.passed());
        assert!(out.verdicts_csv().lines().count() >= 3);
    }

    #[test]
    fn harnack_skips_small_radii() {
        let cfg = small("");
        let (h, out) = harnack_study(&cfg, &[0.5, 2.0, 3.0], 0.5).unwrap();
        assert_eq!(h.r_values, vec![2.0, 3.0]);
        assert!(out.notes.iter().any(|n| n.contains("R = 0.5 skipped")));
        assert!(harnack_study(&cfg, &[0.5], 0.5).is_err());
    }

    #[test]
    fn ladder_and_convergence_tables() {
        let cfg = small("");
        let out = epsilon_ladder(&cfg, &DEFAULT_LADDER).unwrap();
        let rep = out.report("epsilon_ladder").unwrap();
        assert_eq!(rep.table.rows.len(), 3);
        let out = convergence_study(&cfg, 2).unwrap();
        assert_eq!(out.report("convergence").unwrap().table.rows.len(), 1);
    }

    #[test]
    fn verify_barenblatt_passes_for_default_case() {
        let out = verify_barenblatt(&[BarenblattCase { p: 3.0, n: 1, mass: 1.0 }], 400, 4.0, 1.0).unwrap();
        let rep = &out.reports[0];
        assert!(rep.passed(), "{}", rep.checks_csv());
        assert!(rep.table.to_csv().starts_with("p,n,M,C_M,mass_error,residual_h,residual_h2,ratio\n"));
    }

    #[test]
    fn exit_status_reflects_errors() {
        assert_eq!(main_with_args(["plapsys", "simulate", "--config", "/nonexistent/cfg"]), 2);
        assert_eq!(main_with_args(["plapsys", "no-such-command"]), 2);
    }
}
