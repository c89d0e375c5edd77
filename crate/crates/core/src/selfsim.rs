//! Self-similar variables and the entropy functionals.
//!
//! A physical snapshot `u(x, t)` is mapped to `θ(η, τ) = R^n u(x, t)` with
//! `η = x / R`, `τ = log R` and `R = (t/a2)^{a2}`. In these variables the
//! Barenblatt solution is the stationary profile `B~`, and the functionals
//!
//! ```text
//! H(f)  = ∫ σ(f) - σ(B~) - σ'(B~)(f - B~) dη
//! Ĥ(f)  = ∫ σ(f) - σ(B~) + (p-1)/p |η|^{p/(p-1)} (f - B~) dη
//! σ(s)  = (p-1)² / ((2p-3)(p-2)) s^{(2p-3)/(p-1)}
//! ```
//!
//! evaluated at `f = |θ|` measure the distance to it. `Ĥ` dominates `H` when
//! `f` and `B~` carry the same mass.

use crate::barenblatt::BarenblattProfile;
use crate::error::{Error, Result};
use crate::field::{Grid, MassVector, SystemParams, VectorField};
use crate::operators::l1_mass;
use crate::solver::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct RescaledState {
    pub eta_grid: Grid,
    pub theta: Vec<Vec<f64>>,
    pub tau: f64,
    pub source_time: f64,
    /// The scale factor `R(t)`.
    pub scale: f64,
}

impl RescaledState {
    pub fn masses(&self) -> MassVector {
        let dv = self.eta_grid.cell_volume();
        MassVector::new(self.theta.iter().map(|c| dv * c.iter().sum::<f64>()).collect())
            .expect("rescaled values are nonnegative")
    }

    /// Pointwise `|θ|`.
    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.eta_grid.len())
            .map(|i| self.theta.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .collect()
    }
}

/// `R(t) = (t/a2)^{a2}`.
pub fn scale_factor(t: f64, params: &SystemParams) -> f64 {
    let (_, a2) = params.exponents();
    (t / a2).powf(a2)
}

pub fn to_self_similar(field: &VectorField, params: &SystemParams) -> Result<RescaledState> {
    let t = field.time();
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let r = scale_factor(t, params);
    let rn = r.powi(field.grid().n() as i32);
    let theta = field
        .components()
        .iter()
        .map(|c| c.iter().map(|v| rn * v).collect())
        .collect();
    Ok(RescaledState {
        eta_grid: field.grid().scaled(r)?,
        theta,
        tau: r.ln(),
        source_time: t,
        scale: r,
    })
}

fn check_s(s: f64) -> Result<()> {
    if s < 0.0 || s.is_nan() {
        Err(Error::InvalidParameter(format!("σ is defined for s >= 0, got {s}")))
    } else {
        Ok(())
    }
}

fn sigma_unchecked(s: f64, p: f64) -> f64 {
    (p - 1.0).powi(2) / ((2.0 * p - 3.0) * (p - 2.0)) * s.powf((2.0 * p - 3.0) / (p - 1.0))
}

pub fn sigma(s: f64, p: f64) -> Result<f64> {
    check_s(s)?;
    Ok(sigma_unchecked(s, p))
}

pub fn sigma_prime(s: f64, p: f64) -> Result<f64> {
    check_s(s)?;
    Ok((p - 1.0) / (p - 2.0) * s.powf((p - 2.0) / (p - 1.0)))
}

fn check_mass(rs: &RescaledState, profile: &BarenblattProfile) -> Result<()> {
    let state = rs.masses().total_norm();
    if (profile.mass - state).abs() > 1e-6 * profile.mass.max(state) {
        return Err(Error::MassMismatch {
            profile: profile.mass,
            state,
        });
    }
    Ok(())
}

pub fn entropy_h(rs: &RescaledState, profile: &BarenblattProfile) -> Result<f64> {
    check_mass(rs, profile)?;
    let p = profile.p;
    let f = rs.magnitude();
    let radii = rs.eta_grid.radii();
    let sum: f64 = f
        .iter()
        .zip(&radii)
        .map(|(&f, &r)| {
            let b = profile.rescaled(r);
            // σ'(B~) = (p-1)/(p-2) (C~ - (p-2)/p |η|^{p/(p-1)})_+, zero off the support
            let sp = (p - 1.0) / (p - 2.0) * profile.rescaled_pressure(r);
            sigma_unchecked(f, p) - sigma_unchecked(b, p) - sp * (f - b)
        })
        .sum();
    Ok(rs.eta_grid.cell_volume() * sum)
}

pub fn entropy_hhat(rs: &RescaledState, profile: &BarenblattProfile) -> Result<f64> {
    check_mass(rs, profile)?;
    let p = profile.p;
    let q = p / (p - 1.0);
    let f = rs.magnitude();
    let radii = rs.eta_grid.radii();
    let sum: f64 = f
        .iter()
        .zip(&radii)
        .map(|(&f, &r)| {
            let b = profile.rescaled(r);
            sigma_unchecked(f, p) - sigma_unchecked(b, p) + (p - 1.0) / p * r.powf(q) * (f - b)
        })
        .sum();
    Ok(rs.eta_grid.cell_volume() * sum)
}

/// Quadrature allowance for `Ĥ >= H >= 0`.
///
/// The discrete `H` is a sum of pointwise nonnegative terms. The gap `Ĥ - H`
/// is nonnegative only when `|θ|` and the sampled `B~` carry equal discrete
/// mass; the sampling defect `δ = |h^n Σ B~ - |M||` shifts it by at most
/// `(p-1)/(p-2) C~ δ`.
pub fn quadrature_tolerance(rs: &RescaledState, profile: &BarenblattProfile) -> f64 {
    let dv = rs.eta_grid.cell_volume();
    let sampled: f64 = dv * profile.sample_rescaled(&rs.eta_grid).iter().sum::<f64>();
    let defect = (sampled - rs.masses().total_norm()).abs();
    let p = profile.p;
    (p - 1.0) / (p - 2.0) * profile.c_rescaled * defect + 1e-12 * profile.mass
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyRecord {
    pub tau: f64,
    pub t: f64,
    pub h: f64,
    pub hhat: f64,
    /// Allowance from [`quadrature_tolerance`].
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyDecayReport {
    pub records: Vec<EntropyRecord>,
    /// Index of the reference record (first with `t >= a2`).
    pub origin: Option<usize>,
    /// `e^{-(τ - τ0)} Ĥ(τ0)` per record, `NaN` before the origin.
    pub envelope: Vec<f64>,
    pub slack: f64,
    pub pass: bool,
    /// `Ĥ` strictly decreasing from the origin on.
    pub strictly_decreasing: bool,
}

impl EntropyDecayReport {
    /// `tau,t,H,Hhat,envelope,pass`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,t,H,Hhat,envelope,pass\n");
        for (i, (r, env)) in self.records.iter().zip(&self.envelope).enumerate() {
            let ok = match self.origin {
                Some(o) if i >= o => r.hhat <= env * (1.0 + self.slack) + r.tolerance,
                _ => true,
            };
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{}\n",
                r.tau,
                r.t,
                r.h,
                r.hhat,
                env,
                if ok { "PASS" } else { "FAIL" }
            ));
        }
        out
    }
}

/// Decay check of `Ĥ` against `e^{-(τ-τ0)} Ĥ(τ0) (1 + slack)` for records
/// from index `origin` on. Records must be in increasing `τ`.
pub fn envelope_verdict(records: &[EntropyRecord], origin: Option<usize>, slack: f64) -> (Vec<f64>, bool, bool) {
    let Some(o) = origin else {
        return (vec![f64::NAN; records.len()], true, true);
    };
    let r0 = records[o];
    let envelope: Vec<f64> = records
        .iter()
        .enumerate()
        .map(|(i, r)| if i < o { f64::NAN } else { (-(r.tau - r0.tau)).exp() * r0.hhat })
        .collect();
    let window = &records[o..];
    let ordered = window.windows(2).all(|w| w[0].tau < w[1].tau);
    let within = window
        .iter()
        .zip(&envelope[o..])
        .all(|(r, env)| r.hhat <= env * (1.0 + slack) + r.tolerance);
    let strictly_decreasing = window.windows(2).all(|w| w[1].hhat < w[0].hhat);
    (envelope, ordered && within, strictly_decreasing)
}

pub fn entropy_record(field: &VectorField, params: &SystemParams, profile: &BarenblattProfile) -> Result<EntropyRecord> {
    let rs = to_self_similar(field, params)?;
    Ok(EntropyRecord {
        tau: rs.tau,
        t: rs.source_time,
        h: entropy_h(&rs, profile)?,
        hhat: entropy_hhat(&rs, profile)?,
        tolerance: quadrature_tolerance(&rs, profile),
    })
}

pub const DEFAULT_DECAY_SLACK: f64 = 0.15;

/// Entropy records for every snapshot, with the decay envelope applied from
/// the first snapshot at `t >= a2` (where `τ >= 0`).
pub fn entropy_decay_report(traj: &Trajectory, params: &SystemParams, slack: f64) -> Result<EntropyDecayReport> {
    let mass = l1_mass(&traj.initial).total_norm();
    if mass == 0.0 {
        return Err(Error::ZeroMass);
    }
    let profile = BarenblattProfile::for_params(mass, params)?;
    let records = traj
        .snapshots
        .iter()
        .map(|s| entropy_record(s, params, &profile))
        .collect::<Result<Vec<_>>>()?;
    let (_, a2) = params.exponents();
    let origin = records.iter().position(|r| r.t >= a2 * (1.0 - 1e-12));
    let (envelope, pass, strictly_decreasing) = envelope_verdict(&records, origin, slack);
    Ok(EntropyDecayReport {
        records,
        origin,
        envelope,
        slack,
        pass,
        strictly_decreasing,
    })
}

/// `max_l ‖θ^l - (M_l/|M|)|θ|‖₁ / M_l` over components with positive mass.
pub fn component_proportionality(rs: &RescaledState, masses: &MassVector) -> Result<f64> {
    let total = masses.total_norm();
    if total == 0.0 {
        return Err(Error::ZeroMass);
    }
    let mag = rs.magnitude();
    let dv = rs.eta_grid.cell_volume();
    let mut worst: f64 = 0.0;
    for (theta, &m) in rs.theta.iter().zip(masses.masses()) {
        if m == 0.0 {
            continue;
        }
        let w = m / total;
        let dev: f64 = theta.iter().zip(&mag).map(|(t, f)| (t - w * f).abs()).sum();
        worst = worst.max(dv * dev / m);
    }
    Ok(worst)
}

/// `tau,component,deviation` rows, one per snapshot and component.
pub fn proportionality_csv(traj: &Trajectory, params: &SystemParams) -> Result<String> {
    let masses = l1_mass(&traj.initial);
    let total = masses.total_norm();
    if total == 0.0 {
        return Err(Error::ZeroMass);
    }
    let mut out = String::from("tau,component,deviation\n");
    for s in &traj.snapshots {
        let rs = to_self_similar(s, params)?;
        let mag = rs.magnitude();
        let dv = rs.eta_grid.cell_volume();
        for (l, (theta, &m)) in rs.theta.iter().zip(masses.masses()).enumerate() {
            if m == 0.0 {
                continue;
            }
            let w = m / total;
            let dev: f64 = theta.iter().zip(&mag).map(|(t, f)| (t - w * f).abs()).sum();
            out.push_str(&format!("{:e},{},{:e}\n", rs.tau, l + 1, dv * dev / m));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p31(k: usize) -> SystemParams {
        SystemParams::new(3.0, 1, k, 0.0).unwrap()
    }

    #[test]
    fn unit_scale_at_t_equal_a2() {
        let params = p31(1);
        let (_, a2) = params.exponents();
        let g = Grid::new(1, &[50], 3.0).unwrap();
        let f = VectorField::from_fn(g.clone(), 1, a2, |_, x| (1.0 - x[0] * x[0]).max(0.0)).unwrap();
        let rs = to_self_similar(&f, &params).unwrap();
        assert!((rs.scale - 1.0).abs() < 1e-15);
        assert!(rs.tau.abs() < 1e-15);
        assert_eq!(rs.theta, f.components());
        assert!((rs.eta_grid.h(0) - g.h(0)).abs() < 1e-15);

        let doubled = to_self_similar(&f.scaled(2.0).unwrap(), &params).unwrap();
        assert_eq!(doubled.tau, rs.tau);
        for (a, b) in doubled.theta[0].iter().zip(&rs.theta[0]) {
            assert_eq!(*a, 2.0 * b);
        }
        assert!(to_self_similar(&f.with_time(0.0), &params).is_err());
    }

    #[test]
    fn rescaling_preserves_mass() {
        let params = SystemParams::new(3.0, 2, 2, 0.0).unwrap();
        let g = Grid::new(2, &[30, 30], 2.0).unwrap();
        let f = VectorField::from_fn(g, 2, 7.3, |l, x| {
            (1.0 - x[0] * x[0] - (l + 1) as f64 * x[1] * x[1]).max(0.0)
        })
        .unwrap();
        let rs = to_self_similar(&f, &params).unwrap();
        let (a, b) = (l1_mass(&f), rs.masses());
        for (x, y) in a.masses().iter().zip(b.masses()) {
            assert!((x / y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn barenblatt_snapshot_maps_onto_profile() {
        for &(p, n) in &[(3.0, 1), (3.0, 2), (4.0, 1)] {
            let params = SystemParams::new(p, n, 1, 0.0).unwrap();
            let b = BarenblattProfile::new(1.0, p, n).unwrap();
            let g = Grid::new(n, &[64], 4.0).unwrap();
            for t in [0.3, 1.0, 2.5] {
                let rs = to_self_similar(&b.sample_field(&g, t).unwrap(), &params).unwrap();
                let direct = b.sample_rescaled(&rs.eta_grid);
                for (x, y) in rs.theta[0].iter().zip(&direct) {
                    assert!((x - y).abs() <= 1e-12 * (1.0 + y), "{x} {y}");
                }
            }
        }
    }

    #[test]
    fn sigma_values() {
        assert!((sigma(1.0, 3.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((sigma(4.0, 3.0).unwrap() - 4.0 / 3.0 * 8.0).abs() < 1e-13);
        assert!((sigma_prime(4.0, 3.0).unwrap() - 4.0).abs() < 1e-15);
        assert!(sigma(-1.0, 3.0).is_err());
        assert!(sigma_prime(-1e-3, 3.0).is_err());
        for p in [2.5, 3.0, 4.5] {
            for s in [0.5, 1.0, 2.0] {
                let d = 1e-5;
                let fd = (sigma(s + d, p).unwrap() - sigma(s - d, p).unwrap()) / (2.0 * d);
                assert!((fd - sigma_prime(s, p).unwrap()).abs() < 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn sigma_is_convex(s1 in 0.0f64..10.0, s2 in 0.0f64..10.0, lam in 0.0f64..=1.0, p in 2.05f64..6.0) {
            let lhs = sigma(lam * s1 + (1.0 - lam) * s2, p).unwrap();
            let rhs = lam * sigma(s1, p).unwrap() + (1.0 - lam) * sigma(s2, p).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-14);
        }

        #[test]
        fn sigma_prime_matches_difference_quotient(s in 0.1f64..10.0, p in 2.05f64..6.0) {
            let d = 1e-5;
            let fd = (sigma(s + d, p).unwrap() - sigma(s - d, p).unwrap()) / (2.0 * d);
            prop_assert!((fd - sigma_prime(s, p).unwrap()).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    /// State whose magnitude is the profile on the η-grid times a modulation.
    fn modulated(profile: &BarenblattProfile, params: &SystemParams, weights: &[f64], cells: usize, m: impl Fn(f64) -> f64) -> RescaledState {
        let (_, a2) = params.exponents();
        let g = Grid::new(params.n, &[cells], 3.0 * profile.rescaled_support_radius()).unwrap();
        let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        let theta: Vec<Vec<f64>> = weights
            .iter()
            .map(|w| {
                (0..g.len())
                    .map(|i| {
                        let x = g.center(i);
                        w / norm * profile.rescaled(x[0].hypot(x[1])) * m(x[0])
                    })
                    .collect()
            })
            .collect();
        let field = VectorField::new(g, theta, a2).unwrap();
        to_self_similar(&field, params).unwrap()
    }

    #[test]
    fn proportional_profile_has_zero_entropy() {
        let params = p31(2);
        let b0 = BarenblattProfile::new(5.0, 3.0, 1).unwrap();
        let rs = modulated(&b0, &params, &[3.0, 4.0], 2001, |_| 1.0);
        // compare against the profile of the sampled mass
        let b = BarenblattProfile::new(rs.masses().total_norm(), 3.0, 1).unwrap();
        let tol = quadrature_tolerance(&rs, &b);
        let h = entropy_h(&rs, &b).unwrap();
        let hh = entropy_hhat(&rs, &b).unwrap();
        assert!(h.abs() <= tol, "{h} {tol}");
        assert!(hh.abs() <= tol, "{hh} {tol}");
        assert!(component_proportionality(&rs, &rs.masses()).unwrap() < 1e-14);
    }

    const ORACLE_CELLS: usize = 400_000;

    /// Dense-grid midpoint rule in 1D over `[-r, r]`.
    fn midpoint(r: f64, g: impl Fn(f64) -> f64) -> f64 {
        let h = 2.0 * r / ORACLE_CELLS as f64;
        (0..ORACLE_CELLS).map(|i| g(-r + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn perturbed_profile_matches_dense_oracle() {
        let params = p31(1);
        let b = BarenblattProfile::new(1.0, 3.0, 1).unwrap();
        let rstar = b.rescaled_support_radius();
        let m = move |x: f64| 1.0 + 0.1 * (2.0 * std::f64::consts::PI * x / rstar).cos();
        let f = |x: f64| b.rescaled(x.abs()) * m(x);
        let span = 3.0 * rstar;
        let reference = BarenblattProfile::new(midpoint(span, f), 3.0, 1).unwrap();
        let p = 3.0;
        let oh = midpoint(span, |x| {
            let (fx, bx) = (f(x), reference.rescaled(x.abs()));
            sigma(fx, p).unwrap() - sigma(bx, p).unwrap() - 2.0 * reference.rescaled_pressure(x.abs()) * (fx - bx)
        });
        let ohh = midpoint(span, |x| {
            let (fx, bx) = (f(x), reference.rescaled(x.abs()));
            sigma(fx, p).unwrap() - sigma(bx, p).unwrap() + (2.0 / 3.0) * x.abs().powf(1.5) * (fx - bx)
        });

        let rs = modulated(&b, &params, &[1.0], 4001, m);
        let bm = BarenblattProfile::new(rs.masses().total_norm(), 3.0, 1).unwrap();
        let h = entropy_h(&rs, &bm).unwrap();
        let hh = entropy_hhat(&rs, &bm).unwrap();
        assert!(h > 0.0 && hh >= h - quadrature_tolerance(&rs, &bm));
        assert!((h / oh - 1.0).abs() < 0.01, "{h} vs {oh}");
        assert!((hh / ohh - 1.0).abs() < 0.01, "{hh} vs {ohh}");
    }

    #[test]
    fn mass_mismatch_is_rejected() {
        let params = p31(1);
        let b = BarenblattProfile::new(1.0, 3.0, 1).unwrap();
        let rs = modulated(&b, &params, &[1.0], 501, |_| 2.0);
        assert!(matches!(entropy_h(&rs, &b), Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn disjoint_components_are_far_from_proportional() {
        let params = p31(2);
        let g = Grid::new(1, &[100], 5.0).unwrap();
        let f = VectorField::from_fn(g, 2, 1.0, |l, x| {
            let c = if l == 0 { -2.0 } else { 2.0 };
            (1.0 - (x[0] - c).powi(2)).max(0.0)
        })
        .unwrap();
        let rs = to_self_similar(&f, &params).unwrap();
        let d = component_proportionality(&rs, &rs.masses()).unwrap();
        // equal masses: each θ^l deviates by (1 - 1/√2) on its own support and 1/√2 on the other
        assert!((d - 1.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn reversed_entropy_sequence_fails() {
        let recs: Vec<EntropyRecord> = (0..6)
            .map(|i| EntropyRecord {
                tau: 0.2 * i as f64,
                t: 1.0,
                h: 0.0,
                hhat: (-2.0 * 0.2 * i as f64).exp(),
                tolerance: 0.0,
            })
            .collect();
        let (_, ok, dec) = envelope_verdict(&recs, Some(0), 0.15);
        assert!(ok && dec);
        let mut rev = recs.clone();
        let values: Vec<f64> = recs.iter().rev().map(|r| r.hhat).collect();
        for (r, v) in rev.iter_mut().zip(values) {
            r.hhat = v;
        }
        let (_, ok, dec) = envelope_verdict(&rev, Some(0), 0.15);
        assert!(!ok && !dec);
    }

    #[test]
    fn exact_barenblatt_trajectory_passes_trivially() {
        let params = p31(1);
        let b = BarenblattProfile::new(1.0, 3.0, 1).unwrap();
        let g = Grid::new(1, &[800], 6.0).unwrap();
        let (_, a2) = params.exponents();
        let snaps: Vec<VectorField> = (0..8)
            .map(|i| b.sample_field(&g, a2 * 2f64.powi(i)).unwrap())
            .collect();
        let traj = Trajectory::from_snapshots(b.sample_field(&g, a2 * 0.5).unwrap(), snaps);
        let rep = entropy_decay_report(&traj, &params, DEFAULT_DECAY_SLACK).unwrap();
        assert!(rep.pass);
        for r in &rep.records {
            assert!(r.hhat.abs() <= r.tolerance + 1e-6, "{r:?}");
            assert!(r.h.abs() <= r.tolerance + 1e-6, "{r:?}");
        }
    }
}
