//! Fundamental (Barenblatt) solutions of the scalar p-Laplacian equation
//! `g_t = div(|∇g|^{p-2} ∇g)` with initial datum `M δ`.
//!
//! Two parameterisations are carried side by side:
//!
//! ```text
//! B_M(x, t)   = t^{-a1} (C_M - (p-2)/p a2^{1/(p-1)} (|x| / t^{a2})^{p/(p-1)})_+^{(p-1)/(p-2)}
//! B~_M(η)     = (C~ - (p-2)/p |η|^{p/(p-1)})_+^{(p-1)/(p-2)}
//! B_M(x, t)   = (t/a2)^{-a1} B~_M((t/a2)^{-a2} x)
//! ```
//!
//! The two constants are related by `C_M = a2^{a1 (p-2)/(p-1)} C~`, and both
//! forms carry mass `M` at every `t > 0`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{Grid, SystemParams, VectorField};
use crate::operators::nonlinear_divergence;
use crate::quad::{bisect, integrate};

pub fn similarity_exponents(p: f64, n: usize) -> Result<(f64, f64)> {
    if !(p > 2.0) {
        return Err(Error::InvalidParameter(format!("p must exceed 2, got {p}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let a2 = 1.0 / ((p - 2.0) * n as f64 + p);
    Ok((n as f64 * a2, a2))
}

/// Surface measure of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            // ω_n = 2 π^{n/2} / Γ(n/2), via ω_{n} = 2π/(n-2) ω_{n-2}
            let mut w = if n.is_multiple_of(2) { 2.0 * PI } else { 4.0 * PI };
            let mut m = if n.is_multiple_of(2) { 2 } else { 3 };
            while m < n {
                w *= 2.0 * PI / m as f64;
                m += 2;
            }
            w
        }
    }
}

struct Shape {
    q: f64,
    gamma: f64,
    kappa: f64,
}

impl Shape {
    fn new(p: f64) -> Self {
        Self {
            q: p / (p - 1.0),
            gamma: (p - 1.0) / (p - 2.0),
            kappa: (p - 2.0) / p,
        }
    }
}

/// Mass of `B~` with constant `c`, by radial quadrature on `[0, r*]`.
pub fn rescaled_mass(c: f64, p: f64, n: usize) -> Result<f64> {
    if c <= 0.0 {
        return Ok(0.0);
    }
    let s = Shape::new(p);
    let r_star = (c / s.kappa).powf(1.0 / s.q);
    let nm1 = (n - 1) as i32;
    let f = |r: f64| r.powi(nm1) * (c - s.kappa * r.powf(s.q)).max(0.0).powf(s.gamma);
    // magnitude guess for a relative tolerance
    let scale = r_star.powi(n as i32) * c.powf(s.gamma);
    let v = integrate(f, 0.0, r_star, 1e-14 * scale)?;
    Ok(sphere_area(n) * v)
}

/// The constant `C~` of the rescaled profile carrying mass `mass`.
pub fn profile_constant(mass: f64, p: f64, n: usize) -> Result<f64> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
    }
    similarity_exponents(p, n)?;
    let mut hi = 1.0;
    let mut doublings = 0;
    while rescaled_mass(hi, p, n)? < mass {
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 || !hi.is_finite() {
            return Err(Error::BracketFailure {
                lo: 0.0,
                hi,
                detail: format!("mass {mass} not reached"),
            });
        }
    }
    bisect(|c| Ok(rescaled_mass(c, p, n)? - mass), 0.0, hi, 1e-12 * mass)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarenblattProfile {
    pub mass: f64,
    /// Constant of the physical form `B_M(x, t)`.
    pub c_m: f64,
    /// Constant of the rescaled form `B~_M(η)`.
    pub c_rescaled: f64,
    pub a1: f64,
    pub a2: f64,
    pub p: f64,
    pub n: usize,
}

impl BarenblattProfile {
    pub fn new(mass: f64, p: f64, n: usize) -> Result<Self> {
        let (a1, a2) = similarity_exponents(p, n)?;
        let c_rescaled = profile_constant(mass, p, n)?;
        let c_m = a2.powf(a1 * (p - 2.0) / (p - 1.0)) * c_rescaled;
        Ok(Self {
            mass,
            c_m,
            c_rescaled,
            a1,
            a2,
            p,
            n,
        })
    }

    pub fn for_params(mass: f64, params: &SystemParams) -> Result<Self> {
        Self::new(mass, params.p, params.n)
    }

    /// `B~_M` at a point `η` of norm `eta_norm`.
    pub fn rescaled(&self, eta_norm: f64) -> f64 {
        let s = Shape::new(self.p);
        (self.c_rescaled - s.kappa * eta_norm.powf(s.q)).max(0.0).powf(s.gamma)
    }

    /// `(C~ - (p-2)/p |η|^{p/(p-1)})_+`, which equals `((p-2)/(p-1)) σ'(B~)`.
    pub fn rescaled_pressure(&self, eta_norm: f64) -> f64 {
        let s = Shape::new(self.p);
        (self.c_rescaled - s.kappa * eta_norm.powf(s.q)).max(0.0)
    }

    pub fn rescaled_support_radius(&self) -> f64 {
        let s = Shape::new(self.p);
        (self.c_rescaled / s.kappa).powf(1.0 / s.q)
    }

    /// `B_M(x, t)` for a point of norm `radius`.
    pub fn evaluate_radius(&self, radius: f64, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        let s = Shape::new(self.p);
        let coef = s.kappa * self.a2.powf(1.0 / (self.p - 1.0));
        let inner = self.c_m - coef * (radius / t.powf(self.a2)).powf(s.q);
        Ok(t.powf(-self.a1) * inner.max(0.0).powf(s.gamma))
    }

    pub fn evaluate(&self, x: &[f64], t: f64) -> Result<f64> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.evaluate_radius(r, t)
    }

    /// Radius of the support of `B_M(·, t)`.
    pub fn support_radius(&self, t: f64) -> f64 {
        let s = Shape::new(self.p);
        t.powf(self.a2)
            * (self.c_m / (s.kappa * self.a2.powf(1.0 / (self.p - 1.0)))).powf(1.0 / s.q)
    }

    /// `B_M(·, t)` at the cell centres of `grid`.
    pub fn sample(&self, grid: &Grid, t: f64) -> Result<Vec<f64>> {
        grid.radii().into_iter().map(|r| self.evaluate_radius(r, t)).collect()
    }

    pub fn sample_field(&self, grid: &Grid, t: f64) -> Result<VectorField> {
        VectorField::new(grid.clone(), vec![self.sample(grid, t)?], t)
    }

    /// `B~_M` at the cell centres of an η-grid.
    pub fn sample_rescaled(&self, grid: &Grid) -> Vec<f64> {
        grid.radii().into_iter().map(|r| self.rescaled(r)).collect()
    }
}

/// L¹ mismatch between the discrete operator applied to a sampled profile and
/// its centred time derivative, over cells farther than `5h` from the free
/// boundary.
pub fn pde_residual(profile: &BarenblattProfile, grid: &Grid, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let h = grid.min_spacing();
    let r_star = profile.support_radius(t);
    if r_star + 2.0 * h >= grid.half_extent() {
        return Err(Error::ProfileOverflow {
            radius: r_star,
            half_extent: grid.half_extent(),
        });
    }
    let params = SystemParams::new(profile.p, grid.n(), 1, 0.0)?;
    let field = profile.sample_field(grid, t)?;
    let div = nonlinear_divergence(&field, &params).swap_remove(0);
    let dt = t * 1e-5;
    let later = profile.sample(grid, t + dt)?;
    let earlier = profile.sample(grid, t - dt)?;
    let radii = grid.radii();
    let mut sum = 0.0;
    for idx in 0..grid.len() {
        if (radii[idx] - r_star).abs() <= 5.0 * h {
            continue;
        }
        let dudt = (later[idx] - earlier[idx]) / (2.0 * dt);
        sum += (div[idx] - dudt).abs();
    }
    Ok(grid.cell_volume() * sum)
}
