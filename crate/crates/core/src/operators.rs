//! Face-centred discrete differential operators and discrete norms.
//!
//! Gradients live on cell faces. Along axis 0 there are `(c0 + 1) * c1` faces
//! indexed `i * c1 + j`, where face `i` separates cells `i - 1` and `i`; along
//! axis 1 there are `c0 * (c1 + 1)` faces indexed `i * (c1 + 1) + j`. Outer
//! boundary faces carry a zero normal gradient.

use crate::error::Result;
use crate::field::{Grid, MassVector, SystemParams, VectorField};

/// One scalar array per active axis, sampled on the faces normal to it.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceArray {
    pub axes: Vec<Vec<f64>>,
}

impl FaceArray {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            axes: (0..grid.n()).map(|d| vec![0.0; face_count(grid, d)]).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.axes
            .iter()
            .flat_map(|a| a.iter())
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.axes.iter().flat_map(|a| a.iter().copied())
    }
}

pub fn face_count(grid: &Grid, axis: usize) -> usize {
    let [c0, c1] = grid.shape();
    if axis == 0 {
        (c0 + 1) * c1
    } else {
        c0 * (c1 + 1)
    }
}

/// Two-point differences of `u` on every face, written into `out[axis]`.
pub(crate) fn face_gradient_into(grid: &Grid, u: &[f64], out: &mut [Vec<f64>]) {
    let [c0, c1] = grid.shape();
    let inv_h0 = 1.0 / grid.h(0);
    let g0 = &mut out[0];
    g0[..c1].fill(0.0);
    g0[c0 * c1..].fill(0.0);
    for i in 1..c0 {
        for j in 0..c1 {
            g0[i * c1 + j] = (u[i * c1 + j] - u[(i - 1) * c1 + j]) * inv_h0;
        }
    }
    if grid.n() == 2 {
        let inv_h1 = 1.0 / grid.h(1);
        let g1 = &mut out[1];
        let w = c1 + 1;
        for i in 0..c0 {
            g1[i * w] = 0.0;
            g1[i * w + c1] = 0.0;
            for j in 1..c1 {
                g1[i * w + j] = (u[i * c1 + j] - u[i * c1 + j - 1]) * inv_h1;
            }
        }
    }
}

/// Accumulate `|∇u^l|²` of one component into `theta_sq`, including the
/// transverse derivatives averaged from the four neighbouring faces.
fn accumulate_norm_sq(grid: &Grid, grad: &[Vec<f64>], theta_sq: &mut [Vec<f64>]) {
    let [c0, c1] = grid.shape();
    for (t, g) in theta_sq[0].iter_mut().zip(&grad[0]) {
        *t += g * g;
    }
    if grid.n() == 1 {
        return;
    }
    for (t, g) in theta_sq[1].iter_mut().zip(&grad[1]) {
        *t += g * g;
    }
    let w = c1 + 1;
    // transverse (axis 1) derivative on axis-0 faces
    for i in 0..=c0 {
        let rows = [i.checked_sub(1), (i < c0).then_some(i)];
        for j in 0..c1 {
            let mut sum = 0.0;
            let mut count = 0.0;
            for r in rows.into_iter().flatten() {
                sum += grad[1][r * w + j] + grad[1][r * w + j + 1];
                count += 2.0;
            }
            let avg = sum / count;
            theta_sq[0][i * c1 + j] += avg * avg;
        }
    }
    // transverse (axis 0) derivative on axis-1 faces
    for i in 0..c0 {
        for j in 0..=c1 {
            let cols = [j.checked_sub(1), (j < c1).then_some(j)];
            let mut sum = 0.0;
            let mut count = 0.0;
            for c in cols.into_iter().flatten() {
                sum += grad[0][i * c1 + c] + grad[0][(i + 1) * c1 + c];
                count += 2.0;
            }
            let avg = sum / count;
            theta_sq[1][i * w + j] += avg * avg;
        }
    }
}

/// Reusable per-step buffers: per-component face gradients and the face
/// values of the system gradient norm `Θ`.
#[derive(Debug, Clone)]
pub(crate) struct FaceWorkspace {
    pub grads: Vec<Vec<Vec<f64>>>,
    pub theta: Vec<Vec<f64>>,
}

impl FaceWorkspace {
    pub fn new(grid: &Grid, k: usize) -> Self {
        let axes = FaceArray::zeros(grid).axes;
        Self {
            grads: vec![axes.clone(); k],
            theta: axes,
        }
    }

    /// Fill gradients and `Θ` for the given components.
    pub fn compute(&mut self, grid: &Grid, components: &[Vec<f64>]) {
        for a in self.theta.iter_mut() {
            a.fill(0.0);
        }
        for (u, grad) in components.iter().zip(self.grads.iter_mut()) {
            face_gradient_into(grid, u, grad);
            accumulate_norm_sq(grid, grad, &mut self.theta);
        }
        for a in self.theta.iter_mut() {
            for t in a.iter_mut() {
                *t = t.sqrt();
            }
        }
    }

    pub fn max_theta(&self) -> f64 {
        self.theta
            .iter()
            .flat_map(|a| a.iter())
            .copied()
            .fold(0.0, f64::max)
    }

    /// Overwrite `theta` with the diffusion coefficient `Θ^{p-2} + ε`.
    pub fn theta_to_coefficient(&mut self, p: f64, epsilon: f64) {
        let e = p - 2.0;
        for a in self.theta.iter_mut() {
            for t in a.iter_mut() {
                *t = if e == 1.0 { *t } else { t.powf(e) } + epsilon;
            }
        }
    }
}

/// `div(coef ∇u)` with face fluxes `coef * grad`, written into `out`.
pub(crate) fn flux_divergence_into(
    grid: &Grid,
    coef: &[Vec<f64>],
    grad: &[Vec<f64>],
    out: &mut [f64],
) {
    let [c0, c1] = grid.shape();
    let inv_h0 = 1.0 / grid.h(0);
    for i in 0..c0 {
        for j in 0..c1 {
            let lo = i * c1 + j;
            let hi = (i + 1) * c1 + j;
            out[i * c1 + j] = (coef[0][hi] * grad[0][hi] - coef[0][lo] * grad[0][lo]) * inv_h0;
        }
    }
    if grid.n() == 2 {
        let inv_h1 = 1.0 / grid.h(1);
        let w = c1 + 1;
        for i in 0..c0 {
            for j in 0..c1 {
                let lo = i * w + j;
                let hi = lo + 1;
                out[i * c1 + j] += (coef[1][hi] * grad[1][hi] - coef[1][lo] * grad[1][lo]) * inv_h1;
            }
        }
    }
}

/// Face-centred `∂u^l/∂x_d` for one component.
pub fn gradient(field: &VectorField, component: usize) -> Result<FaceArray> {
    let u = field.component(component)?;
    let mut out = FaceArray::zeros(field.grid());
    face_gradient_into(field.grid(), u, &mut out.axes);
    Ok(out)
}

/// Face values of `Θ = |∇u| = sqrt(Σ_l |∇u^l|²)`.
pub fn system_gradient_norm(field: &VectorField) -> FaceArray {
    let mut ws = FaceWorkspace::new(field.grid(), field.k());
    ws.compute(field.grid(), field.components());
    FaceArray { axes: ws.theta }
}

/// Discrete `div((Θ^{p-2} + ε) ∇u^l)` for every component.
pub fn nonlinear_divergence(field: &VectorField, params: &SystemParams) -> Vec<Vec<f64>> {
    let grid = field.grid();
    let mut ws = FaceWorkspace::new(grid, field.k());
    ws.compute(grid, field.components());
    ws.theta_to_coefficient(params.p, params.epsilon);
    ws.grads
        .iter()
        .map(|grad| {
            let mut out = vec![0.0; grid.len()];
            flux_divergence_into(grid, &ws.theta, grad, &mut out);
            out
        })
        .collect()
}

pub fn l1_mass(field: &VectorField) -> MassVector {
    let dv = field.grid().cell_volume();
    let masses = field
        .components()
        .iter()
        .map(|c| dv * c.iter().sum::<f64>())
        .collect();
    MassVector::new(masses).expect("field values are nonnegative")
}

/// `(h^n Σ |u^l|^q)^{1/q}`.
pub fn lp_norm(field: &VectorField, component: usize, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(crate::Error::InvalidParameter(format!("q must be >= 1, got {q}")));
    }
    let u = field.component(component)?;
    let dv = field.grid().cell_volume();
    let s: f64 = u.iter().map(|v| v.abs().powf(q)).sum();
    Ok((dv * s).powf(1.0 / q))
}

pub fn linf_norm(field: &VectorField) -> f64 {
    field
        .components()
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0, |m, v| m.max(v.abs()))
}

/// `h^n Σ |a - b|` over cells.
pub fn l1_distance(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    grid.cell_volume() * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
