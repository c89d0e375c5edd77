//! Simulator and verification harness for the degenerate parabolic p-Laplacian
//! system
//!
//! ```text
//! u^l_t = div(|∇u|^{p-2} ∇u^l),   l = 1..k,   p > 2,
//! ```
//!
//! where `|∇u|² = Σ_l |∇u^l|²` couples the components through a single shared
//! diffusion coefficient.
//!
//! The crate is organised bottom-up:
//!
//! - [`field`]: parameters, grids, vector fields and mass vectors.
//! - [`operators`]: face-centred discrete gradients, the system gradient norm
//!   and discrete norms.
//! - [`snapshot`]: the plain-text snapshot file format.
//! - [`barenblatt`]: closed-form fundamental solutions and their normalisation.
//! - [`solver`]: the conservative explicit scheme for the regularised system.
//! - [`selfsim`]: self-similar rescaling and the entropy functionals.
//! - [`diagnostics`]: verdict reports for the large-time and Harnack-type
//!   properties of the system.
//! - [`config`] and [`cli`]: flat-text run configuration and the `plapsys`
//!   command line front end.

// negated comparisons reject NaN alongside out-of-range values; component
// loops index several parallel arrays
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod barenblatt;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod operators;
pub mod quad;
pub mod selfsim;
pub mod snapshot;
pub mod solver;

pub use barenblatt::{profile_constant, similarity_exponents, BarenblattProfile};
pub use error::{Error, Result};
pub use field::{Grid, MassVector, SystemParams, VectorField};
pub use solver::{InitialPreset, PresetKind, SimulationState, SolverConfig, Trajectory};
