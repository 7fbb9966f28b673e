//! Numerical laboratory for the Yang-Mills-Higgs gradient flow on Higgs
//! bundles over a flat torus.
//!
//! The crate discretises Higgs pairs (∂̄_A, φ) on direct sums of line
//! bundles over X = ℂ/(ℤ + τℤ) with vol(X) = 2π, integrates the downward
//! YMH flow through the complex gauge group, computes harmonic ℍ¹ bases
//! for the negative slices of critical points, runs the scattering
//! construction for convergent reverse-flow solutions, and drives Hecke
//! modification flow-line experiments.
//!
//! Modules follow the pipeline:
//! - [`grid`], [`field`], [`bundle`]: twisted function spaces and the
//!   seam-phase Dolbeault operators;
//! - [`higgs`]: curvature, moment map, energy, gauge action, gradients;
//! - [`flow`]: Runge-Kutta integration of the gauge-generated flow;
//! - [`slice`]: critical points, eigen-blocks, harmonic slices,
//!   flow-limit classification;
//! - [`scatter`]: flow-up/flow-down scattering and its inverse;
//! - [`hecke`]: Hecke modifications, kernel maps into ℍ¹, secant tests,
//!   and the flow-line experiment driver.

pub mod bundle;
pub mod error;
pub mod field;
pub mod flow;
pub mod grid;
pub mod hecke;
pub mod higgs;
pub mod linalg;
pub mod scatter;
pub mod slice;
pub mod smallmat;

pub use bundle::{abel_jacobi, dbar, dbar_star, del, Background, LineBundle};
pub use error::{Error, Result};
pub use field::{inner_l2, sup_norm, TwistedField};
pub use grid::{make_grid, FormType, TorusGrid};
pub use higgs::{
    chern_curvature, gauge_act, grad_ymh, grad_ymh_unitary, holomorphy_residual, moment_map,
    sigma_of, ymh_energy, GaugeField, HiggsPair, MetricField, TangentPair,
};

pub type C64 = num_complex::Complex64;
