//! Discrete flat torus X = ℂ/(ℤ + τℤ) with area normalised to 2π.
//!
//! Lattice coordinates are (x, y) ∈ [0,1)² with z = x + τy, sampled on an
//! n × n grid, x_j = j/n, y_k = k/n. The flat metric is ρ²|dz|² with
//! ρ² = 2π/Im τ, so the volume form is dvol = 2π dx∧dy and every grid cell
//! carries measure 2π/n².
//!
//! Forms are stored through their coefficients in the global flat frames:
//! 0-forms as functions, (0,1)-forms as the coefficient of dz̄, (1,0)-forms
//! as the coefficient of dz, and 2-forms as the coefficient of dvol. With
//! that convention the Hodge star on 2-forms is the identity on
//! coefficients, and the pointwise norms carry the weights
//! |dz|² = |dz̄|² = 2/ρ² = Im τ/π.

use crate::error::{Error, Result};
use num_complex::Complex64;

use std::f64::consts::PI;

/// Form degree of a stored coefficient field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormType {
    /// Function (coefficient of 1).
    Zero,
    /// Coefficient of dz̄.
    ZeroOne,
    /// Coefficient of dz.
    OneZero,
    /// Coefficient of dvol.
    Two,
}

impl FormType {
    /// Pointwise metric weight of the frame element.
    pub fn weight(self, grid: &TorusGrid) -> f64 {
        match self {
            FormType::Zero | FormType::Two => 1.0,
            FormType::ZeroOne | FormType::OneZero => grid.one_form_weight(),
        }
    }
}

/// Antisymmetric centered-difference coefficients c_1..c_R (taps at ±r).
pub(crate) fn stencil_coeffs(order: usize) -> &'static [f64] {
    match order {
        2 => &[0.5],
        4 => &[2.0 / 3.0, -1.0 / 12.0],
        6 => &[3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
        8 => &[4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0],
        _ => unreachable!("stencil order validated at grid construction"),
    }
}

/// Discrete flat torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    /// Grid resolution per axis (even, ≥ 16).
    pub n: usize,
    /// Complex modulus of the torus (Im τ > 0).
    pub tau: Complex64,
    /// ρ² = 2π/Im τ, the conformal factor normalising vol(X) = 2π.
    pub area_scale: f64,
    /// Centered finite-difference order (2, 4, 6 or 8).
    pub stencil_order: usize,
}

impl TorusGrid {
    /// Grid with the default stencil order.
    pub fn new(n: usize, tau: Complex64) -> Result<Self> {
        Self::with_stencil_order(n, tau, 8)
    }

    pub fn with_stencil_order(n: usize, tau: Complex64, stencil_order: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::Config(format!("resolution must be even, got {n}")));
        }
        if n < 16 {
            return Err(Error::Config(format!("resolution must be ≥ 16, got {n}")));
        }
        if !(tau.im > 0.0) {
            return Err(Error::Config(format!("Im τ must be positive, got {}", tau.im)));
        }
        if !matches!(stencil_order, 2 | 4 | 6 | 8) {
            return Err(Error::Config(format!(
                "stencil order must be one of 2, 4, 6, 8, got {stencil_order}"
            )));
        }
        if n / 2 <= stencil_order / 2 {
            return Err(Error::Config("stencil radius exceeds half the grid".into()));
        }
        Ok(TorusGrid { n, tau, area_scale: 2.0 * PI / tau.im, stencil_order })
    }

    pub fn sites(&self) -> usize {
        self.n * self.n
    }

    /// Measure of one grid cell; the total is vol(X) = 2π.
    pub fn cell_measure(&self) -> f64 {
        2.0 * PI / (self.sites() as f64)
    }

    /// Weight |dz|² = 2/ρ² = Im τ/π of the 1-form frame elements.
    pub fn one_form_weight(&self) -> f64 {
        self.tau.im / PI
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn y(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    #[inline]
    pub fn site(&self, j: usize, k: usize) -> usize {
        j * self.n + k
    }

    /// Site index of the grid point nearest to a continuous torus point.
    pub fn snap(&self, p: [f64; 2]) -> (usize, usize) {
        let n = self.n as f64;
        let j = ((p[0].rem_euclid(1.0)) * n).round() as usize % self.n;
        let k = ((p[1].rem_euclid(1.0)) * n).round() as usize % self.n;
        (j, k)
    }

    /// Coefficient turning a dz∧dz̄ component into a dvol component:
    /// dz∧dz̄ = −i·(Im τ/π)·dvol.
    pub fn wedge_to_vol(&self) -> Complex64 {
        Complex64::new(0.0, -self.one_form_weight())
    }

    /// Coefficients (c_x, c_y) with ∂̄-coefficient = c_x D_x + c_y D_y.
    pub(crate) fn dbar_coeffs(&self) -> (Complex64, Complex64) {
        let denom = Complex64::new(0.0, 2.0 * self.tau.im);
        (self.tau / denom, -Complex64::ONE / denom)
    }

    /// Coefficients (c_x, c_y) with ∂-coefficient = c_x D_x + c_y D_y.
    pub(crate) fn del_coeffs(&self) -> (Complex64, Complex64) {
        let denom = Complex64::new(0.0, 2.0 * self.tau.im);
        (-self.tau.conj() / denom, Complex64::ONE / denom)
    }

    /// Toroidal distance between two points in lattice coordinates,
    /// measured in the |dz| metric (up to the global ρ factor).
    pub fn torus_dist(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let wrap = |d: f64| {
            let d = d.rem_euclid(1.0);
            d.min(1.0 - d)
        };
        let dx = wrap(a[0] - b[0]);
        let dy = wrap(a[1] - b[1]);
        let dz = Complex64::new(dx, 0.0) + self.tau * dy;
        dz.norm()
    }
}

/// The spec-level constructor: `make_grid`.
pub fn make_grid(n: usize, tau: Complex64) -> Result<TorusGrid> {
    TorusGrid::new(n, tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_measure_normalisation() {
        let g = make_grid(32, Complex64::i()).unwrap();
        assert_eq!(g.sites(), 1024);
        let total: f64 = (0..g.sites()).map(|_| g.cell_measure()).sum();
        assert!((total - 2.0 * PI).abs() < 1e-12 * 2.0 * PI);
        let g = make_grid(64, Complex64::i()).unwrap();
        assert_eq!(g.sites(), 4096);
    }

    #[test]
    fn odd_resolution_rejected() {
        let err = make_grid(17, Complex64::i()).unwrap_err();
        assert!(err.to_string().contains("even"));
        assert!(make_grid(8, Complex64::i()).is_err());
        assert!(make_grid(32, Complex64::new(1.0, -1.0)).is_err());
    }
}
