//! Matrix-valued lattice fields with a per-entry degree twist.
//!
//! A `TwistedField` stores one complex sample per grid site for each entry
//! of a (rows × cols) matrix fiber. Entry (r, c) of an End-valued field
//! over E = L_{d_1} ⊕ … ⊕ L_{d_m} is a section of Hom(L_{d_c}, L_{d_r})
//! and carries twist d_r − d_c; products and adjoints propagate twists.
//! Values are coefficients in the global frames {1, dz̄, dz, dvol}
//! selected by the form type.

use crate::error::{Error, Result};
use crate::grid::{FormType, TorusGrid};
use crate::smallmat::SmallMat;
use num_complex::Complex64;

type C = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct TwistedField {
    pub grid: TorusGrid,
    pub rows: usize,
    pub cols: usize,
    /// Twist per matrix entry, row-major.
    pub twist: Vec<i64>,
    pub form: FormType,
    /// Samples, entry-major: values[(r·cols + c)·n² + site].
    pub values: Vec<C>,
}

/// Twist pattern d_r − d_c of End(⊕ L_{d_j}).
pub fn end_twist(degrees: &[i64]) -> Vec<i64> {
    let m = degrees.len();
    let mut t = Vec::with_capacity(m * m);
    for r in 0..m {
        for c in 0..m {
            t.push(degrees[r] - degrees[c]);
        }
    }
    t
}

/// Twist pattern of the column Hom(L_t, ⊕ L_{d_j}).
pub fn hom_twist(degrees: &[i64], target: i64) -> Vec<i64> {
    degrees.iter().map(|d| d - target).collect()
}

impl TwistedField {
    pub fn zeros(grid: TorusGrid, rows: usize, cols: usize, twist: Vec<i64>, form: FormType) -> Self {
        assert_eq!(twist.len(), rows * cols);
        let sites = grid.sites();
        TwistedField { grid, rows, cols, twist, form, values: vec![C::ZERO; rows * cols * sites] }
    }

    pub fn zeros_like(other: &TwistedField) -> Self {
        Self::zeros(other.grid, other.rows, other.cols, other.twist.clone(), other.form)
    }

    /// Scalar (1×1) field of a given twist.
    pub fn scalar(grid: TorusGrid, twist: i64, form: FormType, values: Vec<C>) -> Self {
        assert_eq!(values.len(), grid.sites());
        TwistedField { grid, rows: 1, cols: 1, twist: vec![twist], form, values }
    }

    /// Constant diagonal 0-form over a direct sum (twist 0 entries).
    pub fn const_diagonal(grid: TorusGrid, degrees: &[i64], entries: &[C], form: FormType) -> Self {
        let m = degrees.len();
        let mut f = Self::zeros(grid, m, m, end_twist(degrees), form);
        let sites = grid.sites();
        for (r, &v) in entries.iter().enumerate() {
            let base = (r * m + r) * sites;
            f.values[base..base + sites].fill(v);
        }
        f
    }

    pub fn identity(grid: TorusGrid, degrees: &[i64]) -> Self {
        let ones = vec![C::ONE; degrees.len()];
        Self::const_diagonal(grid, degrees, &ones, FormType::Zero)
    }

    #[inline]
    pub fn entry_index(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    pub fn plane(&self, r: usize, c: usize) -> &[C] {
        let sites = self.grid.sites();
        let e = self.entry_index(r, c);
        &self.values[e * sites..(e + 1) * sites]
    }

    pub fn plane_mut(&mut self, r: usize, c: usize) -> &mut [C] {
        let sites = self.grid.sites();
        let e = self.entry_index(r, c);
        &mut self.values[e * sites..(e + 1) * sites]
    }

    pub fn same_layout(&self, other: &TwistedField) -> bool {
        self.grid == other.grid
            && self.rows == other.rows
            && self.cols == other.cols
            && self.twist == other.twist
            && self.form == other.form
    }

    fn check_same_layout(&self, other: &TwistedField, what: &str) -> Result<()> {
        if !self.same_layout(other) {
            return Err(Error::Shape(format!("{what}: mismatched grid/shape/twist/form")));
        }
        Ok(())
    }

    /// Fiber matrix at one site.
    pub fn site_matrix(&self, site: usize) -> SmallMat {
        debug_assert_eq!(self.rows, self.cols);
        let sites = self.grid.sites();
        let mut m = SmallMat::zeros(self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m[(r, c)] = self.values[(r * self.cols + c) * sites + site];
            }
        }
        m
    }

    pub fn set_site_matrix(&mut self, site: usize, m: &SmallMat) {
        let sites = self.grid.sites();
        for r in 0..self.rows {
            for c in 0..self.cols {
                self.values[(r * self.cols + c) * sites + site] = m[(r, c)];
            }
        }
    }

    /// Pointwise matrix product; twists must compose consistently.
    pub fn matmul(&self, rhs: &TwistedField) -> Result<TwistedField> {
        if self.cols != rhs.rows || self.grid != rhs.grid {
            return Err(Error::Shape("matmul: incompatible shapes".into()));
        }
        let form = match (self.form, rhs.form) {
            (FormType::Zero, f) | (f, FormType::Zero) => f,
            _ => return Err(Error::Shape("matmul: only 0-form factors compose pointwise".into())),
        };
        let mut twist = Vec::with_capacity(self.rows * rhs.cols);
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let t = self.twist[r * self.cols] + rhs.twist[c];
                for l in 0..self.cols {
                    let tl = self.twist[r * self.cols + l] + rhs.twist[l * rhs.cols + c];
                    if tl != t {
                        return Err(Error::Twist(format!(
                            "matmul: inconsistent twist composition at entry ({r},{c})"
                        )));
                    }
                }
                twist.push(t);
            }
        }
        let sites = self.grid.sites();
        let mut out = TwistedField {
            grid: self.grid,
            rows: self.rows,
            cols: rhs.cols,
            twist,
            form,
            values: vec![C::ZERO; self.rows * rhs.cols * sites],
        };
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let dst_base = (r * rhs.cols + c) * sites;
                for l in 0..self.cols {
                    let a = &self.values[(r * self.cols + l) * sites..(r * self.cols + l + 1) * sites];
                    let b = &rhs.values[(l * rhs.cols + c) * sites..(l * rhs.cols + c + 1) * sites];
                    let dst = &mut out.values[dst_base..dst_base + sites];
                    for s in 0..sites {
                        dst[s] += a[s] * b[s];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Pointwise conjugate transpose; negates twists, swaps (0,1) ↔ (1,0).
    pub fn adjoint(&self) -> TwistedField {
        let form = match self.form {
            FormType::Zero => FormType::Zero,
            FormType::ZeroOne => FormType::OneZero,
            FormType::OneZero => FormType::ZeroOne,
            FormType::Two => FormType::Two,
        };
        let sites = self.grid.sites();
        let mut out = TwistedField {
            grid: self.grid,
            rows: self.cols,
            cols: self.rows,
            twist: vec![0; self.twist.len()],
            form,
            values: vec![C::ZERO; self.values.len()],
        };
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.twist[c * self.rows + r] = -self.twist[r * self.cols + c];
                let src = &self.values[(r * self.cols + c) * sites..(r * self.cols + c + 1) * sites];
                let dst = &mut out.values[(c * self.rows + r) * sites..(c * self.rows + r + 1) * sites];
                for s in 0..sites {
                    dst[s] = src[s].conj();
                }
            }
        }
        out
    }

    /// Commutator [A, B] of two square 0-form fields.
    pub fn commutator(&self, rhs: &TwistedField) -> Result<TwistedField> {
        let ab = self.matmul(rhs)?;
        let ba = rhs.matmul(self)?;
        ab.sub(&ba)
    }

    pub fn add(&self, rhs: &TwistedField) -> Result<TwistedField> {
        self.check_same_layout(rhs, "add")?;
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(rhs.values.iter()) {
            *a += *b;
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &TwistedField) -> Result<TwistedField> {
        self.check_same_layout(rhs, "sub")?;
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(rhs.values.iter()) {
            *a -= *b;
        }
        Ok(out)
    }

    pub fn scaled(&self, s: C) -> TwistedField {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn axpy(&mut self, s: C, rhs: &TwistedField) {
        debug_assert!(self.same_layout(rhs));
        for (a, b) in self.values.iter_mut().zip(rhs.values.iter()) {
            *a += s * *b;
        }
    }

    /// L² inner product ⟨f, g⟩ = ∫ tr(f g†) dvol with the form weight;
    /// conjugate-linear in `g`.
    pub fn inner_l2(&self, other: &TwistedField) -> Result<C> {
        self.check_same_layout(other, "inner_l2")?;
        let w = self.form.weight(&self.grid) * self.grid.cell_measure();
        let mut acc = C::ZERO;
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            acc += a * b.conj();
        }
        Ok(acc * w)
    }

    pub fn norm_l2(&self) -> f64 {
        let w = self.form.weight(&self.grid) * self.grid.cell_measure();
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * w).sqrt()
    }

    /// Max over sites of the fiberwise Frobenius norm.
    pub fn sup_norm(&self) -> f64 {
        let sites = self.grid.sites();
        let entries = self.rows * self.cols;
        let mut best = 0.0f64;
        for s in 0..sites {
            let mut acc = 0.0;
            for e in 0..entries {
                acc += self.values[e * sites + s].norm_sqr();
            }
            best = best.max(acc);
        }
        best.sqrt()
    }

    /// Deviation from pointwise Hermitian, sup norm.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.adjoint();
        let sites = self.grid.sites();
        let entries = self.rows * self.cols;
        let mut best = 0.0f64;
        for s in 0..sites {
            let mut acc = 0.0;
            for e in 0..entries {
                acc += (self.values[e * sites + s] - adj.values[e * sites + s]).norm_sqr();
            }
            best = best.max(acc);
        }
        best.sqrt()
    }

    /// Keep the entries selected by `mask` (true keeps), zero the rest.
    pub fn masked(&self, mask: &[bool]) -> TwistedField {
        assert_eq!(mask.len(), self.rows * self.cols);
        let sites = self.grid.sites();
        let mut out = self.clone();
        for (e, keep) in mask.iter().enumerate() {
            if !keep {
                out.values[e * sites..(e + 1) * sites].fill(C::ZERO);
            }
        }
        out
    }
}

/// The spec-level operations `inner_l2` and `sup_norm`.
pub fn inner_l2(f: &TwistedField, g: &TwistedField) -> Result<C> {
    f.inner_l2(g)
}

pub fn sup_norm(f: &TwistedField) -> f64 {
    f.sup_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> TorusGrid {
        TorusGrid::new(16, C::i()).unwrap()
    }

    #[test]
    fn inner_product_of_ones_is_volume() {
        let g = grid();
        let ones = TwistedField::scalar(g, 0, FormType::Zero, vec![C::ONE; g.sites()]);
        let ip = inner_l2(&ones, &ones).unwrap();
        assert!((ip.re - 2.0 * PI).abs() < 1e-12);
        assert!(ip.im.abs() < 1e-14);
    }

    #[test]
    fn fourier_modes_are_orthogonal() {
        let g = grid();
        let mode = |a: i32, b: i32| {
            let vals = (0..g.n)
                .flat_map(|j| (0..g.n).map(move |k| (j, k)))
                .map(|(j, k)| {
                    C::new(0.0, 2.0 * PI * (a as f64 * g.x(j) + b as f64 * g.y(k))).exp()
                })
                .collect();
            TwistedField::scalar(g, 0, FormType::Zero, vals)
        };
        let f = mode(1, 0);
        let h = mode(0, 2);
        assert!(inner_l2(&f, &h).unwrap().norm() < 1e-12);
        // positivity
        let ip = inner_l2(&f, &f).unwrap();
        assert!(ip.re > 0.0 && ip.im.abs() < 1e-12);
        // conjugate symmetry
        let fh = inner_l2(&f, &h).unwrap();
        let hf = inner_l2(&h, &f).unwrap();
        assert!((fh - hf.conj()).norm() < 1e-14);
    }

    #[test]
    fn sup_norm_examples() {
        let g = grid();
        let zero = TwistedField::zeros(g, 2, 2, end_twist(&[1, -1]), FormType::Zero);
        assert_eq!(sup_norm(&zero), 0.0);
        let mut ones = zero.clone();
        ones.values.fill(C::ONE);
        assert!((sup_norm(&ones) - 2.0).abs() < 1e-14);
        let scaled = ones.scaled(C::new(0.0, -3.0));
        assert!((sup_norm(&scaled) - 6.0).abs() < 1e-13);
    }

    #[test]
    fn adjoint_and_product_twists() {
        let g = grid();
        let degrees = [2i64, -1];
        let a = TwistedField::zeros(g, 2, 2, end_twist(&degrees), FormType::Zero);
        assert_eq!(a.twist, vec![0, 3, -3, 0]);
        let b = a.adjoint();
        // the End twist pattern is antisymmetric, so it is preserved
        assert_eq!(b.twist, end_twist(&degrees));
        let p = a.matmul(&b).unwrap();
        assert_eq!(p.twist, end_twist(&degrees));
    }
}
