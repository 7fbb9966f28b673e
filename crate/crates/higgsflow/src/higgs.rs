//! Higgs pairs, gauge action, curvature, moment map, energy and gradients.
//!
//! A Higgs pair is a deformation a ∈ Ω^{0,1}(End E) of the background
//! Dolbeault operator together with a Higgs field φ ∈ Ω^{1,0}(End E).
//! The Chern connection is taken in the fixed unitary trivialisation, so
//! the unitary connection form is a − a* and
//!
//!   i⋆F_A = diag(d_j) + s·(∂α + (∂α)† + [α, α†]),   s = Im τ/π,
//!
//! where α is the dz̄-coefficient of a. The moment map is
//! μ = ⋆(F_A + [φ, φ*]); critical points have i·μ constant with spectrum
//! equal to the summand degrees. The downward flow is generated by
//! ∂g/∂t·g⁻¹ = −i·μ(g·y₀), and with the tangent metric used here
//! (4× the real L² pairing) that flow is exactly dy/dt = −grad YMH.

use crate::bundle::{dbar_coeff_raw, del_coeff_raw, Background};
use crate::error::{Error, Result};
use crate::field::TwistedField;
use crate::grid::{FormType, TorusGrid};
use num_complex::Complex64;

type C = Complex64;

/// A deformation pair (a, φ) over a fixed direct-sum background.
#[derive(Debug, Clone, PartialEq)]
pub struct HiggsPair {
    pub bg: Background,
    /// (0,1)-form End-valued deformation of ∂̄.
    pub a: TwistedField,
    /// (1,0)-form End-valued Higgs field.
    pub phi: TwistedField,
}

/// Tangent deformation (δa, δφ) at a Higgs pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPair {
    pub da: TwistedField,
    pub dphi: TwistedField,
}

/// Pointwise invertible End-valued 0-form.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeField(pub TwistedField);

/// Pointwise positive-definite Hermitian End-valued 0-form.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField(pub TwistedField);

impl HiggsPair {
    pub fn new(bg: Background, a: TwistedField, phi: TwistedField) -> Result<Self> {
        if a.form != FormType::ZeroOne || phi.form != FormType::OneZero {
            return Err(Error::Shape("HiggsPair expects a (0,1)-form and a (1,0)-form".into()));
        }
        if a.twist != bg.entry_twist || phi.twist != bg.entry_twist {
            return Err(Error::Twist("pair twists must match the background degrees".into()));
        }
        Ok(HiggsPair { bg, a, phi })
    }

    /// Undeformed pair with a diagonal constant Higgs field.
    pub fn background_pair(bg: Background, higgs_consts: &[C]) -> Result<Self> {
        let degrees = bg.degrees();
        if higgs_consts.len() != degrees.len() {
            return Err(Error::Shape("one Higgs constant per summand".into()));
        }
        let a = bg.zero_field(FormType::ZeroOne);
        let phi = TwistedField::const_diagonal(bg.grid, &degrees, higgs_consts, FormType::OneZero);
        HiggsPair::new(bg, a, phi)
    }

    pub fn grid(&self) -> TorusGrid {
        self.bg.grid
    }

    pub fn rank(&self) -> usize {
        self.bg.rows
    }

    /// y + t·δy.
    pub fn offset(&self, dx: &TangentPair, t: f64) -> HiggsPair {
        let mut out = self.clone();
        out.a.axpy(C::new(t, 0.0), &dx.da);
        out.phi.axpy(C::new(t, 0.0), &dx.dphi);
        out
    }

    /// Difference self − other as a tangent pair.
    pub fn diff(&self, other: &HiggsPair) -> Result<TangentPair> {
        Ok(TangentPair { da: self.a.sub(&other.a)?, dphi: self.phi.sub(&other.phi)? })
    }
}

impl TangentPair {
    pub fn zeros_like(y: &HiggsPair) -> Self {
        TangentPair {
            da: y.bg.zero_field(FormType::ZeroOne),
            dphi: y.bg.zero_field(FormType::OneZero),
        }
    }

    /// Real inner product of the flow metric: 4·Re(⟨da,da'⟩ + ⟨dφ,dφ'⟩).
    pub fn flow_inner(&self, other: &TangentPair) -> Result<f64> {
        let ip = self.da.inner_l2(&other.da)? + self.dphi.inner_l2(&other.dphi)?;
        Ok(4.0 * ip.re)
    }

    pub fn flow_norm(&self) -> f64 {
        let n2 = 4.0 * (self.da.norm_l2().powi(2) + self.dphi.norm_l2().powi(2));
        n2.sqrt()
    }

    /// Hermitian L² product used for ℍ¹ coordinates (complex-valued).
    pub fn h1_inner(&self, other: &TangentPair) -> Result<C> {
        Ok(self.da.inner_l2(&other.da)? + self.dphi.inner_l2(&other.dphi)?)
    }

    pub fn l2_norm(&self) -> f64 {
        (self.da.norm_l2().powi(2) + self.dphi.norm_l2().powi(2)).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.da.sup_norm().max(self.dphi.sup_norm())
    }

    pub fn scaled(&self, s: C) -> TangentPair {
        TangentPair { da: self.da.scaled(s), dphi: self.dphi.scaled(s) }
    }

    pub fn add(&self, other: &TangentPair) -> Result<TangentPair> {
        Ok(TangentPair { da: self.da.add(&other.da)?, dphi: self.dphi.add(&other.dphi)? })
    }

    pub fn sub(&self, other: &TangentPair) -> Result<TangentPair> {
        Ok(TangentPair { da: self.da.sub(&other.da)?, dphi: self.dphi.sub(&other.dphi)? })
    }

    /// Entrywise block mask (shared between da and dφ).
    pub fn masked(&self, mask: &[bool]) -> TangentPair {
        TangentPair { da: self.da.masked(mask), dphi: self.dphi.masked(mask) }
    }
}

fn with_form(f: &TwistedField, form: FormType) -> TwistedField {
    let mut out = f.clone();
    out.form = form;
    out
}

/// i·μ(y) as a pointwise Hermitian 0-form field; the workhorse behind the
/// moment map, curvature, energy and the flow generator.
pub fn hermitian_moment(y: &HiggsPair) -> Result<TwistedField> {
    let grid = y.grid();
    let s = grid.one_form_weight();
    let alpha = with_form(&y.a, FormType::Zero);
    let f = with_form(&y.phi, FormType::Zero);

    let p = with_form(&del_coeff_raw(&alpha, &y.bg), FormType::Zero);
    let mut m = p.add(&p.adjoint())?;
    m = m.add(&alpha.commutator(&alpha.adjoint())?)?;
    m = m.add(&f.commutator(&f.adjoint())?)?;
    let mut m = m.scaled(C::new(s, 0.0));

    let degrees = y.bg.degrees();
    let sites = grid.sites();
    for (r, &d) in degrees.iter().enumerate() {
        let base = (r * y.bg.cols + r) * sites;
        for v in &mut m.values[base..base + sites] {
            *v += C::new(d as f64, 0.0);
        }
    }
    Ok(m)
}

/// Moment map μ(y) = ⋆(F_A + [φ, φ*]); i·μ is pointwise Hermitian.
pub fn moment_map(y: &HiggsPair) -> Result<TwistedField> {
    Ok(hermitian_moment(y)?.scaled(-C::i()))
}

/// Curvature F_A of the Chern connection, as a 2-form (dvol coefficient).
pub fn chern_curvature(y: &HiggsPair) -> Result<TwistedField> {
    let s = y.grid().one_form_weight();
    let m = hermitian_moment(y)?;
    let f = with_form(&y.phi, FormType::Zero);
    let higgs = f.commutator(&f.adjoint())?.scaled(C::new(s, 0.0));
    let mut out = m.sub(&higgs)?.scaled(-C::i());
    out.form = FormType::Two;
    Ok(out)
}

/// YMH(y) = ‖F_A + [φ, φ*]‖²_{L²} = ∫ |i⋆(F + [φ,φ*])|² dvol.
pub fn ymh_energy(y: &HiggsPair) -> Result<f64> {
    let m = hermitian_moment(y)?;
    Ok(m.norm_l2().powi(2))
}

/// Sorted eigenvalues of i·μ at every site, averaged over the grid.
pub fn moment_spectrum(y: &HiggsPair) -> Result<Vec<f64>> {
    let m = hermitian_moment(y)?;
    Ok(field_spectrum_mean(&m))
}

/// Site-averaged ascending spectrum of a Hermitian 0-form field.
pub fn field_spectrum_mean(m: &TwistedField) -> Vec<f64> {
    let sites = m.grid.sites();
    let r = m.rows;
    let mut mean = vec![0.0f64; r];
    for s in 0..sites {
        let vals = m.site_matrix(s).herm_eigenvalues();
        for (i, acc) in mean.iter_mut().enumerate() {
            *acc += vals[i];
        }
    }
    for v in mean.iter_mut() {
        *v /= sites as f64;
    }
    mean
}

/// Descent direction of YMH in the flow metric: dy/dt = −grad along the
/// gauge-generated flow.
pub fn grad_ymh(y: &HiggsPair) -> Result<TangentPair> {
    let m = hermitian_moment(y)?;
    let alpha = with_form(&y.a, FormType::Zero);
    let f = with_form(&y.phi, FormType::Zero);
    // covariant ∂̄_A M = ∂̄M + [α, M]
    let dbar_m = with_form(&dbar_coeff_raw(&m, &y.bg), FormType::Zero).add(&alpha.commutator(&m)?)?;
    let da = with_form(&dbar_m.scaled(-C::ONE), FormType::ZeroOne);
    let dphi = with_form(&m.commutator(&f)?, FormType::OneZero);
    Ok(TangentPair { da, dphi })
}

pub fn grad_norm(y: &HiggsPair) -> Result<f64> {
    Ok(grad_ymh(y)?.flow_norm())
}

/// The same descent direction computed through the unitary-pair variables
/// (d_A, ψ) with ψ = φ + φ*: curvature from the real connection form
/// a − a*, the moment from F + ψ∧ψ, and the φ-motion from ⋆[ψ, ⋆(F+ψ∧ψ)].
/// Must agree with [`grad_ymh`].
pub fn grad_ymh_unitary(y: &HiggsPair) -> Result<TangentPair> {
    let grid = y.grid();
    let wedge = grid.wedge_to_vol();
    // Connection form components: A^{1,0} = −a*, A^{0,1} = a.
    let q = with_form(&y.a, FormType::Zero);
    let p = with_form(&y.a.adjoint(), FormType::Zero).scaled(-C::ONE);
    // F = F_bg + dA + A∧A, coefficient of dz∧dz̄: ∂Q − ∂̄P + [P, Q]
    let dq = with_form(&del_coeff_raw(&q, &y.bg), FormType::Zero);
    let dp = with_form(&dbar_coeff_raw(&p, &y.bg), FormType::Zero);
    let mut f_wedge = dq.sub(&dp)?.add(&p.commutator(&q)?)?;
    // ψ∧ψ coefficient of dz∧dz̄ for ψ = f dz + f† dz̄ is [f, f†]
    let f = with_form(&y.phi, FormType::Zero);
    f_wedge = f_wedge.add(&f.commutator(&f.adjoint())?)?;
    // μ = ⋆(F + ψ∧ψ): wedge part to dvol, plus the constant background part
    let mut mu = f_wedge.scaled(wedge);
    let degrees = y.bg.degrees();
    let sites = grid.sites();
    for (r, &d) in degrees.iter().enumerate() {
        let base = (r * y.bg.cols + r) * sites;
        for v in &mut mu.values[base..base + sites] {
            *v += C::new(0.0, -(d as f64));
        }
    }
    // A-motion: ∂A/∂t = −d_A^*(F + ψ∧ψ); the (0,1) part is i·∂̄_A μ,
    // so the descent direction is −i·(∂̄μ + [Q, μ]).
    let dbar_mu = with_form(&dbar_coeff_raw(&mu, &y.bg), FormType::Zero).add(&q.commutator(&mu)?)?;
    let da = with_form(&dbar_mu.scaled(-C::i()), FormType::ZeroOne);
    // ψ-motion: the dz-component of ⋆[ψ, μ] is −i[f, μ]; that is the
    // descent direction for φ in this orientation.
    let dphi = with_form(&f.commutator(&mu)?.scaled(-C::i()), FormType::OneZero);
    Ok(TangentPair { da, dphi })
}

/// g·(∂̄_A, φ) = (g ∂̄_A g⁻¹, g φ g⁻¹).
pub fn gauge_act(g: &GaugeField, y: &HiggsPair) -> Result<HiggsPair> {
    let ginv = g.inverse()?;
    let alpha = with_form(&y.a, FormType::Zero);
    let f = with_form(&y.phi, FormType::Zero);
    let dbar_g = with_form(&dbar_coeff_raw(&g.0, &y.bg), FormType::Zero);
    // a' = g a g⁻¹ − (∂̄g) g⁻¹
    let a_new = g.0.matmul(&alpha)?.matmul(&ginv.0)?.sub(&dbar_g.matmul(&ginv.0)?)?;
    let phi_new = g.0.matmul(&f)?.matmul(&ginv.0)?;
    HiggsPair::new(y.bg.clone(), with_form(&a_new, FormType::ZeroOne), with_form(&phi_new, FormType::OneZero))
}

/// ‖∂̄_A φ‖_{L²}: membership test for the space of Higgs bundles.
pub fn holomorphy_residual(y: &HiggsPair) -> Result<f64> {
    Ok(holomorphy_defect(y)?.norm_l2())
}

/// ∂̄_A φ as a 2-form field.
pub fn holomorphy_defect(y: &HiggsPair) -> Result<TwistedField> {
    let grid = y.grid();
    let alpha = with_form(&y.a, FormType::Zero);
    let f = with_form(&y.phi, FormType::Zero);
    // ∂̄(f dz) + [a, φ] = (∂̄f + [α, f])·dz̄∧dz, as a dvol coefficient
    let coeff = with_form(&dbar_coeff_raw(&f, &y.bg), FormType::Zero).add(&alpha.commutator(&f)?)?;
    let mut out = coeff.scaled(-grid.wedge_to_vol());
    out.form = FormType::Two;
    Ok(out)
}

impl GaugeField {
    pub fn identity(bg: &Background) -> Self {
        GaugeField(TwistedField::identity(bg.grid, &bg.degrees()))
    }

    /// exp(u) pointwise.
    pub fn exponential(u: &TwistedField) -> Self {
        let mut out = u.clone();
        let sites = u.grid.sites();
        for s in 0..sites {
            let m = u.site_matrix(s).exp();
            out.set_site_matrix(s, &m);
        }
        GaugeField(out)
    }

    pub fn inverse(&self) -> Result<GaugeField> {
        let sites = self.0.grid.sites();
        let mut out = self.0.clone();
        for s in 0..sites {
            let m = self.0.site_matrix(s);
            let scale = m.frobenius2().sqrt().max(1.0);
            let det = m.det();
            if det.norm() < 1e-13 * scale.powi(m.d as i32) {
                return Err(Error::SingularGauge { site: s, det: det.norm() });
            }
            let inv = m.inverse().ok_or(Error::SingularGauge { site: s, det: det.norm() })?;
            out.set_site_matrix(s, &inv);
        }
        // inverse of a twist-consistent matrix keeps the End pattern
        out.twist = self.0.twist.clone();
        Ok(GaugeField(out))
    }

    pub fn compose(&self, rhs: &GaugeField) -> Result<GaugeField> {
        Ok(GaugeField(self.0.matmul(&rhs.0)?))
    }

    pub fn adjoint(&self) -> GaugeField {
        GaugeField(self.0.adjoint())
    }

    /// Change of metric h = g*g.
    pub fn metric(&self) -> Result<MetricField> {
        Ok(MetricField(self.0.adjoint().matmul(&self.0)?))
    }

    pub fn unitarity_defect(&self) -> Result<f64> {
        let h = self.metric()?;
        let id = TwistedField::identity(self.0.grid, &vec![0; self.0.rows]);
        let mut diff = h.0.clone();
        for (v, w) in diff.values.iter_mut().zip(id.values.iter()) {
            *v -= w;
        }
        Ok(diff.sup_norm())
    }
}

impl MetricField {
    /// Pointwise σ(h) = Tr h + Tr h⁻¹ − 2·rank and its supremum.
    pub fn sigma(&self) -> Result<(Vec<f64>, f64)> {
        let herm_defect = self.0.hermiticity_defect();
        if herm_defect > 1e-10 * (1.0 + self.0.sup_norm()) {
            return Err(Error::Metric(herm_defect));
        }
        let sites = self.0.grid.sites();
        let r = self.0.rows;
        let mut vals = Vec::with_capacity(sites);
        let mut sup = 0.0f64;
        for s in 0..sites {
            let m = self.0.site_matrix(s);
            let eigs = m.herm_eigenvalues();
            let mut sig = -2.0 * r as f64;
            for &l in &eigs[..r] {
                if l <= 0.0 {
                    return Err(Error::Metric(l));
                }
                sig += l + 1.0 / l;
            }
            vals.push(sig);
            sup = sup.max(sig);
        }
        Ok((vals, sup))
    }

    /// σ of the relative metric h_1 h_2⁻¹ (pointwise similarity-invariant
    /// combination Tr(h₁h₂⁻¹) + Tr(h₂h₁⁻¹) − 2r).
    pub fn sigma_relative(&self, other: &MetricField) -> Result<f64> {
        let sites = self.0.grid.sites();
        let r = self.0.rows;
        let mut sup = f64::NEG_INFINITY;
        for s in 0..sites {
            let h1 = self.0.site_matrix(s);
            let h2 = other.0.site_matrix(s);
            let h2inv = h2.inverse().ok_or(Error::Metric(0.0))?;
            let h1inv = h1.inverse().ok_or(Error::Metric(0.0))?;
            let sig = (h1.mul(&h2inv).trace() + h2.mul(&h1inv).trace()).re - 2.0 * r as f64;
            sup = sup.max(sig);
        }
        Ok(sup)
    }
}

/// Spec-level operation: σ distance data of a metric.
pub fn sigma_of(h: &MetricField) -> Result<(Vec<f64>, f64)> {
    h.sigma()
}

/// Gauge-invariant coefficients of the characteristic polynomial of φ:
/// (tr φ, det φ) integrated over the torus (both are constants for
/// holomorphic pairs; conserved along the flow).
pub fn char_poly_invariants(y: &HiggsPair) -> (C, C) {
    let sites = y.grid().sites();
    let mut tr = C::ZERO;
    let mut det = C::ZERO;
    for s in 0..sites {
        let m = y.phi.site_matrix(s);
        tr += m.trace();
        det += m.det();
    }
    (tr / sites as f64, det / sites as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::LineBundle;
    use std::f64::consts::PI;

    fn simple_pair(degrees: &[i64], consts: &[C]) -> HiggsPair {
        let grid = TorusGrid::new(16, C::i()).unwrap();
        let bundles = degrees.iter().map(|&d| LineBundle::trivial(d)).collect();
        let bg = Background::direct_sum(grid, bundles);
        HiggsPair::background_pair(bg, consts).unwrap()
    }

    #[test]
    fn critical_moment_spectrum_equals_degrees() {
        let y = simple_pair(&[1, -1], &[C::new(0.25, 0.0); 2].to_vec());
        let m = hermitian_moment(&y).unwrap();
        assert!(m.hermiticity_defect() < 1e-12);
        let spec = field_spectrum_mean(&m);
        assert!((spec[0] + 1.0).abs() < 1e-12);
        assert!((spec[1] - 1.0).abs() < 1e-12);
        // flat pair has zero moment
        let y0 = simple_pair(&[0], &[C::ZERO]);
        assert!(hermitian_moment(&y0).unwrap().sup_norm() < 1e-13);
        assert!(ymh_energy(&y0).unwrap() < 1e-26);
    }

    #[test]
    fn critical_energy_matches_constant_spectrum_integral() {
        let y = simple_pair(&[1, -1], &[C::new(0.25, 0.0); 2].to_vec());
        let e = ymh_energy(&y).unwrap();
        assert!((e - 4.0 * PI).abs() < 1e-9 * 4.0 * PI);
        let y = simple_pair(&[2, -2], &[C::new(0.1, 0.3); 2].to_vec());
        let e = ymh_energy(&y).unwrap();
        assert!((e - 16.0 * PI).abs() < 1e-9 * 16.0 * PI);
        // gradient vanishes at the critical point
        assert!(grad_norm(&y).unwrap() < 1e-10);
    }

    #[test]
    fn gauge_action_identity_and_roundtrip() {
        let y = simple_pair(&[1, -1], &[C::new(0.25, 0.0); 2].to_vec());
        let id = GaugeField::identity(&y.bg);
        let y2 = gauge_act(&id, &y).unwrap();
        assert!(y2.diff(&y).unwrap().sup_norm() < 1e-14);

        // exp(u) then its inverse: exact for constant gauge transformations
        let mut u = y.bg.zero_field(FormType::Zero);
        let sites = u.grid.sites();
        for s in 0..sites {
            let mut m = crate::smallmat::SmallMat::zeros(2);
            m[(0, 0)] = C::new(0.08, 0.03);
            m[(1, 1)] = C::new(-0.05, 0.06);
            m[(0, 1)] = C::new(0.0, 0.0);
            u.set_site_matrix(s, &m);
        }
        let g = GaugeField::exponential(&u);
        let ginv = g.inverse().unwrap();
        let there = gauge_act(&g, &y).unwrap();
        let back = gauge_act(&ginv, &there).unwrap();
        assert!(back.diff(&y).unwrap().sup_norm() < 1e-10);

        // for site-dependent g the round trip closes at stencil order
        let mut u = y.bg.zero_field(FormType::Zero);
        for s in 0..sites {
            let x = (s / u.grid.n) as f64 / u.grid.n as f64;
            let mut m = crate::smallmat::SmallMat::zeros(2);
            m[(0, 0)] = C::new(0.02 * (2.0 * PI * x).cos(), 0.01);
            m[(1, 1)] = C::new(-0.015, 0.02 * (2.0 * PI * x).sin());
            u.set_site_matrix(s, &m);
        }
        let g = GaugeField::exponential(&u);
        let ginv = g.inverse().unwrap();
        let back = gauge_act(&ginv, &gauge_act(&g, &y).unwrap()).unwrap();
        // discrete Leibniz defect of the eighth-order stencil at n = 16
        assert!(back.diff(&y).unwrap().sup_norm() < 1e-6);
    }

    #[test]
    fn sigma_examples() {
        let y = simple_pair(&[1, -1], &[C::new(0.25, 0.0); 2].to_vec());
        let id = GaugeField::identity(&y.bg);
        let (vals, sup) = sigma_of(&id.metric().unwrap()).unwrap();
        assert!(sup.abs() < 1e-12 && vals.iter().all(|v| v.abs() < 1e-12));

        // h = diag(2, 1/2) constant: σ = 2 + 1/2 + 1/2 + 2 − 4 = 1
        let mut hfield = TwistedField::identity(y.grid(), &[1, -1]);
        let sites = y.grid().sites();
        for s in 0..sites {
            let mut m = crate::smallmat::SmallMat::zeros(2);
            m[(0, 0)] = C::new(2.0, 0.0);
            m[(1, 1)] = C::new(0.5, 0.0);
            hfield.set_site_matrix(s, &m);
        }
        let h = MetricField(hfield);
        let (_, sup) = sigma_of(&h).unwrap();
        assert!((sup - 1.0).abs() < 1e-12);
        // σ(h) = σ(h⁻¹)
        let mut inv_field = h.0.clone();
        for s in 0..sites {
            let m = h.0.site_matrix(s).inverse().unwrap();
            inv_field.set_site_matrix(s, &m);
        }
        let (_, sup_inv) = sigma_of(&MetricField(inv_field)).unwrap();
        assert!((sup - sup_inv).abs() < 1e-12);
        // non-positive-definite h errors
        let mut bad_field = h.0.clone();
        for s in 0..sites {
            let mut m = crate::smallmat::SmallMat::zeros(2);
            m[(0, 0)] = C::new(-1.0, 0.0);
            m[(1, 1)] = C::new(1.0, 0.0);
            bad_field.set_site_matrix(s, &m);
        }
        assert!(sigma_of(&MetricField(bad_field)).is_err());
    }

    #[test]
    fn unitary_gauge_preserves_energy_and_moment_spectrum() {
        let y = simple_pair(&[1, -1], &[C::new(0.25, 0.0); 2].to_vec());
        // anti-Hermitian generator → unitary gauge transformation
        let mut u = y.bg.zero_field(FormType::Zero);
        let sites = u.grid.sites();
        let n = u.grid.n;
        for j in 0..n {
            for k in 0..n {
                let s = j * n + k;
                let (x, yy) = (j as f64 / n as f64, k as f64 / n as f64);
                let mut m = crate::smallmat::SmallMat::zeros(2);
                m[(0, 0)] = C::new(0.0, 0.05 * (2.0 * PI * x).cos());
                m[(1, 1)] = C::new(0.0, -0.04 * (2.0 * PI * yy).sin());
                u.set_site_matrix(s, &m);
            }
        }
        let g = GaugeField::exponential(&u);
        assert!(g.unitarity_defect().unwrap() < 1e-12);
        let y2 = gauge_act(&g, &y).unwrap();
        let e1 = ymh_energy(&y).unwrap();
        let e2 = ymh_energy(&y2).unwrap();
        assert!((e1 - e2).abs() < 1e-10 * (1.0 + e1));
        let s1 = moment_spectrum(&y).unwrap();
        let s2 = moment_spectrum(&y2).unwrap();
        for (a, b) in s1.iter().zip(s2.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_and_det_of_phi_are_gauge_invariant() {
        let y = simple_pair(&[2, -2], &[C::new(0.3, 0.1), C::new(0.3, 0.1)]);
        let (tr0, det0) = char_poly_invariants(&y);
        let mut u = y.bg.zero_field(FormType::Zero);
        for s in 0..u.grid.sites() {
            let mut m = crate::smallmat::SmallMat::zeros(2);
            m[(0, 0)] = C::new(0.1, -0.05);
            m[(1, 1)] = C::new(-0.03, 0.04);
            u.set_site_matrix(s, &m);
        }
        let g = GaugeField::exponential(&u);
        let y2 = gauge_act(&g, &y).unwrap();
        let (tr1, det1) = char_poly_invariants(&y2);
        assert!((tr0 - tr1).norm() < 1e-12);
        assert!((det0 - det1).norm() < 1e-12);
    }
}
