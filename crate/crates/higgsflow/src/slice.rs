//! Critical points, eigen-block decompositions, harmonic slices and
//! flow-limit classification.
//!
//! Critical points here are direct sums of constant-curvature line bundles
//! with constant diagonal Higgs fields, so β = μ(x) is the constant
//! diagonal i⁻¹·diag(λ_j) with λ_j equal to the degrees. End(E) splits
//! into eigen-blocks of ad(iβ): entry (r, c) has eigenvalue λ_r − λ_c.
//!
//! The harmonic space ℍ¹ of a strictly negative block Hom(E_j, E_k)
//! (λ_k < λ_j) is the kernel of the stacked operator L₁L₁* + L₂*L₂ on
//! (0,1)⊕(1,0) data of twist d_k − d_j, where
//!
//!   L₁(u) = (∂̄u, (c_k − c_j)·u·dz),
//!   L₂(a, φ) = ∂̄φ − (c_k − c_j)·a  (the linearised holomorphy equation).
//!
//! On the torus its dimension is d_j − d_k for equal Higgs constants and 0
//! otherwise; a mismatch with the eigensolve count is a hard error.

use crate::bundle::{mod1, Background, LineBundle};
use crate::error::{Error, Result};
use crate::field::TwistedField;
use crate::grid::{FormType, TorusGrid};
use crate::higgs::{
    field_spectrum_mean, grad_ymh, hermitian_moment, holomorphy_residual, HiggsPair, TangentPair,
};
use crate::linalg;
use num_complex::Complex64;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSign {
    Negative,
    Zero,
    Positive,
}

/// Direct sum of Higgs line bundles with its curvature element β and the
/// eigen-block decomposition of End(E).
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub pair: HiggsPair,
    pub higgs_consts: Vec<C>,
    /// β = μ(x), an anti-Hermitian constant diagonal field.
    pub beta: TwistedField,
    /// Eigenvalues of i·β per summand, ascending (equal to the degrees).
    pub spectrum: Vec<f64>,
    /// ad(iβ) sign per matrix entry, row-major.
    pub blocks: Vec<BlockSign>,
    neg_mask: Vec<bool>,
}

impl CriticalPoint {
    pub fn degrees(&self) -> Vec<i64> {
        self.pair.bg.degrees()
    }

    pub fn rank(&self) -> usize {
        self.pair.rank()
    }

    pub fn grid(&self) -> TorusGrid {
        self.pair.grid()
    }

    /// Mask of the strictly negative eigen-block entries.
    pub fn negative_mask(&self) -> &[bool] {
        &self.neg_mask
    }

    pub fn summand(&self, idx: usize) -> LineBundle {
        self.pair.bg.summands[idx]
    }
}

/// Builds the critical point ⊕ (L_{d_j}, c_j·dz). Degrees are sorted
/// ascending together with their constants and holonomies.
pub fn build_critical(
    degrees: &[i64],
    higgs_consts: &[C],
    holonomies: Option<&[[f64; 2]]>,
    grid: TorusGrid,
) -> Result<CriticalPoint> {
    if degrees.is_empty() || degrees.len() != higgs_consts.len() {
        return Err(Error::Config("degrees and Higgs constants must pair up".into()));
    }
    if degrees.len() > crate::smallmat::MAX_RANK {
        return Err(Error::Config("rank > 4 fibers are not supported".into()));
    }
    let mut order: Vec<usize> = (0..degrees.len()).collect();
    order.sort_by_key(|&i| degrees[i]);
    let summands: Vec<LineBundle> = order
        .iter()
        .map(|&i| {
            let hol = holonomies.map(|h| h[i]).unwrap_or([0.0, 0.0]);
            LineBundle::new(degrees[i], hol)
        })
        .collect();
    let consts: Vec<C> = order.iter().map(|&i| higgs_consts[i]).collect();

    let bg = Background::direct_sum(grid, summands);
    let pair = HiggsPair::background_pair(bg, &consts)?;

    let m = hermitian_moment(&pair)?;
    let spectrum: Vec<f64> = order.iter().map(|&i| degrees[i] as f64).collect();
    // critical-point residuals
    let gnorm = grad_ymh(&pair)?.flow_norm();
    if gnorm >= 1e-8 {
        return Err(Error::NotConverged(gnorm));
    }
    let diag = TwistedField::const_diagonal(
        grid,
        &pair.bg.degrees(),
        &spectrum.iter().map(|&l| C::new(l, 0.0)).collect::<Vec<_>>(),
        FormType::Zero,
    );
    let defect = m.sub(&diag)?.sup_norm();
    if defect > 1e-10 {
        return Err(Error::NotConverged(defect));
    }

    let r = spectrum.len();
    let mut blocks = Vec::with_capacity(r * r);
    let mut neg_mask = Vec::with_capacity(r * r);
    for row in 0..r {
        for col in 0..r {
            let gap = spectrum[row] - spectrum[col];
            let sign = if gap < -0.5 {
                BlockSign::Negative
            } else if gap > 0.5 {
                BlockSign::Positive
            } else {
                BlockSign::Zero
            };
            neg_mask.push(sign == BlockSign::Negative);
            blocks.push(sign);
        }
    }

    Ok(CriticalPoint {
        beta: m.scaled(-C::i()),
        pair,
        higgs_consts: consts,
        spectrum,
        blocks,
        neg_mask,
    })
}

/// Orthonormal basis of the hypercohomology ℍ¹(Hom(E_j, E_k)) of a
/// strictly negative block.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    /// Source summand index (higher slope).
    pub source: usize,
    /// Target summand index (lower slope).
    pub target: usize,
    pub degrees: (i64, i64),
    pub consts: (C, C),
    /// Complex dimension.
    pub dim: usize,
    /// Basis tangent pairs, orthonormal for the L² pairing.
    pub basis: Vec<TangentPair>,
    /// Singular values of the kernel cluster (slice-equation residuals).
    pub kernel_sigmas: Vec<f64>,
    /// Largest singular value of the stacked slice operator.
    pub sigma_max: f64,
}

impl HarmonicBasis {
    /// Coordinates of a tangent pair in this basis.
    pub fn coordinates(&self, dx: &TangentPair) -> Result<Vec<C>> {
        self.basis.iter().map(|b| dx.h1_inner(b)).collect()
    }

    /// Tangent pair with the given coordinates.
    pub fn combination(&self, coords: &[C]) -> Result<TangentPair> {
        if coords.len() != self.dim {
            return Err(Error::Shape("coordinate length must match dim ℍ¹".into()));
        }
        let mut out = self.basis[0].scaled(coords[0]);
        for (c, b) in coords.iter().zip(self.basis.iter()).skip(1) {
            out = out.add(&b.scaled(*c))?;
        }
        Ok(out)
    }
}

/// Kernel-count threshold shared by the Dolbeault and slice eigensolves.
pub const KERNEL_REL_TOL: f64 = 1e-6;

pub fn harmonic_h1(x: &CriticalPoint, block: (usize, usize)) -> Result<HarmonicBasis> {
    let (j, k) = block;
    let r = x.rank();
    if j >= r || k >= r {
        return Err(Error::Domain("block indices out of range".into()));
    }
    if !(x.spectrum[k] < x.spectrum[j]) {
        return Err(Error::Domain(
            "harmonic_h1 expects a strictly negative block (λ_target < λ_source)".into(),
        ));
    }
    let grid = x.grid();
    let src = x.summand(j);
    let tgt = x.summand(k);
    let twist = tgt.degree - src.degree;
    let hol = [tgt.holonomy[0] - src.holonomy[0], tgt.holonomy[1] - src.holonomy[1]];
    let dc = x.higgs_consts[k] - x.higgs_consts[j];
    let s = grid.one_form_weight();
    let sites = grid.sites();
    let dim = 2 * sites;

    let deriv = |v: &[C], out: &mut [C], op: crate::bundle::Dolbeault| {
        crate::bundle::scalar_dolbeault(&grid, twist, hol, v, out, op);
    };
    use crate::bundle::Dolbeault::{DBar, Del};

    // H = L₁L₁* + L₂*L₂ on stacked (α, f).
    let mut w = vec![C::ZERO; sites];
    let mut t1 = vec![C::ZERO; sites];
    let mut t2 = vec![C::ZERO; sites];
    let mut t3 = vec![C::ZERO; sites];
    let eig = linalg::hermitian_eigen(dim, |v, out| {
        let (alpha, f) = v.split_at(sites);
        // w = L₁*(α, f) = s(−∂α + conj(Δc)·f)
        deriv(alpha, &mut w, Del);
        for i in 0..sites {
            w[i] = s * (-w[i] + dc.conj() * f[i]);
        }
        // L₁w = (∂̄w, Δc·w)
        deriv(&w, &mut t1, DBar);
        // g₂ = L₂(α, f) = ∂̄f − Δc·α
        deriv(f, &mut t2, DBar);
        for i in 0..sites {
            t2[i] -= dc * alpha[i];
        }
        // L₂*g₂ = (1/s)·(−conj(Δc)·g₂, −∂g₂)
        deriv(&t2, &mut t3, Del);
        let (out_a, out_f) = out.split_at_mut(sites);
        for i in 0..sites {
            out_a[i] = t1[i] - dc.conj() / s * t2[i];
            out_f[i] = dc * w[i] - t3[i] / s;
        }
    })?;

    let sigma_max = eig.values.last().map(|&l| l.max(0.0).sqrt()).unwrap_or(0.0);
    let expected = if dc.norm() < 1e-14 { (src.degree - tgt.degree) as usize } else { 0 };
    let kernel_sigmas: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .take_while(|&sg| sg < KERNEL_REL_TOL * sigma_max)
        .collect();
    // The square discretisation pairs cokernel dimensions with unresolved
    // lattice partners inside the tiny cluster; keep resolved vectors only.
    let cluster: Vec<Vec<C>> = eig.vectors[..kernel_sigmas.len()].to_vec();
    let mut rough_buf = vec![C::ZERO; sites];
    let (smooth, _) = linalg::split_resolved(
        &cluster,
        |v, out| {
            let (alpha, f) = v.split_at(sites);
            let (out_a, out_f) = out.split_at_mut(sites);
            crate::bundle::roughness_apply(&grid, twist, hol, alpha, &mut rough_buf);
            out_a.copy_from_slice(&rough_buf);
            crate::bundle::roughness_apply(&grid, twist, hol, f, &mut rough_buf);
            out_f.copy_from_slice(&rough_buf);
        },
        crate::bundle::RESOLVED_TOL,
    );
    if smooth.len() != expected {
        return Err(Error::HarmonicDimension { found: smooth.len(), expected });
    }

    // Embed the resolved vectors as tangent pairs at entry (row k, col j).
    let norm_scale = (s * grid.cell_measure()).sqrt();
    let mut basis = Vec::with_capacity(expected);
    for v in &smooth {
        let mut da = x.pair.bg.zero_field(FormType::ZeroOne);
        let mut dphi = x.pair.bg.zero_field(FormType::OneZero);
        da.plane_mut(k, j).copy_from_slice(&v[..sites]);
        dphi.plane_mut(k, j).copy_from_slice(&v[sites..]);
        // Deterministic phase: first significant coefficient real positive.
        let lead = v
            .iter()
            .find(|c| c.norm() > 1e-8)
            .copied()
            .unwrap_or(C::ONE);
        let phase = lead.conj() / lead.norm();
        // normalise in the L² pairing (eigenvectors are flat-orthonormal)
        let scale = phase / norm_scale;
        basis.push(TangentPair { da: da.scaled(scale), dphi: dphi.scaled(scale) });
    }

    // Re-orthonormalise against rounding (Gram–Schmidt in the L² pairing).
    for i in 0..basis.len() {
        for l in 0..i {
            let prev = basis[l].clone();
            let c = basis[i].h1_inner(&prev)?;
            let scaled = prev.scaled(c);
            basis[i] = basis[i].sub(&scaled)?;
        }
        let nrm = basis[i].l2_norm();
        basis[i] = basis[i].scaled(C::new(1.0 / nrm, 0.0));
    }

    Ok(HarmonicBasis {
        source: j,
        target: k,
        degrees: (src.degree, tgt.degree),
        consts: (x.higgs_consts[j], x.higgs_consts[k]),
        dim: expected,
        basis,
        kernel_sigmas,
        sigma_max,
    })
}

/// (holomorphy residual of x + dx, orthogonality residual ‖ρ_x†(dx)‖).
pub fn slice_residual(x: &CriticalPoint, dx: &TangentPair) -> Result<(f64, f64)> {
    let y = x.pair.offset(dx, 1.0);
    let hol = holomorphy_residual(&y)?;

    // ρ_x†(da, dφ) = s(∂(da) + [dφ, φ_x†]) as a 0-form field
    let grid = x.grid();
    let s = grid.one_form_weight();
    let mut da0 = dx.da.clone();
    da0.form = FormType::Zero;
    let del_da = crate::bundle::del_coeff_raw(&da0, &x.pair.bg);
    let mut dphi0 = dx.dphi.clone();
    dphi0.form = FormType::Zero;
    let mut phi_adj = x.pair.phi.adjoint();
    phi_adj.form = FormType::Zero;
    let mut rho = del_da;
    rho.form = FormType::Zero;
    let rho = rho.add(&dphi0.commutator(&phi_adj)?)?;
    Ok((hol, s * rho.norm_l2()))
}

/// Projection of dx onto the strictly negative eigen-blocks of ad(iβ).
pub fn negative_component(x: &CriticalPoint, dx: &TangentPair) -> TangentPair {
    dx.masked(x.negative_mask())
}

/// Harder–Narasimhan type read off a flow limit.
#[derive(Debug, Clone, PartialEq)]
pub struct HNType {
    /// Site-averaged spectrum of i·μ, descending.
    pub spectrum: Vec<f64>,
    /// Integer-rounded degrees, descending.
    pub degrees: Vec<i64>,
    /// Multiplicity of each distinct degree, aligned with `distinct`.
    pub multiplicities: Vec<(i64, usize)>,
    pub rounding_error: f64,
}

impl HNType {
    pub fn from_spectrum(mut spectrum: Vec<f64>) -> Result<HNType> {
        spectrum.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let degrees: Vec<i64> = spectrum.iter().map(|&l| l.round() as i64).collect();
        let rounding_error = spectrum
            .iter()
            .zip(degrees.iter())
            .map(|(&l, &d)| (l - d as f64).abs())
            .fold(0.0f64, f64::max);
        if rounding_error >= 0.05 {
            return Err(Error::AmbiguousLimit(rounding_error));
        }
        let mut multiplicities: Vec<(i64, usize)> = Vec::new();
        for &d in &degrees {
            match multiplicities.last_mut() {
                Some((v, c)) if *v == d => *c += 1,
                _ => multiplicities.push((d, 1)),
            }
        }
        Ok(HNType { spectrum, degrees, multiplicities, rounding_error })
    }

    /// HN dominance: every partial sum of `self` (descending) is ≤ the
    /// corresponding partial sum of `other`, with equal totals.
    pub fn dominated_by(&self, other: &HNType) -> bool {
        if self.degrees.len() != other.degrees.len() {
            return false;
        }
        let mut a = 0i64;
        let mut b = 0i64;
        for (x, y) in self.degrees.iter().zip(other.degrees.iter()) {
            a += x;
            b += y;
            if a > b {
                return false;
            }
        }
        a == b
    }
}

/// HN type of a converged pair: the sorted, site-averaged spectrum of
/// i·μ rounded to integers.
pub fn classify_limit(y: &HiggsPair) -> Result<HNType> {
    let gnorm = grad_ymh(y)?.flow_norm();
    if gnorm >= 1e-6 {
        return Err(Error::NotConverged(gnorm));
    }
    HNType::from_spectrum(field_spectrum_mean(&hermitian_moment(y)?))
}

/// Degrees of the graded pieces of the filtration carried by x + dx for
/// dx in the negative slice (ascending slope order).
pub fn filtration_degrees(x: &CriticalPoint, dx: &TangentPair) -> Result<Vec<i64>> {
    let sup = dx.sup_norm();
    let outside = dx.sub(&negative_component(x, dx))?.sup_norm();
    if outside > 1e-8 * (1.0 + sup) {
        return Err(Error::Domain(format!(
            "deformation has a component of size {outside:.3e} outside the negative blocks"
        )));
    }
    let (hol, orth) = slice_residual(x, dx)?;
    let hol_tol = (1e-6f64).max(0.5 * sup * sup);
    if hol > hol_tol || orth > 1e-6 * (1.0 + sup) {
        return Err(Error::Domain(format!(
            "slice residuals ({hol:.3e}, {orth:.3e}) exceed tolerance"
        )));
    }
    Ok(x.degrees())
}

/// Sum of Abel–Jacobi classes with the degree bookkeeping of a
/// modification E(−p₁−…−pₙ) applied to one summand (used by experiment
/// predictions).
pub fn modified_summand(bundle: LineBundle, points: &[[f64; 2]]) -> LineBundle {
    let mut hol = bundle.holonomy;
    for p in points {
        let aj = crate::bundle::abel_jacobi(*p);
        hol[0] = mod1(hol[0] - aj[0]);
        hol[1] = mod1(hol[1] - aj[1]);
    }
    LineBundle::new(bundle.degree - points.len() as i64, hol)
}
