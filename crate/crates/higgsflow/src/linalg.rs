//! Dense Hermitian eigensolves behind the kernel-dimension and harmonic
//! computations, assembled column-by-column from matrix-free operators.

use crate::error::{Error, Result};
use faer::Mat;
use num_complex::Complex64;

type C = Complex64;

/// Run faer single-threaded so results are bit-reproducible regardless of
/// the machine; the thread count can be raised explicitly by the caller.
pub fn set_threads(threads: usize) {
    if threads <= 1 {
        faer::set_global_parallelism(faer::Par::Seq);
    } else {
        faer::set_global_parallelism(faer::Par::rayon(threads));
    }
}

fn to_faer(v: C) -> faer::c64 {
    faer::c64::new(v.re, v.im)
}

fn from_faer(v: faer::c64) -> C {
    C::new(v.re, v.im)
}

/// Assemble the dense matrix of a linear operator on ℂ^dim.
pub fn assemble(dim: usize, mut apply: impl FnMut(&[C], &mut [C])) -> Mat<faer::c64> {
    let mut m = Mat::<faer::c64>::zeros(dim, dim);
    let mut e = vec![C::ZERO; dim];
    let mut out = vec![C::ZERO; dim];
    for col in 0..dim {
        e[col] = C::ONE;
        apply(&e, &mut out);
        e[col] = C::ZERO;
        for (row, &v) in out.iter().enumerate() {
            m[(row, col)] = to_faer(v);
        }
    }
    m
}

pub struct HermEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, matching `values`.
    pub vectors: Vec<Vec<C>>,
}

/// Eigendecomposition of a Hermitian PSD operator given matrix-free.
pub fn hermitian_eigen(dim: usize, apply: impl FnMut(&[C], &mut [C])) -> Result<HermEigen> {
    let m = assemble(dim, apply);
    hermitian_eigen_dense(&m)
}

pub fn hermitian_eigen_dense(m: &Mat<faer::c64>) -> Result<HermEigen> {
    let dim = m.nrows();
    let eig = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Backend(format!("self_adjoint_eigen: {e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let values: Vec<f64> = (0..dim).map(|i| s[i].re).collect();
    let vectors: Vec<Vec<C>> =
        (0..dim).map(|i| (0..dim).map(|r| from_faer(u[(r, i)])).collect()).collect();
    Ok(HermEigen { values, vectors })
}

/// Singular values (descending) of an operator A via the Hermitian
/// eigenvalues of A†A.
pub fn singular_values(
    dim: usize,
    mut apply: impl FnMut(&[C], &mut [C]),
    mut apply_adj: impl FnMut(&[C], &mut [C]),
    range_dim: usize,
) -> Result<Vec<f64>> {
    let mut mid = vec![C::ZERO; range_dim];
    let gram = assemble(dim, |v, out| {
        apply(v, &mut mid);
        apply_adj(&mid, out);
    });
    let eig = hermitian_eigen_dense(&gram)?;
    let mut svals: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    svals.reverse();
    Ok(svals)
}

/// Number of singular values below `rel_tol`·(largest singular value).
pub fn kernel_count(svals: &[f64], rel_tol: f64) -> usize {
    let max = svals.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return svals.len();
    }
    svals.iter().filter(|&&s| s < rel_tol * max).count()
}

/// Splits a near-kernel cluster into resolved and unresolved directions by
/// diagonalising the roughness quadratic form on the cluster. A square
/// discretisation pairs every cokernel dimension with a spurious kernel
/// vector living at the Brillouin-zone corners; diagonalising ⟨R·, ·⟩
/// separates those from honest smooth kernel vectors by orders of
/// magnitude. Returns the resolved vectors and their roughness values.
pub fn split_resolved(
    vectors: &[Vec<C>],
    mut rough_apply: impl FnMut(&[C], &mut [C]),
    tol: f64,
) -> (Vec<Vec<C>>, Vec<f64>) {
    let k = vectors.len();
    if k == 0 {
        return (vec![], vec![]);
    }
    let dim = vectors[0].len();
    let mut rv: Vec<Vec<C>> = Vec::with_capacity(k);
    for v in vectors {
        let mut out = vec![C::ZERO; dim];
        rough_apply(v, &mut out);
        rv.push(out);
    }
    let mut s = Mat::<faer::c64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut acc = C::ZERO;
            for (a, b) in rv[j].iter().zip(vectors[i].iter()) {
                acc += a * b.conj();
            }
            s[(i, j)] = to_faer(acc);
        }
    }
    let eig = match hermitian_eigen_dense(&s) {
        Ok(e) => e,
        Err(_) => return (vec![], vec![]),
    };
    let mut smooth = Vec::new();
    let mut roughness = Vec::new();
    for (idx, &lam) in eig.values.iter().enumerate() {
        if lam < tol {
            let mut v = vec![C::ZERO; dim];
            for (c, base) in eig.vectors[idx].iter().zip(vectors.iter()) {
                for (vo, vb) in v.iter_mut().zip(base.iter()) {
                    *vo += c * vb;
                }
            }
            smooth.push(v);
            roughness.push(lam.max(0.0));
        }
    }
    (smooth, roughness)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_small_hermitian() {
        // 2×2 with eigenvalues 1 and 3
        let a = [
            [C::new(2.0, 0.0), C::new(0.0, 1.0)],
            [C::new(0.0, -1.0), C::new(2.0, 0.0)],
        ];
        let eig = hermitian_eigen(2, |v, out| {
            for i in 0..2 {
                out[i] = a[i][0] * v[0] + a[i][1] * v[1];
            }
        })
        .unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-12);
        assert!((eig.values[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_count_thresholds() {
        assert_eq!(kernel_count(&[1.0, 0.5, 1e-9, 2e-9], 1e-6), 2);
        assert_eq!(kernel_count(&[1.0, 0.5], 1e-6), 0);
    }
}
