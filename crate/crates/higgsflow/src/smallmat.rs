//! Fiberwise linear algebra on small complex matrices (rank ≤ 4).
//!
//! Everything here operates on a single fiber of an End-valued field.
//! Hermitian eigenvalues use the closed form for 2×2 and cyclic Jacobi
//! sweeps above that; both are deterministic.

use num_complex::Complex64;

pub const MAX_RANK: usize = 4;

type C = Complex64;

/// Dense d×d complex matrix, d ≤ 4, row-major in a fixed-size buffer.
#[derive(Clone, Copy, Debug)]
pub struct SmallMat {
    pub d: usize,
    pub a: [C; MAX_RANK * MAX_RANK],
}

impl SmallMat {
    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1 && d <= MAX_RANK);
        SmallMat { d, a: [C::ZERO; MAX_RANK * MAX_RANK] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m[(i, i)] = C::ONE;
        }
        m
    }

    pub fn mul(&self, rhs: &SmallMat) -> SmallMat {
        debug_assert_eq!(self.d, rhs.d);
        let d = self.d;
        let mut out = SmallMat::zeros(d);
        for i in 0..d {
            for l in 0..d {
                let s = self[(i, l)];
                if s == C::ZERO {
                    continue;
                }
                for j in 0..d {
                    out[(i, j)] += s * rhs[(l, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &SmallMat) -> SmallMat {
        let mut out = *self;
        for i in 0..self.d * MAX_RANK {
            out.a[i] += rhs.a[i];
        }
        out
    }

    pub fn sub(&self, rhs: &SmallMat) -> SmallMat {
        let mut out = *self;
        for i in 0..self.d * MAX_RANK {
            out.a[i] -= rhs.a[i];
        }
        out
    }

    pub fn scale(&self, s: C) -> SmallMat {
        let mut out = *self;
        for v in out.a.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn adjoint(&self) -> SmallMat {
        let d = self.d;
        let mut out = SmallMat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C {
        (0..self.d).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius2(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                s += self[(i, j)].norm_sqr();
            }
        }
        s
    }

    pub fn det(&self) -> C {
        match self.d {
            1 => self[(0, 0)],
            2 => self[(0, 0)] * self[(1, 1)] - self[(0, 1)] * self[(1, 0)],
            _ => {
                // LU with partial pivoting.
                let d = self.d;
                let mut m = *self;
                let mut det = C::ONE;
                for col in 0..d {
                    let mut piv = col;
                    let mut best = m[(col, col)].norm_sqr();
                    for r in col + 1..d {
                        let v = m[(r, col)].norm_sqr();
                        if v > best {
                            best = v;
                            piv = r;
                        }
                    }
                    if best == 0.0 {
                        return C::ZERO;
                    }
                    if piv != col {
                        for j in 0..d {
                            let t = m[(col, j)];
                            m[(col, j)] = m[(piv, j)];
                            m[(piv, j)] = t;
                        }
                        det = -det;
                    }
                    det *= m[(col, col)];
                    for r in col + 1..d {
                        let f = m[(r, col)] / m[(col, col)];
                        for j in col..d {
                            let sub = f * m[(col, j)];
                            m[(r, j)] -= sub;
                        }
                    }
                }
                det
            }
        }
    }

    /// Inverse by Gauss-Jordan with partial pivoting; `None` when singular.
    pub fn inverse(&self) -> Option<SmallMat> {
        let d = self.d;
        if d == 1 {
            let v = self[(0, 0)];
            if v.norm_sqr() == 0.0 {
                return None;
            }
            let mut out = SmallMat::zeros(1);
            out[(0, 0)] = C::ONE / v;
            return Some(out);
        }
        let mut m = *self;
        let mut inv = SmallMat::identity(d);
        for col in 0..d {
            let mut piv = col;
            let mut best = m[(col, col)].norm_sqr();
            for r in col + 1..d {
                let v = m[(r, col)].norm_sqr();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return None;
            }
            if piv != col {
                for j in 0..d {
                    m.a.swap(col * MAX_RANK + j, piv * MAX_RANK + j);
                    inv.a.swap(col * MAX_RANK + j, piv * MAX_RANK + j);
                }
            }
            let f = C::ONE / m[(col, col)];
            for j in 0..d {
                m[(col, j)] *= f;
                inv[(col, j)] *= f;
            }
            for r in 0..d {
                if r == col {
                    continue;
                }
                let f = m[(r, col)];
                if f == C::ZERO {
                    continue;
                }
                for j in 0..d {
                    let (ms, is) = (f * m[(col, j)], f * inv[(col, j)]);
                    m[(r, j)] -= ms;
                    inv[(r, j)] -= is;
                }
            }
        }
        Some(inv)
    }

    /// Matrix exponential by scaling and squaring with a plain series.
    pub fn exp(&self) -> SmallMat {
        let norm = self.frobenius2().sqrt();
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as usize } else { 0 };
        let x = self.scale(C::new(1.0 / (1u64 << squarings) as f64, 0.0));
        let mut term = SmallMat::identity(self.d);
        let mut sum = term;
        for k in 1..24 {
            term = term.mul(&x).scale(C::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
            if term.frobenius2() < 1e-34 {
                break;
            }
        }
        let mut out = sum;
        for _ in 0..squarings {
            out = out.mul(&out);
        }
        out
    }

    /// Principal logarithm for matrices near the identity (‖M − I‖ < 1).
    pub fn log_near_identity(&self) -> SmallMat {
        // Inverse scaling by square roots would be safer far from I, but all
        // callers pass plaquette-size matrices.
        let x = self.sub(&SmallMat::identity(self.d));
        let mut term = SmallMat::identity(self.d);
        let mut sum = SmallMat::zeros(self.d);
        for k in 1..40 {
            term = term.mul(&x);
            sum = sum.add(&term.scale(C::new(if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64, 0.0)));
            if term.frobenius2() < 1e-34 {
                break;
            }
        }
        sum
    }

    /// Eigenvalues of a Hermitian matrix, ascending. The input is
    /// symmetrised; callers guarantee near-Hermiticity.
    pub fn herm_eigenvalues(&self) -> [f64; MAX_RANK] {
        let (vals, _) = self.herm_eigen();
        vals
    }

    /// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and
    /// the unitary of column eigenvectors.
    pub fn herm_eigen(&self) -> ([f64; MAX_RANK], SmallMat) {
        let d = self.d;
        let mut vals = [0.0; MAX_RANK];
        if d == 1 {
            vals[0] = self[(0, 0)].re;
            return (vals, SmallMat::identity(1));
        }
        if d == 2 {
            let a = self[(0, 0)].re;
            let c = self[(1, 1)].re;
            let b = 0.5 * (self[(0, 1)] + self[(1, 0)].conj());
            let m = 0.5 * (a + c);
            let r = (0.25 * (a - c) * (a - c) + b.norm_sqr()).sqrt();
            vals[0] = m - r;
            vals[1] = m + r;
            let mut vecs = SmallMat::identity(2);
            if b.norm_sqr() > 1e-300 {
                // Eigenvector for vals[0]: (b, λ − a) normalised.
                for (idx, &lam) in vals.iter().take(2).enumerate() {
                    let v0 = b;
                    let v1 = C::new(lam - a, 0.0);
                    let nrm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
                    vecs[(0, idx)] = v0 / nrm;
                    vecs[(1, idx)] = v1 / nrm;
                }
            } else if a > c {
                vecs = SmallMat::zeros(2);
                vecs[(0, 1)] = C::ONE;
                vecs[(1, 0)] = C::ONE;
            }
            return (vals, vecs);
        }
        // Cyclic Jacobi for d = 3, 4.
        let mut m = self.add(&self.adjoint()).scale(C::new(0.5, 0.0));
        let mut q = SmallMat::identity(d);
        for _sweep in 0..40 {
            let mut off = 0.0;
            for p in 0..d {
                for r in p + 1..d {
                    off += m[(p, r)].norm_sqr();
                }
            }
            if off < 1e-30 * (1.0 + m.frobenius2()) {
                break;
            }
            for p in 0..d {
                for r in p + 1..d {
                    let apq = m[(p, r)];
                    if apq.norm_sqr() < 1e-36 {
                        continue;
                    }
                    let app = m[(p, p)].re;
                    let aqq = m[(r, r)].re;
                    // Unitary 2×2 rotation annihilating (p, r).
                    let phase = apq / C::new(apq.norm(), 0.0);
                    let theta = 0.5 * (2.0 * apq.norm()).atan2(aqq - app);
                    let (cth, sth) = (theta.cos(), theta.sin());
                    let g_pp = C::new(cth, 0.0);
                    let g_pr = phase * sth;
                    let g_rp = -phase.conj() * sth;
                    let g_rr = C::new(cth, 0.0);
                    // m ← G† m G, q ← q G with G acting on columns (p, r).
                    for i in 0..d {
                        let (mip, mir) = (m[(i, p)], m[(i, r)]);
                        m[(i, p)] = mip * g_pp + mir * g_rp;
                        m[(i, r)] = mip * g_pr + mir * g_rr;
                        let (qip, qir) = (q[(i, p)], q[(i, r)]);
                        q[(i, p)] = qip * g_pp + qir * g_rp;
                        q[(i, r)] = qip * g_pr + qir * g_rr;
                    }
                    for j in 0..d {
                        let (mpj, mrj) = (m[(p, j)], m[(r, j)]);
                        m[(p, j)] = g_pp.conj() * mpj + g_rp.conj() * mrj;
                        m[(r, j)] = g_pr.conj() * mpj + g_rr.conj() * mrj;
                    }
                }
            }
        }
        let mut order: [usize; MAX_RANK] = [0, 1, 2, 3];
        order[..d].sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap());
        let mut vecs = SmallMat::zeros(d);
        for (slot, &src) in order[..d].iter().enumerate() {
            vals[slot] = m[(src, src)].re;
            for i in 0..d {
                vecs[(i, slot)] = q[(i, src)];
            }
        }
        (vals, vecs)
    }

    /// Roots of the characteristic polynomial (general matrix) via
    /// Durand-Kerner on det(λI − M); deterministic initialisation.
    pub fn eigenvalues_general(&self) -> [C; MAX_RANK] {
        let d = self.d;
        let mut out = [C::ZERO; MAX_RANK];
        match d {
            1 => out[0] = self[(0, 0)],
            2 => {
                let tr = self.trace();
                let det = self.det();
                let disc = (tr * tr - det * 4.0).sqrt();
                out[0] = (tr - disc) * 0.5;
                out[1] = (tr + disc) * 0.5;
            }
            _ => {
                let coeffs = self.char_poly();
                let scale = 1.0 + self.frobenius2().sqrt();
                let mut z = [C::ZERO; MAX_RANK];
                for (i, zi) in z[..d].iter_mut().enumerate() {
                    let ang = 2.0 * std::f64::consts::PI * (i as f64 + 0.25) / d as f64;
                    *zi = C::new(scale * ang.cos(), scale * ang.sin());
                }
                let eval = |x: C| {
                    let mut v = C::ONE;
                    for c in coeffs[..d].iter().rev() {
                        v = v * x + *c;
                    }
                    v
                };
                for _ in 0..200 {
                    let mut moved = 0.0f64;
                    for i in 0..d {
                        let mut denom = C::ONE;
                        for j in 0..d {
                            if i != j {
                                denom *= z[i] - z[j];
                            }
                        }
                        if denom.norm_sqr() < 1e-280 {
                            continue;
                        }
                        let step = eval(z[i]) / denom;
                        z[i] -= step;
                        moved = moved.max(step.norm());
                    }
                    if moved < 1e-14 * scale {
                        break;
                    }
                }
                out[..d].copy_from_slice(&z[..d]);
            }
        }
        out[..d].sort_by(|a, b| {
            (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap()
        });
        out
    }

    /// Coefficients of the monic characteristic polynomial, ascending:
    /// p(λ) = λ^d + Σ_k coeffs[d−k]·λ^{d−k} (Faddeev–LeVerrier).
    fn char_poly(&self) -> [C; MAX_RANK] {
        let d = self.d;
        let mut coeffs = [C::ZERO; MAX_RANK];
        let mut mk = SmallMat::zeros(d);
        let mut ck = C::ONE;
        for k in 1..=d {
            let mut t = mk;
            for i in 0..d {
                t[(i, i)] += ck;
            }
            mk = self.mul(&t);
            ck = -mk.trace() / k as f64;
            coeffs[d - k] = ck;
        }
        coeffs
    }
}

impl std::ops::Index<(usize, usize)> for SmallMat {
    type Output = C;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C {
        &self.a[i * MAX_RANK + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SmallMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C {
        &mut self.a[i * MAX_RANK + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn inverse_roundtrip() {
        let mut m = SmallMat::zeros(3);
        m[(0, 0)] = c(2.0, 0.3);
        m[(0, 1)] = c(-0.5, 1.0);
        m[(1, 0)] = c(0.1, -0.2);
        m[(1, 1)] = c(1.5, 0.0);
        m[(1, 2)] = c(0.7, 0.7);
        m[(2, 2)] = c(-1.2, 0.4);
        m[(2, 0)] = c(0.0, 0.9);
        let inv = m.inverse().unwrap();
        let p = m.mul(&inv);
        let mut err = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { C::ONE } else { C::ZERO };
                err += (p[(i, j)] - want).norm_sqr();
            }
        }
        assert!(err.sqrt() < 1e-12);
    }

    #[test]
    fn hermitian_eigen_2x2_and_4x4() {
        let mut m = SmallMat::zeros(2);
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(-1.0, 0.0);
        m[(0, 1)] = c(0.0, 0.5);
        m[(1, 0)] = c(0.0, -0.5);
        let (vals, vecs) = m.herm_eigen();
        let r = (1.0f64 + 0.25).sqrt();
        assert!((vals[0] + r).abs() < 1e-14);
        assert!((vals[1] - r).abs() < 1e-14);
        // residual ‖Mv − λv‖
        for idx in 0..2 {
            let mut res = 0.0;
            for i in 0..2 {
                let mv: C = (0..2).map(|l| m[(i, l)] * vecs[(l, idx)]).sum();
                res += (mv - vecs[(i, idx)] * vals[idx]).norm_sqr();
            }
            assert!(res.sqrt() < 1e-13);
        }

        let mut h = SmallMat::zeros(4);
        for i in 0..4 {
            h[(i, i)] = c(i as f64, 0.0);
        }
        h[(0, 3)] = c(0.3, 0.4);
        h[(3, 0)] = c(0.3, -0.4);
        h[(1, 2)] = c(-0.2, 0.1);
        h[(2, 1)] = c(-0.2, -0.1);
        let (vals, vecs) = h.herm_eigen();
        for idx in 0..4 {
            let mut res = 0.0;
            for i in 0..4 {
                let mv: C = (0..4).map(|l| h[(i, l)] * vecs[(l, idx)]).sum();
                res += (mv - vecs[(i, idx)] * vals[idx]).norm_sqr();
            }
            assert!(res.sqrt() < 1e-12, "residual {}", res.sqrt());
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1] + 1e-15));
    }

    #[test]
    fn exp_log_roundtrip() {
        let mut u = SmallMat::zeros(2);
        u[(0, 1)] = c(0.3, -0.1);
        u[(1, 0)] = c(-0.3, -0.1);
        u[(0, 0)] = c(0.0, 0.2);
        let e = u.exp();
        let l = e.log_near_identity();
        assert!(l.sub(&u).frobenius2().sqrt() < 1e-12);
    }

    #[test]
    fn general_eigenvalues_match_trace_det() {
        let mut m = SmallMat::zeros(3);
        m[(0, 0)] = c(1.0, 0.5);
        m[(0, 1)] = c(2.0, 0.0);
        m[(1, 0)] = c(0.0, 1.0);
        m[(1, 1)] = c(-1.0, 0.0);
        m[(1, 2)] = c(0.5, 0.5);
        m[(2, 2)] = c(0.2, -0.3);
        m[(2, 1)] = c(1.0, 0.0);
        let ev = m.eigenvalues_general();
        let sum: C = ev[..3].iter().sum();
        let prod: C = ev[..3].iter().product();
        assert!((sum - m.trace()).norm() < 1e-9);
        assert!((prod - m.det()).norm() < 1e-9);
    }
}
