//! Dense complex linear algebra shared by the rest of the crate.
//!
//! Everything here works on `DMatrix<Complex64>`; the decompositions come from
//! nalgebra and only thin numerical policy (thresholds, ordering) lives here.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral (operator 2-) norm.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Number of singular values above `tol` times the largest one.
pub fn numerical_rank(m: &CMat, tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > tol * smax).count(),
        _ => 0,
    }
}

/// Ratio of extreme singular values; infinite for singular or empty input.
pub fn condition_number(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Inverse of a square matrix, refusing when the smallest singular value is
/// at most `rel_tol` times the largest.
pub fn checked_inverse(m: &CMat, rel_tol: f64, what: &'static str, theta: f64) -> Result<CMat> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let s = singular_values(m);
    let (hi, lo) = (s[0], s[s.len() - 1]);
    if !(lo > rel_tol * hi) {
        return Err(Error::Singular { what, theta });
    }
    m.clone()
        .lu()
        .try_inverse()
        .ok_or(Error::Singular { what, theta })
}

/// Eigenvalues of a square complex matrix via the complex Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    match n {
        0 => return Vec::new(),
        1 => return vec![m[(0, 0)]],
        _ => {}
    }
    let (_, t) = Schur::new(m.clone()).unpack();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        // nalgebra may leave an unreduced 2x2 block on the diagonal
        if i + 1 < n && t[(i + 1, i)].norm() > 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half = (a - d) * 0.5;
            let disc = (b * c + half * half).sqrt();
            let mid = (a + d) * 0.5;
            out.push(mid + disc);
            out.push(mid - disc);
            i += 2;
        } else {
            out.push(t[(i, i)]);
            i += 1;
        }
    }
    out
}

/// Coefficients (ascending degree) of `det(zI - m)` by the Faddeev-LeVerrier
/// recursion. Intended for the small dimensions used here.
pub fn characteristic_polynomial(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    let mut coeffs = vec![ZERO; n + 1];
    coeffs[n] = ONE;
    let mut mk = CMat::zeros(n, n);
    let ident = CMat::identity(n, n);
    for k in 1..=n {
        mk = m * &mk + &ident * coeffs[n - k + 1];
        let am = m * &mk;
        coeffs[n - k] = -am.trace() / (k as f64);
    }
    coeffs
}

/// Monic polynomial with the given roots, ascending coefficients.
pub fn poly_from_roots(roots: &[C64]) -> Vec<C64> {
    let mut c = vec![ONE];
    for &r in roots {
        let mut next = vec![ZERO; c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= ci * r;
        }
        c = next;
    }
    c
}

/// `p(m)` for ascending coefficients `p`, by Horner's scheme on matrices.
pub fn matrix_polynomial(coeffs: &[C64], m: &CMat) -> CMat {
    let n = m.nrows();
    let mut acc = CMat::zeros(n, n);
    for &c in coeffs.iter().rev() {
        acc = m * acc;
        for i in 0..n {
            acc[(i, i)] += c;
        }
    }
    acc
}

/// `e_nᵀ M⁻¹` as a row, by one transposed LU solve.
pub fn last_row_of_inverse(m: &CMat) -> Option<CMat> {
    let n = m.nrows();
    let mut e = CVec::zeros(n);
    e[n - 1] = ONE;
    let x = m.transpose().lu().solve(&e)?;
    Some(CMat::from_row_slice(1, n, x.as_slice()))
}

/// Largest entrywise modulus; used for exactness checks.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Minimum-norm least-squares solution of `m x = rhs` together with the
/// residual norm `|m x - rhs|`. Columns of `m` are assumed independent.
pub fn least_squares(m: &CMat, rhs: &CVec) -> (CVec, f64) {
    if m.ncols() == 0 {
        return (CVec::zeros(0), rhs.norm());
    }
    let qr = m.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qtb = q.adjoint() * rhs;
    let x = r
        .solve_upper_triangular(&qtb)
        .unwrap_or_else(|| CVec::zeros(m.ncols()));
    let resid = (m * &x - rhs).norm();
    (x, resid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: usize, cols: usize, v: &[f64]) -> CMat {
        CMat::from_row_slice(rows, cols, &v.iter().map(|&x| re(x)).collect::<Vec<_>>())
    }

    #[test]
    fn charpoly_of_companion() {
        // z^3 - 2z^2 + 3z - 4 has companion with last column (4, -3, 2)
        let m = cm(3, 3, &[0., 0., 4., 1., 0., -3., 0., 1., 2.]);
        let c = characteristic_polynomial(&m);
        let want = [-4.0, 3.0, -2.0, 1.0];
        for (a, b) in c.iter().zip(want) {
            assert!((a - re(b)).norm() < 1e-12);
        }
    }

    #[test]
    fn roots_expand_and_eigenvalues_recover() {
        let roots = [re(1.0), C64::new(0.0, 2.0), re(-3.0)];
        let c = poly_from_roots(&roots);
        assert_eq!(c.len(), 4);
        for r in roots {
            let val = c.iter().rev().fold(ZERO, |acc, &x| acc * r + x);
            assert!(val.norm() < 1e-12);
        }
        // companion of c has those eigenvalues
        let n = 3;
        let mut m = CMat::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = ONE;
        }
        for i in 0..n {
            m[(i, n - 1)] = -c[i];
        }
        let mut ev = eigenvalues(&m);
        ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let mut want = roots.to_vec();
        want.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn rank_and_inverse() {
        let m = cm(2, 2, &[1., 2., 2., 4.]);
        assert_eq!(numerical_rank(&m, 1e-9), 1);
        assert!(checked_inverse(&m, 1e-10, "m", 0.5).is_err());
        let m = cm(2, 2, &[2., 0., 0., 4.]);
        let inv = checked_inverse(&m, 1e-10, "m", 0.0).unwrap();
        assert!((inv[(1, 1)] - re(0.25)).norm() < 1e-15);
        assert_eq!(numerical_rank(&CMat::zeros(3, 2), 1e-9), 0);
    }

    #[test]
    fn matrix_polynomial_matches_powers() {
        let m = cm(2, 2, &[0., 1., -2., 3.]);
        let p = [re(1.0), re(-1.0), re(2.0)];
        let direct = CMat::identity(2, 2) - &m + &m * &m * re(2.0);
        assert!(max_abs(&(matrix_polynomial(&p, &m) - direct)) < 1e-13);
    }
}
