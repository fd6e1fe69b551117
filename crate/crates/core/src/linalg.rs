//! Small dense complex linear algebra shared by the solvers.
//!
//! Everything here is specialised for the 3×3 (and occasionally n×n, n ≤ 6)
//! matrices that appear in the surface-wave problem.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type RMat3 = Matrix3<f64>;
pub type CMat3 = Matrix3<C64>;
pub type CVec3 = Vector3<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn to_complex(m: &RMat3) -> CMat3 {
    m.map(|v| C64::new(v, 0.0))
}

/// Spectral (operator 2-) norm.
pub fn norm2(m: &CMat3) -> f64 {
    m.singular_values().max()
}

pub fn norm2_dyn(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn rnorm2(m: &RMat3) -> f64 {
    m.singular_values().max()
}

pub fn hermitian_part(m: &CMat3) -> CMat3 {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn antihermitian_part(m: &CMat3) -> CMat3 {
    (m - m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues of a Hermitian matrix (its Hermitian part is used), ascending.
pub fn hermitian_eigenvalues(m: &CMat3) -> [f64; 3] {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut ev = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Generalised eigenvalues of the symmetric pencil (a, b) with b positive
/// definite, ascending.
pub fn pencil_eigenvalues(a: &RMat3, b: &RMat3) -> Option<[f64; 3]> {
    let chol = b.cholesky()?;
    let l = chol.l();
    let linv = l.try_inverse()?;
    let m = linv * a * linv.transpose();
    let m = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut ev = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Some(ev)
}

pub fn det3(m: &CMat3) -> C64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

/// Adjugate (transposed cofactor matrix): `adj(m) * m = det(m) * I`.
pub fn adjugate(m: &CMat3) -> CMat3 {
    let mut adj = CMat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = others(j);
            let (c0, c1) = others(i);
            let minor = m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(i, j)] = minor * sign;
        }
    }
    adj
}

/// Directional derivative of the adjugate: product rule over the 2×2 minors.
pub fn adjugate_derivative(m: &CMat3, dm: &CMat3) -> CMat3 {
    let mut out = CMat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = others(j);
            let (c0, c1) = others(i);
            let d = dm[(r0, c0)] * m[(r1, c1)] + m[(r0, c0)] * dm[(r1, c1)]
                - dm[(r0, c1)] * m[(r1, c0)]
                - m[(r0, c1)] * dm[(r1, c0)];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            out[(i, j)] = d * sign;
        }
    }
    out
}

fn others(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// d det(m) = tr(adj(m) dm)  (Jacobi's formula).
pub fn det_derivative(m: &CMat3, dm: &CMat3) -> C64 {
    (adjugate(m) * dm).trace()
}

/// Second mixed derivative of det along directions a, b given the matrix
/// derivatives `da`, `db` and the mixed second derivative `dab`.
pub fn det_second_derivative(m: &CMat3, da: &CMat3, db: &CMat3, dab: &CMat3) -> C64 {
    (adjugate_derivative(m, db) * da).trace() + (adjugate(m) * dab).trace()
}

/// Solves `q^H x - x q = y` for x by vectorising to a 9×9 system.
///
/// Uniquely solvable when the spectra of `q^H` and `q` are disjoint, which is
/// the case whenever `q` has its spectrum in the open upper half-plane.
pub fn sylvester_adjoint(q: &CMat3, y: &CMat3) -> Result<CMat3> {
    let qh = q.adjoint();
    let mut k = DMatrix::<C64>::zeros(9, 9);
    // column-major vec: vec(qh x) = (I ⊗ qh) vec x, vec(x q) = (q^T ⊗ I) vec x
    for col in 0..3 {
        for row in 0..3 {
            let r = col * 3 + row;
            for m in 0..3 {
                k[(r, col * 3 + m)] += qh[(row, m)];
                k[(r, m * 3 + row)] -= q[(m, col)];
            }
        }
    }
    let rhs = DVector::<C64>::from_iterator(9, y.iter().copied());
    let sol = k.lu().solve(&rhs).ok_or(Error::SingularSylvester)?;
    let x = CMat3::from_iterator(sol.iter().copied());
    Ok(x)
}

/// Smallest distance between the spectra of `q^H` and `q`; the conditioning
/// scale of [`sylvester_adjoint`].
pub fn sylvester_gap(q: &CMat3) -> f64 {
    let ev = q.complex_eigenvalues_c();
    let mut gap = f64::INFINITY;
    for a in &ev {
        for b in &ev {
            gap = gap.min((a.conj() - b).norm());
        }
    }
    gap
}

pub trait ComplexEigen {
    fn complex_eigenvalues_c(&self) -> Vec<C64>;
}

impl ComplexEigen for CMat3 {
    fn complex_eigenvalues_c(&self) -> Vec<C64> {
        let d = DMatrix::from_iterator(3, 3, self.iter().copied());
        eigenvalues_dyn(&d)
    }
}

/// Eigenvalues of a general complex square matrix via the complex Schur form.
pub fn eigenvalues_dyn(m: &DMatrix<C64>) -> Vec<C64> {
    let schur = nalgebra::Schur::new(m.clone());
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

pub fn inverse_dyn(m: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    m.clone().lu().try_inverse()
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Matrix exponential (scaling and squaring).
pub fn expm(m: &CMat3) -> CMat3 {
    m.exp()
}

pub fn cnorm(v: &CVec3) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Condition number of the unit-column eigenvector matrix, so that
/// `‖exp(izQ)‖ ≤ κ·exp(−z·min Im λ)`. Infinite for defective `Q`.
pub fn eigenvector_condition(q: &CMat3) -> f64 {
    let mut v = CMat3::zeros();
    for (k, lam) in q.complex_eigenvalues_c().into_iter().enumerate() {
        let svd = (q - CMat3::identity() * lam).svd(false, true);
        let vt = svd.v_t.expect("requested");
        let i = (0..3).min_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap()).unwrap();
        let col: CVec3 = vt.row(i).adjoint();
        v.set_column(k, &(col / c(cnorm(&col), 0.0)));
    }
    let s = v.singular_values();
    let (mx, mn) = (s.max(), s.min());
    if mn > 0.0 { mx / mn } else { f64::INFINITY }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sylvester_diagonal_case() {
        let q = CMat3::from_diagonal(&Vector3::new(c(0.0, 1.0), c(0.0, 2.0), c(0.0, 3.0)));
        let y = CMat3::identity();
        let x = sylvester_adjoint(&q, &y).unwrap();
        // (conj q_j - q_k) x_jk = y_jk
        assert!((x[(0, 0)] - c(0.0, 0.5)).norm() < 1e-14);
        assert!((x[(1, 1)] - c(0.0, 0.25)).norm() < 1e-14);
        assert!(x[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn adjugate_times_matrix_is_det() {
        let m = CMat3::new(
            c(1.0, 0.2), c(2.0, 0.0), c(0.5, -1.0),
            c(0.0, 1.0), c(3.0, 0.0), c(1.0, 0.0),
            c(2.0, 0.0), c(-1.0, 0.3), c(4.0, 0.0),
        );
        let p = adjugate(&m) * m;
        let d = det3(&m);
        assert!((p - CMat3::identity() * d).norm() < 1e-12);
    }

    #[test]
    fn adjugate_derivative_matches_difference() {
        let m = CMat3::new(
            c(1.0, 0.2), c(2.0, 0.0), c(0.5, -1.0),
            c(0.0, 1.0), c(3.0, 0.0), c(1.0, 0.0),
            c(2.0, 0.0), c(-1.0, 0.3), c(4.0, 0.0),
        );
        let dm = CMat3::from_fn(|i, j| c((i + 2 * j) as f64 * 0.1, 0.05 * i as f64));
        let h = 1e-6;
        let fd = (adjugate(&(m + dm * c(h, 0.0))) - adjugate(&(m - dm * c(h, 0.0)))) / c(2.0 * h, 0.0);
        assert!((fd - adjugate_derivative(&m, &dm)).norm() < 1e-8);
    }

    #[test]
    fn eigenvector_condition_bounds_exponential() {
        let q = CMat3::new(I, c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), I * 1.5, c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), I * 2.5);
        let k = eigenvector_condition(&q);
        assert!(k > 1.0 && k.is_finite());
        let normal = CMat3::from_diagonal(&CVec3::new(I, I * 2.0, I * 3.0));
        assert!((eigenvector_condition(&normal) - 1.0).abs() < 1e-12);
        for z in [0.1, 0.5, 1.0, 3.0] {
            let e = expm(&(q * c(0.0, z)));
            let n = e.singular_values().max();
            assert!(n <= k * (-z).exp() * (1.0 + 1e-12));
        }
    }
}
