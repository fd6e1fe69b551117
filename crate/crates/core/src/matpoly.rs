//! Self-adjoint quadratic matrix polynomials `A(s) = A0 s² + (A1 + A1*) s + A2`
//! and their spectral factorization `A(s) = (s − Q*) A0 (s − Q)`.
//!
//! `Q` is obtained from the Riesz moments
//! `M_j = (1/2πi) ∮ t^j A(t)⁻¹ dt` over a contour around the upper-half-plane
//! spectrum as `Q = M1 M0⁻¹`. Two evaluations of the moments are provided:
//! contour quadrature ([`riesz_moments`]) and the holomorphic functional
//! calculus of the Stroh matrix through its matrix sign function
//! ([`spectral_factor_sign`], [`factor3`]).

use nalgebra::{DMatrix, SMatrix};

use crate::error::{Error, Result};
use crate::linalg::{c, eigenvalues_dyn, gauss_legendre, inverse_dyn, norm2_dyn, CMat3, RMat3, C64, I};

pub type CMat = DMatrix<C64>;

/// Relative threshold below which the spectrum is treated as real.
pub const NEAR_REAL: f64 = 1e-6;
/// Node cap of the contour quadrature.
pub const MAX_NODES: usize = 1 << 14;
const GL_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SaQuadPoly {
    pub a0: CMat,
    pub a1: CMat,
    pub a2: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFactor {
    pub q: CMat,
    pub eigenvalues: Vec<C64>,
    pub solvency_residual: f64,
    pub factorization_residual: f64,
    /// Quadrature nodes used (0 for the sign-function route).
    pub nodes: usize,
}

/// Rectangle `[-half_width, half_width] × [bottom, top]` in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    pub half_width: f64,
    pub bottom: f64,
    pub top: f64,
}

impl SaQuadPoly {
    /// Checks dimensions, Hermitian `A0` (positive definite) and Hermitian `A2`.
    pub fn new(a0: CMat, a1: CMat, a2: CMat) -> Result<Self> {
        let n = a0.nrows();
        if n == 0 || a0.ncols() != n || a1.shape() != (n, n) || a2.shape() != (n, n) {
            return Err(Error::Unsupported("matrix polynomial blocks must be square and equal".into()));
        }
        let scale = norm2_dyn(&a0).max(norm2_dyn(&a2)).max(1e-300);
        if norm2_dyn(&(&a0 - a0.adjoint())) > 1e-12 * scale || norm2_dyn(&(&a2 - a2.adjoint())) > 1e-12 * scale {
            return Err(Error::Unsupported("A0 and A2 must be Hermitian".into()));
        }
        if a0.clone().cholesky().is_none() {
            return Err(Error::SingularLeadingCoefficient);
        }
        Ok(SaQuadPoly { a0, a1, a2 })
    }

    pub fn from_real3(a0: &RMat3, a1: &RMat3, a2: &RMat3) -> Result<Self> {
        let conv = |m: &RMat3| CMat::from_fn(3, 3, |i, j| c(m[(i, j)], 0.0));
        Self::new(conv(a0), conv(a1), conv(a2))
    }

    pub fn from_complex3(a0: &CMat3, a1: &CMat3, a2: &CMat3) -> Result<Self> {
        let conv = |m: &CMat3| CMat::from_fn(3, 3, |i, j| m[(i, j)]);
        Self::new(conv(a0), conv(a1), conv(a2))
    }

    pub fn dim(&self) -> usize {
        self.a0.nrows()
    }

    pub fn eval(&self, s: C64) -> CMat {
        let b = &self.a1 + self.a1.adjoint();
        &self.a0 * (s * s) + b * s + &self.a2
    }

    /// `A'(s) = 2 s A0 + A1 + A1*`.
    pub fn eval_derivative(&self, s: C64) -> CMat {
        &self.a0 * (s * c(2.0, 0.0)) + &self.a1 + self.a1.adjoint()
    }

    pub fn norm(&self) -> f64 {
        norm2_dyn(&self.a0) + norm2_dyn(&self.a1) + norm2_dyn(&self.a2)
    }

    /// Stroh companion matrix
    /// `N = [[-A0⁻¹A1, A0⁻¹], [-A2 + A1*A0⁻¹A1, -A1*A0⁻¹]]`.
    pub fn stroh_matrix(&self) -> Result<CMat> {
        let n = self.dim();
        let inv = inverse_dyn(&self.a0).ok_or(Error::SingularLeadingCoefficient)?;
        let a1h = self.a1.adjoint();
        let mut m = CMat::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&(-(&inv * &self.a1)));
        m.view_mut((0, n), (n, n)).copy_from(&inv);
        m.view_mut((n, 0), (n, n)).copy_from(&(-&self.a2 + &a1h * &inv * &self.a1));
        m.view_mut((n, n), (n, n)).copy_from(&(-(&a1h * &inv)));
        Ok(m)
    }

    /// Coefficients `c_0..c_2n` of `det A(s)`, recovered by a discrete Fourier
    /// transform of values on a circle of radius matched to the root scale.
    pub fn det_coefficients(&self) -> (Vec<C64>, f64) {
        let n = self.dim();
        let m = 2 * n + 1;
        let d0 = self.a2.clone().lu().determinant().norm();
        let dn = self.a0.clone().lu().determinant().norm();
        let mut r = if d0 > 0.0 && dn > 0.0 { (d0 / dn).powf(1.0 / (2 * n) as f64) } else { 1.0 };
        if !r.is_finite() || r <= 0.0 {
            r = 1.0;
        }
        let vals: Vec<C64> = (0..m)
            .map(|k| {
                let s = C64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / m as f64);
                self.eval(s).lu().determinant()
            })
            .collect();
        let coeffs = (0..m)
            .map(|j| {
                let mut acc = C64::new(0.0, 0.0);
                for (k, v) in vals.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (j * k % m) as f64 / m as f64;
                    acc += v * C64::from_polar(1.0, ang);
                }
                acc / (m as f64 * r.powi(j as i32))
            })
            .collect();
        (coeffs, r)
    }

    /// The 2n eigenvalues of `det A(s) = 0`, from the scalar polynomial by
    /// Aberth iteration followed by Newton polishing on `det A(s)` itself.
    pub fn spectrum(&self) -> Vec<C64> {
        let (coeffs, r) = self.det_coefficients();
        let mut roots = aberth(&coeffs, r);
        for z in roots.iter_mut() {
            *z = self.polish_root(*z);
        }
        roots.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap().then(a.re.partial_cmp(&b.re).unwrap()));
        roots
    }

    fn polish_root(&self, z0: C64) -> C64 {
        // Newton on det A: det'/det = tr(A⁻¹ A'); accepted only while |det| decreases
        let mut z = z0;
        let mut fz = self.eval(z).lu().determinant().norm();
        for _ in 0..6 {
            if fz == 0.0 {
                break;
            }
            let Some(inv) = inverse_dyn(&self.eval(z)) else { break };
            let g = (inv * self.eval_derivative(z)).trace();
            if g.norm() == 0.0 {
                break;
            }
            let step = C64::new(1.0, 0.0) / g;
            let zn = z - step;
            let fn_ = self.eval(zn).lu().determinant().norm();
            if !(fn_ < fz) {
                break;
            }
            z = zn;
            fz = fn_;
            if step.norm() < 1e-15 * (1.0 + z.norm()) {
                break;
            }
        }
        z
    }

    /// True if some eigenvalue has `|Im λ| < tol (1 + |Re λ|)`.
    pub fn has_real_spectrum(&self, tol: f64) -> bool {
        self.spectrum().iter().any(|z| z.im.abs() < tol * (1.0 + z.re.abs()))
    }

    /// Upper bound for eigenvalue moduli, `1 + 2‖A0⁻¹‖(‖A1‖ + ‖A2‖^{1/2})`.
    pub fn modulus_bound(&self) -> Result<f64> {
        let inv = inverse_dyn(&self.a0).ok_or(Error::SingularLeadingCoefficient)?;
        Ok(1.0 + 2.0 * norm2_dyn(&inv) * (norm2_dyn(&self.a1) + norm2_dyn(&self.a2).sqrt()))
    }

    /// Default contour around the upper-half-plane spectrum.
    pub fn default_contour(&self) -> Result<Contour> {
        let spec = self.spectrum();
        let max_mod = spec.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let r_max = self.modulus_bound()?.max(1.0 + 1.5 * max_mod);
        let delta = spec.iter().fold(f64::INFINITY, |m, z| m.min(z.im.abs()));
        if delta < NEAR_REAL * r_max {
            return Err(Error::NearRealSpectrum { min_im: delta });
        }
        Ok(Contour { half_width: r_max, bottom: 0.5 * delta, top: r_max })
    }
}

/// Aberth–Ehrlich simultaneous iteration for the roots of
/// `Σ coeffs[j] z^j`; `r` sets the radius of the initial circle.
pub fn aberth(coeffs: &[C64], r: f64) -> Vec<C64> {
    let mut cs: Vec<C64> = coeffs.to_vec();
    while cs.len() > 1 && cs.last().unwrap().norm() == 0.0 {
        cs.pop();
    }
    let deg = cs.len() - 1;
    if deg == 0 {
        return vec![];
    }
    let horner = |z: C64| {
        let mut p = cs[deg];
        let mut dp = C64::new(0.0, 0.0);
        for k in (0..deg).rev() {
            dp = dp * z + p;
            p = p * z + cs[k];
        }
        (p, dp)
    };
    let mut z: Vec<C64> = (0..deg)
        .map(|k| C64::from_polar(r, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / deg as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let (p, dp) = horner(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut sum = C64::new(0.0, 0.0);
            for j in 0..deg {
                if j != i {
                    sum += C64::new(1.0, 0.0) / (z[i] - z[j]);
                }
            }
            let w = ratio / (C64::new(1.0, 0.0) - ratio * sum);
            if w.is_finite() {
                z[i] -= w;
                moved = moved.max(w.norm() / (1.0 + z[i].norm()));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Both Riesz moments `(M0, M1)` by composite Gauss–Legendre quadrature on
/// the rectangle, doubling panels until `M0` is stable to 1e-12 relative.
pub fn riesz_moments(p: &SaQuadPoly, contour: &Contour) -> Result<(CMat, CMat, usize)> {
    let n = p.dim();
    let Contour { half_width: w, bottom: b, top: t } = *contour;
    if !(w > 0.0 && t > b) {
        return Err(Error::ContourFailure { nodes: 0 });
    }
    // counter-clockwise corners
    let corners = [c(-w, b), c(w, b), c(w, t), c(-w, t)];
    let spec = p.spectrum();
    // initial panels per edge scaled by edge length over distance to the spectrum
    let mut panels = [0usize; 4];
    for e in 0..4 {
        let (z0, z1) = (corners[e], corners[(e + 1) % 4]);
        let len = (z1 - z0).norm();
        let dist = spec.iter().map(|s| segment_distance(*s, z0, z1)).fold(f64::INFINITY, f64::min);
        if dist <= 0.0 {
            return Err(Error::ContourFailure { nodes: 0 });
        }
        panels[e] = ((len / (4.0 * dist)).ceil() as usize).clamp(2, MAX_NODES / (4 * GL_ORDER));
    }
    let (gx, gw) = gauss_legendre(GL_ORDER);
    let integrate = |panels: &[usize; 4]| -> (CMat, CMat) {
        let mut m0 = CMat::zeros(n, n);
        let mut m1 = CMat::zeros(n, n);
        for e in 0..4 {
            let (z0, z1) = (corners[e], corners[(e + 1) % 4]);
            let np = panels[e];
            let h = (z1 - z0) / np as f64;
            for k in 0..np {
                let mid = z0 + h * (k as f64 + 0.5);
                for (x, wt) in gx.iter().zip(gw.iter()) {
                    let z = mid + h * (0.5 * x);
                    if let Some(inv) = inverse_dyn(&p.eval(z)) {
                        let f = h * (0.5 * wt);
                        m0 += &inv * f;
                        m1 += inv * (f * z);
                    }
                }
            }
        }
        let scale = C64::new(1.0, 0.0) / (C64::new(0.0, 2.0 * std::f64::consts::PI));
        (m0 * scale, m1 * scale)
    };
    let count = |p: &[usize; 4]| p.iter().sum::<usize>() * GL_ORDER;
    let (mut m0, mut m1) = integrate(&panels);
    loop {
        let next: [usize; 4] = panels.map(|k| 2 * k);
        if count(&next) > MAX_NODES {
            return Err(Error::ContourFailure { nodes: count(&panels) });
        }
        let (n0, n1) = integrate(&next);
        let diff = norm2_dyn(&(&n0 - &m0));
        let diff1 = norm2_dyn(&(&n1 - &m1));
        m0 = n0;
        m1 = n1;
        panels = next;
        if diff <= 1e-12 * norm2_dyn(&m0) && diff1 <= 1e-10 * norm2_dyn(&m1).max(norm2_dyn(&m0)) {
            return Ok((m0, m1, count(&panels)));
        }
    }
}

fn segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let ab = b - a;
    let t = ((p - a) * ab.conj()).re / ab.norm_sqr();
    let t = t.clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Riesz moment `j ∈ {0, 1}` over the default contour.
pub fn riesz_moment(p: &SaQuadPoly, j: usize) -> Result<CMat> {
    let contour = p.default_contour()?;
    let (m0, m1, _) = riesz_moments(p, &contour)?;
    match j {
        0 => Ok(m0),
        1 => Ok(m1),
        _ => Err(Error::Unsupported(format!("Riesz moment of order {j}"))),
    }
}

/// Spectral factor from contour moments over the default contour.
pub fn spectral_factor(p: &SaQuadPoly) -> Result<SpectralFactor> {
    let contour = p.default_contour()?;
    spectral_factor_on(p, &contour)
}

/// Spectral factor from contour moments over a caller-chosen contour.
pub fn spectral_factor_on(p: &SaQuadPoly, contour: &Contour) -> Result<SpectralFactor> {
    let (m0, m1, nodes) = riesz_moments(p, contour)?;
    let inv = inverse_dyn(&m0).ok_or(Error::ContourFailure { nodes })?;
    finish(p, m1 * inv, nodes)
}

/// Spectral factor through the matrix sign function of `-iN`:
/// `P+ = (I + sign(-iN))/2`, `M0 = L P+ R`, `M1 = L N P+ R`.
pub fn spectral_factor_sign(p: &SaQuadPoly) -> Result<SpectralFactor> {
    let n = p.dim();
    let nmat = p.stroh_matrix()?;
    let s = matrix_sign_dyn(&(&nmat * (-I)))?;
    let proj = (CMat::identity(2 * n, 2 * n) + s) * c(0.5, 0.0);
    let m0 = proj.view((0, n), (n, n)).into_owned();
    let m1 = (&nmat * &proj).view((0, n), (n, n)).into_owned();
    let inv = inverse_dyn(&m0).ok_or(Error::NearRealSpectrum { min_im: 0.0 })?;
    finish(p, m1 * inv, 0)
}

fn finish(p: &SaQuadPoly, q: CMat, nodes: usize) -> Result<SpectralFactor> {
    let eigenvalues = eigenvalues_dyn(&q);
    let scale = eigenvalues.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    if let Some(bad) = eigenvalues.iter().find(|z| z.im <= 1e-12 * scale) {
        return Err(Error::NearRealSpectrum { min_im: bad.im });
    }
    let solvency_residual = solvency_residual(p, &q);
    let factorization_residual = factorization_residual(p, &q);
    Ok(SpectralFactor { q, eigenvalues, solvency_residual, factorization_residual, nodes })
}

/// `‖A0 Q² + (A1 + A1*) Q + A2‖₂`.
pub fn solvency_residual(p: &SaQuadPoly, q: &CMat) -> f64 {
    let b = &p.a1 + p.a1.adjoint();
    norm2_dyn(&(&p.a0 * q * q + b * q + &p.a2))
}

/// Maximum of `‖A(s) − (s − Q*) A0 (s − Q)‖ / (1 + |s|²)` over fixed samples.
pub fn factorization_residual(p: &SaQuadPoly, q: &CMat) -> f64 {
    let n = p.dim();
    let id = CMat::identity(n, n);
    let qh = q.adjoint();
    let mut worst = 0.0f64;
    for k in 0..12 {
        let s = C64::from_polar(0.5 + k as f64, 0.7 * k as f64 + 0.3);
        let f = (&id * s - &qh) * &p.a0 * (&id * s - q);
        worst = worst.max(norm2_dyn(&(p.eval(s) - f)) / (1.0 + s.norm_sqr()));
    }
    worst
}

/// Newton iteration with determinant scaling for the matrix sign function.
pub fn matrix_sign_dyn(m: &CMat) -> Result<CMat> {
    let k = m.nrows();
    let mut s = m.clone();
    for it in 0..100 {
        let inv = inverse_dyn(&s).ok_or(Error::NearRealSpectrum { min_im: 0.0 })?;
        let mu = if it < 8 {
            let d = s.clone().lu().determinant().norm();
            if d > 0.0 && d.is_finite() { d.powf(-1.0 / k as f64) } else { 1.0 }
        } else {
            1.0
        };
        let next = (&s * c(mu, 0.0) + inv * c(1.0 / mu, 0.0)) * c(0.5, 0.0);
        let diff = norm2_dyn(&(&next - &s));
        s = next;
        if diff <= 1e-14 * norm2_dyn(&s) {
            return Ok(s);
        }
    }
    Err(Error::NearRealSpectrum { min_im: 0.0 })
}

type CMat6 = SMatrix<C64, 6, 6>;

/// Fixed-size 3×3 spectral factor by the sign-function route; `a2` is the
/// full constant coefficient (speed term included). Used in inner loops.
pub fn factor3(a0: &CMat3, a1: &CMat3, a2: &CMat3) -> Result<CMat3> {
    let inv = a0.try_inverse().ok_or(Error::SingularLeadingCoefficient)?;
    let a1h = a1.adjoint();
    let mut nm = CMat6::zeros();
    nm.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-(inv * a1)));
    nm.fixed_view_mut::<3, 3>(0, 3).copy_from(&inv);
    nm.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-a2 + a1h * inv * a1));
    nm.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-(a1h * inv)));
    let mut s = nm * (-I);
    let mut converged = false;
    for it in 0..100 {
        let lu = s.lu();
        let sinv = lu.try_inverse().ok_or(Error::NearRealSpectrum { min_im: 0.0 })?;
        let mu = if it < 8 {
            let d = s.lu().determinant().norm();
            if d > 0.0 && d.is_finite() { d.powf(-1.0 / 6.0) } else { 1.0 }
        } else {
            1.0
        };
        let next = (s * c(mu, 0.0) + sinv * c(1.0 / mu, 0.0)) * c(0.5, 0.0);
        let diff = (next - s).norm();
        s = next;
        if diff <= 1e-14 * s.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NearRealSpectrum { min_im: 0.0 });
    }
    let proj = (CMat6::identity() + s) * c(0.5, 0.0);
    let m0: CMat3 = proj.fixed_view::<3, 3>(0, 3).into_owned();
    let m1: CMat3 = (nm * proj).fixed_view::<3, 3>(0, 3).into_owned();
    let m0inv = m0.try_inverse().ok_or(Error::NearRealSpectrum { min_im: 0.0 })?;
    Ok(m1 * m0inv)
}
