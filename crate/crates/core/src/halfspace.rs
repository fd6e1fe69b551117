//! Homogeneous half-space: limiting speed, surface impedance tensor,
//! secular equation, polarization and decaying displacement profiles.

use nalgebra::{SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::linalg::{
    adjugate, c, det3, expm, gauss_legendre, hermitian_part, norm2, pencil_eigenvalues,
    sylvester_adjoint, to_complex, CMat3, CVec3, RMat3, I,
};
use crate::material::{DirectionTriple, StiffnessTensor};
use crate::matpoly::{factor3, spectral_factor, CMat, SaQuadPoly};

/// Fraction of the limiting speed at which speed grids stop.
pub const SONIC_GRID_LIMIT: f64 = 0.999;
/// Roots above this fraction of the limiting speed are reported as near-sonic.
pub const NEAR_SONIC: f64 = 0.99;
const ROOT_GRID: usize = 64;

/// Frozen-coefficient data at one surface point and direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfspacePoint {
    pub triple: DirectionTriple,
    pub c_inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpedanceTensor {
    pub z: CMat3,
    pub q: CMat3,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayleighSolution {
    pub exists: bool,
    pub c_r: f64,
    pub c_inf: f64,
    pub w: Option<CVec3>,
    pub q: Option<CMat3>,
    pub z: Option<CMat3>,
    /// Smallest value of det Z on the speed grid.
    pub det_min: f64,
}

/// The two real matrices of the integral representation of `Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralRepresentation {
    pub z: CMat3,
    /// `∫ A(s)⁻¹ ds`.
    pub left: RMat3,
    /// `p.v. ∫ (s A0 + A1) A(s)⁻¹ ds`.
    pub right: RMat3,
}

/// `ρ c∞² = min_s λ_min(A(s))`, eigenvalues taken relative to the inertia
/// matrix `ρ G⁻¹`; bracketed scan then golden-section refinement.
pub fn limiting_speed(t: &DirectionTriple) -> f64 {
    let mass = t.metric_inv * t.density;
    let b = t.a1 + t.a1.transpose();
    let f = |s: f64| {
        let a = t.a0 * (s * s) + b * s + t.a2;
        pencil_eigenvalues(&a, &mass).map(|e| e[0]).unwrap_or(f64::NAN)
    };
    // beyond s_max the s² A0 term dominates everything at s = 0
    let mass_max = SymmetricEigen::new(mass).eigenvalues.max();
    let a0_min = SymmetricEigen::new(t.a0).eigenvalues.min();
    let b_norm = b.norm();
    let f0 = f(0.0).max(0.0) * mass_max;
    let s_max = (b_norm + (b_norm * b_norm + 4.0 * a0_min * f0).sqrt()) / (2.0 * a0_min) + 1.0;
    let n = 400;
    let grid: Vec<f64> = (0..=n).map(|k| -s_max + 2.0 * s_max * k as f64 / n as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&s| f(s)).collect();
    let mut best = f64::INFINITY;
    // refine around every local minimum of the scan
    for k in 0..=n {
        let left = if k == 0 { f64::INFINITY } else { vals[k - 1] };
        let right = if k == n { f64::INFINITY } else { vals[k + 1] };
        if vals[k] <= left && vals[k] <= right {
            let lo = grid[k.saturating_sub(1)];
            let hi = grid[(k + 1).min(n)];
            best = best.min(golden_min(&f, lo, hi));
        }
    }
    best.max(0.0).sqrt()
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a).abs() > 1e-12 * (1.0 + a.abs() + b.abs()) {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    f1.min(f2)
}

impl HalfspacePoint {
    pub fn new(triple: DirectionTriple) -> Self {
        let c_inf = limiting_speed(&triple);
        HalfspacePoint { triple, c_inf }
    }

    /// Constant coefficient of `A(s)` at speed `c`: `A2 − c² ρ G⁻¹`.
    pub fn constant_term(&self, c: f64) -> RMat3 {
        self.triple.a2 - self.triple.metric_inv * (c * c * self.triple.density)
    }

    pub fn polynomial(&self, c: f64) -> Result<SaQuadPoly> {
        SaQuadPoly::from_real3(&self.triple.a0, &self.triple.a1, &self.constant_term(c))
    }

    fn check_subsonic(&self, c: f64) -> Result<()> {
        if !(c.abs() < self.c_inf * (1.0 - 1e-12)) {
            return Err(Error::Supersonic { c, c_inf: self.c_inf });
        }
        Ok(())
    }

    /// `Z = −i(A0 Q + A1)` with `Q` from the sign-function factorization.
    pub fn impedance(&self, c: f64) -> Result<ImpedanceTensor> {
        self.check_subsonic(c)?;
        let a0 = to_complex(&self.triple.a0);
        let a1 = to_complex(&self.triple.a1);
        let q = factor3(&a0, &a1, &to_complex(&self.constant_term(c)))?;
        Ok(ImpedanceTensor { z: (a0 * q + a1) * (-I), q, c })
    }

    /// Same as [`impedance`](Self::impedance) with `Q` from contour moments.
    pub fn impedance_contour(&self, c: f64) -> Result<ImpedanceTensor> {
        self.check_subsonic(c)?;
        let f = spectral_factor(&self.polynomial(c)?)?;
        let q = CMat3::from_fn(|i, j| f.q[(i, j)]);
        let a0 = to_complex(&self.triple.a0);
        let a1 = to_complex(&self.triple.a1);
        Ok(ImpedanceTensor { z: (a0 * q + a1) * (-I), q, c })
    }

    /// `‖(Z − iA1ᵀ) A0⁻¹ (Z + iA1) − (A2 − c²ρG⁻¹)‖`.
    pub fn riccati_residual(&self, imp: &ImpedanceTensor) -> f64 {
        let a0inv = to_complex(&self.triple.a0.try_inverse().unwrap());
        let a1 = to_complex(&self.triple.a1);
        let lhs = (imp.z - a1.transpose() * I) * a0inv * (imp.z + a1 * I);
        norm2(&(lhs - to_complex(&self.constant_term(imp.c))))
    }

    /// Solves `iZ ∫A⁻¹ds = πiI + p.v.∫(sA0 + A1)A⁻¹ds` for `Z`.
    ///
    /// With `s = tan θ` both integrands become smooth on `[−π/2, π/2]` once
    /// the odd kernel `s/(1+s²)`, whose principal value vanishes, is
    /// subtracted from `s A0 A⁻¹`.
    pub fn impedance_via_integral(&self, speed: f64) -> Result<IntegralRepresentation> {
        self.check_subsonic(speed)?;
        let t = &self.triple;
        let m = self.constant_term(speed);
        let b = t.a1 + t.a1.transpose();
        let integrand = |th: f64| -> (RMat3, RMat3) {
            let (sn, cs) = th.sin_cos();
            // A(s) cos²θ = sin² A0 + sin cos B + cos² M
            let scaled = t.a0 * (sn * sn) + b * (sn * cs) + m * (cs * cs);
            let inv = scaled.try_inverse().unwrap_or_else(RMat3::zeros);
            // sec²θ A⁻¹ = inv and (s A0 A⁻¹ − s/(1+s²)) sec²θ = tanθ (A0 inv − I)
            let odd = (t.a0 * inv - RMat3::identity()) * (sn / cs);
            (inv, odd + t.a1 * inv)
        };
        let half = std::f64::consts::FRAC_PI_2;
        let (gx, gw) = gauss_legendre(16);
        let run = |panels: usize| -> (RMat3, RMat3) {
            let h = 2.0 * half / panels as f64;
            let mut l = RMat3::zeros();
            let mut r = RMat3::zeros();
            for k in 0..panels {
                let mid = -half + h * (k as f64 + 0.5);
                for (x, w) in gx.iter().zip(gw.iter()) {
                    let (li, ri) = integrand(mid + 0.5 * h * x);
                    l += li * (0.5 * h * w);
                    r += ri * (0.5 * h * w);
                }
            }
            (l, r)
        };
        let mut panels = 8;
        let (mut l, mut r) = run(panels);
        loop {
            panels *= 2;
            if panels > 4096 {
                return Err(Error::QuadratureFailure("integral representation of Z".into()));
            }
            let (l2, r2) = run(panels);
            let dl = (l2 - l).norm() / l2.norm();
            let dr = (r2 - r).norm() / (r2.norm() + l2.norm());
            l = l2;
            r = r2;
            if dl < 1e-13 && dr < 1e-13 {
                break;
            }
        }
        let linv = to_complex(&l.try_inverse().ok_or_else(|| Error::QuadratureFailure("singular left integral".into()))?);
        let z = (CMat3::identity() * c(std::f64::consts::PI, 0.0) - to_complex(&r) * I) * linv;
        Ok(IntegralRepresentation { z, left: l, right: r })
    }

    pub fn det_z(&self, c: f64) -> Result<f64> {
        Ok(det3(&self.impedance(c)?.z).re)
    }

    /// `d det Z / dc` from Jacobi's formula and [`impedance_dc`].
    pub fn det_z_dc(&self, imp: &ImpedanceTensor) -> Result<f64> {
        let dz = impedance_dc(imp, &self.triple)?;
        Ok((adjugate(&imp.z) * dz).trace().re)
    }

    /// Unique subsonic root of `det Z(c) = 0`, if any.
    pub fn rayleigh_speed(&self) -> Result<RayleighSolution> {
        let c_top = SONIC_GRID_LIMIT * self.c_inf;
        let grid: Vec<f64> = (0..=ROOT_GRID).map(|k| c_top * k as f64 / ROOT_GRID as f64).collect();
        let mut dets = Vec::with_capacity(grid.len());
        for &cg in &grid {
            dets.push(self.det_z(cg)?);
        }
        let det_min = dets.iter().copied().fold(f64::INFINITY, f64::min);
        let Some(k) = (1..grid.len()).find(|&k| dets[k] <= 0.0) else {
            // roots squeezed between the grid and c∞ are still flagged
            let (mut lo, mut flo) = (c_top, dets[grid.len() - 1]);
            for e in 4..=8 {
                let hi = self.c_inf * (1.0 - 10f64.powi(-e));
                let Ok(fhi) = self.det_z(hi) else { break };
                if fhi <= 0.0 {
                    let c_r = self.refine_root(lo, hi, flo, fhi)?;
                    return Err(Error::NearSonicRoot { c_r, c_inf: self.c_inf });
                }
                (lo, flo) = (hi, fhi);
            }
            return Ok(RayleighSolution {
                exists: false,
                c_r: f64::NAN,
                c_inf: self.c_inf,
                w: None,
                q: None,
                z: None,
                det_min,
            });
        };
        let c_r = self.refine_root(grid[k - 1], grid[k], dets[k - 1], dets[k])?;
        if c_r > NEAR_SONIC * self.c_inf {
            return Err(Error::NearSonicRoot { c_r, c_inf: self.c_inf });
        }
        let imp = self.impedance(c_r)?;
        let w = polarization(&imp.z)?;
        Ok(RayleighSolution {
            exists: true,
            c_r,
            c_inf: self.c_inf,
            w: Some(w),
            q: Some(imp.q),
            z: Some(imp.z),
            det_min,
        })
    }

    /// Safeguarded Newton inside a sign-change bracket `[lo, hi]`.
    pub fn refine_root(&self, mut lo: f64, mut hi: f64, mut flo: f64, mut fhi: f64) -> Result<f64> {
        let tol = 1e-12 * self.c_inf;
        let mut x = if (flo - fhi).abs() > 0.0 { lo + (hi - lo) * flo / (flo - fhi) } else { 0.5 * (lo + hi) };
        for _ in 0..200 {
            let imp = self.impedance(x)?;
            let fx = det3(&imp.z).re;
            if fx == 0.0 {
                return Ok(x);
            }
            if (fx > 0.0) == (flo > 0.0) {
                lo = x;
                flo = fx;
            } else {
                hi = x;
                fhi = fx;
            }
            let d = self.det_z_dc(&imp)?;
            let mut next = x - fx / d;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let step = (next - x).abs();
            x = next;
            if step < tol || (hi - lo) < tol {
                return Ok(x);
            }
        }
        let _ = fhi;
        Ok(x)
    }
}

/// `dZ/dc` from `iQ*Ż − iŻQ = −2cρG⁻¹`.
pub fn impedance_dc(imp: &ImpedanceTensor, t: &DirectionTriple) -> Result<CMat3> {
    let y = to_complex(&t.metric_inv) * c(0.0, 2.0 * imp.c * t.density);
    sylvester_adjoint(&imp.q, &y)
}

/// Unit null vector of a Hermitian `Z`, gauge: largest-modulus component real
/// and positive.
pub fn polarization(z: &CMat3) -> Result<CVec3> {
    let h = hermitian_part(z);
    let eig = SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..3).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].abs().partial_cmp(&eig.eigenvalues[b].abs()).unwrap());
    let scale = norm2(z).max(1e-300);
    if eig.eigenvalues[idx[1]].abs() < 1e-6 * scale {
        return Err(Error::RankDeficiencyAmbiguous);
    }
    let v: CVec3 = eig.eigenvectors.column(idx[0]).into_owned();
    Ok(fix_gauge(&v))
}

/// Normalizes and rotates the phase so the largest-modulus component is real
/// and positive.
pub fn fix_gauge(v: &CVec3) -> CVec3 {
    let k = (0..3).max_by(|&a, &b| v[a].norm().partial_cmp(&v[b].norm()).unwrap()).unwrap();
    let phase = v[k] / v[k].norm();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v * (phase.conj() / n)
}

/// `U(z) = exp(izQ) w` on the given depths.
pub fn decay_profile(q: &CMat3, w: &CVec3, zs: &[f64]) -> Vec<CVec3> {
    zs.iter().map(|&z| expm(&(q * c(0.0, z))) * w).collect()
}

/// Smallest imaginary part of the eigenvalues of `Q`.
pub fn decay_rate(q: &CMat3) -> f64 {
    use crate::linalg::ComplexEigen;
    q.complex_eigenvalues_c().iter().fold(f64::INFINITY, |m, z| m.min(z.im))
}

/// Static energy identity: returns `(∫ C ε : ε̄ dz, Re w*Z(0)w)` for the
/// decaying solution with surface displacement `w`.
pub fn energy_identity_check(
    c_tensor: &StiffnessTensor,
    eta: [f64; 3],
    normal: [f64; 3],
    w: &CVec3,
) -> Result<(f64, f64)> {
    if w.iter().all(|z| z.norm() == 0.0) {
        return Ok((0.0, 0.0));
    }
    let field = crate::material::MaterialField::homogeneous(*c_tensor, 1.0)?;
    let triple = crate::material::direction_triple(&field, [0.0; 3], eta, normal)?;
    let point = HalfspacePoint::new(triple);
    let imp = point.impedance(0.0)?;
    let rhs = (w.adjoint() * imp.z * w)[(0, 0)].re;
    let beta = decay_rate(&imp.q);
    let z_max = 40.0 / beta;
    let e = Vector3::from(eta);
    let n = Vector3::from(normal);
    let energy_density = |z: f64| {
        let u = expm(&(imp.q * c(0.0, z))) * w;
        let qu = imp.q * u;
        // ε_kl = i/2 (η_l u_k + n_l (Qu)_k + η_k u_l + n_k (Qu)_l)
        let mut grad = CMat3::zeros();
        for k in 0..3 {
            for l in 0..3 {
                grad[(k, l)] = I * (u[k] * e[l] + qu[k] * n[l]);
            }
        }
        let eps = (grad + grad.transpose()) * c(0.5, 0.0);
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        acc += c_tensor.get(i, j, k, l) * (eps[(i, j)] * eps[(k, l)].conj()).re;
                    }
                }
            }
        }
        acc
    };
    let (gx, gw) = gauss_legendre(16);
    let run = |panels: usize| {
        let h = z_max / panels as f64;
        let mut s = 0.0;
        for k in 0..panels {
            let mid = h * (k as f64 + 0.5);
            for (x, wt) in gx.iter().zip(gw.iter()) {
                s += energy_density(mid + 0.5 * h * x) * 0.5 * h * wt;
            }
        }
        s
    };
    let mut panels = 8;
    let mut lhs = run(panels);
    loop {
        panels *= 2;
        let next = run(panels);
        let done = (next - lhs).abs() <= 1e-13 * next.abs() || panels >= 1024;
        lhs = next;
        if done {
            break;
        }
    }
    Ok((lhs, rhs))
}

/// Convenience: full polynomial for a complex speed-free triple (used by tests).
pub fn triple_polynomial(t: &DirectionTriple, c_speed: f64) -> Result<SaQuadPoly> {
    let m = t.a2 - t.metric_inv * (c_speed * c_speed * t.density);
    SaQuadPoly::from_real3(&t.a0, &t.a1, &m)
}

/// `Q` as a fixed-size matrix from a dynamic factor.
pub fn to_cmat3(m: &CMat) -> CMat3 {
    CMat3::from_fn(|i, j| m[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{direction_triple, MaterialField};

    fn iso_point(l: f64, m: f64, rho: f64) -> HalfspacePoint {
        let f = MaterialField::homogeneous(StiffnessTensor::from_isotropic(l, m).unwrap(), rho).unwrap();
        HalfspacePoint::new(direction_triple(&f, [0.0; 3], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]).unwrap())
    }

    #[test]
    fn limiting_speed_isotropic_and_scaling() {
        let p = iso_point(1.0, 1.0, 1.0);
        assert!((p.c_inf - 1.0).abs() < 1e-10);
        let p4 = iso_point(4.0, 4.0, 1.0);
        assert!((p4.c_inf - 2.0).abs() < 1e-10);
        let pr = iso_point(1.0, 1.0, 4.0);
        assert!((pr.c_inf - 0.5).abs() < 1e-10);
    }

    #[test]
    fn isotropic_impedance_matches_closed_form() {
        // oracle: displacement u = a e^{i(x + s_s z)} (SV, SH) + b e^{i(x + s_p z)} (P)
        let p = iso_point(1.0, 1.0, 1.0);
        let cc: f64 = 0.9;
        let imp = p.impedance(cc).unwrap();
        let (lam, mu) = (1.0, 1.0);
        let ss = c(0.0, (1.0 - cc * cc).sqrt());
        let sp = c(0.0, (1.0 - cc * cc / 3.0).sqrt());
        // eigenvectors of the acoustic tensor at (1, 0, s): SV ⟂ (1,0,s), P ∥ (1,0,s), SH = e2
        let vs = CVec3::new(-ss, c(0.0, 0.0), c(1.0, 0.0));
        let vp = CVec3::new(c(1.0, 0.0), c(0.0, 0.0), sp);
        let vh = CVec3::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let u = CMat3::from_columns(&[vs, vp, vh]);
        let s_diag = CMat3::from_diagonal(&CVec3::new(ss, sp, ss));
        // traction τ_i = i (C_{i3k3} (s u)_k + C_{i3k1} u_k) = -Z u
        let a0 = to_complex(&RMat3::from_diagonal(&Vector3::new(mu, mu, lam + 2.0 * mu)));
        let mut a1 = CMat3::zeros();
        a1[(0, 2)] = c(mu, 0.0);
        a1[(2, 0)] = c(lam, 0.0);
        let tau = (a0 * u * s_diag + a1 * u) * I;
        let z_oracle = -tau * u.try_inverse().unwrap();
        assert!((imp.z - z_oracle).norm() < 1e-11, "{} vs {}", imp.z, z_oracle);
    }

    #[test]
    fn barnett_lothe_basics() {
        let p = iso_point(1.0, 1.0, 1.0);
        let z0 = p.impedance(0.0).unwrap();
        let ev = crate::linalg::hermitian_eigenvalues(&z0.z);
        assert!(ev[0] > 0.0);
        let imp = p.impedance(0.7).unwrap();
        assert!((imp.z - imp.z.adjoint()).norm() < 1e-12);
        assert!(p.riccati_residual(&imp) < 1e-12);
        assert!(impedance_dc(&z0, &p.triple).unwrap().norm() == 0.0);
        assert!(matches!(p.impedance(1.0), Err(Error::Supersonic { .. })));
    }

    #[test]
    fn contour_and_sign_routes_agree() {
        let p = iso_point(0.5, 1.2, 1.3);
        let a = p.impedance(0.6).unwrap();
        let b = p.impedance_contour(0.6).unwrap();
        assert!((a.z - b.z).norm() < 1e-10 * a.z.norm());
    }

    #[test]
    fn integral_representation_isotropic() {
        let p = iso_point(1.0, 1.0, 1.0);
        let rep = p.impedance_via_integral(0.8).unwrap();
        let imp = p.impedance(0.8).unwrap();
        assert!((rep.z - imp.z).norm() < 1e-10 * imp.z.norm());
        assert!(pencil_eigenvalues(&rep.left, &RMat3::identity()).unwrap()[0] > 0.0);
    }

    #[test]
    fn rayleigh_isotropic_poisson_quarter() {
        let p = iso_point(1.0, 1.0, 1.0);
        let sol = p.rayleigh_speed().unwrap();
        assert!(sol.exists);
        assert!((sol.c_r - 0.919_401_7).abs() < 1e-6, "{}", sol.c_r);
        let w = sol.w.unwrap();
        assert!(w[1].norm() < 1e-10);
        assert!(w.iter().any(|z| z.im.abs() > 1e-3));
        assert!(p.det_z(0.0).unwrap() > 0.0);
    }

    #[test]
    fn decay_profile_diagonal() {
        let q = CMat3::from_diagonal(&CVec3::new(I, I * 2.0, I * 3.0));
        let w = CVec3::new(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0));
        let u = decay_profile(&q, &w, &[0.0, 1.0]);
        assert_eq!(u[0], w);
        for k in 0..3 {
            assert!((u[1][k].re - (-(k as f64 + 1.0)).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn energy_identity_isotropic() {
        let ct = StiffnessTensor::from_isotropic(1.0, 1.0).unwrap();
        let w = CVec3::new(c(0.3, 0.1), c(-0.2, 0.5), c(1.0, -0.4));
        let (lhs, rhs) = energy_identity_check(&ct, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], &w).unwrap();
        assert!(lhs > 0.0);
        assert!((lhs - rhs).abs() < 1e-9 * lhs, "{lhs} {rhs}");
        let (a, b) = energy_identity_check(&ct, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], &CVec3::zeros()).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
    }
}
