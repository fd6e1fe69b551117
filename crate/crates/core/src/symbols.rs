//! Symbol data on the boundary: the impedance symbol `Z0(y, ζ)` and its
//! derivatives, the lower-order terms `Q₋₁`, `Z_sub`, the curvature terms
//! `B0`, `B1`, `T` and the transport matrix `H`.
//!
//! Everything is expressed in adapted coordinates `(y¹, y², x³)` with
//! contravariant stiffness components `C^{ijkl}` and covariant displacement.
//! Directions of differentiation are [`Dir::X`] for `x¹, x², x³` (1-based)
//! and [`Dir::Xi`] for `ξ0, ξ1, ξ2`.
//!
//! All derivatives of `Z0` come from differentiating the Riccati equation
//! `Q*A0Q = A2 − ξ0²ρG⁻¹` (with `A0Q = iZ0 − A1`), which gives
//! `Q*Z′ − Z′Q = −i(M′ + Q*A0′Q + Q*A1′ + A1′ᵀQ)`.

use log::warn;
use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{christoffel_from_jet, Christoffel, SurfacePatch};
use crate::halfspace::{impedance_dc, HalfspacePoint, ImpedanceTensor};
use crate::linalg::{
    adjugate, adjugate_derivative, det3, det_derivative, det_second_derivative, norm2, sylvester_adjoint,
    sylvester_gap, to_complex, CMat3, RMat3, C64, I,
};
use crate::material::{DirectionTriple, MaterialField, Tensor4};
use crate::matpoly::factor3;

/// Spectral gap of `Q0` below which Sylvester solves are reported as
/// ill-conditioned.
pub const SYLVESTER_GAP_WARN: f64 = 1e-6;

/// Direction of differentiation: `X(k)` is `x^k` for `k = 1, 2, 3`,
/// `Xi(j)` is `ξ_j` for `j = 0, 1, 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    X(usize),
    Xi(usize),
}

impl Dir {
    fn check(self) -> Result<Self> {
        match self {
            Dir::X(1..=3) | Dir::Xi(0..=2) => Ok(self),
            other => Err(Error::Unsupported(format!("direction {other:?}"))),
        }
    }
}

/// Boundary point with covector `ζ = (ξ0, ξ1, ξ2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub y: [f64; 2],
    pub xi0: f64,
    pub eta: [f64; 2],
}

impl PhasePoint {
    pub fn new(y: [f64; 2], xi0: f64, eta: [f64; 2]) -> Self {
        PhasePoint { y, xi0, eta }
    }
}

/// Material field together with the boundary chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Medium {
    pub material: MaterialField,
    pub surface: SurfacePatch,
}

/// Coordinate components of the coefficients and their `x`-derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCoefficients {
    pub c: Tensor4,
    /// `∂_m C^{ijkl}`, m = x¹, x², x³.
    pub dc: [Tensor4; 3],
    /// Second derivatives; available on the plane only.
    pub d2c: Option<[[Tensor4; 3]; 3]>,
    pub density: f64,
    pub g_inv: RMat3,
    pub d_g_inv: [RMat3; 3],
    /// `ρ G⁻¹`, the coefficient of `ξ0²`.
    pub rho_g: RMat3,
    pub d_rho_g: [RMat3; 3],
    pub d2_rho_g: Option<[[RMat3; 3]; 3]>,
    pub christoffel: Christoffel,
}

/// `T'^{ijkl} = M0_ia M1_jb M2_kc M3_ld T^{abcd}`.
pub fn transform_slots(t: &Tensor4, m: [&RMat3; 4]) -> Tensor4 {
    let mut cur = *t;
    for (slot, mat) in m.iter().enumerate() {
        let mut next = Tensor4::default();
        for idx in 0..81 {
            let mut digits = [idx / 27, (idx / 9) % 3, (idx / 3) % 3, idx % 3];
            let target = digits[slot];
            let mut acc = 0.0;
            for a in 0..3 {
                digits[slot] = a;
                acc += mat[(target, a)] * cur.data[digits[0] * 27 + digits[1] * 9 + digits[2] * 3 + digits[3]];
            }
            next.data[idx] = acc;
        }
        cur = next;
    }
    cur
}

impl Medium {
    pub fn new(material: MaterialField, surface: SurfacePatch) -> Self {
        Medium { material, surface }
    }

    /// Coefficients at adapted coordinates `(y, x³)`.
    pub fn local(&self, y: [f64; 2], x3: f64) -> Result<LocalCoefficients> {
        let jet = self.surface.coordinate_jet(y, x3)?;
        let p = self.material.eval(jet.x.into())?;
        let cart = p.stiffness.tensor();
        let lam = &jet.lambda;
        let c = cart.transform(lam);
        let mut dc = [Tensor4::default(); 3];
        let mut d_rho = [0.0; 3];
        let cart_grad: Vec<Tensor4> = p.d_stiffness.iter().map(Tensor4::from_voigt).collect();
        for m in 0..3 {
            let dl = &jet.d_lambda[m];
            let mut t = Tensor4::default();
            if dl.amax() > 0.0 {
                t.add_scaled(&transform_slots(&cart, [dl, lam, lam, lam]), 1.0);
                t.add_scaled(&transform_slots(&cart, [lam, dl, lam, lam]), 1.0);
                t.add_scaled(&transform_slots(&cart, [lam, lam, dl, lam]), 1.0);
                t.add_scaled(&transform_slots(&cart, [lam, lam, lam, dl]), 1.0);
            }
            let mut directional = Tensor4::default();
            for e in 0..3 {
                directional.add_scaled(&cart_grad[e], jet.jacobian[(e, m)]);
                d_rho[m] += p.d_density[e] * jet.jacobian[(e, m)];
            }
            if directional.max_abs() > 0.0 {
                t.add_scaled(&directional.transform(lam), 1.0);
            }
            dc[m] = t;
        }
        let g_inv = lam * lam.transpose();
        let d_g_inv = [0, 1, 2].map(|m| jet.d_lambda[m] * lam.transpose() + lam * jet.d_lambda[m].transpose());
        let rho_g = g_inv * p.density;
        let d_rho_g = [0, 1, 2].map(|m| g_inv * d_rho[m] + d_g_inv[m] * p.density);
        let (d2c, d2_rho_g) = if self.surface.is_plane() {
            let mut d2c = [[Tensor4::default(); 3]; 3];
            let mut d2r = [[RMat3::zeros(); 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    d2c[a][b] = Tensor4::from_voigt(&p.d2_stiffness[a][b]);
                    d2r[a][b] = RMat3::identity() * p.d2_density[a][b];
                }
            }
            (Some(d2c), Some(d2r))
        } else {
            (None, None)
        };
        Ok(LocalCoefficients {
            c,
            dc,
            d2c,
            density: p.density,
            g_inv,
            d_g_inv,
            rho_g,
            d_rho_g,
            d2_rho_g,
            christoffel: christoffel_from_jet(&jet),
        })
    }

    /// Direction triple at the boundary point `y` for the covector `eta`.
    pub fn triple(&self, y: [f64; 2], eta: [f64; 2]) -> Result<DirectionTriple> {
        let l = self.local(y, 0.0)?;
        Ok(triple_from_local(&l, eta))
    }
}

pub fn triple_from_local(l: &LocalCoefficients, eta: [f64; 2]) -> DirectionTriple {
    DirectionTriple::from_tensor(&l.c, l.density, l.g_inv, eta)
}

/// `[T^{i3k3}]`.
fn normal_block(t: &Tensor4) -> RMat3 {
    RMat3::from_fn(|i, k| t.get(i, 2, k, 2))
}

/// `[T^{i3kλ} e_λ]`.
fn mixed_block(t: &Tensor4, e: [f64; 2]) -> RMat3 {
    RMat3::from_fn(|i, k| t.get(i, 2, k, 0) * e[0] + t.get(i, 2, k, 1) * e[1])
}

/// `[T^{iλkμ} u_λ v_μ]`.
fn tangential_block(t: &Tensor4, u: [f64; 2], v: [f64; 2]) -> RMat3 {
    RMat3::from_fn(|i, k| {
        let mut s = 0.0;
        for l in 0..2 {
            for m in 0..2 {
                s += t.get(i, l, k, m) * u[l] * v[m];
            }
        }
        s
    })
}

/// Derivatives of `(A0, A1, M)` with `M = A2 − ξ0² ρG⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub a0: RMat3,
    pub a1: RMat3,
    pub m: RMat3,
}

/// Derivative of the coefficient matrices along zero, one or two directions.
pub fn coefficient_derivative(
    l: &LocalCoefficients,
    xi0: f64,
    eta: [f64; 2],
    dirs: &[Dir],
) -> Result<CoefficientSet> {
    let mut xs = Vec::new();
    let mut hs = Vec::new();
    let mut k0 = 0;
    for d in dirs {
        match d.check()? {
            Dir::X(k) => xs.push(k - 1),
            Dir::Xi(0) => k0 += 1,
            Dir::Xi(j) => hs.push(j - 1),
        }
    }
    let (t, r) = match xs.len() {
        0 => (l.c, l.rho_g),
        1 => (l.dc[xs[0]], l.d_rho_g[xs[0]]),
        _ => match (&l.d2c, &l.d2_rho_g) {
            (Some(c2), Some(r2)) => (c2[xs[0]][xs[1]], r2[xs[0]][xs[1]]),
            _ => return Err(Error::Unsupported("second x-derivatives on a curved boundary".into())),
        },
    };
    let unit = |j: usize| if j == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
    let zero = RMat3::zeros();
    let (a0, a1, a2) = if k0 > 0 {
        (zero, zero, zero)
    } else {
        match hs.len() {
            0 => (normal_block(&t), mixed_block(&t, eta), tangential_block(&t, eta, eta)),
            1 => {
                let e = unit(hs[0]);
                (zero, mixed_block(&t, e), tangential_block(&t, e, eta) + tangential_block(&t, eta, e))
            }
            _ => {
                let (ea, eb) = (unit(hs[0]), unit(hs[1]));
                (zero, zero, tangential_block(&t, ea, eb) + tangential_block(&t, eb, ea))
            }
        }
    };
    let inertia = if !hs.is_empty() {
        zero
    } else {
        match k0 {
            0 => r * (xi0 * xi0),
            1 => r * (2.0 * xi0),
            2 => r * 2.0,
            _ => zero,
        }
    };
    Ok(CoefficientSet { a0, a1, m: a2 - inertia })
}

/// Solves `Q0* X − X Q0 = Y`; warns when the spectral gap is small.
pub fn sylvester_solve(q0: &CMat3, y: &CMat3) -> Result<CMat3> {
    let gap = sylvester_gap(q0);
    if gap < SYLVESTER_GAP_WARN {
        warn!("Sylvester equation ill-conditioned: spectral gap {gap:e}");
    }
    sylvester_adjoint(q0, y)
}

/// First derivative of the factorization along one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstDerivative {
    pub dir: Dir,
    pub coeffs: CoefficientSet,
    /// `Z0′`.
    pub z: CMat3,
    /// `Q0′`.
    pub q: CMat3,
}

/// Frozen factorization at one phase point with the machinery to
/// differentiate it.
#[derive(Debug, Clone)]
pub struct SymbolContext {
    pub point: PhasePoint,
    pub x3: f64,
    pub local: LocalCoefficients,
    pub base: CoefficientSet,
    pub q: CMat3,
    pub z: CMat3,
    a0_inv: CMat3,
}

impl SymbolContext {
    pub fn new(medium: &Medium, point: PhasePoint) -> Result<Self> {
        Self::at_depth(medium, point, 0.0)
    }

    /// Context at `(y, x³)`; used for finite-difference checks in `x³`.
    pub fn at_depth(medium: &Medium, point: PhasePoint, x3: f64) -> Result<Self> {
        let local = medium.local(point.y, x3)?;
        Self::from_local(local, point, x3)
    }

    pub fn from_local(local: LocalCoefficients, point: PhasePoint, x3: f64) -> Result<Self> {
        if point.eta[0] == 0.0 && point.eta[1] == 0.0 {
            return Err(Error::InvalidDirection);
        }
        let base = coefficient_derivative(&local, point.xi0, point.eta, &[])?;
        let a0 = to_complex(&base.a0);
        let a1 = to_complex(&base.a1);
        let q = factor3(&a0, &a1, &to_complex(&base.m))?;
        let z = (a0 * q + a1) * (-I);
        let a0_inv = a0.try_inverse().ok_or(Error::SingularLeadingCoefficient)?;
        Ok(SymbolContext { point, x3, local, base, q, z, a0_inv })
    }

    pub fn a0(&self) -> CMat3 {
        to_complex(&self.base.a0)
    }

    fn coeffs(&self, dirs: &[Dir]) -> Result<CoefficientSet> {
        coefficient_derivative(&self.local, self.point.xi0, self.point.eta, dirs)
    }

    /// `Z0′` and `Q0′` along `dir`.
    pub fn dz(&self, dir: Dir) -> Result<FirstDerivative> {
        let k = self.coeffs(&[dir])?;
        let q = &self.q;
        let qh = q.adjoint();
        let a0p = to_complex(&k.a0);
        let a1p = to_complex(&k.a1);
        let y = (to_complex(&k.m) + qh * a0p * q + qh * a1p + a1p.transpose() * q) * (-I);
        let z = sylvester_solve(q, &y)?;
        let dq = self.a0_inv * (z * I - a1p - a0p * q);
        Ok(FirstDerivative { dir, coeffs: k, z, q: dq })
    }

    /// Mixed second derivative `∂_a ∂_b Z0` from the first derivatives.
    pub fn d2z_with(&self, da: &FirstDerivative, db: &FirstDerivative) -> Result<CMat3> {
        let kab = self.coeffs(&[da.dir, db.dir])?;
        let q = &self.q;
        let qh = q.adjoint();
        let qb = &db.q;
        let qbh = qb.adjoint();
        let a0a = to_complex(&da.coeffs.a0);
        let a1a = to_complex(&da.coeffs.a1);
        let a0ab = to_complex(&kab.a0);
        let a1ab = to_complex(&kab.a1);
        let yab = (to_complex(&kab.m)
            + qbh * a0a * q
            + qh * a0ab * q
            + qh * a0a * qb
            + qbh * a1a
            + qh * a1ab
            + a1ab.transpose() * q
            + a1a.transpose() * qb)
            * (-I);
        let rhs = yab - qbh * da.z + da.z * qb;
        sylvester_solve(q, &rhs)
    }

    pub fn d2z(&self, a: Dir, b: Dir) -> Result<CMat3> {
        let da = self.dz(a)?;
        let db = self.dz(b)?;
        self.d2z_with(&da, &db)
    }

    /// Residual of the Riccati equation at the base point.
    pub fn riccati_residual(&self) -> f64 {
        let q = &self.q;
        norm2(&(q.adjoint() * self.a0() * q - to_complex(&self.base.m)))
    }

    pub fn impedance(&self) -> ImpedanceTensor {
        ImpedanceTensor { z: self.z, q: self.q, c: -self.point.xi0 }
    }
}

/// `∂Z0` at a phase point.
pub fn dz0(medium: &Medium, point: PhasePoint, dir: Dir) -> Result<CMat3> {
    Ok(SymbolContext::new(medium, point)?.dz(dir)?.z)
}

/// `∂_a ∂_b Z0` at a phase point.
pub fn d2z0(medium: &Medium, point: PhasePoint, a: Dir, b: Dir) -> Result<CMat3> {
    SymbolContext::new(medium, point)?.d2z(a, b)
}

/// `B^{ikl} = C^{ijkl}_{,j} − C^{ilmn}Γ^k_{mn} + C^{jmkl}Γ^i_{jm} + C^{ijkl}Γ^m_{mj}`,
/// the coefficient of `∂_l u_k` in `σ^{ij}_{;j}`. Returns `B0 = [B^{ik3}]`,
/// `B1 = [B^{ikλ}η_λ]`.
pub fn first_order_coeffs(l: &LocalCoefficients, eta: [f64; 2]) -> (RMat3, RMat3) {
    let c = &l.c;
    let g = &l.christoffel;
    let mut b = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            for ll in 0..3 {
                let mut s = 0.0;
                for j in 0..3 {
                    s += l.dc[j].get(i, j, k, ll);
                    let trace_j: f64 = (0..3).map(|m| g[m][m][j]).sum();
                    s += c.get(i, j, k, ll) * trace_j;
                    for m in 0..3 {
                        s -= c.get(i, ll, j, m) * g[k][j][m];
                        s += c.get(j, m, k, ll) * g[i][j][m];
                    }
                }
                b[i][k][ll] = s;
            }
        }
    }
    let b0 = RMat3::from_fn(|i, k| b[i][k][2]);
    let b1 = RMat3::from_fn(|i, k| b[i][k][0] * eta[0] + b[i][k][1] * eta[1]);
    (b0, b1)
}

/// `T^{ik} = C^{i3jl} Γ^k_{jl}`.
pub fn traction_curvature_term(l: &LocalCoefficients) -> RMat3 {
    RMat3::from_fn(|i, k| {
        let mut s = 0.0;
        for j in 0..3 {
            for m in 0..3 {
                s += l.c.get(i, 2, j, m) * l.christoffel[k][j][m];
            }
        }
        s
    })
}

/// Right side of `Q0*(A0Q₋₁) − (A0Q₋₁)Q0 = −i(B0Q0 + B1) − iA0∂₃Q0 + iΣ_j ∂_{ξj}Q0* A0 ∂_{xj}Q0`.
pub fn q_minus1_rhs(
    ctx: &SymbolContext,
    b0: &RMat3,
    b1: &RMat3,
    d3: &FirstDerivative,
    dx: &[FirstDerivative; 2],
    dxi: &[FirstDerivative; 2],
) -> CMat3 {
    let a0 = ctx.a0();
    let mut r = (to_complex(b0) * ctx.q + to_complex(b1) + a0 * d3.q) * (-I);
    for j in 0..2 {
        r += dxi[j].q.adjoint() * a0 * dx[j].q * I;
    }
    r
}

/// Order −1 part of the factor `Q`.
pub fn q_minus1(
    ctx: &SymbolContext,
    b0: &RMat3,
    b1: &RMat3,
    d3: &FirstDerivative,
    dx: &[FirstDerivative; 2],
    dxi: &[FirstDerivative; 2],
) -> Result<CMat3> {
    let x = sylvester_solve(&ctx.q, &q_minus1_rhs(ctx, b0, b1, d3, dx, dxi))?;
    Ok(ctx.a0_inv * x)
}

/// `Z_sub = Z₋₁ − (1/2i) Σ_j ∂²Z0/∂x^j∂ξ_j` with `Z₋₁ = T − iA0Q₋₁`.
pub fn z_subprincipal(ctx: &SymbolContext, q_m1: &CMat3, t: &RMat3, mixed: &[CMat3; 2]) -> CMat3 {
    let z_m1 = to_complex(t) - ctx.a0() * q_m1 * I;
    // −1/(2i) = i/2
    z_m1 + (mixed[0] + mixed[1]) * C64::new(0.0, 0.5)
}

/// Hamilton function data `h = ξ0 + c_R(y, η)` at a surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianData {
    pub c_r: f64,
    pub d_eta: [f64; 2],
    pub d_y: [f64; 2],
    /// `b = ∂_{ξ0} det Z0` on-shell.
    pub b: f64,
}

/// On-shell factorization with the first derivatives used by the Hamiltonian.
#[derive(Debug, Clone)]
pub struct OnShell {
    pub data: HamiltonianData,
    pub ctx: SymbolContext,
    pub d_xi0: FirstDerivative,
    pub d_xi: [FirstDerivative; 2],
    pub d_x: [FirstDerivative; 2],
}

fn impedance_at(t: &DirectionTriple, speed: f64) -> Result<ImpedanceTensor> {
    let a0 = to_complex(&t.a0);
    let a1 = to_complex(&t.a1);
    let m = to_complex(&(t.a2 - t.metric_inv * (speed * speed * t.density)));
    let q = factor3(&a0, &a1, &m)?;
    Ok(ImpedanceTensor { z: (a0 * q + a1) * (-I), q, c: speed })
}

/// Newton iteration on `det Z(c)` from a nearby speed.
fn warm_root(t: &DirectionTriple, guess: f64) -> Option<f64> {
    let mut x = guess;
    for _ in 0..40 {
        let imp = impedance_at(t, x).ok()?;
        let f = det3(&imp.z).re;
        let df = (adjugate(&imp.z) * impedance_dc(&imp, t).ok()?).trace().re;
        let step = f / df;
        if !step.is_finite() || df >= 0.0 {
            return None;
        }
        x -= step;
        if (x - guess).abs() > 0.2 * guess.abs() {
            return None;
        }
        if step.abs() <= 1e-14 * x.abs() {
            return Some(x);
        }
    }
    None
}

/// Rayleigh speed `c_R(y, η)`; `guess` enables a warm-started Newton solve.
pub fn rayleigh_root(medium: &Medium, y: [f64; 2], eta: [f64; 2], guess: Option<f64>) -> Result<(f64, LocalCoefficients)> {
    if eta[0] == 0.0 && eta[1] == 0.0 {
        return Err(Error::InvalidDirection);
    }
    let l = medium.local(y, 0.0)?;
    let t = triple_from_local(&l, eta);
    if let Some(cr) = guess.filter(|g| *g > 0.0).and_then(|g| warm_root(&t, g)) {
        return Ok((cr, l));
    }
    let sol = HalfspacePoint::new(t).rayleigh_speed()?;
    if !sol.exists {
        return Err(Error::NoSubsonicWave);
    }
    Ok((sol.c_r, l))
}

/// On-shell context, `c_R` and its gradients by implicit differentiation of
/// `det Z0(y, −c_R, η) = 0`.
pub fn on_shell(medium: &Medium, y: [f64; 2], eta: [f64; 2], guess: Option<f64>) -> Result<OnShell> {
    let (c_r, l) = rayleigh_root(medium, y, eta, guess)?;
    let ctx = SymbolContext::from_local(l, PhasePoint::new(y, -c_r, eta), 0.0)?;
    let d_xi0 = ctx.dz(Dir::Xi(0))?;
    let d_xi = [ctx.dz(Dir::Xi(1))?, ctx.dz(Dir::Xi(2))?];
    let d_x = [ctx.dz(Dir::X(1))?, ctx.dz(Dir::X(2))?];
    let b = det_derivative(&ctx.z, &d_xi0.z).re;
    let grad = |d: &FirstDerivative| det_derivative(&ctx.z, &d.z).re / b;
    let data = HamiltonianData {
        c_r,
        d_eta: [grad(&d_xi[0]), grad(&d_xi[1])],
        d_y: [grad(&d_x[0]), grad(&d_x[1])],
        b,
    };
    Ok(OnShell { data, ctx, d_xi0, d_xi, d_x })
}

pub fn hamiltonian_data(medium: &Medium, y: [f64; 2], eta: [f64; 2]) -> Result<HamiltonianData> {
    Ok(on_shell(medium, y, eta, None)?.data)
}

/// Complete symbol data at an on-shell point.
#[derive(Debug, Clone)]
pub struct SymbolJet {
    pub point: PhasePoint,
    pub hamiltonian: HamiltonianData,
    pub z0: CMat3,
    pub q0: CMat3,
    /// `∂Z0/∂ξ_j`, j = 0, 1, 2.
    pub dz_xi: [CMat3; 3],
    /// `∂Z0/∂x^λ`, λ = 1, 2.
    pub dz_x: [CMat3; 2],
    pub dz_x3: CMat3,
    /// `∂²Z0/∂x^j∂ξ_j`, j = 1, 2.
    pub mixed: [CMat3; 2],
    pub d3_q0: CMat3,
    pub q_m1: CMat3,
    pub b0: RMat3,
    pub b1: RMat3,
    pub t: RMat3,
    pub z_m1: CMat3,
    pub z_sub: CMat3,
    /// Cofactor (adjugate) matrix `bB` of `Z0`.
    pub cofactor: CMat3,
    /// `{h, b}` with `b` replaced by `∂_{ξ0} det Z0`.
    pub bracket_hb: f64,
    /// `{bB, Z0}`.
    pub bracket_cofactor: CMat3,
    /// Transport matrix acting on the null space of `Z0`.
    pub transport: CMat3,
}

/// Builds all symbol data at `(y, η)` on-shell.
pub fn symbol_jet(medium: &Medium, y: [f64; 2], eta: [f64; 2], guess: Option<f64>) -> Result<SymbolJet> {
    let os = on_shell(medium, y, eta, guess)?;
    symbol_jet_from(&os)
}

pub fn symbol_jet_from(os: &OnShell) -> Result<SymbolJet> {
    let ctx = &os.ctx;
    let hd = os.data;
    let z = &ctx.z;
    let d3 = ctx.dz(Dir::X(3))?;
    let mixed = [ctx.d2z_with(&os.d_x[0], &os.d_xi[0])?, ctx.d2z_with(&os.d_x[1], &os.d_xi[1])?];
    let (b0, b1) = first_order_coeffs(&ctx.local, ctx.point.eta);
    let t = traction_curvature_term(&ctx.local);
    let q_m1 = q_minus1(ctx, &b0, &b1, &d3, &os.d_x, &os.d_xi)?;
    let z_sub = z_subprincipal(ctx, &q_m1, &t, &mixed);
    let z_m1 = to_complex(&t) - ctx.a0() * q_m1 * I;

    let cofactor = adjugate(z);
    let mut bracket_cofactor = CMat3::zeros();
    let mut bracket_hb = 0.0;
    for j in 0..2 {
        let (dxi, dx) = (&os.d_xi[j], &os.d_x[j]);
        bracket_cofactor += adjugate_derivative(z, &dxi.z) * dx.z - adjugate_derivative(z, &dx.z) * dxi.z;
        let db_x = det_second_derivative(z, &os.d_xi0.z, &dx.z, &ctx.d2z_with(&os.d_xi0, dx)?).re;
        let db_xi = det_second_derivative(z, &os.d_xi0.z, &dxi.z, &ctx.d2z_with(&os.d_xi0, dxi)?).re;
        bracket_hb += hd.d_eta[j] * db_x - hd.d_y[j] * db_xi;
    }
    let transport = reduced_transport(hd.b, &cofactor, &bracket_cofactor, bracket_hb, &z_sub);
    Ok(SymbolJet {
        point: ctx.point,
        hamiltonian: hd,
        z0: *z,
        q0: ctx.q,
        dz_xi: [os.d_xi0.z, os.d_xi[0].z, os.d_xi[1].z],
        dz_x: [os.d_x[0].z, os.d_x[1].z],
        dz_x3: d3.z,
        mixed,
        d3_q0: d3.q,
        q_m1,
        b0,
        b1,
        t,
        z_m1,
        z_sub,
        cofactor,
        bracket_hb,
        bracket_cofactor,
        transport,
    })
}

/// `H = ½ b⁻¹({bB, Z0} + {h, b}) + i b⁻¹ bB Z_sub`, valid on the null space
/// of `Z0`.
pub fn reduced_transport(b: f64, cofactor: &CMat3, bracket_cofactor: &CMat3, bracket_hb: f64, z_sub: &CMat3) -> CMat3 {
    let id = CMat3::identity();
    (bracket_cofactor + id * C64::from(bracket_hb)) * C64::from(0.5 / b) + cofactor * z_sub * C64::new(0.0, 1.0 / b)
}

/// Transport matrix at `(y, η)` on-shell.
pub fn transport_matrix(medium: &Medium, y: [f64; 2], eta: [f64; 2]) -> Result<Matrix3<C64>> {
    Ok(symbol_jet(medium, y, eta, None)?.transport)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{graded_medium, isotropic_medium, rng};
    use crate::linalg::{c, expm, gauss_legendre, hermitian_part};
    use crate::halfspace::{decay_rate, polarization};

    const EPS3: f64 = 6.055454452393343e-6; // ε^{1/3}

    fn rel(a: &CMat3, b: &CMat3) -> f64 {
        norm2(&(a - b)) / norm2(b).max(1e-300)
    }

    /// Richardson-extrapolated central difference.
    fn richardson(f: impl Fn(f64) -> CMat3, h: f64) -> CMat3 {
        let d = |h: f64| (f(h) - f(-h)) / c(2.0 * h, 0.0);
        (d(0.5 * h) * c(4.0, 0.0) - d(h)) / c(3.0, 0.0)
    }

    fn z_at(m: &Medium, p: PhasePoint, x3: f64, dir: Dir, s: f64) -> CMat3 {
        let mut p = p;
        let mut x3 = x3;
        match dir {
            Dir::X(3) => x3 += s,
            Dir::X(k) => p.y[k - 1] += s,
            Dir::Xi(0) => p.xi0 += s,
            Dir::Xi(j) => p.eta[j - 1] += s,
        }
        SymbolContext::at_depth(m, p, x3).unwrap().z
    }

    const ALL: [Dir; 6] = [Dir::X(1), Dir::X(2), Dir::X(3), Dir::Xi(0), Dir::Xi(1), Dir::Xi(2)];

    fn cases() -> Vec<(Medium, PhasePoint)> {
        let mut r = rng(7);
        vec![
            (graded_medium(&mut r, SurfacePatch::Plane), PhasePoint::new([0.2, -0.1], -0.55, [0.8, 0.3])),
            (graded_medium(&mut r, SurfacePatch::Sphere { radius: 2.0 }), PhasePoint::new([0.3, 0.4], -0.5, [1.5, -0.7])),
            (
                graded_medium(&mut r, SurfacePatch::Graph { a: 0.3, b: -0.1, c: 0.2, d1: 0.1, d2: 0.05 }),
                PhasePoint::new([0.1, 0.2], -0.4, [-0.3, 0.7]),
            ),
        ]
    }

    #[test]
    fn sylvester_diagonal() {
        let q = CMat3::from_diagonal(&nalgebra::Vector3::new(I, I * 2.0, I * 3.0));
        let x = sylvester_solve(&q, &CMat3::identity()).unwrap();
        // (q̄_j − q_k) X_jk = Y_jk
        assert!((x[(0, 0)] - c(0.0, 0.5)).norm() < 1e-15);
        assert!((x[(1, 1)] - c(0.0, 0.25)).norm() < 1e-15);
        assert!(x[(0, 1)].norm() < 1e-15);
        assert_eq!(sylvester_solve(&q, &CMat3::zeros()).unwrap(), CMat3::zeros());
    }

    #[test]
    fn sylvester_matches_integral() {
        let (m, p) = cases().remove(0);
        let ctx = SymbolContext::new(&m, p).unwrap();
        let q = ctx.q;
        let y = CMat3::from_fn(|i, j| c((i + 2 * j) as f64 * 0.3 - 0.5, (i as f64) - 0.7 * j as f64));
        let x = sylvester_solve(&q, &y).unwrap();
        assert!(norm2(&(q.adjoint() * x - x * q - y)) < 1e-10 * norm2(&y));
        // X = i ∫_0^∞ exp(−isQ*) Y exp(isQ) ds
        let beta = decay_rate(&q);
        let (gx, gw) = gauss_legendre(16);
        let (panels, len) = (200, 45.0 / beta);
        let h = len / panels as f64;
        let mut acc = CMat3::zeros();
        for k in 0..panels {
            for (xn, wn) in gx.iter().zip(gw.iter()) {
                let s = h * (k as f64 + 0.5 + 0.5 * xn);
                let e = expm(&(q * c(0.0, s)));
                acc += e.adjoint() * y * e * c(0.5 * h * wn, 0.0);
            }
        }
        assert!(rel(&(acc * I), &x) < 1e-9, "{}", rel(&(acc * I), &x));
    }

    #[test]
    fn first_derivatives_match_finite_differences() {
        for (m, p) in cases() {
            let ctx = SymbolContext::new(&m, p).unwrap();
            assert!(ctx.riccati_residual() < 1e-11);
            for d in ALL {
                let an = ctx.dz(d).unwrap().z;
                let fd = richardson(|s| z_at(&m, p, 0.0, d, s), EPS3);
                assert!(rel(&an, &fd) < 1e-6, "{d:?} {:?}: {}", m.surface, rel(&an, &fd));
                assert!(norm2(&(an - an.adjoint())) < 1e-10 * norm2(&an).max(1.0));
            }
        }
    }

    #[test]
    fn q_derivative_matches_finite_differences() {
        for (m, p) in cases() {
            let ctx = SymbolContext::new(&m, p).unwrap();
            for d in ALL {
                let an = ctx.dz(d).unwrap().q;
                let fd = richardson(
                    |s| {
                        let mut pp = p;
                        let mut x3 = 0.0;
                        match d {
                            Dir::X(3) => x3 = s,
                            Dir::X(k) => pp.y[k - 1] += s,
                            Dir::Xi(0) => pp.xi0 += s,
                            Dir::Xi(j) => pp.eta[j - 1] += s,
                        }
                        SymbolContext::at_depth(&m, pp, x3).unwrap().q
                    },
                    EPS3,
                );
                assert!(rel(&an, &fd) < 1e-6, "{d:?}: {}", rel(&an, &fd));
            }
        }
    }

    #[test]
    fn xi0_derivative_is_minus_speed_derivative() {
        let (m, p) = cases().remove(1);
        let ctx = SymbolContext::new(&m, p).unwrap();
        let t = triple_from_local(&ctx.local, p.eta);
        let dc = impedance_dc(&ctx.impedance(), &t).unwrap();
        assert!(rel(&ctx.dz(Dir::Xi(0)).unwrap().z, &(-dc)) < 1e-12);
    }

    #[test]
    fn second_derivatives() {
        for (m, p) in cases() {
            let ctx = SymbolContext::new(&m, p).unwrap();
            for a in ALL {
                for b in ALL {
                    let xx = matches!((a, b), (Dir::X(_), Dir::X(_)));
                    if xx && !m.surface.is_plane() {
                        assert!(matches!(ctx.d2z(a, b), Err(Error::Unsupported(_))));
                        continue;
                    }
                    let ab = ctx.d2z(a, b).unwrap();
                    let ba = ctx.d2z(b, a).unwrap();
                    assert!(norm2(&(ab - ba)) <= 1e-8 * norm2(&ab).max(1.0), "{a:?} {b:?}");
                    // differences of the analytic first derivative along b
                    let fd = richardson(
                        |s| {
                            let mut pp = p;
                            let mut x3 = 0.0;
                            match b {
                                Dir::X(3) => x3 = s,
                                Dir::X(k) => pp.y[k - 1] += s,
                                Dir::Xi(0) => pp.xi0 += s,
                                Dir::Xi(j) => pp.eta[j - 1] += s,
                            }
                            SymbolContext::at_depth(&m, pp, x3).unwrap().dz(a).unwrap().z
                        },
                        EPS3,
                    );
                    let scale = norm2(&fd).max(1e-3 * norm2(&ctx.z));
                    assert!(norm2(&(ab - fd)) < 1e-6 * scale, "{a:?} {b:?} {:?}: {}", m.surface, norm2(&(ab - fd)) / scale);
                }
            }
        }
    }

    #[test]
    fn homogeneity_of_z_and_q() {
        let (m, p) = cases().remove(2);
        let ctx = SymbolContext::new(&m, p).unwrap();
        let s = 2.7;
        let scaled = SymbolContext::new(&m, PhasePoint::new(p.y, p.xi0 * s, [p.eta[0] * s, p.eta[1] * s])).unwrap();
        assert!(rel(&scaled.z, &(ctx.z * c(s, 0.0))) < 1e-12);
        assert!(rel(&scaled.q, &(ctx.q * c(s, 0.0))) < 1e-12);
        // reversed covector: spectrum stays in the upper half-plane
        let rev = SymbolContext::new(&m, PhasePoint::new(p.y, -p.xi0, [-p.eta[0], -p.eta[1]])).unwrap();
        assert!(decay_rate(&rev.q) > 0.0);
    }

    #[test]
    fn homogeneous_plane_degeneracy() {
        let m = isotropic_medium(1.0, 1.0, 1.0, SurfacePatch::Plane);
        let rotated = {
            let mut r = rng(3);
            let base = crate::fixtures::random_stiffness(&mut r);
            Medium::new(MaterialField::homogeneous(base, 1.3).unwrap(), SurfacePatch::Plane)
        };
        for med in [m, rotated] {
            let jet = symbol_jet(&med, [0.4, -0.2], [0.6, 0.8], None).unwrap();
            for d in [jet.dz_x[0], jet.dz_x[1], jet.dz_x3, jet.mixed[0], jet.mixed[1], jet.q_m1, jet.z_sub, jet.transport] {
                assert!(norm2(&d) <= 1e-12, "{}", norm2(&d));
            }
            for r in [jet.b0, jet.b1, jet.t] {
                assert!(r.norm() <= 1e-12);
            }
            assert!(jet.hamiltonian.d_y.iter().all(|v| v.abs() < 1e-12));
        }
    }

    /// Covariant divergence of `σ^{ij} = C^{ijkl}(∂_l u_k − Γ^m_{kl}u_m)` for
    /// `u_k = β_{kl}(x − x0)^l`, differentiated numerically. At `x0` it equals
    /// `B^{ikl} β_{kl}`.
    fn divergence_oracle(m: &Medium, y: [f64; 2], beta: &RMat3) -> [f64; 3] {
        let sigma = |x: [f64; 3]| -> [[f64; 3]; 3] {
            let l = m.local([x[0], x[1]], x[2]).unwrap();
            let dx = [x[0] - y[0], x[1] - y[1], x[2]];
            let u: Vec<f64> = (0..3).map(|k| (0..3).map(|q| beta[(k, q)] * dx[q]).sum()).collect();
            let mut s = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let mut acc = 0.0;
                    for k in 0..3 {
                        for q in 0..3 {
                            let mut cov = beta[(k, q)];
                            for mm in 0..3 {
                                cov -= l.christoffel[mm][k][q] * u[mm];
                            }
                            acc += l.c.get(i, j, k, q) * cov;
                        }
                    }
                    s[i][j] = acc;
                }
            }
            s
        };
        let x0 = [y[0], y[1], 0.0];
        let s0 = sigma(x0);
        let g = m.local(y, 0.0).unwrap().christoffel;
        let h = 1e-4;
        let mut div = [0.0; 3];
        for j in 0..3 {
            let shift = |t: f64| {
                let mut x = x0;
                x[j] += t;
                sigma(x)
            };
            let (p1, m1, p2, m2) = (shift(h), shift(-h), shift(2.0 * h), shift(-2.0 * h));
            for i in 0..3 {
                div[i] += (8.0 * (p1[i][j] - m1[i][j]) - (p2[i][j] - m2[i][j])) / (12.0 * h);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                for mm in 0..3 {
                    div[i] += g[i][j][mm] * s0[mm][j] + g[j][j][mm] * s0[i][mm];
                }
            }
        }
        div
    }

    #[test]
    fn first_order_coefficients_match_divergence() {
        let mut r = rng(11);
        let media = [
            graded_medium(&mut r, SurfacePatch::Sphere { radius: 1.5 }),
            graded_medium(&mut r, SurfacePatch::Plane),
            isotropic_medium(1.0, 1.0, 1.0, SurfacePatch::Sphere { radius: 1.0 }),
            graded_medium(&mut r, SurfacePatch::Graph { a: 0.4, b: 0.1, c: -0.3, d1: 0.0, d2: 0.2 }),
        ];
        let y = [0.25, 0.35];
        for m in &media {
            let l = m.local(y, 0.0).unwrap();
            // B^{ikl} for all l: B0 gives l = 3, B1 with unit η gives l = 1, 2
            let (b0, e1) = first_order_coeffs(&l, [1.0, 0.0]);
            let (_, e2) = first_order_coeffs(&l, [0.0, 1.0]);
            for k in 0..3 {
                for q in 0..3 {
                    let mut beta = RMat3::zeros();
                    beta[(k, q)] = 1.0;
                    let div = divergence_oracle(m, y, &beta);
                    let blk = [e1, e2, b0][q];
                    for i in 0..3 {
                        assert!((div[i] - blk[(i, k)]).abs() < 1e-7, "{:?} i{i} k{k} l{q}: {} vs {}", m.surface, div[i], blk[(i, k)]);
                    }
                }
            }
        }
    }

    #[test]
    fn affine_plane_b_terms_are_stiffness_derivatives() {
        let mut r = rng(5);
        let m = graded_medium(&mut r, SurfacePatch::Plane);
        let l = m.local([0.0, 0.0], 0.0).unwrap();
        let (b0, _) = first_order_coeffs(&l, [1.0, 0.0]);
        for i in 0..3 {
            for k in 0..3 {
                let expect: f64 = (0..3).map(|j| l.dc[j].get(i, j, k, 2)).sum();
                assert!((b0[(i, k)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn traction_curvature_on_unit_sphere() {
        let m = isotropic_medium(1.0, 1.0, 1.0, SurfacePatch::Sphere { radius: 1.0 });
        let y = [0.3, 0.2];
        let l = m.local(y, 0.0).unwrap();
        let t = traction_curvature_term(&l);
        // traction of the constant covariant field u_k = a_k is −T a
        let jet = m.surface.coordinate_jet(y, 0.0).unwrap();
        let gam = crate::geometry::christoffel_from_jet(&jet);
        let mut brute = RMat3::zeros();
        for i in 0..3 {
            for kk in 0..3 {
                let mut s = 0.0;
                for (idx, cv) in l.c.data.iter().enumerate() {
                    let (a, b, cc, d) = (idx / 27, (idx / 9) % 3, (idx / 3) % 3, idx % 3);
                    if a == i && b == 2 {
                        s += cv * gam[kk][cc][d];
                    }
                }
                brute[(i, kk)] = s;
            }
        }
        assert!((t - brute).norm() < 1e-14);
        assert!(t.norm() > 0.1);
        let mut m2 = m.clone();
        m2.material.stiffness *= 2.0;
        let t2 = traction_curvature_term(&m2.local(y, 0.0).unwrap());
        assert!((t2 - t * 2.0).norm() < 1e-13);
        assert_eq!(traction_curvature_term(&isotropic_medium(1.0, 1.0, 1.0, SurfacePatch::Plane).local(y, 0.0).unwrap()), RMat3::zeros());
    }

    #[test]
    fn q_minus1_solves_its_equation() {
        for (m, p) in cases() {
            let os = on_shell(&m, p.y, p.eta, None).unwrap();
            let ctx = &os.ctx;
            let d3 = ctx.dz(Dir::X(3)).unwrap();
            let (b0, b1) = first_order_coeffs(&ctx.local, p.eta);
            let q1 = q_minus1(ctx, &b0, &b1, &d3, &os.d_x, &os.d_xi).unwrap();
            let rhs = q_minus1_rhs(ctx, &b0, &b1, &d3, &os.d_x, &os.d_xi);
            let x = ctx.a0() * q1;
            assert!(norm2(&(ctx.q.adjoint() * x - x * ctx.q - rhs)) <= 1e-9 * norm2(&rhs).max(1e-12));
        }
    }

    #[test]
    fn subprincipal_symbol_is_self_adjoint() {
        // Ẑ is self-adjoint on L²(√g dy), hence Z_sub − Z_sub* = −i Σ_j ∂_j log√g ∂_{ξj}Z0
        for (m, p) in cases() {
            let os = on_shell(&m, p.y, p.eta, None).unwrap();
            let jet = symbol_jet_from(&os).unwrap();
            let g = &os.ctx.local.christoffel;
            let mut expect = CMat3::zeros();
            for j in 0..2 {
                let dlog: f64 = (0..3).map(|k| g[k][k][j]).sum();
                expect += jet.dz_xi[j + 1] * c(0.0, -dlog);
            }
            let anti = jet.z_sub - jet.z_sub.adjoint();
            let scale = norm2(&jet.z_sub).max(1e-12);
            assert!(norm2(&(anti - expect)) < 1e-8 * scale, "{:?}: {} (|Z_sub| {})", m.surface, norm2(&(anti - expect)), scale);
            if m.surface.is_plane() {
                assert!(norm2(&(jet.z_sub - hermitian_part(&jet.z_sub))) < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn hamiltonian_isotropic_homogeneous() {
        let m = isotropic_medium(2.0, 1.0, 1.0, SurfacePatch::Plane);
        let eta = [1.2, -0.5];
        let h = hamiltonian_data(&m, [0.3, 0.1], eta).unwrap();
        let n2 = eta[0] * eta[0] + eta[1] * eta[1];
        assert!(h.d_y.iter().all(|v| v.abs() < 1e-13));
        for j in 0..2 {
            assert!((h.d_eta[j] - h.c_r * eta[j] / n2).abs() < 1e-9);
        }
        let h2 = hamiltonian_data(&m, [0.3, 0.1], [1.3, 0.0]).unwrap();
        assert!((h2.c_r - h.c_r).abs() < 1e-10);
        assert!(h.b > 0.0);
    }

    #[test]
    fn hamiltonian_gradients_match_finite_differences() {
        for (m, p) in cases() {
            let h = hamiltonian_data(&m, p.y, p.eta).unwrap();
            assert!(h.b > 0.0);
            let euler = h.d_eta[0] * p.eta[0] + h.d_eta[1] * p.eta[1];
            assert!((euler - h.c_r).abs() <= 1e-8 * h.c_r);
            let cr = |y: [f64; 2], e: [f64; 2]| rayleigh_root(&m, y, e, Some(h.c_r)).unwrap().0;
            let rich = |f: &dyn Fn(f64) -> f64| {
                let d = |s: f64| (f(s) - f(-s)) / (2.0 * s);
                (4.0 * d(0.5 * EPS3) - d(EPS3)) / 3.0
            };
            for j in 0..2 {
                let fy = rich(&|s| {
                    let mut y = p.y;
                    y[j] += s;
                    cr(y, p.eta)
                });
                let fe = rich(&|s| {
                    let mut e = p.eta;
                    e[j] += s;
                    cr(p.y, e)
                });
                assert!((fy - h.d_y[j]).abs() <= 1e-6 * h.c_r, "y{j}: {fy} vs {}", h.d_y[j]);
                assert!((fe - h.d_eta[j]).abs() <= 1e-6 * h.c_r, "eta{j}: {fe} vs {}", h.d_eta[j]);
            }
        }
    }

    #[test]
    fn cofactor_factorizes_on_shell() {
        for (m, p) in cases() {
            let jet = symbol_jet(&m, p.y, p.eta, None).unwrap();
            let bz = jet.cofactor * jet.z0 / c(jet.hamiltonian.b, 0.0);
            assert!(norm2(&bz) <= 1e-9 * norm2(&jet.z0), "{}", norm2(&bz));
        }
    }

    #[test]
    fn reduced_transport_matches_full_bracket() {
        // β = det Z0 / h is the exact factor; on-shell ∂β = ∂(∂_{ξ0}det) − ½ ∂h ∂²_{ξ0}det
        for (m, p) in cases() {
            let os = on_shell(&m, p.y, p.eta, None).unwrap();
            let jet = symbol_jet_from(&os).unwrap();
            let ctx = &os.ctx;
            let z = &ctx.z;
            let b = os.data.b;
            let d00 = det_second_derivative(z, &os.d_xi0.z, &os.d_xi0.z, &ctx.d2z_with(&os.d_xi0, &os.d_xi0).unwrap()).re;
            let beta_d = |d: &FirstDerivative, dh: f64| {
                det_second_derivative(z, &os.d_xi0.z, &d.z, &ctx.d2z_with(&os.d_xi0, d).unwrap()).re - 0.5 * dh * d00
            };
            let adj = adjugate(z);
            let db = |d: &FirstDerivative, dh: f64| {
                adjugate_derivative(z, &d.z) / c(b, 0.0) - adj * c(beta_d(d, dh) / (b * b), 0.0)
            };
            let mut full = CMat3::zeros();
            for j in 0..2 {
                full += db(&os.d_xi[j], os.data.d_eta[j]) * os.d_x[j].z - db(&os.d_x[j], os.data.d_y[j]) * os.d_xi[j].z;
            }
            let h_full = full * c(0.5, 0.0) + adj * jet.z_sub * c(0.0, 1.0 / b);
            let w = polarization(z).unwrap();
            let lhs = jet.transport * w;
            let rhs = h_full * w;
            let scale = lhs.norm().max(rhs.norm()).max(1e-12);
            assert!((lhs - rhs).norm() < 1e-7 * scale, "{:?}: {} vs {}", m.surface, lhs.norm(), rhs.norm());
        }
    }
}
