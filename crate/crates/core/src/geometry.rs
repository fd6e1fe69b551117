//! Boundary charts and adapted (boundary-normal) coordinates.
//!
//! Adapted coordinates are `X(y, x³) = S(y) + x³ ν(y)` with `S` the chart of
//! the boundary and `ν` the unit normal pointing into the body. Ambient space
//! is flat, so Christoffel symbols follow from the embedding as
//! `Γ^i_{jk} = (∂x^i/∂X^a) ∂²X^a/∂x^j∂x^k`.
//!
//! Sign convention: `K_{λμ} = ⟨∂_λ∂_μ S, ν⟩`, so a solid ball of radius R has
//! `K = g/R`, `Γ³_{λμ} = K_{λμ}`, `Γ^λ_{3μ} = −K^λ_μ` and `∂₃G_{λμ} = −2K_{λμ}`.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type V3 = Vector3<f64>;
pub type Christoffel = [[[f64; 3]; 3]; 3];

/// Parametric boundary chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfacePatch {
    /// `X³ = 0`, body in `X³ > 0`.
    Plane,
    /// Sphere of the given radius around the origin, body inside; chart by
    /// longitude `y¹` and latitude `y²`, `|y²| < π/2 − 0.01`.
    Sphere { radius: f64 },
    /// Graph `X³ = f(X¹, X²)`, `f = d1 x + d2 y + ½(a x² + 2b xy + c y²)`,
    /// body above the graph.
    Graph { a: f64, b: f64, c: f64, d1: f64, d2: f64 },
}

/// Chart values with first and second derivatives of position and normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingJet {
    pub s: V3,
    pub s_d: [V3; 2],
    pub s_dd: [[V3; 2]; 2],
    pub nu: V3,
    pub nu_d: [V3; 2],
    pub nu_dd: [[V3; 2]; 2],
}

/// Derivatives of the adapted-coordinate map at `(y, x³)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateJet {
    /// Cartesian position.
    pub x: V3,
    /// `∂X^a/∂x^j` (row a, column j).
    pub jacobian: Matrix3<f64>,
    /// `Λ = ∂x^i/∂X^a`, the inverse Jacobian.
    pub lambda: Matrix3<f64>,
    /// `∂Λ/∂x^m`, m = 1, 2, 3.
    pub d_lambda: [Matrix3<f64>; 3],
    /// `∂²X/∂x^j∂x^k`.
    pub hessian: [[V3; 3]; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptedFrame {
    pub y: [f64; 2],
    pub g: Matrix2<f64>,
    pub g_inv: Matrix2<f64>,
    /// Second fundamental form w.r.t. the interior normal.
    pub k: Matrix2<f64>,
    /// `Γ^i_{jk}` at `x³ = 0`, indexed `[i][j][k]` with 0-based axes.
    pub christoffel: Christoffel,
    /// `∂₃G_{λμ}` at `x³ = 0`.
    pub d3_metric: Matrix2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthFrame {
    pub x3: f64,
    pub metric: Matrix3<f64>,
    pub christoffel: Christoffel,
}

/// Serialized surface block.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SurfaceConfig {
    pub kind: String,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub graph_coeffs: Option<GraphCoeffs>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct GraphCoeffs {
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub d1: f64,
    #[serde(default)]
    pub d2: f64,
}

impl SurfaceConfig {
    pub fn build(&self) -> Result<SurfacePatch> {
        match self.kind.as_str() {
            "plane" => Ok(SurfacePatch::Plane),
            "sphere" => {
                let r = self.radius.ok_or_else(|| Error::Config("sphere needs radius".into()))?;
                if !(r > 0.0) {
                    return Err(Error::Config(format!("sphere radius must be positive, got {r}")));
                }
                Ok(SurfacePatch::Sphere { radius: r })
            }
            "graph" => {
                let g = self.graph_coeffs.clone().unwrap_or_default();
                Ok(SurfacePatch::Graph { a: g.a, b: g.b, c: g.c, d1: g.d1, d2: g.d2 })
            }
            other => Err(Error::Config(format!("unknown surface kind '{other}'"))),
        }
    }
}

const SPHERE_LAT_LIMIT: f64 = std::f64::consts::FRAC_PI_2 - 0.01;

impl SurfacePatch {
    pub fn in_domain(&self, y: [f64; 2]) -> bool {
        if !(y[0].is_finite() && y[1].is_finite()) {
            return false;
        }
        match self {
            SurfacePatch::Sphere { .. } => y[1].abs() < SPHERE_LAT_LIMIT,
            _ => true,
        }
    }

    pub fn is_plane(&self) -> bool {
        matches!(self, SurfacePatch::Plane)
    }

    pub fn embedding(&self, y: [f64; 2]) -> Result<EmbeddingJet> {
        if !self.in_domain(y) {
            return Err(Error::OutOfDomain);
        }
        let z = V3::zeros();
        Ok(match *self {
            SurfacePatch::Plane => EmbeddingJet {
                s: V3::new(y[0], y[1], 0.0),
                s_d: [V3::x(), V3::y()],
                s_dd: [[z; 2]; 2],
                nu: V3::z(),
                nu_d: [z; 2],
                nu_dd: [[z; 2]; 2],
            },
            SurfacePatch::Sphere { radius: r } => {
                let (s1, c1) = y[0].sin_cos();
                let (s2, c2) = y[1].sin_cos();
                let s = V3::new(c2 * c1, c2 * s1, s2) * r;
                let s_1 = V3::new(-c2 * s1, c2 * c1, 0.0) * r;
                let s_2 = V3::new(-s2 * c1, -s2 * s1, c2) * r;
                let s_11 = V3::new(-c2 * c1, -c2 * s1, 0.0) * r;
                let s_12 = V3::new(s2 * s1, -s2 * c1, 0.0) * r;
                let s_22 = -s;
                let s_dd = [[s_11, s_12], [s_12, s_22]];
                EmbeddingJet {
                    s,
                    s_d: [s_1, s_2],
                    s_dd,
                    nu: -s / r,
                    nu_d: [-s_1 / r, -s_2 / r],
                    nu_dd: [[-s_11 / r, -s_12 / r], [-s_12 / r, -s_22 / r]],
                }
            }
            SurfacePatch::Graph { a, b, c, d1, d2 } => {
                let f = d1 * y[0] + d2 * y[1] + 0.5 * (a * y[0] * y[0] + 2.0 * b * y[0] * y[1] + c * y[1] * y[1]);
                let f1 = d1 + a * y[0] + b * y[1];
                let f2 = d2 + b * y[0] + c * y[1];
                let hess = [[a, b], [b, c]];
                let s = V3::new(y[0], y[1], f);
                let s_d = [V3::new(1.0, 0.0, f1), V3::new(0.0, 1.0, f2)];
                let s_dd = [
                    [V3::new(0.0, 0.0, a), V3::new(0.0, 0.0, b)],
                    [V3::new(0.0, 0.0, b), V3::new(0.0, 0.0, c)],
                ];
                // ν = n/|n|, n = (−f1, −f2, 1); n is affine in y
                let n = V3::new(-f1, -f2, 1.0);
                let n_d = [V3::new(-hess[0][0], -hess[1][0], 0.0), V3::new(-hess[0][1], -hess[1][1], 0.0)];
                let m = n.norm();
                let m3 = m * m * m;
                let m5 = m3 * m * m;
                let nu_d = [0, 1].map(|l| n_d[l] / m - n * (n.dot(&n_d[l]) / m3));
                let mut nu_dd = [[z; 2]; 2];
                for l in 0..2 {
                    for k in 0..2 {
                        nu_dd[l][k] = -n_d[l] * (n.dot(&n_d[k]) / m3) - n_d[k] * (n.dot(&n_d[l]) / m3)
                            - n * (n_d[k].dot(&n_d[l]) / m3)
                            + n * (3.0 * n.dot(&n_d[l]) * n.dot(&n_d[k]) / m5);
                    }
                }
                EmbeddingJet { s, s_d, s_dd, nu: n / m, nu_d, nu_dd }
            }
        })
    }

    /// Adapted-coordinate map derivatives at `(y, x³)`.
    pub fn coordinate_jet(&self, y: [f64; 2], x3: f64) -> Result<CoordinateJet> {
        let e = self.embedding(y)?;
        let col0 = e.s_d[0] + e.nu_d[0] * x3;
        let col1 = e.s_d[1] + e.nu_d[1] * x3;
        let jacobian = Matrix3::from_columns(&[col0, col1, e.nu]);
        let lambda = jacobian.try_inverse().ok_or(Error::OutOfDomain)?;
        let mut hessian = [[V3::zeros(); 3]; 3];
        for l in 0..2 {
            for m in 0..2 {
                hessian[l][m] = e.s_dd[l][m] + e.nu_dd[l][m] * x3;
            }
            hessian[l][2] = e.nu_d[l];
            hessian[2][l] = e.nu_d[l];
        }
        let mut d_lambda = [Matrix3::zeros(); 3];
        for m in 0..3 {
            let dj = Matrix3::from_columns(&[hessian[0][m], hessian[1][m], hessian[2][m]]);
            d_lambda[m] = -lambda * dj * lambda;
        }
        Ok(CoordinateJet { x: e.s + e.nu * x3, jacobian, lambda, d_lambda, hessian })
    }

    /// Full metric `G_{ij}` at depth `x³` from the embedding.
    pub fn metric(&self, y: [f64; 2], x3: f64) -> Result<Matrix3<f64>> {
        let j = self.coordinate_jet(y, x3)?;
        Ok(j.jacobian.transpose() * j.jacobian)
    }

    pub fn christoffel(&self, y: [f64; 2], x3: f64) -> Result<Christoffel> {
        let j = self.coordinate_jet(y, x3)?;
        Ok(christoffel_from_jet(&j))
    }
}

pub fn christoffel_from_jet(j: &CoordinateJet) -> Christoffel {
    let mut g = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for a in 0..3 {
            for b in 0..3 {
                g[i][a][b] = (0..3).map(|k| j.lambda[(i, k)] * j.hessian[a][b][k]).sum();
            }
        }
    }
    g
}

/// Fundamental forms and Christoffel symbols at a boundary point.
pub fn frame_at(patch: &SurfacePatch, y: [f64; 2]) -> Result<AdaptedFrame> {
    let e = patch.embedding(y)?;
    let mut g = Matrix2::zeros();
    let mut k = Matrix2::zeros();
    for l in 0..2 {
        for m in 0..2 {
            g[(l, m)] = e.s_d[l].dot(&e.s_d[m]);
            k[(l, m)] = e.s_dd[l][m].dot(&e.nu);
        }
    }
    let g_inv = g.try_inverse().ok_or(Error::OutOfDomain)?;
    let christoffel = patch.christoffel(y, 0.0)?;
    Ok(AdaptedFrame { y, g, g_inv, k, christoffel, d3_metric: -k * 2.0 })
}

/// Largest absolute principal curvature.
pub fn max_curvature(frame: &AdaptedFrame) -> f64 {
    let s = frame.g_inv * frame.k;
    let tr = s.trace();
    let det = s.determinant();
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr + disc).abs().max((0.5 * tr - disc).abs())
}

/// Metric `g − 2x³K + (x³)² K g⁻¹ K` (exact in flat space) and Christoffel
/// symbols at depth `x³` below `frame.y`.
pub fn geodesic_normal_extension(patch: &SurfacePatch, frame: &AdaptedFrame, x3: f64) -> Result<DepthFrame> {
    let kappa = max_curvature(frame);
    let focal = if kappa > 0.0 { 1.0 / kappa } else { f64::INFINITY };
    if x3.abs() >= focal {
        return Err(Error::BeyondFocalDistance { depth: x3, focal });
    }
    let horizontal = frame.g - frame.k * (2.0 * x3) + frame.k * frame.g_inv * frame.k * (x3 * x3);
    let mut metric = Matrix3::zeros();
    metric.fixed_view_mut::<2, 2>(0, 0).copy_from(&horizontal);
    metric[(2, 2)] = 1.0;
    let christoffel = patch.christoffel(frame.y, x3)?;
    Ok(DepthFrame { x3, metric, christoffel })
}

/// `g^{-1/2} ∂_λ(g^{1/2} V^λ)` by centered differences of step `h`.
pub fn surface_divergence(
    patch: &SurfacePatch,
    y: [f64; 2],
    field: impl Fn([f64; 2]) -> [f64; 2],
    h: f64,
) -> Result<f64> {
    let sqrt_g = |p: [f64; 2]| -> Result<f64> { Ok(frame_at(patch, p)?.g.determinant().sqrt()) };
    let mut acc = 0.0;
    for l in 0..2 {
        let mut yp = y;
        let mut ym = y;
        yp[l] += h;
        ym[l] -= h;
        acc += (sqrt_g(yp)? * field(yp)[l] - sqrt_g(ym)? * field(ym)[l]) / (2.0 * h);
    }
    Ok(acc / sqrt_g(y)?)
}
