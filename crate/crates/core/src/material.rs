//! Stiffness tensors, material fields and the direction-resolved coefficient
//! matrices of the acoustic tensor.
//!
//! Voigt pairs are ordered (11, 22, 33, 23, 13, 12). The 6×6 Voigt matrix
//! carries no factor-of-two weights; admissibility is decided on the weighted
//! matrix `W C W`, `W = diag(1, 1, 1, 2, 2, 2)`, which is the quadratic form
//! `C^{ijkl} ε_ij ε_kl` restricted to symmetric strains.

use nalgebra::{Matrix3, Matrix6, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RMat3;

pub type Voigt6 = Matrix6<f64>;

/// Relative positive-definiteness threshold on the weighted Voigt matrix.
pub const PD_TOLERANCE: f64 = 1e-10;

const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

#[inline]
pub fn voigt_index(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) | (2, 1) => 3,
        (0, 2) | (2, 0) => 4,
        _ => 5,
    }
}

/// Dense fourth-order tensor with 81 components, `data[i*27 + j*9 + k*3 + l]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor4 {
    pub data: [f64; 81],
}

impl Default for Tensor4 {
    fn default() -> Self {
        Tensor4 { data: [0.0; 81] }
    }
}

impl Tensor4 {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[i * 27 + j * 9 + k * 3 + l]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.data[i * 27 + j * 9 + k * 3 + l] = v;
    }

    pub fn from_voigt(m: &Voigt6) -> Self {
        let mut t = Tensor4::default();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        t.set(i, j, k, l, m[(voigt_index(i, j), voigt_index(k, l))]);
                    }
                }
            }
        }
        t
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut t = *self;
        t.data.iter_mut().for_each(|v| *v *= s);
        t
    }

    pub fn add_scaled(&mut self, other: &Tensor4, s: f64) {
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
    }

    /// Transforms all four indices: `T'^{ijkl} = M_ia M_jb M_kc M_ld T^{abcd}`.
    pub fn transform(&self, m: &RMat3) -> Tensor4 {
        // one index at a time keeps this at 4·3^5 multiplications
        let mut cur = *self;
        for slot in 0..4 {
            let mut next = Tensor4::default();
            for idx in 0..81 {
                let mut digits = [idx / 27, (idx / 9) % 3, (idx / 3) % 3, idx % 3];
                let target = digits[slot];
                let mut acc = 0.0;
                for a in 0..3 {
                    digits[slot] = a;
                    let src = digits[0] * 27 + digits[1] * 9 + digits[2] * 3 + digits[3];
                    acc += m[(target, a)] * cur.data[src];
                }
                next.data[idx] = acc;
            }
            cur = next;
        }
        cur
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Validated elasticity tensor with full minor and major symmetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessTensor {
    voigt: Voigt6,
}

impl StiffnessTensor {
    /// Builds and validates a tensor from the 21 upper-triangle Voigt entries
    /// in row-major order.
    pub fn validate(raw: &[f64]) -> Result<Self> {
        if raw.len() != 21 {
            return Err(Error::InvalidModuli(format!(
                "expected 21 Voigt entries, got {}",
                raw.len()
            )));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModuli("non-finite Voigt entry".into()));
        }
        let mut m = Voigt6::zeros();
        let mut it = raw.iter();
        for i in 0..6 {
            for j in i..6 {
                let v = *it.next().unwrap();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self::from_voigt(m)
    }

    pub fn from_voigt(m: Voigt6) -> Result<Self> {
        let m = (m + m.transpose()) * 0.5;
        let (min_eig, max_eig) = weighted_extreme_eigenvalues(&m);
        if !(max_eig > 0.0) || min_eig <= PD_TOLERANCE * max_eig {
            return Err(Error::NotPositiveDefinite { min_eig, max_eig });
        }
        Ok(StiffnessTensor { voigt: m })
    }

    /// Isotropic tensor `λ δ^{ij}δ^{kl} + μ(δ^{ik}δ^{jl} + δ^{il}δ^{jk})`.
    pub fn from_isotropic(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !(3.0 * lambda + 2.0 * mu > 0.0) {
            return Err(Error::InvalidModuli(format!(
                "isotropic moduli need mu > 0 and 3 lambda + 2 mu > 0 (lambda = {lambda}, mu = {mu})"
            )));
        }
        Self::from_voigt(isotropic_voigt(lambda, mu))
    }

    /// Cubic crystal with cube axes along the coordinate axes.
    pub fn cubic(c11: f64, c12: f64, c44: f64) -> Result<Self> {
        let mut m = Voigt6::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = if i == j { c11 } else { c12 };
            }
            m[(i + 3, i + 3)] = c44;
        }
        Self::from_voigt(m)
    }

    pub fn voigt(&self) -> &Voigt6 {
        &self.voigt
    }

    /// Upper-triangle row-major Voigt entries.
    pub fn voigt_upper(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(21);
        for i in 0..6 {
            for j in i..6 {
                out.push(self.voigt[(i, j)]);
            }
        }
        out
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.voigt[(voigt_index(i, j), voigt_index(k, l))]
    }

    pub fn tensor(&self) -> Tensor4 {
        Tensor4::from_voigt(&self.voigt)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_voigt(self.voigt * s)
    }

    /// Rotated tensor `C'^{ijkl} = R_ia R_jb R_kc R_ld C^{abcd}`.
    pub fn rotate(&self, r: &RMat3) -> Result<Self> {
        let defect = (r * r.transpose() - RMat3::identity()).norm();
        if defect > 1e-10 || (r.determinant() - 1.0).abs() > 1e-10 {
            return Err(Error::NotRotation(defect.max((r.determinant() - 1.0).abs())));
        }
        let t = self.tensor().transform(r);
        let mut m = Voigt6::zeros();
        for (a, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
            for (b, &(k, l)) in VOIGT_PAIRS.iter().enumerate() {
                m[(a, b)] = t.get(i, j, k, l);
            }
        }
        Self::from_voigt(m)
    }

    /// Eigenvalues of the Mandel form (shear rows/columns scaled by √2),
    /// which is invariant under rotations.
    pub fn mandel_eigenvalues(&self) -> [f64; 6] {
        let s = mandel_scale();
        let m = s * self.voigt * s;
        let eig = SymmetricEigen::new(m);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        [ev[0], ev[1], ev[2], ev[3], ev[4], ev[5]]
    }
}

fn mandel_scale() -> Voigt6 {
    let r2 = std::f64::consts::SQRT_2;
    Voigt6::from_diagonal(&nalgebra::Vector6::new(1.0, 1.0, 1.0, r2, r2, r2))
}

pub fn isotropic_voigt(lambda: f64, mu: f64) -> Voigt6 {
    let mut m = Voigt6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = if i == j { lambda + 2.0 * mu } else { lambda };
        }
        m[(i + 3, i + 3)] = mu;
    }
    m
}

fn weighted_extreme_eigenvalues(m: &Voigt6) -> (f64, f64) {
    let w = Voigt6::from_diagonal(&nalgebra::Vector6::new(1.0, 1.0, 1.0, 2.0, 2.0, 2.0));
    let eig = SymmetricEigen::new(w * m * w);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Rotation matrix from an axis and an angle (radians).
pub fn axis_angle(axis: [f64; 3], angle: f64) -> RMat3 {
    let v = Vector3::from(axis);
    let n = v.norm();
    if n == 0.0 {
        return RMat3::identity();
    }
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(v), angle).into_inner()
}

/// Variation model of a material field in Cartesian coordinates `X`:
/// `C(X) = C0 + Σ_a X_a G_a + ½ Σ_ab X_a X_b H_ab`, likewise for the density.
/// First and second derivatives are therefore exact.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    pub stiffness: Voigt6,
    pub density: f64,
    pub stiffness_gradient: [Voigt6; 3],
    pub density_gradient: [f64; 3],
    pub stiffness_hessian: [[Voigt6; 3]; 3],
    pub density_hessian: [[f64; 3]; 3],
}

/// Values and exact derivatives of a material field at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialPoint {
    pub stiffness: StiffnessTensor,
    pub density: f64,
    pub d_stiffness: [Voigt6; 3],
    pub d_density: [f64; 3],
    pub d2_stiffness: [[Voigt6; 3]; 3],
    pub d2_density: [[f64; 3]; 3],
}

impl MaterialField {
    pub fn homogeneous(c: StiffnessTensor, density: f64) -> Result<Self> {
        if !(density > 0.0) {
            return Err(Error::NonPositiveDensity(density));
        }
        Ok(MaterialField {
            stiffness: *c.voigt(),
            density,
            stiffness_gradient: [Voigt6::zeros(); 3],
            density_gradient: [0.0; 3],
            stiffness_hessian: [[Voigt6::zeros(); 3]; 3],
            density_hessian: [[0.0; 3]; 3],
        })
    }

    pub fn with_affine(mut self, stiffness_gradient: [Voigt6; 3], density_gradient: [f64; 3]) -> Self {
        self.stiffness_gradient = stiffness_gradient.map(|g| (g + g.transpose()) * 0.5);
        self.density_gradient = density_gradient;
        self
    }

    pub fn with_quadratic(
        mut self,
        stiffness_hessian: [[Voigt6; 3]; 3],
        density_hessian: [[f64; 3]; 3],
    ) -> Self {
        let mut h = stiffness_hessian;
        let mut dh = density_hessian;
        for a in 0..3 {
            for b in 0..3 {
                let s = (stiffness_hessian[a][b] + stiffness_hessian[b][a]) * 0.5;
                h[a][b] = (s + s.transpose()) * 0.5;
                dh[a][b] = 0.5 * (density_hessian[a][b] + density_hessian[b][a]);
            }
        }
        self.stiffness_hessian = h;
        self.density_hessian = dh;
        self
    }

    pub fn is_homogeneous(&self) -> bool {
        self.stiffness_gradient.iter().all(|g| g.norm() == 0.0)
            && self.density_gradient.iter().all(|g| *g == 0.0)
            && self.stiffness_hessian.iter().flatten().all(|g| g.norm() == 0.0)
            && self.density_hessian.iter().flatten().all(|g| *g == 0.0)
    }

    pub fn stiffness_at(&self, x: [f64; 3]) -> Voigt6 {
        let mut c = self.stiffness;
        for a in 0..3 {
            c += self.stiffness_gradient[a] * x[a];
            for b in 0..3 {
                c += self.stiffness_hessian[a][b] * (0.5 * x[a] * x[b]);
            }
        }
        c
    }

    pub fn density_at(&self, x: [f64; 3]) -> f64 {
        let mut r = self.density;
        for a in 0..3 {
            r += self.density_gradient[a] * x[a];
            for b in 0..3 {
                r += 0.5 * self.density_hessian[a][b] * x[a] * x[b];
            }
        }
        r
    }

    /// Evaluates the field and its exact derivatives, checking admissibility.
    pub fn eval(&self, x: [f64; 3]) -> Result<MaterialPoint> {
        let density = self.density_at(x);
        if !(density > 0.0) {
            return Err(Error::NonPositiveDensity(density));
        }
        let stiffness = StiffnessTensor::from_voigt(self.stiffness_at(x))?;
        let mut d_stiffness = [Voigt6::zeros(); 3];
        let mut d_density = [0.0; 3];
        for a in 0..3 {
            d_stiffness[a] = self.stiffness_gradient[a];
            d_density[a] = self.density_gradient[a];
            for b in 0..3 {
                d_stiffness[a] += self.stiffness_hessian[a][b] * x[b];
                d_density[a] += self.density_hessian[a][b] * x[b];
            }
        }
        Ok(MaterialPoint {
            stiffness,
            density,
            d_stiffness,
            d_density,
            d2_stiffness: self.stiffness_hessian,
            d2_density: self.density_hessian,
        })
    }
}

/// Acoustic tensor `[C^{ijkl} ξ_j ξ_l − ρ ξ0² δ^{ik}]` in Cartesian
/// components; `xi = (ξ0, ξ1, ξ2, ξ3)`.
pub fn acoustic_tensor(field: &MaterialField, x: [f64; 3], xi: [f64; 4]) -> Result<RMat3> {
    let p = field.eval(x)?;
    let c = &p.stiffness;
    let mut m = RMat3::zeros();
    for i in 0..3 {
        for k in 0..3 {
            let mut acc = 0.0;
            for j in 0..3 {
                for l in 0..3 {
                    acc += c.get(i, j, k, l) * xi[j + 1] * xi[l + 1];
                }
            }
            m[(i, k)] = acc;
        }
        m[(i, i)] -= p.density * xi[0] * xi[0];
    }
    Ok(m)
}

/// Coefficients of the acoustic tensor restricted to `η + s ν`:
/// `A(s) = s² A0 + s (A1 + A1ᵀ) + A2 − c² ρ G⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionTriple {
    pub a0: RMat3,
    pub a1: RMat3,
    pub a2: RMat3,
    pub density: f64,
    /// Inverse metric multiplying the inertia term (identity in Cartesian frames).
    pub metric_inv: RMat3,
}

impl DirectionTriple {
    /// Builds the triple from coordinate components `C^{ijkl}` in a frame whose
    /// third axis is the normal; `eta` holds the two horizontal components.
    pub fn from_tensor(c: &Tensor4, density: f64, metric_inv: RMat3, eta: [f64; 2]) -> Self {
        let mut a0 = RMat3::zeros();
        let mut a1 = RMat3::zeros();
        let mut a2 = RMat3::zeros();
        for i in 0..3 {
            for k in 0..3 {
                a0[(i, k)] = c.get(i, 2, k, 2);
                a1[(i, k)] = c.get(i, 2, k, 0) * eta[0] + c.get(i, 2, k, 1) * eta[1];
                let mut s = 0.0;
                for l in 0..2 {
                    for m in 0..2 {
                        s += c.get(i, l, k, m) * eta[l] * eta[m];
                    }
                }
                a2[(i, k)] = s;
            }
        }
        DirectionTriple { a0, a1, a2, density, metric_inv }
    }

    /// Real-valued polynomial at real `s` and speed `c`.
    pub fn eval(&self, s: f64, c: f64) -> RMat3 {
        self.a0 * (s * s) + (self.a1 + self.a1.transpose()) * s + self.a2
            - self.metric_inv * (c * c * self.density)
    }

    pub fn scaled_stiffness(&self, f: f64) -> Self {
        DirectionTriple { a0: self.a0 * f, a1: self.a1 * f, a2: self.a2 * f, ..*self }
    }
}

/// Direction-resolved matrices at `x` for the horizontal covector `eta`
/// and unit normal `normal`, both in Cartesian components.
pub fn direction_triple(
    field: &MaterialField,
    x: [f64; 3],
    eta: [f64; 3],
    normal: [f64; 3],
) -> Result<DirectionTriple> {
    let e = Vector3::from(eta);
    let n = Vector3::from(normal);
    if e.norm() == 0.0 || (n.norm() - 1.0).abs() > 1e-12 || e.dot(&n).abs() > 1e-12 * e.norm() {
        return Err(Error::InvalidDirection);
    }
    let p = field.eval(x)?;
    let c = &p.stiffness;
    let mut a0 = RMat3::zeros();
    let mut a1 = RMat3::zeros();
    let mut a2 = RMat3::zeros();
    for i in 0..3 {
        for k in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    let cv = c.get(i, j, k, l);
                    a0[(i, k)] += cv * n[j] * n[l];
                    a1[(i, k)] += cv * n[j] * e[l];
                    a2[(i, k)] += cv * e[j] * e[l];
                }
            }
        }
    }
    Ok(DirectionTriple { a0, a1, a2, density: p.density, metric_inv: Matrix3::identity() })
}

/// Serialized material block.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MaterialConfig {
    pub model: String,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub voigt: Option<Vec<f64>>,
    #[serde(default)]
    pub rotation_axis_angle: Option<Vec<f64>>,
    pub density: f64,
    #[serde(default)]
    pub gradient: Option<GradientConfig>,
}

/// Optional affine / quadratic coefficients; stiffness blocks are 21-entry
/// upper-triangle Voigt lists (not required to be positive definite).
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct GradientConfig {
    #[serde(default)]
    pub stiffness: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub density: Option<[f64; 3]>,
    #[serde(default)]
    pub stiffness_hessian: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub density_hessian: Option<[[f64; 3]; 3]>,
}

fn voigt_from_upper(raw: &[f64]) -> Result<Voigt6> {
    if raw.len() != 21 {
        return Err(Error::Config(format!("Voigt block needs 21 entries, got {}", raw.len())));
    }
    let mut m = Voigt6::zeros();
    let mut it = raw.iter();
    for i in 0..6 {
        for j in i..6 {
            let v = *it.next().unwrap();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

impl MaterialConfig {
    pub fn build(&self) -> Result<MaterialField> {
        let base = match self.model.as_str() {
            "isotropic" => {
                let lambda = self.lambda.ok_or_else(|| Error::Config("isotropic needs lambda".into()))?;
                let mu = self.mu.ok_or_else(|| Error::Config("isotropic needs mu".into()))?;
                StiffnessTensor::from_isotropic(lambda, mu)?
            }
            "voigt" | "rotated_voigt" => {
                let raw = self.voigt.as_ref().ok_or_else(|| Error::Config("missing voigt".into()))?;
                let c = StiffnessTensor::validate(raw)?;
                if self.model == "rotated_voigt" {
                    let r = self
                        .rotation_axis_angle
                        .as_ref()
                        .ok_or_else(|| Error::Config("missing rotation_axis_angle".into()))?;
                    if r.len() != 4 {
                        return Err(Error::Config("rotation_axis_angle needs [ax, ay, az, angle]".into()));
                    }
                    c.rotate(&axis_angle([r[0], r[1], r[2]], r[3]))?
                } else {
                    c
                }
            }
            other => return Err(Error::Config(format!("unknown material model '{other}'"))),
        };
        let mut field = MaterialField::homogeneous(base, self.density)?;
        if let Some(g) = &self.gradient {
            let mut sg = [Voigt6::zeros(); 3];
            if let Some(list) = &g.stiffness {
                if list.len() != 3 {
                    return Err(Error::Config("gradient.stiffness needs 3 blocks".into()));
                }
                for a in 0..3 {
                    sg[a] = voigt_from_upper(&list[a])?;
                }
            }
            field = field.with_affine(sg, g.density.unwrap_or([0.0; 3]));
            if g.stiffness_hessian.is_some() || g.density_hessian.is_some() {
                let mut sh = [[Voigt6::zeros(); 3]; 3];
                if let Some(h) = &g.stiffness_hessian {
                    if h.len() != 3 || h.iter().any(|r| r.len() != 3) {
                        return Err(Error::Config("gradient.stiffness_hessian needs 3×3 blocks".into()));
                    }
                    for a in 0..3 {
                        for b in 0..3 {
                            sh[a][b] = voigt_from_upper(&h[a][b])?;
                        }
                    }
                }
                field = field.with_quadratic(sh, g.density_hessian.unwrap_or([[0.0; 3]; 3]));
            }
        }
        field.eval([0.0; 3])?;
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso(l: f64, m: f64) -> StiffnessTensor {
        StiffnessTensor::from_isotropic(l, m).unwrap()
    }

    #[test]
    fn isotropic_components() {
        let c = iso(1.0, 1.0);
        assert_eq!(c.get(0, 0, 0, 0), 3.0);
        assert_eq!(c.get(0, 0, 1, 1), 1.0);
        assert_eq!(c.get(0, 1, 0, 1), 1.0);
        let c0 = iso(0.0, 1.0);
        let expect = Voigt6::from_diagonal(&nalgebra::Vector6::new(2.0, 2.0, 2.0, 1.0, 1.0, 1.0));
        assert_eq!(*c0.voigt(), expect);
    }

    #[test]
    fn rejects_unphysical_input() {
        assert!(matches!(
            StiffnessTensor::from_isotropic(1.0, 0.0),
            Err(Error::InvalidModuli(_))
        ));
        let mut raw = iso(1.0, 1.0).voigt_upper();
        raw[0] = -1.0;
        assert!(matches!(
            StiffnessTensor::validate(&raw),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(StiffnessTensor::validate(&raw[..20]).is_err());
    }

    #[test]
    fn full_symmetry_holds() {
        let c = StiffnessTensor::cubic(3.0, 1.2, 0.9).unwrap().rotate(&axis_angle([1.0, 2.0, 0.5], 0.7)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let v = c.get(i, j, k, l);
                        assert_eq!(v, c.get(k, l, i, j));
                        assert_eq!(v, c.get(j, i, k, l));
                    }
                }
            }
        }
    }

    #[test]
    fn rotation_of_isotropic_is_identity() {
        let c = iso(1.3, 0.7);
        let r = c.rotate(&axis_angle([0.3, -1.0, 0.4], 1.1)).unwrap();
        assert!((r.voigt() - c.voigt()).norm() < 1e-13);
        assert!(c.rotate(&RMat3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn cubic_rotated_45_degrees() {
        let (c11, c12, c44) = (3.0, 1.0, 0.8);
        let c = StiffnessTensor::cubic(c11, c12, c44).unwrap();
        let r = c.rotate(&axis_angle([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_4)).unwrap();
        // brute-force 4-index summation oracle
        let rot = axis_angle([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_4);
        let mut brute = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for cc in 0..3 {
                    for d in 0..3 {
                        brute += rot[(0, a)] * rot[(0, b)] * rot[(0, cc)] * rot[(0, d)] * c.get(a, b, cc, d);
                    }
                }
            }
        }
        assert!((r.get(0, 0, 0, 0) - brute).abs() < 1e-13);
        assert!((r.get(0, 0, 0, 0) - (c11 + c12 + 2.0 * c44) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn acoustic_tensor_examples() {
        let f = MaterialField::homogeneous(iso(1.0, 1.0), 1.0).unwrap();
        let a = acoustic_tensor(&f, [0.0; 3], [0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((a - RMat3::from_diagonal(&Vector3::new(3.0, 1.0, 1.0))).norm() < 1e-14);
        let a = acoustic_tensor(&f, [0.0; 3], [0.0; 4]).unwrap();
        assert_eq!(a, RMat3::zeros());
        let a = acoustic_tensor(&f, [0.0; 3], [2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((a + RMat3::identity() * 4.0).norm() < 1e-14);
    }

    #[test]
    fn direction_triple_isotropic() {
        let (l, m) = (0.6, 1.4);
        let f = MaterialField::homogeneous(iso(l, m), 1.0).unwrap();
        let t = direction_triple(&f, [0.0; 3], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        assert!((t.a0 - RMat3::from_diagonal(&Vector3::new(m, m, l + 2.0 * m))).norm() < 1e-14);
        assert!(direction_triple(&f, [0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]).is_err());
        // consistency with the acoustic tensor at η + sν
        for &s in &[-2.0, 0.0, 0.3, 5.0] {
            let a = acoustic_tensor(&f, [0.0; 3], [0.7, 1.0, 0.0, s]).unwrap();
            assert!((t.eval(s, 0.7) - a).norm() < 1e-12);
        }
    }

    #[test]
    fn config_round_trip() {
        let json = r#"{"model":"rotated_voigt","voigt":[3,1,1,0,0,0,3,1,0,0,0,3,0,0,0,0.8,0,0,0.8,0,0.8],
            "rotation_axis_angle":[0,0,1,0.5],"density":2.0,
            "gradient":{"density":[0.1,0,0]}}"#;
        let cfg: MaterialConfig = serde_json::from_str(json).unwrap();
        let f = cfg.build().unwrap();
        assert_eq!(f.density_at([1.0, 0.0, 0.0]), 2.1);
    }
}
