//! Seeded sample media shared by the test suites and the `verify` command.

use nalgebra::Matrix6;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::SurfacePatch;
use crate::material::{isotropic_voigt, MaterialField, StiffnessTensor, Voigt6};
use crate::symbols::Medium;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn symmetric(rng: &mut SampleRng, scale: f64) -> Voigt6 {
    let a = Matrix6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    (a + a.transpose()) * (0.5 * scale)
}

fn mandel_to_voigt(m: &Matrix6<f64>) -> Voigt6 {
    let w = |i: usize| if i < 3 { 1.0 } else { std::f64::consts::SQRT_2 };
    Voigt6::from_fn(|i, j| m[(i, j)] / (w(i) * w(j)))
}

/// Generic triclinic stiffness: Mandel matrix `AAᵀ/6 + floor·I`.
pub fn random_stiffness(rng: &mut SampleRng) -> StiffnessTensor {
    let a = Matrix6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    let m = a * a.transpose() / 6.0 + Matrix6::identity() * 0.3;
    StiffnessTensor::from_voigt(mandel_to_voigt(&m)).expect("positive definite by construction")
}

/// Isotropic `(λ, μ)` plus a symmetric perturbation of relative size `eps`.
pub fn perturbed_isotropic(rng: &mut SampleRng, lambda: f64, mu: f64, eps: f64) -> StiffnessTensor {
    loop {
        let v = isotropic_voigt(lambda, mu) + symmetric(rng, eps * mu);
        if let Ok(c) = StiffnessTensor::from_voigt(v) {
            return c;
        }
    }
}

/// Material with random affine and quadratic variation of size `scale`.
pub fn graded_material(rng: &mut SampleRng, base: StiffnessTensor, density: f64, scale: f64) -> MaterialField {
    let grad = [0; 3].map(|_| symmetric(rng, scale));
    let dgrad = [0; 3].map(|_| rng.gen_range(-1.0..1.0) * scale * density);
    let mut hess = [[Voigt6::zeros(); 3]; 3];
    let mut dhess = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            hess[a][b] = symmetric(rng, 0.5 * scale);
            hess[b][a] = hess[a][b];
            dhess[a][b] = rng.gen_range(-1.0..1.0) * 0.5 * scale * density;
            dhess[b][a] = dhess[a][b];
        }
    }
    MaterialField::homogeneous(base, density)
        .expect("positive density")
        .with_affine(grad, dgrad)
        .with_quadratic(hess, dhess)
}

/// Weakly anisotropic graded medium over the given boundary.
pub fn graded_medium(rng: &mut SampleRng, surface: SurfacePatch) -> Medium {
    let base = perturbed_isotropic(rng, 1.5, 1.0, 0.15);
    Medium::new(graded_material(rng, base, 1.0, 0.04), surface)
}

pub fn isotropic_medium(lambda: f64, mu: f64, density: f64, surface: SurfacePatch) -> Medium {
    let c = StiffnessTensor::from_isotropic(lambda, mu).expect("valid moduli");
    Medium::new(MaterialField::homogeneous(c, density).expect("positive density"), surface)
}

pub fn unit_direction(rng: &mut SampleRng) -> [f64; 2] {
    let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    [a.cos(), a.sin()]
}

/// `c_R/c_s` from the classical Rayleigh cubic
/// `x³ − 8x² + 8x(3 − 2ξ) − 16(1 − ξ) = 0`, `x = (c_R/c_s)²`,
/// `ξ = (c_s/c_p)²`, by bisection on `(0, 1)`.
pub fn rayleigh_cubic_ratio(xi: f64) -> f64 {
    let f = |x: f64| x * x * x - 8.0 * x * x + 8.0 * x * (3.0 - 2.0 * xi) - 16.0 * (1.0 - xi);
    let (mut lo, mut hi) = (1e-12, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f(hi) > 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (0.5 * (lo + hi)).sqrt()
}

/// Lamé parameters with unit shear modulus for Poisson ratio `nu`.
pub fn lame_for_poisson(nu: f64) -> (f64, f64) {
    (2.0 * nu / (1.0 - 2.0 * nu), 1.0)
}
