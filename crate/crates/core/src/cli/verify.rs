//! Built-in seeded property suite behind `strohkit verify`.

use rand::Rng;
use serde_json::{json, Value};

use crate::fixtures::{graded_medium, isotropic_medium, lame_for_poisson, random_stiffness, rayleigh_cubic_ratio, rng, unit_direction};
use crate::geometry::SurfacePatch;
use crate::halfspace::{energy_identity_check, impedance_dc, HalfspacePoint};
use crate::linalg::{hermitian_eigenvalues, norm2, CMat3};
use crate::material::{direction_triple, MaterialField};
use crate::matpoly::{factorization_residual, solvency_residual, spectral_factor, spectral_factor_sign};
use crate::rays::{launch, trace_ray, Launch};
use crate::symbols::{hamiltonian_data, rayleigh_root, symbol_jet, Medium};
use crate::Result;

use super::{Scenario, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub seed: u64,
    pub properties: Vec<Property>,
}

impl Report {
    pub fn failures(&self) -> usize {
        self.properties.iter().filter(|p| !p.passed).count()
    }

    pub fn to_json(&self) -> Value {
        let props: Vec<Value> = self
            .properties
            .iter()
            .map(|p| json!({ "name": p.name, "passed": p.passed, "value": finite(p.value), "tolerance": p.tolerance }))
            .collect();
        json!({
            "schema": "strohkit-verify",
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "failures": self.failures(),
            "properties": props,
        })
    }
}

fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(format!("{v}"))
    }
}

/// `value ≤ tolerance`; errors count as failures with an infinite value.
fn check(name: &'static str, tolerance: f64, f: impl FnOnce() -> Result<f64>) -> Property {
    let value = match f() {
        Ok(v) => v,
        Err(e) => {
            log::warn!("{name}: {e}");
            f64::INFINITY
        }
    };
    Property { name, passed: value <= tolerance, value, tolerance }
}

fn random_point(g: &mut crate::fixtures::SampleRng) -> Result<HalfspacePoint> {
    let c = random_stiffness(g);
    let d = unit_direction(g);
    let field = MaterialField::homogeneous(c, 1.0)?;
    Ok(HalfspacePoint::new(direction_triple(&field, [0.0; 3], [d[0], d[1], 0.0], [0.0, 0.0, 1.0])?))
}

pub fn run_suite(scenario: &Scenario, seed: u64, tolerance_scale: f64) -> Report {
    let mut g = rng(seed);
    let mut props = Vec::new();
    let cases: Vec<(HalfspacePoint, f64)> = (0..8)
        .filter_map(|_| {
            let p = random_point(&mut g).ok()?;
            let u: f64 = g.gen_range(0.0..0.95);
            Some((p, u * p.c_inf))
        })
        .collect();
    let inject = scenario.run.inject_fault;

    props.push(check("factorization_residual", 1e-9, || {
        let mut worst: f64 = 0.0;
        for (p, c) in &cases {
            let poly = p.polynomial(*c)?;
            let f = spectral_factor(&poly)?;
            worst = worst.max(factorization_residual(&poly, &f.q));
        }
        Ok(worst)
    }));
    props.push(check("solvency_residual", 1e-9, || {
        let mut worst: f64 = 0.0;
        for (p, c) in &cases {
            let poly = p.polynomial(*c)?;
            let mut q = spectral_factor(&poly)?.q;
            if inject {
                q[(0, 0)] += crate::linalg::c(1e-3, 0.0);
            }
            worst = worst.max(solvency_residual(&poly, &q));
        }
        Ok(worst)
    }));
    props.push(check("factorization_routes_agree", 1e-8, || {
        let mut worst: f64 = 0.0;
        for (p, c) in &cases {
            let poly = p.polynomial(*c)?;
            let a = spectral_factor(&poly)?.q;
            let b = spectral_factor_sign(&poly)?.q;
            worst = worst.max((&a - &b).norm() / a.norm());
        }
        Ok(worst)
    }));
    props.push(check("impedance_hermitian", 1e-10, || {
        let mut worst: f64 = 0.0;
        for (p, c) in &cases {
            let z = p.impedance(*c)?.z;
            worst = worst.max(norm2(&(z - z.adjoint())) / norm2(&z));
        }
        Ok(worst)
    }));
    props.push(check("static_impedance_positive", 0.0, || {
        let mut worst = f64::NEG_INFINITY;
        for (p, _) in &cases {
            worst = worst.max(-hermitian_eigenvalues(&p.impedance(0.0)?.z)[0]);
        }
        Ok(worst)
    }));
    props.push(check("impedance_decreasing_in_speed", 0.0, || {
        let mut worst = f64::NEG_INFINITY;
        for (p, _) in &cases {
            for k in 0..8 {
                let imp = p.impedance(0.95 * p.c_inf * k as f64 / 8.0)?;
                let d: CMat3 = impedance_dc(&imp, &p.triple)?;
                let e = hermitian_eigenvalues(&d);
                worst = worst.max(e[2]);
            }
        }
        Ok(worst)
    }));
    props.push(check("at_most_one_nonpositive_eigenvalue", 1.0, || {
        let mut worst: f64 = 0.0;
        for (p, _) in &cases {
            for k in 0..8 {
                let z = p.impedance(0.99 * p.c_inf * k as f64 / 8.0)?.z;
                let n = hermitian_eigenvalues(&z).iter().filter(|&&e| e <= 0.0).count();
                worst = worst.max(n as f64);
            }
        }
        Ok(worst)
    }));
    props.push(check("integral_representation", 1e-6, || {
        let mut worst: f64 = 0.0;
        for (p, c) in cases.iter().take(3) {
            let z = p.impedance(*c)?.z;
            let zi = p.impedance_via_integral(*c)?.z;
            worst = worst.max(norm2(&(z - zi)) / norm2(&z));
        }
        Ok(worst)
    }));
    props.push(check("isotropic_rayleigh_speed", 1e-8, || {
        let mut worst: f64 = 0.0;
        for nu in [0.0, 0.25, 0.4] {
            let (l, m) = lame_for_poisson(nu);
            let med = isotropic_medium(l, m, 1.0, SurfacePatch::Plane);
            let c = HalfspacePoint::new(med.triple([0.0, 0.0], [1.0, 0.0])?).rayleigh_speed()?.c_r;
            let oracle = rayleigh_cubic_ratio(m / (l + 2.0 * m));
            worst = worst.max((c / oracle - 1.0).abs());
        }
        Ok(worst)
    }));
    props.push(check("energy_identity", 1e-6, || {
        let mut worst: f64 = 0.0;
        let mut h = rng(seed ^ 0x5eed);
        for _ in 0..3 {
            let c = random_stiffness(&mut h);
            let d = unit_direction(&mut h);
            let w = crate::linalg::CVec3::from_fn(|_, _| crate::linalg::c(h.gen_range(-1.0..1.0), h.gen_range(-1.0..1.0)));
            let (lhs, rhs) = energy_identity_check(&c, [d[0], d[1], 0.0], [0.0, 0.0, 1.0], &w)?;
            if !(lhs > 0.0) {
                return Ok(f64::INFINITY);
            }
            worst = worst.max((lhs - rhs).abs() / lhs);
        }
        Ok(worst)
    }));
    props.push(check("homogeneous_plane_transport_vanishes", 1e-12, || {
        let med = Medium::new(MaterialField::homogeneous(random_stiffness(&mut rng(seed + 1)), 1.3)?, SurfacePatch::Plane);
        let j = symbol_jet(&med, [0.2, -0.1], [0.8, 0.6], None)?;
        let scale = norm2(&j.z0);
        let worst = [j.b0.norm(), j.b1.norm(), j.t.norm(), norm2(&j.q_m1), norm2(&j.z_sub), norm2(&j.transport)]
            .into_iter()
            .fold(0.0f64, f64::max);
        Ok(worst / scale)
    }));

    let graded = graded_medium(&mut rng(seed + 2), SurfacePatch::Sphere { radius: 2.0 });
    props.push(check("hamiltonian_gradient", 1e-6, || {
        let (y, eta) = ([0.1, -0.05], [0.6, 0.9]);
        let hd = hamiltonian_data(&graded, y, eta)?;
        let cr = |p: [f64; 4]| rayleigh_root(&graded, [p[0], p[1]], [p[2], p[3]], Some(hd.c_r)).map(|r| r.0);
        let base = [y[0], y[1], eta[0], eta[1]];
        let analytic = [hd.d_y[0], hd.d_y[1], hd.d_eta[0], hd.d_eta[1]];
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            let d = |h: f64| -> Result<f64> {
                let mut p = base;
                p[a] += h;
                let f = cr(p)?;
                p[a] = base[a] - h;
                Ok((f - cr(p)?) / (2.0 * h))
            };
            let h = 1e-3;
            let fd = (4.0 * d(h / 2.0)? - d(h)?) / 3.0;
            worst = worst.max((fd - analytic[a]).abs() / (1.0 + analytic[a].abs()));
        }
        Ok(worst)
    }));

    let opts = super::Scenario { tolerances: scenario.tolerances.clone(), ..Default::default() }.ray_options(tolerance_scale);
    let opts = crate::rays::RayOptions { amplitude_start: 0.0, ..opts };
    let ray = launch(&graded, [0.1, -0.1], [0.4, 1.0], Launch::Wavefront).and_then(|s| trace_ray(&graded, &s, 0.5, &opts))
        .map_err(|e| e.to_string());
    let traj = || ray.as_ref().map_err(|e| crate::Error::Unsupported(format!("ray failed: {e}")));
    props.push(check("kernel_preservation", 1e-6, || Ok(traj()?.max_kernel_residual())));
    props.push(check("kernel_reprojections", 0.0, || Ok(traj()?.reprojections as f64)));
    props.push(check("hamiltonian_conservation", 1e-8, || {
        let tr = traj()?;
        Ok(tr.states.iter().fold(0.0f64, |m, s| m.max((s.c_r - 1.0).abs())))
    }));
    props.push(check("phase_constancy", 1e-8, || {
        let tr = traj()?;
        Ok(tr.states.iter().fold(0.0f64, |m, s| m.max((s.phi - s.t).abs())))
    }));

    Report { seed, properties: props }
}
