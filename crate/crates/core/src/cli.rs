//! Command-line front end: scenario files, subcommands and serialized outputs.
//!
//! All outputs carry a schema tag and are byte-identical for a fixed
//! scenario and seed. Complex numbers are written as `[re, im]`, matrices
//! row-major.

pub mod verify;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::SurfaceConfig;
use crate::halfspace::{impedance_dc, HalfspacePoint};
use crate::linalg::{hermitian_eigenvalues, CMat3, CVec3, RMat3, C64};
use crate::material::MaterialConfig;
use crate::matpoly::{factorization_residual, solvency_residual, spectral_factor, spectral_factor_sign, SaQuadPoly};
use crate::ode::OdeOptions;
use crate::rays::{launch, point_source_fan, reconstruct_field, wavefront_fan, Launch, RayOptions, WavefrontFan};
use crate::symbols::{symbol_jet, Medium};

pub const SCHEMA_VERSION: u32 = 1;

/// Exit code for a failed verification run.
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "strohkit", version, about = "Subsonic surface waves in anisotropic elastic solids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario JSON file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the scenario).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Multiplies the ODE tolerances.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tolerance_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Spectral factorization of the acoustic polynomial at (η, c).
    Factorize,
    /// Surface impedance tensor at (η, c).
    Impedance,
    /// Rayleigh speed over a direction grid.
    Rayleigh,
    /// Ray fan with amplitude transport.
    Trace,
    /// Leading-order field below the end points of a ray fan.
    Field,
    /// Symbol-level data.
    Symbols {
        #[command(subcommand)]
        what: SymbolsCommand,
    },
    /// Seeded property suite.
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum SymbolsCommand {
    /// On-shell symbol jet at (y, η).
    Dump,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub schema_version: Option<u32>,
    #[serde(default)]
    pub material: Option<MaterialConfig>,
    #[serde(default = "plane")]
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn plane() -> SurfaceConfig {
    SurfaceConfig { kind: "plane".into(), radius: None, graph_coeffs: None }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub kernel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-12, kernel: crate::rays::KERNEL_TOL }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AngleGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub endpoint: bool,
}

impl Default for AngleGrid {
    fn default() -> Self {
        AngleGrid { start: 0.0, stop: std::f64::consts::TAU, count: 36, endpoint: false }
    }
}

impl AngleGrid {
    pub fn values(&self) -> Vec<f64> {
        let div = if self.endpoint { self.count.saturating_sub(1).max(1) } else { self.count };
        (0..self.count).map(|k| self.start + (self.stop - self.start) * k as f64 / div as f64).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DepthGrid {
    pub stop: f64,
    pub count: usize,
}

impl Default for DepthGrid {
    fn default() -> Self {
        DepthGrid { stop: 1.0, count: 21 }
    }
}

impl DepthGrid {
    pub fn values(&self) -> Vec<f64> {
        let n = self.count.max(2) - 1;
        (0..self.count).map(|k| self.stop * k as f64 / n as f64).collect()
    }
}

/// Complex `n × n` coefficients for the debug factorization mode.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolyConfig {
    pub a0: Vec<Vec<[f64; 2]>>,
    pub a1: Vec<Vec<[f64; 2]>>,
    pub a2: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub point: [f64; 2],
    pub eta: [f64; 2],
    pub speed: f64,
    pub angles: AngleGrid,
    /// `point_source` or `wavefront`.
    pub launch: String,
    pub direction: [f64; 2],
    pub offsets: Vec<f64>,
    pub t_end: f64,
    pub amplitude_start: f64,
    pub omega: Vec<f64>,
    pub depths: DepthGrid,
    pub poly: Option<PolyConfig>,
    /// Perturbs the factor before the solvency check (negative control).
    pub inject_fault: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            point: [0.0, 0.0],
            eta: [1.0, 0.0],
            speed: 0.0,
            angles: AngleGrid::default(),
            launch: "point_source".into(),
            direction: [1.0, 0.0],
            offsets: vec![-0.1, 0.0, 0.1],
            t_end: 1.0,
            amplitude_start: 0.1,
            omega: Vec::new(),
            depths: DepthGrid::default(),
            poly: None,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.schema_version {
            if v != SCHEMA_VERSION {
                return Err(Error::Config(format!("unsupported schema_version {v}")));
            }
        }
        let t = &self.tolerances;
        if !(t.rtol > 0.0 && t.atol > 0.0 && t.kernel > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        let r = &self.run;
        if r.angles.count == 0 || r.depths.count == 0 {
            return Err(Error::Config("grids need at least one point".into()));
        }
        if !(r.t_end > 0.0) || r.amplitude_start < 0.0 || r.amplitude_start >= r.t_end {
            return Err(Error::Config("need 0 ≤ amplitude_start < t_end".into()));
        }
        if r.omega.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Config("omega values must be positive".into()));
        }
        if !matches!(r.launch.as_str(), "point_source" | "wavefront") {
            return Err(Error::Config(format!("unknown launch '{}'", r.launch)));
        }
        self.surface.build()?;
        if let Some(m) = &self.material {
            m.build()?;
        }
        Ok(())
    }

    pub fn medium(&self) -> Result<Medium> {
        let m = self.material.as_ref().ok_or_else(|| Error::Config("scenario has no material block".into()))?;
        Ok(Medium::new(m.build()?, self.surface.build()?))
    }

    pub fn ray_options(&self, tolerance_scale: f64) -> RayOptions {
        let t = &self.tolerances;
        RayOptions {
            ode: OdeOptions { rtol: t.rtol, atol: t.atol, ..OdeOptions::default() }.scaled(tolerance_scale),
            kernel_tol: t.kernel,
            amplitude_start: if self.run.launch == "point_source" { self.run.amplitude_start } else { 0.0 },
            ..RayOptions::default()
        }
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            schema_version: None,
            material: None,
            surface: plane(),
            tolerances: Tolerances::default(),
            run: RunConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

pub fn cjson(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn cmat_json(m: &CMat3) -> Vec<Vec<[f64; 2]>> {
    (0..3).map(|i| (0..3).map(|j| cjson(m[(i, j)])).collect()).collect()
}

pub fn dmat_json(m: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| cjson(m[(i, j)])).collect()).collect()
}

pub fn rmat_json(m: &RMat3) -> Vec<Vec<f64>> {
    (0..3).map(|i| (0..3).map(|j| m[(i, j)]).collect()).collect()
}

pub fn cvec_json(v: &CVec3) -> Vec<[f64; 2]> {
    v.iter().map(|&z| cjson(z)).collect()
}

fn header(kind: &str) -> Value {
    json!({ "schema": format!("strohkit-{kind}"), "schema_version": SCHEMA_VERSION })
}

fn with_header(kind: &str, body: Value) -> Value {
    let mut h = header(kind);
    if let (Some(a), Value::Object(b)) = (h.as_object_mut(), body) {
        a.extend(b);
    }
    h
}

fn poly_from_config(p: &PolyConfig) -> Result<SaQuadPoly> {
    let n = p.a0.len();
    let conv = |rows: &Vec<Vec<[f64; 2]>>| -> Result<DMatrix<C64>> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Config("poly blocks must be square and of equal size".into()));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
    };
    SaQuadPoly::new(conv(&p.a0)?, conv(&p.a1)?, conv(&p.a2)?)
}

fn halfspace_point(s: &Scenario) -> Result<HalfspacePoint> {
    let m = s.medium()?;
    Ok(HalfspacePoint::new(m.triple(s.run.point, s.run.eta)?))
}

pub fn cmd_factorize(s: &Scenario) -> Result<Value> {
    let (p, c_inf) = match &s.run.poly {
        Some(pc) => (poly_from_config(pc)?, None),
        None => {
            let hp = halfspace_point(s)?;
            let c = s.run.speed;
            if !(c.abs() < hp.c_inf) {
                return Err(Error::Supersonic { c, c_inf: hp.c_inf });
            }
            (hp.polynomial(c)?, Some(hp.c_inf))
        }
    };
    let f = spectral_factor(&p)?;
    let mut q = f.q.clone();
    if s.run.inject_fault {
        q[(0, 0)] += C64::new(1e-3, 0.0);
    }
    let sign_diff = spectral_factor_sign(&p).ok().map(|g| (&g.q - &f.q).norm() / f.q.norm().max(1e-300));
    Ok(with_header(
        "factorize",
        json!({
            "dimension": p.dim(),
            "speed": s.run.speed,
            "c_inf": c_inf,
            "q": dmat_json(&q),
            "eigenvalues": f.eigenvalues.iter().map(|&z| cjson(z)).collect::<Vec<_>>(),
            "solvency_residual": solvency_residual(&p, &q),
            "factorization_residual": factorization_residual(&p, &q),
            "contour_nodes": f.nodes,
            "sign_route_difference": sign_diff,
        }),
    ))
}

pub fn cmd_impedance(s: &Scenario) -> Result<Value> {
    let hp = halfspace_point(s)?;
    let imp = hp.impedance(s.run.speed)?;
    let dz = impedance_dc(&imp, &hp.triple)?;
    let herm = (imp.z - imp.z.adjoint()).norm() / imp.z.norm();
    Ok(with_header(
        "impedance",
        json!({
            "speed": imp.c,
            "c_inf": hp.c_inf,
            "z": cmat_json(&imp.z),
            "q": cmat_json(&imp.q),
            "dz_dc": cmat_json(&dz),
            "z_eigenvalues": hermitian_eigenvalues(&imp.z),
            "hermiticity_defect": herm,
            "riccati_residual": hp.riccati_residual(&imp),
        }),
    ))
}

pub fn cmd_rayleigh(s: &Scenario) -> Result<String> {
    let m = s.medium()?;
    let angles = s.run.angles.values();
    let rows: Vec<String> = angles
        .par_iter()
        .map(|&th| {
            let eta = [th.cos(), th.sin()];
            let res = m.triple(s.run.point, eta).and_then(|t| HalfspacePoint::new(t).rayleigh_speed());
            match res {
                Ok(r) => {
                    let w = r.w.unwrap_or_else(CVec3::zeros);
                    let wcols: Vec<String> = w.iter().flat_map(|z| [z.re.to_string(), z.im.to_string()]).collect();
                    let status = if r.exists { "ok" } else { "no_root" };
                    format!("{th},{},{},{},{status},{},{}", r.c_r, r.c_inf, r.exists, wcols.join(","), r.det_min)
                }
                Err(e) => {
                    warn!("direction {th}: {e}");
                    let (cr, ci) = match e {
                        Error::NearSonicRoot { c_r, c_inf } => (c_r, c_inf),
                        _ => (f64::NAN, f64::NAN),
                    };
                    format!("{th},{cr},{ci},false,{},{},NaN", flag(&e), vec!["NaN"; 6].join(","))
                }
            }
        })
        .collect();
    let mut out = format!("# schema: strohkit-rayleigh/{SCHEMA_VERSION}\n");
    out.push_str("theta,c_r,c_inf,exists,status,w1_re,w1_im,w2_re,w2_im,w3_re,w3_im,det_min\n");
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}

/// Short machine-readable tag for an error.
fn flag(e: &Error) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("error").to_string()
}

pub fn run_fan(s: &Scenario, tolerance_scale: f64) -> Result<WavefrontFan> {
    let m = s.medium()?;
    let opts = s.ray_options(tolerance_scale);
    let r = &s.run;
    Ok(if r.launch == "point_source" {
        point_source_fan(&m, r.point, &r.angles.values(), r.t_end, &opts)
    } else {
        launch(&m, r.point, r.direction, Launch::Wavefront)?;
        wavefront_fan(&m, r.point, r.direction, &r.offsets, r.t_end, &opts)
    })
}

pub fn rays_csv(fan: &WavefrontFan) -> String {
    let mut out = format!("# schema: strohkit-rays/{SCHEMA_VERSION}\n");
    out.push_str("ray,t,y1,y2,eta1,eta2,c_r,det_j,w0_1_re,w0_1_im,w0_2_re,w0_2_im,w0_3_re,w0_3_im,psi_abs,berry_phase,kernel_residual\n");
    for (k, r) in fan.rays.iter().enumerate() {
        let Ok(tr) = r else { continue };
        for st in &tr.states {
            let w = st.w0.map(|w| w.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>()).unwrap_or(vec![f64::NAN; 6]);
            let psi = st.psi.map_or(f64::NAN, |p| p.norm());
            let _ = write!(out, "{k},{},{},{},{},{},{},{}", st.t, st.y[0], st.y[1], st.eta[0], st.eta[1], st.c_r, st.det_j);
            for v in w {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{psi},{},{}", st.berry, st.kernel_residual);
        }
    }
    out
}

pub fn fan_summary(fan: &WavefrontFan) -> Value {
    let rays: Vec<Value> = fan
        .rays
        .iter()
        .zip(&fan.params)
        .enumerate()
        .map(|(k, (r, p))| match r {
            Ok(tr) => {
                let drift = tr.states.iter().fold(0.0f64, |m, s| m.max((s.c_r - 1.0).abs()));
                json!({
                    "ray": k, "param": p, "status": "ok", "caustic": tr.caustic,
                    "reprojections": tr.reprojections, "t_final": tr.last().t,
                    "samples": tr.states.len(), "max_kernel_residual": tr.max_kernel_residual(),
                    "hamiltonian_drift": drift,
                })
            }
            Err(e) => json!({ "ray": k, "param": p, "status": "halted", "error": e }),
        })
        .collect();
    with_header("trace", json!({ "completed": fan.completed(), "rays": rays }))
}

pub fn field_json(s: &Scenario, fan: &WavefrontFan) -> Result<Value> {
    let m = s.medium()?;
    let depths = s.run.depths.values();
    let mut samples = Vec::new();
    for &omega in &s.run.omega {
        for (k, r) in fan.rays.iter().enumerate() {
            let Ok(tr) = r else { continue };
            let f = reconstruct_field(&m, tr.last(), omega, &depths)?;
            samples.push(json!({
                "ray": k, "omega": omega, "t": f.t, "y": f.y,
                "u": f.u.iter().map(cvec_json).collect::<Vec<_>>(),
                "decay_rate": f.decay, "traction_residual": f.traction_residual,
                "traction_scale": f.traction_scale,
            }));
        }
    }
    Ok(with_header("field", json!({ "depths": depths, "samples": samples })))
}

pub fn cmd_symbols_dump(s: &Scenario) -> Result<Value> {
    let m = s.medium()?;
    let j = symbol_jet(&m, s.run.point, s.run.eta, None)?;
    let h = &j.hamiltonian;
    Ok(with_header(
        "symbols",
        json!({
            "y": s.run.point, "eta": s.run.eta, "xi0": j.point.xi0,
            "c_r": h.c_r, "dc_deta": h.d_eta, "dc_dy": h.d_y, "b": h.b,
            "z0": cmat_json(&j.z0), "q0": cmat_json(&j.q0),
            "dz_dxi": j.dz_xi.iter().map(cmat_json).collect::<Vec<_>>(),
            "dz_dx": j.dz_x.iter().map(cmat_json).collect::<Vec<_>>(),
            "dz_dx3": cmat_json(&j.dz_x3),
            "b0": rmat_json(&j.b0), "b1": rmat_json(&j.b1), "t": rmat_json(&j.t),
            "q_minus1": cmat_json(&j.q_m1), "z_minus1": cmat_json(&j.z_m1),
            "z_sub": cmat_json(&j.z_sub), "bracket_hb": j.bracket_hb,
            "transport": cmat_json(&j.transport),
        }),
    ))
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let p = dir.join(name);
    fs::write(&p, text)?;
    info!("wrote {}", p.display());
    Ok(p)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values are finite or null");
    s.push('\n');
    s
}

/// Runs one command; returns the process exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    let scenario = match &cli.config {
        Some(p) => Scenario::load(p)?,
        None if cli.command == Command::Verify => Scenario::default(),
        None => return Err(Error::Config("--config is required for this command".into())),
    };
    if !(cli.tolerance_scale > 0.0) {
        return Err(Error::Config("--tolerance-scale must be positive".into()));
    }
    let dir = cli.out.clone().or_else(|| scenario.output.dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| "out".into());
    match cli.command {
        Command::Factorize => {
            write_file(&dir, "factorize.json", &pretty(&cmd_factorize(&scenario)?))?;
        }
        Command::Impedance => {
            write_file(&dir, "impedance.json", &pretty(&cmd_impedance(&scenario)?))?;
        }
        Command::Rayleigh => {
            write_file(&dir, "rayleigh.csv", &cmd_rayleigh(&scenario)?)?;
        }
        Command::Trace | Command::Field => {
            let fan = run_fan(&scenario, cli.tolerance_scale)?;
            if fan.completed() == 0 {
                let msg = fan.rays.iter().find_map(|r| r.as_ref().err().cloned()).unwrap_or_default();
                eprintln!("no ray completed: {msg}");
                write_file(&dir, "trace.json", &pretty(&fan_summary(&fan)))?;
                return Ok(2);
            }
            if cli.command == Command::Trace {
                write_file(&dir, "rays.csv", &rays_csv(&fan))?;
                write_file(&dir, "trace.json", &pretty(&fan_summary(&fan)))?;
            }
            if cli.command == Command::Field || !scenario.run.omega.is_empty() {
                write_file(&dir, "field.json", &pretty(&field_json(&scenario, &fan)?))?;
            }
        }
        Command::Symbols { what: SymbolsCommand::Dump } => {
            write_file(&dir, "symbols.json", &pretty(&cmd_symbols_dump(&scenario)?))?;
        }
        Command::Verify => {
            let report = verify::run_suite(&scenario, cli.seed, cli.tolerance_scale);
            for p in &report.properties {
                println!("{} {}: value {:e}, tolerance {:e}", if p.passed { "PASS" } else { "FAIL" }, p.name, p.value, p.tolerance);
            }
            write_file(&dir, "verify.json", &pretty(&report.to_json()))?;
            if report.failures() > 0 {
                eprintln!("{} properties failed", report.failures());
                return Ok(EXIT_VERIFY);
            }
        }
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ISO: &str = r#"{"material": {"model": "isotropic", "lambda": 1.0, "mu": 1.0, "density": 1.0}}"#;

    #[test]
    fn scenario_defaults_and_validation() {
        let s = Scenario::from_json(ISO).unwrap();
        assert_eq!(s.surface.kind, "plane");
        assert_eq!(s.run.angles.values().len(), 36);
        assert!(matches!(Scenario::from_json(r#"{"bogus": 1}"#), Err(Error::Config(_))));
        let bad = r#"{"tolerances": {"rtol": -1.0}}"#;
        assert!(matches!(Scenario::from_json(bad), Err(Error::Config(_))));
        let bad = r#"{"run": {"launch": "sideways"}}"#;
        assert!(Scenario::from_json(bad).is_err());
    }

    #[test]
    fn factorize_isotropic_and_debug_scalar() {
        let mut s = Scenario::from_json(ISO).unwrap();
        s.run.speed = 0.5;
        let v = cmd_factorize(&s).unwrap();
        assert!(v["factorization_residual"].as_f64().unwrap() < 1e-9);
        assert_eq!(v["schema"], "strohkit-factorize");
        s.run.speed = 2.0;
        assert!(matches!(cmd_factorize(&s), Err(e) if e.exit_code() == 2));
        let dbg = r#"{"run": {"poly": {"a0": [[[1,0]]], "a1": [[[0,0]]], "a2": [[[1,0]]]}}}"#;
        let v = cmd_factorize(&Scenario::from_json(dbg).unwrap()).unwrap();
        let q = &v["q"][0][0];
        assert!(q[0].as_f64().unwrap().abs() < 1e-12 && (q[1].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_csv_is_isotropic() {
        let mut s = Scenario::from_json(ISO).unwrap();
        s.run.angles.count = 5;
        let csv = cmd_rayleigh(&s).unwrap();
        let rows: Vec<f64> = csv.lines().skip(2).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|c| (c / rows[0] - 1.0).abs() < 1e-10));
        assert!((rows[0] - 0.919_401_6).abs() < 1e-6);
    }

    #[test]
    fn injected_fault_breaks_solvency() {
        let mut s = Scenario::from_json(ISO).unwrap();
        s.run.speed = 0.3;
        s.run.inject_fault = true;
        let v = cmd_factorize(&s).unwrap();
        assert!(v["solvency_residual"].as_f64().unwrap() > 1e-6);
    }
}
