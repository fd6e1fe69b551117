//! Surface rays of `h = ξ0 + c_R(y, η)`, geometric spreading and transport
//! of the leading amplitude.
//!
//! Rays are launched eikonal-normalized, `c_R(y0, η0) = 1`, so the phase
//! obeys `φ = φ0 + t`. The spreading matrix is `J = [V, δy]` with `(δy, δη)`
//! solving the variational equations, and `div V = d/dt log det J` is the
//! coordinate divergence, matching the coordinate form of `Z_sub`.

use log::{debug, warn};
use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::halfspace::polarization;
use crate::linalg::{c, cnorm, expm, norm2, CMat3, CVec3, RMat3, C64, I};
use crate::ode::{dopri5, OdeOptions, OdeStats, StepAction};
use crate::symbols::{on_shell, symbol_jet_from, Medium, OnShell};

/// Relative step for finite-difference Hessians of `c_R`.
pub const HESSIAN_STEP: f64 = 1e-4;
/// Kernel residual above which the amplitude is re-projected.
pub const KERNEL_TOL: f64 = 1e-6;

const RAY_DIM: usize = 9;
const FULL_DIM: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Launch {
    /// All rays start at one point; `δy(0) = 0`, `δη(0) = ∂η/∂θ`.
    PointSource,
    /// Straight initial wavefront through `y0` orthogonal (in coordinates)
    /// to the launch covector.
    Wavefront,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayOptions {
    pub ode: OdeOptions,
    pub transport: bool,
    /// Ray time at which amplitude transport starts (must be positive for
    /// point sources).
    pub amplitude_start: f64,
    pub psi0: C64,
    pub kernel_tol: f64,
    /// Component of the spanning field held real; defaults to the largest
    /// component of the initial polarization.
    pub gauge: Option<usize>,
}

impl Default for RayOptions {
    fn default() -> Self {
        RayOptions { ode: OdeOptions::default(), transport: true, amplitude_start: 0.0, psi0: c(1.0, 0.0), kernel_tol: KERNEL_TOL, gauge: None }
    }
}

/// Initial data of a single ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayStart {
    pub y: [f64; 2],
    pub eta: [f64; 2],
    pub dy: [f64; 2],
    pub deta: [f64; 2],
    pub kind: Launch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayState {
    pub t: f64,
    pub y: [f64; 2],
    pub eta: [f64; 2],
    pub phi: f64,
    pub c_r: f64,
    /// Ray velocity `V = ∂c_R/∂η`.
    pub v: [f64; 2],
    pub dy: [f64; 2],
    pub deta: [f64; 2],
    pub det_j: f64,
    pub div_v: f64,
    #[serde(skip)]
    pub w0: Option<CVec3>,
    #[serde(skip)]
    pub psi: Option<C64>,
    #[serde(skip)]
    pub w: Option<CVec3>,
    pub berry: f64,
    pub kernel_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: RayStart,
    pub states: Vec<RayState>,
    pub caustic: bool,
    pub reprojections: usize,
    pub stats: Vec<OdeStats>,
}

impl Trajectory {
    pub fn last(&self) -> &RayState {
        self.states.last().expect("trajectory has at least one state")
    }

    /// Transported amplitude samples `W0(t)`.
    pub fn transport_w0(&self) -> Vec<(f64, CVec3)> {
        self.states.iter().filter_map(|s| s.w0.map(|w| (s.t, w))).collect()
    }

    /// Scalar amplitude samples `(t, ψ, Berry phase)`.
    pub fn transport_scalar(&self) -> Vec<(f64, C64, f64)> {
        self.states.iter().filter_map(|s| s.psi.map(|p| (s.t, p, s.berry))).collect()
    }

    /// `(t, J = [V, δy], div V)` along the ray.
    pub fn spreading_jacobian(&self) -> Vec<(f64, [[f64; 2]; 2], f64)> {
        self.states.iter().map(|s| (s.t, [[s.v[0], s.dy[0]], [s.v[1], s.dy[1]]], s.div_v)).collect()
    }

    pub fn max_kernel_residual(&self) -> f64 {
        self.states.iter().filter(|s| s.w0.is_some()).fold(0.0, |m, s| m.max(s.kernel_residual))
    }
}

fn unit(v: [f64; 2]) -> Result<[f64; 2]> {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidDirection);
    }
    Ok([v[0] / n, v[1] / n])
}

/// Eikonal-normalized launch at `y0` with covector direction `direction`.
pub fn launch(medium: &Medium, y0: [f64; 2], direction: [f64; 2], kind: Launch) -> Result<RayStart> {
    let e = unit(direction)?;
    let perp = [-e[1], e[0]];
    let os = on_shell(medium, y0, e, None)?;
    let cr = os.data.c_r;
    let eta = [e[0] / cr, e[1] / cr];
    let (dy, deta) = match kind {
        Launch::PointSource => {
            let g = os.data.d_eta[0] * perp[0] + os.data.d_eta[1] * perp[1];
            ([0.0, 0.0], [perp[0] / cr - e[0] * g / (cr * cr), perp[1] / cr - e[1] * g / (cr * cr)])
        }
        Launch::Wavefront => {
            let g = os.data.d_y[0] * perp[0] + os.data.d_y[1] * perp[1];
            (perp, [-e[0] * g / (cr * cr), -e[1] * g / (cr * cr)])
        }
    };
    Ok(RayStart { y: y0, eta, dy, deta, kind })
}

/// Hessian of `c_R` in `(y¹, y², η1, η2)` by central differences of the
/// analytic gradients.
pub fn c_hessian(medium: &Medium, y: [f64; 2], eta: [f64; 2], c_guess: f64) -> Result<[[f64; 4]; 4]> {
    let scale_eta = (eta[0] * eta[0] + eta[1] * eta[1]).sqrt();
    let grad = |p: [f64; 4]| -> Result<[f64; 4]> {
        let d = on_shell(medium, [p[0], p[1]], [p[2], p[3]], Some(c_guess))?.data;
        Ok([d.d_y[0], d.d_y[1], d.d_eta[0], d.d_eta[1]])
    };
    let base = [y[0], y[1], eta[0], eta[1]];
    let mut hm = [[0.0; 4]; 4];
    for a in 0..4 {
        let h = HESSIAN_STEP * if a < 2 { 1.0 } else { scale_eta };
        let mut p = base;
        p[a] += h;
        let gp = grad(p)?;
        p[a] = base[a] - h;
        let gm = grad(p)?;
        for b in 0..4 {
            hm[b][a] = (gp[b] - gm[b]) / (2.0 * h);
        }
    }
    for a in 0..4 {
        for b in 0..a {
            let s = 0.5 * (hm[a][b] + hm[b][a]);
            hm[a][b] = s;
            hm[b][a] = s;
        }
    }
    Ok(hm)
}

/// Variational velocity `δẏ` and `div V = d/dt log det[V, δy]`.
fn spreading_rates(hm: &[[f64; 4]; 4], yd: [f64; 2], ed: [f64; 2], dy: [f64; 2], de: [f64; 2]) -> ([f64; 2], f64) {
    let dyd: [f64; 2] = std::array::from_fn(|i| (0..2).map(|j| hm[2 + i][j] * dy[j] + hm[2 + i][2 + j] * de[j]).sum());
    let vd: [f64; 2] = std::array::from_fn(|i| (0..2).map(|j| hm[2 + i][j] * yd[j] + hm[2 + i][2 + j] * ed[j]).sum());
    let det = yd[0] * dy[1] - yd[1] * dy[0];
    let ddet = vd[0] * dy[1] - vd[1] * dy[0] + yd[0] * dyd[1] - yd[1] * dyd[0];
    (dyd, ddet / det)
}

fn cvec(s: &[f64]) -> CVec3 {
    CVec3::new(c(s[0], s[1]), c(s[2], s[3]), c(s[4], s[5]))
}

fn put(s: &mut [f64], v: &CVec3) {
    for i in 0..3 {
        s[2 * i] = v[i].re;
        s[2 * i + 1] = v[i].im;
    }
}

/// Pseudo-inverse of a Hermitian matrix with a one-dimensional null space.
fn null_pinv(z: &CMat3) -> (CMat3, CVec3) {
    let h = (z + z.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let k0 = (0..3).min_by(|&a, &b| eig.eigenvalues[a].abs().partial_cmp(&eig.eigenvalues[b].abs()).unwrap()).unwrap();
    let mut p = CMat3::zeros();
    for k in 0..3 {
        if k != k0 {
            let v: CVec3 = eig.eigenvectors.column(k).into_owned();
            p += v * v.adjoint() * c(1.0 / eig.eigenvalues[k], 0.0);
        }
    }
    (p, eig.eigenvectors.column(k0).into_owned())
}

fn metric_dot(m: &RMat3, a: &CVec3, b: &CVec3) -> C64 {
    let mc = m.map(|v| c(v, 0.0));
    (a.adjoint() * mc * b)[(0, 0)]
}

struct RayField<'a> {
    medium: &'a Medium,
    guess: f64,
    transport: bool,
    gauge: usize,
}

impl RayField<'_> {
    fn eval(&mut self, s: &[f64]) -> Result<Vec<f64>> {
        let y = [s[0], s[1]];
        let eta = [s[2], s[3]];
        let os = on_shell(self.medium, y, eta, Some(self.guess))?;
        self.guess = os.data.c_r;
        let hd = os.data;
        let yd = hd.d_eta;
        let ed = [-hd.d_y[0], -hd.d_y[1]];
        let hm = c_hessian(self.medium, y, eta, hd.c_r)?;
        let (dy, de) = ([s[5], s[6]], [s[7], s[8]]);
        let mut out = vec![0.0; s.len()];
        out[0] = yd[0];
        out[1] = yd[1];
        out[2] = ed[0];
        out[3] = ed[1];
        out[4] = eta[0] * yd[0] + eta[1] * yd[1];
        let (dyd, div_v) = spreading_rates(&hm, yd, ed, dy, de);
        for i in 0..2 {
            out[5 + i] = dyd[i];
            out[7 + i] = -(0..2).map(|j| hm[i][j] * dy[j] + hm[i][2 + j] * de[j]).sum::<f64>();
        }
        if self.transport && s.len() == FULL_DIM {
            self.amplitude_rhs(&os, s, &mut out, div_v, yd, ed)?;
        }
        Ok(out)
    }

    fn amplitude_rhs(&self, os: &OnShell, s: &[f64], out: &mut [f64], div_v: f64, yd: [f64; 2], ed: [f64; 2]) -> Result<()> {
        let jet = symbol_jet_from(os)?;
        let h = jet.transport;
        let w0 = cvec(&s[9..15]);
        let psi = c(s[15], s[16]);
        let w = cvec(&s[17..23]);
        let half = c(0.5 * div_v, 0.0);
        let w0d = -(w0 * half) - h * w0;
        put(&mut out[9..15], &w0d);

        let zd = jet.dz_x[0] * c(yd[0], 0.0) + jet.dz_x[1] * c(yd[1], 0.0) + jet.dz_xi[1] * c(ed[0], 0.0) + jet.dz_xi[2] * c(ed[1], 0.0);
        let l = &os.ctx.local;
        let m = l.g_inv;
        let md = l.d_g_inv[0] * yd[0] + l.d_g_inv[1] * yd[1];
        let (pinv, _) = null_pinv(&jet.z0);
        let v = -(pinv * zd * w);
        let k = self.gauge;
        let re_beta = -metric_dot(&m, &w, &v).re - 0.5 * metric_dot(&md, &w, &w).re;
        let im_beta = -(v[k].im + re_beta * w[k].im) / w[k].re;
        let wd = v + w * c(re_beta, im_beta);
        put(&mut out[17..23], &wd);
        let coupling = metric_dot(&m, &w, &(wd + h * w));
        let psid = -(psi * half) - coupling * psi;
        out[15] = psid.re;
        out[16] = psid.im;
        out[23] = metric_dot(&m, &w, &wd).im;
        Ok(())
    }
}

fn state_vector(start: &RayStart) -> Vec<f64> {
    let mut v = vec![0.0; RAY_DIM];
    v[0] = start.y[0];
    v[1] = start.y[1];
    v[2] = start.eta[0];
    v[3] = start.eta[1];
    v[5] = start.dy[0];
    v[6] = start.dy[1];
    v[7] = start.deta[0];
    v[8] = start.deta[1];
    v
}

/// Sample record at one state; also returns the null vector of `Z0`.
fn sample(medium: &Medium, t: f64, s: &[f64], guess: f64) -> Result<(RayState, CMat3)> {
    let y = [s[0], s[1]];
    let eta = [s[2], s[3]];
    let os = on_shell(medium, y, eta, Some(guess))?;
    let v = os.data.d_eta;
    let det_j = v[0] * s[6] - v[1] * s[5];
    let hm = c_hessian(medium, y, eta, os.data.c_r)?;
    let (_, div_v) = spreading_rates(&hm, v, [-os.data.d_y[0], -os.data.d_y[1]], [s[5], s[6]], [s[7], s[8]]);
    let mut st = RayState {
        t,
        y,
        eta,
        phi: s[4],
        c_r: os.data.c_r,
        v,
        dy: [s[5], s[6]],
        deta: [s[7], s[8]],
        det_j,
        div_v,
        w0: None,
        psi: None,
        w: None,
        berry: 0.0,
        kernel_residual: 0.0,
    };
    if s.len() == FULL_DIM {
        let w0 = cvec(&s[9..15]);
        st.kernel_residual = cnorm(&(os.ctx.z * w0)) / (norm2(&os.ctx.z) * cnorm(&w0)).max(1e-300);
        st.w0 = Some(w0);
        st.psi = Some(c(s[15], s[16]));
        st.w = Some(cvec(&s[17..23]));
        st.berry = s[23];
    }
    Ok((st, os.ctx.z))
}

/// Integrates one ray segment from the state `s0`.
fn integrate(
    medium: &Medium,
    t0: f64,
    s0: Vec<f64>,
    t1: f64,
    opts: &RayOptions,
    gauge: usize,
    traj: &mut Trajectory,
) -> Result<(f64, Vec<f64>)> {
    let guess0 = on_shell(medium, [s0[0], s0[1]], [s0[2], s0[3]], None)?.data.c_r;
    let mut field = RayField { medium, guess: guess0, transport: opts.transport, gauge };
    let mut guess = guess0;
    let mut max_det: f64 = 0.0;
    let mut last_sign = 0.0;
    let kernel_tol = opts.kernel_tol;
    let amplitude = s0.len() == FULL_DIM;
    let states = &mut traj.states;
    let caustic = &mut traj.caustic;
    let reproj = &mut traj.reprojections;
    let (t, s, stats) = dopri5(
        |_, s| field.eval(s),
        t0,
        s0,
        t1,
        &opts.ode,
        |t, s| {
            let (st, z) = sample(medium, t, s, guess)?;
            guess = st.c_r;
            let mut action = StepAction::Continue;
            if amplitude {
                let sign = st.det_j.signum();
                max_det = max_det.max(st.det_j.abs());
                if (last_sign != 0.0 && sign != last_sign) || st.det_j.abs() < 1e-9 * max_det {
                    *caustic = true;
                    warn!("caustic at t = {t}: det J = {:e}", st.det_j);
                    states.push(st);
                    return Ok(StepAction::Stop);
                }
                last_sign = sign;
                if st.kernel_residual > kernel_tol {
                    let (_, null) = null_pinv(&z);
                    let w0 = cvec(&s[9..15]);
                    let proj = null * (null.adjoint() * w0)[(0, 0)];
                    put(&mut s[9..15], &proj);
                    *reproj += 1;
                    warn!("kernel drift {:e} at t = {t}; re-projected", st.kernel_residual);
                    action = StepAction::Modified;
                }
            }
            states.push(st);
            Ok(action)
        },
    )?;
    debug!("ray segment [{t0}, {t}]: {} steps, {} rejected", stats.accepted, stats.rejected);
    traj.stats.push(stats);
    Ok((t, s))
}

/// Initial amplitude state: metric-unit null vector with the largest
/// component real and positive.
fn amplitude_state(medium: &Medium, s: &[f64], psi0: C64, gauge: Option<usize>) -> Result<(Vec<f64>, usize)> {
    let os = on_shell(medium, [s[0], s[1]], [s[2], s[3]], None)?;
    let w = polarization(&os.ctx.z)?;
    let nrm = metric_dot(&os.ctx.local.g_inv, &w, &w).re.sqrt();
    let w = w / c(nrm, 0.0);
    let largest = (0..3).max_by(|&a, &b| w[a].norm().partial_cmp(&w[b].norm()).unwrap()).unwrap();
    let gauge = gauge.unwrap_or(largest);
    if gauge > 2 || w[gauge].norm() < 1e-3 {
        return Err(Error::Config(format!("gauge component {gauge} unusable")));
    }
    let w = w * (w[gauge].conj() / w[gauge].norm());
    let mut full = s[..RAY_DIM].to_vec();
    full.resize(FULL_DIM, 0.0);
    put(&mut full[9..15], &(w * psi0));
    full[15] = psi0.re;
    full[16] = psi0.im;
    put(&mut full[17..23], &w);
    Ok((full, gauge))
}

/// Traces a ray from `start` over `[0, t_end]`, with amplitude transport from
/// `opts.amplitude_start` when enabled.
pub fn trace_ray(medium: &Medium, start: &RayStart, t_end: f64, opts: &RayOptions) -> Result<Trajectory> {
    let mut traj = Trajectory { start: *start, states: Vec::new(), caustic: false, reprojections: 0, stats: Vec::new() };
    let s0 = state_vector(start);
    if !opts.transport {
        integrate(medium, 0.0, s0, t_end, opts, 0, &mut traj)?;
        return Ok(traj);
    }
    let ta = opts.amplitude_start;
    if start.kind == Launch::PointSource && !(ta > 0.0) {
        return Err(Error::Config("point-source transport needs a positive amplitude start".into()));
    }
    let s_a = if ta > 0.0 {
        let (_, s) = integrate(medium, 0.0, s0, ta, &RayOptions { transport: false, ..*opts }, 0, &mut traj)?;
        traj.states.pop();
        s
    } else {
        s0
    };
    let (full, gauge) = amplitude_state(medium, &s_a, opts.psi0, opts.gauge)?;
    integrate(medium, ta, full, t_end, opts, gauge, &mut traj)?;
    Ok(traj)
}

/// Integrates backward from the final state of `traj` to its first time.
pub fn retrace(medium: &Medium, traj: &Trajectory, opts: &RayOptions) -> Result<Trajectory> {
    let last = traj.last();
    let first_t = traj.states.iter().find(|s| s.w0.is_some()).map_or(traj.states[0].t, |s| s.t);
    let mut s = vec![last.y[0], last.y[1], last.eta[0], last.eta[1], last.phi, last.dy[0], last.dy[1], last.deta[0], last.deta[1]];
    let mut gauge = 0;
    if let (Some(w0), Some(psi), Some(w)) = (last.w0, last.psi, last.w) {
        s.resize(FULL_DIM, 0.0);
        put(&mut s[9..15], &w0);
        s[15] = psi.re;
        s[16] = psi.im;
        put(&mut s[17..23], &w);
        s[23] = last.berry;
        gauge = (0..3).max_by(|&a, &b| w[a].norm().partial_cmp(&w[b].norm()).unwrap()).unwrap();
    }
    let mut back = Trajectory { start: traj.start, states: Vec::new(), caustic: false, reprojections: 0, stats: Vec::new() };
    integrate(medium, last.t, s, first_t, opts, gauge, &mut back)?;
    Ok(back)
}

/// Leading-order displacement below a ray point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub t: f64,
    pub y: [f64; 2],
    pub depths: Vec<f64>,
    pub u: Vec<CVec3>,
    /// `min Im eig Q0`.
    pub decay: f64,
    /// `‖iωZ0W0 + iTW0‖`, the surface traction of the leading term.
    pub traction_residual: f64,
    /// `ω‖A1 W0‖`, the size of the individual order-ω traction terms.
    pub traction_scale: f64,
}

/// `u = e^{iω(φ − t)} exp(i r ω Q0) W0` on the depth grid.
pub fn reconstruct_field(medium: &Medium, state: &RayState, omega: f64, depths: &[f64]) -> Result<FieldSample> {
    let w0 = state.w0.ok_or_else(|| Error::Unsupported("state carries no amplitude".into()))?;
    let os = on_shell(medium, state.y, state.eta, Some(state.c_r))?;
    let q = os.ctx.q;
    let phase = C64::from_polar(1.0, omega * (state.phi - state.t));
    let u = depths.iter().map(|&r| expm(&(q * c(0.0, r * omega))) * w0 * phase).collect();
    let t = crate::symbols::traction_curvature_term(&os.ctx.local).map(|v| c(v, 0.0));
    let resid = cnorm(&((os.ctx.z * w0) * (I * omega) + t * w0 * I));
    let a1 = os.ctx.base.a1.map(|v| c(v, 0.0));
    Ok(FieldSample {
        t: state.t,
        y: state.y,
        depths: depths.to_vec(),
        u,
        decay: crate::halfspace::decay_rate(&q),
        traction_residual: resid,
        traction_scale: omega * cnorm(&(a1 * w0)),
    })
}

/// Ordered family of rays from one launch configuration.
#[derive(Debug, Clone)]
pub struct WavefrontFan {
    pub params: Vec<f64>,
    pub rays: Vec<std::result::Result<Trajectory, String>>,
}

impl WavefrontFan {
    pub fn completed(&self) -> usize {
        self.rays.iter().filter(|r| r.is_ok()).count()
    }
}

/// Point-source fan over launch angles (radians, coordinate covector angle).
pub fn point_source_fan(medium: &Medium, y0: [f64; 2], angles: &[f64], t_end: f64, opts: &RayOptions) -> WavefrontFan {
    let rays = angles
        .par_iter()
        .map(|&a| {
            launch(medium, y0, [a.cos(), a.sin()], Launch::PointSource)
                .and_then(|s| trace_ray(medium, &s, t_end, opts))
                .map_err(|e| e.to_string())
        })
        .collect();
    WavefrontFan { params: angles.to_vec(), rays }
}

/// Plane-wavefront fan: rays start at `y0 + s·τ` for the offsets `s`, with
/// covector direction `direction` and `τ ⟂ direction`.
pub fn wavefront_fan(medium: &Medium, y0: [f64; 2], direction: [f64; 2], offsets: &[f64], t_end: f64, opts: &RayOptions) -> WavefrontFan {
    let rays = offsets
        .par_iter()
        .map(|&s| -> std::result::Result<Trajectory, String> {
            let e = unit(direction).map_err(|e| e.to_string())?;
            let y = [y0[0] - s * e[1], y0[1] + s * e[0]];
            launch(medium, y, e, Launch::Wavefront)
                .and_then(|st| trace_ray(medium, &st, t_end, opts))
                .map_err(|e| e.to_string())
        })
        .collect();
    WavefrontFan { params: offsets.to_vec(), rays }
}
