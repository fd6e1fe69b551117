//! Dormand–Prince 5(4) integrator with a fallible right-hand side and a
//! per-step hook.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, h_init: None, h_min: 1e-12, max_steps: 200_000 }
    }
}

impl OdeOptions {
    pub fn scaled(&self, s: f64) -> Self {
        OdeOptions { rtol: self.rtol * s, atol: self.atol * s, ..*self }
    }
}

/// What the step hook wants the integrator to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    Continue,
    /// The hook changed the state; derivatives are re-evaluated.
    Modified,
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction). The hook
/// runs at `t0` and after every accepted step. Returns the final time, state
/// and statistics.
pub fn dopri5<F, S>(
    mut f: F,
    t0: f64,
    y0: Vec<f64>,
    t1: f64,
    opts: &OdeOptions,
    mut hook: S,
) -> Result<(f64, Vec<f64>, OdeStats)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    S: FnMut(f64, &mut Vec<f64>) -> Result<StepAction>,
{
    let n = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut stats = OdeStats { accepted: 0, rejected: 0, evaluations: 0 };
    match hook(t, &mut y)? {
        StepAction::Stop => return Ok((t, y, stats)),
        _ => {}
    }
    if span == 0.0 {
        return Ok((t, y, stats));
    }
    let mut k1 = f(t, &y)?;
    stats.evaluations += 1;
    let err_scale = |a: &[f64], b: &[f64], i: usize| opts.atol + opts.rtol * a[i].abs().max(b[i].abs());
    let mut h = match opts.h_init {
        Some(h) => h.abs().min(span),
        None => {
            let d0 = (0..n).map(|i| (y[i] / err_scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt();
            let d1 = (0..n).map(|i| (k1[i] / err_scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt();
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(0.1 * span)
        }
    };
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    while (t1 - t) * dir > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow(t));
        }
        let last = h >= (t1 - t).abs();
        if last {
            h = (t1 - t).abs();
        }
        let hs = h * dir;
        k[0].copy_from_slice(&k1);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += hs * A[s][j] * kj[i];
                }
                tmp[i] = acc;
            }
            k[s] = f(t + C[s] * hs, &tmp)?;
            stats.evaluations += 1;
        }
        // stage 7 is evaluated at the 5th-order solution held in tmp
        let mut err = 0.0;
        for i in 0..n {
            let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * hs;
            err += (e / err_scale(&y, &tmp, i)).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            y.copy_from_slice(&tmp);
            k1.copy_from_slice(&k[6]);
            stats.accepted += 1;
            match hook(t, &mut y)? {
                StepAction::Stop => return Ok((t, y, stats)),
                StepAction::Modified => {
                    k1 = f(t, &y)?;
                    stats.evaluations += 1;
                }
                StepAction::Continue => {}
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            if h < opts.h_min {
                return Err(Error::StepUnderflow(t));
            }
        }
    }
    Ok((t, y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let (t, y, st) = dopri5(
            |_, y| Ok(vec![y[1], -y[0]]),
            0.0,
            vec![1.0, 0.0],
            10.0,
            &OdeOptions::default(),
            |_, _| Ok(StepAction::Continue),
        )
        .unwrap();
        assert_eq!(t, 10.0);
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((y[1] + 10f64.sin()).abs() < 1e-9);
        assert!(st.accepted > 10);
    }

    #[test]
    fn backward_and_stop() {
        let (_, y, _) = dopri5(|_, y| Ok(vec![y[0]]), 1.0, vec![1.0], 0.0, &OdeOptions::default(), |_, _| {
            Ok(StepAction::Continue)
        })
        .unwrap();
        assert!((y[0] - (-1f64).exp()).abs() < 1e-10);
        let (t, _, _) = dopri5(|_, _| Ok(vec![1.0]), 0.0, vec![0.0], 5.0, &OdeOptions::default(), |t, _| {
            Ok(if t > 1.0 { StepAction::Stop } else { StepAction::Continue })
        })
        .unwrap();
        assert!(t > 1.0 && t < 5.0);
    }

    #[test]
    fn errors_propagate() {
        let r = dopri5(
            |t, _| if t > 0.5 { Err(Error::NoSubsonicWave) } else { Ok(vec![1.0]) },
            0.0,
            vec![0.0],
            1.0,
            &OdeOptions::default(),
            |_, _| Ok(StepAction::Continue),
        );
        assert!(matches!(r, Err(Error::NoSubsonicWave)));
    }
}
