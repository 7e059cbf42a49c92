//! Post-processing over logged series: excitation index, extension-matrix
//! positivity, rate fitting, settling times and the invariant-manifold probe.
//!
//! Everything here is a pure function of the logged values.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motor::{Mat2, Vec2};
use crate::ode::rk4;

/// Eigenvalues `(min, max)` of a symmetric 2x2 matrix, in closed form.
pub fn sym2_eigenvalues(m: &Mat2) -> (f64, f64) {
    let half_trace = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half_gap = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let r = half_gap.hypot(off);
    (half_trace - r, half_trace + r)
}

/// Worst-window excitation of a regressor series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeReport {
    /// Window length (s).
    pub window: f64,
    /// Smallest eigenvalue of the windowed Gram integral over all windows.
    pub delta_hat: f64,
    /// Start time of the worst window, relative to the first sample.
    pub worst_start: f64,
    pub sup_phi: f64,
    pub delta_min: f64,
    /// `delta_hat > delta_min`.
    pub satisfied: bool,
}

/// Slides a window of `window` seconds over `phi` (sampled every `dt`) and
/// integrates `Phi Phi^T` by the trapezoid rule. Windows start at every sample.
pub fn pe_index(phi: &[Vec2], window: f64, dt: f64, delta_min: f64) -> Result<PeReport> {
    crate::error::positive("window", window)?;
    crate::error::positive("dt", dt)?;
    let n = (window / dt).round().max(1.0) as usize;
    if phi.len() < n + 1 {
        return Err(Error::SeriesTooShort {
            needed: n + 1,
            got: phi.len(),
        });
    }
    let outer = |p: &Vec2| [p.x * p.x, p.x * p.y, p.y * p.y];
    // cumulative trapezoid sums of the three distinct entries
    let mut cum = Vec::with_capacity(phi.len());
    cum.push([0.0; 3]);
    for w in phi.windows(2) {
        let (a, b) = (outer(&w[0]), outer(&w[1]));
        let last = cum[cum.len() - 1];
        cum.push([
            last[0] + 0.5 * dt * (a[0] + b[0]),
            last[1] + 0.5 * dt * (a[1] + b[1]),
            last[2] + 0.5 * dt * (a[2] + b[2]),
        ]);
    }
    let mut delta_hat = f64::INFINITY;
    let mut worst = 0;
    for k in 0..phi.len() - n {
        let (lo, hi) = (cum[k], cum[k + n]);
        let g = Mat2::new(hi[0] - lo[0], hi[1] - lo[1], hi[1] - lo[1], hi[2] - lo[2]);
        let (min, _) = sym2_eigenvalues(&g);
        if min < delta_hat {
            delta_hat = min;
            worst = k;
        }
    }
    // rounding can push a rank-1 Gram matrix slightly negative
    let delta_hat = delta_hat.max(0.0);
    let sup_phi = phi.iter().map(|p| p.norm()).fold(0.0, f64::max);
    Ok(PeReport {
        window: n as f64 * dt,
        delta_hat,
        worst_start: worst as f64 * dt,
        sup_phi,
        delta_min,
        satisfied: delta_hat > delta_min,
    })
}

/// Minimum over `t >= t_after` of the smallest eigenvalue of `Q(t)`.
/// `None` when no sample qualifies.
pub fn q_positivity(t: &[f64], q: &[Mat2], t_after: f64) -> Option<f64> {
    t.iter()
        .zip(q)
        .filter(|(&tk, _)| tk >= t_after)
        .map(|(_, qk)| sym2_eigenvalues(qk).0)
        .reduce(f64::min)
}

/// Least-squares fit of `log|err| = c - rate t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
    /// Number of samples clipped to [`RATE_FIT_FLOOR`].
    pub clipped: usize,
}

pub const RATE_FIT_FLOOR: f64 = 1e-15;

/// Fits an exponential rate to `err` on `t_start <= t <= t_end`.
/// Non-positive errors are clipped to [`RATE_FIT_FLOOR`]. `None` with fewer
/// than three points in the window.
pub fn fit_rate(t: &[f64], err: &[f64], t_start: f64, t_end: f64) -> Option<RateFit> {
    let mut clipped = 0;
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(err)
        .filter(|(&tk, _)| tk >= t_start && tk <= t_end)
        .map(|(&tk, &e)| {
            let e = if e > 0.0 && e.is_finite() {
                e
            } else {
                clipped += 1;
                RATE_FIT_FLOOR
            };
            (tk, e.max(RATE_FIT_FLOOR).ln())
        })
        .collect();
    if clipped > 0 {
        warn!("fit_rate: {clipped} non-positive errors clipped to {RATE_FIT_FLOOR:e}");
    }
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut stt, mut stl, mut sll) = (0.0, 0.0, 0.0);
    for &(tk, lk) in &pts {
        stt += (tk - mt) * (tk - mt);
        stl += (tk - mt) * (lk - ml);
        sll += (lk - ml) * (lk - ml);
    }
    let slope = stl / stt;
    let r_squared = if sll == 0.0 { 1.0 } else { stl * stl / (stt * sll) };
    Some(RateFit {
        rate: -slope,
        r_squared,
        points: pts.len(),
        clipped,
    })
}

/// First time after which `err < threshold` holds up to the end of the series.
/// `None` if the last sample is not below the threshold.
pub fn settling_time(t: &[f64], err: &[f64], threshold: f64) -> Option<f64> {
    let last_bad = err.iter().rposition(|e| e.is_nan() || e.abs() >= threshold);
    match last_bad {
        None => t.first().copied(),
        Some(k) if k + 1 < t.len() => Some(t[k + 1]),
        Some(_) => None,
    }
}

/// Mean of `|err|` over the final `fraction` of the series.
pub fn steady_state_error(err: &[f64], fraction: f64) -> Option<f64> {
    if err.is_empty() {
        return None;
    }
    let n = ((err.len() as f64 * fraction).ceil() as usize).clamp(1, err.len());
    let tail = &err[err.len() - n..];
    Some(tail.iter().map(|e| e.abs()).sum::<f64>() / n as f64)
}

/// One logged KRE sample as needed by [`manifold_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldInput {
    pub phi: Vec2,
    pub y: f64,
    /// True active flux.
    pub x: Vec2,
    pub x_hat: Vec2,
    pub d_hat: f64,
    pub q: Mat2,
    pub y_ext: Vec2,
}

/// `pi = Y - Q x_tilde - xi` along a KRE run.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldProbe {
    pub xi: Vec<Vec2>,
    pub pi: Vec<Vec2>,
}

impl ManifoldProbe {
    pub fn pi_norm(&self) -> Vec<f64> {
        self.pi.iter().map(|p| p.norm()).collect()
    }

    pub fn max_pi(&self) -> f64 {
        self.pi.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// Integrates `xi' = -a (xi - Phi d_tilde)` alongside a logged run with the
/// same hold and sub-stepping as the observer, where
/// `d_tilde = d_hat - (y - Phi^T x)` is the total mismatch of the regression.
/// Row `k + 1` is reached from row `k` with `Phi` and `d_tilde` held.
pub fn manifold_residual(
    rows: &[ManifoldInput],
    a: f64,
    dt: f64,
    substeps: usize,
    xi0: Vec2,
) -> Result<ManifoldProbe> {
    crate::error::positive("a", a)?;
    crate::error::positive("dt", dt)?;
    let mut xi = xi0;
    let mut out = ManifoldProbe {
        xi: Vec::with_capacity(rows.len()),
        pi: Vec::with_capacity(rows.len()),
    };
    for (k, r) in rows.iter().enumerate() {
        if k > 0 {
            let prev = &rows[k - 1];
            let d_tilde = prev.d_hat - (prev.y - prev.phi.dot(&prev.x));
            let forcing = prev.phi * d_tilde;
            xi = rk4(xi, dt, substeps.max(1), |s| (s - forcing) * -a);
        }
        let x_tilde = r.x_hat - r.x;
        out.xi.push(xi);
        out.pi.push(r.y_ext - r.q * x_tilde - xi);
    }
    Ok(out)
}
