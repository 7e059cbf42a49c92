//! First-order filters `H2(p) = alpha / (p + alpha)` and
//! `H1(p) = alpha p / (p + alpha) = alpha (1 - H2(p))`.
//!
//! [`LowPassState`] is the zero-order-hold realisation: exact when the input
//! is piecewise constant on the sample grid. [`SampledLowPass`] generalises it
//! to a causal polynomial hold through the most recent samples, which is what
//! the regressor and observers use on sampled smooth signals.
//! [`SampledIntegrator`] is the same hold with a unit kernel, i.e. a plain
//! running quadrature.

use std::collections::VecDeque;
use std::ops::{Add, Mul, Sub};

use crate::error::{positive, Error, Result};
use crate::motor::Vec2;

/// Highest supported interpolation order.
pub const MAX_HOLD_ORDER: usize = 6;

/// Zero-order-hold state of `H2`; `H1` is realised as `alpha (u - H2[u])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPassState {
    z: f64,
    alpha: f64,
    dt: f64,
    decay: f64,
}

/// `exp(-alpha dt)`, required to lie strictly inside `(0, 1)`.
fn decay_factor(alpha: f64, dt: f64) -> Result<f64> {
    positive("alpha", alpha)?;
    positive("dt", dt)?;
    let d = (-alpha * dt).exp();
    if d > 0.0 && d < 1.0 {
        Ok(d)
    } else {
        Err(Error::InvalidParameter {
            name: "alpha*dt",
            value: alpha * dt,
            reason: "exp(-alpha dt) must lie strictly between 0 and 1",
        })
    }
}

impl LowPassState {
    pub fn new(alpha: f64, dt: f64) -> Result<Self> {
        Ok(Self {
            z: 0.0,
            alpha,
            dt,
            decay: decay_factor(alpha, dt)?,
        })
    }

    pub fn with_state(mut self, z: f64) -> Self {
        self.z = z;
        self
    }

    pub fn state(&self) -> f64 {
        self.z
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// `z' = a_d z + (1 - a_d) u`, returns `z'`.
    pub fn h2_step(&mut self, u: f64) -> f64 {
        self.z = self.decay * self.z + (1.0 - self.decay) * u;
        self.z
    }

    /// `alpha (u - H2[u])` after stepping the inner `H2`.
    pub fn h1_step(&mut self, u: f64) -> f64 {
        let z = self.h2_step(u);
        self.alpha * (u - z)
    }
}

/// Values that can pass through a filter bank.
pub trait Signal: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
}

impl Signal for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Signal for Vec2 {
    fn zero() -> Self {
        Vec2::zeros()
    }
}

// 8-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// `int_{-1}^{0} kernel(s) l_j(s) ds` for the Lagrange basis on nodes
/// `0, -1, ..., -order` (in units of the sample step).
fn lagrange_weights(order: usize, kernel: impl Fn(f64) -> f64) -> Vec<f64> {
    let nodes: Vec<f64> = (0..=order).map(|m| -(m as f64)).collect();
    let basis = |j: usize, s: f64| -> f64 {
        nodes
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != j)
            .map(|(_, &nm)| (s - nm) / (nodes[j] - nm))
            .product()
    };
    (0..=order)
        .map(|j| {
            let mut acc = 0.0;
            for (&x, &w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
                for xs in [-x, x] {
                    // map [-1, 1] to [-1, 0]
                    let s = (xs - 1.0) / 2.0;
                    acc += w * 0.5 * kernel(s) * basis(j, s);
                }
            }
            acc
        })
        .collect()
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_HOLD_ORDER {
        return Err(Error::InvalidParameter {
            name: "hold_order",
            value: order as f64,
            reason: "interpolation order too high",
        });
    }
    Ok(())
}

/// Interpolation history with per-order weights.
#[derive(Debug, Clone)]
struct HoldHistory<S> {
    order: usize,
    // weights[q] holds the q + 1 weights of the order-q rule
    weights: Vec<Vec<f64>>,
    recent: VecDeque<S>,
    seen: usize,
}

impl<S: Signal> HoldHistory<S> {
    fn new(order: usize, kernel: impl Fn(f64) -> f64 + Copy) -> Self {
        Self {
            order,
            weights: (0..=order).map(|q| lagrange_weights(q, kernel)).collect(),
            recent: VecDeque::with_capacity(order + 1),
            seen: 0,
        }
    }

    fn push(&mut self, u: S) {
        if self.recent.len() == self.order + 1 {
            self.recent.pop_back();
        }
        self.recent.push_front(u);
        self.seen += 1;
    }

    /// Weighted sum over the last interval, `None` until two samples exist.
    fn increment(&self) -> Option<S> {
        if self.seen < 2 {
            return None;
        }
        let q = self.order.min(self.recent.len() - 1);
        let sum = self.weights[q]
            .iter()
            .zip(self.recent.iter())
            .fold(S::zero(), |acc, (&w, &u)| acc + u * w);
        Some(sum)
    }
}

/// `H2` realised with a causal polynomial hold of order `order` through the
/// latest samples. Order 0 is the zero-order hold.
///
/// The output at each call is the filter state at the time of the sample just
/// pushed: the first sample only seeds the history.
#[derive(Debug, Clone)]
pub struct SampledLowPass<S> {
    z: S,
    alpha: f64,
    decay: f64,
    history: HoldHistory<S>,
}

impl<S: Signal> SampledLowPass<S> {
    pub fn new(alpha: f64, dt: f64, order: usize) -> Result<Self> {
        let decay = decay_factor(alpha, dt)?;
        check_order(order)?;
        let c = alpha * dt;
        Ok(Self {
            z: S::zero(),
            alpha,
            decay,
            history: HoldHistory::new(order, move |s| c * (c * s).exp()),
        })
    }

    pub fn with_state(mut self, z: S) -> Self {
        self.z = z;
        self
    }

    pub fn state(&self) -> S {
        self.z
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Records a sample taken before the filter starts; the state is untouched
    /// and the next [`step`](Self::step) still returns the initial state.
    pub fn prime(&mut self, u: S) {
        self.history.push(u);
        self.history.seen = 0;
    }

    /// Pushes `u` and returns the `H2` output.
    pub fn step(&mut self, u: S) -> S {
        self.history.push(u);
        if let Some(inc) = self.history.increment() {
            self.z = self.z * self.decay + inc;
        }
        self.z
    }

    /// Pushes `u` and returns the `H1` output `alpha (u - H2[u])`.
    pub fn step_h1(&mut self, u: S) -> S {
        let z = self.step(u);
        (u - z) * self.alpha
    }
}

/// Running integral of a sampled signal with the same causal polynomial hold.
#[derive(Debug, Clone)]
pub struct SampledIntegrator<S> {
    dt: f64,
    history: HoldHistory<S>,
}

impl<S: Signal> SampledIntegrator<S> {
    pub fn new(dt: f64, order: usize) -> Result<Self> {
        positive("dt", dt)?;
        check_order(order)?;
        Ok(Self {
            dt,
            history: HoldHistory::new(order, |_| 1.0),
        })
    }

    pub fn prime(&mut self, u: S) {
        self.history.push(u);
        self.history.seen = 0;
    }

    /// Pushes `u` and returns the integral over the last sample interval.
    pub fn step(&mut self, u: S) -> Option<S> {
        self.history.push(u);
        self.history.increment().map(|s| s * self.dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn step_response_settles() {
        let alpha = 200.0;
        let dt = 1e-4;
        let mut f = LowPassState::new(alpha, dt).unwrap();
        let c = 3.0;
        let n = (5.0 / alpha / dt).round() as usize;
        let mut y = 0.0;
        for _ in 0..n {
            y = f.h2_step(c);
        }
        assert!((y - c).abs() <= (-5.0f64).exp() * c + 1e-12);
    }

    #[test]
    fn free_decay_is_geometric() {
        let mut f = LowPassState::new(50.0, 1e-3).unwrap().with_state(1.0);
        let a = f.decay();
        let mut expected = 1.0;
        for _ in 0..20 {
            expected *= a;
            assert_eq!(f.h2_step(0.0), expected);
        }
    }

    #[test]
    fn zoh_matches_analytic_solution() {
        // piecewise-constant input on the grid
        let alpha = 628.3;
        let dt = 1e-4;
        let mut f = LowPassState::new(alpha, dt).unwrap();
        let mut z = 0.0f64;
        for k in 0..500 {
            let u = ((k * 37) % 11) as f64 - 5.0;
            let exact = u + (z - u) * (-alpha * dt).exp();
            let got = f.h2_step(u);
            assert!((got - exact).abs() < 1e-13);
            z = exact;
        }
    }

    #[test]
    fn sinusoid_gain() {
        let alpha = 200.0;
        let omega = 300.0;
        let dt = 1e-5;
        let mut f = LowPassState::new(alpha, dt).unwrap();
        let n = (20.0 / alpha / dt) as usize;
        let period = (2.0 * std::f64::consts::PI / omega / dt) as usize;
        let mut peak = 0.0f64;
        for k in 0..n + period {
            let y = f.h2_step((omega * k as f64 * dt).sin());
            if k >= n {
                peak = peak.max(y.abs());
            }
        }
        let expected = alpha / (alpha * alpha + omega * omega).sqrt();
        assert!((peak - expected).abs() / expected < 1e-3);
    }

    #[test]
    fn h1_kills_dc_and_differentiates_ramp() {
        let alpha = 200.0;
        let dt = 1e-5;
        let mut f = LowPassState::new(alpha, dt).unwrap();
        let mut y = 1.0;
        for _ in 0..(10.0 / alpha / dt) as usize {
            y = f.h1_step(4.0);
        }
        assert!(y.abs() < 4.0 * alpha * (-9.9f64).exp());

        // the ZOH output lags the ramp by half a step, a relative error of alpha dt / 2
        let dt = 1e-6;
        let mut f = LowPassState::new(alpha, dt).unwrap();
        let n = (10.0 / alpha / dt) as usize;
        for k in 0..n {
            y = f.h1_step(k as f64 * dt);
        }
        assert!((y - 1.0).abs() < 1e-3);
    }

    #[test]
    fn h1_agrees_with_tustin_to_second_order() {
        // Tustin H1: y_k = c1 y_{k-1} + c2 (u_k - u_{k-1})
        let alpha = 300.0;
        let run = |dt: f64| -> f64 {
            let mut f = LowPassState::new(alpha, dt).unwrap();
            let k_t = 2.0 / dt;
            let c1 = (k_t - alpha) / (k_t + alpha);
            let c2 = alpha * k_t / (k_t + alpha);
            let (mut yt, mut u_prev) = (0.0, 0.0);
            let mut worst = 0.0f64;
            let n = (0.05 / dt) as usize;
            for k in 1..=n {
                let t = k as f64 * dt;
                let u = (90.0 * t).sin() + 0.3 * (20.0 * t).cos();
                yt = c1 * yt + c2 * (u - u_prev);
                u_prev = u;
                let ys = f.h1_step(u);
                if t > 0.02 {
                    worst = worst.max((ys - yt).abs());
                }
            }
            worst
        };
        // the ZOH realisation lags by half a step relative to Tustin, so the
        // gap shrinks at least linearly and stays small
        let (e1, e2) = (run(1e-4), run(5e-5));
        assert!(e1 < 2.0);
        assert!(e2 < e1 * 0.6);
    }

    #[test]
    fn linearity_bitwise() {
        let mut fa = LowPassState::new(100.0, 1e-4).unwrap();
        let mut fb = LowPassState::new(100.0, 1e-4).unwrap();
        let mut fs = LowPassState::new(100.0, 1e-4).unwrap();
        for k in 0..200 {
            let u = (k as f64 * 0.1).sin();
            let w = (k as f64 * 0.37).cos();
            let ya = fa.h2_step(u);
            let yb = fb.h2_step(w);
            let ys = fs.h2_step(2.0 * u + 0.5 * w);
            assert_abs_diff_eq!(ys, 2.0 * ya + 0.5 * yb, epsilon = 1e-14);
        }
    }

    #[test]
    fn weights_reproduce_exact_integrals() {
        // unit kernel: order-q weights are exact for polynomials of degree q
        for q in 0..=MAX_HOLD_ORDER {
            let w = lagrange_weights(q, |_| 1.0);
            for deg in 0..=q {
                let f = |s: f64| s.powi(deg as i32);
                let approx: f64 = w.iter().enumerate().map(|(j, wj)| wj * f(-(j as f64))).sum();
                let exact = -(-1.0f64).powi(deg as i32 + 1) / (deg as f64 + 1.0);
                assert_abs_diff_eq!(approx, exact, epsilon = 1e-12);
            }
        }
        // exponential kernel: weights sum to 1 - e^{-c}
        let c = 0.0628;
        for q in 0..=5 {
            let w = lagrange_weights(q, |s| c * (c * s).exp());
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0 - (-c).exp(), epsilon = 1e-15);
        }
    }

    #[test]
    fn order_zero_matches_zoh_recurrence() {
        let mut zoh = LowPassState::new(400.0, 1e-4).unwrap();
        let mut hold = SampledLowPass::<f64>::new(400.0, 1e-4, 0).unwrap();
        hold.prime(0.0);
        for k in 0..50 {
            let u = (k as f64 * 0.3).sin();
            assert_abs_diff_eq!(hold.step(u), zoh.h2_step(u), epsilon = 1e-15);
        }
    }

    /// Fine RK4 solution of z' = alpha (u(t) - z) as the oracle.
    fn reference_h2(alpha: f64, u: impl Fn(f64) -> f64, t_end: f64) -> f64 {
        let n = 200_000;
        let h = t_end / n as f64;
        let f = |t: f64, z: f64| alpha * (u(t) - z);
        let mut z = 0.0;
        for k in 0..n {
            let t = k as f64 * h;
            let k1 = f(t, z);
            let k2 = f(t + h / 2.0, z + h / 2.0 * k1);
            let k3 = f(t + h / 2.0, z + h / 2.0 * k2);
            let k4 = f(t + h, z + h * k3);
            z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        z
    }

    #[test]
    fn polynomial_hold_exact_for_polynomials() {
        let alpha = 628.0;
        let dt = 1e-4;
        let u = |t: f64| 1.0 + 30.0 * t - 900.0 * t * t + 2.0e4 * t * t * t;
        for order in 3..=5 {
            let mut f = SampledLowPass::<f64>::new(alpha, dt, order).unwrap();
            for k in (1..=order).rev() {
                f.prime(u(-(k as f64) * dt));
            }
            let n = 100;
            let mut z = 0.0;
            for k in 0..=n {
                z = f.step(u(k as f64 * dt));
            }
            let exact = reference_h2(alpha, u, n as f64 * dt);
            assert_abs_diff_eq!(z, exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn hold_order_improves_sinusoid_tracking() {
        let alpha = 628.0;
        let omega = 419.0;
        let dt = 1e-4;
        let n = 300;
        let exact = reference_h2(alpha, |t| (omega * t).sin(), n as f64 * dt);
        let err = |order: usize| {
            let mut f = SampledLowPass::<f64>::new(alpha, dt, order).unwrap();
            for k in (1..=order).rev() {
                f.prime((-(k as f64) * dt * omega).sin());
            }
            let mut z = 0.0;
            for k in 0..=n {
                z = f.step((omega * k as f64 * dt).sin());
            }
            (z - exact).abs()
        };
        let (e0, e1, e3, e5) = (err(0), err(1), err(3), err(5));
        assert!(e0 > 1e-3, "{e0}");
        assert!(e1 < e0 && e3 < e1 && e5 < e3, "{e0} {e1} {e3} {e5}");
        assert!(e5 < 1e-9, "{e5}");
    }

    #[test]
    fn integrator_is_exact_for_cubics() {
        let dt = 1e-3;
        let u = |t: f64| 2.0 - t + 5.0 * t * t * t;
        let mut q = SampledIntegrator::<f64>::new(dt, 3).unwrap();
        for k in (1..=3).rev() {
            q.prime(u(-(k as f64) * dt));
        }
        assert!(q.step(u(0.0)).is_none());
        let mut total = 0.0;
        for k in 1..=100 {
            total += q.step(u(k as f64 * dt)).unwrap();
        }
        let t = 0.1f64;
        assert_abs_diff_eq!(total, 2.0 * t - t * t / 2.0 + 1.25 * t.powi(4), epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(LowPassState::new(0.0, 1e-4).is_err());
        assert!(LowPassState::new(1.0, -1e-4).is_err());
        assert!(SampledLowPass::<f64>::new(1.0, 1e-4, MAX_HOLD_ORDER + 1).is_err());
    }
}
