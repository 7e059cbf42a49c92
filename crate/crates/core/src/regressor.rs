//! Filtered regression signals for the active flux.
//!
//! From measured `(v, i)` the pipeline produces
//!
//! ```text
//! Omega1 = H2[v - R i] - Lq H1[i]
//! Omega2 = Omega1 - L0 H1[i]
//! Phi    = Omega1 + Omega2
//! y      = L0 H2[i]^T Omega1 + |Omega1|^2 / alpha + H2[Omega2^T Omega1] / alpha
//! ```
//!
//! which satisfy `y = Phi^T x + d` up to a term that decays like
//! `exp(-alpha t)` from the zero filter states. The current derivative in
//! `H2[Lq p i]` is realised through `H2(p) p = H1(p)`; nothing is
//! differentiated numerically.

use crate::error::{Error, Result};
use crate::filters::SampledLowPass;
use crate::motor::{MotorParams, Vec2};

/// Output of one regressor step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressorSample {
    pub t: f64,
    pub omega1: Vec2,
    pub omega2: Vec2,
    pub phi: Vec2,
    pub y: f64,
    /// Disturbance computed from the true active flux (diagnostics only).
    pub d_true: Option<f64>,
}

/// `x / |x|` when `|x| >= eps`, zero otherwise.
pub fn sigma(x_hat: &Vec2, eps: f64) -> Vec2 {
    let n = x_hat.norm();
    if n >= eps {
        x_hat / n
    } else {
        Vec2::zeros()
    }
}

/// `-ell H1[i^T u]` for a direction `u` derived from an active-flux vector.
#[derive(Debug, Clone)]
pub struct DisturbanceFilter {
    ell: f64,
    filter: SampledLowPass<f64>,
}

impl DisturbanceFilter {
    pub fn new(params: &MotorParams, alpha: f64, dt: f64, hold_order: usize) -> Result<Self> {
        Ok(Self {
            ell: params.ell(),
            filter: SampledLowPass::new(alpha, dt, hold_order)?,
        })
    }

    /// `d_hat = -ell H1[i^T sigma(x_hat)]`.
    pub fn estimate(&mut self, i: &Vec2, x_hat: &Vec2, eps: f64) -> f64 {
        let u = i.dot(&sigma(x_hat, eps));
        -self.ell * self.filter.step_h1(u)
    }

    /// `d = -ell H1[i^T x / |x|]` from the true active flux.
    pub fn true_value(&mut self, i: &Vec2, x: &Vec2) -> Result<f64> {
        let n = x.norm();
        if n == 0.0 {
            return Err(Error::DegenerateFlux);
        }
        let u = i.dot(&(x / n));
        Ok(-self.ell * self.filter.step_h1(u))
    }
}

/// Filter bank that turns sampled `(i, v)` into regression signals.
#[derive(Debug, Clone)]
pub struct RegressorPipeline {
    params: MotorParams,
    alpha: f64,
    dt: f64,
    voltage_drop: SampledLowPass<Vec2>,
    current: SampledLowPass<Vec2>,
    cross: SampledLowPass<f64>,
    disturbance: DisturbanceFilter,
    break_omega1: bool,
}

impl RegressorPipeline {
    pub fn new(params: MotorParams, alpha: f64, dt: f64, hold_order: usize) -> Result<Self> {
        Ok(Self {
            params,
            alpha,
            dt,
            voltage_drop: SampledLowPass::new(alpha, dt, hold_order)?,
            current: SampledLowPass::new(alpha, dt, hold_order)?,
            cross: SampledLowPass::new(alpha, dt, hold_order)?,
            disturbance: DisturbanceFilter::new(&params, alpha, dt, hold_order)?,
            break_omega1: false,
        })
    }

    /// Drops the `Lq H1[i]` term from `Omega1`. Only for mutation testing.
    pub fn with_broken_omega1(mut self, broken: bool) -> Self {
        self.break_omega1 = broken;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Feeds a measurement taken before `t = 0` into the interpolation history.
    pub fn prime(&mut self, i: &Vec2, v: &Vec2) {
        self.voltage_drop.prime(v - i * self.params.r());
        self.current.prime(*i);
    }

    pub fn step(&mut self, t: f64, i: &Vec2, v: &Vec2) -> RegressorSample {
        let p = &self.params;
        let h2_drop = self.voltage_drop.step(v - i * p.r());
        let h2_i = self.current.step(*i);
        let h1_i = (i - h2_i) * self.alpha;

        let omega1 = if self.break_omega1 {
            h2_drop
        } else {
            h2_drop - h1_i * p.lq()
        };
        let omega2 = omega1 - h1_i * p.l0();
        let phi = omega1 + omega2;
        let cross = self.cross.step(omega2.dot(&omega1));
        let y = p.l0() * h2_i.dot(&omega1)
            + omega1.norm_squared() / self.alpha
            + cross / self.alpha;
        RegressorSample {
            t,
            omega1,
            omega2,
            phi,
            y,
            d_true: None,
        }
    }

    /// Steps the diagnostic disturbance filter on the true active flux.
    pub fn true_disturbance(&mut self, i: &Vec2, x: &Vec2) -> Result<f64> {
        self.disturbance.true_value(i, x)
    }
}
