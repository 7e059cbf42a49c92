//! Active-flux observers sharing the structure
//!
//! ```text
//! lambda_hat' = v - R i + E,    x_hat = lambda_hat - Lq i,    theta_hat = atan2(x_hat)
//! ```
//!
//! with three choices of the correction `E`:
//!
//! * [`KreObserver`]: Kreisselmeier regression extension
//!   `Q' = -a (Q - Phi Phi^T)`, `Y' = -a (Y - Phi e) + Q E`, `E = -gamma Y`,
//!   where `e = Phi^T x_hat + d_hat - y` and `Q(0) = 0`, `Y(0) = 0`.
//! * [`GradientObserver`] with disturbance compensation:
//!   `E = gamma Phi (y - Phi^T x_hat - d_hat)`.
//! * [`GradientObserver`] without it: `E = gamma Phi (y - Phi^T x_hat)`.
//!
//! # Sampled-data realisation
//!
//! Measurements arrive at a fixed rate. Between two samples, `Phi`, `y` and
//! `d_hat` are held at the values of the earlier sample, and the correction
//! dynamics (`Q`, `Y` and the accumulated correction `eta' = E`) are advanced
//! by RK4. Inside the interval only the correction moves the estimate, so the
//! innovation is `e = e_held + Phi_held^T eta`. The measured part of the flux
//! integral, `int (v - R i)`, is taken with the causal interpolating
//! quadrature of [`SampledIntegrator`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{SVector, Vector2};

use crate::error::{positive, Error, Result};
use crate::filters::{SampledIntegrator, Signal};
use crate::motor::{angle_from_active_flux, Mat2, MotorParams, Vec2};
use crate::ode::rk4;
use crate::regressor::{DisturbanceFilter, RegressorSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObserverKind {
    Kre,
    GradAut,
    GradTie,
}

impl ObserverKind {
    pub const ALL: [ObserverKind; 3] = [ObserverKind::Kre, ObserverKind::GradAut, ObserverKind::GradTie];

    pub fn as_str(&self) -> &'static str {
        match self {
            ObserverKind::Kre => "kre",
            ObserverKind::GradAut => "grad_aut",
            ObserverKind::GradTie => "grad_tie",
        }
    }
}

impl fmt::Display for ObserverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObserverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "kre" => Ok(ObserverKind::Kre),
            "grad_aut" => Ok(ObserverKind::GradAut),
            "grad_tie" => Ok(ObserverKind::GradTie),
            other => Err(format!(
                "unknown observer `{other}` (expected kre, grad_aut or grad_tie)"
            )),
        }
    }
}

/// Tuning shared by all observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverSettings {
    pub gamma: f64,
    /// Extension filter rate (KRE only).
    pub a: f64,
    /// Threshold of the `sigma` normalisation.
    pub eps: f64,
    /// Regressor filter bandwidth; also used by the disturbance estimate.
    pub alpha: f64,
    /// Sample period.
    pub dt: f64,
    pub hold_order: usize,
    /// RK4 sub-steps per sample interval.
    pub substeps: usize,
    /// Removes the `Q E` term from `Y'` (mutation testing only).
    pub drop_qe: bool,
}

impl ObserverSettings {
    fn validate(&self) -> Result<()> {
        positive("gamma", self.gamma)?;
        positive("a", self.a)?;
        positive("eps", self.eps)?;
        positive("alpha", self.alpha)?;
        positive("dt", self.dt)?;
        if self.substeps == 0 {
            return Err(Error::InvalidParameter {
                name: "substeps",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverOutput {
    pub t: f64,
    pub x_hat: Vec2,
    /// `atan2(x_hat)`, zero when `x_hat` vanishes.
    pub theta_hat: f64,
    /// Correction `E` at the sample.
    pub correction: Vec2,
    /// `Phi^T x_hat + d_hat - y` (the uncompensated observer omits `d_hat`).
    pub innovation: f64,
    pub d_hat: Option<f64>,
}

/// Common interface of the three observers.
pub trait FluxObserver: Send {
    fn kind(&self) -> ObserverKind;

    /// Feeds a measurement taken before `t = 0` (interpolation history only).
    fn prime(&mut self, i: &Vec2, v: &Vec2);

    /// Processes the sample `(i, v)` with the regressor output of the same step.
    fn step(&mut self, i: &Vec2, v: &Vec2, reg: &RegressorSample) -> Result<ObserverOutput>;

    fn lambda_hat(&self) -> Vec2;

    /// `(Q, Y)` for observers that carry a regression extension.
    fn extension(&self) -> Option<(Mat2, Vec2)> {
        None
    }
}

/// Builds an observer of the given kind starting from `lambda0`.
pub fn build_observer(
    kind: ObserverKind,
    params: MotorParams,
    settings: ObserverSettings,
    lambda0: Vec2,
) -> Result<Box<dyn FluxObserver>> {
    Ok(match kind {
        ObserverKind::Kre => Box::new(KreObserver::new(params, settings, lambda0)?),
        ObserverKind::GradAut => Box::new(GradientObserver::new(params, settings, lambda0, true)?),
        ObserverKind::GradTie => Box::new(GradientObserver::new(params, settings, lambda0, false)?),
    })
}

#[derive(Debug, Clone, Copy)]
struct Held {
    phi: Vec2,
    innovation: f64,
}

/// Flux integration and disturbance estimate shared by every observer.
#[derive(Debug, Clone)]
struct FluxCore {
    params: MotorParams,
    settings: ObserverSettings,
    lambda_hat: Vec2,
    quadrature: SampledIntegrator<Vec2>,
    disturbance: DisturbanceFilter,
    held: Option<Held>,
    steps: usize,
}

impl FluxCore {
    fn new(params: MotorParams, settings: ObserverSettings, lambda0: Vec2) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            params,
            settings,
            lambda_hat: lambda0,
            quadrature: SampledIntegrator::new(settings.dt, settings.hold_order)?,
            disturbance: DisturbanceFilter::new(
                &params,
                settings.alpha,
                settings.dt,
                settings.hold_order,
            )?,
            held: None,
            steps: 0,
        })
    }

    fn prime(&mut self, i: &Vec2, v: &Vec2) {
        self.quadrature.prime(v - i * self.params.r());
    }

    /// Pushes the measured voltage drop; returns its integral over the last
    /// interval together with the held values of the previous sample.
    fn advance_measured(&mut self, i: &Vec2, v: &Vec2) -> Option<(Vec2, Held)> {
        let increment = self.quadrature.step(v - i * self.params.r());
        match (self.held, increment) {
            (Some(h), Some(inc)) => Some((inc, h)),
            _ => None,
        }
    }

    fn finish(
        &mut self,
        i: &Vec2,
        reg: &RegressorSample,
        compensate: bool,
    ) -> Result<(Vec2, Option<f64>, f64)> {
        let step = self.steps;
        self.steps += 1;
        let x_hat = self.lambda_hat - i * self.params.lq();
        if !(x_hat.x.is_finite() && x_hat.y.is_finite()) {
            return Err(Error::NonFinite {
                what: "flux estimate",
                step,
            });
        }
        let d_hat = self.disturbance.estimate(i, &x_hat, self.settings.eps);
        let d_used = if compensate { d_hat } else { 0.0 };
        let innovation = reg.phi.dot(&x_hat) + d_used - reg.y;
        if !innovation.is_finite() {
            return Err(Error::NonFinite {
                what: "innovation",
                step,
            });
        }
        self.held = Some(Held {
            phi: reg.phi,
            innovation,
        });
        Ok((x_hat, compensate.then_some(d_hat), innovation))
    }
}

fn theta_of(x_hat: &Vec2) -> f64 {
    angle_from_active_flux(x_hat).unwrap_or(0.0)
}

/// Flux observer with a Kreisselmeier regression extension.
#[derive(Debug, Clone)]
pub struct KreObserver {
    core: FluxCore,
    q: Mat2,
    y_ext: Vec2,
}

impl KreObserver {
    pub fn new(params: MotorParams, settings: ObserverSettings, lambda0: Vec2) -> Result<Self> {
        Ok(Self {
            core: FluxCore::new(params, settings, lambda0)?,
            q: Mat2::zeros(),
            y_ext: Vec2::zeros(),
        })
    }

    pub fn q(&self) -> Mat2 {
        self.q
    }

    pub fn y_ext(&self) -> Vec2 {
        self.y_ext
    }

    /// Correction dynamics over one sample interval. Returns the accumulated
    /// correction `eta`.
    fn integrate(&mut self, held: Held) -> Vec2 {
        let s = self.core.settings;
        let (gamma, a) = (s.gamma, s.a);
        let phi = held.phi;
        let ppt = phi * phi.transpose();
        let drop_qe = s.drop_qe;

        let mut state = SVector::<f64, 8>::zeros();
        state.fixed_rows_mut::<4>(0).copy_from_slice(self.q.as_slice());
        state.fixed_rows_mut::<2>(4).copy_from(&self.y_ext);

        let out = rk4(state, s.dt, s.substeps, |st| {
            let q = Mat2::from_column_slice(&st.as_slice()[0..4]);
            let y = Vector2::new(st[4], st[5]);
            let eta = Vector2::new(st[6], st[7]);
            let correction = y * -gamma;
            let e = held.innovation + phi.dot(&eta);
            let dq = (q - ppt) * -a;
            let mut dy = (y - phi * e) * -a;
            if !drop_qe {
                dy += q * correction;
            }
            let mut d = SVector::<f64, 8>::zeros();
            d.fixed_rows_mut::<4>(0).copy_from_slice(dq.as_slice());
            d.fixed_rows_mut::<2>(4).copy_from(&dy);
            d.fixed_rows_mut::<2>(6).copy_from(&correction);
            d
        });

        self.q = Mat2::from_column_slice(&out.as_slice()[0..4]);
        self.y_ext = Vector2::new(out[4], out[5]);
        Vector2::new(out[6], out[7])
    }
}

impl FluxObserver for KreObserver {
    fn kind(&self) -> ObserverKind {
        ObserverKind::Kre
    }

    fn prime(&mut self, i: &Vec2, v: &Vec2) {
        self.core.prime(i, v);
    }

    fn step(&mut self, i: &Vec2, v: &Vec2, reg: &RegressorSample) -> Result<ObserverOutput> {
        if let Some((increment, held)) = self.core.advance_measured(i, v) {
            let eta = self.integrate(held);
            self.core.lambda_hat += increment + eta;
        }
        let finite = self.q.iter().chain(self.y_ext.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite {
                what: "regression extension",
                step: self.core.steps,
            });
        }
        let (x_hat, d_hat, innovation) = self.core.finish(i, reg, true)?;
        Ok(ObserverOutput {
            t: reg.t,
            x_hat,
            theta_hat: theta_of(&x_hat),
            correction: self.y_ext * -self.core.settings.gamma,
            innovation,
            d_hat,
        })
    }

    fn lambda_hat(&self) -> Vec2 {
        self.core.lambda_hat
    }

    fn extension(&self) -> Option<(Mat2, Vec2)> {
        Some((self.q, self.y_ext))
    }
}

/// Gradient-descent flux observer, with or without disturbance compensation.
#[derive(Debug, Clone)]
pub struct GradientObserver {
    core: FluxCore,
    compensated: bool,
}

impl GradientObserver {
    pub fn new(
        params: MotorParams,
        settings: ObserverSettings,
        lambda0: Vec2,
        compensated: bool,
    ) -> Result<Self> {
        Ok(Self {
            core: FluxCore::new(params, settings, lambda0)?,
            compensated,
        })
    }

    fn integrate(&self, held: Held) -> Vec2 {
        let s = self.core.settings;
        let phi = held.phi;
        rk4(Vec2::zero(), s.dt, s.substeps, |eta| {
            phi * (-s.gamma * (held.innovation + phi.dot(eta)))
        })
    }
}

impl FluxObserver for GradientObserver {
    fn kind(&self) -> ObserverKind {
        if self.compensated {
            ObserverKind::GradAut
        } else {
            ObserverKind::GradTie
        }
    }

    fn prime(&mut self, i: &Vec2, v: &Vec2) {
        self.core.prime(i, v);
    }

    fn step(&mut self, i: &Vec2, v: &Vec2, reg: &RegressorSample) -> Result<ObserverOutput> {
        if let Some((increment, held)) = self.core.advance_measured(i, v) {
            let eta = self.integrate(held);
            self.core.lambda_hat += increment + eta;
        }
        let (x_hat, d_hat, innovation) = self.core.finish(i, reg, self.compensated)?;
        Ok(ObserverOutput {
            t: reg.t,
            x_hat,
            theta_hat: theta_of(&x_hat),
            correction: reg.phi * (-self.core.settings.gamma * innovation),
            innovation,
            d_hat,
        })
    }

    fn lambda_hat(&self) -> Vec2 {
        self.core.lambda_hat
    }
}
