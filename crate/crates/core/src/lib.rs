//! Sensorless rotor-position estimation for interior permanent-magnet
//! synchronous motors through the active flux `x = lambda - Lq i`.
//!
//! * [`motor`]: stationary-frame motor model, feedforward voltage, RK4 ground truth.
//! * [`filters`]: first-order filters `H1`, `H2` and their sampled realisations.
//! * [`regressor`]: filtered regression `y = Phi^T x + d` from measured `(i, v)`.
//! * [`observers`]: KRE observer and the two gradient baselines.
//! * [`analysis`]: excitation index, rate fits, the invariant-manifold probe.
//! * [`config`] and [`harness`]: scenario files, runs, logs and the verify suite.

pub mod analysis;
pub mod config;
pub mod error;
pub mod filters;
pub mod harness;
pub mod motor;
mod ode;
pub mod observers;
pub mod regressor;

pub use config::{ConfigError, ScenarioConfig};
pub use error::{Error, Result};
pub use motor::{Mat2, MotorParams, Vec2};
pub use observers::{FluxObserver, GradientObserver, KreObserver, ObserverKind, ObserverSettings};
pub use regressor::{RegressorPipeline, RegressorSample};
