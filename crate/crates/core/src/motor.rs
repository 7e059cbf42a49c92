//! Ground-truth electrical model of an interior permanent-magnet synchronous
//! motor in the stationary alpha-beta frame.
//!
//! Rotor motion is kinematic: the electrical angle follows a prescribed
//! [`RotorTrajectory`], and the stator voltage is synthesised by analytic
//! feedforward so that the stator currents track a dq reference. All angles
//! and speeds are electrical.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};

use crate::error::{positive, Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Electrical constants of the machine.
///
/// `L0`, `Ls` and `ell` are always derived from `Ld`, `Lq` and `psi_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams {
    r: f64,
    ld: f64,
    lq: f64,
    psi_m: f64,
    pole_pairs: u32,
}

impl MotorParams {
    pub fn new(r: f64, ld: f64, lq: f64, psi_m: f64, pole_pairs: u32) -> Result<Self> {
        positive("R", r)?;
        positive("Ld", ld)?;
        positive("Lq", lq)?;
        positive("psi_m", psi_m)?;
        if pole_pairs == 0 {
            return Err(Error::InvalidParameter {
                name: "pole_pairs",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        Ok(Self {
            r,
            ld,
            lq,
            psi_m,
            pole_pairs,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn ld(&self) -> f64 {
        self.ld
    }
    pub fn lq(&self) -> f64 {
        self.lq
    }
    pub fn psi_m(&self) -> f64 {
        self.psi_m
    }
    pub fn pole_pairs(&self) -> u32 {
        self.pole_pairs
    }

    /// Inductance difference `Ld - Lq`.
    pub fn l0(&self) -> f64 {
        self.ld - self.lq
    }

    /// Averaged inductance `(Ld + Lq) / 2`.
    pub fn ls(&self) -> f64 {
        (self.ld + self.lq) / 2.0
    }

    /// Disturbance gain `psi_m * L0`.
    pub fn ell(&self) -> f64 {
        self.psi_m * self.l0()
    }

    /// Mechanical rpm to electrical rad/s.
    pub fn electrical_speed(&self, rpm: f64) -> f64 {
        rpm / 60.0 * 2.0 * PI * f64::from(self.pole_pairs)
    }
}

/// `c(theta) = (cos theta, sin theta)`.
pub fn unit(theta: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    Vec2::new(c, s)
}

/// Rotation by `theta` (dq to alpha-beta).
pub fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2::new(c, -s, s, c)
}

/// Quarter-turn rotation `J`, so that `d/dtheta rotation(theta) = J rotation(theta)`.
pub fn quarter_turn() -> Mat2 {
    Mat2::new(0.0, -1.0, 1.0, 0.0)
}

/// The saliency pattern `[[cos 2t, sin 2t], [sin 2t, -cos 2t]]`.
pub fn saliency_matrix(theta: f64) -> Mat2 {
    let (s, c) = (2.0 * theta).sin_cos();
    Mat2::new(c, s, s, -c)
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.sin().atan2(angle.cos());
    if w <= -PI {
        PI
    } else {
        w
    }
}

/// Stator inductance matrix `Ls I + (L0 / 2) Q(theta)`; its eigenvalues are `Ld` and `Lq`.
pub fn inductance_matrix(theta: f64, params: &MotorParams) -> Mat2 {
    Mat2::identity() * params.ls() + saliency_matrix(theta) * (params.l0() / 2.0)
}

/// Stator current from flux: `L(theta)^-1 (lambda - psi_m c(theta))`.
pub fn current_from_flux(lambda: &Vec2, theta: f64, params: &MotorParams) -> Vec2 {
    // Q(theta)^2 = I, so L^-1 = (Ls I - L0/2 Q) / (Ld Lq).
    let inv = (Mat2::identity() * params.ls() - saliency_matrix(theta) * (params.l0() / 2.0))
        / (params.ld * params.lq);
    inv * (lambda - unit(theta) * params.psi_m)
}

/// Stator flux from current: `L(theta) i + psi_m c(theta)`.
pub fn flux_from_current(i: &Vec2, theta: f64, params: &MotorParams) -> Vec2 {
    inductance_matrix(theta, params) * i + unit(theta) * params.psi_m
}

/// Active flux `lambda - Lq i`.
pub fn active_flux(lambda: &Vec2, i: &Vec2, params: &MotorParams) -> Vec2 {
    lambda - i * params.lq
}

/// Rotor angle carried by an active-flux vector, in `(-pi, pi]`.
pub fn angle_from_active_flux(x: &Vec2) -> Result<f64> {
    if x.x == 0.0 && x.y == 0.0 {
        return Err(Error::DegenerateFlux);
    }
    let theta = x.y.atan2(x.x);
    Ok(if theta <= -PI { PI } else { theta })
}

/// One piece of a [`RotorTrajectory`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// Constant electrical speed (rad/s) for `duration` seconds.
    Constant { omega: f64, duration: f64 },
    /// Linear speed ramp from `from` to `to` (rad/s) over `duration` seconds.
    Ramp { from: f64, to: f64, duration: f64 },
}

impl Segment {
    fn duration(&self) -> f64 {
        match *self {
            Segment::Constant { duration, .. } | Segment::Ramp { duration, .. } => duration,
        }
    }

    fn speed_at(&self, tau: f64) -> f64 {
        match *self {
            Segment::Constant { omega, .. } => omega,
            Segment::Ramp { from, to, duration } => from + (to - from) * tau / duration,
        }
    }

    fn angle_at(&self, tau: f64) -> f64 {
        match *self {
            Segment::Constant { omega, .. } => omega * tau,
            Segment::Ramp { from, to, duration } => {
                from * tau + 0.5 * (to - from) / duration * tau * tau
            }
        }
    }
}

/// Prescribed electrical angle and speed.
///
/// The angle is the closed-form integral of the speed inside each segment.
/// Before `t = 0` the initial speed is extended backwards, after the last
/// segment the final speed is held.
#[derive(Debug, Clone, PartialEq)]
pub struct RotorTrajectory {
    theta0: f64,
    segments: Vec<Segment>,
    // (start time, unwrapped angle at start) per segment
    starts: Vec<(f64, f64)>,
}

impl RotorTrajectory {
    pub fn new(theta0: f64, segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter {
                name: "segments",
                value: 0.0,
                reason: "trajectory needs at least one segment",
            });
        }
        let mut starts = Vec::with_capacity(segments.len());
        let (mut t, mut angle) = (0.0, theta0);
        for seg in &segments {
            let d = seg.duration();
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "segment duration",
                    value: d,
                    reason: "must be finite and >= 0",
                });
            }
            if let Segment::Ramp { duration, .. } = seg {
                positive("ramp duration", *duration)?;
            }
            starts.push((t, angle));
            angle += seg.angle_at(d);
            t += d;
        }
        Ok(Self {
            theta0,
            segments,
            starts,
        })
    }

    pub fn constant(theta0: f64, omega: f64) -> Self {
        Self::new(
            theta0,
            vec![Segment::Constant {
                omega,
                duration: 0.0,
            }],
        )
        .expect("constant trajectory")
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn initial_speed(&self) -> f64 {
        self.segments[0].speed_at(0.0)
    }

    fn locate(&self, t: f64) -> Option<usize> {
        if t < 0.0 {
            return None;
        }
        let idx = self.starts.partition_point(|&(start, _)| start <= t);
        Some(idx.saturating_sub(1))
    }

    /// Electrical speed (rad/s).
    pub fn speed(&self, t: f64) -> f64 {
        match self.locate(t) {
            None => self.initial_speed(),
            Some(k) => {
                let seg = &self.segments[k];
                let tau = (t - self.starts[k].0).min(seg.duration());
                seg.speed_at(tau)
            }
        }
    }

    /// Unwrapped electrical angle (rad).
    pub fn angle_unwrapped(&self, t: f64) -> f64 {
        match self.locate(t) {
            None => self.theta0 + self.initial_speed() * t,
            Some(k) => {
                let seg = &self.segments[k];
                let (start, angle0) = self.starts[k];
                let tau = t - start;
                let d = seg.duration();
                if tau <= d {
                    angle0 + seg.angle_at(tau)
                } else {
                    angle0 + seg.angle_at(d) + seg.speed_at(d) * (tau - d)
                }
            }
        }
    }

    /// Electrical angle wrapped to `(-pi, pi]`.
    pub fn angle(&self, t: f64) -> f64 {
        wrap_angle(self.angle_unwrapped(t))
    }
}

/// dq current reference, with an optional sinusoidal ripple on the d axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentReference {
    pub id: f64,
    pub iq: f64,
    pub id_ripple_amp: f64,
    /// Ripple angular frequency (rad/s).
    pub id_ripple_omega: f64,
}

impl CurrentReference {
    pub fn constant(id: f64, iq: f64) -> Self {
        Self {
            id,
            iq,
            id_ripple_amp: 0.0,
            id_ripple_omega: 0.0,
        }
    }

    pub fn dq(&self, t: f64) -> Vec2 {
        Vec2::new(
            self.id + self.id_ripple_amp * (self.id_ripple_omega * t).sin(),
            self.iq,
        )
    }

    pub fn dq_rate(&self, t: f64) -> Vec2 {
        Vec2::new(
            self.id_ripple_amp * self.id_ripple_omega * (self.id_ripple_omega * t).cos(),
            0.0,
        )
    }
}

/// Reference current in the stationary frame.
pub fn reference_current(traj: &RotorTrajectory, iref: &CurrentReference, t: f64) -> Vec2 {
    rotation(traj.angle_unwrapped(t)) * iref.dq(t)
}

/// Flux that produces the reference current at time `t`.
pub fn reference_flux(
    traj: &RotorTrajectory,
    iref: &CurrentReference,
    t: f64,
    params: &MotorParams,
) -> Vec2 {
    let theta = traj.angle_unwrapped(t);
    flux_from_current(&(rotation(theta) * iref.dq(t)), theta, params)
}

/// Feedforward voltage `d(lambda*)/dt + R i*` that makes the motor track the
/// dq reference along the trajectory. The derivative is analytic.
pub fn synth_feedforward_voltage(
    traj: &RotorTrajectory,
    iref: &CurrentReference,
    t: f64,
    params: &MotorParams,
) -> Vec2 {
    let theta = traj.angle_unwrapped(t);
    let omega = traj.speed(t);
    let rot = rotation(theta);
    let i_ref = rot * iref.dq(t);
    let lambda_ref = flux_from_current(&i_ref, theta, params);
    // lambda* = rot(theta) (Ld id + psi_m, Lq iq)
    let di = iref.dq_rate(t);
    let lambda_dq_rate = Vec2::new(params.ld * di.x, params.lq * di.y);
    quarter_turn() * lambda_ref * omega + rot * lambda_dq_rate + i_ref * params.r
}

/// Stator flux at a point in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorState {
    pub t: f64,
    pub lambda: Vec2,
}

/// Advances `lambda' = -R i + v` by one classical RK4 step. The current is
/// recomputed from `(lambda, theta)` at each stage; `angle` and `voltage` are
/// evaluated at the stage times.
pub fn step_motor(
    state: &MotorState,
    params: &MotorParams,
    angle: impl Fn(f64) -> f64,
    voltage: impl Fn(f64) -> Vec2,
    dt: f64,
) -> Result<MotorState> {
    positive("dt", dt)?;
    let f = |t: f64, lambda: &Vec2| -> Vec2 {
        let i = current_from_flux(lambda, angle(t), params);
        voltage(t) - i * params.r
    };
    let t = state.t;
    let l = state.lambda;
    let h = dt / 2.0;
    let k1 = f(t, &l);
    let k2 = f(t + h, &(l + k1 * h));
    let k3 = f(t + h, &(l + k2 * h));
    let k4 = f(t + dt, &(l + k3 * dt));
    let lambda = l + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if !(lambda.x.is_finite() && lambda.y.is_finite()) {
        return Err(Error::NonFinite {
            what: "motor flux",
            step: 0,
        });
    }
    Ok(MotorState { t: t + dt, lambda })
}

/// One ground-truth sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthSample {
    pub t: f64,
    /// Electrical angle, wrapped to `(-pi, pi]`.
    pub theta: f64,
    pub lambda: Vec2,
    pub i: Vec2,
    pub v: Vec2,
    pub x: Vec2,
    pub d_true: Option<f64>,
}

/// Fixed-step simulation of the motor under feedforward voltage.
#[derive(Debug, Clone)]
pub struct MotorSim {
    params: MotorParams,
    traj: RotorTrajectory,
    iref: CurrentReference,
    state: MotorState,
    dt: f64,
}

impl MotorSim {
    /// Starts on the reference flux at `t0`.
    pub fn new(
        params: MotorParams,
        traj: RotorTrajectory,
        iref: CurrentReference,
        t0: f64,
        dt: f64,
    ) -> Result<Self> {
        positive("dt_truth", dt)?;
        let lambda = reference_flux(&traj, &iref, t0, &params);
        Ok(Self {
            params,
            traj,
            iref,
            state: MotorState { t: t0, lambda },
            dt,
        })
    }

    pub fn state(&self) -> &MotorState {
        &self.state
    }

    pub fn step(&mut self) -> Result<()> {
        let (traj, iref, params) = (&self.traj, &self.iref, &self.params);
        self.state = step_motor(
            &self.state,
            params,
            |t| traj.angle_unwrapped(t),
            |t| synth_feedforward_voltage(traj, iref, t, params),
            self.dt,
        )?;
        Ok(())
    }

    /// Snapshot of the current state.
    pub fn sample(&self) -> GroundTruthSample {
        let t = self.state.t;
        let theta = self.traj.angle_unwrapped(t);
        let lambda = self.state.lambda;
        let i = current_from_flux(&lambda, theta, &self.params);
        GroundTruthSample {
            t,
            theta: wrap_angle(theta),
            lambda,
            i,
            v: synth_feedforward_voltage(&self.traj, &self.iref, t, &self.params),
            x: active_flux(&lambda, &i, &self.params),
            d_true: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn salient() -> MotorParams {
        MotorParams::new(2.5, 0.00782, 0.0120, 0.1, 4).unwrap()
    }

    #[test]
    fn derived_inductances() {
        let p = salient();
        assert_eq!(p.l0(), 0.00782 - 0.0120);
        assert_eq!(p.ls(), (0.00782 + 0.0120) / 2.0);
        assert_eq!(p.ell(), 0.1 * (0.00782 - 0.0120));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(MotorParams::new(0.0, 1.0, 1.0, 1.0, 1).is_err());
        assert!(MotorParams::new(1.0, -1.0, 1.0, 1.0, 1).is_err());
        assert!(MotorParams::new(1.0, 1.0, 1.0, f64::NAN, 1).is_err());
        assert!(MotorParams::new(1.0, 1.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn inductance_matrix_examples() {
        let p = salient();
        let m = inductance_matrix(0.0, &p);
        assert_abs_diff_eq!(m, Mat2::new(0.00782, 0.0, 0.0, 0.0120), epsilon = 1e-15);
        let m = inductance_matrix(PI / 4.0, &p);
        assert_abs_diff_eq!(
            m,
            Mat2::new(0.00991, -0.00209, -0.00209, 0.00991),
            epsilon = 1e-15
        );
        let iso = MotorParams::new(2.5, 0.00782, 0.00782, 0.1, 4).unwrap();
        for k in 0..16 {
            let m = inductance_matrix(k as f64 * 0.4 - 3.0, &iso);
            assert_abs_diff_eq!(m, Mat2::identity() * 0.00782, epsilon = 1e-18);
        }
    }

    #[test]
    fn current_flux_examples() {
        let p = salient();
        for k in 0..8 {
            let theta = k as f64 * 0.77 - 2.0;
            let i = current_from_flux(&(unit(theta) * p.psi_m()), theta, &p);
            assert_abs_diff_eq!(i, Vec2::zeros(), epsilon = 1e-12);
        }
        let lambda = Vec2::new(p.psi_m() + p.ld(), 2.0 * p.lq());
        assert_abs_diff_eq!(
            current_from_flux(&lambda, 0.0, &p),
            Vec2::new(1.0, 2.0),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            flux_from_current(&Vec2::zeros(), PI / 2.0, &p),
            Vec2::new(0.0, p.psi_m()),
            epsilon = 1e-16
        );
        assert_abs_diff_eq!(
            flux_from_current(&Vec2::new(1.0, 0.0), 0.0, &p),
            Vec2::new(p.psi_m() + p.ld(), 0.0),
            epsilon = 1e-16
        );
    }

    #[test]
    fn active_flux_examples() {
        let p = salient();
        let x = active_flux(&Vec2::new(1.0, 2.0), &Vec2::new(0.5, 0.5), &p);
        assert_abs_diff_eq!(x, Vec2::new(0.994, 1.994), epsilon = 1e-15);
        let lambda = Vec2::new(0.3, -0.2);
        assert_eq!(active_flux(&lambda, &Vec2::zeros(), &p), lambda);
    }

    #[test]
    fn angle_examples() {
        assert_abs_diff_eq!(
            angle_from_active_flux(&Vec2::new(0.0, 0.1)).unwrap(),
            PI / 2.0
        );
        assert_eq!(angle_from_active_flux(&Vec2::new(-0.1, 0.0)).unwrap(), PI);
        assert_eq!(angle_from_active_flux(&Vec2::new(-0.1, -0.0)).unwrap(), PI);
        assert_eq!(
            angle_from_active_flux(&Vec2::zeros()),
            Err(Error::DegenerateFlux)
        );
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(0.25), 0.25, epsilon = 1e-16);
    }

    #[test]
    fn trajectory_is_integral_of_speed() {
        let traj = RotorTrajectory::new(
            0.3,
            vec![
                Segment::Constant {
                    omega: 100.0,
                    duration: 0.5,
                },
                Segment::Ramp {
                    from: 100.0,
                    to: 300.0,
                    duration: 0.5,
                },
            ],
        )
        .unwrap();
        assert_abs_diff_eq!(traj.angle_unwrapped(0.5), 0.3 + 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(traj.angle_unwrapped(1.0), 0.3 + 50.0 + 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(traj.speed(0.75), 200.0, epsilon = 1e-12);
        // past the end: final speed held
        assert_abs_diff_eq!(traj.angle_unwrapped(1.5), 0.3 + 150.0 + 150.0, epsilon = 1e-12);
        // before zero: initial speed extended
        assert_abs_diff_eq!(traj.angle_unwrapped(-0.01), 0.3 - 1.0, epsilon = 1e-12);
        // midpoint rule on the ramp reproduces the quadratic exactly
        let n = 1000;
        let h = 0.5 / n as f64;
        let integral: f64 = (0..n).map(|k| traj.speed(0.5 + (k as f64 + 0.5) * h) * h).sum();
        assert_abs_diff_eq!(
            traj.angle_unwrapped(1.0) - traj.angle_unwrapped(0.5),
            integral,
            epsilon = 1e-9
        );
    }

    #[test]
    fn rpm_conversion() {
        let p = salient();
        assert_abs_diff_eq!(p.electrical_speed(1000.0), 418.879_020_478_639, epsilon = 1e-9);
    }

    #[test]
    fn feedforward_statics_and_zero_current() {
        let p = salient();
        let traj = RotorTrajectory::constant(0.4, 0.0);
        let v = synth_feedforward_voltage(&traj, &CurrentReference::constant(0.0, 0.0), 1.0, &p);
        assert_eq!(v, Vec2::zeros());

        let omega = 418.879;
        let traj = RotorTrajectory::constant(0.1, omega);
        for k in 0..10 {
            let t = k as f64 * 1.3e-3;
            let v =
                synth_feedforward_voltage(&traj, &CurrentReference::constant(0.0, 0.0), t, &p);
            let th = traj.angle_unwrapped(t);
            assert_abs_diff_eq!(
                v,
                Vec2::new(-th.sin(), th.cos()) * (p.psi_m() * omega),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn feedforward_matches_finite_difference() {
        let p = salient();
        let traj = RotorTrajectory::constant(0.2, 418.879);
        let iref = CurrentReference {
            id: -0.5,
            iq: 2.0,
            id_ripple_amp: 1.0,
            id_ripple_omega: 125.0,
        };
        let h = 1e-7;
        for k in 0..10 {
            let t = k as f64 * 7.1e-4;
            let dl = (reference_flux(&traj, &iref, t + h, &p)
                - reference_flux(&traj, &iref, t - h, &p))
                / (2.0 * h);
            let v = synth_feedforward_voltage(&traj, &iref, t, &p);
            let expected = dl + reference_current(&traj, &iref, t) * p.r();
            assert_abs_diff_eq!(v, expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn equilibrium_holds_flux() {
        let p = salient();
        let theta = 0.7;
        let lambda = Vec2::new(0.12, 0.05);
        let v = current_from_flux(&lambda, theta, &p) * p.r();
        let mut state = MotorState { t: 0.0, lambda };
        for _ in 0..100 {
            state = step_motor(&state, &p, |_| theta, |_| v, 1e-5).unwrap();
        }
        assert_abs_diff_eq!(state.lambda, lambda, epsilon = 1e-15);
    }

    #[test]
    fn step_motor_rejects_bad_dt_and_nan() {
        let p = salient();
        let s = MotorState {
            t: 0.0,
            lambda: Vec2::new(0.1, 0.0),
        };
        assert!(step_motor(&s, &p, |_| 0.0, |_| Vec2::zeros(), 0.0).is_err());
        assert!(matches!(
            step_motor(&s, &p, |_| 0.0, |_| Vec2::new(f64::NAN, 0.0), 1e-5),
            Err(Error::NonFinite { .. })
        ));
    }
}
