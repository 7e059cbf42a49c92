//! The building blocks wired by hand, without the harness: ground truth,
//! regressor pipeline and observer advanced one sample at a time.
//!
//! cargo run --release --example manual_loop

use std::f64::consts::PI;

use ipmsm_observer::motor::{unit, wrap_angle, CurrentReference, MotorSim, RotorTrajectory};
use ipmsm_observer::observers::{FluxObserver, KreObserver, ObserverSettings};
use ipmsm_observer::{MotorParams, RegressorPipeline, Vec2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MotorParams::new(2.5, 0.00782, 0.0120, 0.1, 4)?;
    let omega = params.electrical_speed(600.0);
    let dt = 1e-4;
    let order = 5;
    let settings = ObserverSettings {
        gamma: 2.0,
        a: 20.0 * PI,
        eps: 0.01,
        alpha: 200.0 * PI,
        dt,
        hold_order: order,
        substeps: 4,
        drop_qe: false,
    };

    // truth starts `order` samples early to fill the interpolation history
    let t0 = -(order as f64) * dt;
    let mut sim = MotorSim::new(
        params,
        RotorTrajectory::constant(0.0, omega),
        CurrentReference::constant(-0.5, 3.0),
        t0,
        1e-5,
    )?;
    let mut pipe = RegressorPipeline::new(params, settings.alpha, dt, order)?;
    let mut obs = KreObserver::new(params, settings, unit(PI) * 0.15)?;

    for k in 0..=3000usize {
        if k > 0 {
            for _ in 0..10 {
                sim.step()?;
            }
        }
        let s = sim.sample();
        if k < order {
            pipe.prime(&s.i, &s.v);
            obs.prime(&s.i, &s.v);
            continue;
        }
        let t = (k - order) as f64 * dt;
        let reg = pipe.step(t, &s.i, &s.v);
        let out = obs.step(&s.i, &s.v, &reg)?;
        if (k - order) % 250 == 0 {
            let err: Vec2 = out.x_hat - s.x;
            println!(
                "t = {:>6.1} ms  |x~| = {:.3e} Wb  theta~ = {:+.3e} rad",
                t * 1e3,
                err.norm(),
                wrap_angle(out.theta_hat - s.theta)
            );
        }
    }
    Ok(())
}
