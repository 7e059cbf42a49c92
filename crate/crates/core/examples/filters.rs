//! The first-order filters on their own: exact ZOH step and the effect of
//! the interpolation order on a sampled sinusoid.
//!
//! cargo run --release --example filters

use ipmsm_observer::filters::{LowPassState, SampledLowPass};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let alpha = 200.0 * std::f64::consts::PI;
    let dt = 1e-4;

    let mut f = LowPassState::new(alpha, dt)?;
    let steps = (5.0 / alpha / dt).round() as usize;
    let mut y = 0.0;
    for _ in 0..steps {
        y = f.h2_step(1.0);
    }
    println!("H2 step response at t = 5/alpha: {y:.6} (1 - e^-5 = {:.6})", 1.0 - (-5.0f64).exp());

    // steady state of H2[sin(w t)] is g sin(w t - phase)
    let w = 2.0 * std::f64::consts::PI * 67.0;
    let g = alpha / (alpha * alpha + w * w).sqrt();
    let phase = (w / alpha).atan();
    println!();
    println!("{:>6} {:>14}", "order", "max error");
    for order in 0..=5 {
        let mut h = SampledLowPass::<f64>::new(alpha, dt, order)?;
        let mut worst = 0.0f64;
        for k in 0..4000 {
            let t = k as f64 * dt;
            let out = h.step((w * t).sin());
            if t > 20.0 / alpha {
                worst = worst.max((out - g * (w * t - phase).sin()).abs());
            }
        }
        println!("{order:>6} {worst:>14.3e}");
    }
    Ok(())
}
