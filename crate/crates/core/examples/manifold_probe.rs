//! Residual `pi = Y - Q x~ - xi` of the virtual invariant manifold, with the
//! probe state started on and off the manifold.
//!
//! cargo run --release --example manifold_probe

use ipmsm_observer::harness::{manifold_from_rows, prepare, run_observer};
use ipmsm_observer::{ObserverKind, ScenarioConfig, Vec2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::salient();
    let prep = prepare(&cfg, false)?;
    let log = run_observer(&prep, ObserverKind::Kre, cfg.observer_settings())?;
    let on = manifold_from_rows(&log.rows, cfg.a, cfg.dt_sample, cfg.substeps, Vec2::zeros())?;
    let off = manifold_from_rows(&log.rows, cfg.a, cfg.dt_sample, cfg.substeps, Vec2::new(0.01, 0.0))?;

    println!("max |Y|  = {:.4e}", log.summary.max_y_ext.unwrap_or(0.0));
    println!("max |pi| = {:.4e} (xi(0) = 0)", on.max_pi());
    println!();
    println!("{:>8} {:>14} {:>14}", "a t", "|pi|", "0.01 exp(-a t)");
    let pi = off.pi_norm();
    for (r, p) in log.rows.iter().zip(&pi).step_by(40).take(9) {
        println!("{:>8.3} {:>14.6e} {:>14.6e}", cfg.a * r.t, p, 0.01 * (-cfg.a * r.t).exp());
    }
    Ok(())
}
