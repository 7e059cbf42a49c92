//! Sweep of the regressor filter bandwidth.
//!
//! cargo run --release --example alpha_sweep

use std::f64::consts::PI;

use ipmsm_observer::harness::sweep;
use ipmsm_observer::ScenarioConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::paper_sim();
    let values: Vec<f64> = [5.0, 20.0, 200.0, 2000.0].iter().map(|k| k * PI).collect();
    println!("{:>10} {:>14} {:>14} {:>12}", "alpha/pi", "outcome", "settle_x [s]", "final |x~|");
    for e in sweep(&cfg, "alpha", &values)? {
        println!(
            "{:>10.0} {:>14} {:>14} {:>12.3e}",
            e.value / PI,
            format!("{:?}", e.outcome),
            e.summary.settling_flux.map_or("never".into(), |t| format!("{t:.4}")),
            e.summary.final_flux_error.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
