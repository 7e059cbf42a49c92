//! KRE observer on the bundled non-salient scenario, started a quarter turn
//! off with twice the magnet flux.
//!
//! cargo run --release --example reference_scenario

use ipmsm_observer::harness::{prepare, run_observer};
use ipmsm_observer::{ObserverKind, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::paper_sim();
    let prep = prepare(&cfg, false)?;
    let log = run_observer(&prep, ObserverKind::Kre, cfg.observer_settings())?;

    println!("{:>8} {:>12} {:>12}", "t [ms]", "|x~| [Wb]", "theta~ [rad]");
    for r in log.rows.iter().step_by(20).take_while(|r| r.t <= 0.03) {
        println!("{:>8.1} {:>12.3e} {:>12.3e}", r.t * 1e3, r.err_flux, r.err_angle);
    }
    let s = &log.summary;
    println!();
    println!("settling |x~| < 5% psi_m : {:?} s", s.settling_flux);
    println!("settling |theta~| < 0.01 : {:?} s", s.settling_angle);
    println!("final |x~|               : {:?} Wb", s.final_flux_error);
    println!("max |pi|                 : {:?}", s.max_pi);
    Ok(())
}
