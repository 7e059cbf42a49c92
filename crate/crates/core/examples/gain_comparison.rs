//! Settling time of the KRE observer for increasing adaptation gain.
//!
//! cargo run --release --example gain_comparison

use ipmsm_observer::harness::{compare_prepared, prepare};
use ipmsm_observer::{ObserverKind, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::paper_sim();
    let prep = prepare(&cfg, false)?;
    println!("{:>6} {:>14} {:>14} {:>12}", "gamma", "settle_x [ms]", "settle_th [ms]", "rate [1/s]");
    for gamma in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let mut s = cfg.observer_settings();
        s.gamma = gamma;
        let log = compare_prepared(&prep, &[ObserverKind::Kre], &s)?.remove(0);
        let m = &log.summary;
        println!(
            "{:>6} {:>14.2} {:>14.2} {:>12.2}",
            gamma,
            m.settling_flux.map_or(f64::NAN, |t| t * 1e3),
            m.settling_angle.map_or(f64::NAN, |t| t * 1e3),
            m.rate.map_or(f64::NAN, |r| r.rate)
        );
    }
    // past the transient every gain decays at about the extension rate `a`
    println!("a = {:.2} 1/s", cfg.a);
    Ok(())
}
