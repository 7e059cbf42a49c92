//! Excitation of the regressor against rotor speed, and the resulting lower
//! bound on the extension matrix.
//!
//! cargo run --release --example persistency_of_excitation

use ipmsm_observer::config::PAPER_SIM_CFG;
use ipmsm_observer::harness::{prepare, run_observer};
use ipmsm_observer::analysis::pe_index;
use ipmsm_observer::{ObserverKind, ScenarioConfig, Vec2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>6} {:>10} {:>12} {:>10} {:>12}", "rpm", "T [ms]", "delta_hat", "sup|Phi|", "min eig Q");
    for rpm in [50, 200, 500, 1000, 2000] {
        let text = PAPER_SIM_CFG
            .replace("speed_rpm = 1000", &format!("speed_rpm = {rpm}"))
            .replace("duration = 2.0", "duration = 0.5");
        let cfg = ScenarioConfig::parse(&text)?;
        let prep = prepare(&cfg, false)?;
        let phi: Vec<Vec2> = prep.regressor.iter().map(|r| r.phi).collect();
        let pe = pe_index(&phi, cfg.pe_window, cfg.dt_sample, cfg.delta_min)?;
        let log = run_observer(&prep, ObserverKind::Kre, cfg.observer_settings())?;
        println!(
            "{:>6} {:>10.2} {:>12.4e} {:>10.3} {:>12.4e}",
            rpm,
            pe.window * 1e3,
            pe.delta_hat,
            pe.sup_phi,
            log.summary.q_min_after_window.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
