//! Residual of the filtered regression `y = Phi^T x + d` along the true
//! trajectory of the salient scenario.
//!
//! cargo run --release --example regression_identity

use ipmsm_observer::harness::{prepare, regression_report};
use ipmsm_observer::ScenarioConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::salient();
    let prep = prepare(&cfg, false)?;
    let alpha = cfg.alpha;

    println!("{:>10} {:>14} {:>16}", "alpha t", "|residual|", "|r| exp(alpha t)");
    for (m, r) in prep.samples.iter().zip(&prep.regressor) {
        let k = (m.t * alpha * 2.0).round();
        if (m.t * alpha * 2.0 - k).abs() > 0.032 || k > 40.0 {
            continue;
        }
        let res = (r.y - r.phi.dot(&m.x) - r.d_true.unwrap_or(0.0)).abs();
        println!("{:>10.2} {:>14.3e} {:>16.4}", m.t * alpha, res, res * (alpha * m.t).exp());
    }

    let rep = regression_report(&prep)?;
    println!();
    println!("max |y|                      : {:.4e}", rep.max_abs_y);
    println!("max |r| / max |y|, t > 10/a  : {:.3e}", rep.rel_after_10);
    println!("max |r| / max |y|, t > 20/a  : {:.3e}", rep.rel_after_20);
    println!("decay rate on [0, 5/alpha]   : {:.3} (alpha = {:.3})", rep.decay.map_or(f64::NAN, |f| f.rate), alpha);

    let broken = prepare(&cfg, true)?;
    println!("same with Lq H1[i] dropped   : {:.3e}", regression_report(&broken)?.rel_after_20);
    Ok(())
}
