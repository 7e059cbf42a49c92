//! Scenario runs: ground truth, sampled measurements, observers, logs and
//! the built-in verification suite.
//!
//! The measurement stream starts `hold_order` samples before `t = 0` so the
//! interpolating filters have a full history at the first logged sample.
//! Filter and extension states still start at zero at `t = 0`.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    fit_rate, manifold_residual, pe_index, q_positivity, settling_time, steady_state_error,
    ManifoldInput, ManifoldProbe, PeReport, RateFit,
};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::motor::{wrap_angle, Mat2, MotorSim, Vec2};
use crate::observers::{build_observer, ObserverKind, ObserverSettings};
use crate::regressor::{RegressorPipeline, RegressorSample};

/// Flux settling threshold, relative to `psi_m`.
pub const SETTLE_FLUX_REL: f64 = 0.05;
/// Angle settling threshold (rad).
pub const SETTLE_ANGLE: f64 = 0.01;
/// Tight flux threshold, relative to `psi_m`.
pub const SETTLE_FLUX_FINE_REL: f64 = 0.01;
/// Fraction of the run used for steady-state averages.
pub const STEADY_FRACTION: f64 = 0.2;
/// Rate fits stop once `|x_tilde|` drops below this fraction of `psi_m`.
pub const RATE_FIT_STOP_REL: f64 = 1e-8;

/// One sampled measurement with the ground truth behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub t: f64,
    /// Wrapped electrical angle.
    pub theta: f64,
    pub x: Vec2,
    pub i_true: Vec2,
    pub v_true: Vec2,
    /// Current and voltage as seen by the observers (noise added).
    pub i: Vec2,
    pub v: Vec2,
}

/// Measurements and regression signals shared by every observer of a run.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub config: ScenarioConfig,
    pub preroll: Vec<Measurement>,
    pub samples: Vec<Measurement>,
    pub regressor: Vec<RegressorSample>,
}

/// Simulates the motor and runs the regressor pipeline over the samples.
pub fn prepare(config: &ScenarioConfig, break_omega1: bool) -> Result<PreparedRun> {
    let n = config.sample_count();
    let mut out = PreparedRun {
        config: config.clone(),
        preroll: Vec::new(),
        samples: Vec::new(),
        regressor: Vec::new(),
    };
    if n == 0 {
        return Ok(out);
    }
    let dt = config.dt_sample;
    let n_pre = config.hold_order;
    let mut sim = MotorSim::new(
        config.params,
        config.trajectory(),
        config.current,
        -(n_pre as f64) * dt,
        config.dt_truth,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise_i = Normal::new(0.0, config.noise_i).expect("std validated");
    let noise_v = Normal::new(0.0, config.noise_v).expect("std validated");
    let sub = config.truth_substeps();

    for k in 0..n_pre + n + 1 {
        if k > 0 {
            for _ in 0..sub {
                sim.step().map_err(|e| at_step(e, k))?;
            }
        }
        let s = sim.sample();
        let mut i = s.i;
        let mut v = s.v;
        if config.noise_i > 0.0 {
            i += Vec2::new(noise_i.sample(&mut rng), noise_i.sample(&mut rng));
        }
        if config.noise_v > 0.0 {
            v += Vec2::new(noise_v.sample(&mut rng), noise_v.sample(&mut rng));
        }
        let m = Measurement {
            t: (k as f64 - n_pre as f64) * dt,
            theta: s.theta,
            x: s.x,
            i_true: s.i,
            v_true: s.v,
            i,
            v,
        };
        if k < n_pre {
            out.preroll.push(m);
        } else {
            out.samples.push(m);
        }
    }

    let mut pipe =
        RegressorPipeline::new(config.params, config.alpha, dt, config.hold_order)?.with_broken_omega1(break_omega1);
    for m in &out.preroll {
        pipe.prime(&m.i, &m.v);
    }
    for m in &out.samples {
        let mut r = pipe.step(m.t, &m.i, &m.v);
        r.d_true = Some(pipe.true_disturbance(&m.i_true, &m.x)?);
        out.regressor.push(r);
    }
    Ok(out)
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::NonFinite { what, .. } => Error::NonFinite { what, step },
        other => other,
    }
}

/// One CSV row. Columns absent for an observer are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub theta: f64,
    pub theta_hat: f64,
    pub x1: f64,
    pub x2: f64,
    pub x1_hat: f64,
    pub x2_hat: f64,
    pub err_flux: f64,
    pub err_angle: f64,
    pub y: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub d_true: Option<f64>,
    pub d_hat: Option<f64>,
    pub q11: Option<f64>,
    pub q12: Option<f64>,
    pub q22: Option<f64>,
    #[serde(rename = "Y1")]
    pub y1: Option<f64>,
    #[serde(rename = "Y2")]
    pub y2: Option<f64>,
    pub pi_norm: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 20] = [
    "t", "theta", "theta_hat", "x1", "x2", "x1_hat", "x2_hat", "err_flux", "err_angle", "y",
    "phi1", "phi2", "d_true", "d_hat", "q11", "q12", "q22", "Y1", "Y2", "pi_norm",
];

impl LogRow {
    pub fn x(&self) -> Vec2 {
        Vec2::new(self.x1, self.x2)
    }

    pub fn x_hat(&self) -> Vec2 {
        Vec2::new(self.x1_hat, self.x2_hat)
    }

    pub fn phi(&self) -> Vec2 {
        Vec2::new(self.phi1, self.phi2)
    }

    pub fn q(&self) -> Option<Mat2> {
        Some(Mat2::new(self.q11?, self.q12?, self.q12?, self.q22?))
    }

    pub fn y_ext(&self) -> Option<Vec2> {
        Some(Vec2::new(self.y1?, self.y2?))
    }

    /// Lemma residual `y - Phi^T x - d_true`.
    pub fn regression_residual(&self) -> Option<f64> {
        Some(self.y - self.phi().dot(&self.x()) - self.d_true?)
    }

    fn manifold_input(&self) -> Option<ManifoldInput> {
        Some(ManifoldInput {
            phi: self.phi(),
            y: self.y,
            x: self.x(),
            x_hat: self.x_hat(),
            d_hat: self.d_hat?,
            q: self.q()?,
            y_ext: self.y_ext()?,
        })
    }
}

/// Integrates the manifold probe over logged KRE rows.
pub fn manifold_from_rows(rows: &[LogRow], a: f64, dt: f64, substeps: usize, xi0: Vec2) -> Result<ManifoldProbe> {
    let inputs = rows
        .iter()
        .map(|r| r.manifold_input())
        .collect::<Option<Vec<_>>>()
        .ok_or(Error::MissingGroundTruth("manifold probe needs d_hat, Q and Y columns"))?;
    manifold_residual(&inputs, a, dt, substeps, xi0)
}

/// Run-level numbers written to `metrics.json`. Each is recomputable from the
/// CSV with [`summarize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub observer: String,
    pub gamma: f64,
    pub a: f64,
    pub alpha: f64,
    pub dt_sample: f64,
    pub rows: usize,
    /// First time after which `|x_tilde| < 0.05 psi_m` holds.
    pub settling_flux: Option<f64>,
    /// First time after which `|theta_tilde| < 0.01 rad` holds.
    pub settling_angle: Option<f64>,
    pub rate: Option<RateFit>,
    pub steady_state_flux: Option<f64>,
    pub steady_state_angle: Option<f64>,
    pub final_flux_error: Option<f64>,
    /// First time after which `|x_tilde| < 0.01 psi_m` holds.
    pub settling_flux_fine: Option<f64>,
    pub max_pi: Option<f64>,
    pub max_y_ext: Option<f64>,
    pub q_min_after_window: Option<f64>,
    pub pe: Option<PeReport>,
    pub fault: Option<String>,
}

/// Scenario constants needed to summarise a log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryContext {
    pub kind: ObserverKind,
    pub gamma: f64,
    pub a: f64,
    pub alpha: f64,
    pub dt: f64,
    pub psi_m: f64,
    pub pe_window: f64,
    pub delta_min: f64,
}

impl SummaryContext {
    pub fn new(config: &ScenarioConfig, kind: ObserverKind) -> Self {
        Self {
            kind,
            gamma: config.gamma,
            a: config.a,
            alpha: config.alpha,
            dt: config.dt_sample,
            psi_m: config.params.psi_m(),
            pe_window: config.pe_window,
            delta_min: config.delta_min,
        }
    }
}

/// Computes the summary of a log. Pure in `rows`.
pub fn summarize(rows: &[LogRow], ctx: &SummaryContext, fault: Option<String>) -> RunSummary {
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let ef: Vec<f64> = rows.iter().map(|r| r.err_flux).collect();
    let ea: Vec<f64> = rows.iter().map(|r| r.err_angle).collect();
    let settling_flux = settling_time(&t, &ef, SETTLE_FLUX_REL * ctx.psi_m);
    let settling_angle = settling_time(&t, &ea, SETTLE_ANGLE);
    let settling_flux_fine = settling_time(&t, &ef, SETTLE_FLUX_FINE_REL * ctx.psi_m);

    let rate = {
        let stop = rows
            .iter()
            .find(|r| r.t >= ctx.pe_window && r.err_flux < RATE_FIT_STOP_REL * ctx.psi_m)
            .map_or(f64::INFINITY, |r| r.t);
        fit_rate(&t, &ef, ctx.pe_window, stop)
    };

    let qs: Option<Vec<Mat2>> = rows.iter().map(|r| r.q()).collect();
    let q_min_after_window = qs.and_then(|q| q_positivity(&t, &q, ctx.pe_window));
    let max_y_ext = rows
        .iter()
        .filter_map(|r| r.y_ext().map(|y| y.norm()))
        .reduce(f64::max);
    let max_pi = rows.iter().filter_map(|r| r.pi_norm).reduce(f64::max);
    let phi: Vec<Vec2> = rows.iter().map(|r| r.phi()).collect();
    let pe = pe_index(&phi, ctx.pe_window, ctx.dt, ctx.delta_min).ok();

    RunSummary {
        observer: ctx.kind.as_str().to_string(),
        gamma: ctx.gamma,
        a: ctx.a,
        alpha: ctx.alpha,
        dt_sample: ctx.dt,
        rows: rows.len(),
        settling_flux,
        settling_angle,
        rate,
        steady_state_flux: steady_state_error(&ef, STEADY_FRACTION),
        steady_state_angle: steady_state_error(&ea, STEADY_FRACTION),
        final_flux_error: ef.last().copied(),
        settling_flux_fine,
        max_pi,
        max_y_ext,
        q_min_after_window,
        pe,
        fault,
    }
}

/// Log of one observer over a prepared run.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub kind: ObserverKind,
    pub rows: Vec<LogRow>,
    pub summary: RunSummary,
    /// Set when the observer produced a non-finite value; `rows` then holds
    /// the samples before the fault.
    pub fault: Option<Error>,
}

/// Runs one observer over the prepared measurements.
pub fn run_observer(prep: &PreparedRun, kind: ObserverKind, settings: ObserverSettings) -> Result<RunLog> {
    let cfg = &prep.config;
    let mut obs = build_observer(kind, cfg.params, settings, cfg.initial_estimate())?;
    for m in &prep.preroll {
        obs.prime(&m.i, &m.v);
    }
    let mut rows = Vec::with_capacity(prep.samples.len());
    let mut fault = None;
    for (m, reg) in prep.samples.iter().zip(&prep.regressor) {
        let out = match obs.step(&m.i, &m.v, reg) {
            Ok(o) => o,
            Err(e) => {
                fault = Some(e);
                break;
            }
        };
        let ext = obs.extension();
        rows.push(LogRow {
            t: m.t,
            theta: m.theta,
            theta_hat: out.theta_hat,
            x1: m.x.x,
            x2: m.x.y,
            x1_hat: out.x_hat.x,
            x2_hat: out.x_hat.y,
            err_flux: (out.x_hat - m.x).norm(),
            err_angle: wrap_angle(out.theta_hat - m.theta),
            y: reg.y,
            phi1: reg.phi.x,
            phi2: reg.phi.y,
            d_true: reg.d_true,
            d_hat: out.d_hat,
            q11: ext.map(|e| e.0[(0, 0)]),
            q12: ext.map(|e| e.0[(0, 1)]),
            q22: ext.map(|e| e.0[(1, 1)]),
            y1: ext.map(|e| e.1.x),
            y2: ext.map(|e| e.1.y),
            pi_norm: None,
        });
    }
    if kind == ObserverKind::Kre && !rows.is_empty() {
        let probe = manifold_from_rows(&rows, settings.a, settings.dt, settings.substeps, Vec2::zeros())?;
        for (r, p) in rows.iter_mut().zip(probe.pi_norm()) {
            r.pi_norm = Some(p);
        }
    }
    let mut ctx = SummaryContext::new(cfg, kind);
    ctx.gamma = settings.gamma;
    ctx.a = settings.a;
    let summary = summarize(&rows, &ctx, fault.as_ref().map(|e| e.to_string()));
    Ok(RunLog {
        kind,
        rows,
        summary,
        fault,
    })
}

/// Prepares the scenario and runs every observer selected in the config.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<RunLog>> {
    let prep = prepare(config, false)?;
    compare_prepared(&prep, &config.observers, &config.observer_settings())
}

/// Runs the observers concurrently on one shared measurement stream.
pub fn compare_observers(config: &ScenarioConfig, kinds: &[ObserverKind]) -> Result<Vec<RunLog>> {
    let prep = prepare(config, false)?;
    compare_prepared(&prep, kinds, &config.observer_settings())
}

pub fn compare_prepared(
    prep: &PreparedRun,
    kinds: &[ObserverKind],
    settings: &ObserverSettings,
) -> Result<Vec<RunLog>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = kinds
            .iter()
            .map(|&k| s.spawn(move || run_observer(prep, k, *settings)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("observer thread panicked"))
            .collect()
    })
}

pub fn write_csv<W: Write>(writer: W, rows: &[LogRow]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<LogRow>, csv::Error> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

/// Writes `<dir>/<observer>/run.csv` and `<dir>/<observer>/metrics.json`.
pub fn write_run(dir: &Path, log: &RunLog) -> std::io::Result<()> {
    let sub = dir.join(log.kind.as_str());
    std::fs::create_dir_all(&sub)?;
    let f = std::io::BufWriter::new(std::fs::File::create(sub.join("run.csv"))?);
    write_csv(f, &log.rows).map_err(std::io::Error::other)?;
    let json = serde_json::to_string_pretty(&log.summary).map_err(std::io::Error::other)?;
    std::fs::write(sub.join("metrics.json"), json + "\n")
}

/// `y - Phi^T x - d_true` against time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    pub max_abs_y: f64,
    /// `max |residual| / max |y|` over `t > 10 / alpha`.
    pub rel_after_10: f64,
    /// Same over `t > 20 / alpha`.
    pub rel_after_20: f64,
    /// Fitted decay of `|residual|` on `[0, 5 / alpha]`.
    pub decay: Option<RateFit>,
    pub alpha: f64,
}

pub fn regression_report(prep: &PreparedRun) -> Result<RegressionReport> {
    let alpha = prep.config.alpha;
    let mut t = Vec::new();
    let mut res = Vec::new();
    for (m, r) in prep.samples.iter().zip(&prep.regressor) {
        let d = r.d_true.ok_or(Error::MissingGroundTruth("d_true"))?;
        t.push(m.t);
        res.push((r.y - r.phi.dot(&m.x) - d).abs());
    }
    let max_abs_y = prep.regressor.iter().map(|r| r.y.abs()).fold(0.0, f64::max);
    let rel_after = |from: f64| {
        t.iter()
            .zip(&res)
            .filter(|(&tk, _)| tk > from)
            .map(|(_, &e)| e)
            .fold(0.0, f64::max)
            / max_abs_y
    };
    Ok(RegressionReport {
        max_abs_y,
        rel_after_10: rel_after(10.0 / alpha),
        rel_after_20: rel_after(20.0 / alpha),
        decay: fit_rate(&t, &res, 0.0, 5.0 / alpha),
        alpha,
    })
}

/// One named pass/fail check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Drop `Lq H1[i]` from `Omega1`.
    pub break_omega1: bool,
    /// Drop `Q E` from the extension dynamics.
    pub drop_qe: bool,
}

/// Thresholds of the verification suite.
pub mod limits {
    /// Regression residual over `t > 10 / alpha`, relative to `max |y|`.
    pub const REGRESSION_REL: f64 = 1e-6;
    /// Allowed relative deviation of the residual decay rate from `alpha`.
    pub const REGRESSION_RATE_REL: f64 = 0.2;
    /// `max |pi| < MANIFOLD * (1 + max |Y|)`.
    pub const MANIFOLD: f64 = 1e-7;
    pub const XI_PERTURBATION: [f64; 2] = [0.01, 0.0];
    /// Pointwise relative tolerance on `|pi(t)| = |pi(0)| exp(-a t)`.
    pub const MANIFOLD_DECAY_REL: f64 = 0.01;
    /// Perturbed-manifold check horizon, in units of `1 / a`.
    pub const MANIFOLD_DECAY_HORIZON: f64 = 5.0;
    pub const ANGLE: f64 = super::SETTLE_ANGLE;
    /// Flux error bound after settling, relative to `psi_m`.
    pub const FLUX_REL: f64 = super::SETTLE_FLUX_FINE_REL;
    /// Latest admissible angle settling time (s).
    pub const SETTLE_BY: f64 = 1.0;
    /// Gain multiplier of the comparison runs.
    pub const GAIN_FACTOR: f64 = 5.0;
    /// `grad_aut` final error must exceed the KRE one by this factor.
    pub const BASELINE_RATIO: f64 = 2.0;
}

fn kre_settings(cfg: &ScenarioConfig, gamma: f64, opts: VerifyOptions) -> ObserverSettings {
    let mut s = cfg.observer_settings();
    s.gamma = gamma;
    s.drop_qe = opts.drop_qe;
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| format!("{v:.6e}"))
}

/// Checks of the regression identity on a prepared run.
pub fn check_regression(prep: &PreparedRun) -> Result<Vec<Check>> {
    use limits::*;
    let rep = regression_report(prep)?;
    let rate = rep.decay.map(|f| f.rate);
    Ok(vec![
        Check::new(
            "regression_residual",
            rep.rel_after_10 < REGRESSION_REL,
            format!("max|y - Phi^T x - d| / max|y| over t > 10/alpha = {:.3e} (limit {REGRESSION_REL:e})", rep.rel_after_10),
        ),
        Check::new(
            "regression_decay_rate",
            rate.is_some_and(|r| (r - rep.alpha).abs() <= REGRESSION_RATE_REL * rep.alpha),
            format!("fitted rate on [0, 5/alpha] = {} vs alpha = {:.6e}", fmt_opt(rate), rep.alpha),
        ),
        Check::new(
            "regression_floor",
            rep.rel_after_20 < REGRESSION_REL,
            format!("max relative residual over t > 20/alpha = {:.3e}", rep.rel_after_20),
        ),
    ])
}

/// Invariance and decay of the manifold residual for one KRE log.
pub fn check_manifold(log: &RunLog, cfg: &ScenarioConfig, label: &str) -> Result<Vec<Check>> {
    use limits::*;
    let max_y = log.summary.max_y_ext.unwrap_or(0.0);
    let max_pi = log.summary.max_pi.unwrap_or(f64::INFINITY);
    let bound = MANIFOLD * (1.0 + max_y);
    let mut checks = vec![Check::new(
        &format!("manifold_invariance_{label}"),
        log.fault.is_none() && max_pi < bound,
        format!("max|pi| = {max_pi:.3e}, bound = {bound:.3e}"),
    )];

    let xi0 = Vec2::new(XI_PERTURBATION[0], XI_PERTURBATION[1]);
    let probe = manifold_from_rows(&log.rows, cfg.a, cfg.dt_sample, cfg.substeps, xi0)?;
    let pi = probe.pi_norm();
    let pi0 = pi.first().copied().unwrap_or(0.0);
    let horizon = MANIFOLD_DECAY_HORIZON / cfg.a;
    let worst = log
        .rows
        .iter()
        .zip(&pi)
        .filter(|(r, _)| r.t <= horizon)
        .map(|(r, &p)| {
            let expected = pi0 * (-cfg.a * r.t).exp();
            (p - expected).abs() / expected
        })
        .fold(0.0, f64::max);
    checks.push(Check::new(
        &format!("manifold_decay_{label}"),
        pi0 > 0.0 && worst <= MANIFOLD_DECAY_REL,
        format!("worst relative deviation from |pi(0)| exp(-a t) on [0, {MANIFOLD_DECAY_HORIZON}/a] = {worst:.3e}"),
    ));
    Ok(checks)
}

/// Runs the full suite on one config.
pub fn verify(config: &ScenarioConfig, opts: VerifyOptions) -> Result<VerifyReport> {
    use limits::*;
    let prep = prepare(config, opts.break_omega1)?;
    let mut checks = check_regression(&prep)?;

    let g1 = config.gamma;
    let g5 = GAIN_FACTOR * config.gamma;
    let (kre1, kre5, aut5) = std::thread::scope(|s| {
        let a = s.spawn(|| run_observer(&prep, ObserverKind::Kre, kre_settings(config, g1, opts)));
        let b = s.spawn(|| run_observer(&prep, ObserverKind::Kre, kre_settings(config, g5, opts)));
        let c = s.spawn(|| run_observer(&prep, ObserverKind::GradAut, kre_settings(config, g5, opts)));
        (a.join().expect("run"), b.join().expect("run"), c.join().expect("run"))
    });
    let (kre1, kre5, aut5) = (kre1?, kre5?, aut5?);

    checks.extend(check_manifold(&kre1, config, &format!("gamma_{g1}"))?);
    checks.extend(check_manifold(&kre5, config, &format!("gamma_{g5}"))?);

    let s1 = &kre1.summary;
    let settled = match (s1.settling_angle, s1.settling_flux_fine) {
        (Some(a), Some(f)) => Some(a.max(f)),
        _ => None,
    };
    checks.push(Check::new(
        "convergence",
        settled.is_some_and(|t| t < SETTLE_BY),
        format!(
            "|theta_tilde| < {ANGLE} from {} s, |x_tilde| < {FLUX_REL} psi_m from {} s",
            fmt_opt(s1.settling_angle),
            fmt_opt(s1.settling_flux_fine)
        ),
    ));

    let s5 = &kre5.summary;
    let faster = matches!((s5.settling_flux, s1.settling_flux), (Some(a), Some(b)) if a < b);
    let steeper = matches!((s5.rate, s1.rate), (Some(a), Some(b)) if a.rate > b.rate);
    checks.push(Check::new(
        "gain_monotonic_settling",
        faster,
        format!("settling gamma={g5}: {} s, gamma={g1}: {} s", fmt_opt(s5.settling_flux), fmt_opt(s1.settling_flux)),
    ));
    checks.push(Check::new(
        "gain_monotonic_rate",
        steeper,
        format!(
            "rate gamma={g5}: {}, gamma={g1}: {}",
            fmt_opt(s5.rate.map(|r| r.rate)),
            fmt_opt(s1.rate.map(|r| r.rate))
        ),
    ));

    let sa = &aut5.summary;
    let slower = match (sa.settling_flux, s5.settling_flux) {
        (None, Some(_)) => true,
        (Some(a), Some(b)) => a > b,
        _ => false,
    };
    checks.push(Check::new(
        "baseline_slower",
        slower,
        format!("settling grad_aut: {} s, kre: {} s (gamma={g5})", fmt_opt(sa.settling_flux), fmt_opt(s5.settling_flux)),
    ));
    let ratio = match (sa.final_flux_error, s5.final_flux_error) {
        (Some(a), Some(b)) => a / b,
        _ => f64::NAN,
    };
    checks.push(Check::new(
        "baseline_final_error",
        ratio >= BASELINE_RATIO,
        format!("final |x_tilde| grad_aut / kre = {ratio:.3e} (gamma={g5})"),
    ));

    let pe = s1.pe;
    checks.push(Check::new(
        "persistent_excitation",
        pe.is_some_and(|p| p.satisfied),
        format!("delta_hat = {} over window {:.6e} s", fmt_opt(pe.map(|p| p.delta_hat)), config.pe_window),
    ));
    checks.push(Check::new(
        "q_positive",
        s1.q_min_after_window.is_some_and(|q| q > 0.0),
        format!("min eig Q for t >= T = {}", fmt_opt(s1.q_min_after_window)),
    ));

    if config.params.l0() != 0.0 {
        let settings = config.observer_settings();
        let logs = compare_prepared(&prep, &[ObserverKind::GradAut, ObserverKind::GradTie], &settings)?;
        let (aut, tie) = (&logs[0].summary, &logs[1].summary);
        let worse = matches!((tie.steady_state_flux, aut.steady_state_flux), (Some(t), Some(a)) if t > a);
        checks.push(Check::new(
            "uncompensated_worse",
            worse,
            format!(
                "steady |x_tilde| grad_tie = {}, grad_aut = {}",
                fmt_opt(tie.steady_state_flux),
                fmt_opt(aut.steady_state_flux)
            ),
        ));
    }

    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Outcome of one sweep entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOutcome {
    Converged,
    NotConverged,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub param: String,
    pub value: f64,
    pub outcome: SweepOutcome,
    pub summary: RunSummary,
}

/// Runs the first configured observer for each value of `param`.
pub fn sweep(config: &ScenarioConfig, param: &str, values: &[f64]) -> Result<Vec<SweepEntry>> {
    let kind = config.observers.first().copied().unwrap_or(ObserverKind::Kre);
    let configs = values
        .iter()
        .map(|&v| config.with_param(param, v))
        .collect::<Result<Vec<_>, _>>()?;
    std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                s.spawn(move || -> Result<RunLog> {
                    let prep = prepare(c, false)?;
                    run_observer(&prep, kind, c.observer_settings())
                })
            })
            .collect();
        handles
            .into_iter()
            .zip(values)
            .map(|(h, &value)| {
                let log = h.join().expect("sweep thread panicked")?;
                let psi_m = config.params.psi_m();
                let outcome = if log.fault.is_some() {
                    SweepOutcome::Diverged
                } else if log.summary.settling_flux.is_some()
                    && log.summary.final_flux_error.is_some_and(|e| e < limits::FLUX_REL * psi_m)
                {
                    SweepOutcome::Converged
                } else {
                    SweepOutcome::NotConverged
                };
                Ok(SweepEntry {
                    param: param.to_string(),
                    value,
                    outcome,
                    summary: log.summary,
                })
            })
            .collect()
    })
}

/// Excitation of the regressor for a config.
pub fn pe_report(config: &ScenarioConfig) -> Result<PeReport> {
    let prep = prepare(config, false)?;
    let phi: Vec<Vec2> = prep.regressor.iter().map(|r| r.phi).collect();
    pe_index(&phi, config.pe_window, config.dt_sample, config.delta_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PAPER_SIM_CFG;

    fn short(duration: f64) -> ScenarioConfig {
        ScenarioConfig::parse(&PAPER_SIM_CFG.replace("duration = 2.0", &format!("duration = {duration}"))).unwrap()
    }

    #[test]
    fn zero_duration_is_empty() {
        let logs = run_scenario(&short(0.0)).unwrap();
        assert_eq!(logs.len(), 1);
        assert!(logs[0].rows.is_empty());
        assert_eq!(logs[0].summary.settling_flux, None);
        assert_eq!(logs[0].summary.pe, None);
        let mut buf = Vec::new();
        write_csv(&mut buf, &logs[0].rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn row_count_and_monotone_time() {
        let cfg = short(0.01);
        let logs = run_scenario(&cfg).unwrap();
        let rows = &logs[0].rows;
        assert_eq!(rows.len(), cfg.sample_count() + 1);
        assert_eq!(rows[0].t, 0.0);
        assert!(rows.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(rows[0].pi_norm, Some(0.0));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cfg = short(0.005);
        let prep = prepare(&cfg, false).unwrap();
        let logs = compare_prepared(&prep, &ObserverKind::ALL, &cfg.observer_settings()).unwrap();
        for log in logs {
            let mut buf = Vec::new();
            write_csv(&mut buf, &log.rows).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            assert_eq!(back, log.rows);
            let ctx = SummaryContext::new(&cfg, log.kind);
            assert_eq!(summarize(&back, &ctx, None), log.summary);
        }
    }

    #[test]
    fn gradient_rows_leave_extension_columns_empty() {
        let cfg = short(0.002);
        let prep = prepare(&cfg, false).unwrap();
        let log = run_observer(&prep, ObserverKind::GradTie, cfg.observer_settings()).unwrap();
        let r = log.rows[3];
        assert!(r.q11.is_none() && r.y1.is_none() && r.pi_norm.is_none() && r.d_hat.is_none());
        assert!(r.d_true.is_some());
        assert!(manifold_from_rows(&log.rows, cfg.a, cfg.dt_sample, 4, Vec2::zeros()).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let text = PAPER_SIM_CFG.replace("duration = 2.0", "duration = 0.002") + "\nnoise_i = 0.01\n";
        let a = prepare(&ScenarioConfig::parse(&text).unwrap(), false).unwrap();
        let b = prepare(&ScenarioConfig::parse(&text).unwrap(), false).unwrap();
        let c = prepare(&ScenarioConfig::parse(&text.replace("seed = 0", "seed = 1")).unwrap(), false).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_ne!(a.samples, c.samples);
        assert_ne!(a.samples[0].i, a.samples[0].i_true);
    }
}
