//! Scenario configuration in a line-oriented `key = value` format.
//!
//! `#` starts a comment. Values are SI numbers; a trailing `pi` factor is
//! accepted (`20pi`, `20*pi`, `pi`). Unknown and repeated keys are errors.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::motor::{unit, CurrentReference, MotorParams, RotorTrajectory, Segment, Vec2};
use crate::observers::{ObserverKind, ObserverSettings};

pub const PAPER_SIM_CFG: &str = include_str!("../configs/paper_sim.cfg");
pub const SALIENT_CFG: &str = include_str!("../configs/salient.cfg");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigErrorKind {
    Syntax,
    UnknownKey,
    DuplicateKey,
    MissingKey,
    NotANumber(String),
    Invalid(String),
}

impl fmt::Display for ConfigErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigErrorKind::Syntax => f.write_str("expected `key = value`"),
            ConfigErrorKind::UnknownKey => f.write_str("unknown key"),
            ConfigErrorKind::DuplicateKey => f.write_str("key given twice"),
            ConfigErrorKind::MissingKey => f.write_str("required key missing"),
            ConfigErrorKind::NotANumber(v) => write!(f, "`{v}` is not a number"),
            ConfigErrorKind::Invalid(why) => f.write_str(why),
        }
    }
}

/// Parse or validation failure, naming the key and (1-based) line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub kind: ConfigErrorKind,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}, key `{}`: {}", self.key, self.kind),
            None => write!(f, "config key `{}`: {}", self.key, self.kind),
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: MotorParams,
    /// Electrical speed at `t = 0` (rad/s).
    pub omega_e: f64,
    pub theta0: f64,
    /// Optional speed ramp: `(start time, target electrical speed, duration)`.
    pub ramp: Option<(f64, f64, f64)>,
    pub current: CurrentReference,
    pub gamma: f64,
    pub a: f64,
    pub alpha: f64,
    pub eps: f64,
    pub dt_truth: f64,
    pub dt_sample: f64,
    pub duration: f64,
    pub init_angle_offset: f64,
    pub init_mag_scale: f64,
    pub noise_i: f64,
    pub noise_v: f64,
    pub observers: Vec<ObserverKind>,
    pub seed: u64,
    pub hold_order: usize,
    pub substeps: usize,
    pub delta_min: f64,
    pub pe_window: f64,
}

const KEYS: &[&str] = &[
    "R", "Ld", "Lq", "psi_m", "pole_pairs", "speed_rpm", "omega_e", "theta0", "ramp_to_rpm",
    "ramp_start", "ramp_duration", "id_ref", "iq_ref", "id_ripple_amp", "id_ripple_hz", "gamma",
    "a", "alpha", "eps", "dt_truth", "dt_sample", "duration", "init_angle_offset",
    "init_mag_scale", "noise_i", "noise_v", "observer", "seed", "hold_order", "substeps",
    "delta_min", "pe_window",
];

/// Parses a number with an optional `pi` factor.
pub fn parse_number(text: &str) -> Option<f64> {
    let s = text.trim();
    let (coef, has_pi) = match s.strip_suffix("pi") {
        Some(rest) => (rest.trim().trim_end_matches('*').trim(), true),
        None => (s, false),
    };
    let c = if has_pi && coef.is_empty() {
        1.0
    } else if has_pi && coef == "-" {
        -1.0
    } else {
        coef.parse::<f64>().ok()?
    };
    let v = if has_pi { c * PI } else { c };
    v.is_finite().then_some(v)
}

struct Raw {
    values: HashMap<String, (String, usize)>,
}

impl Raw {
    fn err(&self, key: &str, kind: ConfigErrorKind) -> ConfigError {
        ConfigError {
            line: self.values.get(key).map(|v| v.1),
            key: key.to_string(),
            kind,
        }
    }

    fn num(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some((v, _)) => parse_number(v)
                .map(Some)
                .ok_or_else(|| self.err(key, ConfigErrorKind::NotANumber(v.clone()))),
        }
    }

    fn required(&self, key: &str) -> Result<f64, ConfigError> {
        self.num(key)?.ok_or_else(|| self.err(key, ConfigErrorKind::MissingKey))
    }

    fn or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn positive(&self, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(key, ConfigErrorKind::Invalid("must be > 0".into())))
        }
    }

    fn non_negative(&self, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(self.err(key, ConfigErrorKind::Invalid("must be >= 0".into())))
        }
    }

    fn integer(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some((v, _)) => v
                .trim()
                .parse::<u64>()
                .map_err(|_| self.err(key, ConfigErrorKind::Invalid("must be a non-negative integer".into()))),
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = HashMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line_no),
                    key: line.to_string(),
                    kind: ConfigErrorKind::Syntax,
                });
            };
            let (k, v) = (k.trim(), v.trim());
            let fail = |kind| ConfigError {
                line: Some(line_no),
                key: k.to_string(),
                kind,
            };
            if !KEYS.contains(&k) {
                return Err(fail(ConfigErrorKind::UnknownKey));
            }
            if v.is_empty() {
                return Err(fail(ConfigErrorKind::Syntax));
            }
            if values.insert(k.to_string(), (v.to_string(), line_no)).is_some() {
                return Err(fail(ConfigErrorKind::DuplicateKey));
            }
        }
        Self::from_raw(&Raw { values })
    }

    fn from_raw(raw: &Raw) -> Result<Self, ConfigError> {
        let pole_pairs = raw.integer("pole_pairs", 0)?;
        if !raw.values.contains_key("pole_pairs") {
            return Err(raw.err("pole_pairs", ConfigErrorKind::MissingKey));
        }
        let params = MotorParams::new(
            raw.required("R")?,
            raw.required("Ld")?,
            raw.required("Lq")?,
            raw.required("psi_m")?,
            u32::try_from(pole_pairs)
                .map_err(|_| raw.err("pole_pairs", ConfigErrorKind::Invalid("too large".into())))?,
        )
        .map_err(|e| {
            let key = match &e {
                crate::Error::InvalidParameter { name, .. } => *name,
                _ => "R",
            };
            raw.err(key, ConfigErrorKind::Invalid(e.to_string()))
        })?;

        let omega_e = match (raw.num("speed_rpm")?, raw.num("omega_e")?) {
            (Some(_), Some(_)) => {
                return Err(raw.err(
                    "omega_e",
                    ConfigErrorKind::Invalid("give either speed_rpm or omega_e".into()),
                ))
            }
            (Some(rpm), None) => params.electrical_speed(rpm),
            (None, Some(w)) => w,
            (None, None) => return Err(raw.err("speed_rpm", ConfigErrorKind::MissingKey)),
        };

        let ramp = match raw.num("ramp_to_rpm")? {
            None => None,
            Some(rpm) => {
                let start = raw.non_negative("ramp_start", raw.or("ramp_start", 0.0)?)?;
                let dur = raw.positive("ramp_duration", raw.required("ramp_duration")?)?;
                Some((start, params.electrical_speed(rpm), dur))
            }
        };

        let current = CurrentReference {
            id: raw.or("id_ref", 0.0)?,
            iq: raw.or("iq_ref", 2.0)?,
            id_ripple_amp: raw.or("id_ripple_amp", 0.0)?,
            id_ripple_omega: 2.0 * PI * raw.non_negative("id_ripple_hz", raw.or("id_ripple_hz", 0.0)?)?,
        };

        let dt_truth = raw.positive("dt_truth", raw.or("dt_truth", 1e-5)?)?;
        let dt_sample = raw.positive("dt_sample", raw.required("dt_sample")?)?;
        let ratio = dt_sample / dt_truth;
        if ratio < 0.5 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(raw.err(
                "dt_sample",
                ConfigErrorKind::Invalid("must be an integer multiple of dt_truth".into()),
            ));
        }

        let observers = match raw.values.get("observer").map(|v| v.0.trim()) {
            None => vec![ObserverKind::Kre],
            Some("all") => ObserverKind::ALL.to_vec(),
            Some(list) => list
                .split(',')
                .map(|s| s.parse::<ObserverKind>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| raw.err("observer", ConfigErrorKind::Invalid(e)))?,
        };

        let hold_order = raw.integer("hold_order", 5)? as usize;
        if hold_order > crate::filters::MAX_HOLD_ORDER {
            return Err(raw.err(
                "hold_order",
                ConfigErrorKind::Invalid(format!("must be <= {}", crate::filters::MAX_HOLD_ORDER)),
            ));
        }
        let substeps = raw.integer("substeps", 4)? as usize;
        if substeps == 0 {
            return Err(raw.err("substeps", ConfigErrorKind::Invalid("must be >= 1".into())));
        }

        let default_window = if omega_e != 0.0 {
            2.0 * PI / omega_e.abs()
        } else {
            raw.or("duration", 0.0)?
        };

        let cfg = Self {
            omega_e,
            theta0: raw.or("theta0", 0.0)?,
            ramp,
            current,
            gamma: raw.positive("gamma", raw.required("gamma")?)?,
            a: raw.positive("a", raw.required("a")?)?,
            alpha: raw.positive("alpha", raw.required("alpha")?)?,
            eps: raw.positive("eps", raw.or("eps", 0.1 * params.psi_m())?)?,
            dt_truth,
            dt_sample,
            duration: raw.non_negative("duration", raw.required("duration")?)?,
            init_angle_offset: raw.or("init_angle_offset", 0.0)?,
            init_mag_scale: raw.or("init_mag_scale", 1.0)?,
            noise_i: raw.non_negative("noise_i", raw.or("noise_i", 0.0)?)?,
            noise_v: raw.non_negative("noise_v", raw.or("noise_v", 0.0)?)?,
            observers,
            seed: raw.integer("seed", 0)?,
            hold_order,
            substeps,
            delta_min: raw.non_negative("delta_min", raw.or("delta_min", 0.0)?)?,
            pe_window: raw.positive("pe_window", raw.or("pe_window", default_window)?)?,
            params,
        };
        Ok(cfg)
    }

    pub fn paper_sim() -> Self {
        Self::parse(PAPER_SIM_CFG).expect("bundled config parses")
    }

    pub fn salient() -> Self {
        Self::parse(SALIENT_CFG).expect("bundled config parses")
    }

    pub fn trajectory(&self) -> RotorTrajectory {
        match self.ramp {
            None => RotorTrajectory::constant(self.theta0, self.omega_e),
            Some((start, target, dur)) => {
                let mut segs = Vec::new();
                if start > 0.0 {
                    segs.push(Segment::Constant {
                        omega: self.omega_e,
                        duration: start,
                    });
                }
                segs.push(Segment::Ramp {
                    from: self.omega_e,
                    to: target,
                    duration: dur,
                });
                RotorTrajectory::new(self.theta0, segs).expect("validated segments")
            }
        }
    }

    /// `lambda_hat(0) = init_mag_scale psi_m c(theta(0) + init_angle_offset)`.
    pub fn initial_estimate(&self) -> Vec2 {
        unit(self.theta0 + self.init_angle_offset) * (self.init_mag_scale * self.params.psi_m())
    }

    /// Number of samples after `t = 0`.
    pub fn sample_count(&self) -> usize {
        (self.duration / self.dt_sample).round() as usize
    }

    pub fn truth_substeps(&self) -> usize {
        (self.dt_sample / self.dt_truth).round() as usize
    }

    pub fn observer_settings(&self) -> ObserverSettings {
        ObserverSettings {
            gamma: self.gamma,
            a: self.a,
            eps: self.eps,
            alpha: self.alpha,
            dt: self.dt_sample,
            hold_order: self.hold_order,
            substeps: self.substeps,
            drop_qe: false,
        }
    }

    /// Copy with one tuning parameter replaced (`gamma`, `a` or `alpha`).
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, ConfigError> {
        let mut c = self.clone();
        let bad = |kind| ConfigError {
            line: None,
            key: name.to_string(),
            kind,
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(bad(ConfigErrorKind::Invalid("must be finite and > 0".into())));
        }
        match name {
            "gamma" => c.gamma = value,
            "a" => c.a = value,
            "alpha" => c.alpha = value,
            _ => return Err(bad(ConfigErrorKind::UnknownKey)),
        }
        Ok(c)
    }
}

impl std::str::FromStr for ScenarioConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}
