//! Command-line front end.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage or config error,
//! 3 numerical fault.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ipmsm_observer::config::parse_number;
use ipmsm_observer::harness::{self, RunLog, VerifyOptions};
use ipmsm_observer::{Error, ObserverKind, ScenarioConfig};

#[derive(Parser)]
#[command(name = "ipmsm-obs", version, about = "Active-flux observer simulator and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured observers and write CSV logs and metrics.json.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the observer selection (kre, grad_aut, grad_tie, all).
        #[arg(long)]
        observer: Option<String>,
    },
    /// Run several observers on one measurement stream and print a table.
    Compare {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "kre,grad_aut,grad_tie")]
        observers: Vec<ObserverKind>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suite and print a JSON verdict.
    Verify {
        config: PathBuf,
        #[arg(long)]
        break_omega1: bool,
        #[arg(long)]
        drop_qe: bool,
    },
    /// Report the persistency-of-excitation index of the regressor.
    Pe { config: PathBuf },
    /// Sweep one tuning parameter.
    Sweep {
        config: PathBuf,
        #[arg(long, value_parser = ["gamma", "a", "alpha"])]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true, value_parser = parse_value)]
        values: Vec<f64>,
    },
}

fn parse_value(s: &str) -> Result<f64, String> {
    parse_number(s).ok_or_else(|| format!("`{s}` is not a number"))
}

enum Failure {
    Checks,
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter { .. } => Failure::Usage(e.to_string()),
            other => Failure::Numeric(other.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_logs(out: &Path, logs: &[RunLog]) -> Result<(), Failure> {
    for log in logs {
        harness::write_run(out, log)
            .map_err(|e| Failure::Usage(format!("cannot write to {}: {e}", out.display())))?;
    }
    Ok(())
}

fn check_faults(logs: &[RunLog]) -> Result<(), Failure> {
    match logs.iter().find_map(|l| l.fault.as_ref().map(|f| (l.kind, f))) {
        Some((kind, f)) => Err(Failure::Numeric(format!("{kind}: {f} (partial log written)"))),
        None => Ok(()),
    }
}

fn print_table(logs: &[RunLog]) {
    println!(
        "{:<9} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "observer", "settle_x[s]", "settle_th[s]", "rate[1/s]", "steady|x~|", "final|x~|"
    );
    let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4e}"));
    for l in logs {
        let s = &l.summary;
        println!(
            "{:<9} {:>12} {:>12} {:>12} {:>12} {:>12}",
            s.observer,
            f(s.settling_flux),
            f(s.settling_angle),
            f(s.rate.map(|r| r.rate)),
            f(s.steady_state_flux),
            f(s.final_flux_error)
        );
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            observer,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = observer {
                cfg.observers = if o == "all" {
                    ObserverKind::ALL.to_vec()
                } else {
                    vec![o.parse().map_err(Failure::Usage)?]
                };
            }
            let logs = harness::run_scenario(&cfg)?;
            write_logs(&out, &logs)?;
            print_table(&logs);
            check_faults(&logs)
        }
        Command::Compare {
            config,
            observers,
            out,
        } => {
            let cfg = load(&config)?;
            let logs = harness::compare_observers(&cfg, &observers)?;
            if let Some(out) = out {
                write_logs(&out, &logs)?;
            }
            print_table(&logs);
            check_faults(&logs)
        }
        Command::Verify {
            config,
            break_omega1,
            drop_qe,
        } => {
            let cfg = load(&config)?;
            let report = harness::verify(&cfg, VerifyOptions { break_omega1, drop_qe })?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serialisable"));
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAILED {}: {}", c.name, c.detail);
            }
            if report.passed {
                Ok(())
            } else {
                Err(Failure::Checks)
            }
        }
        Command::Pe { config } => {
            let cfg = load(&config)?;
            let rep = harness::pe_report(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&rep).expect("serialisable"));
            Ok(())
        }
        Command::Sweep {
            config,
            param,
            values,
        } => {
            let cfg = load(&config)?;
            let entries = harness::sweep(&cfg, &param, &values).map_err(|e| match e {
                Error::Config(c) => Failure::Usage(c.to_string()),
                other => other.into(),
            })?;
            println!("{}", serde_json::to_string_pretty(&entries).expect("serialisable"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numerical fault: {msg}");
            ExitCode::from(3)
        }
    }
}
