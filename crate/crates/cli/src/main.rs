//! `homdip`: delay scans, dip fits and closed-form visibilities from the
//! command line. Failures print `{"error": {"kind", "message"}}` on stderr
//! and exit nonzero.

mod config;
mod io;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{SecondsFormat, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use homdip::analysis::{fit_points, subtract_floor, DipFit, FitError, FitOptions};
use homdip::runner::{
    analytic_visibility_fivefold_max, analytic_visibility_threefold, dip_curve_analytic, dip_curve_mc, DipCurve,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ConfigFile;

#[derive(Parser)]
#[command(name = "homdip", version, about = "Two-source Hong-Ou-Mandel dip simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form three-fold and maximal five-fold visibilities.
    Analytic {
        /// Pair probability per pulse and source, in [0, 0.2].
        #[arg(long = "p", short = 'p', allow_negative_numbers = true)]
        p: f64,
        /// Mode overlap |m|² scaling both visibilities.
        #[arg(long, allow_negative_numbers = true)]
        m2: Option<f64>,
    },
    /// Simulate a delay scan, fit the dip and write the results to a directory.
    Scan {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Analytic)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's Monte Carlo seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the dip model to a `delay_um,rate_hz,err_hz` CSV.
    Fit { csv: PathBuf },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Analytic,
    Mc,
}

#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new("io", format!("{}: {err}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        if self.kind == "usage" {
            2
        } else {
            1
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(Failure::new("usage", e.to_string().trim_end())),
    };
    let result = match cli.command {
        Command::Analytic { p, m2 } => cmd_analytic(p, m2),
        Command::Scan { config, mode, out, seed } => cmd_scan(&config, mode, &out, seed),
        Command::Fit { csv } => cmd_fit(&csv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(failure: Failure) -> ExitCode {
    let body = serde_json::json!({ "error": { "kind": failure.kind, "message": failure.message } });
    eprintln!("{body}");
    ExitCode::from(failure.exit_code())
}

fn cmd_analytic(p: f64, m2: Option<f64>) -> Result<(), Failure> {
    let v_max = analytic_visibility_fivefold_max(p).map_err(|e| Failure::new("input", e.to_string()))?;
    let q = m2.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&q) {
        return Err(Failure::new("input", format!("m2 must lie in [0, 1], got {q}")));
    }
    let mut line = format!(
        "{{\"P\": {p}, \"V_threefold\": {:.6}, \"V_fivefold_max\": {:.6}",
        q * analytic_visibility_threefold(),
        q * v_max
    );
    if m2.is_some() {
        line.push_str(&format!(", \"m2\": {q}"));
    }
    line.push('}');
    println!("{line}");
    Ok(())
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    config_path: String,
    config_sha256: String,
    mode: Mode,
    scheme: homdip::detect::SchemeKind,
    seed: u64,
    pulses_per_point: Option<u64>,
    started_utc: String,
    finished_utc: String,
    coherence_length_um: f64,
    accidental_hz: f64,
    truncated_pulses: u64,
    outputs: Vec<String>,
}

fn cmd_scan(config_path: &Path, mode: Mode, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let started = now();
    let bytes = fs::read(config_path).map_err(|e| Failure::io(config_path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Failure::new("config", "config is not UTF-8"))?;
    let file = ConfigFile::parse(&text).map_err(|m| Failure::new("config", m))?;
    let mut cfg = file.to_experiment().map_err(|m| Failure::new("config", m))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }

    let curve = match mode {
        Mode::Analytic => dip_curve_analytic(&cfg),
        Mode::Mc => dip_curve_mc(&cfg),
    }
    .map_err(|e| Failure::new("simulation", e.to_string()))?;
    let accidental = curve.accidental_hz();
    let net = subtract_floor(&curve, accidental);
    let fit_raw = fit_or_report(&curve)?;
    let fit_net = fit_or_report(&net)?;

    fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let meta = curve.metadata.clone().expect("runner attaches metadata");
    let mut outputs = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<(), Failure> {
        let path = out.join(name);
        io::write_atomic(&path, &bytes).map_err(|e| Failure::io(&path, e))?;
        outputs.push(name.to_string());
        Ok(())
    };
    emit("curve.csv", io::curve_csv(&curve.points))?;
    emit("curve_net.csv", io::curve_csv(&net.points))?;
    emit("fit.json", fit_json(&fit_net))?;
    emit("fit_raw.json", fit_json(&fit_raw))?;

    let manifest = Manifest {
        tool: "homdip",
        version: env!("CARGO_PKG_VERSION"),
        config_path: config_path.display().to_string(),
        config_sha256: hex::encode(Sha256::digest(&bytes)),
        mode,
        scheme: meta.scheme,
        seed: cfg.seed,
        pulses_per_point: (mode == Mode::Mc).then_some(cfg.pulses_per_point),
        started_utc: started,
        finished_utc: now(),
        coherence_length_um: meta.coherence_length_um,
        accidental_hz: accidental,
        truncated_pulses: meta.truncated_pulses,
        outputs: outputs.iter().cloned().chain(["manifest.json".to_string()]).collect(),
    };
    let mut manifest_json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    manifest_json.push(b'\n');
    let path = out.join("manifest.json");
    io::write_atomic(&path, &manifest_json).map_err(|e| Failure::io(&path, e))?;

    println!("{}", String::from_utf8(fit_json(&fit_net)).expect("utf-8").trim_end());
    Ok(())
}

fn cmd_fit(csv: &Path) -> Result<(), Failure> {
    let points = io::read_curve_csv(csv).map_err(|m| Failure::new("csv", m))?;
    let fit = fit_or_report(&DipCurve::from_points(points))?;
    print!("{}", String::from_utf8(fit_json(&fit)).expect("utf-8"));
    Ok(())
}

/// A fit that ran out of iterations is still reported, flagged
/// `converged: false`; every other fit error is fatal.
fn fit_or_report(curve: &DipCurve) -> Result<DipFit, Failure> {
    let fit = match fit_points(&curve.points, None, FitOptions::default()) {
        Ok(fit) => fit,
        Err(FitError::NotConverged(fit)) => *fit,
        Err(e) => return Err(Failure::new("fit", e.to_string())),
    };
    if let Some(w) = &fit.warning {
        eprintln!("warning: {w}");
    }
    Ok(fit)
}

fn fit_json(fit: &DipFit) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(&fit.report()).expect("fit serializes");
    bytes.push(b'\n');
    bytes
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}
