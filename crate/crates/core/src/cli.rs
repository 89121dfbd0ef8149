//! Batch front-end behind the `dacgrid` binary.
//!
//! ```text
//! dacgrid validate <scenario>
//! dacgrid run      <scenario> --out DIR [--dac on|off] [--dt S] [--t-end S]
//! dacgrid sweep    <scenario> --param gfm1.s_inv --values 40:100:5 --out DIR
//! ```
//!
//! `<scenario>` is a JSON file, or `bundled:<name>` for a shipped case.
//!
//! Exit codes: 0 success, 2 validation error, 3 collapse, 4 I/O error,
//! 1 anything else.
//!
//! `run` writes `trace.csv`, `metrics.json` and `manifest.json`; `sweep`
//! writes `sweep.csv` and `manifest.json`. Nothing is written unless the
//! simulation finished.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::engine::sweep::{size_sweep, sweep_csv};
use crate::engine::{run_scenario, EngineError};
use crate::scenario::{bundled, parse_and_validate, ScenarioDoc, ValidationErrors};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_COLLAPSE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dacgrid", version, about = "Microgrid frequency simulator with set-point safety controllers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, clap::Args)]
pub struct Overrides {
    /// Step size override, s.
    #[arg(long)]
    pub dt: Option<f64>,
    /// End time override, s.
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario and report every problem found.
    Validate { scenario: String },
    /// Simulate one scenario.
    Run {
        scenario: String,
        /// Force the safety controller on or off; default is the scenario's setting.
        #[arg(long, value_enum)]
        dac: Option<Switch>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a parameter sweep with the controller on and off.
    Sweep {
        scenario: String,
        /// `<device>.<field>` or `<section>.<field>`, e.g. `gfm1.s_inv` or `dac.alpha`.
        #[arg(long)]
        param: String,
        /// Comma list (`40,60,80`) or inclusive range `start:stop:step`.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Run {
            scenario,
            dac,
            out,
            overrides,
        } => cmd_run(&scenario, dac, &out, &overrides),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
            overrides,
        } => cmd_sweep(&scenario, &param, &values, &out, &overrides),
    }
}

enum LoadError {
    Io(String),
    Invalid(ValidationErrors),
}

fn read_source(spec: &str) -> Result<String, LoadError> {
    if let Some(name) = spec.strip_prefix("bundled:") {
        return bundled(name)
            .map(str::to_string)
            .ok_or_else(|| LoadError::Io(format!("no bundled scenario named `{name}`")));
    }
    fs::read_to_string(spec).map_err(|e| LoadError::Io(format!("{spec}: {e}")))
}

fn load(spec: &str, overrides: &Overrides) -> Result<(ScenarioDoc, Vec<String>), LoadError> {
    let text = read_source(spec)?;
    let mut v = parse_and_validate(&text).map_err(LoadError::Invalid)?;
    if overrides.dt.is_some() || overrides.t_end.is_some() {
        if let Some(dt) = overrides.dt {
            v.doc.sim.dt = dt;
        }
        if let Some(t) = overrides.t_end {
            v.doc.sim.t_end = t;
        }
        v.warnings = v.doc.validate().map_err(LoadError::Invalid)?;
    }
    Ok((v.doc, v.warnings))
}

fn report_load_error(e: LoadError) -> i32 {
    match e {
        LoadError::Io(msg) => {
            eprintln!("error: {msg}");
            EXIT_IO
        }
        LoadError::Invalid(errs) => {
            eprintln!("error: {errs}");
            EXIT_VALIDATION
        }
    }
}

fn engine_exit(e: EngineError) -> i32 {
    eprintln!("error: {e}");
    match e {
        EngineError::Invalid(_) => EXIT_VALIDATION,
        _ => EXIT_FAILURE,
    }
}

fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<(), i32> {
    fs::create_dir_all(dir).map_err(|e| {
        eprintln!("error: {}: {e}", dir.display());
        EXIT_IO
    })?;
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| {
            eprintln!("error: {}: {e}", path.display());
            EXIT_IO
        })?;
    }
    Ok(())
}

pub fn cmd_validate(spec: &str) -> i32 {
    match load(spec, &Overrides { dt: None, t_end: None }) {
        Ok((doc, warnings)) => {
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            println!("ok: {} ({} devices, {} events)", spec, doc.devices.len(), doc.events.len());
            EXIT_OK
        }
        Err(e) => report_load_error(e),
    }
}

pub fn cmd_run(spec: &str, dac: Option<Switch>, out: &Path, overrides: &Overrides) -> i32 {
    let (mut doc, warnings) = match load(spec, overrides) {
        Ok(v) => v,
        Err(e) => return report_load_error(e),
    };
    if let Some(s) = dac {
        doc.dac.enabled = s == Switch::On;
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let run = match run_scenario(&doc) {
        Ok(r) => r,
        Err(e) => return engine_exit(e),
    };
    let metrics = json!({
        "violation_time": run.metrics.violation_time,
        "nadir": run.metrics.nadir,
        "peak": run.metrics.peak,
        "safe_band_occupancy": run.metrics.safe_band_occupancy,
        "settled_frequency": run.metrics.settled_frequency,
        "collapsed": run.metrics.collapsed,
        "collapses": run.collapses,
        "trips": run.trips,
    });
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": "run",
        "source": spec,
        "dac_enabled": doc.dac.enabled,
        "thresholds": doc.thresholds(),
        "warnings": warnings,
        "scenario": doc,
    });
    let files = [
        ("trace.csv", run.trace.to_csv_string()),
        ("metrics.json", pretty(&metrics)),
        ("manifest.json", pretty(&manifest)),
    ];
    if let Err(code) = write_outputs(out, &files) {
        return code;
    }
    let m = &run.metrics;
    println!(
        "violation_time={} nadir={:.4} peak={:.4} occupancy={:.4} settled={:.4} collapsed={}",
        m.violation_time, m.nadir, m.peak, m.safe_band_occupancy, m.settled_frequency, m.collapsed
    );
    if m.collapsed {
        EXIT_COLLAPSE
    } else {
        EXIT_OK
    }
}

pub fn cmd_sweep(spec: &str, param: &str, values: &str, out: &Path, overrides: &Overrides) -> i32 {
    let values = match parse_values(values) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: --values: {msg}");
            return EXIT_VALIDATION;
        }
    };
    let (doc, warnings) = match load(spec, overrides) {
        Ok(v) => v,
        Err(e) => return report_load_error(e),
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let rows = match size_sweep(&doc, param, &values) {
        Ok(r) => r,
        Err(crate::engine::sweep::SweepError::Param(e)) => {
            eprintln!("error: --param: {e}");
            return EXIT_VALIDATION;
        }
        Err(crate::engine::sweep::SweepError::Run { source, .. }) => return engine_exit(source),
    };
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": "sweep",
        "source": spec,
        "param": param,
        "values": values,
        "scenario": doc,
    });
    let table = sweep_csv(&rows);
    if let Err(code) = write_outputs(out, &[("sweep.csv", table.clone()), ("manifest.json", pretty(&manifest))]) {
        return code;
    }
    print!("{table}");
    EXIT_OK
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

/// `40,45,50` or the inclusive range `40:100:5`.
pub fn parse_values(text: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{s}` is not a finite number"))
    };
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            return Err("range form is start:stop:step".into());
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || b < a {
            return Err("range needs start ≤ stop and a positive step".into());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| a + i as f64 * step).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err("no values".into());
    }
    Ok(values)
}
