//! Command-line runner for the verification suites.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails (the failing
//! names go to stderr), 2 for configuration or I/O errors.

use clap::{Parser, ValueEnum};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use turnpoint::config::ExperimentConfig;
use turnpoint::suites::{run_suite, Check, Suite};
use turnpoint::{Error, Result};

const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Command {
    AirySelftest,
    Geometry,
    Coeffs,
    Residual,
    ExactCompare,
    Matching,
    Parametrix,
    All,
}

impl Command {
    fn suites(self) -> Vec<Suite> {
        match self {
            Command::AirySelftest => vec![Suite::AirySelftest],
            Command::Geometry => vec![Suite::Geometry],
            Command::Coeffs => vec![Suite::Coeffs],
            Command::Residual => vec![Suite::Residual],
            Command::ExactCompare => vec![Suite::ExactCompare],
            Command::Matching => vec![Suite::Matching],
            Command::Parametrix => vec![Suite::Parametrix],
            Command::All => Suite::ALL.to_vec(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "turnpoint", version, about = "Run the turning-point verification suites")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Config file (flat key = value); may also be given with --config
    config_file: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.json and the CSV files
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    h_min: Option<f64>,
    #[arg(long)]
    h_max: Option<f64>,
    #[arg(long)]
    h_count: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Serialize)]
struct RunReport<'a> {
    tool: &'static str,
    version: &'static str,
    command: String,
    config: &'a ExperimentConfig,
    config_echo: String,
    pass: bool,
    failed: Vec<String>,
    checks: Vec<Check>,
    artifacts: Vec<String>,
    data: BTreeMap<String, serde_json::Map<String, serde_json::Value>>,
    /// Seconds per suite and in total; the only field that changes between
    /// identical runs.
    wall_clock: BTreeMap<String, f64>,
}

fn load_config(args: &Args) -> Result<ExperimentConfig> {
    let path = match (&args.config, &args.config_file) {
        (Some(_), Some(_)) => return Err(Error::Config("config given both as --config and positionally".into())),
        (Some(p), None) | (None, Some(p)) => Some(p),
        (None, None) => None,
    };
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io { path: p.display().to_string(), message: e.to_string() })?;
            ExperimentConfig::from_text(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(v) = args.h_min {
        cfg.h.min = v;
    }
    if let Some(v) = args.h_max {
        cfg.h.max = v;
    }
    if let Some(v) = args.h_count {
        cfg.h.count = v;
    }
    if let Some(v) = args.order {
        cfg.order = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Write to a sibling temporary file, then rename over the target.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let io = |p: &Path, e: std::io::Error| Error::Io { path: p.display().to_string(), message: e.to_string() };
    fs::write(&tmp, contents).map_err(|e| io(&tmp, e))?;
    fs::rename(&tmp, &target).map_err(|e| io(&target, e))
}

fn run(args: &Args) -> Result<bool> {
    let cfg = load_config(args)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::Io { path: args.out.display().to_string(), message: e.to_string() })?;
    let start = Instant::now();
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();
    let mut data = BTreeMap::new();
    let mut wall_clock = BTreeMap::new();
    for suite in args.command.suites() {
        let t = Instant::now();
        let out = run_suite(suite, &cfg);
        wall_clock.insert(suite.name().to_string(), t.elapsed().as_secs_f64());
        if let Some(table) = &out.table {
            print!("{table}");
        }
        for (name, contents) in &out.csv {
            write_atomic(&args.out, name, contents)?;
            artifacts.push(name.clone());
        }
        for c in &out.checks {
            println!("{} {:<34} value={:<12} {} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into()), c.tolerance, c.detail);
        }
        checks.extend(out.checks);
        data.insert(suite.name().to_string(), out.data);
    }
    wall_clock.insert("total".into(), start.elapsed().as_secs_f64());
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    artifacts.push("config.cfg".into());
    write_atomic(&args.out, "config.cfg", &cfg.echo())?;
    let report = RunReport {
        tool: env!("CARGO_PKG_NAME"),
        version: VERSION,
        command: args.command.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default(),
        config: &cfg,
        config_echo: cfg.echo(),
        pass: failed.is_empty(),
        failed: failed.clone(),
        checks,
        artifacts,
        data,
        wall_clock,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Io { path: "report.json".into(), message: e.to_string() })?;
    write_atomic(&args.out, "report.json", &json)?;
    if !failed.is_empty() {
        eprintln!("failing checks: {}", failed.join(", "));
    }
    Ok(failed.is_empty())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
