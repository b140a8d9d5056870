//! Command-line front end: configuration, result tables and subcommands.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::engine::{run_experiment, PointSummary, Policy, Sweep, SweepAxis};
use crate::error::{Error, Result};

mod config;
pub mod validate;

pub use config::{config_hash, parse_config, preset, preset_names, ExperimentSpec, SAMPLE_EDGELIST};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// One output line. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    /// Swept axis name, `none` for a single point.
    pub axis: String,
    pub axis_value: Option<f64>,
    pub policy: String,
    pub n_users: usize,
    pub n_channels: usize,
    /// Empty for trace-based social graphs.
    pub p_link: Option<f64>,
    pub delta: f64,
    pub beta: f64,
    pub mean_throughput: f64,
    pub std_error: f64,
    pub mean_iterations: Option<f64>,
    pub contraction_modulus: f64,
    pub fixed_point_residual: Option<f64>,
    pub replications: usize,
    pub seed: u64,
    pub config_hash: String,
}

pub const CSV_HEADER: &str = "experiment_id,axis,axis_value,policy,n_users,n_channels,p_link,delta,beta,mean_throughput,std_error,mean_iterations,contraction_modulus,fixed_point_residual,replications,seed,config_hash";

impl ResultRow {
    pub fn from_point(spec: &ExperimentSpec, sweep: Option<&Sweep>, p: &PointSummary) -> Self {
        let c = &p.config;
        Self {
            experiment_id: spec.id.clone(),
            axis: sweep.map_or("none", |s| s.axis.name()).to_string(),
            axis_value: p.axis_value,
            policy: p.policy.name().to_string(),
            n_users: c.n_users,
            n_channels: c.n_channels,
            p_link: match c.social {
                crate::engine::SocialGraphSpec::ErdosRenyi { p_link } => Some(p_link),
                crate::engine::SocialGraphSpec::Trace { .. } => None,
            },
            delta: c.delta,
            beta: c.learner.beta,
            mean_throughput: p.mean_throughput,
            std_error: p.std_error,
            mean_iterations: p.mean_iterations,
            contraction_modulus: p.contraction_modulus,
            fixed_point_residual: p.fixed_point_residual,
            replications: p.replications.len(),
            seed: c.seed,
            config_hash: spec.config_hash.clone(),
        }
    }
}

/// Header plus rows as CSV text.
pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Consistency(format!("csv serialization: {e}")))?;
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::Consistency(format!("csv serialization: {e}")))?;
    let mut out = String::with_capacity(body.len() + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    out.push_str(std::str::from_utf8(&body).expect("csv output is UTF-8"));
    Ok(out)
}

/// Parses text produced by [`rows_to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| Error::Parse { line: 1, reason: e.to_string() })?;
    let header: Vec<&str> = header.iter().collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            reason: "unexpected header".into(),
        });
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                line: i + 2,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Writes `contents` to `path` through a sibling temporary file, so a failed
/// run never leaves a partial output behind.
pub fn write_atomically(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path.display().to_string(), std::io::ErrorKind::InvalidInput.into()))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path.display().to_string(), e)
    })
}

/// Loads a config from a preset name or a file path.
pub fn load_spec(config: &str) -> Result<ExperimentSpec> {
    if let Some(src) = preset(config) {
        return parse_config(src, None);
    }
    let path = PathBuf::from(config);
    let src = std::fs::read_to_string(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::config(
                "--config",
                format!("{config}: no such file or preset (presets: {})", preset_names().join(", ")),
            )
        } else {
            Error::io(config, e)
        }
    })?;
    parse_config(&src, path.parent())
}

/// Grid used by the p_rec exhaustive search.
pub fn p_rec_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Runs an experiment and returns the CSV text plus one summary line per row.
pub fn run_to_csv(spec: &ExperimentSpec) -> Result<(String, Vec<String>)> {
    let points = run_experiment(&spec.base, &spec.policies, spec.sweep.as_ref())?;
    let rows: Vec<ResultRow> = points
        .iter()
        .map(|p| ResultRow::from_point(spec, spec.sweep.as_ref(), p))
        .collect();
    let lines = rows
        .iter()
        .map(|r| {
            let at = r.axis_value.map_or(String::new(), |v| format!("{}={v} ", r.axis));
            let iters = r
                .mean_iterations
                .map_or(String::new(), |v| format!(", {v:.1} solver iterations/slot"));
            format!(
                "{at}{}: {:.3} +/- {:.3} Mbps over {} replications{iters}",
                r.policy, r.mean_throughput, r.std_error, r.replications
            )
        })
        .collect();
    Ok((rows_to_csv(&rows)?, lines))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Consistency(_) => EXIT_VALIDATION,
        _ => EXIT_CONFIG,
    }
}

pub fn cmd_run(config: &str, out: &Path, sweep_override: Option<&str>) -> i32 {
    let result = (|| {
        let mut spec = load_spec(config)?;
        if let Some(axis) = sweep_override {
            let parsed = SweepAxis::parse(axis)
                .ok_or_else(|| Error::config("--sweep", format!("unknown axis {axis:?}")))?;
            let values = match parsed {
                SweepAxis::PRec => p_rec_grid(),
                _ => {
                    return Err(Error::config(
                        "--sweep",
                        "only p_rec has a built-in grid; sweep other axes in [run.sweep]",
                    ))
                }
            };
            spec.sweep = Some(Sweep { axis: parsed, values });
            spec.policies = vec![Policy::StaticRec];
            spec.config_hash = config_hash(&format!("{}\n--sweep {axis}", spec.config_hash));
        }
        let (csv, lines) = run_to_csv(&spec)?;
        write_atomically(out, &csv)?;
        Ok(lines)
    })();
    match result {
        Ok(lines) => {
            lines.iter().for_each(|l| println!("{l}"));
            println!("wrote {}", out.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn cmd_validate(suite: &str, seed: u64) -> i32 {
    let sizes = validate::SuiteSizes::default();
    let names: Vec<&str> = if suite == "all" {
        validate::SUITES.to_vec()
    } else {
        vec![suite]
    };
    let mut code = EXIT_OK;
    for name in names {
        let Some(report) = validate::run_suite(name, &sizes, seed) else {
            eprintln!(
                "error: unknown suite {name:?}; valid suites: {}, all",
                validate::SUITES.join(", ")
            );
            return EXIT_CONFIG;
        };
        for l in &report.lines {
            println!("[{name}] {l}");
        }
        println!(
            "[{name}] {}: {} passed, {} failed",
            if report.ok() { "PASS" } else { "FAIL" },
            report.passed,
            report.failed
        );
        if !report.ok() {
            code = EXIT_VALIDATION;
        }
    }
    code
}

#[derive(Debug, Parser)]
#[command(name = "srdsa", version, about = "Recommendation-aided spectrum access simulator")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write its result table as CSV.
    Run {
        /// Config file path or preset name.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
        /// Replace the configured sweep with a built-in grid (p_rec only).
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Run an oracle or invariant suite (or `all`).
    Validate {
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print a preset's configuration text.
    Preset { name: Option<String> },
}

pub fn main_with(args: Args) -> i32 {
    match args.command {
        Command::Run { config, out, sweep } => cmd_run(&config, &out, sweep.as_deref()),
        Command::Validate { suite, seed } => cmd_validate(&suite, seed),
        Command::Preset { name: None } => {
            preset_names().iter().for_each(|n| println!("{n}"));
            EXIT_OK
        }
        Command::Preset { name: Some(n) } => match preset(&n) {
            Some(src) => {
                print!("{src}");
                EXIT_OK
            }
            None => {
                eprintln!("error: unknown preset {n:?}; presets: {}", preset_names().join(", "));
                EXIT_CONFIG
            }
        },
    }
}
