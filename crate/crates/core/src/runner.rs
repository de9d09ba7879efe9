//! Writing experiment outputs to disk, replaying metrics from them and the
//! α × {stock, adaptive} comparison grid.
//!
//! A run directory holds `log.csv`, `gains.csv`, `metrics.txt`,
//! `mission.txt` and `manifest.txt`. Everything needed to recompute the
//! metrics is in the first two files plus the mission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::{compute_metrics, run_experiment, ExperimentConfig, ExperimentOutput, MetricsReport};
use crate::log::{read_gains, read_log, write_gains, write_log, write_text, FlightLog};
use crate::math::Vec3;
use crate::mission::MissionPlan;

pub const LOG_FILE: &str = "log.csv";
pub const GAINS_FILE: &str = "gains.csv";
pub const METRICS_FILE: &str = "metrics.txt";
pub const MISSION_FILE: &str = "mission.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SUMMARY_FILE: &str = "summary.csv";
/// Long-format time series of every grid run, one value per line.
pub const SERIES_FILE: &str = "series_long.csv";

/// Detuning factors of the comparison grid.
pub const GRID_ALPHAS: [f64; 3] = [1.0, 0.5, 0.3];

/// Physics samples between rows of the long-format series file.
const SERIES_STRIDE: usize = 25;

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub id: String,
    /// `key = value` lines describing the configuration.
    pub config: String,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    /// Wall-clock time spent simulating and writing, s.
    pub runtime: f64,
    pub abort_reason: Option<String>,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "id = {}", self.id).unwrap();
        writeln!(out, "version = {}", self.version).unwrap();
        writeln!(out, "runtime_s = {:.3}", self.runtime).unwrap();
        if let Some(reason) = &self.abort_reason {
            writeln!(out, "abort_reason = {reason}").unwrap();
        }
        for p in &self.outputs {
            writeln!(out, "output = {}", p.display()).unwrap();
        }
        out.push_str(&self.config);
        out
    }
}

/// Echo of everything that determines a run, as `key = value` lines.
pub fn config_echo(config: &ExperimentConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
    kv("alpha_p", format!("{:?}", config.alpha_p));
    kv("mode", config.mode_name().to_string());
    kv("dt", format!("{:?}", config.dt));
    kv("duration", format!("{:?}", config.duration));
    kv("seed", config.seed.to_string());
    kv("jitter", format!("{:?}", config.jitter));
    kv("attitude_mode", config.attitude_mode.to_string());
    if config.adaptive {
        let rcac = &config.rcac;
        kv("loops", rcac.enabled.to_string());
        for (name, c) in [("r", &rcac.r), ("v", &rcac.v), ("q", &rcac.q), ("omega", &rcac.omega)] {
            kv(&format!("p0_{name}"), format!("{:?}", c.p0));
            let sigma: Vec<String> = c.sigma.iter().map(|s| format!("{s:?}")).collect();
            kv(&format!("sigma_{name}"), sigma.join(","));
            let masked: Vec<String> = c
                .mask
                .iter()
                .enumerate()
                .filter(|(_, m)| **m)
                .map(|(i, _)| i.to_string())
                .collect();
            if !masked.is_empty() {
                kv(&format!("masked_{name}"), masked.join(","));
            }
        }
        kv(
            "gamma_bound",
            config.rcac.gamma_bound.map_or("none".into(), |g| format!("{g:?}")),
        );
    }
    out.push_str("# gains before detuning\n");
    out.push_str(&config.gains.to_file_string());
    out
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes the files of one finished run into `dir`.
pub fn write_run(
    dir: &Path,
    id: &str,
    config: &ExperimentConfig,
    plan: &MissionPlan,
    output: &ExperimentOutput,
    started: Instant,
) -> Result<RunManifest> {
    create_dir(dir)?;
    let files = [LOG_FILE, GAINS_FILE, METRICS_FILE, MISSION_FILE];
    write_log(&dir.join(LOG_FILE), &output.log.rows)?;
    write_gains(&dir.join(GAINS_FILE), &output.log.gains)?;
    write_text(&dir.join(METRICS_FILE), &output.metrics.to_text())?;
    write_text(&dir.join(MISSION_FILE), &plan.to_file_string())?;
    let mut outputs: Vec<PathBuf> = files.iter().map(|f| dir.join(f)).collect();
    outputs.push(dir.join(MANIFEST_FILE));
    let manifest = RunManifest {
        id: id.to_string(),
        config: config_echo(config),
        outputs,
        version: env!("CARGO_PKG_VERSION").to_string(),
        runtime: started.elapsed().as_secs_f64(),
        abort_reason: output.abort_reason.clone(),
    };
    write_text(&dir.join(MANIFEST_FILE), &manifest.to_text())?;
    Ok(manifest)
}

/// Runs one experiment and writes its outputs to `dir`.
pub fn run_to_dir(
    config: &ExperimentConfig,
    plan: &MissionPlan,
    dir: &Path,
    id: &str,
) -> Result<(ExperimentOutput, RunManifest)> {
    let started = Instant::now();
    let output = run_experiment(config, plan)?;
    let manifest = write_run(dir, id, config, plan, &output, started)?;
    Ok((output, manifest))
}

/// Recomputes the metrics of a run from its `log.csv`, reading `gains.csv`
/// and `mission.txt` from the same directory.
pub fn replay_metrics(log_path: &Path) -> Result<MetricsReport> {
    let dir = log_path.parent().unwrap_or(Path::new("."));
    let rows = read_log(log_path)?;
    let gains = read_gains(&dir.join(GAINS_FILE))?;
    let mission_path = dir.join(MISSION_FILE);
    let text = std::fs::read_to_string(&mission_path).map_err(|source| Error::Io {
        path: mission_path.clone(),
        source,
    })?;
    let plan = MissionPlan::parse(&text)?;
    compute_metrics(&FlightLog { rows, gains }, &plan)
}

/// Directory name of one grid cell, e.g. `alpha0.3_adaptive`.
pub fn grid_id(alpha_p: f64, adaptive: bool) -> String {
    format!("alpha{alpha_p}_{}", if adaptive { "adaptive" } else { "stock" })
}

#[derive(Clone, Debug)]
pub struct GridRow {
    pub id: String,
    pub alpha_p: f64,
    pub adaptive: bool,
    /// Absent only when the run could not be started or written.
    pub metrics: Option<MetricsReport>,
    pub abort_reason: Option<String>,
    pub error: Option<String>,
}

impl GridRow {
    pub fn failed(&self) -> bool {
        self.error.is_some() || self.abort_reason.is_some()
    }
}

fn series_rows(id: &str, alpha_p: f64, mode: &str, log: &FlightLog, out: &mut csv::Writer<Vec<u8>>) -> Result<()> {
    let norm = |s: &[f64]| s.iter().map(|x| x * x).sum::<f64>().sqrt();
    for (row, gains) in log.rows.iter().zip(&log.gains).step_by(SERIES_STRIDE) {
        let err: Vec3 = row.r_sp - row.r;
        let th = &gains.theta;
        let values = [
            ("position_error", err.norm()),
            ("theta_norm_r", norm(&th[0..3])),
            ("theta_norm_v", norm(&th[3..12])),
            ("theta_norm_q", norm(&th[12..15])),
            ("theta_norm_omega", norm(&th[15..27])),
        ];
        for (name, v) in values {
            out.write_record([id, &alpha_p.to_string(), mode, &row.t.to_string(), name, &v.to_string()])
                .map_err(crate::error::LogError::from)?;
        }
    }
    Ok(())
}

/// Flies every `alphas × {stock, adaptive}` combination of `base` with at
/// most `jobs` simulations at once, then writes `summary.csv` and the
/// long-format series file into `out`.
///
/// Runs that fail are reported in their row; the grid itself only fails if
/// the summary cannot be written.
pub fn run_grid(
    base: &ExperimentConfig,
    plan: &MissionPlan,
    out: &Path,
    alphas: &[f64],
    jobs: Option<usize>,
) -> Result<Vec<GridRow>> {
    create_dir(out)?;
    let cells: Vec<(f64, bool)> = alphas.iter().flat_map(|a| [(*a, false), (*a, true)]).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(GridRow, Option<FlightLog>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(alpha_p, adaptive)| {
                let id = grid_id(alpha_p, adaptive);
                let config = ExperimentConfig {
                    alpha_p,
                    adaptive,
                    ..base.clone()
                };
                let mut row = GridRow {
                    id: id.clone(),
                    alpha_p,
                    adaptive,
                    metrics: None,
                    abort_reason: None,
                    error: None,
                };
                match run_to_dir(&config, plan, &out.join(&id), &id) {
                    Ok((output, _)) => {
                        row.metrics = Some(output.metrics);
                        row.abort_reason = output.abort_reason;
                        (row, Some(output.log))
                    }
                    Err(e) => {
                        row.error = Some(e.to_string());
                        (row, None)
                    }
                }
            })
            .collect()
    });

    let mut summary = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut series = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let to_log = crate::error::LogError::from;
    summary
        .write_record([
            "alpha",
            "mode",
            "rmse",
            "completion_time",
            "completed",
            "azimuth_rmse",
            "theta_norm_r",
            "theta_norm_v",
            "theta_norm_q",
            "theta_norm_omega",
            "status",
        ])
        .map_err(to_log)?;
    series
        .write_record(["id", "alpha", "mode", "t", "variable", "value"])
        .map_err(to_log)?;
    for (row, log) in &results {
        let mode = if row.adaptive { "adaptive" } else { "stock" };
        let status = match (&row.error, &row.abort_reason) {
            (Some(e), _) => format!("error: {e}"),
            (None, Some(r)) => format!("aborted: {r}"),
            (None, None) => "ok".to_string(),
        };
        let mut rec = vec![row.alpha_p.to_string(), mode.to_string()];
        match &row.metrics {
            Some(m) => {
                rec.push(m.position_rmse.to_string());
                rec.push(m.completion_time.to_string());
                rec.push(m.completed.to_string());
                rec.push(m.azimuth_rmse.to_string());
                rec.extend(m.theta_norms.iter().map(f64::to_string));
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 8)),
        }
        rec.push(status);
        summary.write_record(&rec).map_err(to_log)?;
        if let Some(log) = log {
            series_rows(&row.id, row.alpha_p, mode, log, &mut series)?;
        }
    }
    let bytes = |w: csv::Writer<Vec<u8>>| w.into_inner().map_err(|e| Error::Config(e.to_string()));
    write_text(&out.join(SUMMARY_FILE), &String::from_utf8_lossy(&bytes(summary)?))?;
    write_text(&out.join(SERIES_FILE), &String::from_utf8_lossy(&bytes(series)?))?;
    Ok(results.into_iter().map(|(row, _)| row).collect())
}
