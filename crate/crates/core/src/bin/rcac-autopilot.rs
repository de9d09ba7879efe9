use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rcac_autopilot::harness::DEFAULT_DURATION;
use rcac_autopilot::runner::{self, GRID_ALPHAS, METRICS_FILE};
use rcac_autopilot::{
    default_mission, AdaptiveConfig, AttitudeMode, ExperimentConfig, GainSet, LoopFlags, MissionPlan, SetpointMode,
};

#[derive(Parser)]
#[command(
    name = "rcac-autopilot",
    version,
    about = "Quadcopter autopilot experiments with adaptive augmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly one mission and write log.csv, gains.csv and metrics.txt.
    Run(RunArgs),
    /// Fly every α in {1.0, 0.5, 0.3} with the stock and adaptive autopilots.
    Grid(GridArgs),
    /// Recompute metrics from a log written by `run` or `grid`.
    ReplayMetrics {
        /// Path to log.csv; gains.csv and mission.txt are read beside it.
        log: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Waypoint file, or `default` for the built-in rectangle.
    #[arg(long, default_value = "default")]
    mission: String,
    /// Override the setpoint mode of the mission.
    #[arg(long, value_name = "step|trajectory")]
    setpoints: Option<SetpointMode>,
    /// Gain file (`K_vP_x = 1.8` lines); defaults to the built-in gains.
    #[arg(long)]
    gains: Option<PathBuf>,
    /// RCAC hyperparameter file (`p0_v = 1.54` lines).
    #[arg(long)]
    hyper: Option<PathBuf>,
    /// Adapted loops, e.g. `v,omega`; `none` disables adaptation.
    #[arg(long)]
    loops: Option<LoopFlags>,
    /// Let RCAC adapt the rate-loop coefficient that is pinned at zero by default.
    #[arg(long)]
    unmask_ff: bool,
    #[arg(long, value_name = "reduced|full", default_value = "reduced")]
    attitude: AttitudeMode,
    /// Physics step, s.
    #[arg(long, default_value_t = 0.002)]
    dt: f64,
    /// Simulated time cap, s.
    #[arg(long, default_value_t = DEFAULT_DURATION)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, env = "RCAC_AUTOPILOT_OUT", default_value = "rcac-out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Detuning factor applied to every stock gain.
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, conflicts_with = "adaptive")]
    stock: bool,
    #[arg(long)]
    adaptive: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct GridArgs {
    /// Detuning factors to fly.
    #[arg(long, value_delimiter = ',', default_values_t = GRID_ALPHAS)]
    alphas: Vec<f64>,
    /// Simulations run at once; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    common: Common,
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load(common: &Common) -> Result<(ExperimentConfig, MissionPlan), String> {
    let mut plan = match common.mission.as_str() {
        "default" => default_mission(),
        path => MissionPlan::parse(&read(Path::new(path))?).map_err(|e| format!("{path}: {e}"))?,
    };
    if let Some(mode) = common.setpoints {
        plan.mode = mode;
    }
    let mut config = ExperimentConfig::default();
    if let Some(path) = &common.gains {
        config.gains = GainSet::parse(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(path) = &common.hyper {
        config.rcac = AdaptiveConfig::parse(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(loops) = common.loops {
        config.rcac.enabled = loops;
    }
    if common.unmask_ff {
        config.rcac.unmask_omega();
    }
    config.attitude_mode = common.attitude;
    config.dt = common.dt;
    config.duration = common.duration;
    config.seed = common.seed;
    Ok((config, plan))
}

fn cmd_run(args: RunArgs) -> Result<(), String> {
    let (mut config, plan) = load(&args.common)?;
    config.alpha_p = args.alpha;
    config.adaptive = args.adaptive;
    config.validate().map_err(|e| e.to_string())?;
    let id = runner::grid_id(config.alpha_p, config.adaptive);
    let (output, manifest) = runner::run_to_dir(&config, &plan, &args.common.out, &id).map_err(|e| e.to_string())?;
    print!("{}", output.metrics.to_text());
    for p in &manifest.outputs {
        eprintln!("wrote {}", p.display());
    }
    if let Some(reason) = output.abort_reason {
        return Err(format!("simulation aborted at {reason}"));
    }
    if !output.metrics.completed {
        eprintln!("warning: mission not completed within {} s", config.duration);
    }
    Ok(())
}

fn cmd_grid(args: GridArgs) -> Result<(), String> {
    let (config, plan) = load(&args.common)?;
    if args.alphas.is_empty() {
        return Err("no alphas given".into());
    }
    for a in &args.alphas {
        ExperimentConfig {
            alpha_p: *a,
            ..config.clone()
        }
        .validate()
        .map_err(|e| e.to_string())?;
    }
    let rows =
        runner::run_grid(&config, &plan, &args.common.out, &args.alphas, args.jobs).map_err(|e| e.to_string())?;
    let mut failures = 0;
    for row in &rows {
        match (&row.metrics, row.failed()) {
            (Some(m), false) => println!(
                "{:<20} rmse {:.4} m  t {:.2} s  completed {}",
                row.id, m.position_rmse, m.completion_time, m.completed
            ),
            _ => {
                failures += 1;
                let why = row
                    .error
                    .as_deref()
                    .or(row.abort_reason.as_deref())
                    .unwrap_or("unknown");
                println!("{:<20} FAILED: {why}", row.id);
            }
        }
    }
    eprintln!("wrote {}", args.common.out.join(runner::SUMMARY_FILE).display());
    if failures > 0 {
        return Err(format!("{failures} of {} runs failed", rows.len()));
    }
    Ok(())
}

fn cmd_replay(log: &Path) -> Result<(), String> {
    let metrics = runner::replay_metrics(log).map_err(|e| format!("{}: {e}", log.display()))?;
    let text = metrics.to_text();
    print!("{text}");
    let original = log.parent().unwrap_or(Path::new(".")).join(METRICS_FILE);
    if original.exists() {
        if read(&original)? != text {
            return Err(format!("recomputed metrics differ from {}", original.display()));
        }
        eprintln!("matches {}", original.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Grid(args) => cmd_grid(args),
        Command::ReplayMetrics { log } => cmd_replay(&log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
