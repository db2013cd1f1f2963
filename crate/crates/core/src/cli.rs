//! The `tmpinn` command line.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 divergence
//! during training or evaluation, 3 I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::evaluation::{
    comparison_table, evaluate, evaluation_grid, metrics_csv, parse_metrics_csv, series_csv, EvalError, EvalOptions,
    MaeMode, TableMetric, DEFAULT_EVAL_TRAJECTORIES,
};
use crate::io::write_string_atomic;
use crate::solver::SolverError;
use crate::systems::{resolve_system, SystemError, BUILTIN_NAMES};
use crate::training::{save_run, train_with_system, ModelFile, TrainConfig, TrainError, MODEL_FILE};

/// Environment variables that override the configured seeds.
pub const SEED_ENV: [&str; 3] = ["TMPINN_DATA_SEED", "TMPINN_INIT_SEED", "TMPINN_SHUFFLE_SEED"];

pub const METRICS_FILE: &str = "metrics.csv";
pub const SERIES_FILE: &str = "series.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Diverged(String),
    #[error("{0}")]
    Io(String),
    /// Help or version output requested; not a failure.
    #[error("{0}")]
    Info(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Info(_) => 0,
            CliError::Config(_) => 1,
            CliError::Diverged(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        match e {
            SystemError::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => CliError::Diverged(e.to_string()),
            TrainError::Io(_) => CliError::Io(e.to_string()),
            TrainError::System(s) => s.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(_) | EvalError::Solver(SolverError::NonFinite { .. }) => CliError::Diverged(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "tmpinn", version, about = "Taylor-model surrogates for parametric ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List builtin systems with their state and parameter counts.
    ListSystems,
    /// Print the Lie derivatives f_1 … f_{m+1} of a system.
    Derive {
        /// Builtin name or system file.
        system: String,
        #[arg(long, default_value_t = 3)]
        order: usize,
    },
    /// Train a model from a TOML configuration.
    Train {
        config: PathBuf,
        /// Output directory [default: runs/<config file stem>].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a trained model against RK4 ground truth.
    Eval {
        /// Run directory or model file.
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        horizons: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_EVAL_TRAJECTORIES)]
        n_eval: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report errors at the horizon only instead of over [0, h].
        #[arg(long)]
        endpoint: bool,
        /// Metrics file [default: metrics.csv beside the model].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Combine run metrics into MAE and RMSE comparison tables.
    Table {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Per-time mean absolute error of a trained model.
    Series {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EVAL_TRAJECTORIES)]
        n_eval: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Last time of the series [default: the system horizon].
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Files written by one invocation.
#[derive(Debug, Serialize)]
struct CommandManifest<'a> {
    toolkit_version: &'a str,
    command: &'a str,
    arguments: Vec<String>,
    outputs: Vec<String>,
}

fn write_manifest(path: &Path, command: &str, args: &[OsString], outputs: &[&Path]) -> Result<(), CliError> {
    let mut listed: Vec<String> = outputs.iter().map(|p| p.display().to_string()).collect();
    listed.push(path.display().to_string());
    let m = CommandManifest {
        toolkit_version: env!("CARGO_PKG_VERSION"),
        command,
        arguments: args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
        outputs: listed,
    };
    write_string_atomic(path, &serde_json::to_string_pretty(&m)?)?;
    Ok(())
}

fn model_path(checkpoint: &Path) -> PathBuf {
    if checkpoint.is_dir() {
        checkpoint.join(MODEL_FILE)
    } else {
        checkpoint.to_path_buf()
    }
}

fn load_model(checkpoint: &Path) -> Result<(PathBuf, ModelFile), CliError> {
    let path = model_path(checkpoint);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((path, file))
}

fn apply_seed_overrides(cfg: &mut TrainConfig) -> Result<(), CliError> {
    let slots = [&mut cfg.seeds.data, &mut cfg.seeds.init, &mut cfg.seeds.shuffle];
    for (name, slot) in SEED_ENV.iter().zip(slots) {
        if let Ok(v) = std::env::var(name) {
            *slot = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{name}={v} is not an unsigned integer")))?;
        }
    }
    Ok(())
}

/// Runs one command; machine-readable results go to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return Err(match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
                _ => CliError::Config(e.to_string()),
            });
        }
    };
    match cli.command {
        Command::ListSystems => {
            writeln!(stdout, "system,states,params")?;
            for name in BUILTIN_NAMES {
                let s = resolve_system(name)?;
                writeln!(stdout, "{name},{},{}", s.n_states(), s.n_params())?;
            }
        }
        Command::Derive { system, order } => {
            if order == 0 {
                return Err(CliError::Config("order must be at least 1".into()));
            }
            let sys = resolve_system(&system)?;
            let table = sys.lie_table(order).map_err(|e| CliError::Config(e.to_string()))?;
            for (j, entry) in table.entries().iter().enumerate() {
                for (name, e) in sys.state_names().iter().zip(entry.iter()) {
                    writeln!(stdout, "f{}.{name} = {}", j + 1, sys.render(e))?;
                }
            }
        }
        Command::Train { config, out } => {
            let mut cfg = TrainConfig::from_path(&config).map_err(|e| match e {
                TrainError::Io(io) => CliError::Io(format!("{}: {io}", config.display())),
                other => CliError::Config(format!("{}: {other}", config.display())),
            })?;
            apply_seed_overrides(&mut cfg)?;
            let system = resolve_system(&cfg.system)?;
            let dir = out.unwrap_or_else(|| {
                let stem = config.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "run".into());
                Path::new("runs").join(stem)
            });
            let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
            log::info!("training {} on {} → {}", cfg.method, system.name(), dir.display());
            let mut run = train_with_system(&cfg, &system)?;
            let files = save_run(&mut run, &dir, started)?;
            let last = run.history.last().map(|r| r.total).unwrap_or(f64::NAN);
            log::info!("done: {} epochs, final loss {last:.6e}", run.history.len());
            let summary = serde_json::json!({
                "run_dir": dir.display().to_string(),
                "epochs": run.history.len(),
                "final_loss": last,
                "outputs": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            });
            writeln!(stdout, "{summary}")?;
        }
        Command::Eval {
            checkpoint,
            horizons,
            n_eval,
            seed,
            endpoint,
            out,
        } => {
            let (path, file) = load_model(&checkpoint)?;
            let (system, model) = file.instantiate()?;
            let opts = EvalOptions {
                n_eval,
                horizons,
                seed,
                mode: if endpoint { MaeMode::Endpoint } else { MaeMode::Windowed },
            };
            let metrics = evaluate(&model, &system, &opts)?;
            let csv = metrics_csv(system.name(), file.method.name(), &metrics);
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let target = out.unwrap_or_else(|| dir.join(METRICS_FILE));
            write_string_atomic(&target, &csv)?;
            let manifest = target.with_file_name("eval_manifest.json");
            write_manifest(&manifest, "eval", &args, &[&target])?;
            write!(stdout, "{csv}")?;
        }
        Command::Table { runs, out } => {
            let mut rows = Vec::new();
            for r in &runs {
                let p = if r.is_dir() { r.join(METRICS_FILE) } else { r.clone() };
                let text = std::fs::read_to_string(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                rows.extend(parse_metrics_csv(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?);
            }
            std::fs::create_dir_all(&out)?;
            let mae = comparison_table(&rows, TableMetric::Mae);
            let rmse = comparison_table(&rows, TableMetric::Rmse);
            let (mae_path, rmse_path) = (out.join("table_mae.csv"), out.join("table_rmse.csv"));
            write_string_atomic(&mae_path, &mae)?;
            write_string_atomic(&rmse_path, &rmse)?;
            write_manifest(&out.join("table_manifest.json"), "table", &args, &[&mae_path, &rmse_path])?;
            write!(stdout, "{mae}")?;
        }
        Command::Series {
            checkpoint,
            n_eval,
            seed,
            horizon,
            out,
        } => {
            let (path, file) = load_model(&checkpoint)?;
            let (system, model) = file.instantiate()?;
            let h = horizon.unwrap_or_else(|| system.horizon());
            let opts = EvalOptions {
                n_eval,
                horizons: vec![h],
                seed,
                mode: MaeMode::Windowed,
            };
            let metrics = evaluate(&model, &system, &opts)?;
            debug_assert_eq!(metrics.times, evaluation_grid(h));
            let csv = series_csv(&metrics.times, &metrics.series);
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let target = out.unwrap_or_else(|| dir.join(SERIES_FILE));
            write_string_atomic(&target, &csv)?;
            write_manifest(&target.with_file_name("series_manifest.json"), "series", &args, &[&target])?;
            writeln!(stdout, "{}", target.display())?;
        }
    }
    Ok(())
}
