//! Error metrics of a surrogate against RK4 ground truth.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::losses::LossError;
use crate::solver::{integrate, SolverError, DEFAULT_STEP};
use crate::systems::{draw_initial_conditions, uniform_grid, DrawStream, OdeSystem};
use crate::training::Model;

/// Spacing of the evaluation time grid.
pub const GRID_SPACING: f64 = 0.01;
pub const DEFAULT_EVAL_TRAJECTORIES: usize = 100;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("horizon {horizon} is outside (0, {max}]")]
    Horizon { horizon: f64, max: f64 },
    #[error("horizon {0} is not a point of the evaluation grid")]
    OffGrid(f64),
    #[error("no evaluation trajectories requested")]
    Empty,
    #[error("model: {0}")]
    Model(#[from] LossError),
    #[error("ground truth: {0}")]
    Solver(#[from] SolverError),
    #[error("malformed metrics CSV line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Anything that predicts states along a time grid.
pub trait Predictor {
    fn predict(&self, system: &OdeSystem, x0: &[f64], theta: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>, EvalError>;
}

impl Predictor for Model {
    fn predict(&self, system: &OdeSystem, x0: &[f64], theta: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
        Ok(Model::predict(self, system, x0, theta, times)?)
    }
}

/// RK4 itself, for self-comparison.
#[derive(Debug, Clone, Copy)]
pub struct GroundTruth {
    pub step: f64,
}

impl Default for GroundTruth {
    fn default() -> Self {
        GroundTruth { step: DEFAULT_STEP }
    }
}

impl Predictor for GroundTruth {
    fn predict(&self, system: &OdeSystem, x0: &[f64], theta: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
        Ok(integrate(system, x0, theta, times, self.step)?.states)
    }
}

/// Adapts a closure `(x₀, θ, times) -> states` into a [`Predictor`].
pub struct FnPredictor<F>(pub F);

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&[f64], &[f64], &[f64]) -> Result<Vec<Vec<f64>>, EvalError>,
{
    fn predict(&self, _: &OdeSystem, x0: &[f64], theta: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
        (self.0)(x0, theta, times)
    }
}

/// How a horizon's MAE aggregates over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaeMode {
    /// All grid points in `[0, h]`.
    #[default]
    Windowed,
    /// Only the grid point at `h`.
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonMetrics {
    pub horizon: f64,
    pub mae: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub horizons: Vec<HorizonMetrics>,
    pub times: Vec<f64>,
    /// Mean absolute error at each grid time (over trajectories and states).
    pub series: Vec<f64>,
    /// Mean squared error at each grid time.
    pub squared_series: Vec<f64>,
    pub seed: u64,
    pub n_eval: usize,
    pub mode: MaeMode,
}

impl Metrics {
    pub fn at(&self, horizon: f64) -> Option<&HorizonMetrics> {
        self.horizons.iter().find(|h| (h.horizon - horizon).abs() < 1e-9)
    }
}

fn in_window(t: f64, h: f64) -> bool {
    t <= h + 1e-9 * h.max(1.0)
}

/// MAE and RMSE over `[0, h]` (or at `h`) from per-time series.
pub fn aggregate(times: &[f64], series: &[f64], squared: &[f64], h: f64, mode: MaeMode) -> Result<HorizonMetrics, EvalError> {
    let (mae, mse) = match mode {
        MaeMode::Windowed => {
            let k = times.iter().take_while(|&&t| in_window(t, h)).count();
            let kf = k as f64;
            (series[..k].iter().sum::<f64>() / kf, squared[..k].iter().sum::<f64>() / kf)
        }
        MaeMode::Endpoint => {
            let k = times
                .iter()
                .position(|&t| (t - h).abs() <= 1e-9 * h.max(1.0))
                .ok_or(EvalError::OffGrid(h))?;
            (series[k], squared[k])
        }
    };
    Ok(HorizonMetrics {
        horizon: h,
        mae,
        rmse: mse.sqrt(),
    })
}

/// Per-time mean absolute and mean squared errors over `n_eval` fresh draws.
fn error_moments<P: Predictor + ?Sized>(
    model: &P,
    system: &OdeSystem,
    n_eval: usize,
    grid: &[f64],
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    if n_eval == 0 {
        return Err(EvalError::Empty);
    }
    let draws = draw_initial_conditions(system, n_eval, seed, DrawStream::Evaluation).map_err(LossError::from)?;
    let truth = GroundTruth::default();
    let n = system.n_states();
    let mut abs = vec![0.0; grid.len()];
    let mut sq = vec![0.0; grid.len()];
    for d in &draws {
        let want = truth.predict(system, &d.x0, &d.theta, grid)?;
        let got = model.predict(system, &d.x0, &d.theta, grid)?;
        for (k, (w, g)) in want.iter().zip(&got).enumerate() {
            for (a, b) in w.iter().zip(g) {
                let e = a - b;
                abs[k] += e.abs();
                sq[k] += e * e;
            }
        }
    }
    let denom = (n_eval * n) as f64;
    abs.iter_mut().chain(sq.iter_mut()).for_each(|v| *v /= denom);
    Ok((abs, sq))
}

/// Evaluation grid with [`GRID_SPACING`] covering `[0, horizon]`.
pub fn evaluation_grid(horizon: f64) -> Vec<f64> {
    let points = (horizon / GRID_SPACING).round() as usize + 1;
    uniform_grid(horizon, points.max(2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub n_eval: usize,
    pub horizons: Vec<f64>,
    pub seed: u64,
    pub mode: MaeMode,
}

impl EvalOptions {
    pub fn new(horizons: Vec<f64>, seed: u64) -> Self {
        EvalOptions {
            n_eval: DEFAULT_EVAL_TRAJECTORIES,
            horizons,
            seed,
            mode: MaeMode::Windowed,
        }
    }
}

pub fn evaluate<P: Predictor + ?Sized>(model: &P, system: &OdeSystem, opts: &EvalOptions) -> Result<Metrics, EvalError> {
    let max = system.horizon();
    for &h in &opts.horizons {
        if !(h > 0.0 && h <= max + 1e-12) {
            return Err(EvalError::Horizon { horizon: h, max });
        }
    }
    let last = opts.horizons.iter().copied().fold(0.0, f64::max);
    if last == 0.0 {
        return Err(EvalError::Empty);
    }
    let times = evaluation_grid(last);
    let (series, squared_series) = error_moments(model, system, opts.n_eval, &times, opts.seed)?;
    let horizons = opts
        .horizons
        .iter()
        .map(|&h| aggregate(&times, &series, &squared_series, h, opts.mode))
        .collect::<Result<_, _>>()?;
    Ok(Metrics {
        horizons,
        times,
        series,
        squared_series,
        seed: opts.seed,
        n_eval: opts.n_eval,
        mode: opts.mode,
    })
}

/// Windowed MAE/RMSE at each horizon over `n_eval` fresh trajectories.
pub fn evaluate_metrics<P: Predictor + ?Sized>(
    model: &P,
    system: &OdeSystem,
    n_eval: usize,
    horizons: &[f64],
    seed: u64,
) -> Result<Metrics, EvalError> {
    let opts = EvalOptions {
        n_eval,
        ..EvalOptions::new(horizons.to_vec(), seed)
    };
    evaluate(model, system, &opts)
}

/// Mean absolute error at each time of `grid` (which must start at 0).
pub fn error_series<P: Predictor + ?Sized>(
    model: &P,
    system: &OdeSystem,
    n_eval: usize,
    grid: &[f64],
    seed: u64,
) -> Result<Vec<f64>, EvalError> {
    Ok(error_moments(model, system, n_eval, grid, seed)?.0)
}

/// `system,method,horizon,mae,rmse` rows.
pub fn metrics_csv(system: &str, method: &str, m: &Metrics) -> String {
    let mut out = String::from("system,method,horizon,mae,rmse\n");
    for h in &m.horizons {
        out.push_str(&format!("{system},{method},{},{},{}\n", h.horizon, h.mae, h.rmse));
    }
    out
}

/// `t,mae` rows.
pub fn series_csv(times: &[f64], series: &[f64]) -> String {
    let mut out = String::from("t,mae\n");
    for (t, v) in times.iter().zip(series) {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub system: String,
    pub method: String,
    pub horizon: f64,
    pub mae: f64,
    pub rmse: f64,
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>, EvalError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "system,method,horizon,mae,rmse")) => {}
        _ => {
            return Err(EvalError::Parse {
                line: 1,
                reason: "unexpected header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let err = |reason: String| EvalError::Parse { line: i + 1, reason };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(err(format!("expected 5 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("'{s}': {e}")));
            Ok(MetricsRow {
                system: f[0].to_string(),
                method: f[1].to_string(),
                horizon: num(f[2])?,
                mae: num(f[3])?,
                rmse: num(f[4])?,
            })
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    Mae,
    Rmse,
}

/// Comparison table `system,horizon,<method...>`; repeated runs of the same
/// system and method are combined by their median.
pub fn comparison_table(rows: &[MetricsRow], metric: TableMetric) -> String {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let rank = |m: &str| {
        crate::training::Method::ALL
            .iter()
            .position(|k| k.name() == m)
            .unwrap_or(usize::MAX)
    };
    methods.sort_by_key(|m| (rank(m), m.to_string()));
    // (system, horizon in micro-units) -> method -> values
    let mut cells: BTreeMap<(String, i64), BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        let v = match metric {
            TableMetric::Mae => r.mae,
            TableMetric::Rmse => r.rmse,
        };
        cells
            .entry((r.system.clone(), (r.horizon * 1e6).round() as i64))
            .or_default()
            .entry(&r.method)
            .or_default()
            .push(v);
    }
    let mut out = String::from("system,horizon");
    for m in &methods {
        out.push(',');
        out.push_str(m);
    }
    out.push('\n');
    for ((system, h), by_method) in &mut cells {
        out.push_str(&format!("{system},{}", *h as f64 / 1e6));
        for m in &methods {
            match by_method.get_mut(m) {
                Some(v) => out.push_str(&format!(",{}", median(v))),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
