//! Minibatch ADAM training for the four objectives, plus run artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::GradBuffer;
use crate::losses::{LossBreakdown, LossComponent, LossError, LossWeights, PinnObjective, TaylorObjective, TaylorSurrogate};
use crate::network::{Checkpoint, Mlp, NetworkError, DEFAULT_HIDDEN};
use crate::systems::{resolve_system, sample_collocation, OdeSystem, SystemError, SystemSpec};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const DESK_TAYLOR_EPOCHS: usize = 100;
pub const DESK_BASELINE_EPOCHS: usize = 200;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("training diverged at epoch {epoch}: {source}")]
    Diverged { epoch: usize, source: LossError },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pinn,
    HoPinn,
    TmPinn,
    TmNq,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pinn, Method::HoPinn, Method::TmPinn, Method::TmNq];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pinn => "pinn",
            Method::HoPinn => "ho_pinn",
            Method::TmPinn => "tm_pinn",
            Method::TmNq => "tm_nq",
        }
    }

    pub fn is_taylor(self) -> bool {
        matches!(self, Method::TmPinn | Method::TmNq)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Collocation sampling.
    pub data: u64,
    /// Network initialization.
    pub init: u64,
    /// Minibatch order.
    pub shuffle: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            data: 0,
            init: 1,
            shuffle: 2,
        }
    }
}

/// Training configuration. Unset optional fields take method- and
/// system-dependent defaults (see [`TrainConfig::resolved`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Builtin system name or path to a system file.
    pub system: String,
    pub method: Method,
    pub epochs: Option<usize>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub learning_rate: Option<f64>,
    /// Taylor order for the Taylor methods, highest derivative order for
    /// the higher-order PINN.
    pub order: Option<usize>,
    /// Trapezoid panels (tm_nq only).
    pub quadrature_points: Option<usize>,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_n_ic")]
    pub n_ic: usize,
    /// Time points per draw; defaults to a 0.01 s grid over the horizon.
    pub n_t: Option<usize>,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default)]
    pub ri_at_batch_time: bool,
}

fn default_batch() -> usize {
    256
}

fn default_n_ic() -> usize {
    100
}

fn default_hidden() -> usize {
    DEFAULT_HIDDEN
}

/// A configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub system: String,
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub order: usize,
    pub quadrature_points: Option<usize>,
    pub weights: LossWeights,
    pub seeds: Seeds,
    pub n_ic: usize,
    pub n_t: usize,
    pub hidden: usize,
    pub ri_at_batch_time: bool,
}

impl TrainConfig {
    pub fn new(system: &str, method: Method) -> Self {
        TrainConfig {
            system: system.to_string(),
            method,
            epochs: None,
            batch_size: default_batch(),
            learning_rate: None,
            order: None,
            quadrature_points: None,
            weights: LossWeights::default(),
            seeds: Seeds::default(),
            n_ic: default_n_ic(),
            n_t: None,
            hidden: default_hidden(),
            ri_at_batch_time: false,
        }
    }

    /// Laptop-scale profile: 200 draws on a 31-point grid, batch 64, and
    /// 100 epochs for the Taylor methods against 200 for the baselines.
    pub fn desk(system: &str, method: Method) -> Self {
        TrainConfig {
            epochs: Some(if method.is_taylor() { DESK_TAYLOR_EPOCHS } else { DESK_BASELINE_EPOCHS }),
            batch_size: 64,
            n_ic: 200,
            n_t: Some(31),
            ..TrainConfig::new(system, method)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Validates and fills defaults for `system`.
    pub fn resolved(&self, system: &OdeSystem) -> Result<ResolvedConfig, TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        let epochs = self.epochs.unwrap_or(match self.method {
            Method::Pinn | Method::HoPinn => 100_000,
            Method::TmPinn | Method::TmNq => 500,
        });
        if epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        let learning_rate = self.learning_rate.unwrap_or(match system.name() {
            "cdo" | "mmek" => 0.005,
            _ => 0.01,
        });
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {learning_rate}"));
        }
        let order = match self.method {
            Method::Pinn => match self.order {
                None | Some(1) => 1,
                Some(m) => return bad(format!("pinn has no order setting (got {m})")),
            },
            Method::HoPinn => {
                let m = self.order.unwrap_or(3);
                if !(2..=3).contains(&m) {
                    return bad(format!("ho_pinn order must be 2 or 3, got {m}"));
                }
                m
            }
            Method::TmPinn | Method::TmNq => {
                let m = self.order.unwrap_or(3);
                if !(1..=4).contains(&m) {
                    return bad(format!("Taylor order must be in 1..=4, got {m}"));
                }
                m
            }
        };
        let quadrature_points = match (self.method, self.quadrature_points) {
            (Method::TmNq, k) => {
                let k = k.unwrap_or(10);
                if k < 2 {
                    return bad(format!("quadrature_points must be at least 2, got {k}"));
                }
                Some(k)
            }
            (_, None) => None,
            (m, Some(_)) => return bad(format!("quadrature_points only applies to tm_nq, not {m}")),
        };
        if self.ri_at_batch_time && !self.method.is_taylor() {
            return bad("ri_at_batch_time only applies to Taylor methods".into());
        }
        let n_t = self.n_t.unwrap_or_else(|| system.default_time_points());
        if n_t < 2 || self.n_ic == 0 {
            return bad("need n_ic ≥ 1 and n_t ≥ 2".into());
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1".into());
        }
        Ok(ResolvedConfig {
            system: self.system.clone(),
            method: self.method,
            epochs,
            batch_size: self.batch_size,
            learning_rate,
            order,
            quadrature_points,
            weights: self.weights,
            seeds: self.seeds,
            n_ic: self.n_ic,
            n_t,
            hidden: self.hidden,
            ri_at_batch_time: self.ri_at_batch_time,
        })
    }
}

/// First and second moment estimates for ADAM.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of steps taken so far.
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One ADAM update with bias correction.
pub fn adam_step(params: &mut [f64], grads: &GradBuffer, state: &mut AdamState, lr: f64) {
    assert_eq!(params.len(), grads.len(), "gradient length");
    assert_eq!(params.len(), state.m.len(), "moment length");
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
}

/// A trained (or freshly initialized) surrogate of either family.
#[derive(Debug, Clone)]
pub enum Model {
    /// A network mapping `(x₀, θ, t)` directly to the state.
    Direct(Mlp),
    Taylor(TaylorSurrogate),
}

impl Model {
    pub fn params(&self) -> Vec<f64> {
        match self {
            Model::Direct(net) => net.params().to_vec(),
            Model::Taylor(s) => s.params(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) {
        match self {
            Model::Direct(net) => net.params_mut().copy_from_slice(p),
            Model::Taylor(s) => s.set_params(p),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::Direct(net) => net.param_count(),
            Model::Taylor(s) => s.param_count(),
        }
    }

    /// Predicted state at each of `times`.
    pub fn predict(&self, system: &OdeSystem, x0: &[f64], theta: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>, LossError> {
        match self {
            Model::Direct(net) => {
                let mut input: Vec<f64> = x0.iter().chain(theta).copied().collect();
                input.push(0.0);
                let last = input.len() - 1;
                times
                    .iter()
                    .map(|&t| {
                        input[last] = t;
                        Ok(net.forward(&input)?)
                    })
                    .collect()
            }
            Model::Taylor(s) => {
                let params = system.full_params(x0, theta)?;
                let c = s.coefficients(x0, &params)?;
                times.iter().map(|&t| s.eval_with(&c, x0, theta, t)).collect()
            }
        }
    }
}

enum Objective {
    Pinn(PinnObjective),
    Taylor(TaylorObjective),
}

impl Objective {
    fn for_config(cfg: &ResolvedConfig, system: &OdeSystem) -> Result<Self, LossError> {
        Ok(match cfg.method {
            Method::Pinn => Objective::Pinn(PinnObjective::pinn(system, cfg.weights)),
            Method::HoPinn => Objective::Pinn(PinnObjective::higher_order(system, cfg.order, cfg.weights)?),
            Method::TmPinn => {
                let mut o = TaylorObjective::tm_pinn(cfg.weights);
                o.ri_at_batch_time = cfg.ri_at_batch_time;
                Objective::Taylor(o)
            }
            Method::TmNq => {
                let k = cfg.quadrature_points.expect("resolved config has quadrature points");
                let mut o = TaylorObjective::tm_nq(cfg.weights, k)?;
                o.ri_at_batch_time = cfg.ri_at_batch_time;
                Objective::Taylor(o)
            }
        })
    }

    fn loss_and_gradient(
        &self,
        model: &Model,
        batch: &[crate::systems::Sample<'_>],
    ) -> Result<(LossBreakdown, GradBuffer), LossError> {
        match (self, model) {
            (Objective::Pinn(o), Model::Direct(net)) => o.loss_and_gradient(net, batch),
            (Objective::Taylor(o), Model::Taylor(s)) => o.loss_and_gradient(s, batch),
            _ => unreachable!("model family matches method"),
        }
    }
}

/// Builds the seeded initial model for a resolved configuration.
pub fn initial_model(cfg: &ResolvedConfig, system: &OdeSystem) -> Result<Model, TrainError> {
    let n = system.n_states();
    let input = n + system.n_params() + 1;
    let act = crate::network::Activation::Tanh;
    Ok(if cfg.method.is_taylor() {
        let nets = (0..n)
            .map(|i| Mlp::new(input, cfg.hidden, 1, act, cfg.seeds.init.wrapping_add(i as u64)))
            .collect();
        Model::Taylor(TaylorSurrogate::with_networks(system, cfg.order, nets)?)
    } else {
        Model::Direct(Mlp::new(input, cfg.hidden, n, act, cfg.seeds.init))
    })
}

/// Losses of one epoch, averaged over its minibatches (weighted by size).
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total: f64,
    pub components: BTreeMap<LossComponent, f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Checkpoint written for the final parameters, once saved.
    pub checkpoint: Option<PathBuf>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// `epoch,total,<components>` CSV. Timing is left out so that identical
    /// runs produce identical files.
    pub fn to_csv(&self) -> String {
        let comps: Vec<LossComponent> = self
            .epochs
            .first()
            .map(|r| r.components.keys().copied().collect())
            .unwrap_or_default();
        let mut out = String::from("epoch,total");
        for c in &comps {
            out.push(',');
            out.push_str(c.name());
        }
        out.push('\n');
        for r in &self.epochs {
            out.push_str(&format!("{},{}", r.epoch, r.total));
            for c in &comps {
                out.push_str(&format!(",{}", r.components[c]));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub config: ResolvedConfig,
    pub system: OdeSystem,
    pub model: Model,
    pub history: TrainHistory,
}

/// Trains a model from a configuration.
pub fn train_model(config: &TrainConfig) -> Result<TrainedRun, TrainError> {
    let system = resolve_system(&config.system)?;
    train_with_system(config, &system)
}

/// As [`train_model`] with an already resolved system.
pub fn train_with_system(config: &TrainConfig, system: &OdeSystem) -> Result<TrainedRun, TrainError> {
    let cfg = config.resolved(system)?;
    let data = sample_collocation(system, cfg.n_ic, cfg.n_t, cfg.seeds.data).map_err(LossError::from)?;
    let objective = Objective::for_config(&cfg, system)?;
    let mut model = initial_model(&cfg, system)?;
    let mut params = model.params();
    let mut adam = AdamState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.shuffle);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut comps: BTreeMap<LossComponent, f64> = BTreeMap::new();
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.batch(chunk);
            let (loss, grad) = objective
                .loss_and_gradient(&model, &batch)
                .map_err(|e| diverged(epoch, e))?;
            let share = chunk.len() as f64 / data.len() as f64;
            total += share * loss.total;
            for (c, v) in &loss.components {
                *comps.entry(*c).or_default() += share * v;
            }
            adam_step(&mut params, &grad, &mut adam, cfg.learning_rate);
            if let Some(bad) = params.iter().find(|p| !p.is_finite()) {
                return Err(TrainError::Diverged {
                    epoch,
                    source: LossError::NonFinite {
                        component: "parameters",
                        value: *bad,
                    },
                });
            }
            model.set_params(&params);
        }
        let seconds = start.elapsed().as_secs_f64();
        log::debug!("epoch {epoch}: loss {total:.6e} ({seconds:.2}s)");
        history.epochs.push(EpochRecord {
            epoch,
            total,
            components: comps,
            seconds,
        });
    }
    Ok(TrainedRun {
        config: cfg,
        system: system.clone(),
        model,
        history,
    })
}

fn diverged(epoch: usize, e: LossError) -> TrainError {
    match e {
        LossError::NonFinite { .. } | LossError::Symbolic(_) => TrainError::Diverged { epoch, source: e },
        other => TrainError::Loss(other),
    }
}

/// On-disk model: method, system definition and network checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub method: Method,
    pub order: usize,
    pub system: SystemSpec,
    pub networks: Vec<Checkpoint>,
}

impl ModelFile {
    pub fn from_run(run: &TrainedRun) -> Self {
        let networks = match &run.model {
            Model::Direct(net) => vec![net.to_checkpoint()],
            Model::Taylor(s) => s.networks().iter().map(Mlp::to_checkpoint).collect(),
        };
        ModelFile {
            method: run.config.method,
            order: run.config.order,
            system: run.system.spec().clone(),
            networks,
        }
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Rebuilds the system and model.
    pub fn instantiate(&self) -> Result<(OdeSystem, Model), TrainError> {
        let system = OdeSystem::from_spec(self.system.clone())?;
        let nets = self
            .networks
            .iter()
            .map(Mlp::from_checkpoint)
            .collect::<Result<Vec<_>, _>>()?;
        let model = if self.method.is_taylor() {
            Model::Taylor(TaylorSurrogate::with_networks(&system, self.order, nets)?)
        } else {
            let [net] = <[Mlp; 1]>::try_from(nets)
                .map_err(|_| TrainError::Config("direct models hold exactly one network".into()))?;
            Model::Direct(net)
        };
        Ok((system, model))
    }
}

pub const MODEL_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const TIMING_FILE: &str = "timing.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Reproducibility record of a training run. Wall-clock data lives in a
/// separate timing file so that the manifest itself is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub config: ResolvedConfig,
    pub seeds: Seeds,
    pub outputs: Vec<String>,
    pub final_losses: BTreeMap<String, f64>,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub started_unix_seconds: f64,
    pub total_seconds: f64,
    pub epoch_seconds: Vec<f64>,
}

/// Writes model, history, resolved config, timing and manifest into `dir`.
/// Returns the paths written.
pub fn save_run(run: &mut TrainedRun, dir: &Path, started_unix_seconds: f64) -> Result<Vec<PathBuf>, TrainError> {
    use crate::io::write_string_atomic;
    std::fs::create_dir_all(dir)?;
    let model_path = dir.join(MODEL_FILE);
    write_string_atomic(&model_path, &serde_json::to_string_pretty(&ModelFile::from_run(run))?)?;
    run.history.checkpoint = Some(model_path.clone());
    write_string_atomic(&dir.join(HISTORY_FILE), &run.history.to_csv())?;
    write_string_atomic(&dir.join(CONFIG_FILE), &toml::to_string(&run.config).expect("config serializes"))?;
    let epoch_seconds: Vec<f64> = run.history.epochs.iter().map(|e| e.seconds).collect();
    let timing = RunTiming {
        started_unix_seconds,
        total_seconds: epoch_seconds.iter().sum(),
        epoch_seconds,
    };
    write_string_atomic(&dir.join(TIMING_FILE), &serde_json::to_string_pretty(&timing)?)?;
    let names = [MODEL_FILE, HISTORY_FILE, CONFIG_FILE, TIMING_FILE, MANIFEST_FILE];
    let final_losses = run
        .history
        .last()
        .map(|r| {
            let mut m: BTreeMap<String, f64> =
                r.components.iter().map(|(c, v)| (c.name().to_string(), *v)).collect();
            m.insert("total".into(), r.total);
            m
        })
        .unwrap_or_default();
    let manifest = RunManifest {
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        config: run.config.clone(),
        seeds: run.config.seeds,
        outputs: names.iter().map(|s| s.to_string()).collect(),
        final_losses,
        epochs_run: run.history.len(),
    };
    write_string_atomic(&dir.join(MANIFEST_FILE), &serde_json::to_string_pretty(&manifest)?)?;
    Ok(names.iter().map(|n| dir.join(n)).collect())
}
