//! Benchmark ODE systems and collocation sampling.
//!
//! Every system, builtin or user supplied, is described by a [`SystemSpec`]
//! of expression strings and compiled into an [`OdeSystem`]. Builtins are
//! ordinary specs compiled into the binary.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbolic::{
    parse_expr_with_constants, Expr, LieTable, Names, Program, SymbolicError, VecExpr,
};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("unknown system `{0}`")]
    Unknown(String),
    #[error("invalid system `{name}`: {reason}")]
    Invalid { name: String, reason: String },
    #[error("in system `{name}`, {context}: {source}")]
    Expression {
        name: String,
        context: String,
        #[source]
        source: SymbolicError,
    },
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error("reading system file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing system file: {0}")]
    Format(String),
}

/// A parameter computed once per sample from the initial state and the
/// sampled parameters, e.g. the total population of a compartment model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedParam {
    pub name: String,
    pub expr: String,
}

/// Declarative, serializable description of a parametric ODE family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub name: String,
    pub states: Vec<String>,
    #[serde(default)]
    pub params: Vec<String>,
    pub rhs: Vec<String>,
    pub state_bounds: Vec<[f64; 2]>,
    #[serde(default)]
    pub param_bounds: Vec<[f64; 2]>,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    #[serde(default)]
    pub derived: Vec<DerivedParam>,
    pub horizon: f64,
}

impl SystemSpec {
    pub fn from_toml(text: &str) -> Result<Self, SystemError> {
        toml::from_str(text).map_err(|e| SystemError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, SystemError> {
        serde_json::from_str(text).map_err(|e| SystemError::Format(e.to_string()))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn from_path(path: &Path) -> Result<Self, SystemError> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }
}

/// A compiled parametric ODE `ẋ = f(x, θ, t)` with its sampling box.
#[derive(Debug, Clone)]
pub struct OdeSystem {
    spec: SystemSpec,
    rhs: VecExpr,
    derived: Vec<Expr>,
    field: Arc<Program>,
    field_with_jacobian: Arc<Program>,
    derived_program: Arc<Program>,
}

impl OdeSystem {
    pub fn from_spec(spec: SystemSpec) -> Result<Self, SystemError> {
        let invalid = |reason: String| SystemError::Invalid {
            name: spec.name.clone(),
            reason,
        };
        let n = spec.states.len();
        if n == 0 {
            return Err(invalid("no state variables".into()));
        }
        if spec.rhs.len() != n {
            return Err(invalid(format!(
                "{} right-hand sides for {} states",
                spec.rhs.len(),
                n
            )));
        }
        if spec.state_bounds.len() != n {
            return Err(invalid("state_bounds length differs from states".into()));
        }
        if spec.param_bounds.len() != spec.params.len() {
            return Err(invalid("param_bounds length differs from params".into()));
        }
        for [lo, hi] in spec.state_bounds.iter().chain(&spec.param_bounds) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(invalid(format!("bad bounds [{lo}, {hi}]")));
            }
        }
        if !(spec.horizon.is_finite() && spec.horizon > 0.0) {
            return Err(invalid(format!("horizon {} must be positive", spec.horizon)));
        }
        let mut names: Vec<&String> = spec.states.iter().chain(&spec.params).collect();
        names.extend(spec.derived.iter().map(|d| &d.name));
        names.extend(spec.constants.keys());
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(invalid("duplicate identifier".into()));
        }
        if names.iter().any(|s| s.as_str() == "t") {
            return Err(invalid("`t` is reserved for time".into()));
        }

        let expr_err = |context: String| {
            let name = spec.name.clone();
            move |source| SystemError::Expression {
                name,
                context,
                source,
            }
        };
        let derived = spec
            .derived
            .iter()
            .map(|d| {
                parse_expr_with_constants(&d.expr, &spec.states, &spec.params, &spec.constants)
                    .map_err(expr_err(format!("derived parameter `{}`", d.name)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let all_params: Vec<String> = spec
            .params
            .iter()
            .cloned()
            .chain(spec.derived.iter().map(|d| d.name.clone()))
            .collect();
        let rhs = spec
            .rhs
            .iter()
            .enumerate()
            .map(|(i, text)| {
                parse_expr_with_constants(text, &spec.states, &all_params, &spec.constants)
                    .map_err(expr_err(format!("rhs of `{}`", spec.states[i])))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let rhs = VecExpr::new(rhs);
        let field = Program::compile(rhs.components());
        let mut with_jac = rhs.components().to_vec();
        with_jac.extend(rhs.jacobian(n));
        let field_with_jacobian = Program::compile(&with_jac);
        let derived_program = Program::compile(&derived);
        Ok(OdeSystem {
            spec,
            rhs,
            derived,
            field: Arc::new(field),
            field_with_jacobian: Arc::new(field_with_jacobian),
            derived_program: Arc::new(derived_program),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, SystemError> {
        Self::from_spec(SystemSpec::from_path(path)?)
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    /// State dimension `n`.
    pub fn n_states(&self) -> usize {
        self.spec.states.len()
    }

    /// Number of sampled parameters `p` (derived parameters excluded).
    pub fn n_params(&self) -> usize {
        self.spec.params.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.spec.states
    }

    /// Sampled parameter names followed by derived parameter names.
    pub fn all_param_names(&self) -> Vec<String> {
        self.spec
            .params
            .iter()
            .cloned()
            .chain(self.spec.derived.iter().map(|d| d.name.clone()))
            .collect()
    }

    pub fn state_bounds(&self) -> &[[f64; 2]] {
        &self.spec.state_bounds
    }

    pub fn param_bounds(&self) -> &[[f64; 2]] {
        &self.spec.param_bounds
    }

    pub fn horizon(&self) -> f64 {
        self.spec.horizon
    }

    pub fn rhs(&self) -> &VecExpr {
        &self.rhs
    }

    pub fn derived_exprs(&self) -> &[Expr] {
        &self.derived
    }

    /// Parameter vector seen by the right-hand side: the sampled `θ`
    /// followed by derived parameters evaluated at `(x₀, θ)`.
    pub fn full_params(&self, x0: &[f64], theta: &[f64]) -> Result<Vec<f64>, SymbolicError> {
        if x0.len() != self.n_states() {
            return Err(SymbolicError::DimensionMismatch {
                expected: self.n_states(),
                got: x0.len(),
            });
        }
        if theta.len() != self.n_params() {
            return Err(SymbolicError::DimensionMismatch {
                expected: self.n_params(),
                got: theta.len(),
            });
        }
        let mut full = theta.to_vec();
        if !self.derived.is_empty() {
            full.extend(self.derived_program.eval(x0, theta, 0.0)?);
        }
        Ok(full)
    }

    /// Compiled right-hand side (n outputs).
    pub fn field(&self) -> &Program {
        &self.field
    }

    /// Right-hand side followed by its row-major state Jacobian
    /// (n + n² outputs).
    pub fn field_with_jacobian(&self) -> &Program {
        &self.field_with_jacobian
    }

    pub fn eval_rhs(&self, x: &[f64], full_params: &[f64], t: f64) -> Result<Vec<f64>, SymbolicError> {
        self.field.eval(x, full_params, t)
    }

    pub fn lie_table(&self, order: usize) -> Result<LieTable, SymbolicError> {
        LieTable::new(&self.rhs, order)
    }

    /// Renders an expression over this system's variable names.
    pub fn render(&self, e: &Expr) -> String {
        let params = self.all_param_names();
        let names = Names {
            states: &self.spec.states,
            params: &params,
        };
        e.display(&names).to_string()
    }

    /// Default number of uniformly spaced time points: a 0.01 s grid.
    pub fn default_time_points(&self) -> usize {
        (self.horizon() / 0.01).round() as usize + 1
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Names accepted by [`builtin_system`], in registry order.
pub const BUILTIN_NAMES: [&str; 9] = [
    "duffing",
    "pendulum",
    "lotka_volterra",
    "rikitake",
    "lorenz",
    "sir",
    "seir",
    "cdo",
    "mmek",
];

/// Specification of a builtin benchmark.
pub fn builtin_spec(name: &str) -> Result<SystemSpec, SystemError> {
    let half = [-0.5, 0.5];
    let unit = [0.0, 1.0];
    let spec = match name {
        "duffing" => SystemSpec {
            name: name.into(),
            states: strings(&["x", "y"]),
            params: strings(&["delta"]),
            rhs: strings(&["y", "x - x^3 - delta*y"]),
            state_bounds: vec![half; 2],
            param_bounds: vec![[0.1, 0.5]],
            constants: BTreeMap::new(),
            derived: vec![],
            horizon: 3.0,
        },
        "pendulum" => SystemSpec {
            name: name.into(),
            states: strings(&["theta", "omega"]),
            params: strings(&["b", "L"]),
            rhs: strings(&["omega", "-b*omega - g/L*sin(theta)"]),
            state_bounds: vec![half; 2],
            param_bounds: vec![[0.01, 0.5], [1.0, 10.0]],
            constants: BTreeMap::from([("g".to_string(), 9.81)]),
            derived: vec![],
            horizon: 3.0,
        },
        "lotka_volterra" => SystemSpec {
            name: name.into(),
            states: strings(&["x", "y"]),
            params: strings(&["alpha", "beta", "gamma", "delta"]),
            rhs: strings(&["alpha*x - beta*x*y", "-gamma*y + delta*x*y"]),
            state_bounds: vec![unit; 2],
            param_bounds: vec![[0.6, 1.0], [0.2, 0.5], [0.5, 1.0], [0.1, 0.4]],
            constants: BTreeMap::new(),
            derived: vec![],
            horizon: 3.0,
        },
        "rikitake" => SystemSpec {
            name: name.into(),
            states: strings(&["x", "y", "z"]),
            params: strings(&["mu", "h"]),
            rhs: strings(&["-mu*x + y*z", "-mu*y + x*(z - h)", "1 - x*y"]),
            state_bounds: vec![half; 3],
            param_bounds: vec![[0.3, 0.9]; 2],
            constants: BTreeMap::new(),
            derived: vec![],
            horizon: 3.0,
        },
        "lorenz" => SystemSpec {
            name: name.into(),
            states: strings(&["x", "y", "z"]),
            params: strings(&["sigma", "rho", "beta"]),
            rhs: strings(&["sigma*(y - x)", "x*(rho - z) - y", "x*y - beta*z"]),
            state_bounds: vec![unit; 3],
            param_bounds: vec![unit; 3],
            constants: BTreeMap::new(),
            derived: vec![],
            horizon: 3.0,
        },
        "sir" => SystemSpec {
            name: name.into(),
            states: strings(&["S", "I", "R"]),
            params: strings(&["beta", "gamma"]),
            rhs: strings(&["-I*S*beta/N", "I*S*beta/N - I*gamma", "I*gamma"]),
            state_bounds: vec![unit; 3],
            param_bounds: vec![unit; 2],
            constants: BTreeMap::new(),
            derived: vec![DerivedParam {
                name: "N".into(),
                expr: "S + I + R".into(),
            }],
            horizon: 3.0,
        },
        "seir" => SystemSpec {
            name: name.into(),
            states: strings(&["S", "E", "I", "R"]),
            params: strings(&["mu", "beta", "sigma", "gamma", "alpha", "omega"]),
            rhs: strings(&[
                "mu*(N - S) - beta*S*I/N + omega*R",
                "beta*S*I/N - (sigma + mu)*E",
                "sigma*E - (mu + gamma + alpha)*I",
                "gamma*I - (mu + omega)*R",
            ]),
            state_bounds: vec![[0.0, 0.99], [0.0, 0.99], [0.0, 0.5], [0.0, 0.5]],
            param_bounds: vec![
                [0.01, 0.02],
                [0.01, 0.02],
                [0.1, 0.2],
                [0.01, 0.2],
                [0.0, 0.5],
                [0.1, 1.0],
            ],
            constants: BTreeMap::new(),
            derived: vec![DerivedParam {
                name: "N".into(),
                expr: "S + E + I + R".into(),
            }],
            horizon: 3.0,
        },
        "cdo" => {
            let mut rhs = Vec::new();
            for i in 1..=4 {
                let next = i % 4 + 1;
                let prev = (i + 2) % 4 + 1;
                rhs.push(format!("y{i}"));
                rhs.push(format!(
                    "mu*(1 - x{i}^2)*y{i} - x{i} + delta*(x{next} - 2*x{i} + x{prev})"
                ));
            }
            SystemSpec {
                name: name.into(),
                states: (1..=4).flat_map(|i| [format!("x{i}"), format!("y{i}")]).collect(),
                params: strings(&["delta", "mu"]),
                rhs,
                state_bounds: vec![half; 8],
                param_bounds: vec![[0.1, 0.5]; 2],
                constants: BTreeMap::new(),
                derived: vec![],
                horizon: 2.0,
            }
        }
        "mmek" => {
            let mut rhs = vec!["V1/(Km + 1) - delta*x1".to_string()];
            for i in 2..=6 {
                let j = i - 1;
                rhs.push(format!("V{i}*x{j}/(Km + x{j}) - delta*x{i}"));
            }
            SystemSpec {
                name: name.into(),
                states: (1..=6).map(|i| format!("x{i}")).collect(),
                params: (1..=6).map(|i| format!("V{i}")).collect(),
                rhs,
                state_bounds: vec![[0.1, 0.5]; 6],
                param_bounds: vec![[0.5, 1.0]; 6],
                constants: BTreeMap::from([("Km".to_string(), 0.5), ("delta".to_string(), 0.1)]),
                derived: vec![],
                horizon: 2.0,
            }
        }
        other => return Err(SystemError::Unknown(other.to_string())),
    };
    Ok(spec)
}

pub fn builtin_system(name: &str) -> Result<OdeSystem, SystemError> {
    OdeSystem::from_spec(builtin_spec(name)?)
}

/// Resolves a builtin name, or else reads a system file at that path.
pub fn resolve_system(name_or_path: &str) -> Result<OdeSystem, SystemError> {
    match builtin_spec(name_or_path) {
        Ok(spec) => OdeSystem::from_spec(spec),
        Err(SystemError::Unknown(_)) if Path::new(name_or_path).is_file() => {
            OdeSystem::from_path(Path::new(name_or_path))
        }
        Err(e) => Err(e),
    }
}

/// One `(x₀, θ)` draw together with its derived parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDraw {
    pub x0: Vec<f64>,
    pub theta: Vec<f64>,
    /// `θ` followed by derived parameters.
    pub params: Vec<f64>,
}

/// Borrowed view of one collocation sample.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub x0: &'a [f64],
    pub theta: &'a [f64],
    pub params: &'a [f64],
    pub t: f64,
}

impl Sample<'_> {
    /// Network input `[x₀, θ, t]`.
    pub fn input_at(&self, t: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.x0.len() + self.theta.len() + 1);
        v.extend_from_slice(self.x0);
        v.extend_from_slice(self.theta);
        v.push(t);
        v
    }
}

/// Which independent random stream a draw comes from. Training and
/// evaluation sets built from the same seed never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawStream {
    Training,
    Evaluation,
}

impl DrawStream {
    fn id(self) -> u64 {
        match self {
            DrawStream::Training => 0,
            DrawStream::Evaluation => 1,
        }
    }
}

/// Draws `count` iid uniform `(x₀, θ)` pairs from `Ω × Θ`.
pub fn draw_initial_conditions(
    system: &OdeSystem,
    count: usize,
    seed: u64,
    stream: DrawStream,
) -> Result<Vec<InitialDraw>, SymbolicError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    let mut uniform = |[lo, hi]: [f64; 2]| lo + (hi - lo) * rng.random::<f64>();
    (0..count)
        .map(|_| {
            let x0: Vec<f64> = system.state_bounds().iter().map(|b| uniform(*b)).collect();
            let theta: Vec<f64> = system.param_bounds().iter().map(|b| uniform(*b)).collect();
            let params = system.full_params(&x0, &theta)?;
            Ok(InitialDraw { x0, theta, params })
        })
        .collect()
}

/// Uniform grid `{0, T/(n−1), …, T}`; the last point is exactly `T`.
pub fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2, "a time grid needs at least two points");
    let last = points - 1;
    (0..points)
        .map(|k| {
            if k == last {
                horizon
            } else {
                horizon * k as f64 / last as f64
            }
        })
        .collect()
}

/// `n_ic` draws each paired with every point of a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub draws: Vec<InitialDraw>,
    pub times: Vec<f64>,
    pub seed: u64,
}

impl CollocationSet {
    /// Total number of samples `n_ic · n_t`.
    pub fn len(&self) -> usize {
        self.draws.len() * self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_ic(&self) -> usize {
        self.draws.len()
    }

    pub fn n_t(&self) -> usize {
        self.times.len()
    }

    pub fn sample(&self, k: usize) -> Sample<'_> {
        let d = &self.draws[k / self.times.len()];
        Sample {
            x0: &d.x0,
            theta: &d.theta,
            params: &d.params,
            t: self.times[k % self.times.len()],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Sample<'_>> + '_ {
        (0..self.len()).map(move |k| self.sample(k))
    }

    /// Gathers the samples at `indices` (a minibatch).
    pub fn batch(&self, indices: &[usize]) -> Vec<Sample<'_>> {
        indices.iter().map(|&k| self.sample(k)).collect()
    }
}

pub fn sample_collocation(
    system: &OdeSystem,
    n_ic: usize,
    n_t: usize,
    seed: u64,
) -> Result<CollocationSet, SymbolicError> {
    assert!(n_ic >= 1, "need at least one initial-condition draw");
    Ok(CollocationSet {
        draws: draw_initial_conditions(system, n_ic, seed, DrawStream::Training)?,
        times: uniform_grid(system.horizon(), n_t),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duffing_registry_entry() {
        let s = builtin_system("duffing").unwrap();
        assert_eq!((s.n_states(), s.n_params()), (2, 1));
        assert_eq!(s.state_bounds(), &[[-0.5, 0.5], [-0.5, 0.5]]);
        assert_eq!(s.param_bounds(), &[[0.1, 0.5]]);
        assert_eq!(s.horizon(), 3.0);
        assert_eq!(s.render(&s.rhs()[0]), "y");
        assert_eq!(s.render(&s.rhs()[1]), "x - x^3 - delta*y");
    }

    #[test]
    fn dimensions_match_table_headers() {
        let expected = [
            ("duffing", 2, 1),
            ("pendulum", 2, 2),
            ("lotka_volterra", 2, 4),
            ("rikitake", 3, 2),
            ("lorenz", 3, 3),
            ("sir", 3, 2),
            ("seir", 4, 6),
            ("cdo", 8, 2),
            ("mmek", 6, 6),
        ];
        for (name, n, p) in expected {
            let s = builtin_system(name).unwrap();
            assert_eq!((s.n_states(), s.n_params()), (n, p), "{name}");
        }
    }

    #[test]
    fn sir_and_cdo_ranges() {
        let sir = builtin_system("sir").unwrap();
        assert_eq!(sir.param_bounds(), &[[0.0, 1.0], [0.0, 1.0]]);
        let cdo = builtin_system("cdo").unwrap();
        assert_eq!(cdo.param_bounds(), &[[0.1, 0.5], [0.1, 0.5]]);
        assert_eq!(cdo.horizon(), 2.0);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(builtin_system("vanderpol"), Err(SystemError::Unknown(_))));
    }

    #[test]
    fn grid_endpoints_exact() {
        let s = builtin_system("duffing").unwrap();
        let c = sample_collocation(&s, 1, 2, 3).unwrap();
        assert_eq!(c.times, vec![0.0, 3.0]);
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn samples_inside_box() {
        let s = builtin_system("duffing").unwrap();
        for seed in 0..5 {
            let c = sample_collocation(&s, 200, 5, seed).unwrap();
            for smp in c.iter() {
                assert!(smp.x0.iter().all(|v| (-0.5..=0.5).contains(v)));
                assert!((0.1..=0.5).contains(&smp.theta[0]));
                assert!((0.0..=3.0).contains(&smp.t));
            }
        }
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let s = builtin_system("seir").unwrap();
        let a = sample_collocation(&s, 50, 11, 42).unwrap();
        let b = sample_collocation(&s, 50, 11, 42).unwrap();
        let bits = |c: &CollocationSet| -> Vec<u64> {
            c.draws
                .iter()
                .flat_map(|d| d.x0.iter().chain(&d.params).map(|v| v.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a, b);
        let c = sample_collocation(&s, 50, 11, 43).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn evaluation_stream_is_disjoint() {
        let s = builtin_system("duffing").unwrap();
        let train = draw_initial_conditions(&s, 10, 7, DrawStream::Training).unwrap();
        let eval = draw_initial_conditions(&s, 10, 7, DrawStream::Evaluation).unwrap();
        assert!(train.iter().all(|d| !eval.contains(d)));
    }

    #[test]
    fn sir_population_is_initial_total() {
        let s = builtin_system("sir").unwrap();
        let p = s.full_params(&[0.5, 0.25, 0.125], &[0.81, 0.1]).unwrap();
        assert_eq!(p, vec![0.81, 0.1, 0.875]);
    }

    #[test]
    fn spec_validation() {
        let mut spec = builtin_spec("duffing").unwrap();
        spec.rhs.pop();
        assert!(matches!(OdeSystem::from_spec(spec), Err(SystemError::Invalid { .. })));
        let mut spec = builtin_spec("duffing").unwrap();
        spec.param_bounds = vec![[0.5, 0.1]];
        assert!(OdeSystem::from_spec(spec).is_err());
        let mut spec = builtin_spec("duffing").unwrap();
        spec.horizon = 0.0;
        assert!(OdeSystem::from_spec(spec).is_err());
        let mut spec = builtin_spec("duffing").unwrap();
        spec.rhs[1] = "x - gamma".into();
        assert!(matches!(
            OdeSystem::from_spec(spec),
            Err(SystemError::Expression { .. })
        ));
    }

    #[test]
    fn toml_and_json_specs_agree() {
        let spec = builtin_spec("mmek").unwrap();
        let toml_text = toml::to_string(&spec).unwrap();
        let json_text = serde_json::to_string(&spec).unwrap();
        assert_eq!(SystemSpec::from_toml(&toml_text).unwrap(), spec);
        assert_eq!(SystemSpec::from_json(&json_text).unwrap(), spec);
    }
}
