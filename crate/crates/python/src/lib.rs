//! Python bindings: systems, Lie derivatives, the reference solver, training
//! and evaluation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tmpinn::evaluation::{evaluate, EvalOptions, MaeMode};
use tmpinn::losses::{LossError, TaylorSurrogate as CoreSurrogate};
use tmpinn::systems::{resolve_system, OdeSystem, BUILTIN_NAMES};
use tmpinn::training::{save_run, train_with_system, Method, Model, ModelFile, TrainConfig, TrainError, TrainedRun};

create_exception!(_tmpinn, TrainingDiverged, PyRuntimeError);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn train_err(e: TrainError) -> PyErr {
    match e {
        TrainError::Diverged { .. } => TrainingDiverged::new_err(e.to_string()),
        TrainError::Io(_) => PyIOError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn loss_err(e: LossError) -> PyErr {
    value_err(e)
}

/// A parametric ODE family, builtin or loaded from a TOML/JSON system file.
#[pyclass(module = "tmpinn", name = "System", skip_from_py_object)]
#[derive(Clone)]
struct PySystem {
    inner: OdeSystem,
}

#[pymethods]
impl PySystem {
    #[new]
    fn new(name_or_path: &str) -> PyResult<Self> {
        Ok(PySystem {
            inner: resolve_system(name_or_path).map_err(value_err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    #[getter]
    fn state_names(&self) -> Vec<String> {
        self.inner.state_names().to_vec()
    }

    /// Right-hand side at `x` with sampled parameters `theta`.
    #[pyo3(signature = (x, theta, t=0.0))]
    fn rhs(&self, x: Vec<f64>, theta: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        let p = self.inner.full_params(&x, &theta).map_err(value_err)?;
        self.inner.eval_rhs(&x, &p, t).map_err(value_err)
    }

    /// Lie derivatives f_1 … f_{order+1} rendered as strings, one list per order.
    fn derive(&self, order: usize) -> PyResult<Vec<Vec<String>>> {
        let table = self.inner.lie_table(order).map_err(value_err)?;
        Ok(table
            .entries()
            .iter()
            .map(|v| v.iter().map(|e| self.inner.render(e)).collect())
            .collect())
    }

    /// Values of f_1 … f_{order+1} at `(x, theta, t)`.
    #[pyo3(signature = (order, x, theta, t=0.0))]
    fn lie_values(&self, order: usize, x: Vec<f64>, theta: Vec<f64>, t: f64) -> PyResult<Vec<Vec<f64>>> {
        let table = self.inner.lie_table(order).map_err(value_err)?;
        let p = self.inner.full_params(&x, &theta).map_err(value_err)?;
        table
            .entries()
            .iter()
            .map(|v| tmpinn::symbolic::eval_vec(v, &x, &p, t).map_err(value_err))
            .collect()
    }

    /// RK4 trajectory sampled at `times` (which must start at 0).
    #[pyo3(signature = (x0, theta, times, step=tmpinn::solver::DEFAULT_STEP))]
    fn integrate(&self, x0: Vec<f64>, theta: Vec<f64>, times: Vec<f64>, step: f64) -> PyResult<Vec<Vec<f64>>> {
        let rec = tmpinn::solver::integrate(&self.inner, &x0, &theta, &times, step).map_err(value_err)?;
        Ok(rec.states)
    }

    fn __repr__(&self) -> String {
        format!("System({:?}, n_states={}, n_params={})", self.inner.name(), self.inner.n_states(), self.inner.n_params())
    }
}

/// Untrained or hand-built Taylor surrogate, for inspecting the construction.
#[pyclass(module = "tmpinn", name = "TaylorSurrogate")]
struct PyTaylorSurrogate {
    inner: CoreSurrogate,
}

#[pymethods]
impl PyTaylorSurrogate {
    #[new]
    #[pyo3(signature = (system, order=3, seed=0))]
    fn new(system: &PySystem, order: usize, seed: u64) -> PyResult<Self> {
        Ok(PyTaylorSurrogate {
            inner: CoreSurrogate::new(&system.inner, order, seed).map_err(loss_err)?,
        })
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn eval(&self, x0: Vec<f64>, theta: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        self.inner.eval(&x0, &theta, t).map_err(loss_err)
    }

    fn remainder(&self, x0: Vec<f64>, theta: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        self.inner.remainder(&x0, &theta, t).map_err(loss_err)
    }

    /// Value and first three time derivatives per state at `t`.
    fn jets(&self, x0: Vec<f64>, theta: Vec<f64>, t: f64) -> PyResult<Vec<[f64; 4]>> {
        let jets = self.inner.eval_jets(&x0, &theta, t).map_err(loss_err)?;
        Ok(jets.iter().map(|j| [j.value, j.d1, j.d2, j.d3]).collect())
    }
}

/// A trained model together with its system and, when trained in this
/// process, its loss history.
#[pyclass(module = "tmpinn", name = "TrainedModel")]
struct PyTrainedModel {
    system: OdeSystem,
    model: Model,
    method: Method,
    run: Option<TrainedRun>,
}

#[pymethods]
impl PyTrainedModel {
    /// Loads `model.json` from a run directory or an explicit file path.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let path = if path.is_dir() { path.join(tmpinn::training::MODEL_FILE) } else { path };
        let file = ModelFile::load(&path).map_err(train_err)?;
        let (system, model) = file.instantiate().map_err(train_err)?;
        Ok(PyTrainedModel {
            system,
            model,
            method: file.method,
            run: None,
        })
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.method.name()
    }

    #[getter]
    fn system(&self) -> PySystem {
        PySystem {
            inner: self.system.clone(),
        }
    }

    /// Total loss per epoch; empty for loaded models.
    #[getter]
    fn history(&self) -> Vec<f64> {
        self.run
            .as_ref()
            .map(|r| r.history.epochs.iter().map(|e| e.total).collect())
            .unwrap_or_default()
    }

    /// States at each of `times`, shape `[len(times)][n_states]`.
    fn predict(&self, x0: Vec<f64>, theta: Vec<f64>, times: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.model.predict(&self.system, &x0, &theta, &times).map_err(loss_err)
    }

    /// `(horizon, mae, rmse)` per horizon against RK4 over fresh evaluation draws.
    #[pyo3(signature = (horizons=vec![1.0, 2.0, 3.0], n_eval=100, seed=0, endpoint=false))]
    fn evaluate(&self, horizons: Vec<f64>, n_eval: usize, seed: u64, endpoint: bool) -> PyResult<Vec<(f64, f64, f64)>> {
        let opts = EvalOptions {
            n_eval,
            horizons,
            seed,
            mode: if endpoint { MaeMode::Endpoint } else { MaeMode::Windowed },
        };
        let m = evaluate(&self.model, &self.system, &opts).map_err(value_err)?;
        Ok(m.horizons.iter().map(|h| (h.horizon, h.mae, h.rmse)).collect())
    }

    /// Writes the run directory (model, history, config, manifest).
    fn save(&mut self, dir: PathBuf) -> PyResult<Vec<String>> {
        let run = self
            .run
            .as_mut()
            .ok_or_else(|| PyRuntimeError::new_err("only models trained in this session can be saved"))?;
        let started = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let files = save_run(run, &dir, started).map_err(train_err)?;
        Ok(files.iter().map(|p| p.display().to_string()).collect())
    }
}

/// Builtin systems as `(name, n_states, n_params)`.
#[pyfunction]
fn list_systems() -> PyResult<Vec<(String, usize, usize)>> {
    BUILTIN_NAMES
        .iter()
        .map(|n| {
            let s = resolve_system(n).map_err(value_err)?;
            Ok((n.to_string(), s.n_states(), s.n_params()))
        })
        .collect()
}

/// Trains from a TOML configuration string. Keyword overrides, if given,
/// replace the corresponding fields (`desk=True` starts from the desk profile).
#[pyfunction]
#[pyo3(signature = (config=None, *, system=None, method=None, desk=false, epochs=None, seed=None))]
fn train(
    py: Python<'_>,
    config: Option<&str>,
    system: Option<&str>,
    method: Option<&str>,
    desk: bool,
    epochs: Option<usize>,
    seed: Option<u64>,
) -> PyResult<PyTrainedModel> {
    let mut cfg = match (config, system, method) {
        (Some(text), _, _) => TrainConfig::from_toml(text).map_err(train_err)?,
        (None, Some(s), Some(m)) => {
            let m: Method = m.parse().map_err(value_err)?;
            if desk { TrainConfig::desk(s, m) } else { TrainConfig::new(s, m) }
        }
        _ => return Err(PyValueError::new_err("pass a TOML config or both system= and method=")),
    };
    if let Some(e) = epochs {
        cfg.epochs = Some(e);
    }
    if let Some(s) = seed {
        cfg.seeds.data = s;
        cfg.seeds.init = s + 1;
        cfg.seeds.shuffle = s + 2;
    }
    let sys = resolve_system(&cfg.system).map_err(value_err)?;
    let run = py.detach(|| train_with_system(&cfg, &sys)).map_err(train_err)?;
    Ok(PyTrainedModel {
        system: run.system.clone(),
        model: run.model.clone(),
        method: cfg.method,
        run: Some(run),
    })
}

/// Final-epoch loss components of a history, keyed by component name.
#[pyfunction]
fn last_losses(model: &PyTrainedModel) -> BTreeMap<String, f64> {
    model
        .run
        .as_ref()
        .and_then(|r| r.history.last())
        .map(|e| e.components.iter().map(|(c, v)| (c.name().to_string(), *v)).collect())
        .unwrap_or_default()
}

#[pymodule]
fn _tmpinn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("TrainingDiverged", m.py().get_type::<TrainingDiverged>())?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyTaylorSurrogate>()?;
    m.add_class::<PyTrainedModel>()?;
    m.add_function(wrap_pyfunction!(list_systems, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(last_losses, m)?)?;
    Ok(())
}
