//! Training objectives and the Taylor-model surrogate.
//!
//! The surrogate is
//!
//! ```text
//! φ(x₀, θ, t) = x₀ + Σ_{j=1..m} tʲ/j! · f_j(x₀, θ, 0) + t^{m+1}/(m+1)! · R(x₀, θ, t)
//! ```
//!
//! where `f_j` are the Lie derivatives of the vector field and `R` is a set
//! of `n` scalar remainder networks. Every objective here returns a
//! [`LossBreakdown`] and, on request, the exact gradient with respect to the
//! network parameters (closed-form backpropagation through
//! [`TimeJetTrace`]).

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{GradBuffer, Jet3};
use crate::network::{init_network, Mlp, NetworkError, TimeJetTrace};
use crate::symbolic::{LieTable, Program, SymbolicError, VecExpr};
use crate::systems::{OdeSystem, Sample};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("loss component {component} is not finite ({value})")]
    NonFinite { component: &'static str, value: f64 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("order {0} is not supported here")]
    Order(usize),
    #[error("quadrature needs at least 2 points, got {0}")]
    QuadraturePoints(usize),
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Loss terms, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LossComponent {
    Initial,
    Residual,
    Second,
    Third,
    RemainderResidual,
    RemainderInitial,
}

impl LossComponent {
    pub const ALL: [LossComponent; 6] = [
        LossComponent::Initial,
        LossComponent::Residual,
        LossComponent::Second,
        LossComponent::Third,
        LossComponent::RemainderResidual,
        LossComponent::RemainderInitial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossComponent::Initial => "L_i",
            LossComponent::Residual => "L_g",
            LossComponent::Second => "L_2",
            LossComponent::Third => "L_3",
            LossComponent::RemainderResidual => "L_rg",
            LossComponent::RemainderInitial => "L_ri",
        }
    }

    /// Residual term for time-derivative order `k` of a PINN-style loss.
    fn derivative(k: usize) -> LossComponent {
        match k {
            1 => LossComponent::Residual,
            2 => LossComponent::Second,
            3 => LossComponent::Third,
            _ => unreachable!("derivative order checked at construction"),
        }
    }
}

/// Weights of each loss term. All default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub initial: f64,
    pub residual: f64,
    pub second: f64,
    pub third: f64,
    pub remainder_residual: f64,
    pub remainder_initial: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            initial: 1.0,
            residual: 1.0,
            second: 1.0,
            third: 1.0,
            remainder_residual: 1.0,
            remainder_initial: 1.0,
        }
    }
}

impl LossWeights {
    pub fn get(&self, c: LossComponent) -> f64 {
        match c {
            LossComponent::Initial => self.initial,
            LossComponent::Residual => self.residual,
            LossComponent::Second => self.second,
            LossComponent::Third => self.third,
            LossComponent::RemainderResidual => self.remainder_residual,
            LossComponent::RemainderInitial => self.remainder_initial,
        }
    }
}

/// Loss value split by term. Terms not used by an objective are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub components: BTreeMap<LossComponent, f64>,
    pub weights: BTreeMap<LossComponent, f64>,
}

impl LossBreakdown {
    fn assemble(parts: &[(LossComponent, f64)], weights: &LossWeights) -> Result<Self, LossError> {
        let mut components = BTreeMap::new();
        let mut used = BTreeMap::new();
        let mut total = 0.0;
        for &(c, v) in parts {
            if !v.is_finite() {
                return Err(LossError::NonFinite {
                    component: c.name(),
                    value: v,
                });
            }
            let w = weights.get(c);
            total += w * v;
            components.insert(c, v);
            used.insert(c, w);
        }
        Ok(LossBreakdown {
            total,
            components,
            weights: used,
        })
    }

    pub fn get(&self, c: LossComponent) -> Option<f64> {
        self.components.get(&c).copied()
    }
}

/// Compiles `v` followed by its row-major state Jacobian.
fn compile_with_jacobian(v: &VecExpr, n_states: usize) -> Program {
    let mut all: Vec<_> = v.iter().cloned().collect();
    all.extend(v.jacobian(n_states).into_iter().map(|e| e.simplify()));
    Program::compile(&all)
}

/// Reusable evaluation buffers for a program returning values and Jacobian.
struct JacobianEval<'p> {
    program: &'p Program,
    n: usize,
    scratch: Vec<f64>,
    out: Vec<f64>,
}

impl<'p> JacobianEval<'p> {
    fn new(program: &'p Program, n: usize) -> Self {
        JacobianEval {
            program,
            n,
            scratch: Vec::new(),
            out: vec![0.0; n + n * n],
        }
    }

    fn eval(&mut self, x: &[f64], params: &[f64], t: f64) -> Result<(), SymbolicError> {
        self.program.eval_into(x, params, t, &mut self.scratch, &mut self.out)
    }

    fn value(&self, i: usize) -> f64 {
        self.out[i]
    }

    /// `∂g_i/∂x_l`.
    fn jac(&self, i: usize, l: usize) -> f64 {
        self.out[self.n + i * self.n + l]
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `t^p / p!`.
fn scaled_power(t: f64, p: usize) -> f64 {
    t.powi(p as i32) / factorial(p)
}

/// Taylor coefficients `f_1 … f_{m+1}` at `(x₀, θ, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorCoefficients {
    order: usize,
    n: usize,
    values: Vec<f64>,
}

impl TaylorCoefficients {
    pub fn from_values(order: usize, n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), (order + 1) * n, "coefficient layout");
        TaylorCoefficients { order, n, values }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `f_j(x₀, θ, 0)` for `1 ≤ j ≤ m + 1`.
    pub fn get(&self, j: usize) -> &[f64] {
        assert!(j >= 1 && j <= self.order + 1, "coefficient index {j} out of range");
        &self.values[(j - 1) * self.n..j * self.n]
    }

    /// `x₀ + Σ_{j=1..m} tʲ/j! · f_j`.
    pub fn polynomial(&self, x0: &[f64], t: f64) -> Vec<f64> {
        let mut p = x0.to_vec();
        for j in 1..=self.order {
            let s = scaled_power(t, j);
            for (pi, c) in p.iter_mut().zip(self.get(j)) {
                *pi += s * c;
            }
        }
        p
    }

    /// `Σ_{j=1..m} t^{j−1}/(j−1)! · f_j`, the time derivative of the polynomial.
    pub fn polynomial_rate(&self, t: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.n];
        for j in 1..=self.order {
            let s = scaled_power(t, j - 1);
            for (pi, c) in p.iter_mut().zip(self.get(j)) {
                *pi += s * c;
            }
        }
        p
    }

    /// Polynomial and its first three time derivatives.
    pub fn polynomial_jets(&self, x0: &[f64], t: f64) -> Vec<Jet3> {
        (0..self.n)
            .map(|i| {
                let mut d = [x0[i], 0.0, 0.0, 0.0];
                for (k, dk) in d.iter_mut().enumerate() {
                    for j in k.max(1)..=self.order {
                        *dk += scaled_power(t, j - k) * self.get(j)[i];
                    }
                }
                Jet3::new(d[0], d[1], d[2], d[3])
            })
            .collect()
    }

    /// The surrogate state for remainder values `r`.
    pub fn assemble(&self, x0: &[f64], r: &[f64], t: f64) -> Vec<f64> {
        let s = scaled_power(t, self.order + 1);
        let mut p = self.polynomial(x0, t);
        for (pi, ri) in p.iter_mut().zip(r) {
            *pi += s * ri;
        }
        p
    }

    /// The remainder that makes the surrogate reproduce `state` at `t > 0`:
    /// `(m+1)!/t^{m+1} · (state − polynomial)`. At `t = 0` this is the limit
    /// `f_{m+1}(x₀, θ, 0)`.
    pub fn exact_remainder(&self, x0: &[f64], state: &[f64], t: f64) -> Vec<f64> {
        if t == 0.0 {
            return self.get(self.order + 1).to_vec();
        }
        let s = scaled_power(t, self.order + 1);
        self.polynomial(x0, t)
            .iter()
            .zip(state)
            .map(|(p, x)| (x - p) / s)
            .collect()
    }
}

/// Taylor polynomial with learned remainder.
#[derive(Debug, Clone)]
pub struct TaylorSurrogate {
    system: OdeSystem,
    table: LieTable,
    coefficients: Program,
    top_with_jacobian: OnceLock<Program>,
    nets: Vec<Mlp>,
}

impl TaylorSurrogate {
    /// `order` is the Taylor order `m` (1..=4). Network `i` is initialized
    /// with seed `seed + i`.
    pub fn new(system: &OdeSystem, order: usize, seed: u64) -> Result<Self, LossError> {
        let input = system.n_states() + system.n_params() + 1;
        let nets = (0..system.n_states())
            .map(|i| init_network(input, 1, seed.wrapping_add(i as u64)))
            .collect();
        Self::with_networks(system, order, nets)
    }

    pub fn with_networks(system: &OdeSystem, order: usize, nets: Vec<Mlp>) -> Result<Self, LossError> {
        if !(1..=4).contains(&order) {
            return Err(LossError::Order(order));
        }
        let n = system.n_states();
        let input = n + system.n_params() + 1;
        if nets.len() != n || nets.iter().any(|m| m.input_dim() != input || m.output_dim() != 1) {
            return Err(LossError::Shape(format!(
                "expected {n} remainder networks with {input} inputs and 1 output"
            )));
        }
        let table = system.lie_table(order)?;
        let coefficients = table.compile();
        Ok(TaylorSurrogate {
            system: system.clone(),
            table,
            coefficients,
            top_with_jacobian: OnceLock::new(),
            nets,
        })
    }

    pub fn system(&self) -> &OdeSystem {
        &self.system
    }

    pub fn order(&self) -> usize {
        self.table.order()
    }

    pub fn table(&self) -> &LieTable {
        &self.table
    }

    pub fn networks(&self) -> &[Mlp] {
        &self.nets
    }

    pub fn param_count(&self) -> usize {
        self.nets.iter().map(Mlp::param_count).sum()
    }

    /// All network parameters, concatenated in state order.
    pub fn params(&self) -> Vec<f64> {
        self.nets.iter().flat_map(|m| m.params().iter().copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count(), "parameter length");
        let mut offset = 0;
        for net in &mut self.nets {
            let k = net.param_count();
            net.params_mut().copy_from_slice(&p[offset..offset + k]);
            offset += k;
        }
    }

    fn top_with_jacobian(&self) -> &Program {
        self.top_with_jacobian.get_or_init(|| {
            compile_with_jacobian(self.table.entry(self.order() + 1), self.system.n_states())
        })
    }

    /// `f_1 … f_{m+1}` at `(x₀, θ, t)`; `params` is the full parameter vector.
    pub fn coefficients_at(&self, x0: &[f64], params: &[f64], t: f64) -> Result<TaylorCoefficients, LossError> {
        let values = self.coefficients.eval(x0, params, t)?;
        Ok(TaylorCoefficients::from_values(self.order(), self.system.n_states(), values))
    }

    pub fn coefficients(&self, x0: &[f64], params: &[f64]) -> Result<TaylorCoefficients, LossError> {
        self.coefficients_at(x0, params, 0.0)
    }

    fn input(x0: &[f64], theta: &[f64], t: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(x0.len() + theta.len() + 1);
        v.extend_from_slice(x0);
        v.extend_from_slice(theta);
        v.push(t);
        v
    }

    /// `R(x₀, θ, t)`.
    pub fn remainder(&self, x0: &[f64], theta: &[f64], t: f64) -> Result<Vec<f64>, LossError> {
        let input = Self::input(x0, theta, t);
        let mut r = Vec::with_capacity(self.nets.len());
        for net in &self.nets {
            r.push(net.forward(&input)?[0]);
        }
        Ok(r)
    }

    /// Surrogate state at `t`.
    pub fn eval(&self, x0: &[f64], theta: &[f64], t: f64) -> Result<Vec<f64>, LossError> {
        let params = self.system.full_params(x0, theta)?;
        let c = self.coefficients(x0, &params)?;
        self.eval_with(&c, x0, theta, t)
    }

    /// Surrogate state at `t` with precomputed coefficients.
    pub fn eval_with(&self, c: &TaylorCoefficients, x0: &[f64], theta: &[f64], t: f64) -> Result<Vec<f64>, LossError> {
        let r = self.remainder(x0, theta, t)?;
        Ok(c.assemble(x0, &r, t))
    }

    /// Surrogate state and its first three time derivatives at `t`.
    pub fn eval_jets(&self, x0: &[f64], theta: &[f64], t: f64) -> Result<Vec<Jet3>, LossError> {
        let params = self.system.full_params(x0, theta)?;
        let c = self.coefficients(x0, &params)?;
        let p = self.order() + 1;
        let scale: [f64; 4] =
            std::array::from_fn(|k| if k <= p { scaled_power(t, p - k) } else { 0.0 });
        let scale = Jet3::new(scale[0], scale[1], scale[2], scale[3]);
        let input = Self::input(x0, theta, t);
        let poly = c.polynomial_jets(x0, t);
        let mut out = Vec::with_capacity(poly.len());
        for (net, pj) in self.nets.iter().zip(poly) {
            let r = net.time_jet(&input, 3)?[0];
            out.push(pj + scale * r);
        }
        Ok(out)
    }
}

/// Free-function form of [`TaylorSurrogate::eval`].
pub fn surrogate_eval(s: &TaylorSurrogate, x0: &[f64], theta: &[f64], t: f64) -> Result<Vec<f64>, LossError> {
    s.eval(x0, theta, t)
}

/// Trapezoidal estimate of `(m+1) ∫₀¹ (1−α)^m g(α) dα` on `K` panels.
pub fn remainder_quadrature<G>(order: usize, points: usize, mut g: G) -> Result<Vec<f64>, LossError>
where
    G: FnMut(f64) -> Result<Vec<f64>, LossError>,
{
    if points < 2 {
        return Err(LossError::QuadraturePoints(points));
    }
    let mut acc: Option<Vec<f64>> = None;
    for k in 0..=points {
        let alpha = k as f64 / points as f64;
        let w = if k == 0 || k == points { 0.5 } else { 1.0 };
        let factor = w * (1.0 - alpha).powi(order as i32);
        let v = g(alpha)?;
        let acc = acc.get_or_insert_with(|| vec![0.0; v.len()]);
        for (a, gi) in acc.iter_mut().zip(v) {
            *a += factor * gi;
        }
    }
    let scale = (order + 1) as f64 / points as f64;
    Ok(acc.unwrap_or_default().into_iter().map(|a| a * scale).collect())
}

/// PINN (`order = 1`) and higher-order PINN (`order` 2 or 3) objectives.
#[derive(Debug, Clone)]
pub struct PinnObjective {
    n: usize,
    order: usize,
    weights: LossWeights,
    // terms[k - 1] evaluates f_k and its state Jacobian
    terms: Vec<Program>,
}

impl PinnObjective {
    pub fn pinn(system: &OdeSystem, weights: LossWeights) -> Self {
        PinnObjective {
            n: system.n_states(),
            order: 1,
            weights,
            terms: vec![system.field_with_jacobian().clone()],
        }
    }

    pub fn higher_order(system: &OdeSystem, order: usize, weights: LossWeights) -> Result<Self, LossError> {
        if !(2..=3).contains(&order) {
            return Err(LossError::Order(order));
        }
        let n = system.n_states();
        let table = system.lie_table(order)?;
        let mut terms = vec![system.field_with_jacobian().clone()];
        for k in 2..=order {
            terms.push(compile_with_jacobian(table.entry(k), n));
        }
        Ok(PinnObjective {
            n,
            order,
            weights,
            terms,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn loss(&self, net: &Mlp, batch: &[Sample<'_>]) -> Result<LossBreakdown, LossError> {
        self.run(net, batch, None)
    }

    pub fn loss_and_gradient(&self, net: &Mlp, batch: &[Sample<'_>]) -> Result<(LossBreakdown, GradBuffer), LossError> {
        let mut g = GradBuffer::zeros(net.param_count());
        let b = self.run(net, batch, Some(&mut g))?;
        Ok((b, g))
    }

    fn run(&self, net: &Mlp, batch: &[Sample<'_>], mut grad: Option<&mut GradBuffer>) -> Result<LossBreakdown, LossError> {
        if batch.is_empty() {
            return Err(LossError::EmptyBatch);
        }
        if net.output_dim() != self.n {
            return Err(LossError::Shape(format!(
                "network has {} outputs, system has {} states",
                net.output_dim(),
                self.n
            )));
        }
        let n = self.n;
        let inv_b = 1.0 / batch.len() as f64;
        let mut evals: Vec<JacobianEval<'_>> = self.terms.iter().map(|p| JacobianEval::new(p, n)).collect();
        let mut sums = vec![0.0; self.order + 1];
        let mut upstream = vec![[0.0; 4]; n];
        for s in batch {
            // Initial-condition term.
            let trace0 = net.trace(&s.input_at(0.0))?;
            for (i, up) in upstream.iter_mut().enumerate() {
                let e = trace0.output(i, 0) - s.x0[i];
                sums[0] += e * e;
                *up = [2.0 * self.weights.initial * inv_b * e, 0.0, 0.0, 0.0];
            }
            if let Some(g) = grad.as_deref_mut() {
                trace0.backward(&upstream, g, 0);
            }

            // Residuals of d^k φ/dt^k against f_k(φ).
            let trace = net.time_jet_trace(&s.input_at(s.t), self.order)?;
            let phi = trace.values();
            upstream.iter_mut().for_each(|u| *u = [0.0; 4]);
            for k in 1..=self.order {
                let ev = &mut evals[k - 1];
                ev.eval(&phi, s.params, s.t)?;
                let c = 2.0 * self.weights.get(LossComponent::derivative(k)) * inv_b;
                for i in 0..n {
                    let r = trace.output(i, k) - ev.value(i);
                    sums[k] += r * r;
                    upstream[i][k] += c * r;
                    for (l, up) in upstream.iter_mut().enumerate() {
                        up[0] -= c * r * ev.jac(i, l);
                    }
                }
            }
            if let Some(g) = grad.as_deref_mut() {
                trace.backward(&upstream, g, 0);
            }
        }
        let mut parts = vec![(LossComponent::Initial, sums[0] * inv_b)];
        for k in 1..=self.order {
            parts.push((LossComponent::derivative(k), sums[k] * inv_b));
        }
        LossBreakdown::assemble(&parts, &self.weights)
    }
}

/// How the remainder network is supervised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemainderTarget {
    /// Residual of the remainder ODE (needs `Ṙ`).
    Derivative,
    /// Trapezoidal estimate of the integral remainder on `points` panels.
    Quadrature { points: usize },
}

/// Taylor-model objectives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorObjective {
    pub target: RemainderTarget,
    pub weights: LossWeights,
    /// Compare `R` with `f_{m+1}` at the sample time instead of at `t = 0`.
    pub ri_at_batch_time: bool,
}

impl TaylorObjective {
    pub fn tm_pinn(weights: LossWeights) -> Self {
        TaylorObjective {
            target: RemainderTarget::Derivative,
            weights,
            ri_at_batch_time: false,
        }
    }

    pub fn tm_nq(weights: LossWeights, points: usize) -> Result<Self, LossError> {
        if points < 2 {
            return Err(LossError::QuadraturePoints(points));
        }
        Ok(TaylorObjective {
            target: RemainderTarget::Quadrature { points },
            weights,
            ri_at_batch_time: false,
        })
    }

    pub fn loss(&self, s: &TaylorSurrogate, batch: &[Sample<'_>]) -> Result<LossBreakdown, LossError> {
        self.run(s, batch, None)
    }

    pub fn loss_and_gradient(
        &self,
        s: &TaylorSurrogate,
        batch: &[Sample<'_>],
    ) -> Result<(LossBreakdown, GradBuffer), LossError> {
        let mut g = GradBuffer::zeros(s.param_count());
        let b = self.run(s, batch, Some(&mut g))?;
        Ok((b, g))
    }

    fn run(
        &self,
        s: &TaylorSurrogate,
        batch: &[Sample<'_>],
        mut grad: Option<&mut GradBuffer>,
    ) -> Result<LossBreakdown, LossError> {
        if batch.is_empty() {
            return Err(LossError::EmptyBatch);
        }
        let n = s.system.n_states();
        let m = s.order();
        let inv_b = 1.0 / batch.len() as f64;
        let offsets: Vec<usize> = s
            .nets
            .iter()
            .scan(0, |acc, net| {
                let o = *acc;
                *acc += net.param_count();
                Some(o)
            })
            .collect();
        let mut field = JacobianEval::new(s.system.field_with_jacobian(), n);
        let mut top = match self.target {
            RemainderTarget::Quadrature { .. } => Some(JacobianEval::new(s.top_with_jacobian(), n)),
            RemainderTarget::Derivative => None,
        };
        let (mut sum_rg, mut sum_ri) = (0.0, 0.0);
        let c_rg = 2.0 * self.weights.remainder_residual * inv_b;
        let c_ri = 2.0 * self.weights.remainder_initial * inv_b;
        let jet_order = match self.target {
            RemainderTarget::Derivative => 1,
            RemainderTarget::Quadrature { .. } => 0,
        };

        for sample in batch {
            let coeffs = s.coefficients(sample.x0, sample.params)?;
            let input = sample.input_at(sample.t);
            let traces: Vec<TimeJetTrace<'_>> = s
                .nets
                .iter()
                .map(|net| net.time_jet_trace(&input, jet_order))
                .collect::<Result<_, _>>()?;
            let r: Vec<f64> = traces.iter().map(|tr| tr.output(0, 0)).collect();
            let mut up_t = vec![[0.0; 4]; n];

            match self.target {
                RemainderTarget::Derivative => {
                    let t = sample.t;
                    let s1 = scaled_power(t, m + 1);
                    let s0 = scaled_power(t, m);
                    let z = coeffs.assemble(sample.x0, &r, t);
                    let gl = coeffs.polynomial_rate(t);
                    field.eval(&z, sample.params, t)?;
                    let rho: Vec<f64> = (0..n)
                        .map(|i| gl[i] + s0 * r[i] + s1 * traces[i].output(0, 1) - field.value(i))
                        .collect();
                    for i in 0..n {
                        sum_rg += rho[i] * rho[i];
                        let back: f64 = (0..n).map(|l| rho[l] * field.jac(l, i)).sum();
                        up_t[i][1] = c_rg * rho[i] * s1;
                        up_t[i][0] = c_rg * (rho[i] * s0 - s1 * back);
                    }
                }
                RemainderTarget::Quadrature { points } => {
                    let top = top.as_mut().expect("quadrature evaluator");
                    let t = sample.t;
                    let kf = points as f64;
                    let lead = (m + 1) as f64 / kf;
                    // Interior nodes carry both value and gradient; the α = 0
                    // node sits at x₀ and the α = 1 node has weight (1−1)^m = 0.
                    let mut target = vec![0.0; n];
                    top.eval(sample.x0, sample.params, 0.0)?;
                    for (i, v) in target.iter_mut().enumerate() {
                        *v += lead * 0.5 * top.value(i);
                    }
                    let mut nodes = Vec::with_capacity(points - 1);
                    for k in 1..points {
                        let alpha = k as f64 / kf;
                        let tau = alpha * t;
                        let w = lead * (1.0 - alpha).powi(m as i32);
                        let node_input = sample.input_at(tau);
                        let node_traces: Vec<TimeJetTrace<'_>> = s
                            .nets
                            .iter()
                            .map(|net| net.trace(&node_input))
                            .collect::<Result<_, _>>()?;
                        let rn: Vec<f64> = node_traces.iter().map(|tr| tr.output(0, 0)).collect();
                        let z = coeffs.assemble(sample.x0, &rn, tau);
                        top.eval(&z, sample.params, tau)?;
                        for (i, v) in target.iter_mut().enumerate() {
                            *v += w * top.value(i);
                        }
                        // ∂R̂_i/∂R_l(τ) = w · J_il · τ^{m+1}/(m+1)!
                        let st = scaled_power(tau, m + 1);
                        let jac: Vec<f64> = (0..n * n).map(|q| w * st * top.jac(q / n, q % n)).collect();
                        nodes.push((node_traces, jac));
                    }
                    let d: Vec<f64> = (0..n).map(|i| r[i] - target[i]).collect();
                    for i in 0..n {
                        sum_rg += d[i] * d[i];
                        up_t[i][0] = c_rg * d[i];
                    }
                    if let Some(g) = grad.as_deref_mut() {
                        for (node_traces, jac) in &nodes {
                            for (l, tr) in node_traces.iter().enumerate() {
                                let back: f64 = (0..n).map(|i| d[i] * jac[i * n + l]).sum();
                                tr.backward(&[[-c_rg * back, 0.0, 0.0, 0.0]], g, offsets[l]);
                            }
                        }
                    }
                }
            }

            // Remainder initial term.
            if self.ri_at_batch_time {
                let at_t = s.coefficients_at(sample.x0, sample.params, sample.t)?;
                let fm = at_t.get(m + 1);
                for i in 0..n {
                    let e = fm[i] - r[i];
                    sum_ri += e * e;
                    up_t[i][0] -= c_ri * e;
                }
            } else {
                let fm = coeffs.get(m + 1);
                let input0 = sample.input_at(0.0);
                for (i, net) in s.nets.iter().enumerate() {
                    let tr = net.trace(&input0)?;
                    let e = fm[i] - tr.output(0, 0);
                    sum_ri += e * e;
                    if let Some(g) = grad.as_deref_mut() {
                        tr.backward(&[[-c_ri * e, 0.0, 0.0, 0.0]], g, offsets[i]);
                    }
                }
            }

            if let Some(g) = grad.as_deref_mut() {
                for (i, tr) in traces.iter().enumerate() {
                    tr.backward(&up_t[i..i + 1], g, offsets[i]);
                }
            }
        }
        let parts = [
            (LossComponent::RemainderResidual, sum_rg * inv_b),
            (LossComponent::RemainderInitial, sum_ri * inv_b),
        ];
        LossBreakdown::assemble(&parts, &self.weights)
    }
}

/// PINN loss with default weights.
pub fn pinn_loss(net: &Mlp, batch: &[Sample<'_>], system: &OdeSystem) -> Result<LossBreakdown, LossError> {
    PinnObjective::pinn(system, LossWeights::default()).loss(net, batch)
}

/// Higher-order PINN loss with default weights.
pub fn ho_pinn_loss(net: &Mlp, batch: &[Sample<'_>], system: &OdeSystem, order: usize) -> Result<LossBreakdown, LossError> {
    PinnObjective::higher_order(system, order, LossWeights::default())?.loss(net, batch)
}

/// Taylor-model loss with default weights.
pub fn tm_pinn_loss(s: &TaylorSurrogate, batch: &[Sample<'_>]) -> Result<LossBreakdown, LossError> {
    TaylorObjective::tm_pinn(LossWeights::default()).loss(s, batch)
}

/// Quadrature Taylor-model loss with default weights.
pub fn tm_nq_loss(s: &TaylorSurrogate, batch: &[Sample<'_>], points: usize) -> Result<LossBreakdown, LossError> {
    TaylorObjective::tm_nq(LossWeights::default(), points)?.loss(s, batch)
}
