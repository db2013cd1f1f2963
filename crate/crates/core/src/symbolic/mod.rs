//! Symbolic expressions, exact differentiation and vector Lie derivatives.
//!
//! The Taylor coefficients of an ODE flow are generated by iterating the Lie
//! operator `L_f(g) = (∇ₓ g)·f + ∂g/∂t` starting from the identity map:
//! `f₀ = x`, `f_{i+1} = L_f(f_i)`, so that `f₁` is the vector field itself.

mod expr;
mod parse;
mod program;

use thiserror::Error;

pub use expr::{Differentiator, DisplayExpr, Expr, Names, Node, Var};
pub use parse::{parse_expr, parse_expr_with_constants};
pub use program::Program;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SymbolicError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at byte {position}")]
    UnknownIdentifier { position: usize, name: String },
    #[error("exponent `{exponent}` at byte {position} is not a non-negative integer")]
    NonIntegerExponent { position: usize, exponent: String },
    #[error("division by zero{}", component_suffix(.component))]
    DivisionByZero { component: Option<usize> },
    #[error("{function} domain error{}", component_suffix(.component))]
    Domain {
        function: &'static str,
        component: Option<usize>,
    },
    #[error("{kind} index {index} out of range for length {len}")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        len: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

fn component_suffix(component: &Option<usize>) -> String {
    match component {
        Some(c) => format!(" in component {c}"),
        None => String::new(),
    }
}

impl SymbolicError {
    fn with_component(self, index: usize) -> Self {
        match self {
            SymbolicError::DivisionByZero { component: None } => SymbolicError::DivisionByZero {
                component: Some(index),
            },
            SymbolicError::Domain {
                function,
                component: None,
            } => SymbolicError::Domain {
                function,
                component: Some(index),
            },
            other => other,
        }
    }
}

/// One expression per state dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct VecExpr(Vec<Expr>);

impl VecExpr {
    pub fn new(components: Vec<Expr>) -> Self {
        VecExpr(components)
    }

    /// The identity map `x ↦ x` in `n` dimensions.
    pub fn identity(n: usize) -> Self {
        VecExpr((0..n).map(Expr::state).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn components(&self) -> &[Expr] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Expr> {
        self.0.iter()
    }

    pub fn simplify(&self) -> VecExpr {
        VecExpr(self.0.iter().map(Expr::simplify).collect())
    }

    pub fn dag_size(&self) -> usize {
        // Shared nodes across components are counted once.
        let root = self
            .0
            .iter()
            .cloned()
            .reduce(|a, b| Expr::new(Node::Add(a, b)))
            .unwrap_or_else(Expr::zero);
        root.dag_size().saturating_sub(self.0.len().saturating_sub(1))
    }

    /// Jacobian `∂g_j/∂x_i`, row-major (`j * n + i`).
    pub fn jacobian(&self, n_states: usize) -> Vec<Expr> {
        let mut diffs: Vec<Differentiator> = (0..n_states)
            .map(|i| Differentiator::new(Var::State(i)))
            .collect();
        let mut out = Vec::with_capacity(self.0.len() * n_states);
        for g in &self.0 {
            for d in diffs.iter_mut() {
                out.push(d.diff(g));
            }
        }
        out
    }
}

impl std::ops::Index<usize> for VecExpr {
    type Output = Expr;
    fn index(&self, i: usize) -> &Expr {
        &self.0[i]
    }
}

/// Componentwise numeric evaluation with errors tagged by component.
pub fn eval_vec(v: &VecExpr, x: &[f64], params: &[f64], t: f64) -> Result<Vec<f64>, SymbolicError> {
    v.iter()
        .enumerate()
        .map(|(k, e)| e.eval(x, params, t).map_err(|err| err.with_component(k)))
        .collect()
}

/// `L_f(g)`: componentwise `(∇ₓ g_j)·f + ∂g_j/∂t`.
pub fn lie_derivative(field: &VecExpr, g: &VecExpr) -> Result<VecExpr, SymbolicError> {
    if g.len() != field.len() {
        return Err(SymbolicError::DimensionMismatch {
            expected: field.len(),
            got: g.len(),
        });
    }
    let n = field.len();
    let mut by_state: Vec<Differentiator> =
        (0..n).map(|i| Differentiator::new(Var::State(i))).collect();
    let mut by_time = Differentiator::new(Var::Time);
    let components = g
        .iter()
        .map(|gj| {
            let mut acc = by_time.diff(gj);
            for (i, d) in by_state.iter_mut().enumerate() {
                let partial = d.diff(gj);
                acc = Expr::add(acc, Expr::mul(partial, field[i].clone()));
            }
            acc
        })
        .collect();
    Ok(VecExpr(components))
}

/// Successive Lie derivatives `f₁ … f_{m+1}` of a vector field.
#[derive(Debug, Clone)]
pub struct LieTable {
    entries: Vec<VecExpr>,
}

impl LieTable {
    /// Builds entries through `f_{order+1}`. `order` must be at least 1.
    pub fn new(field: &VecExpr, order: usize) -> Result<Self, SymbolicError> {
        assert!(order >= 1, "Taylor order must be at least 1");
        let mut entries = Vec::with_capacity(order + 1);
        entries.push(field.simplify());
        for _ in 0..order {
            let next = lie_derivative(field, entries.last().expect("nonempty"))?;
            entries.push(next.simplify());
        }
        Ok(LieTable { entries })
    }

    /// Taylor order `m`; the table holds `m + 1` entries.
    pub fn order(&self) -> usize {
        self.entries.len() - 1
    }

    /// `f_j` for `1 ≤ j ≤ m + 1`.
    pub fn entry(&self, j: usize) -> &VecExpr {
        assert!(j >= 1 && j <= self.entries.len(), "Lie table index {j} out of range");
        &self.entries[j - 1]
    }

    pub fn entries(&self) -> &[VecExpr] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries[0].len()
    }

    /// Compiles entries `f₁ … f_{m+1}` into one program with outputs laid
    /// out entry-major.
    pub fn compile(&self) -> Program {
        let all: Vec<Expr> = self.entries.iter().flat_map(|v| v.iter().cloned()).collect();
        Program::compile(&all)
    }
}

/// Alias matching the operation name used elsewhere in the crate.
pub fn lie_table(field: &VecExpr, order: usize) -> Result<LieTable, SymbolicError> {
    LieTable::new(field, order)
}
