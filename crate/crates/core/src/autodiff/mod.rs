//! Forward-mode time jets and reverse-mode parameter gradients.
//!
//! [`Jet3`] carries a value together with its first three derivatives with
//! respect to one seeded input (time, in this crate). [`Tape`] records a
//! scalar computation for reverse-mode gradients. Both implement
//! [`Scalar`], so code written once against that trait (network forward
//! passes in particular) runs on plain floats, jets and tape variables.

mod jet;
mod tape;

use std::ops::{Add, Div, Index, IndexMut, Mul, Neg, Sub};

use thiserror::Error;

pub use jet::Jet3;
pub use tape::{Tape, Var};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AutodiffError {
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
    #[error("derivative order {0} is not supported (1..=3)")]
    UnsupportedOrder(usize),
}

/// Numeric type usable in generic forward computations.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant of the same kind as `self`.
    fn lift(&self, c: f64) -> Self;
    fn value(&self) -> f64;
    fn scale(&self, c: f64) -> Self;
    fn add_const(&self, c: f64) -> Self;
    fn tanh(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, k: i32) -> Self;
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn add_const(&self, c: f64) -> Self {
        self + c
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powi(&self, k: i32) -> Self {
        f64::powi(*self, k)
    }
}

/// Flat gradient aligned with a model's parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBuffer(Vec<f64>);

impl GradBuffer {
    pub fn zeros(len: usize) -> Self {
        GradBuffer(vec![0.0; len])
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        GradBuffer(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn clear(&mut self) {
        self.0.iter_mut().for_each(|g| *g = 0.0);
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: f64, other: &GradBuffer) {
        assert_eq!(self.len(), other.len(), "gradient length mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.0.iter_mut().for_each(|g| *g *= c);
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

impl Index<usize> for GradBuffer {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for GradBuffer {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Derivatives of `f` with respect to input `seed` at `x`, up to `order`.
pub fn jet_lift<F>(f: F, seed: usize, x: &[f64], order: usize) -> Result<Jet3, AutodiffError>
where
    F: Fn(&[Jet3]) -> Jet3,
{
    if !(1..=3).contains(&order) {
        return Err(AutodiffError::UnsupportedOrder(order));
    }
    let inputs: Vec<Jet3> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == seed { Jet3::variable(v) } else { Jet3::constant(v) })
        .collect();
    Ok(f(&inputs).truncate(order))
}

/// Reverse-mode gradient of a scalar loss built on a [`Tape`].
pub fn param_gradient<F>(loss: F, params: &[f64]) -> Result<(f64, GradBuffer), AutodiffError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = params.iter().map(|&p| tape.var(p)).collect();
    let out = loss(&tape, &vars);
    let value = out.value();
    if !value.is_finite() {
        return Err(AutodiffError::NonFiniteLoss(value));
    }
    let adj = tape.adjoints(&out);
    let grad = vars.iter().map(|v| adj[v.index()]).collect();
    Ok((value, GradBuffer(grad)))
}

/// Central finite-difference gradient, used as an oracle in tests.
pub fn finite_difference_gradient<F>(f: F, params: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + step;
            let up = f(&p);
            p[i] = orig - step;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Componentwise agreement `|a − b| ≤ max(rel · max(|a|, |b|), abs_floor)`.
/// Returns the first offending index.
pub fn gradients_agree(a: &[f64], b: &[f64], rel: f64, abs_floor: f64) -> Result<(), usize> {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let tol = (rel * x.abs().max(y.abs())).max(abs_floor);
        if !((x - y).abs() <= tol) {
            return Err(i);
        }
    }
    Ok(())
}
