//! Neural surrogate solution maps for parametric ODE initial-value problems.
//!
//! The crate combines symbolically generated Taylor coefficients with learned
//! remainder networks ("Taylor-model" surrogates) and provides the baseline
//! PINN and higher-order PINN objectives for comparison, together with a
//! reference RK4 solver and an evaluation harness.

pub mod symbolic;
pub mod io;
pub mod solver;
pub mod systems;
pub mod autodiff;
pub mod network;
pub mod losses;
pub mod training;
pub mod evaluation;
pub mod cli;
