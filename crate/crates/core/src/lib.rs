//! Dynamic flotation cell model with online identification of the froth
//! parameters `n` and `C` by a recursive prediction-error method.
//!
//! * [`model`]: the algebraic relations, closures and state derivatives
//! * [`sim`]: fixed-step integration and noisy grade measurements
//! * [`estimator`]: one-step predictor, Gauss-Newton updates, offline fit
//! * [`harness`]: the two benchmark scenarios and fit metrics
//! * [`cli`]: configuration files and the `froth-ident` command

pub mod cli;
pub mod estimator;
pub mod harness;
pub mod model;
pub mod sim;

#[cfg(test)]
mod testing;
