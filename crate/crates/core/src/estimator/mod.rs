//! Recursive prediction-error estimation of the froth parameters `(n, C)`.
//!
//! Each new grade sample is predicted one sampling interval ahead from the
//! carried model state, the output gradient is taken by central differences,
//! and a forgetting-factor Gauss-Newton step updates the estimate with a
//! rank-one (Woodbury) recursion for the inverse Hessian. An offline batch
//! Gauss-Newton fit provides the starting estimate.

mod offline;
mod online;
mod predictor;
mod update;

pub use offline::{offline_init, prediction_cost, simulate_predictions, OfflineFit, OfflineOptions};
pub use online::{run_constant, run_online, OnlineRun, OnlineStep};
pub use predictor::{difference_gradient, output_gradient, predict_one_step, Prediction, PredictionContext};
pub use update::{initial_inverse_hessian, rpem_update, woodbury_update, UpdateDiagnostics};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FrothParameters, PlantState};
use crate::sim::SimError;

/// Nominal froth parameters of the reference cell.
pub const NOMINAL_THETA: FrothParameters = FrothParameters::new(1.0, 6.38e-4);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("prediction failed: {0}")]
    Prediction(#[from] SimError),
    #[error("rank-one update denominator {0} is not positive")]
    Denominator(f64),
    #[error("offline fit did not converge after {iterations} iterations; best estimate {best:?}")]
    NotConverged { iterations: usize, best: FrothParameters, cost: f64 },
    #[error("estimator aborted at t = {t} s after {frozen} consecutive frozen samples")]
    Aborted { t: f64, frozen: usize },
    #[error("invalid estimator setup: {0}")]
    Setup(String),
}

/// How the output gradient treats the carried state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Perturbed predictions restart from the nominal carried state every sample.
    #[default]
    OneStep,
    /// Each perturbation carries its own state trajectory across samples.
    ParallelTrajectories,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Forgetting factor in (0, 1].
    pub lambda: f64,
    /// Initial inverse-Hessian diagonal as a fraction of the initial estimate.
    pub l0_scale: f64,
    /// Relative central-difference step.
    pub eps_rel: f64,
    pub theta_min: FrothParameters,
    pub theta_max: FrothParameters,
    #[serde(default)]
    pub gradient_mode: GradientMode,
    /// Consecutive frozen samples tolerated before aborting.
    #[serde(default = "default_max_frozen")]
    pub max_frozen: usize,
}

fn default_max_frozen() -> usize {
    50
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self::around(NOMINAL_THETA)
    }
}

impl EstimatorConfig {
    /// Default tuning with the projection box `[0.2, 5] × nominal`.
    pub fn around(nominal: FrothParameters) -> Self {
        Self {
            lambda: 0.995,
            l0_scale: 0.1,
            eps_rel: 1e-6,
            theta_min: nominal.scaled(0.2, 0.2),
            theta_max: nominal.scaled(5.0, 5.0),
            gradient_mode: GradientMode::OneStep,
            max_frozen: default_max_frozen(),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            out.push(format!("estimator.lambda must lie in (0, 1] (got {})", self.lambda));
        }
        if !(self.l0_scale.is_finite() && self.l0_scale > 0.0) {
            out.push(format!("estimator.l0_scale must be > 0 (got {})", self.l0_scale));
        }
        if !(self.eps_rel > 0.0 && self.eps_rel <= 1e-2) {
            out.push(format!("estimator.eps_rel must lie in (0, 1e-2] (got {})", self.eps_rel));
        }
        if !(self.theta_min.is_valid() && self.theta_max.is_valid()) {
            out.push("estimator.theta_min/theta_max must be positive".into());
        }
        if !(self.theta_min.n < self.theta_max.n && self.theta_min.c < self.theta_max.c) {
            out.push("estimator.theta_min must be below theta_max componentwise".into());
        }
        out
    }

    /// Projection onto the box.
    pub fn project(&self, theta: FrothParameters) -> FrothParameters {
        FrothParameters::new(
            theta.n.clamp(self.theta_min.n, self.theta_max.n),
            theta.c.clamp(self.theta_min.c, self.theta_max.c),
        )
    }
}

/// A perturbed trajectory carried in [`GradientMode::ParallelTrajectories`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedState {
    pub state: PlantState,
    pub q_conc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub theta_hat: FrothParameters,
    /// Inverse of the approximate Hessian.
    pub l: Matrix2<f64>,
    /// Model state carried from the previous sampling instant.
    pub predictor_state: PlantState,
    /// Concentrate flow at the carried state; seeds the algebraic loop.
    pub q_conc: f64,
    pub step_count: usize,
    /// `[n+, n−, C+, C−]` trajectories, only in parallel-trajectory mode.
    pub perturbed: Option<Vec<PerturbedState>>,
}

impl EstimatorState {
    pub fn new(theta_hat: FrothParameters, l: Matrix2<f64>, predictor_state: PlantState, q_conc: f64) -> Self {
        Self { theta_hat, l, predictor_state, q_conc, step_count: 0, perturbed: None }
    }
}
