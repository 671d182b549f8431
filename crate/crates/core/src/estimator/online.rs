use crate::model::{FrothParameters, PlantState};
use crate::sim::SimError;

use super::{
    output_gradient, predict_one_step, rpem_update, simulate_predictions, EstimatorConfig, EstimatorError,
    EstimatorState, GradientMode, PerturbedState, PredictionContext, UpdateDiagnostics,
};

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineStep {
    pub t: f64,
    /// Estimate after processing the sample at `t`.
    pub theta_hat: FrothParameters,
    /// One-step prediction of the grade at `t` made with the previous estimate.
    pub g1_pred: f64,
    pub diagnostics: UpdateDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineRun {
    pub steps: Vec<OnlineStep>,
    pub final_state: EstimatorState,
    pub frozen_samples: usize,
}

/// Processes `measurements` (pairs `(t, y)` on the sampling grid, the first at
/// one interval after the estimator's start) one sample at a time.
///
/// A sample whose prediction, gradient or update fails is frozen: the
/// estimate and inverse Hessian are kept, and the carried state advances only
/// if the nominal prediction succeeded. The run aborts after more than
/// `cfg.max_frozen` consecutive frozen samples.
pub fn run_online(
    ctx: &PredictionContext,
    initial: EstimatorState,
    measurements: &[(f64, f64)],
    cfg: &EstimatorConfig,
) -> Result<OnlineRun, EstimatorError> {
    let mut est = initial;
    if cfg.gradient_mode == GradientMode::ParallelTrajectories && est.perturbed.is_none() {
        est.perturbed = Some(synced(&est.predictor_state, est.q_conc));
    }
    let mut steps = Vec::with_capacity(measurements.len());
    let mut consecutive = 0usize;
    let mut frozen_samples = 0usize;

    for &(t, y) in measurements {
        let t_prev = t - ctx.dt;
        let theta = est.theta_hat;
        let outcome = predict_one_step(ctx, &est, t_prev, &theta)
            .map_err(|e| (None, e.to_string()))
            .and_then(|pred| match output_gradient(ctx, &est, t_prev, &theta, cfg) {
                Ok((psi, carried)) => match rpem_update(&est, y, &psi, &pred, carried, cfg) {
                    Ok(done) => Ok((pred.g1, done)),
                    Err(e) => Err((Some(pred), e.to_string())),
                },
                Err(e) => Err((Some(pred), e.to_string())),
            });

        match outcome {
            Ok((g1_pred, (next, diagnostics))) => {
                consecutive = 0;
                est = next;
                steps.push(OnlineStep { t, theta_hat: est.theta_hat, g1_pred, diagnostics });
            }
            Err((pred, fault)) => {
                consecutive += 1;
                frozen_samples += 1;
                log::warn!("estimator frozen at t = {t} s: {fault}");
                let g1_pred = pred.as_ref().map_or(f64::NAN, |p| p.g1);
                if let Some(p) = pred {
                    est.predictor_state = p.state;
                    est.q_conc = p.q_conc;
                }
                if est.perturbed.is_some() {
                    est.perturbed = Some(synced(&est.predictor_state, est.q_conc));
                }
                if consecutive > cfg.max_frozen {
                    return Err(EstimatorError::Aborted { t, frozen: consecutive });
                }
                steps.push(OnlineStep {
                    t,
                    theta_hat: est.theta_hat,
                    g1_pred,
                    diagnostics: UpdateDiagnostics {
                        residual: y - g1_pred,
                        psi: [f64::NAN; 2],
                        step: [0.0; 2],
                        denominator: f64::NAN,
                        projected: false,
                        fault: Some(fault),
                    },
                });
            }
        }
    }
    Ok(OnlineRun { steps, final_state: est, frozen_samples })
}

fn synced(state: &PlantState, q_conc: f64) -> Vec<PerturbedState> {
    vec![PerturbedState { state: state.clone(), q_conc }; 4]
}

/// Open-loop grade predictions at `t0 + dt, …, t0 + count·dt` under a fixed
/// `theta`, starting from `initial` at `t0`.
pub fn run_constant(
    ctx: &PredictionContext,
    initial: &PlantState,
    t0: f64,
    count: usize,
    theta: &FrothParameters,
) -> Result<Vec<f64>, SimError> {
    let (mut pred, _, _) = simulate_predictions(ctx, initial, t0, count + 1, theta)?;
    pred.remove(0);
    Ok(pred)
}
