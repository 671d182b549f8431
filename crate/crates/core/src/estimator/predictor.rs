use nalgebra::Vector2;
use rayon::prelude::*;

use crate::model::{FrothParameters, Plant, PlantState};
use crate::sim::{advance, observe, InputTrajectory, SimError};

use super::{EstimatorConfig, EstimatorState};

/// Everything a prediction needs besides the estimator state.
#[derive(Debug, Clone, Copy)]
pub struct PredictionContext<'a> {
    pub plant: &'a Plant,
    pub inputs: &'a InputTrajectory,
    pub dt: f64,
    pub substeps: usize,
}

/// A one-step-ahead grade prediction and the state it was taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub g1: f64,
    pub state: PlantState,
    pub q_conc: f64,
}

impl PredictionContext<'_> {
    /// Advances `state` from `t_prev` over one sampling interval under `theta`
    /// and evaluates the grade at the new instant.
    pub fn step(&self, state: &PlantState, q_conc: f64, t_prev: f64, theta: &FrothParameters) -> Result<Prediction, SimError> {
        let (next, seed) = advance(self.plant, state, &self.inputs.at(t_prev), theta, self.dt, self.substeps, q_conc)
            .map_err(|e| e.at(t_prev))?;
        let t = t_prev + self.dt;
        let alg = observe(self.plant, &next, &self.inputs.at(t), theta, seed, t)?;
        Ok(Prediction { g1: alg.g1, state: next, q_conc: alg.q_conc })
    }
}

/// Predicts the grade at `t_prev + dt` from the carried predictor state under `theta`.
pub fn predict_one_step(
    ctx: &PredictionContext,
    est: &EstimatorState,
    t_prev: f64,
    theta: &FrothParameters,
) -> Result<Prediction, SimError> {
    ctx.step(&est.predictor_state, est.q_conc, t_prev, theta)
}

/// Per-component difference steps. Central where both sides stay inside the
/// box; one-sided otherwise. Entries are `(theta_plus, theta_minus, divisor)`.
pub(crate) fn difference_points(theta: &FrothParameters, cfg: &EstimatorConfig) -> [(FrothParameters, FrothParameters, f64); 2] {
    let step = |j: usize| {
        let v = theta.get(j);
        let lo = cfg.theta_min.get(j);
        let hi = cfg.theta_max.get(j);
        let eps = cfg.eps_rel * v.abs();
        let up = v + eps <= hi;
        let down = v - eps >= lo;
        match (up, down) {
            (true, true) => (theta.with(j, v + eps), theta.with(j, v - eps), 2.0 * eps),
            (true, false) => (theta.with(j, v + eps), *theta, eps),
            (false, true) => (*theta, theta.with(j, v - eps), eps),
            (false, false) => (*theta, *theta, f64::INFINITY),
        }
    };
    [step(0), step(1)]
}

/// Finite-difference gradient of a scalar map of `θ`, with the same steps as
/// [`output_gradient`].
pub fn difference_gradient<F: Fn(&FrothParameters) -> f64>(f: F, theta: &FrothParameters, cfg: &EstimatorConfig) -> [f64; 2] {
    difference_points(theta, cfg).map(|(plus, minus, div)| if div.is_finite() { (f(&plus) - f(&minus)) / div } else { 0.0 })
}

/// Output gradient `ψ = ∂ŷ/∂θ` at `theta` by finite differences. The four
/// perturbed predictions run concurrently.
///
/// In one-step mode each perturbed prediction starts from the nominal carried
/// state. In parallel-trajectory mode it starts from its own carried state
/// and the advanced perturbed states are returned for the next sample.
pub fn output_gradient(
    ctx: &PredictionContext,
    est: &EstimatorState,
    t_prev: f64,
    theta: &FrothParameters,
    cfg: &EstimatorConfig,
) -> Result<(Vector2<f64>, Option<Vec<Prediction>>), SimError> {
    let points = difference_points(theta, cfg);
    let thetas = [points[0].0, points[0].1, points[1].0, points[1].1];
    let starts: Vec<(&PlantState, f64)> = match &est.perturbed {
        Some(p) => p.iter().map(|s| (&s.state, s.q_conc)).collect(),
        None => vec![(&est.predictor_state, est.q_conc); 4],
    };
    let preds = thetas
        .par_iter()
        .zip(starts.par_iter())
        .map(|(th, (state, q))| ctx.step(state, *q, t_prev, th))
        .collect::<Result<Vec<_>, _>>()?;
    let psi = Vector2::new(
        (preds[0].g1 - preds[1].g1) / points[0].2,
        (preds[2].g1 - preds[3].g1) / points[1].2,
    );
    let carried = est.perturbed.as_ref().map(|_| preds);
    Ok((psi, carried))
}
