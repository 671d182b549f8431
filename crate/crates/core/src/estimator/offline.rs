use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{FrothParameters, PlantState};
use crate::sim::{observe, SimError};

use super::predictor::difference_points;
use super::{EstimatorConfig, EstimatorError, PredictionContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineOptions {
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Stop once the relative parameter step drops below this.
    pub step_tolerance: f64,
    /// Added to the normal matrix when it is singular.
    pub regularization: f64,
}

impl Default for OfflineOptions {
    fn default() -> Self {
        Self { max_iterations: 50, max_halvings: 20, step_tolerance: 1e-8, regularization: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineFit {
    pub theta: FrothParameters,
    /// `½ Σ (y − ŷ)²` at `theta`.
    pub cost: f64,
    pub iterations: usize,
    /// Model state at the end of the window under `theta`.
    pub final_state: PlantState,
    pub final_q_conc: f64,
}

/// Grade predictions at `t0, t0 + dt, …` (`count` samples) from `initial`
/// under constant `theta`, plus the state and concentrate flow at the last one.
pub fn simulate_predictions(
    ctx: &PredictionContext,
    initial: &PlantState,
    t0: f64,
    count: usize,
    theta: &FrothParameters,
) -> Result<(Vec<f64>, PlantState, f64), SimError> {
    let alg = observe(ctx.plant, initial, &ctx.inputs.at(t0), theta, 0.0, t0)?;
    let mut out = Vec::with_capacity(count);
    out.push(alg.g1);
    let mut state = initial.clone();
    let mut q = alg.q_conc;
    for k in 1..count {
        let p = ctx.step(&state, q, t0 + (k - 1) as f64 * ctx.dt, theta)?;
        out.push(p.g1);
        state = p.state;
        q = p.q_conc;
    }
    Ok((out, state, q))
}

/// `½ Σ (y − ŷ)²` of the open-loop predictions against `measured`, which starts at `t0`.
pub fn prediction_cost(
    ctx: &PredictionContext,
    initial: &PlantState,
    t0: f64,
    measured: &[f64],
    theta: &FrothParameters,
) -> Result<f64, SimError> {
    let (pred, _, _) = simulate_predictions(ctx, initial, t0, measured.len(), theta)?;
    Ok(half_sse(measured, &pred))
}

fn half_sse(y: &[f64], yhat: &[f64]) -> f64 {
    0.5 * y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Batch Gauss-Newton fit of constant `θ` to a window of measurements.
///
/// Every candidate is scored by re-simulating the whole window from
/// `initial`. Steps are taken in coordinates relative to `guess` and halved
/// until the cost decreases. A step that cannot be made to decrease the cost
/// is treated as convergence.
pub fn offline_init(
    ctx: &PredictionContext,
    initial: &PlantState,
    t0: f64,
    measured: &[f64],
    guess: FrothParameters,
    est_cfg: &EstimatorConfig,
    opts: &OfflineOptions,
) -> Result<OfflineFit, EstimatorError> {
    if measured.len() < 2 {
        return Err(EstimatorError::Setup("offline window needs at least two samples".into()));
    }
    if !guess.is_valid() {
        return Err(EstimatorError::Setup(format!("initial guess {guess:?} is not positive")));
    }
    let scale = guess.to_array();
    let mut theta = est_cfg.project(guess);
    let (mut pred, _, _) = simulate_predictions(ctx, initial, t0, measured.len(), &theta)?;
    let mut cost = half_sse(measured, &pred);

    for iteration in 1..=opts.max_iterations {
        let jac = window_jacobian(ctx, initial, t0, measured.len(), &theta, est_cfg)?;
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for (k, row) in jac.iter().enumerate() {
            let g = Vector2::new(row[0] * scale[0], row[1] * scale[1]);
            jtj += g * g.transpose();
            jtr += g * (measured[k] - pred[k]);
        }
        let delta = match jtj.try_inverse() {
            Some(inv) if jtj.determinant() > f64::EPSILON * jtj.norm_squared() => inv * jtr,
            _ => (jtj + Matrix2::identity() * opts.regularization)
                .try_inverse()
                .map(|inv| inv * jtr)
                .unwrap_or_else(Vector2::zeros),
        };

        let (dir, mut factor) = feasible_direction(&theta, [delta[0] * scale[0], delta[1] * scale[1]], est_cfg);
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let candidate =
                est_cfg.project(FrothParameters::new(theta.n + factor * dir[0], theta.c + factor * dir[1]));
            if let Ok((p, _, _)) = simulate_predictions(ctx, initial, t0, measured.len(), &candidate) {
                let c = half_sse(measured, &p);
                if c < cost {
                    accepted = Some((candidate, p, c));
                    break;
                }
            }
            factor *= 0.5;
        }

        let Some((candidate, p, c)) = accepted else {
            return finish(ctx, initial, t0, measured.len(), theta, cost, iteration);
        };
        let rel_step = ((candidate.n - theta.n) / scale[0]).hypot((candidate.c - theta.c) / scale[1]);
        theta = candidate;
        pred = p;
        cost = c;
        log::debug!("offline iteration {iteration}: theta = {theta:?}, cost = {cost:.6e}, step = {rel_step:.3e}");
        if rel_step < opts.step_tolerance {
            return finish(ctx, initial, t0, measured.len(), theta, cost, iteration);
        }
    }
    Err(EstimatorError::NotConverged { iterations: opts.max_iterations, best: theta, cost })
}

/// Drops components that push out of the box at an active bound and returns
/// the remaining direction with the largest step fraction (at most one) that
/// keeps the estimate inside the box.
fn feasible_direction(theta: &FrothParameters, mut dir: [f64; 2], cfg: &EstimatorConfig) -> ([f64; 2], f64) {
    let mut factor: f64 = 1.0;
    for (j, d) in dir.iter_mut().enumerate() {
        let (v, lo, hi) = (theta.get(j), cfg.theta_min.get(j), cfg.theta_max.get(j));
        let room = if *d > 0.0 { (hi - v) / *d } else if *d < 0.0 { (lo - v) / *d } else { f64::INFINITY };
        if room <= 0.0 {
            *d = 0.0;
        } else {
            factor = factor.min(room);
        }
    }
    (dir, factor)
}

fn finish(
    ctx: &PredictionContext,
    initial: &PlantState,
    t0: f64,
    count: usize,
    theta: FrothParameters,
    cost: f64,
    iterations: usize,
) -> Result<OfflineFit, EstimatorError> {
    let (_, final_state, final_q_conc) = simulate_predictions(ctx, initial, t0, count, &theta)?;
    Ok(OfflineFit { theta, cost, iterations, final_state, final_q_conc })
}

/// Rows `∂ŷ_k/∂θ` over the window by finite differences of whole trajectories.
fn window_jacobian(
    ctx: &PredictionContext,
    initial: &PlantState,
    t0: f64,
    count: usize,
    theta: &FrothParameters,
    cfg: &EstimatorConfig,
) -> Result<Vec<[f64; 2]>, SimError> {
    let points = difference_points(theta, cfg);
    let thetas = [points[0].0, points[0].1, points[1].0, points[1].1];
    let runs = thetas
        .par_iter()
        .map(|th| simulate_predictions(ctx, initial, t0, count, th).map(|r| r.0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..count)
        .map(|k| [(runs[0][k] - runs[1][k]) / points[0].2, (runs[2][k] - runs[3][k]) / points[1].2])
        .collect())
}
