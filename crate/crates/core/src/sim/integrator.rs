use crate::model::{FrothParameters, Plant, PlantInputs, PlantState};

use super::SimError;

/// Negative masses above this magnitude are treated as integrator failure.
const MASS_CLAMP: f64 = 1e-12;

/// One classical fourth-order Runge-Kutta step of size `h`.
pub fn rk4_step<E, F>(y: &PlantState, h: f64, mut f: F) -> Result<PlantState, E>
where
    F: FnMut(&PlantState) -> Result<PlantState, E>,
{
    let k1 = f(y)?;
    let k2 = f(&y.add_scaled(&k1, 0.5 * h))?;
    let k3 = f(&y.add_scaled(&k2, 0.5 * h))?;
    let k4 = f(&y.add_scaled(&k3, h))?;
    Ok(PlantState {
        q_tails: y.q_tails + h / 6.0 * (k1.q_tails + 2.0 * k2.q_tails + 2.0 * k3.q_tails + k4.q_tails),
        h_p: y.h_p + h / 6.0 * (k1.h_p + 2.0 * k2.h_p + 2.0 * k3.h_p + k4.h_p),
        m: combine(&y.m, &k1.m, &k2.m, &k3.m, &k4.m, h),
        eps0: combine(&y.eps0, &k1.eps0, &k2.eps0, &k3.eps0, &k4.eps0, h),
    })
}

fn combine(y: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64], h: f64) -> Vec<f64> {
    (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Advances the plant by `h` seconds with the algebraic loop re-solved at every
/// stage. Each stage seeds the loop with the previous stage's concentrate flow.
///
/// Returns the new state and the last converged concentrate flow.
pub fn integrate_step(
    plant: &Plant,
    state: &PlantState,
    inputs: &PlantInputs,
    theta: &FrothParameters,
    h: f64,
    seed_q_conc: f64,
) -> Result<(PlantState, f64), SimError> {
    if !(h >= 0.0) {
        return Err(SimError::Setup(format!("step size must be >= 0 (got {h})")));
    }
    if h == 0.0 {
        return Ok((state.clone(), seed_q_conc));
    }
    let mut seed = seed_q_conc;
    let mut next = rk4_step(state, h, |y| {
        let (d, alg) = plant.rhs(y, inputs, theta, seed)?;
        seed = alg.q_conc;
        Ok(d)
    })
    .map_err(SimError::model(0.0))?;

    for (i, m) in next.m.iter_mut().enumerate() {
        if *m < 0.0 {
            if *m < -MASS_CLAMP {
                return Err(SimError::Invariant { t: 0.0, detail: format!("m[{i}] = {m} after step") });
            }
            *m = 0.0;
        }
    }
    let violations = next.violations(plant.constants.h_total);
    if !violations.is_empty() {
        return Err(SimError::Invariant { t: 0.0, detail: violations.join("; ") });
    }
    Ok((next, seed))
}

/// Advances over one sampling interval `dt` using `substeps` RK4 steps.
pub fn advance(
    plant: &Plant,
    state: &PlantState,
    inputs: &PlantInputs,
    theta: &FrothParameters,
    dt: f64,
    substeps: usize,
    seed_q_conc: f64,
) -> Result<(PlantState, f64), SimError> {
    let h = dt / substeps as f64;
    let mut current = state.clone();
    let mut seed = seed_q_conc;
    for _ in 0..substeps {
        let (next, s) = integrate_step(plant, &current, inputs, theta, h, seed)?;
        current = next;
        seed = s;
    }
    Ok((current, seed))
}
