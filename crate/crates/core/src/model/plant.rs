use std::fmt;
use std::sync::Arc;

use super::closures::{ClosureSet, SurrogateClosures, SurrogateParams};
use super::relations;
use super::types::{AlgebraicOutputs, FrothParameters, PhysicalConstants, PlantInputs, PlantState};
use super::ModelError;

/// Damping applied to each fixed-point update of the concentrate flow.
pub const LOOP_DAMPING: f64 = 0.5;
/// Iteration cap of the algebraic loop.
pub const LOOP_MAX_ITERATIONS: usize = 100;
/// Absolute residual bound on the concentrate flow [m³/s].
pub const LOOP_ABS_TOLERANCE: f64 = 1e-12;
/// Relative residual bound, in units of machine epsilon.
const LOOP_REL_ULPS: f64 = 16.0;

/// A cell: constants plus the closure set that completes its equations.
#[derive(Clone)]
pub struct Plant {
    pub constants: PhysicalConstants,
    pub closures: Arc<dyn ClosureSet>,
}

impl fmt::Debug for Plant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Plant").field("constants", &self.constants).finish_non_exhaustive()
    }
}

/// Froth-side quantities implied by one guess of the concentrate flow.
#[derive(Debug, Clone, Copy)]
struct FrothEval {
    v_g_star: f64,
    alpha: f64,
    alpha_star: f64,
    tau_f: f64,
    d_b_froth_out: f64,
    q_conc: f64,
}

/// Loop inputs that do not depend on the concentrate flow.
struct LoopContext {
    d_b_int: f64,
    k1: f64,
    v_b: f64,
    froth_depth: f64,
}

impl Plant {
    pub fn new(constants: PhysicalConstants, closures: Arc<dyn ClosureSet>) -> Self {
        Self { constants, closures }
    }

    /// The reference cell with default surrogate closures.
    pub fn reference() -> Self {
        let constants = PhysicalConstants::reference();
        let closures = Arc::new(SurrogateClosures::new(SurrogateParams::default(), &constants));
        Self { constants, closures }
    }

    /// Gas-free pulp level `(1 − Σε) h_p` [m].
    pub fn gas_free_level(state: &PlantState) -> f64 {
        (1.0 - state.eps_total()) * state.h_p
    }

    /// Pulp volume `h0 · A · (1 + Σ ε/(1−ε))` [m³].
    pub fn pulp_volume(&self, state: &PlantState) -> Result<f64, ModelError> {
        let mut gas = 0.0;
        for (class, e) in state.eps0.iter().enumerate() {
            if !(*e < 1.0) {
                return Err(ModelError::SingularHoldup { class });
            }
            gas += e / (1.0 - e);
        }
        Ok(Self::gas_free_level(state) * self.constants.a_cell * (1.0 + gas))
    }

    fn loop_context(&self, state: &PlantState, inputs: &PlantInputs) -> LoopContext {
        LoopContext {
            d_b_int: self.closures.interfacial_bubble_size(state, inputs),
            k1: self.closures.k1(state, inputs),
            v_b: self.closures.bursting_rate(inputs.q_air),
            froth_depth: self.constants.h_total - state.h_p,
        }
    }

    /// Froth response to a concentrate flow guess. A non-positive gas velocity
    /// means no froth overflows, so the implied concentrate flow is zero.
    fn froth_eval(
        &self,
        ctx: &LoopContext,
        state: &PlantState,
        inputs: &PlantInputs,
        theta: &FrothParameters,
        q_conc: f64,
    ) -> Result<FrothEval, ModelError> {
        let v_g_star = relations::interfacial_gas_velocity(
            inputs.q_feed,
            state.q_tails,
            q_conc,
            inputs.q_air,
            self.constants.a_cell,
        );
        if !(v_g_star > 0.0) {
            return Ok(FrothEval {
                v_g_star,
                alpha: 0.0,
                alpha_star: 0.0,
                tau_f: f64::INFINITY,
                d_b_froth_out: f64::INFINITY,
                q_conc: 0.0,
            });
        }
        let (alpha, alpha_star) = relations::air_recovery(ctx.v_b, v_g_star)?;
        let tau_f = ctx.froth_depth / v_g_star;
        let d_b_froth_out = relations::froth_top_bubble_size(theta.n, theta.c, tau_f, ctx.d_b_int)?;
        let q_next = relations::concentrate_flow(
            alpha,
            alpha_star,
            v_g_star,
            d_b_froth_out,
            ctx.k1,
            self.constants.a_cell,
        );
        Ok(FrothEval { v_g_star, alpha, alpha_star, tau_f, d_b_froth_out, q_conc: q_next })
    }

    /// Solves the implicit loop `v_g* → τ_f → d_b,froth_out → Q_conc → v_g*` by
    /// damped fixed-point iteration seeded at `seed_q_conc`, then evaluates the
    /// recoveries and the concentrate grade at the fixed point.
    pub fn solve_algebraic_loop(
        &self,
        state: &PlantState,
        inputs: &PlantInputs,
        theta: &FrothParameters,
        seed_q_conc: f64,
    ) -> Result<AlgebraicOutputs, ModelError> {
        let ctx = self.loop_context(state, inputs);
        let mut q = seed_q_conc.max(0.0);
        let mut residual = f64::INFINITY;
        let mut converged = None;
        for iteration in 1..=LOOP_MAX_ITERATIONS {
            let eval = self.froth_eval(&ctx, state, inputs, theta, q)?;
            let q_next = (1.0 - LOOP_DAMPING) * q + LOOP_DAMPING * eval.q_conc;
            residual = (q_next - q).abs();
            q = q_next;
            let tol = LOOP_ABS_TOLERANCE.min(LOOP_REL_ULPS * f64::EPSILON * q.abs());
            if residual <= tol {
                converged = Some(iteration);
                break;
            }
        }
        let Some(iterations) = converged else {
            return Err(ModelError::LoopNotConverged {
                iterations: LOOP_MAX_ITERATIONS,
                last_q_conc: q,
                residual,
            });
        };

        let eval = self.froth_eval(&ctx, state, inputs, theta, q)?;
        if !(eval.v_g_star > 0.0) {
            return Err(ModelError::FrothCollapse { v_g_star: eval.v_g_star });
        }
        self.complete_outputs(state, inputs, &ctx, FrothEval { q_conc: q, ..eval }, iterations)
    }

    /// Loop-free evaluation when the interfacial gas velocity is known, as at a
    /// steady operating point where the liquid balance closes.
    fn outputs_at_velocity(
        &self,
        state: &PlantState,
        inputs: &PlantInputs,
        theta: &FrothParameters,
        v_g_star: f64,
    ) -> Result<AlgebraicOutputs, ModelError> {
        let ctx = self.loop_context(state, inputs);
        let (alpha, alpha_star) = relations::air_recovery(ctx.v_b, v_g_star)?;
        let tau_f = ctx.froth_depth / v_g_star;
        let d_b_froth_out = relations::froth_top_bubble_size(theta.n, theta.c, tau_f, ctx.d_b_int)?;
        let q_conc = relations::concentrate_flow(
            alpha,
            alpha_star,
            v_g_star,
            d_b_froth_out,
            ctx.k1,
            self.constants.a_cell,
        );
        let eval = FrothEval { v_g_star, alpha, alpha_star, tau_f, d_b_froth_out, q_conc };
        self.complete_outputs(state, inputs, &ctx, eval, 0)
    }

    fn complete_outputs(
        &self,
        state: &PlantState,
        inputs: &PlantInputs,
        ctx: &LoopContext,
        eval: FrothEval,
        iterations: usize,
    ) -> Result<AlgebraicOutputs, ModelError> {
        let v_set = self.closures.settling_velocity(state, inputs);
        let d_axial = self.closures.axial_dispersion(inputs.q_air);
        let classes = self.constants.mineral_classes();
        let mut r_f = Vec::with_capacity(classes);
        let mut r_ent = Vec::with_capacity(classes);
        let mut r_f_clipped = false;
        for i in 0..classes {
            if let Some((rf, re)) = self.closures.recovery_override(i) {
                r_f.push(rf);
                r_ent.push(re);
                continue;
            }
            let (rf, clipped) = relations::froth_recovery(
                eval.alpha,
                eval.alpha_star,
                eval.v_g_star,
                v_set[i],
                ctx.d_b_int,
                eval.d_b_froth_out,
            )?;
            r_f_clipped |= clipped;
            r_f.push(rf);
            r_ent.push(relations::entrainment_factor(
                eval.alpha,
                eval.alpha_star,
                eval.v_g_star,
                v_set[i],
                ctx.froth_depth,
                d_axial,
            )?);
        }

        let v_pulp = self.pulp_volume(state)?;
        let c_tails: Vec<f64> = state.m.iter().map(|m| m / v_pulp).collect();
        let s_b = 6.0 * eval.v_g_star / ctx.d_b_int;
        let g1 = relations::concentrate_grade(
            &c_tails,
            &self.constants.floatability,
            self.constants.v_cell,
            s_b,
            eval.q_conc,
            &r_f,
            &r_ent,
        )?;

        Ok(AlgebraicOutputs {
            v_g_star: eval.v_g_star,
            q_conc: eval.q_conc,
            d_b_froth_out: eval.d_b_froth_out,
            d_b_int: ctx.d_b_int,
            tau_f: eval.tau_f,
            alpha: eval.alpha,
            alpha_star: eval.alpha_star,
            r_f,
            r_ent,
            g1,
            iterations,
            r_f_clipped,
        })
    }

    /// Total gas velocity out of the pulp, `Σ_k v_k ε_k / (1 + ε_total)` [m/s].
    pub fn gas_velocity_out_total(&self, state: &PlantState, inputs: &PlantInputs) -> f64 {
        let v_out = self.closures.gas_velocity_out(state, inputs);
        let eps_tot = state.eps_total();
        v_out.iter().zip(&state.eps0).map(|(v, e)| v * e).sum::<f64>() / (1.0 + eps_tot)
    }

    /// Per-class mass flows `(feed, tails, true flotation, entrainment)` [kg/s].
    pub fn mass_flows(
        &self,
        state: &PlantState,
        inputs: &PlantInputs,
        alg: &AlgebraicOutputs,
    ) -> Result<Vec<[f64; 4]>, ModelError> {
        let v_pulp = self.pulp_volume(state)?;
        let s_b = 6.0 * alg.v_g_star / alg.d_b_int;
        Ok((0..self.constants.mineral_classes())
            .map(|i| {
                let c_tails = state.m[i] / v_pulp;
                [
                    inputs.c_feed[i] * inputs.q_feed,
                    c_tails * state.q_tails,
                    self.constants.v_cell * self.constants.floatability[i] * s_b * alg.r_f[i] * c_tails,
                    alg.q_conc * alg.r_ent[i] * c_tails,
                ]
            })
            .collect())
    }

    /// Time derivative of the plant state given the converged algebraics.
    ///
    /// The level controller acts on `e = h_p − h_p^SP` so that a high level
    /// opens the tails valve.
    pub fn state_derivatives(
        &self,
        state: &PlantState,
        inputs: &PlantInputs,
        alg: &AlgebraicOutputs,
    ) -> Result<PlantState, ModelError> {
        let k = &self.constants;
        let flows = self.mass_flows(state, inputs, alg)?;
        let dm = flows.iter().map(|[feed, tails, tf, ent]| feed - tails - tf - ent).collect();

        let dh = alg.v_g_star - self.gas_velocity_out_total(state, inputs);
        let dq_tails = k.k_p * dh + (k.k_p / k.tau_i) * (state.h_p - inputs.h_p_sp);

        let eps_tot = state.eps_total();
        let v_out = self.closures.gas_velocity_out(state, inputs);
        let net_liquid = inputs.q_feed - state.q_tails - alg.q_conc;
        let scale = (1.0 + eps_tot) / (k.a_cell * state.h_p);
        let deps = state
            .eps0
            .iter()
            .zip(&inputs.psi)
            .zip(&v_out)
            .map(|((e, psi), v)| {
                scale * (inputs.q_air * psi - k.a_cell * v * e / (1.0 + eps_tot) - net_liquid * e)
            })
            .collect();

        Ok(PlantState { q_tails: dq_tails, h_p: dh, m: dm, eps0: deps })
    }

    /// Solves the loop and returns `(d state/dt, algebraics)`.
    pub fn rhs(
        &self,
        state: &PlantState,
        inputs: &PlantInputs,
        theta: &FrothParameters,
        seed_q_conc: f64,
    ) -> Result<(PlantState, AlgebraicOutputs), ModelError> {
        let alg = self.solve_algebraic_loop(state, inputs, theta, seed_q_conc)?;
        let d = self.state_derivatives(state, inputs, &alg)?;
        Ok((d, alg))
    }

    /// Equilibrium of the cell under constant inputs: level at setpoint, gas
    /// holdups balancing supply and rise, liquid balance closed
    /// (`Q_tails = Q_feed − Q_conc`) and class masses at their feed/removal balance.
    pub fn steady_state(
        &self,
        inputs: &PlantInputs,
        theta: &FrothParameters,
    ) -> Result<(PlantState, AlgebraicOutputs), ModelError> {
        let k = &self.constants;
        let classes = k.mineral_classes();
        let bubble_classes = inputs.psi.len();
        let mut state = PlantState {
            q_tails: inputs.q_feed,
            h_p: inputs.h_p_sp,
            m: vec![1.0; classes],
            eps0: vec![0.0; bubble_classes],
        };
        let j = inputs.q_air / k.a_cell;
        let v_out = self.closures.gas_velocity_out(&state, inputs);
        let ratios: Vec<f64> = inputs.psi.iter().zip(&v_out).map(|(psi, v)| j * psi / v).collect();
        let s: f64 = ratios.iter().sum();
        if !(s < 0.5) {
            return Err(ModelError::Infeasible {
                what: "gas holdup at steady state would reach one",
                value: s / (1.0 - s),
            });
        }
        let eps_tot = s / (1.0 - s);
        state.eps0 = ratios.iter().map(|r| r * (1.0 + eps_tot)).collect();

        // m does not enter the froth side, so the algebraics are final once q_tails is.
        let alg = self.outputs_at_velocity(&state, inputs, theta, j)?;
        state.q_tails = inputs.q_feed - alg.q_conc;
        if state.q_tails < 0.0 {
            return Err(ModelError::Infeasible {
                what: "steady tails flow would be negative",
                value: state.q_tails,
            });
        }
        let v_pulp = self.pulp_volume(&state)?;
        let s_b = 6.0 * alg.v_g_star / alg.d_b_int;
        state.m = (0..classes)
            .map(|i| {
                let removal = state.q_tails
                    + k.v_cell * k.floatability[i] * s_b * alg.r_f[i]
                    + alg.q_conc * alg.r_ent[i];
                inputs.c_feed[i] * inputs.q_feed * v_pulp / removal
            })
            .collect();
        let alg = self.outputs_at_velocity(&state, inputs, theta, j)?;
        Ok((state, alg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::OperatingPoint;

    const THETA: FrothParameters = FrothParameters::new(1.0, 6.38e-4);

    fn plant_with(params: SurrogateParams) -> Plant {
        let k = PhysicalConstants::reference();
        let closures = Arc::new(SurrogateClosures::new(params, &k));
        Plant::new(k, closures)
    }

    fn nominal_inputs() -> PlantInputs {
        OperatingPoint::default().inputs(1.0e-2 / 3600.0, 0.38)
    }

    fn off_equilibrium(plant: &Plant, inputs: &PlantInputs) -> PlantState {
        let (mut s, _) = plant.steady_state(inputs, &THETA).unwrap();
        s.h_p -= 0.01;
        s.q_tails *= 0.9;
        s
    }

    /// Damped fixed-point iteration on the concentrate flow, run far past the
    /// production cap.
    fn brute_force_q_conc(plant: &Plant, state: &PlantState, inputs: &PlantInputs, iterations: usize) -> f64 {
        let ctx = plant.loop_context(state, inputs);
        let mut q = 0.0;
        for _ in 0..iterations {
            let next = plant.froth_eval(&ctx, state, inputs, &THETA, q).unwrap().q_conc;
            q = 0.5 * q + 0.5 * next;
        }
        q
    }

    #[test]
    fn first_iterate_without_bursting_is_the_open_balance() {
        let plant = plant_with(SurrogateParams { burst_a: 0.0, burst_b: 0.0, burst_c: 0.0, ..Default::default() });
        let inputs = nominal_inputs();
        let state = off_equilibrium(&plant, &inputs);
        let ctx = plant.loop_context(&state, &inputs);
        assert_eq!(ctx.v_b, 0.0);
        let eval = plant.froth_eval(&ctx, &state, &inputs, &THETA, 0.0).unwrap();
        let expected = (inputs.q_feed - state.q_tails + inputs.q_air) / plant.constants.a_cell;
        assert_eq!(eval.v_g_star, expected);
        assert_eq!(eval.alpha_star, 1.0);
    }

    #[test]
    fn loop_matches_a_long_fixed_point_run() {
        let plant = plant_with(SurrogateParams::default());
        let inputs = nominal_inputs();
        let state = off_equilibrium(&plant, &inputs);
        let alg = plant.solve_algebraic_loop(&state, &inputs, &THETA, 0.0).unwrap();
        let oracle = brute_force_q_conc(&plant, &state, &inputs, 10_000);
        assert!(((alg.q_conc - oracle) / oracle).abs() < 1e-10, "{} vs {oracle}", alg.q_conc);

        let ctx = plant.loop_context(&state, &inputs);
        let implied = plant.froth_eval(&ctx, &state, &inputs, &THETA, alg.q_conc).unwrap().q_conc;
        assert!((implied - alg.q_conc).abs() < 2.0 * LOOP_ABS_TOLERANCE);
    }

    #[test]
    fn loop_seeded_with_its_own_output_stops_after_one_iteration() {
        let plant = plant_with(SurrogateParams::default());
        let inputs = nominal_inputs();
        let state = off_equilibrium(&plant, &inputs);
        let first = plant.solve_algebraic_loop(&state, &inputs, &THETA, 0.0).unwrap();
        assert!(first.iterations > 1);
        let again = plant.solve_algebraic_loop(&state, &inputs, &THETA, first.q_conc).unwrap();
        assert_eq!(again.iterations, 1);
        assert!((again.q_conc - first.q_conc).abs() < 2.0 * LOOP_ABS_TOLERANCE);
    }

    #[test]
    fn steady_state_has_zero_derivatives() {
        let plant = plant_with(SurrogateParams::default());
        let inputs = nominal_inputs();
        let (state, alg) = plant.steady_state(&inputs, &THETA).unwrap();
        let (d, loop_alg) = plant.rhs(&state, &inputs, &THETA, alg.q_conc).unwrap();
        assert!((loop_alg.q_conc - alg.q_conc).abs() < 1e-15);
        assert!(d.h_p.abs() < 1e-15, "dh/dt = {}", d.h_p);
        assert!(d.q_tails.abs() < 1e-18, "dQ/dt = {}", d.q_tails);
        for (dm, m) in d.m.iter().zip(&state.m) {
            assert!((dm / m).abs() < 1e-12, "dm/dt = {dm}");
        }
        for de in &d.eps0 {
            assert!(de.abs() < 1e-12, "deps/dt = {de}");
        }
    }

    #[test]
    fn level_controller_is_quiet_at_setpoint() {
        let plant = plant_with(SurrogateParams::default());
        let inputs = nominal_inputs();
        let (state, alg) = plant.steady_state(&inputs, &THETA).unwrap();
        let d = plant.state_derivatives(&state, &inputs, &alg).unwrap();
        assert_eq!(state.h_p, inputs.h_p_sp);
        assert!(d.q_tails.abs() < 1e-18);
    }

    #[test]
    fn high_level_opens_the_tails_valve() {
        let plant = plant_with(SurrogateParams::default());
        let inputs = nominal_inputs();
        let (mut state, alg) = plant.steady_state(&inputs, &THETA).unwrap();
        state.h_p += 0.01;
        let d = plant.state_derivatives(&state, &inputs, &alg).unwrap();
        let k = &plant.constants;
        assert!(d.q_tails > 0.0);
        assert!((d.q_tails - (k.k_p * d.h_p + k.k_p / k.tau_i * 0.01)).abs() < 1e-20);
    }

    #[test]
    fn holdup_is_still_without_sources() {
        let plant = plant_with(SurrogateParams { c_rise: 0.0, ..Default::default() });
        let inputs = PlantInputs { q_air: 0.0, ..nominal_inputs() };
        let (mut state, mut alg) = plant_with(SurrogateParams::default()).steady_state(&nominal_inputs(), &THETA).unwrap();
        state.q_tails = inputs.q_feed - alg.q_conc;
        alg.v_g_star = 1e-3;
        let d = plant.state_derivatives(&state, &inputs, &alg).unwrap();
        assert!(d.eps0.iter().all(|e| e.abs() < 1e-18), "{:?}", d.eps0);
    }

    #[test]
    fn pulp_volume_follows_the_holdup() {
        let plant = plant_with(SurrogateParams::default());
        let state = PlantState { q_tails: 0.0, h_p: 0.4, m: vec![1.0, 1.0], eps0: vec![0.1, 0.1] };
        let h0 = 0.8 * 0.4;
        let expected = h0 * 2.0e-4 * (1.0 + 2.0 * 0.1 / 0.9);
        assert!((plant.pulp_volume(&state).unwrap() - expected).abs() < 1e-18);
        let bad = PlantState { eps0: vec![1.0, 0.0], ..state };
        assert!(matches!(plant.pulp_volume(&bad), Err(ModelError::SingularHoldup { class: 0 })));
    }
}
