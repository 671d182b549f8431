//! Fixed-step time integration of the cell DAE, parameter schedules and noisy
//! grade measurements.

mod integrator;
mod schedule;

pub use integrator::{advance, integrate_step, rk4_step};
pub use schedule::{InputTrajectory, ParameterSchedule};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AlgebraicOutputs, FrothParameters, ModelError, Plant, PlantInputs, PlantState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("model fault at t = {t} s: {source}")]
    Model { t: f64, source: ModelError },
    #[error("state invariant violated at t = {t} s: {detail}")]
    Invariant { t: f64, detail: String },
    #[error("invalid simulation setup: {0}")]
    Setup(String),
}

impl SimError {
    pub fn model(t: f64) -> impl FnOnce(ModelError) -> SimError {
        move |source| SimError::Model { t, source }
    }

    /// Same fault, re-stamped with the absolute time it occurred at.
    pub fn at(self, t: f64) -> SimError {
        match self {
            SimError::Model { source, .. } => SimError::Model { t, source },
            SimError::Invariant { detail, .. } => SimError::Invariant { t, detail },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Sampling interval [s].
    pub dt: f64,
    /// Horizon [s].
    pub t_end: f64,
    /// Standard deviation of the additive grade measurement noise.
    pub noise_std: f64,
    pub rng_seed: u64,
    /// Runge-Kutta micro-steps per sampling interval.
    pub substeps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 1.0, t_end: 2400.0, noise_std: 1e-3, rng_seed: 0, substeps: 10 }
    }
}

impl SimConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            out.push(format!("sim.dt must be > 0 (got {})", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            out.push(format!("sim.t_end must be > 0 (got {})", self.t_end));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            out.push(format!("sim.noise_std must be >= 0 (got {})", self.noise_std));
        }
        if self.substeps < 1 {
            out.push("sim.substeps must be >= 1".into());
        }
        out
    }

    pub fn samples(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// One sampling instant of a simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub t: f64,
    pub g1_true: f64,
    pub g1_measured: f64,
    pub state: PlantState,
    pub algebraics: AlgebraicOutputs,
    pub theta_true: FrothParameters,
}

/// Counters collected while simulating.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimDiagnostics {
    /// Sampling instants where the active piecewise branch differs from the previous one.
    pub branch_switches: usize,
    /// Sampling instants with a clipped froth recovery.
    pub r_f_clips: usize,
    pub max_loop_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    /// Records at `t_k = k·dt`, `k = 0..=N`.
    pub records: Vec<MeasurementRecord>,
    pub diagnostics: SimDiagnostics,
}

/// Evaluates the algebraic outputs at a sampling instant.
pub fn observe(
    plant: &Plant,
    state: &PlantState,
    inputs: &PlantInputs,
    theta: &FrothParameters,
    seed_q_conc: f64,
    t: f64,
) -> Result<AlgebraicOutputs, SimError> {
    plant.solve_algebraic_loop(state, inputs, theta, seed_q_conc).map_err(SimError::model(t))
}

/// Simulates the true plant from `initial` and draws noisy grade measurements.
///
/// Inputs and the true parameters are held over each sampling interval at
/// their value at the interval start.
pub fn simulate(
    plant: &Plant,
    initial: &PlantState,
    inputs: &InputTrajectory,
    schedule: &ParameterSchedule,
    cfg: &SimConfig,
) -> Result<SimRun, SimError> {
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(SimError::Setup(violations.join("; ")));
    }
    let n = cfg.samples();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| SimError::Setup(e.to_string()))?;
    let mut measure = |g1: f64| if cfg.noise_std > 0.0 { g1 + noise.sample(&mut rng) } else { g1 };

    let mut diagnostics = SimDiagnostics::default();
    let mut records = Vec::with_capacity(n + 1);
    let mut state = initial.clone();
    let theta0 = schedule.at(0.0);
    let mut alg = observe(plant, &state, &inputs.at(0.0), &theta0, 0.0, 0.0)?;
    let mut branch = alg.stable_branch();
    records.push(MeasurementRecord {
        t: 0.0,
        g1_true: alg.g1,
        g1_measured: measure(alg.g1),
        state: state.clone(),
        algebraics: alg.clone(),
        theta_true: theta0,
    });

    for k in 1..=n {
        let t_prev = (k - 1) as f64 * cfg.dt;
        let t = k as f64 * cfg.dt;
        let theta_hold = schedule.at(t_prev);
        let (next, seed) = advance(
            plant,
            &state,
            &inputs.at(t_prev),
            &theta_hold,
            cfg.dt,
            cfg.substeps,
            alg.q_conc,
        )
        .map_err(|e| e.at(t_prev))?;
        state = next;
        let theta = schedule.at(t);
        alg = observe(plant, &state, &inputs.at(t), &theta, seed, t)?;

        if alg.stable_branch() != branch {
            diagnostics.branch_switches += 1;
            branch = alg.stable_branch();
        }
        if alg.r_f_clipped {
            diagnostics.r_f_clips += 1;
        }
        diagnostics.max_loop_iterations = diagnostics.max_loop_iterations.max(alg.iterations);

        records.push(MeasurementRecord {
            t,
            g1_true: alg.g1,
            g1_measured: measure(alg.g1),
            state: state.clone(),
            algebraics: alg.clone(),
            theta_true: theta,
        });
    }
    Ok(SimRun { records, diagnostics })
}

/// Settled initial condition: the analytic equilibrium under `inputs` and
/// `theta`, then `settle_time` seconds of simulation that are discarded.
pub fn settled_initial_state(
    plant: &Plant,
    inputs: &PlantInputs,
    theta: &FrothParameters,
    settle_time: f64,
    cfg: &SimConfig,
) -> Result<PlantState, SimError> {
    let (mut state, alg) = plant.steady_state(inputs, theta).map_err(SimError::model(-settle_time))?;
    let mut seed = alg.q_conc;
    let steps = (settle_time / cfg.dt).round() as usize;
    for k in 0..steps {
        let t = -settle_time + k as f64 * cfg.dt;
        let (next, s) = advance(plant, &state, inputs, theta, cfg.dt, cfg.substeps, seed).map_err(|e| e.at(t))?;
        state = next;
        seed = s;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::harness::OperatingPoint;
    use crate::model::{ClosureSet, PhysicalConstants, SurrogateClosures, SurrogateParams};

    const THETA: FrothParameters = FrothParameters::new(1.0, 6.38e-4);

    fn nominal_inputs() -> PlantInputs {
        OperatingPoint::default().inputs(1.0e-2 / 3600.0, 0.38)
    }

    fn short_run(noise_std: f64, seed: u64, t_end: f64) -> SimRun {
        let plant = Plant::reference();
        let inputs = nominal_inputs();
        let (initial, _) = plant.steady_state(&inputs, &THETA).unwrap();
        let mut varied = inputs.clone();
        varied.h_p_sp = 0.36;
        let trajectory = InputTrajectory::new(1.0, vec![inputs, varied]);
        let cfg = SimConfig { t_end, noise_std, rng_seed: seed, ..SimConfig::default() };
        simulate(&plant, &initial, &trajectory, &ParameterSchedule::constant(THETA), &cfg).unwrap()
    }

    #[test]
    fn noiseless_measurements_equal_the_truth() {
        let run = short_run(0.0, 3, 50.0);
        assert_eq!(run.records.len(), 51);
        assert!(run.records.iter().all(|r| r.g1_measured == r.g1_true));
        assert!(run.records.iter().enumerate().all(|(k, r)| r.t == k as f64));
    }

    #[test]
    fn same_seed_same_records() {
        assert_eq!(short_run(1e-3, 11, 60.0), short_run(1e-3, 11, 60.0));
        assert_ne!(short_run(1e-3, 11, 60.0).records, short_run(1e-3, 12, 60.0).records);
    }

    #[test]
    fn noise_has_the_configured_spread() {
        let run = short_run(1e-3, 5, 2400.0);
        let e: Vec<f64> = run.records[1..].iter().map(|r| r.g1_measured - r.g1_true).collect();
        let n = e.len() as f64;
        let mean = e.iter().sum::<f64>() / n;
        let std = (e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        // 99 % chi-square interval for 2399 degrees of freedom is about ±3.8 %
        assert!((0.9e-3..=1.1e-3).contains(&std), "std {std}");
    }

    #[test]
    fn records_keep_the_state_invariants() {
        let run = short_run(1e-3, 1, 300.0);
        for r in &run.records {
            assert!(r.state.violations(0.6).is_empty(), "t = {}: {:?}", r.t, r.state.violations(0.6));
            assert!((0.0..=1.0).contains(&r.g1_true));
        }
    }

    /// Surrogates with the valuable class forced to zero recovery. The gangue
    /// keeps its recoveries so the grade stays defined.
    struct NoRecovery(SurrogateClosures);

    impl ClosureSet for NoRecovery {
        fn gas_velocity_out(&self, s: &PlantState, u: &PlantInputs) -> Vec<f64> {
            self.0.gas_velocity_out(s, u)
        }
        fn interfacial_bubble_size(&self, s: &PlantState, u: &PlantInputs) -> f64 {
            self.0.interfacial_bubble_size(s, u)
        }
        fn settling_velocity(&self, s: &PlantState, u: &PlantInputs) -> Vec<f64> {
            self.0.settling_velocity(s, u)
        }
        fn axial_dispersion(&self, q_air: f64) -> f64 {
            self.0.axial_dispersion(q_air)
        }
        fn k1(&self, s: &PlantState, u: &PlantInputs) -> f64 {
            self.0.k1(s, u)
        }
        fn bursting_rate(&self, q_air: f64) -> f64 {
            self.0.bursting_rate(q_air)
        }
        fn recovery_override(&self, class: usize) -> Option<(f64, f64)> {
            (class == 0).then_some((0.0, 0.0))
        }
    }

    #[test]
    fn mass_is_conserved_without_recovery_or_feed() {
        let mut k = PhysicalConstants::reference();
        k.k_p = 0.0;
        let closures = NoRecovery(SurrogateClosures::new(SurrogateParams::default(), &k));
        let plant = Plant::new(k, Arc::new(closures));
        let inputs = PlantInputs { q_feed: 0.0, ..nominal_inputs() };
        let (mut initial, _) = Plant::reference().steady_state(&nominal_inputs(), &THETA).unwrap();
        initial.q_tails = 0.0;
        let cfg = SimConfig { t_end: 1000.0, noise_std: 0.0, ..SimConfig::default() };
        let run = simulate(&plant, &initial, &InputTrajectory::constant(1.0, inputs), &ParameterSchedule::constant(THETA), &cfg)
            .unwrap();
        let m0 = initial.m[0];
        let drift = run.records.iter().map(|r| ((r.state.m[0] - m0) / m0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-9, "relative drift {drift}");
        assert!(run.records.last().unwrap().state.m[1] < initial.m[1]);
        assert_ne!(run.records.last().unwrap().state.h_p, initial.h_p);
    }

    #[test]
    fn invalid_config_is_a_setup_error() {
        let plant = Plant::reference();
        let inputs = nominal_inputs();
        let (initial, _) = plant.steady_state(&inputs, &THETA).unwrap();
        let cfg = SimConfig { substeps: 0, noise_std: -1.0, ..SimConfig::default() };
        let err = simulate(&plant, &initial, &InputTrajectory::constant(1.0, inputs), &ParameterSchedule::constant(THETA), &cfg)
            .unwrap_err();
        let SimError::Setup(msg) = err else { panic!("{err:?}") };
        assert!(msg.contains("substeps") && msg.contains("noise_std"), "{msg}");
    }
}
