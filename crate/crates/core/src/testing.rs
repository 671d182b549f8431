//! Shared fixtures for unit tests.

use crate::estimator::{EstimatorState, PredictionContext, NOMINAL_THETA};
use crate::harness::{generate_inputs, OperatingPoint, ScenarioConfig};
use crate::model::{FrothParameters, Plant, PlantInputs, PlantState};
use crate::sim::{settled_initial_state, simulate, InputTrajectory, ParameterSchedule, SimConfig, SimRun};

pub(crate) fn nominal_inputs() -> PlantInputs {
    OperatingPoint::default().inputs(1.0e-2 / 3600.0, 0.38)
}

/// Reference plant driven by one of the benchmark input sequences.
pub(crate) struct Truth {
    pub plant: Plant,
    pub inputs: InputTrajectory,
    pub initial: PlantState,
    pub run: SimRun,
}

impl Truth {
    pub fn new(scenario_id: u8, schedule: ParameterSchedule, noise_std: f64, t_end: f64) -> Self {
        let plant = Plant::reference();
        let inputs = generate_inputs(&ScenarioConfig::benchmark(scenario_id, 0), 1.0).unwrap();
        let cfg = SimConfig { t_end, noise_std, ..SimConfig::default() };
        let initial = settled_initial_state(&plant, &inputs.at(0.0), &schedule.at(0.0), 300.0, &cfg).unwrap();
        let run = simulate(&plant, &initial, &inputs, &schedule, &cfg).unwrap();
        Self { plant, inputs, initial, run }
    }

    pub fn nominal(scenario_id: u8, t_end: f64) -> Self {
        Self::new(scenario_id, ParameterSchedule::constant(NOMINAL_THETA), 0.0, t_end)
    }

    pub fn ctx(&self) -> PredictionContext<'_> {
        PredictionContext { plant: &self.plant, inputs: &self.inputs, dt: 1.0, substeps: 10 }
    }

    /// Estimator carrying the true state at sample `k`.
    pub fn estimator_at(&self, k: usize, theta: FrothParameters, l: nalgebra::Matrix2<f64>) -> EstimatorState {
        let r = &self.run.records[k];
        EstimatorState::new(theta, l, r.state.clone(), r.algebraics.q_conc)
    }

    pub fn measurements(&self, from: usize) -> Vec<(f64, f64)> {
        self.run.records[from..].iter().map(|r| (r.t, r.g1_measured)).collect()
    }
}
