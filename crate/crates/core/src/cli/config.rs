//! The run configuration file. Sections mirror the library types; air flows
//! are given in m³/h and everything else in SI.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::estimator::{EstimatorConfig, GradientMode, NOMINAL_THETA};
use crate::harness::{parameter_schedule_benchmark, OperatingPoint, ScenarioConfig};
use crate::model::{FrothParameters, PhysicalConstants, Plant, SurrogateClosures, SurrogateParams};
use crate::sim::{ParameterSchedule, SimConfig};

/// The checked-in reference configuration.
pub const REFERENCE_CONFIG: &str = include_str!("../../config/reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PhysicalConstants,
    pub closures: SurrogateParams,
    pub inputs: OperatingPoint,
    pub scenario: ScenarioSection,
    pub sim: SimSection,
    pub estimator: EstimatorSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// +20 % steps in C then n.
    Benchmark,
    /// The offline guess held over the whole horizon.
    Constant,
    /// Explicit `segments`.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub ids: Vec<u8>,
    pub seeds: Vec<u64>,
    pub h_p_limits: [f64; 2],
    pub h_p_hold: f64,
    pub q_air_limits_m3h: [f64; 2],
    pub q_air_hold: f64,
    pub horizon: f64,
    pub offline_window: f64,
    pub settle_time: f64,
    pub noise_std: f64,
    /// `[n, C]` starting point of the offline fit.
    pub theta_guess: [f64; 2],
    pub schedule: ScheduleKind,
    /// `[t_start, n, C]` rows, only read for the custom schedule.
    #[serde(default)]
    pub segments: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub lambda: f64,
    pub l0_scale: f64,
    pub eps_rel: f64,
    pub theta_min: [f64; 2],
    pub theta_max: [f64; 2],
    #[serde(default)]
    pub gradient_mode: GradientMode,
    pub max_frozen: usize,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenarios: Vec<u8>,
    pub seeds: Vec<u64>,
    pub noise_std: Option<f64>,
    pub lambda: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn reference() -> Self {
        Self::parse(REFERENCE_CONFIG).expect("reference config parses")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if !o.scenarios.is_empty() {
            self.scenario.ids = o.scenarios.clone();
        }
        if !o.seeds.is_empty() {
            self.scenario.seeds = o.seeds.clone();
        }
        if let Some(x) = o.noise_std {
            self.scenario.noise_std = x;
        }
        if let Some(x) = o.lambda {
            self.estimator.lambda = x;
        }
    }

    pub fn schedule(&self) -> Result<ParameterSchedule, String> {
        let [n, c] = self.scenario.theta_guess;
        match self.scenario.schedule {
            ScheduleKind::Benchmark => Ok(parameter_schedule_benchmark()),
            ScheduleKind::Constant => ParameterSchedule::new(vec![(0.0, FrothParameters::new(n, c))]),
            ScheduleKind::Custom => ParameterSchedule::new(
                self.scenario.segments.iter().map(|[t, n, c]| (*t, FrothParameters::new(*n, *c))).collect(),
            ),
        }
        .map_err(|e| format!("scenario.segments: {e}"))
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            dt: self.sim.dt,
            t_end: self.scenario.horizon,
            noise_std: self.scenario.noise_std,
            rng_seed: 0,
            substeps: self.sim.substeps,
        }
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        let e = &self.estimator;
        EstimatorConfig {
            lambda: e.lambda,
            l0_scale: e.l0_scale,
            eps_rel: e.eps_rel,
            theta_min: FrothParameters::from_array(e.theta_min),
            theta_max: FrothParameters::from_array(e.theta_max),
            gradient_mode: e.gradient_mode,
            max_frozen: e.max_frozen,
        }
    }

    /// One scenario configuration per `(id, seed)`, ids outermost.
    pub fn scenarios(&self) -> Result<Vec<ScenarioConfig>, String> {
        let schedule = self.schedule()?;
        let s = &self.scenario;
        Ok(s.ids
            .iter()
            .flat_map(|&id| s.seeds.iter().map(move |&seed| (id, seed)))
            .map(|(scenario_id, seed)| ScenarioConfig {
                scenario_id,
                h_p_limits: s.h_p_limits,
                h_p_hold: s.h_p_hold,
                q_air_limits_m3h: s.q_air_limits_m3h,
                q_air_hold: s.q_air_hold,
                horizon: s.horizon,
                offline_window: s.offline_window,
                settle_time: s.settle_time,
                schedule: schedule.clone(),
                theta_guess: FrothParameters::from_array(s.theta_guess),
                operating_point: self.inputs.clone(),
                noise_std: s.noise_std,
                seed,
            })
            .collect())
    }

    pub fn plant(&self) -> Plant {
        Plant::new(self.plant.clone(), Arc::new(SurrogateClosures::new(self.closures.clone(), &self.plant)))
    }

    /// Every violated invariant across all sections.
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.plant.violations();
        out.extend(self.closures.violations(self.plant.mineral_classes()));
        if self.inputs.c_feed.len() != self.plant.mineral_classes() {
            out.push(format!(
                "inputs.c_feed needs {} entries (got {})",
                self.plant.mineral_classes(),
                self.inputs.c_feed.len()
            ));
        }
        if self.scenario.ids.is_empty() {
            out.push("scenario.ids must list at least one scenario".into());
        }
        if self.scenario.seeds.is_empty() {
            out.push("scenario.seeds must list at least one seed".into());
        }
        let schedule = match self.schedule() {
            Ok(s) => s,
            Err(e) => {
                out.push(e);
                ParameterSchedule::constant(NOMINAL_THETA)
            }
        };
        let template = ScenarioConfig {
            scenario_id: 1,
            h_p_limits: self.scenario.h_p_limits,
            h_p_hold: self.scenario.h_p_hold,
            q_air_limits_m3h: self.scenario.q_air_limits_m3h,
            q_air_hold: self.scenario.q_air_hold,
            horizon: self.scenario.horizon,
            offline_window: self.scenario.offline_window,
            settle_time: self.scenario.settle_time,
            schedule,
            theta_guess: FrothParameters::from_array(self.scenario.theta_guess),
            operating_point: self.inputs.clone(),
            noise_std: self.scenario.noise_std,
            seed: 0,
        };
        out.extend(template.violations(self.plant.h_total));
        for id in &self.scenario.ids {
            if !matches!(id, 1 | 2) {
                out.push(format!("scenario.ids: unknown scenario {id} (expected 1 or 2)"));
            }
        }
        out.retain(|v| !v.starts_with("scenario.scenario_id"));
        out.extend(self.sim_config().violations());
        let est = self.estimator_config();
        out.extend(est.violations());
        let guess = FrothParameters::from_array(self.scenario.theta_guess);
        if est.project(guess) != guess {
            out.push("scenario.theta_guess must lie inside the estimator box".into());
        }
        out
    }

    /// The configuration with unit conversions applied, for display.
    pub fn resolved(&self) -> ResolvedConfig {
        let [lo, hi] = self.scenario.q_air_limits_m3h;
        ResolvedConfig {
            plant: self.plant.clone(),
            closures: self.closures.clone(),
            inputs: self.inputs.clone(),
            scenario: ResolvedScenario {
                ids: self.scenario.ids.clone(),
                seeds: self.scenario.seeds.clone(),
                h_p_limits_m: self.scenario.h_p_limits,
                h_p_hold_s: self.scenario.h_p_hold,
                q_air_limits_m3s: [lo / 3600.0, hi / 3600.0],
                q_air_hold_s: self.scenario.q_air_hold,
                horizon_s: self.scenario.horizon,
                offline_window_s: self.scenario.offline_window,
                settle_time_s: self.scenario.settle_time,
                noise_std: self.scenario.noise_std,
                theta_guess: self.scenario.theta_guess,
                schedule: self
                    .schedule()
                    .map(|s| s.segments().iter().map(|(t, th)| [*t, th.n, th.c]).collect())
                    .unwrap_or_default(),
            },
            sim: self.sim.clone(),
            estimator: self.estimator.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub plant: PhysicalConstants,
    pub closures: SurrogateParams,
    pub inputs: OperatingPoint,
    pub scenario: ResolvedScenario,
    pub sim: SimSection,
    pub estimator: EstimatorSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedScenario {
    pub ids: Vec<u8>,
    pub seeds: Vec<u64>,
    pub h_p_limits_m: [f64; 2],
    pub h_p_hold_s: f64,
    pub q_air_limits_m3s: [f64; 2],
    pub q_air_hold_s: f64,
    pub horizon_s: f64,
    pub offline_window_s: f64,
    pub settle_time_s: f64,
    pub noise_std: f64,
    pub theta_guess: [f64; 2],
    /// `[t_start, n, C]`.
    pub schedule: Vec<[f64; 3]>,
}
