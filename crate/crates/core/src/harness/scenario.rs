use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::estimator::NOMINAL_THETA;
use crate::model::{FrothParameters, PlantInputs};
use crate::sim::{InputTrajectory, ParameterSchedule};

use super::{parameter_schedule_benchmark, HarnessError};

/// Inputs the scenarios leave constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Feed flow [m³/s].
    pub q_feed: f64,
    /// Feed concentration per mineralogical class [kg/m³].
    pub c_feed: Vec<f64>,
    /// Bubble-class proportions.
    pub psi: Vec<f64>,
    /// Pulp bubble diameter per class [m].
    pub d_b_pulp: Vec<f64>,
}

impl Default for OperatingPoint {
    fn default() -> Self {
        Self {
            q_feed: 1.0e-5,
            c_feed: vec![15.0, 285.0],
            psi: vec![0.1, 0.2, 0.4, 0.2, 0.1],
            d_b_pulp: vec![0.8e-3, 1.0e-3, 1.2e-3, 1.4e-3, 1.6e-3],
        }
    }
}

impl OperatingPoint {
    pub fn inputs(&self, q_air: f64, h_p_sp: f64) -> PlantInputs {
        PlantInputs {
            q_air,
            q_feed: self.q_feed,
            c_feed: self.c_feed.clone(),
            h_p_sp,
            psi: self.psi.clone(),
            d_b_pulp: self.d_b_pulp.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// 1: air staircase up, 2: air staircase down.
    pub scenario_id: u8,
    /// Pulp level setpoint range [m].
    pub h_p_limits: [f64; 2],
    /// Setpoint hold time [s].
    pub h_p_hold: f64,
    /// Air flow range [m³/h].
    pub q_air_limits_m3h: [f64; 2],
    /// Air flow hold time [s].
    pub q_air_hold: f64,
    /// Horizon [s].
    pub horizon: f64,
    /// Offline fitting window at the start of the horizon [s].
    pub offline_window: f64,
    /// Discarded simulation time after the analytic equilibrium [s].
    pub settle_time: f64,
    /// True froth parameters over time.
    pub schedule: ParameterSchedule,
    /// Starting point of the offline fit.
    pub theta_guess: FrothParameters,
    pub operating_point: OperatingPoint,
    pub noise_std: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Benchmark defaults for scenario 1 or 2.
    pub fn benchmark(scenario_id: u8, seed: u64) -> Self {
        Self {
            scenario_id,
            h_p_limits: [0.33, 0.42],
            h_p_hold: 160.0,
            q_air_limits_m3h: [9.05e-4, 2.17e-2],
            q_air_hold: 60.0,
            horizon: 2400.0,
            offline_window: 600.0,
            settle_time: 300.0,
            schedule: parameter_schedule_benchmark(),
            theta_guess: NOMINAL_THETA,
            operating_point: OperatingPoint::default(),
            noise_std: 1e-3,
            seed,
        }
    }

    /// Air flow limits converted to m³/s.
    pub fn q_air_limits_si(&self) -> [f64; 2] {
        [self.q_air_limits_m3h[0] / 3600.0, self.q_air_limits_m3h[1] / 3600.0]
    }

    pub fn violations(&self, h_total: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !matches!(self.scenario_id, 1 | 2) {
            out.push(format!("scenario.scenario_id must be 1 or 2 (got {})", self.scenario_id));
        }
        let [h_lo, h_hi] = self.h_p_limits;
        if !(h_lo > 0.0 && h_lo <= h_hi && h_hi < h_total) {
            out.push(format!("scenario.h_p_limits must satisfy 0 < lo <= hi < h_total = {h_total} (got [{h_lo}, {h_hi}])"));
        }
        let [q_lo, q_hi] = self.q_air_limits_m3h;
        if !(q_lo > 0.0 && q_lo <= q_hi && q_hi.is_finite()) {
            out.push(format!("scenario.q_air_limits_m3h must satisfy 0 < lo <= hi (got [{q_lo}, {q_hi}])"));
        }
        for (name, v) in [
            ("scenario.h_p_hold", self.h_p_hold),
            ("scenario.q_air_hold", self.q_air_hold),
            ("scenario.horizon", self.horizon),
            ("scenario.offline_window", self.offline_window),
        ] {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be > 0 (got {v})"));
            }
        }
        if !(self.offline_window < self.horizon) {
            out.push("scenario.offline_window must be shorter than the horizon".into());
        }
        if !(self.settle_time.is_finite() && self.settle_time >= 0.0) {
            out.push(format!("scenario.settle_time must be >= 0 (got {})", self.settle_time));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            out.push(format!("scenario.noise_std must be >= 0 (got {})", self.noise_std));
        }
        if !self.theta_guess.is_valid() {
            out.push("scenario.theta_guess must be positive".into());
        }
        let op = &self.operating_point;
        if !(op.q_feed.is_finite() && op.q_feed > 0.0) {
            out.push(format!("inputs.q_feed must be > 0 (got {})", op.q_feed));
        }
        let probe = op.inputs(self.q_air_limits_si()[0], 0.5 * (h_lo + h_hi));
        out.extend(probe.violations(h_total).into_iter().map(|v| format!("inputs.{v}")));
        out
    }
}

/// Random setpoint holds and a monotone air staircase sampled every `dt`.
///
/// The staircase has one level per air hold, equally spaced over the full
/// range. The setpoint draws use their own stream of the scenario seed, so
/// they do not depend on the measurement noise.
pub fn generate_inputs(cfg: &ScenarioConfig, dt: f64) -> Result<InputTrajectory, HarnessError> {
    let bad = [
        cfg.h_p_hold,
        cfg.q_air_hold,
        cfg.horizon,
        dt,
    ];
    if bad.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !matches!(cfg.scenario_id, 1 | 2) {
        return Err(HarnessError::Config("scenario timing and id must be valid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let [h_lo, h_hi] = cfg.h_p_limits;
    let setpoint_holds = (cfg.horizon / cfg.h_p_hold).ceil() as usize + 1;
    let setpoints: Vec<f64> = (0..setpoint_holds).map(|_| rng.random_range(h_lo..=h_hi)).collect();

    let [q_lo, q_hi] = cfg.q_air_limits_si();
    let levels = ((cfg.horizon / cfg.q_air_hold).ceil() as usize).max(1);
    let level = |i: usize| {
        let i = i.min(levels - 1);
        let i = if cfg.scenario_id == 1 { i } else { levels - 1 - i };
        if levels == 1 {
            q_lo
        } else {
            q_lo + (q_hi - q_lo) * i as f64 / (levels - 1) as f64
        }
    };

    let samples = (cfg.horizon / dt).round() as usize;
    let hold_index = |t: f64, hold: f64| (t / hold + 1e-9).floor() as usize;
    let inputs = (0..=samples)
        .map(|k| {
            let t = k as f64 * dt;
            let sp = setpoints[hold_index(t, cfg.h_p_hold).min(setpoint_holds - 1)];
            cfg.operating_point.inputs(level(hold_index(t, cfg.q_air_hold)), sp)
        })
        .collect();
    Ok(InputTrajectory::new(dt, inputs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn air_staircase_spans_the_range_in_both_directions() {
        for id in [1u8, 2] {
            let cfg = ScenarioConfig::benchmark(id, 3);
            let u = generate_inputs(&cfg, 1.0).unwrap();
            let q: Vec<f64> = u.samples().iter().map(|s| s.q_air).collect();
            let [lo, hi] = cfg.q_air_limits_si();
            let (first, last) = if id == 1 { (lo, hi) } else { (hi, lo) };
            assert!((q[0] - first).abs() < 1e-18);
            assert!((q[q.len() - 2] - last).abs() < 1e-18);
            let monotone = q.windows(2).all(|w| if id == 1 { w[1] >= w[0] } else { w[1] <= w[0] });
            assert!(monotone);
        }
    }

    #[test]
    fn changes_happen_only_on_hold_boundaries() {
        let cfg = ScenarioConfig::benchmark(1, 11);
        let u = generate_inputs(&cfg, 1.0).unwrap();
        let s = u.samples();
        for k in 1..s.len() {
            let t = k as f64;
            assert_eq!(s[k].h_p_sp != s[k - 1].h_p_sp, t % 160.0 == 0.0, "setpoint at {t}");
            assert_eq!(s[k].q_air != s[k - 1].q_air, t % 60.0 == 0.0 && t < 2400.0, "air at {t}");
            assert!((0.33..=0.42).contains(&s[k].h_p_sp));
        }
    }
}
