use serde::{Deserialize, Serialize};

use crate::model::{FrothParameters, PlantInputs};

/// Piecewise-constant true parameters: each segment holds from its start time
/// until the next segment starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSchedule {
    segments: Vec<(f64, FrothParameters)>,
}

impl ParameterSchedule {
    /// Segments must start at 0, be strictly increasing in time and hold valid parameters.
    pub fn new(segments: Vec<(f64, FrothParameters)>) -> Result<Self, String> {
        match segments.first() {
            None => return Err("schedule needs at least one segment".into()),
            Some((t0, _)) if *t0 != 0.0 => return Err(format!("first segment must start at 0 (got {t0})")),
            _ => {}
        }
        if segments.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err("segment start times must be strictly increasing".into());
        }
        if let Some((t, _)) = segments.iter().find(|(_, th)| !th.is_valid()) {
            return Err(format!("segment starting at {t} has non-positive parameters"));
        }
        Ok(Self { segments })
    }

    pub fn constant(theta: FrothParameters) -> Self {
        Self { segments: vec![(0.0, theta)] }
    }

    pub fn segments(&self) -> &[(f64, FrothParameters)] {
        &self.segments
    }

    pub fn at(&self, t: f64) -> FrothParameters {
        self.segments
            .iter()
            .rev()
            .find(|(start, _)| *start <= t)
            .map_or(self.segments[0].1, |(_, th)| *th)
    }
}

/// Inputs sampled on the measurement grid and held over each interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputTrajectory {
    pub dt: f64,
    samples: Vec<PlantInputs>,
}

impl InputTrajectory {
    /// `samples[k]` holds over `[k·dt, (k+1)·dt)`; the last sample extends to infinity.
    pub fn new(dt: f64, samples: Vec<PlantInputs>) -> Self {
        assert!(!samples.is_empty(), "input trajectory needs at least one sample");
        Self { dt, samples }
    }

    pub fn constant(dt: f64, inputs: PlantInputs) -> Self {
        Self::new(dt, vec![inputs])
    }

    pub fn at(&self, t: f64) -> PlantInputs {
        self.samples[self.index(t)].clone()
    }

    pub fn index(&self, t: f64) -> usize {
        let k = (t / self.dt + 1e-9).floor().max(0.0) as usize;
        k.min(self.samples.len() - 1)
    }

    pub fn samples(&self) -> &[PlantInputs] {
        &self.samples
    }

    /// Time covered by explicit samples.
    pub fn horizon(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }
}
