//! Pluggable sub-models for quantities the froth model treats as given.
//!
//! The cell equations need six quantities whose original correlations live
//! outside this crate: per-class gas velocity out of the pulp, interfacial
//! bubble size, particle settling velocity, axial dispersion, the concentrate
//! flow coefficient `k1` and the bubble bursting rate. [`ClosureSet`] is the
//! boundary; [`SurrogateClosures`] is a smooth, strictly positive default.
//! The surrogates are stand-ins, not calibrated physics.

use serde::{Deserialize, Serialize};

use super::types::{PhysicalConstants, PlantInputs, PlantState};

/// Sub-model boundary of the cell model. Implementations must be pure.
pub trait ClosureSet: Send + Sync {
    /// Rise velocity of each bubble class out of the pulp [m/s].
    fn gas_velocity_out(&self, state: &PlantState, inputs: &PlantInputs) -> Vec<f64>;

    /// Bubble diameter at the pulp-froth interface [m].
    fn interfacial_bubble_size(&self, state: &PlantState, inputs: &PlantInputs) -> f64;

    /// Settling velocity per mineralogical class [m/s].
    fn settling_velocity(&self, state: &PlantState, inputs: &PlantInputs) -> Vec<f64>;

    /// Froth axial dispersion coefficient [m²/s].
    fn axial_dispersion(&self, q_air: f64) -> f64;

    /// Concentrate flow coefficient [1/(m·s)].
    fn k1(&self, state: &PlantState, inputs: &PlantInputs) -> f64;

    /// Froth-top bursting rate [m/s].
    fn bursting_rate(&self, q_air: f64) -> f64;

    /// Forces `(R_f, R_ent)` for a mineralogical class, bypassing the froth
    /// recovery and entrainment relations. Used for mass-balance audits.
    fn recovery_override(&self, _class: usize) -> Option<(f64, f64)> {
        None
    }
}

/// Tunable coefficients of [`SurrogateClosures`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    /// Stokes-like rise coefficient: `v = c_rise · d²` [1/(m·s)].
    pub c_rise: f64,
    /// Particle diameter per mineralogical class [m].
    pub particle_diameter: Vec<f64>,
    /// Particle density per mineralogical class [kg/m³].
    pub particle_density: Vec<f64>,
    /// Liquid density [kg/m³].
    pub liquid_density: f64,
    /// Pulp viscosity [Pa·s].
    pub pulp_viscosity: f64,
    /// Axial dispersion intercept [m²/s].
    pub dispersion_d0: f64,
    /// Axial dispersion slope per unit air flow [1/m].
    pub dispersion_d1: f64,
    /// Constant concentrate flow coefficient [1/(m·s)].
    pub k1: f64,
    /// Bursting-rate polynomial in superficial air velocity: `a + b·J + c·J²`.
    pub burst_a: f64,
    pub burst_b: f64,
    pub burst_c: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            c_rise: 1.0e5,
            // valuable sulphide, then silicate gangue
            particle_diameter: vec![60e-6, 45e-6],
            particle_density: vec![4200.0, 2650.0],
            liquid_density: 1000.0,
            pulp_viscosity: 2.0e-3,
            dispersion_d0: 5.0e-5,
            dispersion_d1: 20.0,
            k1: 3.0e4,
            burst_a: 1.0e-4,
            burst_b: 0.2,
            burst_c: 5.0,
        }
    }
}

impl SurrogateParams {
    pub fn violations(&self, mineral_classes: usize) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("closures.c_rise", self.c_rise),
            ("closures.liquid_density", self.liquid_density),
            ("closures.pulp_viscosity", self.pulp_viscosity),
            ("closures.dispersion_d0", self.dispersion_d0),
            ("closures.k1", self.k1),
        ] {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be finite and > 0 (got {v})"));
            }
        }
        for (name, v) in [
            ("closures.dispersion_d1", self.dispersion_d1),
            ("closures.burst_a", self.burst_a),
            ("closures.burst_b", self.burst_b),
            ("closures.burst_c", self.burst_c),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(format!("{name} must be finite and >= 0 (got {v})"));
            }
        }
        if self.particle_diameter.len() != mineral_classes
            || self.particle_density.len() != mineral_classes
        {
            out.push(format!(
                "closures.particle_diameter/particle_density need {mineral_classes} entries"
            ));
        }
        for (i, d) in self.particle_diameter.iter().enumerate() {
            if !(d.is_finite() && *d > 0.0) {
                out.push(format!("closures.particle_diameter[{i}] must be > 0"));
            }
        }
        for (i, rho) in self.particle_density.iter().enumerate() {
            if !(rho.is_finite() && *rho > self.liquid_density) {
                out.push(format!(
                    "closures.particle_density[{i}] must exceed liquid_density (got {rho})"
                ));
            }
        }
        out
    }
}

const GRAVITY: f64 = 9.81;

/// Default closures:
///
/// * rise velocity `c_rise · d_b,pulp²`
/// * interfacial bubble size = Sauter mean of the pulp classes weighted by Ψ
/// * Stokes settling `g Δρ d_p² / (18 μ)`
/// * affine axial dispersion `d0 + d1 · Q_air`
/// * constant `k1`
/// * quadratic bursting rate in `J = Q_air / A_cell`
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateClosures {
    pub params: SurrogateParams,
    a_cell: f64,
}

impl SurrogateClosures {
    pub fn new(params: SurrogateParams, constants: &PhysicalConstants) -> Self {
        Self { params, a_cell: constants.a_cell }
    }
}

impl ClosureSet for SurrogateClosures {
    fn gas_velocity_out(&self, _state: &PlantState, inputs: &PlantInputs) -> Vec<f64> {
        inputs.d_b_pulp.iter().map(|d| self.params.c_rise * d * d).collect()
    }

    fn interfacial_bubble_size(&self, _state: &PlantState, inputs: &PlantInputs) -> f64 {
        let (mut d3, mut d2) = (0.0, 0.0);
        for (psi, d) in inputs.psi.iter().zip(&inputs.d_b_pulp) {
            d3 += psi * d * d * d;
            d2 += psi * d * d;
        }
        d3 / d2
    }

    fn settling_velocity(&self, _state: &PlantState, _inputs: &PlantInputs) -> Vec<f64> {
        let p = &self.params;
        p.particle_diameter
            .iter()
            .zip(&p.particle_density)
            .map(|(d, rho)| GRAVITY * (rho - p.liquid_density) * d * d / (18.0 * p.pulp_viscosity))
            .collect()
    }

    fn axial_dispersion(&self, q_air: f64) -> f64 {
        self.params.dispersion_d0 + self.params.dispersion_d1 * q_air
    }

    fn k1(&self, _state: &PlantState, _inputs: &PlantInputs) -> f64 {
        self.params.k1
    }

    fn bursting_rate(&self, q_air: f64) -> f64 {
        let j = q_air / self.a_cell;
        self.params.burst_a + self.params.burst_b * j + self.params.burst_c * j * j
    }
}
