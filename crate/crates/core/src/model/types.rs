use serde::{Deserialize, Serialize};

/// Fixed geometry and control constants of a single flotation cell.
///
/// All values are SI. `floatability` has one entry per mineralogical class and
/// is treated as a dimensionless multiplier on the bubble surface area flux.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Cross-sectional area [m²].
    pub a_cell: f64,
    /// Cell volume [m³].
    pub v_cell: f64,
    /// Total cell height [m].
    pub h_total: f64,
    /// Lip perimeter [m]. Only enters the camera-based air recovery, which is not simulated.
    pub l_lip: f64,
    /// Floatability factor per mineralogical class.
    pub floatability: Vec<f64>,
    /// Level controller proportional gain [m²/s].
    pub k_p: f64,
    /// Level controller integral time [s].
    pub tau_i: f64,
}

impl PhysicalConstants {
    /// Laboratory-scale reference cell: valuable sulphide and silicate gangue.
    pub fn reference() -> Self {
        let a_cell = 2.0e-4;
        let h_total = 0.6;
        Self {
            a_cell,
            v_cell: a_cell * h_total,
            h_total,
            l_lip: 0.0566,
            floatability: vec![1.3e-4, 1.0e-5],
            k_p: 7.2e-6,
            tau_i: 90.0,
        }
    }

    pub fn mineral_classes(&self) -> usize {
        self.floatability.len()
    }

    /// Returns every violated invariant; empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("plant.a_cell", self.a_cell),
            ("plant.v_cell", self.v_cell),
            ("plant.h_total", self.h_total),
            ("plant.l_lip", self.l_lip),
            ("plant.k_p", self.k_p),
            ("plant.tau_i", self.tau_i),
        ] {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be finite and > 0 (got {v})"));
            }
        }
        if self.floatability.is_empty() {
            out.push("plant.floatability must have at least one class".into());
        }
        for (i, p) in self.floatability.iter().enumerate() {
            if !(p.is_finite() && *p > 0.0) {
                out.push(format!("plant.floatability[{i}] must be > 0 (got {p})"));
            }
        }
        out
    }
}

/// The estimated froth parameters: bubble growth exponent `n` and rate `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrothParameters {
    pub n: f64,
    /// Bubble growth rate coefficient [mⁿ/s].
    pub c: f64,
}

impl FrothParameters {
    pub const fn new(n: f64, c: f64) -> Self {
        Self { n, c }
    }

    pub fn is_valid(&self) -> bool {
        self.n.is_finite() && self.c.is_finite() && self.n > 0.0 && self.c > 0.0
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.n, self.c]
    }

    pub fn from_array(v: [f64; 2]) -> Self {
        Self { n: v[0], c: v[1] }
    }

    /// Component `j` (0 = n, 1 = C).
    pub fn get(&self, j: usize) -> f64 {
        match j {
            0 => self.n,
            1 => self.c,
            _ => panic!("froth parameter index {j} out of range"),
        }
    }

    pub fn with(mut self, j: usize, value: f64) -> Self {
        match j {
            0 => self.n = value,
            1 => self.c = value,
            _ => panic!("froth parameter index {j} out of range"),
        }
        self
    }

    pub fn scaled(self, sn: f64, sc: f64) -> Self {
        Self { n: self.n * sn, c: self.c * sc }
    }
}

/// Dynamic state of the cell: `2 + I + K` differential variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// Tails flow [m³/s].
    pub q_tails: f64,
    /// Pulp height [m].
    pub h_p: f64,
    /// Mass per mineralogical class [kg].
    pub m: Vec<f64>,
    /// Gas holdup per bubble class.
    pub eps0: Vec<f64>,
}

impl PlantState {
    pub fn eps_total(&self) -> f64 {
        self.eps0.iter().sum()
    }

    /// `self + s * rate`, used by the integrator stages.
    pub fn add_scaled(&self, rate: &PlantState, s: f64) -> PlantState {
        PlantState {
            q_tails: self.q_tails + s * rate.q_tails,
            h_p: self.h_p + s * rate.h_p,
            m: self.m.iter().zip(&rate.m).map(|(a, b)| a + s * b).collect(),
            eps0: self.eps0.iter().zip(&rate.eps0).map(|(a, b)| a + s * b).collect(),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 + self.m.len() + self.eps0.len());
        v.push(self.q_tails);
        v.push(self.h_p);
        v.extend_from_slice(&self.m);
        v.extend_from_slice(&self.eps0);
        v
    }

    pub fn from_slice(v: &[f64], mineral_classes: usize) -> PlantState {
        PlantState {
            q_tails: v[0],
            h_p: v[1],
            m: v[2..2 + mineral_classes].to_vec(),
            eps0: v[2 + mineral_classes..].to_vec(),
        }
    }

    /// Checks the state invariants against a cell of height `h_total`.
    pub fn violations(&self, h_total: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.q_tails.is_finite() && self.q_tails >= 0.0) {
            out.push(format!("q_tails = {} must be >= 0", self.q_tails));
        }
        if !(self.h_p > 0.0 && self.h_p < h_total) {
            out.push(format!("h_p = {} outside (0, {h_total})", self.h_p));
        }
        for (i, m) in self.m.iter().enumerate() {
            if !(m.is_finite() && *m >= 0.0) {
                out.push(format!("m[{i}] = {m} must be >= 0"));
            }
        }
        for (k, e) in self.eps0.iter().enumerate() {
            if !(e.is_finite() && *e >= 0.0) {
                out.push(format!("eps0[{k}] = {e} must be >= 0"));
            }
        }
        let tot = self.eps_total();
        if !(tot < 1.0) {
            out.push(format!("total gas holdup {tot} must be < 1"));
        }
        out
    }
}

/// Exogenous inputs held over a sampling interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantInputs {
    /// Air flow [m³/s].
    pub q_air: f64,
    /// Feed flow [m³/s].
    pub q_feed: f64,
    /// Feed concentration per mineralogical class [kg/m³].
    pub c_feed: Vec<f64>,
    /// Pulp height setpoint [m].
    pub h_p_sp: f64,
    /// Bubble-class proportions (sum to one).
    pub psi: Vec<f64>,
    /// Pulp bubble diameter per class [m].
    pub d_b_pulp: Vec<f64>,
}

impl PlantInputs {
    pub fn violations(&self, h_total: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.q_air.is_finite() && self.q_air >= 0.0) {
            out.push(format!("q_air = {} must be >= 0", self.q_air));
        }
        if !(self.q_feed.is_finite() && self.q_feed >= 0.0) {
            out.push(format!("q_feed = {} must be >= 0", self.q_feed));
        }
        for (i, c) in self.c_feed.iter().enumerate() {
            if !(c.is_finite() && *c >= 0.0) {
                out.push(format!("c_feed[{i}] = {c} must be >= 0"));
            }
        }
        if !(self.h_p_sp > 0.0 && self.h_p_sp < h_total) {
            out.push(format!("h_p_sp = {} outside (0, {h_total})", self.h_p_sp));
        }
        if self.psi.len() != self.d_b_pulp.len() {
            out.push(format!(
                "psi has {} classes but d_b_pulp has {}",
                self.psi.len(),
                self.d_b_pulp.len()
            ));
        }
        if self.psi.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            out.push("psi entries must be >= 0".into());
        }
        let sum: f64 = self.psi.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            out.push(format!("psi must sum to 1 (got {sum})"));
        }
        if self.d_b_pulp.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            out.push("d_b_pulp entries must be > 0".into());
        }
        out
    }
}

/// Converged algebraic variables at one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraicOutputs {
    /// Interfacial gas velocity [m/s].
    pub v_g_star: f64,
    /// Concentrate flow [m³/s].
    pub q_conc: f64,
    /// Froth-top bubble size [m].
    pub d_b_froth_out: f64,
    /// Interfacial bubble size [m].
    pub d_b_int: f64,
    /// Froth residence time [s].
    pub tau_f: f64,
    pub alpha: f64,
    pub alpha_star: f64,
    pub r_f: Vec<f64>,
    pub r_ent: Vec<f64>,
    /// Concentrate grade of class 0.
    pub g1: f64,
    /// Fixed-point iterations used by the algebraic loop.
    pub iterations: usize,
    /// Set when at least one froth recovery had to be clipped into [0, 1].
    pub r_f_clipped: bool,
}

impl AlgebraicOutputs {
    /// True when the stable-froth (α ≥ 0.5) branch of the piecewise relations is active.
    pub fn stable_branch(&self) -> bool {
        self.alpha >= 0.5
    }
}
