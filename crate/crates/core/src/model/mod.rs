//! Froth flotation cell model: domain types, algebraic relations, the implicit
//! concentrate-flow loop and the state derivatives of the DAE.

mod closures;
mod plant;
pub mod relations;
mod types;

pub use closures::{ClosureSet, SurrogateClosures, SurrogateParams};
pub use plant::{Plant, LOOP_ABS_TOLERANCE, LOOP_DAMPING, LOOP_MAX_ITERATIONS};
pub use types::{AlgebraicOutputs, FrothParameters, PhysicalConstants, PlantInputs, PlantState};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("domain error in {what}: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("froth collapse: interfacial gas velocity {v_g_star} m/s is not positive")]
    FrothCollapse { v_g_star: f64 },
    #[error("algebraic loop did not converge after {iterations} iterations (Q_conc = {last_q_conc}, residual {residual})")]
    LoopNotConverged { iterations: usize, last_q_conc: f64, residual: f64 },
    #[error("no concentrate production: grade denominator {denominator}")]
    DegenerateGrade { denominator: f64 },
    #[error("gas holdup of bubble class {class} reached one")]
    SingularHoldup { class: usize },
    #[error("infeasible operating point: {what} ({value})")]
    Infeasible { what: &'static str, value: f64 },
}
