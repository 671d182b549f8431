//! Simulates the reference cell through a setpoint step and prints the level
//! and grade every 30 s.

use froth_ident::estimator::NOMINAL_THETA;
use froth_ident::harness::OperatingPoint;
use froth_ident::model::Plant;
use froth_ident::sim::{settled_initial_state, simulate, InputTrajectory, ParameterSchedule, SimConfig};

fn main() {
    let plant = Plant::reference();
    let op = OperatingPoint::default();
    let cfg = SimConfig { t_end: 600.0, ..SimConfig::default() };
    let samples: Vec<_> = (0..=600)
        .map(|t| op.inputs(1e-2 / 3600.0, if t < 120 { 0.36 } else { 0.40 }))
        .collect();
    let inputs = InputTrajectory::new(1.0, samples);
    let schedule = ParameterSchedule::constant(NOMINAL_THETA);
    let initial = settled_initial_state(&plant, &inputs.at(0.0), &NOMINAL_THETA, 300.0, &cfg).expect("settle");
    let run = simulate(&plant, &initial, &inputs, &schedule, &cfg).expect("simulate");

    println!("{:>5} {:>8} {:>12} {:>8} {:>8}", "t", "h_p", "Q_tails", "G1", "G1 meas");
    for r in run.records.iter().step_by(30) {
        println!("{:>5} {:>8.4} {:>12.4e} {:>8.5} {:>8.5}", r.t, r.state.h_p, r.state.q_tails, r.g1_true, r.g1_measured);
    }
    println!("branch switches: {}", run.diagnostics.branch_switches);
}
