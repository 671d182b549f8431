//! Tracks a +20 % step in n with the recursive estimator, starting from the
//! true state and parameters, and prints the estimate every 100 s.

use froth_ident::estimator::{initial_inverse_hessian, run_online, EstimatorConfig, EstimatorState, PredictionContext, NOMINAL_THETA};
use froth_ident::harness::{generate_inputs, ScenarioConfig};
use froth_ident::model::Plant;
use froth_ident::sim::{settled_initial_state, simulate, ParameterSchedule, SimConfig};

fn main() {
    let plant = Plant::reference();
    let inputs = generate_inputs(&ScenarioConfig::benchmark(2, 0), 1.0).expect("inputs");
    let schedule = ParameterSchedule::new(vec![(0.0, NOMINAL_THETA), (200.0, NOMINAL_THETA.scaled(1.2, 1.0))]).expect("schedule");
    let sim_cfg = SimConfig { t_end: 1000.0, ..SimConfig::default() };
    let initial = settled_initial_state(&plant, &inputs.at(0.0), &NOMINAL_THETA, 300.0, &sim_cfg).expect("settle");
    let run = simulate(&plant, &initial, &inputs, &schedule, &sim_cfg).expect("simulate");

    let cfg = EstimatorConfig::default();
    let ctx = PredictionContext { plant: &plant, inputs: &inputs, dt: 1.0, substeps: 10 };
    let r0 = &run.records[0];
    let start = EstimatorState::new(NOMINAL_THETA, initial_inverse_hessian(&NOMINAL_THETA, cfg.l0_scale), r0.state.clone(), r0.algebraics.q_conc);
    let y: Vec<(f64, f64)> = run.records[1..].iter().map(|r| (r.t, r.g1_measured)).collect();
    let online = run_online(&ctx, start, &y, &cfg).expect("online run");

    println!("{:>5} {:>8} {:>8} {:>11} {:>11}", "t", "n", "n_hat", "C", "C_hat");
    for (s, r) in online.steps.iter().zip(&run.records[1..]).filter(|(s, _)| s.t % 100.0 == 0.0) {
        println!("{:>5} {:>8.4} {:>8.4} {:>11.4e} {:>11.4e}", s.t, r.theta_true.n, s.theta_hat.n, r.theta_true.c, s.theta_hat.c);
    }
    println!("frozen samples: {}", online.frozen_samples);
}
