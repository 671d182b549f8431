//! Fits (n, C) to a noisy 600 s window by Gauss-Newton from a 10 % offset.

use froth_ident::estimator::{offline_init, prediction_cost, EstimatorConfig, OfflineOptions, PredictionContext, NOMINAL_THETA};
use froth_ident::harness::{generate_inputs, ScenarioConfig};
use froth_ident::model::Plant;
use froth_ident::sim::{settled_initial_state, simulate, ParameterSchedule, SimConfig};

fn main() {
    let plant = Plant::reference();
    let inputs = generate_inputs(&ScenarioConfig::benchmark(2, 0), 1.0).expect("inputs");
    let cfg = SimConfig { t_end: 599.0, ..SimConfig::default() };
    let initial = settled_initial_state(&plant, &inputs.at(0.0), &NOMINAL_THETA, 300.0, &cfg).expect("settle");
    let run = simulate(&plant, &initial, &inputs, &ParameterSchedule::constant(NOMINAL_THETA), &cfg).expect("simulate");
    let y: Vec<f64> = run.records.iter().map(|r| r.g1_measured).collect();

    let ctx = PredictionContext { plant: &plant, inputs: &inputs, dt: 1.0, substeps: 10 };
    let guess = NOMINAL_THETA.scaled(1.1, 1.1);
    let start_cost = prediction_cost(&ctx, &initial, 0.0, &y, &guess).expect("cost");
    let fit = offline_init(&ctx, &initial, 0.0, &y, guess, &EstimatorConfig::default(), &OfflineOptions::default()).expect("fit");
    println!("truth    n {:.6} C {:.6e}", NOMINAL_THETA.n, NOMINAL_THETA.c);
    println!("guess    n {:.6} C {:.6e} cost {start_cost:.4e}", guess.n, guess.c);
    println!("estimate n {:.6} C {:.6e} cost {:.4e} after {} iterations", fit.theta.n, fit.theta.c, fit.cost, fit.iterations);
}
