//! Solves the concentrate-flow loop at a steady operating point for a sweep
//! of air flows and prints the froth outputs.

use froth_ident::estimator::NOMINAL_THETA;
use froth_ident::harness::OperatingPoint;
use froth_ident::model::Plant;

fn main() {
    let plant = Plant::reference();
    let op = OperatingPoint::default();
    println!("{:>10} {:>10} {:>8} {:>10} {:>12} {:>8} {:>5}", "Q_air m3/h", "v_g* m/s", "alpha", "tau_f s", "d_out m", "G1", "iter");
    for q_air_m3h in [1e-3, 2e-3, 5e-3, 1e-2, 2e-2] {
        let inputs = op.inputs(q_air_m3h / 3600.0, 0.38);
        let (state, _) = plant.steady_state(&inputs, &NOMINAL_THETA).expect("steady state");
        let alg = plant.solve_algebraic_loop(&state, &inputs, &NOMINAL_THETA, 0.0).expect("loop");
        println!(
            "{q_air_m3h:>10.1e} {:>10.3e} {:>8.4} {:>10.2} {:>12.4e} {:>8.4} {:>5}",
            alg.v_g_star, alg.alpha, alg.tau_f, alg.d_b_froth_out, alg.g1, alg.iterations
        );
    }
}
