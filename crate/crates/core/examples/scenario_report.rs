//! Runs both benchmark scenarios and writes the CSV bundle to the directory
//! given as the first argument (default `scenario-out`).

use std::path::PathBuf;

use froth_ident::cli::write_bundle;
use froth_ident::estimator::EstimatorConfig;
use froth_ident::harness::{run_many, ScenarioConfig};
use froth_ident::model::Plant;
use froth_ident::sim::SimConfig;

fn main() {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("scenario-out"), PathBuf::from);
    let scenarios = [ScenarioConfig::benchmark(1, 0), ScenarioConfig::benchmark(2, 0)];
    let runs: Vec<_> = run_many(&scenarios, &Plant::reference(), &SimConfig::default(), &EstimatorConfig::default())
        .into_iter()
        .collect::<Result<_, _>>()
        .expect("scenario run");
    for r in runs.iter().map(|r| &r.report) {
        println!(
            "scenario {} seed {}: fit_n {:.2} fit_C {:.2} grade recursive {:.2} constant {:.2} ({:.1} s)",
            r.scenario_id, r.seed, r.fit_n, r.fit_c, r.fit_grade_recursive, r.fit_grade_constant, r.runtime_s
        );
    }
    let manifest = write_bundle(&out, "benchmark scenarios", &runs).expect("write outputs");
    for f in &manifest.files {
        println!("{} {} bytes sha256 {}", f.path, f.bytes, f.sha256);
    }
}
