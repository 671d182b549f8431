//! Command-line front end: `run` executes the configured scenarios and writes
//! trajectories, a report and a manifest; `validate` checks a configuration.

pub mod config;
mod output;

pub use config::{Overrides, RunConfig, REFERENCE_CONFIG};
pub use output::{csv_header, write_bundle, RunManifest, MANIFEST_FILE, REPORT_FILE};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::harness::{run_many, HarnessError};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "FROTH_IDENT_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIM_FAULT: i32 = 3;
pub const EXIT_ESTIMATOR_ABORT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "froth-ident", version, about = "Flotation cell simulation and recursive estimation of froth parameters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run scenarios and write trajectories, report and manifest.
    Run(RunArgs),
    /// Check a configuration and print it with units converted to SI.
    Validate(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Configuration file; the built-in reference configuration when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Scenario to run (1 or 2); repeatable.
    #[arg(long = "scenario", value_name = "N")]
    pub scenarios: Vec<u8>,
    /// Random seed; repeatable.
    #[arg(long = "seed", value_name = "N")]
    pub seeds: Vec<u64>,
    /// Grade measurement noise standard deviation.
    #[arg(long, value_name = "X", allow_negative_numbers = true)]
    pub noise_std: Option<f64>,
    /// Forgetting factor.
    #[arg(long, value_name = "X", allow_negative_numbers = true)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR", env = OUT_DIR_ENV, default_value = "froth-out")]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Validate(a) => cmd_validate(&a),
    }
}

fn load(args: &CommonArgs) -> Result<(RunConfig, String), String> {
    let (text, origin) = match &args.config {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?,
            p.display().to_string(),
        ),
        None => (REFERENCE_CONFIG.to_string(), "<built-in reference>".to_string()),
    };
    let mut cfg = RunConfig::parse(&text).map_err(|e| format!("{origin}: {e}"))?;
    cfg.apply(&Overrides {
        scenarios: args.scenarios.clone(),
        seeds: args.seeds.clone(),
        noise_std: args.noise_std,
        lambda: args.lambda,
    });
    Ok((cfg, origin))
}

fn report_violations(violations: &[String]) {
    eprintln!("configuration invalid ({} problem{}):", violations.len(), if violations.len() == 1 { "" } else { "s" });
    for v in violations {
        eprintln!("  - {v}");
    }
}

/// What `validate` prints for a valid configuration.
pub fn resolved_text(cfg: &RunConfig) -> Result<String, toml::ser::Error> {
    Ok(format!("# configuration valid; resolved values in SI units\n{}", toml::to_string_pretty(&cfg.resolved())?))
}

/// `validate`: exit 0 and the resolved configuration, or exit 2 and every violation.
pub fn cmd_validate(args: &CommonArgs) -> i32 {
    let (cfg, _) = match load(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let violations = cfg.violations();
    if !violations.is_empty() {
        report_violations(&violations);
        return EXIT_CONFIG;
    }
    match resolved_text(&cfg) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: cannot render configuration: {e}");
            EXIT_FAILURE
        }
    }
}

pub fn exit_code(e: &HarnessError) -> i32 {
    match e {
        HarnessError::Config(_) => EXIT_CONFIG,
        HarnessError::Sim { .. } => EXIT_SIM_FAULT,
        HarnessError::Estimator { .. } => EXIT_ESTIMATOR_ABORT,
        HarnessError::ZeroNorm | HarnessError::LengthMismatch(..) => EXIT_FAILURE,
    }
}

/// `run`: execute every (scenario, seed) pair and write the output bundle.
pub fn cmd_run(args: &RunArgs) -> i32 {
    let (cfg, origin) = match load(&args.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let violations = cfg.violations();
    if !violations.is_empty() {
        report_violations(&violations);
        return EXIT_CONFIG;
    }
    let scenarios = match cfg.scenarios() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let plant = cfg.plant();
    let results = run_many(&scenarios, &plant, &cfg.sim_config(), &cfg.estimator_config());

    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => {
                eprintln!("error: {e}");
                return exit_code(&e);
            }
        }
    }
    match write_bundle(&args.out, &origin, &runs) {
        Ok(manifest) => {
            for run in &runs {
                let r = &run.report;
                println!(
                    "scenario {} seed {}: fit_n {:.2} fit_C {:.2} grade recursive {:.2} constant {:.2}",
                    r.scenario_id, r.seed, r.fit_n, r.fit_c, r.fit_grade_recursive, r.fit_grade_constant
                );
            }
            println!("wrote {} files to {}", manifest.files.len() + 1, args.out.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: writing outputs to {}: {e}", args.out.display());
            EXIT_FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use std::path::Path;

    use sha2::Digest;

    fn short_config(dir: &Path) -> PathBuf {
        let path = dir.join("short.toml");
        fs::write(&path, REFERENCE_CONFIG.replace("horizon = 2400.0", "horizon = 900.0")).unwrap();
        path
    }

    fn run(args: &[&str]) -> i32 {
        main_with_args(std::iter::once("froth-ident").chain(args.iter().copied()))
    }

    #[test]
    fn validate_accepts_the_reference() {
        assert_eq!(run(&["validate"]), EXIT_OK);
    }

    #[test]
    fn validate_echo_is_in_si_units() {
        let mut cfg = RunConfig::reference();
        cfg.apply(&Overrides { scenarios: vec![2], lambda: Some(0.99), ..Overrides::default() });
        let text = resolved_text(&cfg).unwrap();
        assert!(text.contains("q_air_limits_m3s"), "{text}");
        assert!(!text.contains("q_air_limits_m3h"), "{text}");
        assert!(text.contains("lambda = 0.99"), "{text}");
        assert!(text.contains("ids = [2]"), "{text}");
    }

    #[test]
    fn output_directory_defaults_to_the_environment() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = short_config(dir.path());
        let out = dir.path().join("from-env");
        // no other test relies on the default, so setting it here is harmless
        std::env::set_var(OUT_DIR_ENV, &out);
        let code = run(&["run", "--scenario", "1", "--config", cfg.to_str().unwrap()]);
        std::env::remove_var(OUT_DIR_ENV);
        assert_eq!(code, EXIT_OK);
        for f in ["scenario1_seed0.csv", REPORT_FILE, MANIFEST_FILE] {
            assert!(out.join(f).is_file(), "{f}");
        }
    }

    #[test]
    fn bad_overrides_are_config_errors() {
        assert_eq!(run(&["validate", "--lambda", "1.5"]), EXIT_CONFIG);
        assert_eq!(run(&["validate", "--noise-std", "-1"]), EXIT_CONFIG);
        assert_eq!(run(&["validate", "--scenario", "3"]), EXIT_CONFIG);
        assert_eq!(run(&["validate", "--lambda", "abc"]), EXIT_CONFIG);
        assert_eq!(run(&["run", "--lambda", "0", "--out", "/nonexistent/never"]), EXIT_CONFIG);
    }

    #[test]
    fn broken_files_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let psi = dir.path().join("psi.toml");
        fs::write(&psi, REFERENCE_CONFIG.replace("psi = [0.1, 0.2, 0.4, 0.2, 0.1]", "psi = [0.1, 0.2, 0.4, 0.2, 0.2]")).unwrap();
        let missing = dir.path().join("missing.toml");
        fs::write(&missing, REFERENCE_CONFIG.replace("k_p = 7.2e-6               # m²/s\n", "")).unwrap();
        for p in [&psi, &missing, &dir.path().join("absent.toml")] {
            assert_eq!(run(&["validate", "--config", p.to_str().unwrap()]), EXIT_CONFIG, "{}", p.display());
        }
    }

    #[test]
    fn run_writes_one_csv_per_scenario_with_a_checked_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = short_config(dir.path());
        let out = dir.path().join("out");
        let code = run(&[
            "run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--scenario", "1", "--scenario", "2",
        ]);
        assert_eq!(code, EXIT_OK);

        let manifest: RunManifest = toml::from_str(&fs::read_to_string(out.join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(manifest.scenarios, vec![1, 2]);
        let names: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(names, ["scenario1_seed0.csv", "scenario2_seed0.csv", REPORT_FILE]);
        for f in &manifest.files {
            let bytes = fs::read(out.join(&f.path)).unwrap();
            assert_eq!(bytes.len() as u64, f.bytes);
            assert_eq!(hex::encode(sha2::Sha256::digest(&bytes)), f.sha256);
        }

        let csv = fs::read_to_string(out.join("scenario1_seed0.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), csv_header(2, 5));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 901);
        assert!(rows.iter().all(|r| r.split(',').count() == 25));
        assert_eq!(rows[0].split(',').next().unwrap(), "0.0000000000000000e0");

        let report = fs::read_to_string(out.join(REPORT_FILE)).unwrap();
        assert_eq!(report.lines().filter(|l| !l.starts_with('#')).count(), 2);
    }

    #[test]
    fn repeated_runs_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = short_config(dir.path());
        let read = |sub: &str| {
            let out = dir.path().join(sub);
            let code = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--scenario", "2", "--seed", "7"]);
            assert_eq!(code, EXIT_OK);
            fs::read(out.join("scenario2_seed7.csv")).unwrap()
        };
        assert_eq!(read("a"), read("b"));
    }

    #[test]
    fn faults_map_to_distinct_exit_codes() {
        assert_eq!(exit_code(&HarnessError::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&HarnessError::ZeroNorm), EXIT_FAILURE);
        let sim = crate::sim::SimError::Setup("x".into());
        assert_eq!(exit_code(&HarnessError::Sim { scenario: 1, seed: 0, source: sim }), EXIT_SIM_FAULT);
        let abort = crate::estimator::EstimatorError::Aborted { t: 4.0, frozen: 4 };
        assert_eq!(exit_code(&HarnessError::Estimator { scenario: 1, seed: 0, source: abort }), EXIT_ESTIMATOR_ABORT);
        let codes = [EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_SIM_FAULT, EXIT_ESTIMATOR_ABORT];
        assert_eq!(codes, [0, 1, 2, 3, 4]);
    }
}
