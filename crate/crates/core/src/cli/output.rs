use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::harness::{FitReport, ScenarioRun, TrajectoryRow};

pub const REPORT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: String,
    pub output_dir: String,
    pub scenarios: Vec<u8>,
    pub seeds: Vec<u64>,
    pub files: Vec<ManifestEntry>,
}

/// Round-trip exact: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_header(mineral_classes: usize, bubble_classes: usize) -> String {
    let mut cols: Vec<String> = ["t", "h_p_SP", "Q_air", "Q_feed", "h_p", "Q_tails"].iter().map(|s| s.to_string()).collect();
    cols.extend((1..=mineral_classes).map(|i| format!("m_{i}")));
    cols.extend((1..=bubble_classes).map(|k| format!("eps0_{k}")));
    cols.extend(
        [
            "v_g_star",
            "Q_conc",
            "alpha",
            "d_b_froth_out",
            "G1_true",
            "G1_meas",
            "G1_pred_recursive",
            "G1_pred_constant",
            "n_true",
            "C_true",
            "n_hat",
            "C_hat",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    cols.join(",")
}

fn csv_row(r: &TrajectoryRow) -> String {
    let mut v = vec![r.t, r.h_p_sp, r.q_air, r.q_feed, r.h_p, r.q_tails];
    v.extend(&r.m);
    v.extend(&r.eps0);
    v.extend([
        r.v_g_star,
        r.q_conc,
        r.alpha,
        r.d_b_froth_out,
        r.g1_true,
        r.g1_meas,
        r.g1_pred_recursive,
        r.g1_pred_constant,
        r.n_true,
        r.c_true,
        r.n_hat,
        r.c_hat,
    ]);
    v.into_iter().map(num).collect::<Vec<_>>().join(",")
}

pub fn trajectory_csv(run: &ScenarioRun) -> String {
    let (mi, kb) = run.trajectory.first().map_or((0, 0), |r| (r.m.len(), r.eps0.len()));
    let mut out = csv_header(mi, kb);
    out.push('\n');
    for row in &run.trajectory {
        out.push_str(&csv_row(row));
        out.push('\n');
    }
    out
}

pub fn csv_file_name(report: &FitReport) -> String {
    format!("scenario{}_seed{}.csv", report.scenario_id, report.seed)
}

pub fn report_text(runs: &[ScenarioRun]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# fits over window_start < t <= window_end; 100 is a perfect fit");
    let _ = writeln!(
        s,
        "# scenario seed fit_n fit_C fit_grade_recursive fit_grade_constant window_start window_end offline_n offline_C frozen branch_switches r_f_clips runtime_s"
    );
    for r in runs.iter().map(|r| &r.report) {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {} {} {} {} {} {:.3}",
            r.scenario_id,
            r.seed,
            num(r.fit_n),
            num(r.fit_c),
            num(r.fit_grade_recursive),
            num(r.fit_grade_constant),
            num(r.window_start),
            num(r.window_end),
            num(r.offline_theta.n),
            num(r.offline_theta.c),
            r.frozen_samples,
            r.sim.branch_switches,
            r.sim.r_f_clips,
            r.runtime_s
        );
    }
    s
}

fn entry(dir: &Path, name: &str, content: &[u8]) -> io::Result<ManifestEntry> {
    fs::write(dir.join(name), content)?;
    Ok(ManifestEntry { path: name.to_string(), bytes: content.len() as u64, sha256: hex::encode(Sha256::digest(content)) })
}

/// Writes one CSV per run, the report and the manifest into `dir`.
pub fn write_bundle(dir: &Path, config_origin: &str, runs: &[ScenarioRun]) -> io::Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(runs.len() + 1);
    for run in runs {
        files.push(entry(dir, &csv_file_name(&run.report), trajectory_csv(run).as_bytes())?);
    }
    files.push(entry(dir, REPORT_FILE, report_text(runs).as_bytes())?);

    let mut scenarios: Vec<u8> = runs.iter().map(|r| r.report.scenario_id).collect();
    scenarios.dedup();
    let mut seeds: Vec<u64> = runs.iter().map(|r| r.report.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let manifest = RunManifest {
        config: config_origin.to_string(),
        output_dir: dir.display().to_string(),
        scenarios,
        seeds,
        files,
    };
    let text = toml::to_string_pretty(&manifest).map_err(io::Error::other)?;
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}
