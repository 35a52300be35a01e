//! `run` and `verify`: build → accumulate V → solve schedule → verifier
//! battery, with CSV and JSON artifacts per run directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use bsvi_core::process::build_paths;
use bsvi_core::solver::{solve_sequence, Scenario, SequenceReport, SolutionField};
use bsvi_core::verify::{
    check_apriori, check_contraction, check_ito_residual, run_battery, PathView, Semimartingale,
    VerificationReport, APRIORI_C_FIT,
};
use bsvi_core::{CeBackend, PathBundle};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{io_err, CoreContext, LabError, LabResult};

/// Environment variable that relocates relative `out_dir` entries.
pub const OUTPUT_ROOT_ENV: &str = "BSVI_LAB_OUTPUT_ROOT";

pub const RESULTS_CSV: &str = "results.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const VERIFY_JSON: &str = "verify.json";

/// Serializable mirror of a [`VerificationReport`]; non-finite numbers become `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub name: String,
    pub pass: bool,
    pub worst_violation: Option<f64>,
    pub tolerance: f64,
    pub residuals: Vec<Option<f64>>,
    pub monitors: BTreeMap<String, Option<f64>>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&VerificationReport> for ReportRecord {
    fn from(r: &VerificationReport) -> Self {
        Self {
            name: r.name.clone(),
            pass: r.pass,
            worst_violation: finite(r.worst_violation),
            tolerance: r.tolerance,
            residuals: r.residuals.iter().map(|&v| finite(v)).collect(),
            monitors: r.monitors.iter().map(|(k, &v)| (k.clone(), finite(v))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub eps_a: f64,
    pub eps_b: f64,
    pub y_sup: f64,
    pub z_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceErrors {
    pub y0_error: Option<f64>,
    pub sup_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub total: usize,
    pub passed: usize,
    pub failed: Vec<String>,
    pub pass: bool,
}

/// Wall-clock timings; the only fields that differ between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub build_ms: f64,
    pub solve_ms: f64,
    pub verify_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    /// `"config"` or `"clock"`.
    pub seed_source: String,
    pub eps: Vec<f64>,
    pub y0: Vec<f64>,
    pub gaps: Vec<GapRecord>,
    pub penalty_energy: Vec<f64>,
    pub k_total_variation: Vec<f64>,
    pub reference: Option<ReferenceErrors>,
    pub verdicts: Verdicts,
    /// Enabled checks whose preconditions the configuration does not meet.
    pub skipped: Vec<String>,
    pub warnings: Vec<String>,
    pub timings: Timings,
    /// SHA-256 (hex) of each emitted CSV.
    pub artifacts: BTreeMap<String, String>,
    /// The configuration, with `seed` replaced by the seed actually used.
    pub config: ExperimentConfig,
}

/// In-memory result of one run.
pub struct Execution {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub seed_source: &'static str,
    pub scenario: Scenario<f64>,
    pub sequence: SequenceReport<f64>,
    pub reports: Vec<VerificationReport>,
    pub timings: Timings,
}

impl Execution {
    pub fn finest(&self) -> &SolutionField<f64> {
        self.sequence.solutions.last().expect("schedule is never empty")
    }
}

/// `(seed, source)`; a zero seed is replaced by a nonzero clock-derived one.
pub fn resolve_seed(seed: u64) -> (u64, &'static str) {
    if seed != 0 {
        return (seed, "config");
    }
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(1);
    // splitmix64 finalizer spreads nearby clock readings apart.
    let mut z = nanos.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ((z ^ (z >> 31)) | 1, "clock")
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Builds the scenario for `cfg` with the given (already resolved) seed.
pub fn build_scenario(cfg: &ExperimentConfig, seed: u64) -> LabResult<Scenario<f64>> {
    let name = cfg.scenario.as_str();
    let g = &cfg.generator;
    let bundle = build_paths(&cfg.grid()?, cfg.noise_model(seed), cfg.a_spec())
        .and_then(|b| b.accumulate_v(g.mu, g.nu, g.ell, cfg.solver.p, cfg.solver.lambda))
        .in_scenario(name)?;
    Scenario::new(bundle, cfg.generator_spec()?, cfg.potential()?, cfg.terminal_fn()?).in_scenario(name)
}

/// Solves the schedule without verification.
pub fn solve(cfg: &ExperimentConfig, seed: u64) -> LabResult<(Scenario<f64>, SequenceReport<f64>)> {
    cfg.validate()?;
    let scenario = build_scenario(cfg, seed)?;
    let seq = solve_sequence(&scenario, &cfg.solver_config()).in_scenario(&cfg.scenario)?;
    Ok((scenario, seq))
}

/// Largest increase between consecutive schedule gaps.
fn eps_cauchy_report(seq: &SequenceReport<f64>) -> VerificationReport {
    let gaps: Vec<f64> = seq.gaps.iter().map(|g| g.y_sup).collect();
    let worst = gaps.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    VerificationReport::new("eps-cauchy[gap nonincreasing]", gaps, worst, 0.0)
}

fn verify_all(
    cfg: &ExperimentConfig,
    seed: u64,
    scenario: &Scenario<f64>,
    seq: &SequenceReport<f64>,
) -> LabResult<Vec<VerificationReport>> {
    let name = cfg.scenario.as_str();
    let v = &cfg.verify;
    let scfg = cfg.solver_config();
    let bundle = &scenario.bundle;
    let sol = seq.solutions.last().expect("schedule is never empty");
    let view = PathView::new(bundle, v.max_paths, seed);
    let tol = view.tolerance(bundle, v.c1, v.c2);
    let mut out = Vec::new();
    if v.battery {
        out.extend(run_battery(scenario, &scfg, &seq.solutions, &cfg.battery_options(seed)).in_scenario(name)?);
    }
    if v.ito && scfg.backend == CeBackend::ExactTree {
        let sm = Semimartingale::from_solution(sol, bundle, &view, scfg.backend).in_scenario(name)?;
        out.push(check_ito_residual(&sm, bundle, &view, scfg.p, 1.0, tol).in_scenario(name)?);
    }
    if v.contraction && seq.solutions.len() >= 2 {
        let prev = &seq.solutions[seq.solutions.len() - 2];
        let ctol = view.tolerance(bundle, 2.0 * v.c1, v.c2);
        let mut qs = vec![2.0];
        if scfg.p < 2.0 {
            qs.push(scfg.p);
        }
        for q in qs {
            out.push(check_contraction(prev, sol, bundle, q, ctol).in_scenario(name)?);
        }
    }
    if v.apriori {
        out.push(check_apriori(sol, scenario, &view, scfg.p, APRIORI_C_FIT).in_scenario(name)?);
    }
    if seq.gaps.len() >= 2 {
        out.push(eps_cauchy_report(seq));
    }
    Ok(out)
}

fn skipped_checks(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if cfg.verify.ito && cfg.backend() != CeBackend::ExactTree {
        out.push("ito: the discrete identity needs exact one-step martingale increments (exact_tree backend)".into());
    }
    if cfg.verify.contraction && cfg.solver.eps.len() < 2 {
        out.push("contraction: needs at least two eps levels".into());
    }
    out
}

/// Runs the full pipeline in memory.
pub fn execute(cfg: &ExperimentConfig) -> LabResult<Execution> {
    cfg.validate()?;
    let (seed, seed_source) = resolve_seed(cfg.seed);
    let mut config = cfg.clone();
    config.seed = seed;

    let t0 = Instant::now();
    let scenario = build_scenario(&config, seed)?;
    let build_ms = ms(t0);
    let t1 = Instant::now();
    let sequence = solve_sequence(&scenario, &config.solver_config()).in_scenario(&config.scenario)?;
    let solve_ms = ms(t1);
    let t2 = Instant::now();
    let reports = verify_all(&config, seed, &scenario, &sequence)?;
    let verify_ms = ms(t2);
    log::info!(
        "{}: solved {} eps levels, {} checks",
        config.scenario,
        sequence.solutions.len(),
        reports.len()
    );
    Ok(Execution {
        config,
        seed,
        seed_source,
        scenario,
        sequence,
        reports,
        timings: Timings {
            build_ms,
            solve_ms,
            verify_ms,
        },
    })
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-node table of the finest solution:
/// `step, t, Q, alpha, node_or_path, Y, Z, U, Kinc`. The last level has no
/// step quantities, so `alpha, Z, U, Kinc` are empty there.
pub fn results_csv(bundle: &PathBundle, sol: &SolutionField<f64>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "t", "Q", "alpha", "node_or_path", "Y", "Z", "U", "Kinc"])
        .expect("in-memory write");
    let n = bundle.n_steps();
    for i in 0..=n {
        for s in 0..bundle.n_states(i) {
            let step = |v: &Vec<Vec<f64>>| if i < n { fmt(v[i][s]) } else { String::new() };
            let alpha = if i < n { fmt(bundle.alpha(i)) } else { String::new() };
            w.write_record([
                i.to_string(),
                fmt(bundle.t(i)),
                fmt(bundle.q(i)),
                alpha,
                s.to_string(),
                fmt(sol.y[i][s]),
                step(&sol.z),
                step(&sol.u),
                step(&sol.kinc),
            ])
            .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `(|Y_0 − ref|, sup |Y − ref(t, B)|)` for whichever references exist.
pub fn reference_errors(
    cfg: &ExperimentConfig,
    bundle: &PathBundle,
    sol: &SolutionField<f64>,
) -> LabResult<Option<ReferenceErrors>> {
    if cfg.verify.reference.is_none() {
        return Ok(None);
    }
    let y0_error = cfg.reference_y0()?.map(|r| (sol.y0() - r).abs());
    let sup_error = cfg.reference_path()?.map(|expr| {
        let mut worst = 0.0_f64;
        for i in 0..=bundle.n_steps() {
            for s in 0..bundle.n_states(i) {
                let env = bsvi_core::generator::Env {
                    t: bundle.t(i),
                    b: bundle.b_value(i, s),
                    a: bundle.a(i),
                    ..Default::default()
                };
                worst = worst.max((sol.y[i][s] - expr.eval(&env)).abs());
            }
        }
        worst
    });
    Ok(Some(ReferenceErrors {
        y0_error,
        sup_error,
    }))
}

pub fn summarize(exec: &Execution, csv_hash: String) -> LabResult<RunSummary> {
    let seq = &exec.sequence;
    let failed: Vec<String> = exec.reports.iter().filter(|r| !r.pass).map(|r| r.name.clone()).collect();
    let mut warnings: Vec<String> = seq.solutions.iter().flat_map(|s| s.warnings.clone()).collect();
    warnings.dedup();
    Ok(RunSummary {
        scenario: exec.config.scenario.clone(),
        seed: exec.seed,
        seed_source: exec.seed_source.to_string(),
        eps: seq.solutions.iter().map(|s| s.eps).collect(),
        y0: seq.solutions.iter().map(|s| s.y0()).collect(),
        gaps: seq
            .gaps
            .iter()
            .map(|g| GapRecord {
                eps_a: g.eps_a,
                eps_b: g.eps_b,
                y_sup: g.y_sup,
                z_l2: g.z_l2,
            })
            .collect(),
        penalty_energy: seq.penalty_energy.clone(),
        k_total_variation: seq.solutions.iter().map(|s| s.k_total_variation()).collect(),
        reference: reference_errors(&exec.config, &exec.scenario.bundle, exec.finest())?,
        verdicts: Verdicts {
            total: exec.reports.len(),
            passed: exec.reports.len() - failed.len(),
            pass: failed.is_empty(),
            failed,
        },
        skipped: skipped_checks(&exec.config),
        warnings,
        timings: exec.timings.clone(),
        artifacts: BTreeMap::from([(RESULTS_CSV.to_string(), csv_hash)]),
        config: exec.config.clone(),
    })
}

/// Resolves `out_dir`, honoring [`OUTPUT_ROOT_ENV`] for relative paths.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if cfg.out_dir.is_relative() => PathBuf::from(root).join(&cfg.out_dir),
        _ => cfg.out_dir.clone(),
    }
}

fn write(path: &Path, bytes: &[u8]) -> LabResult<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub reports: Vec<ReportRecord>,
}

/// Executes `cfg` and writes `results.csv`, `summary.json` and `verify.json`.
pub fn run(cfg: &ExperimentConfig) -> LabResult<RunOutcome> {
    let exec = execute(cfg)?;
    let dir = output_dir(&exec.config);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let csv = results_csv(&exec.scenario.bundle, exec.finest());
    write(&dir.join(RESULTS_CSV), &csv)?;
    let summary = summarize(&exec, sha256_hex(&csv))?;
    let reports: Vec<ReportRecord> = exec.reports.iter().map(ReportRecord::from).collect();
    write(&dir.join(VERIFY_JSON), pretty(&reports).as_bytes())?;
    write(&dir.join(SUMMARY_JSON), pretty(&summary).as_bytes())?;
    Ok(RunOutcome {
        dir,
        summary,
        reports,
    })
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("artifacts are serializable")
}

pub fn run_file(path: &Path) -> LabResult<RunOutcome> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    run(&ExperimentConfig::from_json(&text)?)
}

/// Outcome of checking a run directory.
#[derive(Debug, Clone)]
pub struct DirCheck {
    pub pass: bool,
    pub lines: Vec<String>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> LabResult<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| LabError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Checks artifact integrity and recorded verdicts; with `recompute`, also
/// re-runs the echoed config and demands byte-identical `results.csv`.
pub fn verify_dir(dir: &Path, recompute: bool) -> LabResult<DirCheck> {
    let summary: RunSummary = read_json(&dir.join(SUMMARY_JSON))?;
    let reports: Vec<ReportRecord> = read_json(&dir.join(VERIFY_JSON))?;
    let csv_path = dir.join(RESULTS_CSV);
    let csv = fs::read(&csv_path).map_err(io_err(&csv_path))?;
    let mut lines = Vec::new();
    let mut pass = true;

    let recorded = summary.artifacts.get(RESULTS_CSV).cloned().unwrap_or_default();
    let actual = sha256_hex(&csv);
    if recorded == actual {
        lines.push(format!("ok    {RESULTS_CSV} sha256 {actual}"));
    } else {
        pass = false;
        lines.push(format!("FAIL  {RESULTS_CSV} sha256 {actual} != recorded {recorded}"));
    }
    for r in &reports {
        let consistent = r.worst_violation.is_some_and(|w| w <= r.tolerance) == r.pass;
        let ok = r.pass && consistent;
        pass &= ok;
        let worst = r.worst_violation.map_or("non-finite".to_string(), |w| format!("{w:.3e}"));
        let tag = if ok { "ok  " } else { "FAIL" };
        lines.push(format!("{tag}  {} worst {worst} tol {:.3e}", r.name, r.tolerance));
    }
    if recompute {
        let exec = execute(&summary.config)?;
        let fresh = results_csv(&exec.scenario.bundle, exec.finest());
        if fresh == csv {
            lines.push("ok    recomputed results.csv is byte-identical".into());
        } else {
            pass = false;
            lines.push("FAIL  recomputed results.csv differs".into());
        }
    }
    Ok(DirCheck { pass, lines })
}
