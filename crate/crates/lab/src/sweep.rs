//! Convergence studies along one configuration axis.

use std::time::Instant;

use bsvi_core::solver::{gap, solve_penalized};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, NoiseConfig};
use crate::error::{CoreContext, LabError, LabResult};
use crate::runner::{build_scenario, reference_errors, resolve_seed, solve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Eps,
    Dt,
    Paths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub y0: f64,
    /// Sup-norm gap to the previous row on the `Eps` axis (same lattice),
    /// `|ΔY_0|` otherwise.
    pub gap: Option<f64>,
    /// RMS over replications when more than one is requested.
    pub y0_error: Option<f64>,
    pub sup_error: Option<f64>,
    pub runtime_ms: f64,
}

fn bad(field: &str, message: impl Into<String>) -> LabError {
    LabError::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn steps_for(cfg: &ExperimentConfig, dt: f64) -> LabResult<usize> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(bad("values", format!("dt must be positive, got {dt}")));
    }
    let steps = (cfg.grid.horizon / dt).round();
    if steps < 1.0 || (steps * dt - cfg.grid.horizon).abs() > 1e-9 * cfg.grid.horizon {
        return Err(bad("values", format!("dt = {dt} does not divide the horizon")));
    }
    Ok(steps as usize)
}

/// One row per value. `Eps` rows share one lattice (common random numbers);
/// `Paths` rows share the seed, so smaller path sets are prefixes of larger
/// ones. `replications > 1` repeats each `Paths` value on consecutive seeds.
pub fn sweep(cfg: &ExperimentConfig, axis: Axis, values: &[f64], replications: usize) -> LabResult<Vec<SweepRow>> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(bad("values", "no sweep values given"));
    }
    let (seed, _) = resolve_seed(cfg.seed);
    match axis {
        Axis::Eps => sweep_eps(cfg, values, seed),
        Axis::Dt | Axis::Paths => {
            if axis == Axis::Paths && !matches!(cfg.noise, NoiseConfig::GaussianMc { .. }) {
                return Err(bad("noise", "the paths axis needs gaussian_mc noise"));
            }
            let reps = if axis == Axis::Paths { replications.max(1) } else { 1 };
            let mut rows: Vec<SweepRow> = Vec::new();
            for &v in values {
                let mut c = cfg.clone();
                match axis {
                    Axis::Dt => c.grid.steps = steps_for(cfg, v)?,
                    _ => {
                        if !(v >= 2.0 && v.fract() == 0.0) {
                            return Err(bad("values", format!("path count {v} is not an integer >= 2")));
                        }
                        c.noise = NoiseConfig::GaussianMc { paths: v as usize };
                    }
                }
                c.solver.eps.truncate(1);
                let start = Instant::now();
                let (mut y0s, mut e0, mut es) = (Vec::new(), Vec::new(), Vec::new());
                for r in 0..reps {
                    let (sc, seq) = solve(&c, seed.wrapping_add(r as u64))?;
                    let sol = &seq.solutions[0];
                    y0s.push(sol.y0());
                    if let Some(err) = reference_errors(&c, &sc.bundle, sol)? {
                        e0.extend(err.y0_error);
                        es.extend(err.sup_error);
                    }
                }
                let rms = |v: &[f64]| (!v.is_empty()).then(|| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt());
                let y0 = y0s.iter().sum::<f64>() / y0s.len() as f64;
                rows.push(SweepRow {
                    value: v,
                    y0,
                    gap: rows.last().map(|p| (p.y0 - y0).abs()),
                    y0_error: rms(&e0),
                    sup_error: rms(&es),
                    runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                });
            }
            Ok(rows)
        }
    }
}

fn sweep_eps(cfg: &ExperimentConfig, values: &[f64], seed: u64) -> LabResult<Vec<SweepRow>> {
    let mut c = cfg.clone();
    c.solver.eps = values.to_vec();
    c.validate()?;
    let scenario = build_scenario(&c, seed)?;
    let scfg = c.solver_config();
    let mut rows = Vec::new();
    let mut prev = None;
    for &e in values {
        let start = Instant::now();
        let sol = solve_penalized(&scenario, &scfg, e).in_scenario(&c.scenario)?;
        let err = reference_errors(&c, &scenario.bundle, &sol)?;
        rows.push(SweepRow {
            value: e,
            y0: sol.y0(),
            gap: prev.as_ref().map(|p| gap(&scenario.bundle, p, &sol).y_sup),
            y0_error: err.as_ref().and_then(|r| r.y0_error),
            sup_error: err.as_ref().and_then(|r| r.sup_error),
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        prev = Some(sol);
    }
    Ok(rows)
}

/// Convergence table as CSV; missing entries are empty.
pub fn rows_csv(rows: &[SweepRow]) -> Vec<u8> {
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.16e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["value", "y0", "gap", "y0_error", "sup_error", "runtime_ms"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            format!("{:.16e}", r.value),
            format!("{:.16e}", r.y0),
            opt(r.gap),
            opt(r.y0_error),
            opt(r.sup_error),
            format!("{:.3}", r.runtime_ms),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Ratios `e_k / e_{k+1}` of consecutive errors.
pub fn error_ratios(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| w[0] / w[1]).collect()
}
