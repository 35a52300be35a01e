use super::{check_def1, Def1Options, PathView, PotentialMode, TestProcess, VerificationReport};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solver::{Scenario, SolutionField, SolverConfig};

/// Composition of the variational-inequality battery.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryOptions<T> {
    /// Exponents `p`; each contributes `q = 2` and `q = p ∧ 2`.
    pub p_values: Vec<T>,
    pub deltas: Vec<T>,
    pub random_processes: usize,
    pub smoothing_eps: T,
    pub c1: T,
    pub c2: T,
    pub max_paths: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for BatteryOptions<T> {
    fn default() -> Self {
        Self {
            p_values: vec![T::lit(1.5), T::lit(2.5)],
            deltas: vec![T::one(), T::lit(0.1), T::lit(0.01)],
            random_processes: 10,
            smoothing_eps: T::lit(0.05),
            c1: T::lit(5.0),
            c2: T::lit(5.0),
            max_paths: super::DEFAULT_MAX_PATHS,
            seed: 1,
        }
    }
}

/// Checks the finest solution of `solutions` against the zero process, its own
/// reconstruction, `random_processes` random piecewise-constant processes and
/// the smoothed midpoint of the two finest solutions, for every `q` and `δ`.
pub fn run_battery<T: Scalar>(
    scenario: &Scenario<T>,
    cfg: &SolverConfig<T>,
    solutions: &[SolutionField<T>],
    opts: &BatteryOptions<T>,
) -> Result<Vec<VerificationReport>> {
    let sol = solutions
        .last()
        .ok_or_else(|| Error::InvalidConfig("battery needs at least one solution".into()))?;
    let prev = if solutions.len() >= 2 {
        &solutions[solutions.len() - 2]
    } else {
        sol
    };
    let bundle = &scenario.bundle;
    let view = PathView::new(bundle, opts.max_paths, opts.seed);
    let tol = view.tolerance(bundle, opts.c1, opts.c2);
    let gen = scenario.effective_generator(cfg, sol.eps)?;
    let mode = if scenario.potential.is_zero() {
        PotentialMode::Exact
    } else {
        PotentialMode::Regularized { eps: sol.eps }
    };

    let mut tps = vec![
        TestProcess::zero(bundle, &view),
        TestProcess::reconstruction(sol, &gen, bundle, &view)?,
        TestProcess::smoothed_midpoint(sol, prev, bundle, &view, cfg.backend, opts.smoothing_eps)?,
    ];
    for k in 0..opts.random_processes {
        let seed = opts.seed.wrapping_mul(1000).wrapping_add(k as u64);
        tps.push(TestProcess::random_piecewise(bundle, &view, 4, T::one(), seed));
    }

    let two = T::lit(2.0);
    let mut qs: Vec<T> = vec![two];
    for &p in &opts.p_values {
        let q = p.min(two);
        if !qs.contains(&q) {
            qs.push(q);
        }
    }
    let mut out = Vec::new();
    for &q in &qs {
        for &delta in &opts.deltas {
            for tp in &tps {
                out.push(check_def1(
                    sol,
                    tp,
                    &scenario.potential,
                    &gen,
                    bundle,
                    &view,
                    Def1Options {
                        q,
                        delta,
                        tol,
                        mode,
                    },
                )?);
            }
        }
    }
    Ok(out)
}
