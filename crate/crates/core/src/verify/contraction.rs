use super::{worst_drop, VerificationReport};
use crate::error::{Error, Result};
use crate::process::PathBundle;
use crate::scalar::Scalar;
use crate::solver::SolutionField;

fn same_shape<T>(a: &SolutionField<T>, b: &SolutionField<T>, bundle: &PathBundle<T>) -> Result<()>
where
    T: Scalar,
{
    let n = bundle.n_steps();
    let ok = a.y.len() == n + 1
        && b.y.len() == n + 1
        && (0..=n).all(|i| a.y[i].len() == bundle.n_states(i) && b.y[i].len() == a.y[i].len());
    if ok {
        Ok(())
    } else {
        Err(Error::GridMismatch("solutions do not live on the bundle's lattice".into()))
    }
}

/// Weighted gap `g_i = E[e^{qV_i}|Y^a_i − Y^b_i|^q]` must not decrease from
/// `i` to any later `j` by more than `tol`.
pub fn check_contraction<T: Scalar>(
    a: &SolutionField<T>,
    b: &SolutionField<T>,
    bundle: &PathBundle<T>,
    q: T,
    tol: T,
) -> Result<VerificationReport> {
    same_shape(a, b, bundle)?;
    let g: Vec<T> = (0..=bundle.n_steps())
        .map(|i| {
            let ev = (q * bundle.v(i)).exp();
            bundle
                .state_weights(i)
                .iter()
                .zip(a.y[i].iter().zip(&b.y[i]))
                .map(|(&w, (&x, &y))| w * ev * (x - y).abs().powf(q))
                .sum()
        })
        .collect();
    let worst = worst_drop(&g).max(T::zero());
    let n = g.len() - 1;
    Ok(VerificationReport::new(
        format!("contraction[q={}]", q.to_f64_lossy()),
        g.iter().map(|v| v.to_f64_lossy()).collect(),
        worst.to_f64_lossy(),
        tol.to_f64_lossy(),
    )
    .with_monitor("weighted_gap_t0", g[0].to_f64_lossy())
    .with_monitor("weighted_gap_T", g[n].to_f64_lossy())
    .with_monitor("y0_gap", (a.y0() - b.y0()).abs().to_f64_lossy()))
}

/// `Σ_i E[(Y^a_i − Y^b_i)(U^a_i − U^b_i)] ΔQ_i`; nonnegative up to the
/// regularization cross-term for solutions of the same scenario.
pub fn monotonicity_gap<T: Scalar>(
    a: &SolutionField<T>,
    b: &SolutionField<T>,
    bundle: &PathBundle<T>,
) -> Result<T> {
    same_shape(a, b, bundle)?;
    Ok((0..bundle.n_steps())
        .map(|i| {
            let m: T = bundle
                .state_weights(i)
                .iter()
                .enumerate()
                .map(|(s, &w)| w * (a.y[i][s] - b.y[i][s]) * (a.u[i][s] - b.u[i][s]))
                .sum();
            m * bundle.dq(i)
        })
        .sum())
}
