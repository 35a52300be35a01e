//! Discrete Itô identity for `f(y) = (|y|² + δ)^{p/2}` along
//! `dY = −F dQ + R dB`:
//!
//! ```text
//! f(Y_t) + ½ Σ f''(Y) R² Δt = f(Y_s) + Σ f'(Y) F ΔQ − Σ f'(Y) R ΔB
//! ```
//!
//! with `f'(y) = p y (y² + δ)^{(p−2)/2}` and
//! `f''(y) = p (y² + δ)^{(p−4)/2} ((p − 1) y² + δ)`.

use super::{PathView, VerificationReport};
use crate::error::{Error, Result};
use crate::process::PathBundle;
use crate::scalar::Scalar;
use crate::solver::{CeBackend, CondExp, SolutionField};

/// Pathwise discrete semimartingale, `[path][node]` and `[path][step]`.
#[derive(Debug, Clone)]
pub struct Semimartingale<T> {
    pub y: Vec<Vec<T>>,
    /// Drift `F` per unit `dQ`.
    pub drift: Vec<Vec<T>>,
    pub diffusion: Vec<Vec<T>>,
}

impl<T: Scalar> Semimartingale<T> {
    /// Reads `Y`, the one-step drift `(Y_i − E_i[Y_{i+1}])/ΔQ_i` and `Z` off a solution.
    pub fn from_solution(
        sol: &SolutionField<T>,
        bundle: &PathBundle<T>,
        view: &PathView<T>,
        backend: CeBackend<T>,
    ) -> Result<Self> {
        let ce = CondExp::new(bundle, backend)?;
        let drift_nodes: Vec<Vec<T>> = (0..sol.n_steps())
            .map(|i| {
                let c = ce.expect(i, &sol.y[i + 1]);
                sol.y[i]
                    .iter()
                    .zip(&c)
                    .map(|(&y, &c)| (y - c) / bundle.dq(i))
                    .collect()
            })
            .collect();
        let paths = 0..view.n_paths();
        Ok(Self {
            y: paths.clone().map(|p| view.gather(&sol.y, p)).collect(),
            drift: paths.clone().map(|p| view.gather(&drift_nodes, p)).collect(),
            diffusion: paths.map(|p| view.gather(&sol.z, p)).collect(),
        })
    }
}

fn derivatives<T: Scalar>(y: T, p: T, delta: T) -> (T, T, T) {
    let two = T::lit(2.0);
    let s = y * y + delta;
    if s == T::zero() {
        let f2 = if p == two {
            two
        } else if p > two {
            T::zero()
        } else {
            T::infinity()
        };
        return (T::zero(), T::zero(), f2);
    }
    let f = s.powf(p / two);
    let f1 = p * y * s.powf((p - two) / two);
    let f2 = p * s.powf((p - two) / two) * ((p - T::one()) * y * y + delta) / s;
    (f, f1, f2)
}

/// Largest pathwise spread of `f(Y_k) − Σ_{l<k}[½f''R²Δt − f'FΔQ + f'RΔB]`,
/// which the identity keeps constant in `k`.
pub fn check_ito_residual<T: Scalar>(
    sm: &Semimartingale<T>,
    bundle: &PathBundle<T>,
    view: &PathView<T>,
    p: T,
    delta: T,
    tol: T,
) -> Result<VerificationReport> {
    if !(p > T::one()) || !(delta >= T::zero()) {
        return Err(Error::DomainError(format!("need p > 1 and delta >= 0, got p={p}, delta={delta}")));
    }
    let n = bundle.n_steps();
    if sm.y.len() != view.n_paths() || sm.y.iter().any(|r| r.len() != n + 1) {
        return Err(Error::GridMismatch("semimartingale shape does not match the view".into()));
    }
    let half = T::lit(0.5);
    let mut per_path = Vec::with_capacity(sm.y.len());
    let mut worst = T::zero();
    for (k, y) in sm.y.iter().enumerate() {
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        let mut acc = T::zero();
        for i in 0..=n {
            let (f, f1, f2) = derivatives(y[i], p, delta);
            let c = f - acc;
            lo = lo.min(c);
            hi = hi.max(c);
            if i < n {
                let r = sm.diffusion[k][i];
                acc += half * f2 * r * r * bundle.dt(i) - f1 * sm.drift[k][i] * bundle.dq(i)
                    + f1 * r * view.db[k][i];
            }
        }
        let spread = if (hi - lo).is_nan() { T::infinity() } else { hi - lo };
        worst = worst.max(spread);
        per_path.push(spread.to_f64_lossy());
    }
    let name = format!("ito[p={}, delta={}]", p.to_f64_lossy(), delta.to_f64_lossy());
    Ok(VerificationReport::new(name, per_path, worst.to_f64_lossy(), tol.to_f64_lossy()))
}
