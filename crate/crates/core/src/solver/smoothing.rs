//! Exponential smoothing `M^ε_t = E_t ∫_{t∨ε}^∞ e^{−(Q_r − Q_{t∨ε})/Q_ε} U_r dQ_r / Q_ε`
//! of a level-indexed process, with `U` held at `U_T` beyond the horizon.
//!
//! On the grid `U` is piecewise constant in the clock `Q`, so each interval
//! carries the exact weight `e^{−(Q_j − Q_k)/Q_ε}(1 − e^{−ΔQ_j/Q_ε})` and the
//! held tail carries `e^{−(Q_N − Q_k)/Q_ε}`. The weights sum to one and the
//! backward recursion
//!
//! ```text
//! S_N = U_N,   S_k = (1 − e^{−ΔQ_k/Q_ε}) U_k + e^{−ΔQ_k/Q_ε} E_k[S_{k+1}]
//! ```
//!
//! gives `M_k = S_k` for `t_k ≥ ε` and `M_k = E_k[M_{k+1}]` before.

use super::ce::{CeBackend, CondExp};
use crate::error::{Error, Result};
use crate::process::PathBundle;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig<T> {
    pub eps: T,
}

/// `M^ε` with its drift and diffusion, all `[level][state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedProcess<T> {
    /// `Q_ε = ε + A_ε`.
    pub q_eps: T,
    /// First level with `t_i ≥ ε`.
    pub i_eps: usize,
    pub m: Vec<Vec<T>>,
    /// Drift `1[t_i ≥ ε] (U_i − M_i)/Q_ε`, per step.
    pub n: Vec<Vec<T>>,
    /// Discrete drift `(M_i − E_i[M_{i+1}])/ΔQ_i`, per step; with `r` it
    /// rebuilds `M` exactly on the binomial tree.
    pub n_discrete: Vec<Vec<T>>,
    /// `E_i[M_{i+1} ΔB_i]/Δt_i`, per step.
    pub r: Vec<Vec<T>>,
}

pub fn smoothing_operator<T: Scalar>(
    u: &[Vec<T>],
    bundle: &PathBundle<T>,
    cfg: SmoothingConfig<T>,
    backend: CeBackend<T>,
) -> Result<SmoothedProcess<T>> {
    let n = bundle.n_steps();
    if u.len() != n + 1 || (0..=n).any(|i| u[i].len() != bundle.n_states(i)) {
        return Err(Error::GridMismatch(
            "smoothing input must have one value per state and level".into(),
        ));
    }
    if !(cfg.eps > T::zero()) {
        return Err(Error::DomainError(format!("eps must be positive, got {}", cfg.eps)));
    }
    let ce = CondExp::new(bundle, backend)?;
    let q_eps = bundle.clock_at(cfg.eps);
    let i_eps = (0..=n).find(|&i| bundle.t(i) >= cfg.eps).unwrap_or(n);

    let mut m = vec![Vec::new(); n + 1];
    m[n] = u[n].clone();
    for i in (0..n).rev() {
        let next = ce.expect(i, &m[i + 1]);
        m[i] = if i >= i_eps {
            let decay = (-bundle.dq(i) / q_eps).exp();
            u[i]
                .iter()
                .zip(&next)
                .map(|(&ui, &c)| (T::one() - decay) * ui + decay * c)
                .collect()
        } else {
            next
        };
    }

    let mut nd = Vec::with_capacity(n);
    let mut nf = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for i in 0..n {
        let c = ce.expect(i, &m[i + 1]);
        let (dq, dt) = (bundle.dq(i), bundle.dt(i));
        nd.push(m[i].iter().zip(&c).map(|(&mi, &ci)| (mi - ci) / dq).collect());
        let active = bundle.t(i) >= cfg.eps;
        nf.push(
            u[i].iter()
                .zip(&m[i])
                .map(|(&ui, &mi)| if active { (ui - mi) / q_eps } else { T::zero() })
                .collect(),
        );
        r.push(ce.expect_db(i, &m[i + 1]).into_iter().map(|v| v / dt).collect());
    }
    Ok(SmoothedProcess {
        q_eps,
        i_eps,
        m,
        n: nf,
        n_discrete: nd,
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{build_paths, IncreasingProcessSpec, NoiseModel, TimeGrid};

    #[test]
    fn constant_is_a_fixed_point() {
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let b = build_paths(&grid, NoiseModel::BinomialTree, IncreasingProcessSpec::Zero).unwrap();
        let u: Vec<Vec<f64>> = (0..=20).map(|i| vec![0.7; i + 1]).collect();
        let s = smoothing_operator(&u, &b, SmoothingConfig { eps: 0.05 }, CeBackend::ExactTree).unwrap();
        assert!(s.m.iter().flatten().all(|v| (v - 0.7).abs() < 1e-12));
        assert!(s.n.iter().flatten().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn deterministic_ramp_tracks_identity() {
        let grid = TimeGrid::uniform(1.0, 1000).unwrap();
        let b = build_paths(&grid, NoiseModel::Deterministic, IncreasingProcessSpec::Zero).unwrap();
        let u: Vec<Vec<f64>> = (0..=1000).map(|i| vec![b.t(i)]).collect();
        let s = smoothing_operator(&u, &b, SmoothingConfig { eps: 0.01 }, CeBackend::ExactTree).unwrap();
        for i in s.i_eps..900 {
            // The kernel mean lag is Q_ε.
            assert!((s.m[i][0] - b.t(i) - 0.01).abs() < 1e-3);
        }
    }
}
