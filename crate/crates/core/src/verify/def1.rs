//! Discrete form of the variational inequality with
//! `Γ = (|M − Y|² + δ_q)^{1/2}`:
//!
//! ```text
//! Γ_i^q + q(q−1)/2 Σ Γ^{q−2}|R − Z|²Δt + q Σ Γ^{q−2} Ψ(·, Y) ΔQ
//!   ≤ Γ_j^q + q Σ Γ^{q−2} Ψ(·, M) ΔQ + q Σ Γ^{q−2} ⟨M − Y, N − H(·, Y, Z)⟩ ΔQ
//!     − q Σ Γ^{q−2} ⟨M − Y, (R − Z) ΔB⟩
//! ```
//!
//! for every pair of levels `i < j`, averaged over the paths of the view.

use super::{worst_drop, PathView, TestProcess, VerificationReport};
use crate::convex::CombinedPotential;
use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::process::{delta_q, PathBundle};
use crate::scalar::Scalar;
use crate::solver::SolutionField;

/// Which potential enters the inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialMode<T> {
    /// `Ψ` itself; a test process leaving its domain is an error.
    Exact,
    /// The Moreau–Yosida envelope `Ψ^ε` with the `A ≤ 1/ε` truncation, on both
    /// sides, for penalized solutions that sit slightly outside `dom Ψ`.
    Regularized { eps: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Def1Options<T> {
    pub q: T,
    pub delta: T,
    pub tol: T,
    pub mode: PotentialMode<T>,
}

/// `0·v = 0` even for `v = ∞`.
fn weighted<T: Scalar>(w: T, v: T) -> T {
    if w == T::zero() {
        T::zero()
    } else {
        w * v
    }
}

/// `Γ = (|M − Y|² + δ_q)^{1/2}`.
pub fn gamma<T: Scalar>(m: T, y: T, delta_q: T) -> T {
    ((m - y) * (m - y) + delta_q).sqrt()
}

pub fn check_def1<T: Scalar>(
    sol: &SolutionField<T>,
    tp: &TestProcess<T>,
    pot: &CombinedPotential<T>,
    gen: &GeneratorSpec<T>,
    bundle: &PathBundle<T>,
    view: &PathView<T>,
    opts: Def1Options<T>,
) -> Result<VerificationReport> {
    let q = opts.q;
    if !(q > T::one() && q <= T::lit(2.0)) {
        return Err(Error::DomainError(format!("q must lie in (1, 2], got {q}")));
    }
    let dq_ = delta_q(opts.delta, q)?;
    let n = bundle.n_steps();
    if sol.n_steps() != n || tp.m.len() != view.n_paths() {
        return Err(Error::GridMismatch("solution, test process and view disagree".into()));
    }
    let two = T::lit(2.0);
    let half_qq1 = q * (q - T::one()) / two;

    // Ψ(t_k, v) ΔQ_k in the selected mode.
    let psi_dq = |k: usize, v: T| -> Result<T> {
        let (dt, da) = (bundle.dt(k), bundle.da(k));
        match opts.mode {
            PotentialMode::Exact => {
                Ok(weighted(dt, pot.phi.value(v)) + weighted(da, pot.psi.value(v)))
            }
            PotentialMode::Regularized { eps } => {
                if bundle.a(k) > T::one() / eps {
                    return Ok(T::zero());
                }
                Ok(dt * pot.phi.envelope(eps, v)? + da * pot.psi.envelope(eps, v)?)
            }
        }
    };
    let h_trunc = |k: usize| match opts.mode {
        PotentialMode::Exact => true,
        PotentialMode::Regularized { eps } => bundle.a(k) <= T::one() / eps,
    };

    let paths = view.n_paths();
    let mut g = vec![T::zero(); n + 1];
    let mut excess_max = T::zero();
    let mut outside = 0usize;
    for p in 0..paths {
        let y = view.gather(&sol.y, p);
        let z = view.gather(&sol.z, p);
        let m = &tp.m[p];
        let mut acc = T::zero();
        for k in 0..=n {
            let gk = gamma(m[k], y[k], dq_);
            excess_max = excess_max.max(gk * gk - dq_);
            g[k] += gk.powf(q) - acc;
            if k == n {
                break;
            }
            let (t, dt, da, dq) = (bundle.t(k), bundle.dt(k), bundle.da(k), bundle.dq(k));
            let w = gk.powf(q - two);
            let x = m[k] - y[k];
            let dr = tp.r[p][k] - z[k];
            let psi_m = psi_dq(k, m[k])?;
            if !psi_m.is_finite() {
                return Err(Error::InfinitePotential { step: k });
            }
            if !pot.value(bundle.alpha(k), m[k]).is_finite() {
                outside += 1;
            }
            let psi_y = psi_dq(k, y[k])?;
            let h = if h_trunc(k) {
                (gen.f(t, y[k], z[k]) * dt + gen.g(t, y[k]) * da) / dq
            } else {
                T::zero()
            };
            let d = half_qq1 * w * dr * dr * dt + q * w * psi_y
                - q * w * psi_m
                - q * w * x * (tp.n[p][k] - h) * dq
                + q * w * x * dr * view.db[p][k];
            acc += d;
        }
    }
    let pf = T::from_usize_lossy(paths);
    for v in g.iter_mut() {
        *v /= pf;
    }
    let residuals: Vec<f64> = g.windows(2).map(|w| (w[0] - w[1]).to_f64_lossy()).collect();
    let worst = worst_drop(&g);
    let worst = if worst.is_nan() { T::infinity() } else { worst };
    let name = format!(
        "def1[q={}, delta={}, tp={}]",
        q.to_f64_lossy(),
        opts.delta.to_f64_lossy(),
        tp.label
    );
    Ok(
        VerificationReport::new(name, residuals, worst.to_f64_lossy(), opts.tol.to_f64_lossy())
            .with_monitor("gamma_sq_minus_delta_max", excess_max.to_f64_lossy())
            .with_monitor("test_nodes_outside_domain", outside as f64)
            .with_monitor("paths", paths as f64),
    )
}
