//! Smoothing of generators by convolution with a bump kernel, with the
//! magnitude cut-off `ε|F(t, ·, 0)| ≤ 1` and the `z`-projection `β_ε`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `∫_{−1}^{1} exp(−1/(1−u²)) du`.
pub const BUMP_INTEGRAL: f64 = 0.443_993_816_168_079_3;

/// Default midpoint node count.
pub const DEFAULT_NODES: usize = 401;

/// Normalized bump `ρ(u) = exp(−1/(1−u²)) / BUMP_INTEGRAL` on `(−1, 1)`.
pub fn bump<T: Scalar>(u: T) -> T {
    let s = T::one() - u * u;
    if s <= T::zero() {
        return T::zero();
    }
    (-T::one() / s).exp() / T::lit(BUMP_INTEGRAL)
}

/// `ρ'(u) = −2u/(1−u²)² · ρ(u)`.
pub fn bump_derivative<T: Scalar>(u: T) -> T {
    let s = T::one() - u * u;
    if s <= T::zero() {
        return T::zero();
    }
    -T::lit(2.0) * u / (s * s) * bump(u)
}

/// Quadrature rule for the mollifier at a fixed `ε`.
#[derive(Debug, Clone)]
pub struct MollifierConfig<T> {
    eps: T,
    nodes: Vec<T>,
    weights: Vec<T>,
    kappa: T,
}

impl<T: Scalar> MollifierConfig<T> {
    /// Composite midpoint rule with `n_q` nodes on `(−1, 1)`. `κ` is the
    /// largest `|ρ'|` on a 20·`n_q` grid (never below the value on the nodes).
    pub fn new(eps: T, n_q: usize) -> Result<Self> {
        if !(eps > T::zero() && eps <= T::one()) {
            return Err(Error::DomainError(format!(
                "mollifier eps must lie in (0, 1], got {eps}"
            )));
        }
        if n_q == 0 {
            return Err(Error::QuadratureFailure("at least one node is required".into()));
        }
        let h = 2.0 / n_q as f64;
        let nodes: Vec<T> = (0..n_q).map(|k| T::lit(-1.0 + (k as f64 + 0.5) * h)).collect();
        let weights: Vec<T> = nodes.iter().map(|&u| bump(u) * T::lit(h)).collect();
        let fine = 20 * n_q;
        let kappa = (0..=fine)
            .map(|k| bump_derivative(-1.0 + 2.0 * k as f64 / fine as f64).abs())
            .fold(0.0_f64, f64::max);
        Ok(Self {
            eps,
            nodes,
            weights,
            kappa: T::lit(kappa),
        })
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Bound on `|ρ'|` over the unit ball.
    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn weight_sum(&self) -> T {
        self.weights.iter().copied().sum()
    }
}

/// `β_ε(z) = z / max(1, ε|z|)`, the projection onto the ball of radius `1/ε`.
pub fn beta_trunc<T: Scalar>(eps: T, z: T) -> Result<T> {
    if !(eps > T::zero()) {
        return Err(Error::DomainError(format!("eps must be positive, got {eps}")));
    }
    Ok(z / T::one().max(eps * z.abs()))
}

/// `F_ε(t, y, z) = Σ_k w_k F(t, y − εu_k, β_ε(z)) 1[ε|F(t, y − εu_k, 0)| ≤ 1]`.
pub fn mollify_f<T: Scalar>(
    f: impl Fn(T, T, T) -> T,
    cfg: &MollifierConfig<T>,
    t: T,
    y: T,
    z: T,
) -> Result<T> {
    let eps = cfg.eps;
    let zb = beta_trunc(eps, z)?;
    let mut acc = T::zero();
    for (&u, &w) in cfg.nodes.iter().zip(&cfg.weights) {
        let v = y - eps * u;
        let base = f(t, v, T::zero());
        if !base.is_finite() {
            return Err(Error::QuadratureFailure(format!("F(t={t}, y={v}, 0) = {base}")));
        }
        if eps * base.abs() <= T::one() {
            let val = f(t, v, zb);
            if !val.is_finite() {
                return Err(Error::QuadratureFailure(format!(
                    "F(t={t}, y={v}, z={zb}) = {val}"
                )));
            }
            acc += w * val;
        }
    }
    Ok(acc)
}

/// `G_ε(t, y)`, the same construction without a `z` argument.
pub fn mollify_g<T: Scalar>(
    g: impl Fn(T, T) -> T,
    cfg: &MollifierConfig<T>,
    t: T,
    y: T,
) -> Result<T> {
    mollify_f(|t, y, _| g(t, y), cfg, t, y, T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_normalized() {
        let cfg = MollifierConfig::<f64>::new(0.1, DEFAULT_NODES).unwrap();
        assert!((cfg.weight_sum() - 1.0).abs() < 1e-8);
        assert!((cfg.kappa() - 1.798).abs() < 1e-3);
        // The total variation of ρ, 2ρ(0), stays below κ.
        assert!(2.0 * bump(0.0) <= cfg.kappa());
    }

    #[test]
    fn bump_integral_constant() {
        // Independent check with a much finer midpoint rule.
        let n = 200_000;
        let h = 2.0 / n as f64;
        let s: f64 = (0..n)
            .map(|k| {
                let u: f64 = -1.0 + (k as f64 + 0.5) * h;
                (-1.0 / (1.0 - u * u)).exp() * h
            })
            .sum();
        assert!((s - BUMP_INTEGRAL).abs() < 1e-12);
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_trunc(0.1, 5.0).unwrap(), 5.0);
        assert!(f64::abs(beta_trunc(0.1, 20.0).unwrap() - 10.0) < 1e-12);
        assert!(f64::abs(beta_trunc(0.1, -20.0).unwrap() + 10.0) < 1e-12);
        assert_eq!(beta_trunc(0.7, 0.0).unwrap(), 0.0);
        assert!(beta_trunc(0.0, 1.0).is_err());
    }

    #[test]
    fn mollify_examples() {
        let cfg = MollifierConfig::new(0.2, DEFAULT_NODES).unwrap();
        assert_eq!(mollify_f(|_, _, _| 0.0, &cfg, 0.0, 1.0, 3.0).unwrap(), 0.0);
        let k = mollify_f(|_, _, _| 3.0, &cfg, 0.0, 1.0, 3.0).unwrap();
        assert!(f64::abs(k - 3.0) < 1e-8);
        let lin = mollify_f(|_, y, _| y, &cfg, 0.0, 1.0, 0.0).unwrap();
        assert!(f64::abs(lin - 1.0) < 1e-8);
        // Above the cut-off the integrand is dropped entirely.
        let big = mollify_f(|_, _, _| 10.0, &cfg, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(big, 0.0);
        assert!(mollify_f(|_, _, _| f64::NAN, &cfg, 0.0, 1.0, 0.0).is_err());
        assert!(MollifierConfig::<f64>::new(1.5, 11).is_err());
    }
}
