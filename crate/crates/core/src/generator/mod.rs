//! The generator pair `(F, G)` and the combined driver `H = αF + (1 − α)G`.

pub mod expr;
pub mod mollifier;

use std::fmt;
use std::sync::Arc;

pub use expr::{Env, Expr, Var};
pub use mollifier::{
    beta_trunc, bump, bump_derivative, mollify_f, mollify_g, MollifierConfig, BUMP_INTEGRAL,
    DEFAULT_NODES,
};

use crate::error::{Error, Result};
use crate::process::rng::UniformStream;
use crate::scalar::Scalar;

pub type FFn<T> = Arc<dyn Fn(T, T, T) -> T + Send + Sync>;
pub type GFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// `F(t, y, z)` acting against `dt`, `G(t, y)` against `dA`, with the
/// monotonicity constants `μ`, `ν` and the `z`-Lipschitz constant `ℓ`.
#[derive(Clone)]
pub struct GeneratorSpec<T> {
    f: FFn<T>,
    g: GFn<T>,
    pub mu: T,
    pub nu: T,
    pub ell: T,
    pub label: String,
}

impl<T> fmt::Debug for GeneratorSpec<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("label", &self.label)
            .field("mu", &self.mu)
            .field("nu", &self.nu)
            .field("ell", &self.ell)
            .finish()
    }
}

impl<T: Scalar> GeneratorSpec<T> {
    pub fn new(f: FFn<T>, g: GFn<T>, mu: T, nu: T, ell: T, label: impl Into<String>) -> Result<Self> {
        if !(mu.is_finite() && nu.is_finite() && ell.is_finite()) || ell < T::zero() {
            return Err(Error::DomainError(format!(
                "invalid coefficients mu={mu}, nu={nu}, ell={ell}"
            )));
        }
        Ok(Self {
            f,
            g,
            mu,
            nu,
            ell,
            label: label.into(),
        })
    }

    pub fn zero() -> Self {
        Self {
            f: Arc::new(|_, _, _| T::zero()),
            g: Arc::new(|_, _| T::zero()),
            mu: T::zero(),
            nu: T::zero(),
            ell: T::zero(),
            label: "zero".into(),
        }
    }

    /// Builds `F` and `G` from expressions; `G` must not use `z`.
    pub fn from_exprs(f: &Expr, g: &Expr, mu: T, nu: T, ell: T) -> Result<Self> {
        if g.uses(Var::Z) {
            return Err(Error::Expression("G must not depend on z".into()));
        }
        let label = format!("F = {f}; G = {g}");
        let (fe, ge) = (f.clone(), g.clone());
        Self::new(
            Arc::new(move |t, y, z| {
                fe.eval(&Env {
                    t,
                    y,
                    z,
                    ..Env::default()
                })
            }),
            Arc::new(move |t, y| {
                ge.eval(&Env {
                    t,
                    y,
                    ..Env::default()
                })
            }),
            mu,
            nu,
            ell,
            label,
        )
    }

    pub fn f(&self, t: T, y: T, z: T) -> T {
        (self.f)(t, y, z)
    }

    pub fn g(&self, t: T, y: T) -> T {
        (self.g)(t, y)
    }

    pub fn f_fn(&self) -> FFn<T> {
        self.f.clone()
    }

    pub fn g_fn(&self) -> GFn<T> {
        self.g.clone()
    }

    /// `H = α F(t, y, z) + (1 − α) G(t, y)`.
    pub fn eval_h(&self, alpha: T, t: T, y: T, z: T) -> Result<T> {
        if !(T::zero()..=T::one()).contains(&alpha) {
            return Err(Error::DomainError(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let fv = self.f(t, y, z);
        let gv = self.g(t, y);
        if !fv.is_finite() || !gv.is_finite() {
            return Err(Error::NonFiniteGenerator {
                t: t.to_f64_lossy(),
                y: y.to_f64_lossy(),
                z: z.to_f64_lossy(),
            });
        }
        Ok(alpha * fv + (T::one() - alpha) * gv)
    }

    /// `sup_{|y| ≤ ρ} |F(t, y, 0)|` on 1001 equispaced points.
    pub fn f_sharp(&self, rho: T, t: T) -> Result<T> {
        sup_on_ball(rho, |y| self.f(t, y, T::zero()))
    }

    /// `sup_{|y| ≤ ρ} |G(t, y)|` on 1001 equispaced points.
    pub fn g_sharp(&self, rho: T, t: T) -> Result<T> {
        sup_on_ball(rho, |y| self.g(t, y))
    }

    /// Samples the monotonicity and `z`-Lipschitz conditions on `n` random
    /// triples with `t ∈ [0, horizon]` and `|y|, |z| ≤ radius`.
    pub fn check_coefficients(&self, horizon: T, radius: T, n: usize, seed: u64) -> Result<()> {
        let mut rng = UniformStream::new(seed, 0x6e6e);
        let r = radius.to_f64_lossy();
        let slack = |scale: T| T::lit(1e-9) * (T::one() + scale);
        for _ in 0..n {
            let t = T::lit(rng.uniform()) * horizon;
            let y = T::lit(rng.range(-r, r));
            let y2 = T::lit(rng.range(-r, r));
            let z = T::lit(rng.range(-r, r));
            let z2 = T::lit(rng.range(-r, r));
            let dy = y2 - y;
            let mf = dy * (self.f(t, y2, z) - self.f(t, y, z));
            if mf > self.mu * dy * dy + slack(mf.abs()) {
                return Err(Error::DomainError(format!(
                    "F violates monotonicity with mu={} at t={t}, y={y}, y'={y2}",
                    self.mu
                )));
            }
            let mg = dy * (self.g(t, y2) - self.g(t, y));
            if mg > self.nu * dy * dy + slack(mg.abs()) {
                return Err(Error::DomainError(format!(
                    "G violates monotonicity with nu={} at t={t}, y={y}, y'={y2}",
                    self.nu
                )));
            }
            let lz = (self.f(t, y, z2) - self.f(t, y, z)).abs();
            if lz > self.ell * (z2 - z).abs() + slack(lz) {
                return Err(Error::DomainError(format!(
                    "F is not {}-Lipschitz in z at t={t}, y={y}",
                    self.ell
                )));
            }
        }
        Ok(())
    }

    /// The mollified pair `(F_ε, G_ε)`. Quadrature failures surface as NaN
    /// and are reported by [`Self::eval_h`].
    pub fn mollified(&self, cfg: &MollifierConfig<T>) -> Self {
        let (f, g) = (self.f.clone(), self.g.clone());
        let (cf, cg) = (cfg.clone(), cfg.clone());
        Self {
            f: Arc::new(move |t, y, z| {
                mollify_f(|t, y, z| f(t, y, z), &cf, t, y, z).unwrap_or_else(|_| T::nan())
            }),
            g: Arc::new(move |t, y| {
                mollify_g(|t, y| g(t, y), &cg, t, y).unwrap_or_else(|_| T::nan())
            }),
            mu: self.mu,
            nu: self.nu,
            ell: self.ell,
            label: format!("mollified[{}; eps={}]", self.label, cfg.eps()),
        }
    }

    /// Generator seen from the recentered unknown `ŷ = y − u0` when the
    /// potentials are recentered with slopes `û₁`, `û₂`:
    /// `F̂(t, ŷ, z) = F(t, ŷ + u0, z) − û₁`, `Ĝ(t, ŷ) = G(t, ŷ + u0) − û₂`.
    pub fn recentered(&self, u0: T, uhat1: T, uhat2: T) -> Self {
        let (f, g) = (self.f.clone(), self.g.clone());
        Self {
            f: Arc::new(move |t, y, z| f(t, y + u0, z) - uhat1),
            g: Arc::new(move |t, y| g(t, y + u0) - uhat2),
            mu: self.mu,
            nu: self.nu,
            ell: self.ell,
            label: format!("recentered[{}]", self.label),
        }
    }
}

fn sup_on_ball<T: Scalar>(rho: T, h: impl Fn(T) -> T) -> Result<T> {
    if !(rho >= T::zero()) {
        return Err(Error::DomainError(format!("rho must be >= 0, got {rho}")));
    }
    let n = 1000;
    let mut best = T::zero();
    for k in 0..=n {
        let y = -rho + T::lit(2.0) * rho * T::from_usize_lossy(k) / T::from_usize_lossy(n);
        best = best.max(h(y).abs());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(fsrc: &str, gsrc: &str) -> GeneratorSpec<f64> {
        GeneratorSpec::from_exprs(
            &Expr::parse(fsrc).unwrap(),
            &Expr::parse(gsrc).unwrap(),
            0.0,
            2.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn eval_h_examples() {
        let z = GeneratorSpec::<f64>::zero();
        assert_eq!(z.eval_h(0.3, 0.1, 2.0, 3.0).unwrap(), 0.0);
        let g = lin("-y", "2 * y");
        assert_eq!(g.eval_h(0.5, 0.0, 1.0, 0.0).unwrap(), 0.5);
        assert_eq!(g.eval_h(1.0, 0.0, 3.0, 0.0).unwrap(), -3.0);
        assert!(g.eval_h(1.2, 0.0, 3.0, 0.0).is_err());
        let bad = GeneratorSpec::new(
            Arc::new(|_, _, _| f64::INFINITY),
            Arc::new(|_, _| 0.0),
            0.0,
            0.0,
            0.0,
            "bad",
        )
        .unwrap();
        assert!(matches!(
            bad.eval_h(0.5, 0.0, 0.0, 0.0),
            Err(Error::NonFiniteGenerator { .. })
        ));
    }

    #[test]
    fn sharp_examples() {
        assert_eq!(lin("-y", "0").f_sharp(2.0, 0.0).unwrap(), 2.0);
        assert_eq!(GeneratorSpec::<f64>::zero().f_sharp(5.0, 0.0).unwrap(), 0.0);
        assert_eq!(lin("1 + y * y", "0").f_sharp(1.0, 0.0).unwrap(), 2.0);
        assert_eq!(lin("0", "2 * y").g_sharp(1.5, 0.0).unwrap(), 3.0);
    }

    #[test]
    fn coefficient_sampling() {
        let ok = GeneratorSpec::from_exprs(
            &Expr::parse("-y + 0.5 * z").unwrap(),
            &Expr::parse("0").unwrap(),
            -1.0,
            0.0,
            0.5,
        )
        .unwrap();
        ok.check_coefficients(1.0, 5.0, 1000, 1).unwrap();
        let wrong_mu = GeneratorSpec::from_exprs(
            &Expr::parse("y").unwrap(),
            &Expr::parse("0").unwrap(),
            0.5,
            0.0,
            0.0,
        )
        .unwrap();
        assert!(wrong_mu.check_coefficients(1.0, 5.0, 1000, 1).is_err());
        let wrong_ell = GeneratorSpec::from_exprs(
            &Expr::parse("2 * z").unwrap(),
            &Expr::parse("0").unwrap(),
            0.0,
            0.0,
            1.0,
        )
        .unwrap();
        assert!(wrong_ell.check_coefficients(1.0, 5.0, 1000, 1).is_err());
        assert!(GeneratorSpec::<f64>::from_exprs(
            &Expr::parse("0").unwrap(),
            &Expr::parse("z").unwrap(),
            0.0,
            0.0,
            0.0
        )
        .is_err());
    }

    #[test]
    fn recentered_generator_shifts() {
        let g = lin("-y", "y");
        let r = g.recentered(1.0, 0.5, -0.25);
        assert_eq!(r.f(0.0, 0.0, 0.0), -1.5);
        assert_eq!(r.g(0.0, 1.0), 2.25);
    }

    #[test]
    fn mollified_linear_is_reproduced() {
        let cfg = MollifierConfig::new(0.2, mollifier::DEFAULT_NODES).unwrap();
        let m = lin("-y", "0").mollified(&cfg);
        assert!((m.f(0.0, 1.0, 0.0) + 1.0).abs() < 1e-8);
        assert_eq!(m.g(0.0, 1.0), 0.0);
    }
}
