//! Proper convex lower semicontinuous potentials and their Moreau–Yosida machinery.
//!
//! Only resolvents `J_ε` and Yosida gradients `∇φ_ε = (y − J_ε(y))/ε` are ever
//! materialized; subdifferentials stay implicit. Every potential is scalar
//! separable: for points in `ℝ^m` the scalar maps act coordinate by coordinate
//! and the envelope is the sum of the coordinate envelopes.

mod combined;
mod compat;
mod golden;
mod recenter;

use std::fmt;
use std::sync::Arc;

pub use combined::{combined_gradient, CombinedPotential};
pub use compat::{compatibility_check, CompatCondition, CompatibilityReport, CompatSample};
pub use recenter::{recenter, RecenterData};

use crate::error::{Error, Result};
use crate::process::rng::UniformStream;
use crate::scalar::Scalar;

/// Scalar evaluator of a custom potential; `+∞` outside the effective domain.
pub type Evaluator<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Tuning of the bracketed golden-section prox used for [`ConvexKind::Custom`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxSolverConfig {
    pub max_iter: usize,
    /// Relative bracket width at which the search stops.
    pub tol: f64,
}

impl Default for ProxSolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 400,
            tol: 1e-13,
        }
    }
}

/// User supplied potential with a numeric proximal map.
#[derive(Clone)]
pub struct CustomPotential<T> {
    pub evaluator: Evaluator<T>,
    pub prox: ProxSolverConfig,
    pub label: String,
}

impl<T> fmt::Debug for CustomPotential<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential")
            .field("label", &self.label)
            .field("prox", &self.prox)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum ConvexKind<T> {
    /// `φ ≡ 0`.
    Zero,
    /// Indicator of `[lo, hi]`; endpoints may be infinite.
    IndicatorInterval { lo: T, hi: T },
    /// `φ(y) = c·y²/2`.
    Quadratic { c: T },
    /// `φ(y) = |y|`.
    AbsValue,
    /// `φ(y) = base(y + shift) − slope·y`, produced by [`recenter`].
    Shifted {
        base: Box<ConvexKind<T>>,
        shift: T,
        slope: T,
    },
    Custom(CustomPotential<T>),
}

/// A convex potential on `ℝ^m`, applied coordinate-wise.
#[derive(Debug, Clone)]
pub struct ConvexSpec<T> {
    kind: ConvexKind<T>,
    dim: usize,
}

impl<T: Scalar> ConvexSpec<T> {
    pub fn zero() -> Self {
        Self {
            kind: ConvexKind::Zero,
            dim: 1,
        }
    }

    pub fn indicator(lo: T, hi: T) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidPotential(format!(
                "indicator interval [{lo}, {hi}] is empty"
            )));
        }
        if lo > T::zero() || hi < T::zero() {
            return Err(Error::InvalidPotential(format!(
                "indicator interval [{lo}, {hi}] must contain 0"
            )));
        }
        Ok(Self {
            kind: ConvexKind::IndicatorInterval { lo, hi },
            dim: 1,
        })
    }

    /// Indicator of `[lo, hi]` without the `0 ∈ [lo, hi]` normalization; meant as
    /// input to [`recenter`].
    pub fn indicator_any(lo: T, hi: T) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidPotential(format!(
                "indicator interval [{lo}, {hi}] is empty"
            )));
        }
        Ok(Self {
            kind: ConvexKind::IndicatorInterval { lo, hi },
            dim: 1,
        })
    }

    /// Indicator of the half line `(−∞, hi]`.
    pub fn indicator_below(hi: T) -> Result<Self> {
        Self::indicator(T::neg_infinity(), hi)
    }

    pub fn quadratic(c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidPotential(format!(
                "quadratic coefficient must be positive, got {c}"
            )));
        }
        Ok(Self {
            kind: ConvexKind::Quadratic { c },
            dim: 1,
        })
    }

    pub fn abs_value() -> Self {
        Self {
            kind: ConvexKind::AbsValue,
            dim: 1,
        }
    }

    /// Wraps a scalar evaluator. The evaluator is validated by sampling: it must
    /// vanish at 0, be nonnegative and pass a midpoint convexity test on 10³
    /// random segments.
    pub fn custom(label: impl Into<String>, evaluator: Evaluator<T>) -> Result<Self> {
        Self::custom_with(label, evaluator, ProxSolverConfig::default())
    }

    pub fn custom_with(
        label: impl Into<String>,
        evaluator: Evaluator<T>,
        prox: ProxSolverConfig,
    ) -> Result<Self> {
        let label = label.into();
        validate_custom(&label, &evaluator)?;
        Ok(Self {
            kind: ConvexKind::Custom(CustomPotential {
                evaluator,
                prox,
                label,
            }),
            dim: 1,
        })
    }

    pub(crate) fn from_kind(kind: ConvexKind<T>) -> Self {
        Self { kind, dim: 1 }
    }

    /// Same potential acting on `ℝ^dim`.
    pub fn with_dimension(mut self, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPotential("dimension must be positive".into()));
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn kind(&self) -> &ConvexKind<T> {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ConvexKind::Zero)
    }

    /// Structural equality; custom evaluators compare by pointer.
    pub fn same_as(&self, other: &Self) -> bool {
        self.dim == other.dim && kind_eq(&self.kind, &other.kind)
    }

    /// `φ(y)`, possibly `+∞`.
    pub fn value(&self, y: T) -> T {
        kind_value(&self.kind, y)
    }

    /// Effective domain `{φ < ∞}` as a closed interval (for custom kinds the
    /// whole line is reported).
    pub fn domain(&self) -> (T, T) {
        kind_domain(&self.kind)
    }

    /// Moreau–Yosida envelope `φ_ε(y) = inf_v |y−v|²/(2ε) + φ(v)`.
    pub fn envelope(&self, eps: T, y: T) -> Result<T> {
        check_eps(eps)?;
        check_finite(y)?;
        kind_envelope(&self.kind, eps, y)
    }

    /// Resolvent (proximal map) `J_ε(y)`.
    pub fn resolvent(&self, eps: T, y: T) -> Result<T> {
        check_eps(eps)?;
        check_finite(y)?;
        kind_resolvent(&self.kind, eps, y)
    }

    /// Yosida gradient `∇φ_ε(y) = (y − J_ε(y))/ε`.
    pub fn yosida_gradient(&self, eps: T, y: T) -> Result<T> {
        check_eps(eps)?;
        check_finite(y)?;
        Ok((y - kind_resolvent(&self.kind, eps, y)?) / eps)
    }

    pub fn value_vec(&self, y: &[T]) -> Result<T> {
        self.check_dim(y)?;
        Ok(y.iter().map(|&c| self.value(c)).sum())
    }

    pub fn envelope_vec(&self, eps: T, y: &[T]) -> Result<T> {
        self.check_dim(y)?;
        let mut acc = T::zero();
        for &c in y {
            acc += self.envelope(eps, c)?;
        }
        Ok(acc)
    }

    pub fn resolvent_vec(&self, eps: T, y: &[T]) -> Result<Vec<T>> {
        self.check_dim(y)?;
        y.iter().map(|&c| self.resolvent(eps, c)).collect()
    }

    pub fn yosida_gradient_vec(&self, eps: T, y: &[T]) -> Result<Vec<T>> {
        self.check_dim(y)?;
        y.iter().map(|&c| self.yosida_gradient(eps, c)).collect()
    }

    fn check_dim(&self, y: &[T]) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::InvalidPotential(format!(
                "point of dimension {} for a potential on R^{}",
                y.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// `envelope` as a free function.
pub fn envelope<T: Scalar>(phi: &ConvexSpec<T>, eps: T, y: T) -> Result<T> {
    phi.envelope(eps, y)
}

/// `resolvent` as a free function.
pub fn resolvent<T: Scalar>(phi: &ConvexSpec<T>, eps: T, y: T) -> Result<T> {
    phi.resolvent(eps, y)
}

/// `yosida_gradient` as a free function.
pub fn yosida_gradient<T: Scalar>(phi: &ConvexSpec<T>, eps: T, y: T) -> Result<T> {
    phi.yosida_gradient(eps, y)
}

fn check_eps<T: Scalar>(eps: T) -> Result<()> {
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(Error::DomainError(format!(
            "regularization parameter must be positive and finite, got {eps}"
        )));
    }
    Ok(())
}

fn check_finite<T: Scalar>(y: T) -> Result<()> {
    if !y.is_finite() {
        return Err(Error::NonFiniteInput(format!("{y}")));
    }
    Ok(())
}

fn kind_eq<T: Scalar>(a: &ConvexKind<T>, b: &ConvexKind<T>) -> bool {
    use ConvexKind::*;
    match (a, b) {
        (Zero, Zero) | (AbsValue, AbsValue) => true,
        (IndicatorInterval { lo: a0, hi: a1 }, IndicatorInterval { lo: b0, hi: b1 }) => {
            a0 == b0 && a1 == b1
        }
        (Quadratic { c: a }, Quadratic { c: b }) => a == b,
        (
            Shifted {
                base: ba,
                shift: sa,
                slope: la,
            },
            Shifted {
                base: bb,
                shift: sb,
                slope: lb,
            },
        ) => sa == sb && la == lb && kind_eq(ba, bb),
        (Custom(a), Custom(b)) => Arc::ptr_eq(&a.evaluator, &b.evaluator),
        _ => false,
    }
}

fn kind_value<T: Scalar>(kind: &ConvexKind<T>, y: T) -> T {
    match kind {
        ConvexKind::Zero => T::zero(),
        ConvexKind::IndicatorInterval { lo, hi } => {
            if y >= *lo && y <= *hi {
                T::zero()
            } else {
                T::infinity()
            }
        }
        ConvexKind::Quadratic { c } => *c * y * y / T::lit(2.0),
        ConvexKind::AbsValue => y.abs(),
        ConvexKind::Shifted { base, shift, slope } => {
            let v = kind_value(base, y + *shift);
            if v.is_infinite() {
                v
            } else {
                v - *slope * y
            }
        }
        ConvexKind::Custom(c) => (c.evaluator)(y),
    }
}

fn kind_domain<T: Scalar>(kind: &ConvexKind<T>) -> (T, T) {
    match kind {
        ConvexKind::IndicatorInterval { lo, hi } => (*lo, *hi),
        ConvexKind::Shifted { base, shift, .. } => {
            let (lo, hi) = kind_domain(base);
            (lo - *shift, hi - *shift)
        }
        _ => (T::neg_infinity(), T::infinity()),
    }
}

fn kind_resolvent<T: Scalar>(kind: &ConvexKind<T>, eps: T, y: T) -> Result<T> {
    Ok(match kind {
        ConvexKind::Zero => y,
        ConvexKind::IndicatorInterval { lo, hi } => {
            // lo = hi resolves to lo.
            if y <= *lo {
                *lo
            } else if y >= *hi {
                *hi
            } else {
                y
            }
        }
        ConvexKind::Quadratic { c } => y / (T::one() + eps * *c),
        ConvexKind::AbsValue => {
            let m = y.abs() - eps;
            if m > T::zero() {
                y.signum() * m
            } else {
                T::zero()
            }
        }
        ConvexKind::Shifted { base, shift, slope } => {
            kind_resolvent(base, eps, y + *shift + eps * *slope)? - *shift
        }
        ConvexKind::Custom(c) => golden::prox(c, eps, y)?,
    })
}

fn kind_envelope<T: Scalar>(kind: &ConvexKind<T>, eps: T, y: T) -> Result<T> {
    let two = T::lit(2.0);
    Ok(match kind {
        ConvexKind::Zero => T::zero(),
        ConvexKind::IndicatorInterval { .. } => {
            let d = y - kind_resolvent(kind, eps, y)?;
            d * d / (two * eps)
        }
        ConvexKind::Quadratic { c } => *c * y * y / (two * (T::one() + eps * *c)),
        ConvexKind::AbsValue => {
            let a = y.abs();
            if a <= eps {
                a * a / (two * eps)
            } else {
                a - eps / two
            }
        }
        ConvexKind::Shifted { .. } | ConvexKind::Custom(_) => {
            let j = kind_resolvent(kind, eps, y)?;
            let d = y - j;
            let v = kind_value(kind, j);
            if !v.is_finite() {
                return Err(Error::ProxFailure(format!(
                    "resolvent {j} of {y} left the effective domain"
                )));
            }
            d * d / (two * eps) + v
        }
    })
}

fn validate_custom<T: Scalar>(label: &str, f: &Evaluator<T>) -> Result<()> {
    let at0 = f(T::zero());
    if at0 != T::zero() {
        return Err(Error::InvalidPotential(format!(
            "custom potential '{label}' must vanish at 0, got {at0}"
        )));
    }
    let mut rng = UniformStream::new(0x5eed_c0f1, 0);
    let tol = T::lit(1e-9);
    for _ in 0..1000 {
        let a = T::lit(rng.range(-10.0, 10.0));
        let b = T::lit(rng.range(-10.0, 10.0));
        let fa = f(a);
        let fb = f(b);
        if fa < -tol || fb < -tol || fa.is_nan() || fb.is_nan() {
            return Err(Error::InvalidPotential(format!(
                "custom potential '{label}' is negative or NaN near {a} or {b}"
            )));
        }
        if !(fa.is_finite() && fb.is_finite()) {
            continue;
        }
        let mid = f((a + b) / T::lit(2.0));
        let chord = (fa + fb) / T::lit(2.0);
        if mid > chord + tol * (T::one() + chord.abs()) {
            return Err(Error::InvalidPotential(format!(
                "custom potential '{label}' fails midpoint convexity on [{a}, {b}]"
            )));
        }
    }
    Ok(())
}
