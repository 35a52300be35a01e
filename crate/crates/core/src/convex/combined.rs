use super::ConvexSpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `Ψ(t, y) = α_t φ(y) + (1 − α_t) ψ(y)`: `φ` acts against `dt`, `ψ` against `dA`.
#[derive(Debug, Clone)]
pub struct CombinedPotential<T> {
    pub phi: ConvexSpec<T>,
    pub psi: ConvexSpec<T>,
}

/// `w·v` with the convention `0·∞ = 0`.
fn weighted<T: Scalar>(w: T, v: T) -> T {
    if w == T::zero() {
        T::zero()
    } else {
        w * v
    }
}

impl<T: Scalar> CombinedPotential<T> {
    pub fn new(phi: ConvexSpec<T>, psi: ConvexSpec<T>) -> Self {
        Self { phi, psi }
    }

    pub fn zero() -> Self {
        Self::new(ConvexSpec::zero(), ConvexSpec::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.phi.is_zero() && self.psi.is_zero()
    }

    /// `Ψ(t, y)` for the density value `alpha = α_t`.
    pub fn value(&self, alpha: T, y: T) -> T {
        weighted(alpha, self.phi.value(y)) + weighted(T::one() - alpha, self.psi.value(y))
    }

    /// `Ψ^ε(t, y) = α φ_ε(y) + (1 − α) ψ_ε(y)`.
    pub fn envelope(&self, alpha: T, eps: T, y: T) -> Result<T> {
        Ok(alpha * self.phi.envelope(eps, y)? + (T::one() - alpha) * self.psi.envelope(eps, y)?)
    }

    /// `(∇φ_ε(y), ∇ψ_ε(y))`.
    pub fn gradient_parts(&self, eps: T, y: T) -> Result<(T, T)> {
        Ok((self.phi.yosida_gradient(eps, y)?, self.psi.yosida_gradient(eps, y)?))
    }

    /// `∇_yΨ^ε(t, y)`, zeroed when `a_trunc` is false (the increasing process
    /// has passed `1/ε`).
    pub fn combined_gradient(&self, alpha: T, eps: T, y: T, a_trunc: bool) -> Result<T> {
        if !(T::zero()..=T::one()).contains(&alpha) {
            return Err(Error::DomainError(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let (gp, gs) = self.gradient_parts(eps, y)?;
        if !a_trunc {
            return Ok(T::zero());
        }
        Ok(alpha * gp + (T::one() - alpha) * gs)
    }

    /// Solves `y + w_φ ∇φ_ε(y) + w_ψ ∇ψ_ε(y) = target` for `y`, where
    /// `w_φ = Δt` and `w_ψ = ΔA` (so `w_φ + w_ψ = ΔQ`).
    ///
    /// When a single resolvent is involved the solution is closed form:
    /// `(I + w∇φ_ε)⁻¹ x = ε/(ε+w)·x + w/(ε+w)·J_{ε+w}(x)`. Otherwise a
    /// bracketed bisection on the strictly increasing residual is used.
    pub fn penalty_step(&self, w_phi: T, w_psi: T, eps: T, target: T) -> Result<T> {
        if !target.is_finite() {
            return Err(Error::PenalizationSolveFailure(format!(
                "non-finite predictor {target}"
            )));
        }
        let phi_on = w_phi > T::zero() && !self.phi.is_zero();
        let psi_on = w_psi > T::zero() && !self.psi.is_zero();
        let single = match (phi_on, psi_on) {
            (false, false) => return Ok(target),
            (true, false) => Some((&self.phi, w_phi)),
            (false, true) => Some((&self.psi, w_psi)),
            (true, true) if self.phi.same_as(&self.psi) => Some((&self.phi, w_phi + w_psi)),
            _ => None,
        };
        match single {
            Some((pot, w)) => {
                let j = pot.resolvent(eps + w, target)?;
                if j == target {
                    // Fixed point of the resolvent: no force, keep the bits.
                    return Ok(target);
                }
                Ok((eps * target + w * j) / (eps + w))
            }
            None => self.penalty_step_bisect(w_phi, w_psi, eps, target),
        }
    }

    /// Bisection solve of the same equation as [`Self::penalty_step`].
    pub fn penalty_step_bisect(&self, w_phi: T, w_psi: T, eps: T, target: T) -> Result<T> {
        let residual = |y: T| -> Result<T> {
            let (gp, gs) = self.gradient_parts(eps, y)?;
            Ok(y + w_phi * gp + w_psi * gs - target)
        };
        let mut lo = target.min(T::zero()) - T::one();
        let mut hi = target.max(T::zero()) + T::one();
        let mut expand = 0;
        while residual(lo)? > T::zero() || residual(hi)? < T::zero() {
            let width = hi - lo;
            lo -= width;
            hi += width;
            expand += 1;
            if expand > 200 {
                return Err(Error::PenalizationSolveFailure(format!(
                    "could not bracket the penalty step for target {target}"
                )));
            }
        }
        for _ in 0..400 {
            let mid = lo + (hi - lo) / T::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            let r = residual(mid)?;
            if r.is_nan() {
                return Err(Error::PenalizationSolveFailure("NaN residual".into()));
            }
            if r > T::zero() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(lo + (hi - lo) / T::lit(2.0))
    }
}

/// `combined_gradient` as a free function.
pub fn combined_gradient<T: Scalar>(
    pot: &CombinedPotential<T>,
    alpha: T,
    eps: T,
    y: T,
    a_trunc: bool,
) -> Result<T> {
    pot.combined_gradient(alpha, eps, y, a_trunc)
}
