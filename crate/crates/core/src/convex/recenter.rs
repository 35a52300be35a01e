use super::{ConvexKind, ConvexSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A common point of the two subdifferential domains and one subgradient of
/// each potential there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecenterData<T> {
    pub u0: T,
    pub uhat1: T,
    pub uhat2: T,
}

/// Moves the origin to `u0`: `φ̂(y) = φ(y + u0) − ⟨û₁, y⟩`, and likewise for `ψ`,
/// so that `0 ∈ ∂φ̂(0) ∩ ∂ψ̂(0)`.
///
/// Subgradients are checked on 401 points of `u0 + [−20, 20]`.
pub fn recenter<T: Scalar>(
    phi: &ConvexSpec<T>,
    psi: &ConvexSpec<T>,
    data: RecenterData<T>,
) -> Result<(ConvexSpec<T>, ConvexSpec<T>)> {
    check_subgradient(phi, data.u0, data.uhat1, "phi")?;
    check_subgradient(psi, data.u0, data.uhat2, "psi")?;
    Ok((
        shift(phi, data.u0, data.uhat1),
        shift(psi, data.u0, data.uhat2),
    ))
}

fn check_subgradient<T: Scalar>(pot: &ConvexSpec<T>, u0: T, g: T, name: &str) -> Result<()> {
    let base = pot.value(u0);
    if !base.is_finite() {
        return Err(Error::NotASubgradient(format!(
            "{name}: u0 = {u0} is outside the effective domain"
        )));
    }
    let tol = T::lit(1e-9);
    for k in 0..=400 {
        let v = u0 + T::lit(-20.0 + 0.1 * k as f64);
        let lhs = base + g * (v - u0);
        let rhs = pot.value(v);
        if lhs > rhs + tol * (T::one() + rhs.abs()) {
            return Err(Error::NotASubgradient(format!(
                "{name}: {g} violates the subgradient inequality at v = {v}"
            )));
        }
    }
    Ok(())
}

fn shift<T: Scalar>(pot: &ConvexSpec<T>, u0: T, slope: T) -> ConvexSpec<T> {
    let dim = pot.dimension();
    let kind = match pot.kind() {
        _ if u0 == T::zero() && slope == T::zero() => pot.kind().clone(),
        ConvexKind::Zero if slope == T::zero() => ConvexKind::Zero,
        ConvexKind::IndicatorInterval { lo, hi } if slope == T::zero() => {
            ConvexKind::IndicatorInterval {
                lo: *lo - u0,
                hi: *hi - u0,
            }
        }
        ConvexKind::Shifted {
            base,
            shift: s,
            slope: l,
        } => ConvexKind::Shifted {
            base: base.clone(),
            shift: *s + u0,
            slope: *l + slope,
        },
        other => ConvexKind::Shifted {
            base: Box::new(other.clone()),
            shift: u0,
            slope,
        },
    };
    ConvexSpec::from_kind(kind)
        .with_dimension(dim)
        .expect("dimension already validated")
}
