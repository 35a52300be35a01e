//! Bracketed golden-section proximal map for scalar custom potentials.

use super::CustomPotential;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimizes `v ↦ |y−v|²/(2ε) + φ(v)` on `[y − B, y + B]` with
/// `B = |y| + 10·ε·(1 + |φ'(y)|)` where `φ'` is a central difference.
///
/// Since `0 ∈ argmin φ`, the minimizer lies between `0` and `y`, which the
/// bracket always contains.
pub(crate) fn prox<T: Scalar>(c: &CustomPotential<T>, eps: T, y: T) -> Result<T> {
    let phi = &c.evaluator;
    let h = T::lit(1e-6) * (T::one() + y.abs());
    let slope = (phi(y + h) - phi(y - h)) / (h + h);
    let slope = if slope.is_finite() { slope.abs() } else { T::zero() };
    let radius = y.abs() + T::lit(10.0) * eps * (T::one() + slope);

    let objective = |v: T| {
        let d = y - v;
        d * d / (eps + eps) + phi(v)
    };

    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut lo = y - radius;
    let mut hi = y + radius;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    let tol = T::lit(c.prox.tol) * (T::one() + y.abs());

    let mut converged = false;
    for _ in 0..c.prox.max_iter {
        if hi - lo <= tol {
            converged = true;
            break;
        }
        // With both probes outside the domain, move toward 0, which lies in it.
        let go_left = if f1.is_infinite() && f2.is_infinite() {
            T::zero() < x1
        } else {
            f1 <= f2
        };
        if go_left {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2);
        }
    }
    if !converged {
        return Err(Error::ProxFailure(format!(
            "golden section for '{}' at y={y} did not reach tolerance in {} iterations",
            c.label, c.prox.max_iter
        )));
    }
    let v = (lo + hi) / T::lit(2.0);
    let best = [(objective(v), v), (f1, x1), (f2, x2)]
        .into_iter()
        .fold((T::infinity(), v), |acc, cur| if cur.0 < acc.0 { cur } else { acc });
    if !best.0.is_finite() {
        return Err(Error::ProxFailure(format!(
            "no finite value of '{}' found near y={y}",
            c.label
        )));
    }
    Ok(best.1)
}
