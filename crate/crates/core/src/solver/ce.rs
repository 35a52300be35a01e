//! Conditional expectations `E_i[X]` and `E_i[X ΔB_i]` given level-`i` information.

use crate::error::{Error, Result};
use crate::process::{Lattice, PathBundle};
use crate::scalar::Scalar;

/// Numerical realization of the conditional expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CeBackend<T> {
    /// Exact averaging over the two children of a binomial node.
    ExactTree,
    /// Least-squares regression of the next-level values on `{1, B, …, B^degree}`
    /// (with `B` standardized) and ridge penalty `ridge` on the non-constant terms.
    LeastSquares { degree: usize, ridge: T },
}

impl<T: Scalar> CeBackend<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CeBackend::ExactTree => Ok(()),
            CeBackend::LeastSquares { degree, ridge } => {
                if degree == 0 {
                    return Err(Error::InvalidConfig("regression degree must be >= 1".into()));
                }
                if !(ridge >= T::zero()) {
                    return Err(Error::InvalidConfig(format!("ridge must be >= 0, got {ridge}")));
                }
                Ok(())
            }
        }
    }

    /// Checks that the backend can operate on the bundle's lattice. The
    /// degenerate lattice accepts either backend.
    pub fn check_bundle(&self, bundle: &PathBundle<T>) -> Result<()> {
        self.validate()?;
        match (self, bundle.lattice()) {
            (_, Lattice::Degenerate) => Ok(()),
            (CeBackend::ExactTree, Lattice::Tree { .. }) => Ok(()),
            (CeBackend::LeastSquares { .. }, Lattice::Paths { .. }) => Ok(()),
            (CeBackend::ExactTree, Lattice::Paths { .. }) => Err(Error::BackendMismatch(
                "ExactTree needs the binomial tree; Monte Carlo paths need LeastSquares".into(),
            )),
            (CeBackend::LeastSquares { .. }, Lattice::Tree { .. }) => Err(Error::BackendMismatch(
                "LeastSquares needs Monte Carlo paths; the binomial tree uses ExactTree".into(),
            )),
        }
    }
}

/// Conditional expectation operator bound to a bundle.
#[derive(Debug, Clone, Copy)]
pub struct CondExp<'a, T> {
    bundle: &'a PathBundle<T>,
    backend: CeBackend<T>,
}

impl<'a, T: Scalar> CondExp<'a, T> {
    pub fn new(bundle: &'a PathBundle<T>, backend: CeBackend<T>) -> Result<Self> {
        backend.check_bundle(bundle)?;
        Ok(Self { bundle, backend })
    }

    /// `E_i[X]` for `X` given on the states of level `i + 1`.
    pub fn expect(&self, i: usize, next: &[T]) -> Vec<T> {
        match self.bundle.lattice() {
            Lattice::Tree { .. } => (0..=i)
                .map(|j| (next[j + 1] + next[j]) / T::lit(2.0))
                .collect(),
            Lattice::Degenerate => vec![next[0]],
            Lattice::Paths { b, .. } => self.regress(&b[i], next),
        }
    }

    /// `E_i[X ΔB_i]` for `X` given on the states of level `i + 1`.
    pub fn expect_db(&self, i: usize, next: &[T]) -> Vec<T> {
        match self.bundle.lattice() {
            Lattice::Tree { sqrt_dt } => (0..=i)
                .map(|j| (next[j + 1] - next[j]) * *sqrt_dt / T::lit(2.0))
                .collect(),
            Lattice::Degenerate => vec![T::zero()],
            Lattice::Paths { b, db } => {
                let prod: Vec<T> = next.iter().zip(&db[i]).map(|(&x, &d)| x * d).collect();
                self.regress(&b[i], &prod)
            }
        }
    }

    fn regress(&self, x: &[T], y: &[T]) -> Vec<T> {
        let (degree, ridge) = match self.backend {
            CeBackend::LeastSquares { degree, ridge } => (degree, ridge),
            CeBackend::ExactTree => (1, T::zero()),
        };
        regression_fit(x, y, degree, ridge)
    }
}

/// Fitted values of the ridge least-squares regression of `y` on
/// `{1, x̃, …, x̃^degree}` with `x̃` the standardized regressor. Falls back to
/// the sample mean when `x` is (numerically) constant and lowers the degree
/// when the normal equations are singular.
pub fn regression_fit<T: Scalar>(x: &[T], y: &[T], degree: usize, ridge: T) -> Vec<T> {
    let n = x.len();
    let nf = T::from_usize_lossy(n);
    let mean_y = y.iter().copied().sum::<T>() / nf;
    let mean_x = x.iter().copied().sum::<T>() / nf;
    let var_x = x.iter().map(|&v| (v - mean_x) * (v - mean_x)).sum::<T>() / nf;
    let sd = var_x.sqrt();
    if !(sd > T::lit(1e-12)) || n < 2 {
        return vec![mean_y; n];
    }
    let xs: Vec<T> = x.iter().map(|&v| (v - mean_x) / sd).collect();
    let mut d = degree.min(n - 1);
    while d >= 1 {
        if let Some(beta) = solve_normal_equations(&xs, y, d, ridge) {
            return xs
                .iter()
                .map(|&v| {
                    let mut acc = T::zero();
                    let mut pow = T::one();
                    for &c in &beta {
                        acc += c * pow;
                        pow *= v;
                    }
                    acc
                })
                .collect();
        }
        d -= 1;
    }
    vec![mean_y; n]
}

fn solve_normal_equations<T: Scalar>(xs: &[T], y: &[T], d: usize, ridge: T) -> Option<Vec<T>> {
    let k = d + 1;
    let nf = T::from_usize_lossy(xs.len());
    // Moments Σ x^m for m ≤ 2d and Σ x^m y for m ≤ d, scaled by 1/n.
    let mut mom = vec![T::zero(); 2 * d + 1];
    let mut rhs = vec![T::zero(); k];
    for (&v, &w) in xs.iter().zip(y) {
        let mut pow = T::one();
        for (m, slot) in mom.iter_mut().enumerate() {
            *slot += pow;
            if m < k {
                rhs[m] += pow * w;
            }
            pow *= v;
        }
    }
    let mut a: Vec<Vec<T>> = (0..k)
        .map(|r| (0..k).map(|c| mom[r + c] / nf).collect())
        .collect();
    let mut b: Vec<T> = rhs.iter().map(|&v| v / nf).collect();
    for (r, row) in a.iter_mut().enumerate().skip(1) {
        row[r] += ridge;
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(a[piv][col].abs() > T::lit(1e-12)) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..k {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut beta = vec![T::zero(); k];
    for r in (0..k).rev() {
        let mut s = b[r];
        for c in r + 1..k {
            s -= a[r][c] * beta[c];
        }
        beta[r] = s / a[r][r];
    }
    beta.iter().all(|v| v.is_finite()).then_some(beta)
}
