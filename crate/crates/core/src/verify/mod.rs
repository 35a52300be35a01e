//! Numerical certificates for computed solutions: the variational inequality,
//! the Itô identity, the contraction mirror and the a-priori estimate.
//!
//! Every pathwise statement is checked on a [`PathView`]: all tree paths when
//! there are at most `max_paths` of them, otherwise a seeded sample; Monte
//! Carlo bundles use their own paths.

mod apriori;
mod battery;
mod contraction;
mod def1;
mod ito;

use std::collections::BTreeMap;

pub use apriori::{apriori_ratio, check_apriori, APRIORI_C_FIT};
pub use battery::{run_battery, BatteryOptions};
pub use contraction::{check_contraction, monotonicity_gap};
pub use def1::{check_def1, gamma, Def1Options, PotentialMode};
pub use ito::{check_ito_residual, Semimartingale};

use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::process::rng::UniformStream;
use crate::process::{Lattice, PathBundle};
use crate::scalar::Scalar;
use crate::solver::{smoothing_operator, CeBackend, SmoothingConfig, SolutionField};

/// Default cap on enumerated tree paths.
pub const DEFAULT_MAX_PATHS: usize = 4096;

/// Paths through the lattice: the state visited at every level and the
/// Brownian increment of every step.
#[derive(Debug, Clone)]
pub struct PathView<T> {
    pub states: Vec<Vec<usize>>,
    pub db: Vec<Vec<T>>,
    /// Whether path averages carry sampling noise.
    pub noisy: bool,
}

impl<T: Scalar> PathView<T> {
    pub fn new(bundle: &PathBundle<T>, max_paths: usize, seed: u64) -> Self {
        let n = bundle.n_steps();
        match bundle.lattice() {
            Lattice::Degenerate => Self {
                states: vec![vec![0; n + 1]],
                db: vec![vec![T::zero(); n]],
                noisy: false,
            },
            Lattice::Paths { db, .. } => {
                let p = bundle.n_states(0);
                Self {
                    states: (0..p).map(|k| vec![k; n + 1]).collect(),
                    db: (0..p).map(|k| (0..n).map(|i| db[i][k]).collect()).collect(),
                    noisy: true,
                }
            }
            Lattice::Tree { sqrt_dt } => {
                let enumerate = n < 63 && (1usize << n) <= max_paths;
                let count = if enumerate { 1usize << n } else { max_paths.max(1) };
                let mut states = Vec::with_capacity(count);
                let mut dbs = Vec::with_capacity(count);
                for k in 0..count {
                    let mut rng = UniformStream::new(seed, k as u64);
                    let mut s = 0usize;
                    let mut st = vec![0usize; n + 1];
                    let mut d = vec![T::zero(); n];
                    for i in 0..n {
                        let up = if enumerate { (k >> i) & 1 == 1 } else { rng.bit() };
                        if up {
                            s += 1;
                            d[i] = *sqrt_dt;
                        } else {
                            d[i] = -*sqrt_dt;
                        }
                        st[i + 1] = s;
                    }
                    states.push(st);
                    dbs.push(d);
                }
                Self {
                    states,
                    db: dbs,
                    noisy: !enumerate,
                }
            }
        }
    }

    pub fn n_paths(&self) -> usize {
        self.states.len()
    }

    /// Values of a level-indexed field along `path`.
    pub fn gather(&self, field: &[Vec<T>], path: usize) -> Vec<T> {
        field
            .iter()
            .enumerate()
            .map(|(i, level)| level[self.states[path][i]])
            .collect()
    }

    /// `c₁ max Δt + c₂/√P`, the noise term only when averages are sampled.
    pub fn tolerance(&self, bundle: &PathBundle<T>, c1: T, c2: T) -> T {
        let base = c1 * bundle.grid().max_dt();
        if self.noisy {
            base + c2 / T::from_usize_lossy(self.n_paths()).sqrt()
        } else {
            base
        }
    }
}

/// `M_t = γ − ∫ N dQ + ∫ R dB` realized along the paths of a view.
#[derive(Debug, Clone)]
pub struct TestProcess<T> {
    pub label: String,
    pub gamma: T,
    /// `[path][step]`.
    pub n: Vec<Vec<T>>,
    pub r: Vec<Vec<T>>,
    /// `[path][node]`, rebuilt by `M_{i+1} = M_i − N_i ΔQ_i + R_i ΔB_i`.
    pub m: Vec<Vec<T>>,
}

impl<T: Scalar> TestProcess<T> {
    /// Builds `M` from `γ`, `N` and `R` along every path of `view`.
    pub fn new(
        label: impl Into<String>,
        gamma: T,
        n: Vec<Vec<T>>,
        r: Vec<Vec<T>>,
        bundle: &PathBundle<T>,
        view: &PathView<T>,
    ) -> Result<Self> {
        let steps = bundle.n_steps();
        if n.len() != view.n_paths()
            || r.len() != view.n_paths()
            || n.iter().chain(&r).any(|row| row.len() != steps)
        {
            return Err(Error::GridMismatch("test process shape does not match the view".into()));
        }
        let m = (0..view.n_paths())
            .map(|p| {
                let mut out = Vec::with_capacity(steps + 1);
                let mut cur = gamma;
                out.push(cur);
                for i in 0..steps {
                    cur = cur - n[p][i] * bundle.dq(i) + r[p][i] * view.db[p][i];
                    out.push(cur);
                }
                out
            })
            .collect();
        Ok(Self {
            label: label.into(),
            gamma,
            n,
            r,
            m,
        })
    }

    pub fn zero(bundle: &PathBundle<T>, view: &PathView<T>) -> Self {
        let rows = vec![vec![T::zero(); bundle.n_steps()]; view.n_paths()];
        Self::new("zero", T::zero(), rows.clone(), rows, bundle, view).expect("shapes agree")
    }

    /// `N`, `R` given per lattice state, mapped onto the paths of `view`.
    pub fn from_node_fields(
        label: impl Into<String>,
        gamma: T,
        n_nodes: &[Vec<T>],
        r_nodes: &[Vec<T>],
        bundle: &PathBundle<T>,
        view: &PathView<T>,
    ) -> Result<Self> {
        let n = (0..view.n_paths()).map(|p| view.gather(n_nodes, p)).collect();
        let r = (0..view.n_paths()).map(|p| view.gather(r_nodes, p)).collect();
        Self::new(label, gamma, n, r, bundle, view)
    }

    /// The solution's own reconstruction: `γ = Y_0`, `N = H(t, Y, Z) − U`, `R = Z`.
    pub fn reconstruction(
        sol: &SolutionField<T>,
        gen: &GeneratorSpec<T>,
        bundle: &PathBundle<T>,
        view: &PathView<T>,
    ) -> Result<Self> {
        let mut n_nodes = Vec::with_capacity(sol.n_steps());
        for i in 0..sol.n_steps() {
            let (t, dt, da, dq) = (bundle.t(i), bundle.dt(i), bundle.da(i), bundle.dq(i));
            let row = sol.y[i]
                .iter()
                .zip(&sol.z[i])
                .zip(&sol.u[i])
                .map(|((&y, &z), &u)| (gen.f(t, y, z) * dt + gen.g(t, y) * da) / dq - u)
                .collect();
            n_nodes.push(row);
        }
        Self::from_node_fields("reconstruction", sol.y0(), &n_nodes, &sol.z, bundle, view)
    }

    /// Random deterministic `γ` and piecewise-constant `N`, `R` on `pieces` blocks,
    /// values uniform in `[−scale, scale]`. On the degenerate lattice `ΔB ≡ 0`
    /// carries no quadratic variation, so `R` is set to zero there.
    pub fn random_piecewise(
        bundle: &PathBundle<T>,
        view: &PathView<T>,
        pieces: usize,
        scale: T,
        seed: u64,
    ) -> Self {
        let steps = bundle.n_steps();
        let pieces = pieces.clamp(1, steps.max(1));
        let mut rng = UniformStream::new(seed, 0x7e57);
        let mut draw = || scale * T::lit(rng.range(-1.0, 1.0));
        let gamma = draw();
        let nv: Vec<T> = (0..pieces).map(|_| draw()).collect();
        let rv: Vec<T> = (0..pieces).map(|_| draw()).collect();
        let piece = |i: usize| (i * pieces / steps.max(1)).min(pieces - 1);
        let n_row: Vec<T> = (0..steps).map(|i| nv[piece(i)]).collect();
        let degenerate = matches!(bundle.lattice(), Lattice::Degenerate);
        let r_row: Vec<T> = (0..steps)
            .map(|i| if degenerate { T::zero() } else { rv[piece(i)] })
            .collect();
        Self::new(
            format!("random[{seed}]"),
            gamma,
            vec![n_row; view.n_paths()],
            vec![r_row; view.n_paths()],
            bundle,
            view,
        )
        .expect("shapes agree")
    }

    /// Exponential smoothing of `(Y^a + Y^b)/2` at level `eps`, with drift and
    /// diffusion read off the smoothed field.
    pub fn smoothed_midpoint(
        a: &SolutionField<T>,
        b: &SolutionField<T>,
        bundle: &PathBundle<T>,
        view: &PathView<T>,
        backend: CeBackend<T>,
        eps: T,
    ) -> Result<Self> {
        if a.y.len() != b.y.len() {
            return Err(Error::GridMismatch("solutions live on different grids".into()));
        }
        let mid: Vec<Vec<T>> = a
            .y
            .iter()
            .zip(&b.y)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(&x, &y)| (x + y) / T::lit(2.0)).collect())
            .collect();
        let sm = smoothing_operator(&mid, bundle, SmoothingConfig { eps }, backend)?;
        Self::from_node_fields(
            "smoothed-midpoint",
            sm.m[0][0],
            &sm.n_discrete,
            &sm.r,
            bundle,
            view,
        )
    }
}

/// Outcome of one check. `pass` holds iff `worst_violation ≤ tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub name: String,
    pub residuals: Vec<f64>,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub monitors: BTreeMap<String, f64>,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>, residuals: Vec<f64>, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residuals,
            worst_violation: worst,
            tolerance,
            pass: worst <= tolerance,
            monitors: BTreeMap::new(),
        }
    }

    pub fn with_monitor(mut self, key: &str, value: f64) -> Self {
        self.monitors.insert(key.to_string(), value);
        self
    }
}

/// `max_{i<j} (g_i − g_j)` in one right-to-left pass; `−∞` with fewer than two entries.
pub(crate) fn worst_drop<T: Scalar>(g: &[T]) -> T {
    let mut worst = T::neg_infinity();
    let mut min_right = T::infinity();
    for &v in g.iter().rev() {
        if min_right.is_finite() {
            worst = worst.max(v - min_right);
        }
        min_right = min_right.min(v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{build_paths, IncreasingProcessSpec, NoiseModel, TimeGrid};

    #[test]
    fn enumerated_view_is_exhaustive() {
        let grid = TimeGrid::uniform(1.0, 6).unwrap();
        let b = build_paths(&grid, NoiseModel::BinomialTree, IncreasingProcessSpec::Zero).unwrap();
        let v = PathView::new(&b, DEFAULT_MAX_PATHS, 0);
        assert_eq!(v.n_paths(), 64);
        assert!(!v.noisy);
        let mean_end: f64 = (0..64).map(|p| b.b_value(6, v.states[p][6])).sum::<f64>() / 64.0;
        assert!(mean_end.abs() < 1e-15);
        // Increments agree with the visited states.
        for p in 0..64 {
            let mut bsum = 0.0;
            for i in 0..6 {
                bsum += v.db[p][i];
                assert!((bsum - b.b_value(i + 1, v.states[p][i + 1])).abs() < 1e-14);
            }
        }
        let sampled = PathView::new(&b, 16, 3);
        assert!(sampled.noisy && sampled.n_paths() == 16);
    }

    #[test]
    fn reconstruction_identity() {
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let b = build_paths(&grid, NoiseModel::BinomialTree, IncreasingProcessSpec::Linear { rate: 0.5 })
            .unwrap();
        let v = PathView::new(&b, DEFAULT_MAX_PATHS, 0);
        let tp = TestProcess::random_piecewise(&b, &v, 3, 1.0, 9);
        for p in 0..v.n_paths() {
            for i in 0..5 {
                let step = tp.m[p][i] - tp.n[p][i] * b.dq(i) + tp.r[p][i] * v.db[p][i];
                assert_eq!(tp.m[p][i + 1], step);
            }
        }
    }

    #[test]
    fn worst_drop_examples() {
        assert_eq!(worst_drop(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(worst_drop(&[1.0, 2.0, 3.0]), -1.0);
        assert_eq!(worst_drop::<f64>(&[1.0]), f64::NEG_INFINITY);
    }
}
