//! Discrete scenarios: time grids, Brownian drivers, the increasing process `A`,
//! the clock `Q = t + A`, the density `α = dt/dQ` and the weights `V`, `V⁺`.

pub mod rng;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `0 = t_0 < t_1 < … < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T> {
    nodes: Vec<T>,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn uniform(horizon: T, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidGrid("at least one step is required".into()));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        let n = T::from_usize_lossy(steps);
        let mut nodes: Vec<T> = (0..=steps)
            .map(|i| horizon * T::from_usize_lossy(i) / n)
            .collect();
        nodes[steps] = horizon;
        Ok(Self { nodes })
    }

    pub fn from_nodes(nodes: Vec<T>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid("at least one step is required".into()));
        }
        if nodes[0] != T::zero() {
            return Err(Error::InvalidGrid("grid must start at 0".into()));
        }
        for i in 0..nodes.len() - 1 {
            let dt = nodes[i + 1] - nodes[i];
            if dt == T::zero() {
                return Err(Error::ZeroStep(i));
            }
            if !(dt > T::zero()) {
                return Err(Error::InvalidGrid(format!("nodes decrease at index {i}")));
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> T {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn t(&self, i: usize) -> T {
        self.nodes[i]
    }

    pub fn dt(&self, i: usize) -> T {
        self.nodes[i + 1] - self.nodes[i]
    }

    pub fn max_dt(&self) -> T {
        (0..self.n_steps())
            .map(|i| self.dt(i))
            .fold(T::zero(), T::max)
    }

    pub fn is_uniform(&self) -> bool {
        let h = self.horizon() / T::from_usize_lossy(self.n_steps());
        (0..self.n_steps()).all(|i| (self.dt(i) - h).abs() <= T::lit(1e-9) * h)
    }
}

/// Source of Brownian increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// Recombining binomial lattice with increments `±√Δt`, equal probability.
    BinomialTree,
    /// `paths` i.i.d. Gaussian paths drawn from the counter-based stream `seed`.
    GaussianMc { paths: usize, seed: u64 },
    /// `ΔB ≡ 0`; turns the backward equation into a backward ODE.
    Deterministic,
}

/// Deterministic continuous nondecreasing `A` with `A_0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IncreasingProcessSpec<T> {
    Zero,
    /// `A_t = rate · t`.
    Linear { rate: T },
    /// `A_t = rate · (t − start)⁺`.
    Ramp { start: T, rate: T },
}

impl<T: Scalar> IncreasingProcessSpec<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Zero => Ok(()),
            Self::Linear { rate } | Self::Ramp { rate, .. } if !(rate >= T::zero()) => Err(
                Error::InvalidConfig(format!("increasing process rate must be >= 0, got {rate}")),
            ),
            Self::Ramp { start, .. } if !(start >= T::zero()) => Err(Error::InvalidConfig(
                format!("ramp start must be >= 0, got {start}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: T) -> T {
        match *self {
            Self::Zero => T::zero(),
            Self::Linear { rate } => rate * t,
            Self::Ramp { start, rate } => rate * (t - start).pos(),
        }
    }
}

/// Realized Brownian driver.
#[derive(Debug, Clone)]
pub enum Lattice<T> {
    /// State `j` at level `i` carries `B = (2j − i)·√Δt`; it moves to `j+1`
    /// (`ΔB = +√Δt`) or stays at `j` (`ΔB = −√Δt`) with probability ½ each.
    Tree { sqrt_dt: T },
    /// Monte Carlo paths, indexed `[node][path]` and `[step][path]`.
    Paths { b: Vec<Vec<T>>, db: Vec<Vec<T>> },
    /// A single state with `ΔB ≡ 0`.
    Degenerate,
}

/// A realized discrete scenario. `A` is deterministic, so `A`, `Q`, `α`, `V`
/// and `V⁺` are shared by all states of a level.
#[derive(Debug, Clone)]
pub struct PathBundle<T> {
    grid: TimeGrid<T>,
    noise: NoiseModel,
    a_spec: IncreasingProcessSpec<T>,
    lattice: Lattice<T>,
    a: Vec<T>,
    q: Vec<T>,
    alpha: Vec<T>,
    v: Vec<T>,
    vplus: Vec<T>,
}

/// Builds the scenario for `grid`, `noise` and `a_spec`.
pub fn build_paths<T: Scalar>(
    grid: &TimeGrid<T>,
    noise: NoiseModel,
    a_spec: IncreasingProcessSpec<T>,
) -> Result<PathBundle<T>> {
    PathBundle::build(grid, noise, a_spec)
}

impl<T: Scalar> PathBundle<T> {
    pub fn build(
        grid: &TimeGrid<T>,
        noise: NoiseModel,
        a_spec: IncreasingProcessSpec<T>,
    ) -> Result<Self> {
        let grid = TimeGrid::from_nodes(grid.nodes().to_vec())?;
        a_spec.validate()?;
        let n = grid.n_steps();
        let a: Vec<T> = grid.nodes().iter().map(|&t| a_spec.eval(t)).collect();
        let q: Vec<T> = grid.nodes().iter().zip(&a).map(|(&t, &a)| t + a).collect();
        let mut alpha = Vec::with_capacity(n);
        for i in 0..n {
            let dq = q[i + 1] - q[i];
            if !(dq > T::zero()) {
                return Err(Error::ZeroStep(i));
            }
            alpha.push(grid.dt(i) / dq);
        }
        let lattice = match noise {
            NoiseModel::BinomialTree => {
                if !grid.is_uniform() {
                    return Err(Error::InvalidGrid(
                        "the recombining binomial tree needs a uniform grid".into(),
                    ));
                }
                Lattice::Tree {
                    sqrt_dt: grid.dt(0).sqrt(),
                }
            }
            NoiseModel::Deterministic => Lattice::Degenerate,
            NoiseModel::GaussianMc { paths, seed } => {
                if paths == 0 {
                    return Err(Error::InvalidConfig("GaussianMc needs at least one path".into()));
                }
                gaussian_paths(&grid, paths, seed)
            }
        };
        Ok(Self {
            v: vec![T::zero(); n + 1],
            vplus: vec![T::zero(); n + 1],
            grid,
            noise,
            a_spec,
            lattice,
            a,
            q,
            alpha,
        })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn a_spec(&self) -> IncreasingProcessSpec<T> {
        self.a_spec
    }

    pub fn lattice(&self) -> &Lattice<T> {
        &self.lattice
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn t(&self, i: usize) -> T {
        self.grid.t(i)
    }

    pub fn dt(&self, i: usize) -> T {
        self.grid.dt(i)
    }

    pub fn a(&self, i: usize) -> T {
        self.a[i]
    }

    pub fn da(&self, i: usize) -> T {
        self.a[i + 1] - self.a[i]
    }

    pub fn q(&self, i: usize) -> T {
        self.q[i]
    }

    pub fn dq(&self, i: usize) -> T {
        self.q[i + 1] - self.q[i]
    }

    /// Step-averaged density `Δt_i / ΔQ_i`.
    pub fn alpha(&self, i: usize) -> T {
        self.alpha[i]
    }

    pub fn v(&self, i: usize) -> T {
        self.v[i]
    }

    pub fn vplus(&self, i: usize) -> T {
        self.vplus[i]
    }

    pub fn a_values(&self) -> &[T] {
        &self.a
    }

    pub fn q_values(&self) -> &[T] {
        &self.q
    }

    pub fn alphas(&self) -> &[T] {
        &self.alpha
    }

    pub fn v_values(&self) -> &[T] {
        &self.v
    }

    pub fn vplus_values(&self) -> &[T] {
        &self.vplus
    }

    /// `Q` at an arbitrary time, using the analytic `A`.
    pub fn clock_at(&self, t: T) -> T {
        t + self.a_spec.eval(t)
    }

    /// Number of lattice states at level `i`.
    pub fn n_states(&self, i: usize) -> usize {
        match &self.lattice {
            Lattice::Tree { .. } => i + 1,
            Lattice::Paths { b, .. } => b[0].len(),
            Lattice::Degenerate => 1,
        }
    }

    /// Brownian value of state `s` at level `i`.
    pub fn b_value(&self, i: usize, s: usize) -> T {
        match &self.lattice {
            Lattice::Tree { sqrt_dt } => {
                T::from_usize_lossy(2 * s) * *sqrt_dt - T::from_usize_lossy(i) * *sqrt_dt
            }
            Lattice::Paths { b, .. } => b[i][s],
            Lattice::Degenerate => T::zero(),
        }
    }

    /// Probability of each state at level `i`.
    pub fn state_weights(&self, i: usize) -> Vec<T> {
        match &self.lattice {
            Lattice::Tree { .. } => {
                // Binomial(i, 1/2) in log space.
                let mut out = Vec::with_capacity(i + 1);
                let mut logw = -(i as f64) * std::f64::consts::LN_2;
                for s in 0..=i {
                    out.push(T::lit(logw.exp()));
                    if s < i {
                        logw += ((i - s) as f64).ln() - ((s + 1) as f64).ln();
                    }
                }
                out
            }
            Lattice::Paths { b, .. } => {
                let p = b[0].len();
                vec![T::one() / T::from_usize_lossy(p); p]
            }
            Lattice::Degenerate => vec![T::one()],
        }
    }

    /// Brownian value at every state of level `i`.
    pub fn b_level(&self, i: usize) -> Vec<T> {
        (0..self.n_states(i)).map(|s| self.b_value(i, s)).collect()
    }

    /// Whether the conditional expectations and path averages are sample based.
    pub fn is_monte_carlo(&self) -> bool {
        matches!(self.lattice, Lattice::Paths { .. })
    }

    /// Fills `V_i = (μ + ℓ²/(2 n_p λ))·t_i + ν·A_i` and its positive-part
    /// counterpart `V⁺`.
    pub fn accumulate_v(mut self, mu: T, nu: T, ell: T, p: T, lambda: T) -> Result<Self> {
        for (name, c) in [("mu", mu), ("nu", nu), ("ell", ell)] {
            if !c.is_finite() {
                return Err(Error::DomainError(format!("{name} must be finite")));
            }
        }
        if ell < T::zero() {
            return Err(Error::DomainError(format!("ell must be >= 0, got {ell}")));
        }
        if !(lambda > T::zero() && lambda < T::one()) {
            return Err(Error::DomainError(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        let rate = mu + ell * ell / (T::lit(2.0) * np_of(p)? * lambda);
        for i in 0..=self.n_steps() {
            let (t, a) = (self.t(i), self.a[i]);
            self.v[i] = rate * t + nu * a;
            self.vplus[i] = rate.pos() * t + nu.pos() * a;
        }
        Ok(self)
    }

    /// `max_i exp(p·V_i)` and `exp(p·V⁺_N)`; the former never exceeds the latter.
    pub fn exp_moment_bound(&self, p: T) -> (T, T) {
        let max_v = self.v.iter().map(|&v| (p * v).exp()).fold(T::zero(), T::max);
        (max_v, (p * self.vplus[self.n_steps()]).exp())
    }
}

fn gaussian_paths<T: Scalar>(grid: &TimeGrid<T>, paths: usize, seed: u64) -> Lattice<T> {
    let n = grid.n_steps();
    let sqrt_dt: Vec<f64> = (0..n).map(|i| grid.dt(i).to_f64_lossy().sqrt()).collect();
    let per_path: Vec<Vec<T>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut s = rng::UniformStream::new(seed, p as u64);
            sqrt_dt.iter().map(|h| T::lit(h * s.normal())).collect()
        })
        .collect();
    let mut db = vec![vec![T::zero(); paths]; n];
    let mut b = vec![vec![T::zero(); paths]; n + 1];
    for (p, incs) in per_path.iter().enumerate() {
        for i in 0..n {
            db[i][p] = incs[i];
            b[i + 1][p] = b[i][p] + incs[i];
        }
    }
    Lattice::Paths { b, db }
}

/// `n_p = min(1, p − 1)`.
pub fn np_of<T: Scalar>(p: T) -> Result<T> {
    if !(p > T::one()) {
        return Err(Error::DomainError(format!("p must exceed 1, got {p}")));
    }
    Ok((p - T::one()).min(T::one()))
}

/// `δ_q = δ` if `1 ≤ q < 2`, else `0`.
pub fn delta_q<T: Scalar>(delta: T, q: T) -> Result<T> {
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(Error::DomainError(format!("delta must lie in (0, 1], got {delta}")));
    }
    Ok(if q >= T::one() && q < T::lit(2.0) {
        delta
    } else {
        T::zero()
    })
}
