//! Backward penalization scheme, the ε-continuation driver and the
//! exponential smoothing operator.
//!
//! One step of the scheme, from level `i + 1` to level `i`:
//!
//! ```text
//! Z_i = E_i[Y_{i+1} ΔB_i] / Δt_i
//! ŷ   = E_i[Y_{i+1}] + (F(t_i, y⁰, Z_i) Δt_i + G(t_i, y⁰) ΔA_i) · 1[A_i ≤ 1/ε]
//! Y_i + (Δt_i ∇φ_ε(Y_i) + ΔA_i ∇ψ_ε(Y_i)) · 1[A_i ≤ 1/ε] = ŷ
//! ```
//!
//! with `y⁰ = E_i[Y_{i+1}]`. `F Δt + G ΔA` equals `H ΔQ` without forming `α`.

mod ce;
mod smoothing;

use std::sync::Arc;

use rayon::prelude::*;

pub use ce::{regression_fit, CeBackend, CondExp};
pub use smoothing::{smoothing_operator, SmoothedProcess, SmoothingConfig};

use crate::convex::CombinedPotential;
use crate::error::{Error, Result};
use crate::generator::{GeneratorSpec, MollifierConfig};
use crate::process::PathBundle;
use crate::scalar::Scalar;

/// Terminal value `η = g(B_T, A_T)`.
pub type TerminalFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenalizationMode {
    /// Resolvent-type implicit solve of the penalty term.
    SemiImplicit,
    /// Penalty force evaluated at the predictor; stiff when `ΔQ/ε > 1`.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub p: T,
    pub lambda: T,
    pub eps_schedule: Vec<T>,
    pub mode: PenalizationMode,
    pub backend: CeBackend<T>,
    pub mollify_generators: bool,
    pub mollifier_nodes: usize,
    /// Number of predictor sweeps; `1` evaluates the generator at `E_i[Y_{i+1}]`.
    pub sweeps: usize,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(eps_schedule: Vec<T>, backend: CeBackend<T>) -> Self {
        Self {
            p: T::lit(2.0),
            lambda: T::lit(0.5),
            eps_schedule,
            mode: PenalizationMode::SemiImplicit,
            backend,
            mollify_generators: false,
            mollifier_nodes: crate::generator::mollifier::DEFAULT_NODES,
            sweeps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > T::one()) {
            return Err(Error::InvalidConfig(format!("p must exceed 1, got {}", self.p)));
        }
        if !(self.lambda > T::zero() && self.lambda < T::one()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if self.eps_schedule.is_empty() {
            return Err(Error::InvalidConfig("eps schedule is empty".into()));
        }
        for (k, &e) in self.eps_schedule.iter().enumerate() {
            if !(e > T::zero()) || !e.is_finite() {
                return Err(Error::InvalidConfig(format!("eps[{k}] = {e} must be positive")));
            }
            if k > 0 && !(e < self.eps_schedule[k - 1]) {
                return Err(Error::InvalidConfig(
                    "eps schedule must be strictly decreasing".into(),
                ));
            }
            if self.mollify_generators && e > T::one() {
                return Err(Error::InvalidConfig(format!(
                    "mollification needs eps <= 1, got {e}"
                )));
            }
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidConfig("at least one predictor sweep is required".into()));
        }
        self.backend.validate()
    }
}

/// A fully specified discrete problem.
#[derive(Clone)]
pub struct Scenario<T> {
    pub bundle: PathBundle<T>,
    pub generator: GeneratorSpec<T>,
    pub potential: CombinedPotential<T>,
    pub terminal: TerminalFn<T>,
}

impl<T: Scalar> Scenario<T> {
    /// Checks that `φ(η)` and `ψ(η)` are finite at every realized terminal state.
    pub fn new(
        bundle: PathBundle<T>,
        generator: GeneratorSpec<T>,
        potential: CombinedPotential<T>,
        terminal: TerminalFn<T>,
    ) -> Result<Self> {
        let s = Self {
            bundle,
            generator,
            potential,
            terminal,
        };
        for (k, eta) in s.terminal_values().into_iter().enumerate() {
            if !eta.is_finite() {
                return Err(Error::DomainError(format!("terminal value {k} is {eta}")));
            }
            if !s.potential.phi.value(eta).is_finite() || !s.potential.psi.value(eta).is_finite() {
                return Err(Error::DomainError(format!(
                    "terminal value {eta} lies outside the domain of the potentials"
                )));
            }
        }
        Ok(s)
    }

    /// `η` on every state of the last level.
    pub fn terminal_values(&self) -> Vec<T> {
        let n = self.bundle.n_steps();
        let a = self.bundle.a(n);
        (0..self.bundle.n_states(n))
            .map(|s| (self.terminal)(self.bundle.b_value(n, s), a))
            .collect()
    }

    /// The generator the scheme actually uses at penalty level `eps`.
    pub fn effective_generator(&self, cfg: &SolverConfig<T>, eps: T) -> Result<GeneratorSpec<T>> {
        if cfg.mollify_generators {
            let m = MollifierConfig::new(eps, cfg.mollifier_nodes)?;
            Ok(self.generator.mollified(&m))
        } else {
            Ok(self.generator.clone())
        }
    }
}

/// Output of one penalized solve. Level-indexed fields are `[level][state]`;
/// `y` has `N + 1` levels, the per-step fields have `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField<T> {
    pub eps: T,
    pub y: Vec<Vec<T>>,
    pub z: Vec<Vec<T>>,
    /// Penalty force per unit `dQ`, `α∇φ_ε + (1 − α)∇ψ_ε` (truncated).
    pub u: Vec<Vec<T>>,
    /// `∇φ_ε` part of the force (per unit `dt`).
    pub u_phi: Vec<Vec<T>>,
    /// `∇ψ_ε` part of the force (per unit `dA`).
    pub u_psi: Vec<Vec<T>>,
    /// `U_i ΔQ_i`.
    pub kinc: Vec<Vec<T>>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> SolutionField<T> {
    pub fn n_steps(&self) -> usize {
        self.z.len()
    }

    /// `Y_0` (the first state of level 0).
    pub fn y0(&self) -> T {
        self.y[0][0]
    }

    /// Total variation `Σ |Kinc|` over all steps and states.
    pub fn k_total_variation(&self) -> T {
        self.kinc.iter().flatten().map(|k| k.abs()).sum()
    }
}

struct StepOut<T> {
    y: T,
    z: T,
    u: T,
    u_phi: T,
    u_psi: T,
}

/// Solves the penalized backward equation at level `eps`.
pub fn solve_penalized<T: Scalar>(
    scenario: &Scenario<T>,
    cfg: &SolverConfig<T>,
    eps: T,
) -> Result<SolutionField<T>> {
    cfg.validate()?;
    if !(eps > T::zero()) {
        return Err(Error::DomainError(format!("eps must be positive, got {eps}")));
    }
    let bundle = &scenario.bundle;
    let ce = CondExp::new(bundle, cfg.backend)?;
    let gen = scenario.effective_generator(cfg, eps)?;
    let pot = &scenario.potential;
    let n = bundle.n_steps();

    let mut y = vec![Vec::new(); n + 1];
    let mut z = vec![Vec::new(); n];
    let mut u = vec![Vec::new(); n];
    let mut u_phi = vec![Vec::new(); n];
    let mut u_psi = vec![Vec::new(); n];
    let mut kinc = vec![Vec::new(); n];
    let mut warnings = Vec::new();
    y[n] = scenario.terminal_values();

    for i in (0..n).rev() {
        let (t, dt, da, dq) = (bundle.t(i), bundle.dt(i), bundle.da(i), bundle.dq(i));
        let trunc = bundle.a(i) <= T::one() / eps;
        if cfg.mode == PenalizationMode::Explicit && trunc && dq / eps > T::one() {
            warnings.push(format!(
                "stiffness: step {i} has dQ/eps = {} > 1 in explicit mode",
                (dq / eps).to_f64_lossy()
            ));
        }
        let cy = ce.expect(i, &y[i + 1]);
        let cz: Vec<T> = ce.expect_db(i, &y[i + 1]).into_iter().map(|v| v / dt).collect();
        let step = |s: usize| -> Result<StepOut<T>> {
            let (c, zi) = (cy[s], cz[s]);
            let mut at = c;
            let mut out = None;
            for _ in 0..cfg.sweeps {
                let drive = if trunc {
                    let fv = gen.f(t, at, zi);
                    let gv = gen.g(t, at);
                    if !fv.is_finite() || !gv.is_finite() {
                        return Err(Error::NonFiniteGenerator {
                            t: t.to_f64_lossy(),
                            y: at.to_f64_lossy(),
                            z: zi.to_f64_lossy(),
                        });
                    }
                    fv * dt + gv * da
                } else {
                    T::zero()
                };
                let pred = c + drive;
                let o = penalize(pot, cfg.mode, trunc, eps, dt, da, dq, pred)?;
                at = o.y;
                out = Some(StepOut { z: zi, ..o });
            }
            Ok(out.expect("at least one sweep"))
        };
        let states = bundle.n_states(i);
        let outs: Vec<StepOut<T>> = if states >= 256 {
            (0..states).into_par_iter().map(step).collect::<Result<_>>()?
        } else {
            (0..states).map(step).collect::<Result<_>>()?
        };
        y[i] = outs.iter().map(|o| o.y).collect();
        z[i] = outs.iter().map(|o| o.z).collect();
        u[i] = outs.iter().map(|o| o.u).collect();
        u_phi[i] = outs.iter().map(|o| o.u_phi).collect();
        u_psi[i] = outs.iter().map(|o| o.u_psi).collect();
        kinc[i] = outs.iter().map(|o| o.u * dq).collect();
    }
    Ok(SolutionField {
        eps,
        y,
        z,
        u,
        u_phi,
        u_psi,
        kinc,
        warnings,
    })
}

#[allow(clippy::too_many_arguments)]
fn penalize<T: Scalar>(
    pot: &CombinedPotential<T>,
    mode: PenalizationMode,
    trunc: bool,
    eps: T,
    dt: T,
    da: T,
    dq: T,
    pred: T,
) -> Result<StepOut<T>> {
    if !trunc {
        return Ok(StepOut {
            y: pred,
            z: T::zero(),
            u: T::zero(),
            u_phi: T::zero(),
            u_psi: T::zero(),
        });
    }
    match mode {
        PenalizationMode::SemiImplicit => {
            // U is read off the gradients at the solution; it equals
            // (ŷ − Y)/ΔQ up to the rounding of the scalar solve.
            let y = pot.penalty_step(dt, da, eps, pred)?;
            let (gp, gs) = pot.gradient_parts(eps, y)?;
            Ok(StepOut {
                y,
                z: T::zero(),
                u: (dt * gp + da * gs) / dq,
                u_phi: gp,
                u_psi: gs,
            })
        }
        PenalizationMode::Explicit => {
            let (gp, gs) = pot.gradient_parts(eps, pred)?;
            let push = dt * gp + da * gs;
            Ok(StepOut {
                y: pred - push,
                z: T::zero(),
                u: push / dq,
                u_phi: gp,
                u_psi: gs,
            })
        }
    }
}

/// Distance between two consecutive solutions of the schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEntry<T> {
    pub eps_a: T,
    pub eps_b: T,
    /// `max_{i,s} |Y^a − Y^b|`.
    pub y_sup: T,
    /// `(Σ_i E|Z^a_i − Z^b_i|² Δt_i)^{1/2}`.
    pub z_l2: T,
}

#[derive(Debug, Clone)]
pub struct SequenceReport<T> {
    pub solutions: Vec<SolutionField<T>>,
    pub gaps: Vec<GapEntry<T>>,
    /// `ε Σ_i E[U_i²] ΔQ_i` per schedule entry.
    pub penalty_energy: Vec<T>,
}

/// Runs the whole `ε` schedule on the same bundle.
pub fn solve_sequence<T: Scalar>(
    scenario: &Scenario<T>,
    cfg: &SolverConfig<T>,
) -> Result<SequenceReport<T>> {
    cfg.validate()?;
    let solutions = cfg
        .eps_schedule
        .iter()
        .map(|&e| solve_penalized(scenario, cfg, e))
        .collect::<Result<Vec<_>>>()?;
    let bundle = &scenario.bundle;
    let gaps = solutions
        .windows(2)
        .map(|w| gap(bundle, &w[0], &w[1]))
        .collect();
    let penalty_energy = solutions
        .iter()
        .map(|s| {
            let mut acc = T::zero();
            for i in 0..s.n_steps() {
                let w = bundle.state_weights(i);
                let m: T = s.u[i].iter().zip(&w).map(|(&u, &w)| w * u * u).sum();
                acc += m * bundle.dq(i);
            }
            s.eps * acc
        })
        .collect();
    Ok(SequenceReport {
        solutions,
        gaps,
        penalty_energy,
    })
}

/// Sup-norm gap of `Y` and `L²` gap of `Z` between two solutions on `bundle`.
pub fn gap<T: Scalar>(bundle: &PathBundle<T>, a: &SolutionField<T>, b: &SolutionField<T>) -> GapEntry<T> {
    let y_sup = a
        .y
        .iter()
        .zip(&b.y)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (*x - *y).abs()))
        .fold(T::zero(), T::max);
    let mut z2 = T::zero();
    for i in 0..a.n_steps() {
        let w = bundle.state_weights(i);
        let m: T = a.z[i]
            .iter()
            .zip(&b.z[i])
            .zip(&w)
            .map(|((&x, &y), &w)| w * (x - y) * (x - y))
            .sum();
        z2 += m * bundle.dt(i);
    }
    GapEntry {
        eps_a: a.eps,
        eps_b: b.eps,
        y_sup,
        z_l2: z2.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::ConvexSpec;
    use crate::generator::Expr;
    use crate::process::{build_paths, IncreasingProcessSpec, NoiseModel, TimeGrid};

    fn tree(n: usize) -> PathBundle<f64> {
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        build_paths(&grid, NoiseModel::BinomialTree, IncreasingProcessSpec::Zero).unwrap()
    }

    fn det(n: usize) -> PathBundle<f64> {
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        build_paths(&grid, NoiseModel::Deterministic, IncreasingProcessSpec::Zero).unwrap()
    }

    #[test]
    fn martingale_is_exact() {
        let sc = Scenario::new(
            tree(16),
            GeneratorSpec::zero(),
            CombinedPotential::zero(),
            Arc::new(|b, _| b),
        )
        .unwrap();
        let cfg = SolverConfig::new(vec![0.1], CeBackend::ExactTree);
        let sol = solve_penalized(&sc, &cfg, 0.1).unwrap();
        for i in 0..=16 {
            for (s, v) in sol.y[i].iter().enumerate() {
                assert!((v - sc.bundle.b_value(i, s)).abs() < 1e-13);
            }
        }
        assert!(sol.z.iter().flatten().all(|z| (z - 1.0).abs() < 1e-12));
        assert!(sol.u.iter().flatten().all(|&u| u == 0.0));
    }

    #[test]
    fn linear_generator_matches_euler() {
        let gen = GeneratorSpec::from_exprs(
            &Expr::parse("-y").unwrap(),
            &Expr::parse("0").unwrap(),
            -1.0,
            0.0,
            0.0,
        )
        .unwrap();
        let sc = Scenario::new(det(50), gen, CombinedPotential::zero(), Arc::new(|_, _| 1.0)).unwrap();
        let cfg = SolverConfig::new(vec![0.1], CeBackend::ExactTree);
        let sol = solve_penalized(&sc, &cfg, 0.1).unwrap();
        // Explicit Euler backward: Y_i = (1 − Δt) Y_{i+1}.
        assert!((sol.y0() - 0.98f64.powi(50)).abs() < 1e-14);
    }

    #[test]
    fn reflection_plateau_and_sign() {
        let gen = GeneratorSpec::from_exprs(
            &Expr::parse("1").unwrap(),
            &Expr::parse("0").unwrap(),
            0.0,
            0.0,
            0.0,
        )
        .unwrap();
        let pot = CombinedPotential::new(ConvexSpec::indicator_below(0.0).unwrap(), ConvexSpec::zero());
        let sc = Scenario::new(det(1000), gen, pot, Arc::new(|_, _| -0.5)).unwrap();
        let cfg = SolverConfig::new(vec![0.1, 0.05], CeBackend::ExactTree);
        let rep = solve_sequence(&sc, &cfg).unwrap();
        for sol in &rep.solutions {
            assert!(sol.u.iter().flatten().all(|&u| u >= 0.0));
            // On the contact set the penalized solution settles near eps.
            assert!((sol.y0() - sol.eps).abs() < 2e-3, "{}", sol.y0());
        }
        assert_eq!(rep.gaps.len(), 1);
        assert!((rep.gaps[0].y_sup - 0.05).abs() < 5e-3);
    }

    #[test]
    fn explicit_mode_warns_when_stiff() {
        let pot = CombinedPotential::new(ConvexSpec::indicator_below(0.0).unwrap(), ConvexSpec::zero());
        let sc = Scenario::new(det(4), GeneratorSpec::zero(), pot, Arc::new(|_, _| -0.5)).unwrap();
        let mut cfg = SolverConfig::new(vec![0.01], CeBackend::ExactTree);
        cfg.mode = PenalizationMode::Explicit;
        let sol = solve_penalized(&sc, &cfg, 0.01).unwrap();
        assert!(!sol.warnings.is_empty());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::<f64>::new(vec![0.1, 0.2], CeBackend::ExactTree);
        assert!(cfg.validate().is_err());
        cfg.eps_schedule = vec![0.2, 0.1];
        assert!(cfg.validate().is_ok());
        cfg.p = 1.0;
        assert!(cfg.validate().is_err());
        cfg.p = 2.0;
        cfg.mollify_generators = true;
        cfg.eps_schedule = vec![2.0, 1.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn terminal_outside_domain_is_rejected() {
        let pot = CombinedPotential::new(ConvexSpec::indicator_below(0.0).unwrap(), ConvexSpec::zero());
        assert!(Scenario::new(det(4), GeneratorSpec::zero(), pot, Arc::new(|_, _| 0.5)).is_err());
    }
}
