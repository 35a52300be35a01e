//! JSON experiment configuration and its translation into core types.

use std::path::PathBuf;
use std::sync::Arc;

use bsvi_core::generator::{Env, Expr};
use bsvi_core::process::NoiseModel;
use bsvi_core::solver::PenalizationMode;
use bsvi_core::verify::BatteryOptions;
use bsvi_core::{
    CeBackend, CombinedPotential, ConvexSpec, GeneratorSpec, IncreasingProcessSpec, SolverConfig,
    TimeGrid,
};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub potentials: PotentialsConfig,
    pub generator: GeneratorConfig,
    pub noise: NoiseConfig,
    pub grid: GridConfig,
    pub a_process: AProcessConfig,
    pub solver: SolverSection,
    pub verify: VerifySection,
    /// `0` asks for a clock-derived seed, which is recorded in the summary.
    pub seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialsConfig {
    pub phi: PotentialConfig,
    pub psi: PotentialConfig,
}

/// `null` interval ends stand for `∓∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    Quadratic { c: f64 },
    AbsValue,
    Indicator { lo: Option<f64>, hi: Option<f64> },
}

/// Expressions over `t, y, z` (driver `F`), `t, y` (`G`) and `b, a`
/// (terminal value as a function of `B_T` and `A_T`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub f: String,
    #[serde(default = "zero_expr")]
    pub g: String,
    pub terminal: String,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub ell: f64,
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    BinomialTree,
    GaussianMc { paths: usize },
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AProcessConfig {
    Zero,
    Linear { rate: f64 },
    Ramp { start: f64, rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    ExactTree,
    LeastSquares {
        degree: usize,
        #[serde(default)]
        ridge: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    SemiImplicit,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub eps: Vec<f64>,
    pub backend: BackendConfig,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_mode")]
    pub mode: ModeConfig,
    #[serde(default)]
    pub mollify: bool,
    #[serde(default = "default_nodes")]
    pub mollifier_nodes: usize,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
}

fn default_p() -> f64 {
    2.0
}
fn default_lambda() -> f64 {
    0.5
}
fn default_mode() -> ModeConfig {
    ModeConfig::SemiImplicit
}
fn default_nodes() -> usize {
    bsvi_core::generator::DEFAULT_NODES
}
fn default_sweeps() -> usize {
    1
}

/// Known exact answer, used for error columns only (never gated in `run`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    #[serde(default)]
    pub y0: Option<f64>,
    /// Expression in `t` and `b` for the exact `Y` at every node.
    #[serde(default)]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "yes")]
    pub battery: bool,
    #[serde(default = "yes")]
    pub ito: bool,
    #[serde(default = "yes")]
    pub contraction: bool,
    #[serde(default = "yes")]
    pub apriori: bool,
    #[serde(default = "default_p_values")]
    pub p_values: Vec<f64>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_random")]
    pub random_processes: usize,
    #[serde(default = "default_smoothing_eps")]
    pub smoothing_eps: f64,
    #[serde(default = "default_c")]
    pub c1: f64,
    #[serde(default = "default_c")]
    pub c2: f64,
    #[serde(default = "default_max_paths")]
    pub max_paths: usize,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
}

fn yes() -> bool {
    true
}
fn default_p_values() -> Vec<f64> {
    vec![1.5, 2.5]
}
fn default_deltas() -> Vec<f64> {
    vec![1.0, 0.1, 0.01]
}
fn default_random() -> usize {
    10
}
fn default_smoothing_eps() -> f64 {
    0.05
}
fn default_c() -> f64 {
    5.0
}
fn default_max_paths() -> usize {
    bsvi_core::verify::DEFAULT_MAX_PATHS
}

impl Default for VerifySection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

fn field(field: &str, msg: impl Into<String>) -> LabError {
    LabError::Config {
        field: field.into(),
        message: msg.into(),
    }
}

fn parse_expr(name: &str, src: &str) -> LabResult<Expr> {
    Expr::parse(src).map_err(|e| field(name, e.to_string()))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> LabResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| field("<document>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    /// Field-level checks; everything deeper is left to the core constructors.
    pub fn validate(&self) -> LabResult<()> {
        if !crate::registry::is_known(&self.scenario) {
            return Err(field(
                "scenario",
                format!(
                    "unknown scenario {:?}; use one of {:?} or \"custom\"",
                    self.scenario,
                    crate::registry::names()
                ),
            ));
        }
        if !(self.grid.horizon > 0.0 && self.grid.horizon.is_finite()) {
            return Err(field("grid.horizon", "must be positive and finite"));
        }
        if self.grid.steps == 0 {
            return Err(field("grid.steps", "must be at least 1"));
        }
        if let NoiseConfig::GaussianMc { paths } = self.noise {
            if paths < 2 {
                return Err(field("noise.paths", "need at least two paths"));
            }
        }
        if self.solver.eps.is_empty() {
            return Err(field("solver.eps", "schedule is empty"));
        }
        let backend_ok = matches!(
            (&self.noise, &self.solver.backend),
            (NoiseConfig::GaussianMc { .. }, BackendConfig::LeastSquares { .. })
                | (NoiseConfig::BinomialTree, BackendConfig::ExactTree)
                | (NoiseConfig::Deterministic, _)
        );
        if !backend_ok {
            return Err(field(
                "solver.backend",
                "exact_tree needs binomial_tree noise, least_squares needs gaussian_mc",
            ));
        }
        for (name, src) in [("generator.f", &self.generator.f), ("generator.g", &self.generator.g)] {
            parse_expr(name, src)?;
        }
        let g = parse_expr("generator.g", &self.generator.g)?;
        if g.uses(bsvi_core::generator::Var::Z) {
            return Err(field("generator.g", "G may not depend on z"));
        }
        let eta = parse_expr("generator.terminal", &self.generator.terminal)?;
        if eta.uses(bsvi_core::generator::Var::Y) || eta.uses(bsvi_core::generator::Var::Z) {
            return Err(field("generator.terminal", "terminal value may use only b, a and t"));
        }
        if let Some(r) = &self.verify.reference {
            if let Some(p) = &r.path {
                parse_expr("verify.reference.path", p)?;
            }
        }
        for (k, &d) in self.verify.deltas.iter().enumerate() {
            if !(d > 0.0 && d <= 1.0) {
                return Err(field(&format!("verify.deltas[{k}]"), "must lie in (0, 1]"));
            }
        }
        self.solver_config()
            .validate()
            .map_err(|e| field("solver", e.to_string()))?;
        self.a_spec()
            .validate()
            .map_err(|e| field("a_process", e.to_string()))?;
        self.potential()?;
        Ok(())
    }

    pub fn grid(&self) -> LabResult<TimeGrid> {
        TimeGrid::uniform(self.grid.horizon, self.grid.steps).map_err(|e| field("grid", e.to_string()))
    }

    pub fn noise_model(&self, seed: u64) -> NoiseModel {
        match self.noise {
            NoiseConfig::BinomialTree => NoiseModel::BinomialTree,
            NoiseConfig::GaussianMc { paths } => NoiseModel::GaussianMc { paths, seed },
            NoiseConfig::Deterministic => NoiseModel::Deterministic,
        }
    }

    pub fn a_spec(&self) -> IncreasingProcessSpec {
        match self.a_process {
            AProcessConfig::Zero => IncreasingProcessSpec::Zero,
            AProcessConfig::Linear { rate } => IncreasingProcessSpec::Linear { rate },
            AProcessConfig::Ramp { start, rate } => IncreasingProcessSpec::Ramp { start, rate },
        }
    }

    pub fn backend(&self) -> CeBackend {
        match self.solver.backend {
            BackendConfig::ExactTree => CeBackend::ExactTree,
            BackendConfig::LeastSquares { degree, ridge } => CeBackend::LeastSquares { degree, ridge },
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let mut cfg = SolverConfig::new(s.eps.clone(), self.backend());
        cfg.p = s.p;
        cfg.lambda = s.lambda;
        cfg.mode = match s.mode {
            ModeConfig::SemiImplicit => PenalizationMode::SemiImplicit,
            ModeConfig::Explicit => PenalizationMode::Explicit,
        };
        cfg.mollify_generators = s.mollify;
        cfg.mollifier_nodes = s.mollifier_nodes;
        cfg.sweeps = s.sweeps;
        cfg
    }

    pub fn potential(&self) -> LabResult<CombinedPotential> {
        let build = |name: &str, p: &PotentialConfig| -> LabResult<ConvexSpec> {
            let spec = match *p {
                PotentialConfig::Zero => Ok(ConvexSpec::zero()),
                PotentialConfig::Quadratic { c } => ConvexSpec::quadratic(c),
                PotentialConfig::AbsValue => Ok(ConvexSpec::abs_value()),
                PotentialConfig::Indicator { lo, hi } => ConvexSpec::indicator(
                    lo.unwrap_or(f64::NEG_INFINITY),
                    hi.unwrap_or(f64::INFINITY),
                ),
            };
            spec.map_err(|e| field(name, e.to_string()))
        };
        Ok(CombinedPotential::new(
            build("potentials.phi", &self.potentials.phi)?,
            build("potentials.psi", &self.potentials.psi)?,
        ))
    }

    pub fn generator_spec(&self) -> LabResult<GeneratorSpec> {
        let g = &self.generator;
        GeneratorSpec::from_exprs(
            &parse_expr("generator.f", &g.f)?,
            &parse_expr("generator.g", &g.g)?,
            g.mu,
            g.nu,
            g.ell,
        )
        .map_err(|e| field("generator", e.to_string()))
    }

    /// `η(b, a)`, with `t` bound to the horizon.
    pub fn terminal_fn(&self) -> LabResult<bsvi_core::solver::TerminalFn<f64>> {
        let expr = parse_expr("generator.terminal", &self.generator.terminal)?;
        let horizon = self.grid.horizon;
        Ok(Arc::new(move |b, a| {
            expr.eval(&Env {
                t: horizon,
                b,
                a,
                ..Env::default()
            })
        }))
    }

    pub fn battery_options(&self, seed: u64) -> BatteryOptions<f64> {
        let v = &self.verify;
        BatteryOptions {
            p_values: v.p_values.clone(),
            deltas: v.deltas.clone(),
            random_processes: v.random_processes,
            smoothing_eps: v.smoothing_eps,
            c1: v.c1,
            c2: v.c2,
            max_paths: v.max_paths,
            seed,
        }
    }

    pub fn reference_path(&self) -> LabResult<Option<Expr>> {
        match self.verify.reference.as_ref().and_then(|r| r.path.as_deref()) {
            Some(src) => parse_expr("verify.reference.path", src).map(Some),
            None => Ok(None),
        }
    }

    /// Reference `Y_0`: the explicit value, else the path expression at `(0, 0)`.
    pub fn reference_y0(&self) -> LabResult<Option<f64>> {
        if let Some(y0) = self.verify.reference.as_ref().and_then(|r| r.y0) {
            return Ok(Some(y0));
        }
        Ok(self.reference_path()?.map(|e| e.eval(&Env::default())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        crate::registry::preset("reflection").unwrap()
    }

    #[test]
    fn presets_round_trip_through_json() {
        for name in crate::registry::names() {
            let cfg = crate::registry::preset(name).unwrap();
            assert_eq!(cfg.scenario, name);
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
    }

    #[test]
    fn defaults_fill_optional_sections() {
        let mut v: serde_json::Value = serde_json::from_str(&base().to_json()).unwrap();
        v["verify"] = serde_json::json!({});
        v["solver"] = serde_json::json!({"eps": [0.1], "backend": {"kind": "exact_tree"}});
        let cfg = ExperimentConfig::from_json(&v.to_string()).unwrap();
        assert_eq!(cfg.verify.deltas, vec![1.0, 0.1, 0.01]);
        assert_eq!(cfg.solver.p, 2.0);
        assert_eq!(cfg.solver.mode, ModeConfig::SemiImplicit);
    }

    fn field_of(err: LabError) -> String {
        match err {
            LabError::Config { field, .. } => field,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn diagnostics_name_the_offending_field() {
        let mut c = base();
        c.grid.steps = 0;
        assert_eq!(field_of(c.validate().unwrap_err()), "grid.steps");

        let mut c = base();
        c.generator.f = "y +* 2".into();
        assert_eq!(field_of(c.validate().unwrap_err()), "generator.f");

        let mut c = base();
        c.generator.g = "z".into();
        assert_eq!(field_of(c.validate().unwrap_err()), "generator.g");

        let mut c = base();
        c.scenario = "nope".into();
        assert_eq!(field_of(c.validate().unwrap_err()), "scenario");

        let mut c = base();
        c.solver.eps = vec![0.1, 0.2];
        assert_eq!(field_of(c.validate().unwrap_err()), "solver");

        let mut c = base();
        c.noise = NoiseConfig::GaussianMc { paths: 100 };
        assert_eq!(field_of(c.validate().unwrap_err()), "solver.backend");

        let mut c = base();
        c.potentials.phi = PotentialConfig::Indicator { lo: Some(0.5), hi: Some(1.0) };
        assert_eq!(field_of(c.validate().unwrap_err()), "potentials.phi");

        let mut c = base();
        c.verify.deltas = vec![0.0];
        assert_eq!(field_of(c.validate().unwrap_err()), "verify.deltas[0]");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&base().to_json()).unwrap();
        v["grid"]["stepz"] = 3.into();
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn terminal_sees_b_and_a() {
        let mut c = base();
        c.generator.terminal = "2*b + a - t".into();
        let eta = c.terminal_fn().unwrap();
        assert_eq!(eta(1.0, 0.5), 2.0 + 0.5 - c.grid.horizon);
    }
}
