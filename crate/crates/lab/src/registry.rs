//! Named scenario presets. Each preset is a complete [`ExperimentConfig`].

use std::path::PathBuf;

use crate::config::*;

/// Name accepted for hand-written configurations outside the registry.
pub const CUSTOM: &str = "custom";

const ENTRIES: &[(&str, &str)] = &[
    ("martingale", "eta = B_T, zero generator and potentials, binomial tree with 64 steps"),
    ("linear", "backward ODE Y' = Y, eta = 1 on [0, 1]; exact Y_0 = e^-1"),
    ("reflection", "backward ODE with F = 1, eta = -0.5, Y kept in (-inf, 0]; exact Y = min(0, 0.5 - t)"),
    ("two_barrier", "eta = clamp(B_T, -1, 1), F = 0, phi = indicator of [-1, 1], tree"),
    ("two_barrier_driven", "two_barrier with F = 2 pushing Y into the upper wall"),
    ("reflected_with_clock", "A_t = t, both potentials active, mollified generators, tree"),
    ("martingale_lsm", "eta = B_T on 2000 Gaussian paths with least-squares regression"),
];

pub fn names() -> Vec<&'static str> {
    ENTRIES.iter().map(|(n, _)| *n).collect()
}

pub fn describe(name: &str) -> Option<&'static str> {
    ENTRIES.iter().find(|(n, _)| *n == name).map(|(_, d)| *d)
}

pub fn is_known(name: &str) -> bool {
    name == CUSTOM || describe(name).is_some()
}

fn zero_pot() -> PotentialConfig {
    PotentialConfig::Zero
}

fn base(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        scenario: name.into(),
        potentials: PotentialsConfig {
            phi: zero_pot(),
            psi: zero_pot(),
        },
        generator: GeneratorConfig {
            f: "0".into(),
            g: "0".into(),
            terminal: "b".into(),
            mu: 0.0,
            nu: 0.0,
            ell: 0.0,
        },
        noise: NoiseConfig::BinomialTree,
        grid: GridConfig {
            horizon: 1.0,
            steps: 64,
        },
        a_process: AProcessConfig::Zero,
        solver: SolverSection {
            eps: vec![0.1, 0.05, 0.025],
            backend: BackendConfig::ExactTree,
            p: 2.0,
            lambda: 0.5,
            mode: ModeConfig::SemiImplicit,
            mollify: false,
            mollifier_nodes: bsvi_core::generator::DEFAULT_NODES,
            sweeps: 1,
        },
        verify: VerifySection::default(),
        seed: 42,
        out_dir: PathBuf::from("runs").join(name),
    }
}

fn reference(y0: Option<f64>, path: Option<&str>) -> Option<ReferenceConfig> {
    Some(ReferenceConfig {
        y0,
        path: path.map(str::to_string),
    })
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let mut c = base(name);
    match name {
        "martingale" => {
            c.verify.reference = reference(Some(0.0), Some("b"));
        }
        "linear" => {
            c.generator.f = "-y".into();
            c.generator.mu = -1.0;
            c.generator.terminal = "1".into();
            c.noise = NoiseConfig::Deterministic;
            c.grid.steps = 100;
            c.verify.reference = reference(Some((-1.0f64).exp()), None);
        }
        "reflection" => {
            c.generator.f = "1".into();
            c.generator.terminal = "-0.5".into();
            c.potentials.phi = PotentialConfig::Indicator { lo: None, hi: Some(0.0) };
            c.noise = NoiseConfig::Deterministic;
            c.grid.steps = 1000;
            c.verify.reference = reference(None, Some("min(0, 0.5 - t)"));
        }
        "two_barrier" | "two_barrier_driven" => {
            if name == "two_barrier_driven" {
                c.generator.f = "2".into();
            }
            c.generator.terminal = "max(-1, min(1, b))".into();
            c.potentials.phi = PotentialConfig::Indicator { lo: Some(-1.0), hi: Some(1.0) };
            c.solver.eps = vec![0.1, 0.05, 0.025, 0.0125];
        }
        "reflected_with_clock" => {
            c.generator = GeneratorConfig {
                f: "-y + 0.5*z".into(),
                g: "1 - y".into(),
                terminal: "max(-1, min(1, b))".into(),
                mu: -1.0,
                nu: -1.0,
                ell: 0.5,
            };
            c.potentials.phi = PotentialConfig::Indicator { lo: Some(-1.0), hi: Some(1.0) };
            c.potentials.psi = PotentialConfig::Indicator { lo: Some(-2.0), hi: Some(2.0) };
            c.a_process = AProcessConfig::Linear { rate: 1.0 };
            c.grid.steps = 10;
            c.solver.eps = vec![0.1, 0.05];
            c.solver.mollify = true;
        }
        "martingale_lsm" => {
            c.noise = NoiseConfig::GaussianMc { paths: 2000 };
            c.grid.steps = 20;
            c.solver.backend = BackendConfig::LeastSquares { degree: 3, ridge: 0.0 };
            c.solver.eps = vec![0.1];
            c.verify.reference = reference(Some(0.0), Some("b"));
        }
        _ => return None,
    }
    Some(c)
}
