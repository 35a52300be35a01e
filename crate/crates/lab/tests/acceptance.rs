//! Acceptance gate: the eleven numbered criteria, each at its stated
//! tolerance, one PASS/FAIL line apiece. Runs without the libtest harness so
//! the verdict lines always reach stdout; exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use bsvi_core::convex::CombinedPotential;
use bsvi_core::generator::{beta_trunc, bump, mollify_f, Expr, DEFAULT_NODES};
use bsvi_core::process::rng::UniformStream;
use bsvi_core::process::{build_paths, IncreasingProcessSpec, NoiseModel};
use bsvi_core::solver::{smoothing_operator, solve_penalized, CeBackend, Scenario, SmoothingConfig, SolverConfig};
use bsvi_core::verify::{check_contraction, check_ito_residual, PathView, Semimartingale};
use bsvi_core::{ConvexSpec, GeneratorSpec, MollifierConfig, PathBundle, TimeGrid};
use bsvi_lab::config::{BackendConfig, NoiseConfig};
use bsvi_lab::registry;
use bsvi_lab::runner;
use bsvi_lab::sweep::{error_ratios, sweep, Axis};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn gate(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tree(n: usize) -> PathBundle {
    build_paths(&TimeGrid::uniform(1.0, n).unwrap(), NoiseModel::BinomialTree, IncreasingProcessSpec::Zero).unwrap()
}

fn ode(n: usize) -> PathBundle {
    build_paths(&TimeGrid::uniform(1.0, n).unwrap(), NoiseModel::Deterministic, IncreasingProcessSpec::Zero).unwrap()
}

/// Brute-force `argmin` and `min` of `|y − v|²/(2ε) + φ(v)` by grid refinement.
fn grid_oracle(phi: &ConvexSpec, eps: f64, y: f64) -> (f64, f64) {
    let obj = |v: f64| (y - v) * (y - v) / (2.0 * eps) + phi.value(v);
    let (mut lo, mut hi) = (-y.abs() - 2.0, y.abs() + 2.0);
    let mut best = (0.0, obj(0.0));
    for _ in 0..8 {
        let h = (hi - lo) / 400.0;
        for k in 0..=400 {
            let v = lo + h * k as f64;
            let o = obj(v);
            if o < best.1 {
                best = (v, o);
            }
        }
        lo = best.0 - 2.0 * h;
        hi = best.0 + 2.0 * h;
    }
    best
}

fn c1_convex_kernel() -> Verdict {
    let kinds = [
        ("quadratic", ConvexSpec::quadratic(2.0).unwrap()),
        ("abs", ConvexSpec::abs_value()),
        ("indicator", ConvexSpec::indicator(-1.0, 0.5).unwrap()),
    ];
    let mut oracle = 0.0_f64;
    let mut prop = 0.0_f64;
    for (k, (_, phi)) in kinds.iter().enumerate() {
        let mut rng = UniformStream::new(1, k as u64);
        for _ in 0..1000 {
            let y = rng.range(-5.0, 5.0);
            let eps = rng.range(0.01, 2.0);
            let (j, env) = grid_oracle(phi, eps, y);
            let jr = phi.resolvent(eps, y).unwrap();
            oracle = oracle
                .max((jr - j).abs())
                .max((phi.envelope(eps, y).unwrap() - env).abs())
                .max(eps * (phi.yosida_gradient(eps, y).unwrap() - (y - j) / eps).abs());

            // Closed-form properties on an independent pair and a second level.
            let x = rng.range(-5.0, 5.0);
            let delta = rng.range(0.01, 2.0);
            let (jx, gx, gy) = (
                phi.resolvent(eps, x).unwrap(),
                phi.yosida_gradient(eps, x).unwrap(),
                phi.yosida_gradient(eps, y).unwrap(),
            );
            prop = prop.max((jx - jr).abs() - (x - y).abs());
            prop = prop.max(eps * ((gx - gy).abs() - (x - y).abs() / eps));
            let env_y = phi.envelope(eps, y).unwrap();
            prop = prop.max((env_y - ((y - jr).powi(2) / (2.0 * eps) + phi.value(jr))).abs());
            let (lo, hi) = phi.domain();
            if y >= lo && y <= hi {
                prop = prop.max(-phi.value(jr)).max(phi.value(jr) - env_y).max(env_y - phi.value(y));
            }
            let gd = phi.yosida_gradient(delta, x).unwrap();
            let lhs = -(y - x) * (gy - gd);
            let mid = (eps + delta) * gy * gd;
            let scale = 1.0 + gy.abs() * gd.abs();
            prop = prop.max((lhs - mid) / scale).max((mid - (eps + delta) / 2.0 * (gy * gy + gd * gd)) / scale);
        }
        prop = prop
            .max(phi.resolvent(0.7, 0.0).unwrap().abs())
            .max(phi.yosida_gradient(0.7, 0.0).unwrap().abs());
    }
    gate(
        oracle <= 1e-6 && prop <= 1e-10,
        format!("oracle gap {oracle:.2e} (<= 1e-6), property violation {prop:.2e} (<= 1e-10), 3x1000 samples"),
    )
}

/// Bitwise against the formula evaluated with one division by `ε`; the
/// reciprocal form `(1/ε)·x` rounds twice, so it is only held to one ulp.
fn c2_indicator_formula() -> Verdict {
    let (a, b) = (-1.0, 2.0);
    let phi = ConvexSpec::indicator(a, b).unwrap();
    let (mut mismatches, mut max_ulps) = (0, 0u64);
    for &eps in &[0.05, 0.3, 0.5, 1.0] {
        for k in 0..1000 {
            let y = -8.0 + 16.0 * k as f64 / 999.0;
            let x = f64::max(y - b, 0.0) - f64::max(a - y, 0.0);
            let got = phi.yosida_gradient(eps, y).unwrap();
            if got != x / eps {
                mismatches += 1;
            }
            let recip = (1.0 / eps) * x;
            max_ulps = max_ulps.max((got.to_bits() as i64 - recip.to_bits() as i64).unsigned_abs());
        }
    }
    gate(
        mismatches == 0 && max_ulps <= 1,
        format!("{mismatches} bitwise mismatches on 4x1000 grid points; reciprocal form within {max_ulps} ulp"),
    )
}

fn c3_martingale() -> Verdict {
    let sc = Scenario::new(tree(64), GeneratorSpec::zero(), CombinedPotential::zero(), Arc::new(|b, _| b)).unwrap();
    let sol = solve_penalized(&sc, &SolverConfig::new(vec![0.1], CeBackend::ExactTree), 0.1).unwrap();
    let b = &sc.bundle;
    let mut dy = 0.0_f64;
    for i in 0..=64 {
        for s in 0..b.n_states(i) {
            dy = dy.max((sol.y[i][s] - b.b_value(i, s)).abs());
        }
    }
    let dz = sol.z.iter().flatten().fold(0.0_f64, |m, z| m.max((z - 1.0).abs()));
    let view = PathView::new(b, 4096, 3);
    let sm = Semimartingale::from_solution(&sol, b, &view, CeBackend::ExactTree).unwrap();
    let ito = check_ito_residual(&sm, b, &view, 2.0, 0.0, 0.0).unwrap().worst_violation;
    let tol = 1e-12;
    gate(
        dy <= tol && dz <= tol && ito <= tol,
        format!("max|Y-B| {dy:.1e}, max|Z-1| {dz:.1e}, ito residual {ito:.1e} (all <= {tol:.0e})"),
    )
}

fn c4_linear_rate() -> Verdict {
    let cfg = registry::preset("linear").unwrap();
    let rows = sweep(&cfg, Axis::Dt, &[1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0], 1).map_err(|e| e.to_string())?;
    let errs: Vec<f64> = rows.iter().map(|r| r.y0_error.unwrap()).collect();
    let ratios = error_ratios(&errs);
    gate(
        errs.windows(2).all(|w| w[1] < w[0]) && ratios.iter().all(|r| (1.7..=2.3).contains(r)),
        format!("errors {}, ratios {ratios:.3?} in [1.7, 2.3]", sci(&errs)),
    )
}

fn c5_reflection_rate() -> Verdict {
    let cfg = registry::preset("reflection").unwrap();
    assert_eq!(cfg.grid.steps, 1000);
    let rows = sweep(&cfg, Axis::Eps, &[0.1, 0.05, 0.025], 1).map_err(|e| e.to_string())?;
    let errs: Vec<f64> = rows.iter().map(|r| r.sup_error.unwrap()).collect();
    let ratios = error_ratios(&errs);
    gate(
        ratios.iter().all(|r| (1.5..=3.0).contains(r)),
        format!("sup errors {}, ratios {ratios:.3?} in [1.5, 3]", sci(&errs)),
    )
}

fn monte_carlo(mut cfg: bsvi_lab::ExperimentConfig) -> bsvi_lab::ExperimentConfig {
    cfg.scenario = registry::CUSTOM.into();
    cfg.noise = NoiseConfig::GaussianMc { paths: 2000 };
    cfg.grid.steps = 20;
    cfg.solver.backend = BackendConfig::LeastSquares { degree: 3, ridge: 0.0 };
    cfg
}

fn c6_eps_cauchy() -> Verdict {
    let base = registry::preset("two_barrier").unwrap();
    let driven = registry::preset("two_barrier_driven").unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for (label, cfg) in [
        ("tree", base.clone()),
        ("tree F=2", driven.clone()),
        ("mc", monte_carlo(base)),
        ("mc F=2", monte_carlo(driven)),
    ] {
        assert_eq!(cfg.solver.eps.len(), 4);
        let (_, seq) = runner::solve(&cfg, cfg.seed).map_err(|e| e.to_string())?;
        let gaps: Vec<f64> = seq.gaps.iter().map(|g| g.y_sup).collect();
        ok &= gaps.windows(2).all(|w| w[1] <= w[0]);
        parts.push(format!("{label} {}", sci(&gaps)));
    }
    gate(ok, format!("gaps nonincreasing: {}", parts.join("; ")))
}

fn c7_battery() -> Verdict {
    let mut configs: Vec<_> = registry::names().into_iter().map(|n| registry::preset(n).unwrap()).collect();
    configs.push(monte_carlo(registry::preset("two_barrier_driven").unwrap()));
    let (mut total, mut failed, mut worst_ratio) = (0, Vec::new(), f64::NEG_INFINITY);
    for cfg in &configs {
        assert_eq!((cfg.verify.c1, cfg.verify.c2), (5.0, 5.0));
        let exec = runner::execute(cfg).map_err(|e| e.to_string())?;
        for r in exec.reports.iter().filter(|r| r.name.starts_with("def1")) {
            total += 1;
            worst_ratio = worst_ratio.max(r.worst_violation / r.tolerance);
            if !r.pass {
                failed.push(format!("{}:{}", cfg.scenario, r.name));
            }
        }
    }
    gate(
        failed.is_empty() && total > 0,
        format!(
            "{} scenarios, {}/{total} checks pass at tol 5dt+5/sqrt(P), worst violation/tol {worst_ratio:.3}{}",
            configs.len(),
            total - failed.len(),
            if failed.is_empty() { String::new() } else { format!(", failed {failed:?}") }
        ),
    )
}

fn c8_contraction() -> Verdict {
    let cfg = registry::preset("two_barrier_driven").unwrap();
    let (sc, seq) = runner::solve(&cfg, cfg.seed).map_err(|e| e.to_string())?;
    let tol = 10.0 * sc.bundle.grid().max_dt();
    let mut pairs = 0;
    let mut worst = 0.0_f64;
    for w in seq.solutions.windows(2) {
        for q in [2.0, 1.5] {
            let r = check_contraction(&w[0], &w[1], &sc.bundle, q, tol).unwrap();
            worst = worst.max(r.worst_violation);
            pairs += 1;
        }
    }
    let shifted = |h: f64| {
        let s = Scenario::new(tree(40), GeneratorSpec::zero(), CombinedPotential::zero(), Arc::new(move |b, _| b + h)).unwrap();
        solve_penalized(&s, &SolverConfig::new(vec![0.1], CeBackend::ExactTree), 0.1).unwrap().y0()
    };
    let y_ref = shifted(0.0);
    let mut dev = 0.0_f64;
    for h in [1e-3, 1e-2] {
        dev = dev.max(((shifted(h) - y_ref).abs() - h).abs());
    }
    let exact = 4.0 * f64::EPSILON;
    gate(
        worst <= tol && dev <= exact,
        format!("{pairs} contraction checks, worst {worst:.2e} <= tol {tol:.2e}; ||dY0|-h| {dev:.1e} <= {exact:.1e}"),
    )
}

fn c9_smoothing() -> Verdict {
    let b = tree(24);
    let c: Vec<Vec<f64>> = (0..=24).map(|i| vec![0.37; b.n_states(i)]).collect();
    let sm = smoothing_operator(&c, &b, SmoothingConfig { eps: 0.1 }, CeBackend::ExactTree).unwrap();
    let fixed = sm.m.iter().flatten().fold(0.0_f64, |m, v| m.max((v - 0.37).abs()));

    let mut sup_excess = f64::NEG_INFINITY;
    for k in 0..100u64 {
        let mut rng = UniformStream::new(5, k);
        let pieces = 1 + (k as usize % 5);
        let levels: Vec<f64> = (0..pieces).map(|_| rng.range(-2.0, 2.0)).collect();
        let tilt = rng.range(-1.0, 1.0);
        let u: Vec<Vec<f64>> = (0..=24)
            .map(|i| {
                let base = levels[(i * pieces / 25).min(pieces - 1)];
                (0..b.n_states(i)).map(|s| base + tilt * b.b_value(i, s).signum()).collect()
            })
            .collect();
        let sup = u.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        let eps = rng.range(0.01, 0.5);
        let sm = smoothing_operator(&u, &b, SmoothingConfig { eps }, CeBackend::ExactTree).unwrap();
        let msup = sm.m.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        sup_excess = sup_excess.max(msup - sup);
    }

    let n = 1000;
    let d = ode(n);
    let u: Vec<Vec<f64>> = (0..=n).map(|i| vec![d.t(i)]).collect();
    let sm = smoothing_operator(&u, &d, SmoothingConfig { eps: 0.01 }, CeBackend::ExactTree).unwrap();
    let bound = (2.0 - 1.0 / sm.q_eps.sqrt()).exp() + sm.q_eps.sqrt();
    let approx = (0..=n).map(|i| (sm.m[i][0] - d.t(i)).abs()).fold(0.0, f64::max);

    gate(
        fixed <= 1e-12 && sup_excess <= 1e-12 && approx <= bound,
        format!(
            "fixed point {fixed:.1e}; max(|M|-sup|U|) over 100 processes {sup_excess:.2e}; U=t error {approx:.4} <= bound {bound:.4}"
        ),
    )
}

fn c10_mollifier() -> Verdict {
    let variants: &[(&str, f64)] = &[
        ("-y", 0.0),
        ("-y + 0.5*z", 0.5),
        ("-y*y*y - y + 0.3*z", 0.3),
        ("-y + y*y*t - 0.2*z", 0.2),
    ];
    let mut viol = f64::NEG_INFINITY;
    let mut count = 0;
    for (k, &(src, ell)) in variants.iter().enumerate() {
        let gen = GeneratorSpec::from_exprs(&Expr::parse(src).unwrap(), &Expr::parse("0").unwrap(), 0.0, 0.0, ell).unwrap();
        let mut rng = UniformStream::new(10, k as u64);
        for _ in 0..1000 {
            let c = MollifierConfig::new(rng.range(0.02, 1.0), DEFAULT_NODES).unwrap();
            let (e, mass) = (c.eps(), c.weight_sum());
            let f = |t, y, z| mollify_f(|t, y, z| gen.f(t, y, z), &c, t, y, z).unwrap();
            let t = rng.range(0.0, 1.0);
            let (y, yh) = (rng.range(-3.0, 3.0), rng.range(-3.0, 3.0));
            let (z, zh) = (rng.range(-20.0, 20.0), rng.range(-20.0, 20.0));
            let checks = [
                f(t, 0.0, 0.0).abs() - gen.f_sharp(1.0, t).unwrap() * mass,
                f(t, y, z).abs() - (1.0 + ell) / e * mass,
                (f(t, y, z) - f(t, y, zh)).abs() - ell * (z - zh).abs() * mass,
                (f(t, y, z) - f(t, yh, z)).abs() - c.kappa() * (1.0 + ell) / (e * e) * (y - yh).abs(),
                beta_trunc(e, z).unwrap().abs() - z.abs().min(1.0 / e),
            ];
            viol = checks.iter().fold(viol, |m, &v| m.max(v));
            count += checks.len();
        }
    }
    let kappa = MollifierConfig::new(0.5, DEFAULT_NODES).unwrap().kappa();
    gate(
        viol <= 1e-12 && 2.0 * bump(0.0) <= kappa,
        format!("{count} inequality evaluations, worst excess {viol:.2e}; kappa = {kappa:.4}"),
    )
}

fn c11_reproducible() -> Verdict {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for k in 0..2 {
        let mut cfg = registry::preset("martingale_lsm").unwrap();
        cfg.out_dir = root.path().join(format!("run{k}"));
        let out = runner::run(&cfg).map_err(|e| e.to_string())?;
        bytes.push(std::fs::read(out.dir.join(runner::RESULTS_CSV)).map_err(|e| e.to_string())?);
    }
    gate(
        bytes[0] == bytes[1] && !bytes[0].is_empty(),
        format!("martingale_lsm seed 42: two results.csv of {} bytes, identical = {}", bytes[0].len(), bytes[0] == bytes[1]),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("convex kernel exactness", c1_convex_kernel),
        ("indicator gradient formula", c2_indicator_formula),
        ("martingale exactness", c3_martingale),
        ("linear generator convergence", c4_linear_rate),
        ("penalized reflection rate", c5_reflection_rate),
        ("eps-Cauchy gaps", c6_eps_cauchy),
        ("variational inequality battery", c7_battery),
        ("contraction and terminal shift", c8_contraction),
        ("smoothing operator", c9_smoothing),
        ("mollifier properties", c10_mollifier),
        ("reproducibility", c11_reproducible),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] criterion {:>2} {name:<32} {secs:>6.2}s  {detail}", k + 1);
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
