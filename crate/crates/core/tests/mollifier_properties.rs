//! Properties of the mollified generator on polynomial and piecewise-linear
//! drivers from the expression grammar.

use bsvi_core::generator::{beta_trunc, mollify_f, Expr, DEFAULT_NODES};
use bsvi_core::process::rng::UniformStream;
use bsvi_core::{GeneratorSpec, MollifierConfig};

/// `(F source, z-Lipschitz constant ℓ)`.
const VARIANTS: &[(&str, f64)] = &[
    ("-y", 0.0),
    ("-y + 0.5*z", 0.5),
    ("-y*y*y - y + 0.3*z + t", 0.3),
    ("-y + 0.2*max(z, -z) + y*y*t", 0.2),
    ("min(-y, 1) - 0.25*z", 0.25),
];

const SAMPLES: usize = 1000;

fn generator(src: &str, ell: f64) -> GeneratorSpec {
    GeneratorSpec::from_exprs(&Expr::parse(src).unwrap(), &Expr::parse("0").unwrap(), 0.0, 0.0, ell).unwrap()
}

fn for_each_variant(mut check: impl FnMut(&str, f64, &GeneratorSpec, &mut UniformStream)) {
    for (k, &(src, ell)) in VARIANTS.iter().enumerate() {
        let gen = generator(src, ell);
        let mut rng = UniformStream::new(2024, k as u64);
        check(src, ell, &gen, &mut rng);
    }
}

fn cfg(rng: &mut UniformStream) -> MollifierConfig {
    MollifierConfig::new(rng.range(0.02, 1.0), DEFAULT_NODES).unwrap()
}

fn f_eps(gen: &GeneratorSpec, c: &MollifierConfig, t: f64, y: f64, z: f64) -> f64 {
    mollify_f(|t, y, z| gen.f(t, y, z), c, t, y, z).unwrap()
}

#[test]
fn baseline_bound() {
    for_each_variant(|src, ell, gen, rng| {
        for _ in 0..SAMPLES {
            let c = cfg(rng);
            let t = rng.range(0.0, 1.0);
            let lhs = f_eps(gen, &c, t, 0.0, 0.0).abs();
            let rhs = gen.f_sharp(1.0, t).unwrap() * c.weight_sum();
            assert!(lhs <= rhs + 1e-12, "{src}: |F_eps(t,0,0)| = {lhs} > {rhs}");
            // Growth form at a general point.
            let (y, z) = (rng.range(-3.0, 3.0), rng.range(-5.0, 5.0));
            let lhs = f_eps(gen, &c, t, y, z).abs();
            let rhs = (ell * z.abs() + gen.f_sharp(y.abs() + 1.0, t).unwrap()) * c.weight_sum();
            assert!(lhs <= rhs + 1e-12, "{src}: growth bound at y={y} z={z}");
        }
    });
}

#[test]
fn sup_bound() {
    for_each_variant(|src, ell, gen, rng| {
        for _ in 0..SAMPLES {
            let c = cfg(rng);
            let e = c.eps();
            let (t, y, z) = (rng.range(0.0, 1.0), rng.range(-50.0, 50.0), rng.range(-200.0, 200.0));
            let lhs = f_eps(gen, &c, t, y, z).abs();
            let tight = (ell * beta_trunc(e, z).unwrap().abs() + 1.0 / e) * c.weight_sum();
            assert!(lhs <= tight + 1e-12, "{src}: eps={e} y={y} z={z}");
            assert!(tight <= (1.0 + ell) / e * c.weight_sum() + 1e-12);
        }
    });
}

#[test]
fn z_lipschitz() {
    for_each_variant(|src, ell, gen, rng| {
        for _ in 0..SAMPLES {
            let c = cfg(rng);
            let (t, y) = (rng.range(0.0, 1.0), rng.range(-3.0, 3.0));
            let (z, zh) = (rng.range(-10.0, 10.0), rng.range(-10.0, 10.0));
            let d = (f_eps(gen, &c, t, y, z) - f_eps(gen, &c, t, y, zh)).abs();
            assert!(d <= ell * (z - zh).abs() * c.weight_sum() + 1e-12, "{src}: z={z} zh={zh}");
        }
    });
}

#[test]
fn y_lipschitz_with_computed_kappa() {
    for_each_variant(|src, ell, gen, rng| {
        for _ in 0..SAMPLES {
            let c = cfg(rng);
            let e = c.eps();
            let (t, z) = (rng.range(0.0, 1.0), rng.range(-10.0, 10.0));
            let (y, yh) = (rng.range(-3.0, 3.0), rng.range(-3.0, 3.0));
            let d = (f_eps(gen, &c, t, y, z) - f_eps(gen, &c, t, yh, z)).abs();
            let bound = c.kappa() * (1.0 + ell) / (e * e) * (y - yh).abs();
            assert!(d <= bound + 1e-12, "{src}: eps={e} y={y} yh={yh} d={d} bound={bound}");
        }
    });
}

#[test]
fn truncation_properties() {
    let mut rng = UniformStream::new(7, 7);
    for _ in 0..SAMPLES {
        let (e, d) = (rng.range(0.01, 2.0), rng.range(0.01, 2.0));
        let (z, zh) = (rng.range(-300.0, 300.0), rng.range(-300.0, 300.0));
        let be = beta_trunc(e, z).unwrap();
        assert!(be.abs() <= z.abs().min(1.0 / e) * (1.0 + 1e-15));
        let lhs = (be - beta_trunc(d, zh).unwrap()).abs();
        let far = zh.abs() >= (1.0 / e).min(1.0 / d);
        let rhs = (z - zh).abs() + if far && e != d { zh.abs() } else { 0.0 };
        assert!(lhs <= rhs + 1e-12, "eps={e} delta={d} z={z} zh={zh}");
        // Same level: β_ε is a projection, hence 1-Lipschitz.
        assert!((be - beta_trunc(e, zh).unwrap()).abs() <= (z - zh).abs() + 1e-12);
    }
}

#[test]
fn kappa_dominates_kernel_slope_at_the_origin() {
    let c = MollifierConfig::new(0.5, DEFAULT_NODES).unwrap();
    assert!((c.kappa() - 1.798).abs() < 1e-3);
    assert!(2.0 * bsvi_core::generator::bump(0.0_f64) <= c.kappa());
}
