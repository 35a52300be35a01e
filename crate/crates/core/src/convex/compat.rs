use super::ConvexSpec;
use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::scalar::Scalar;

/// The three sampled compatibility inequalities between `φ`, `ψ`, `F` and `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompatCondition {
    /// `⟨∇φ_ε, ∇ψ_ε⟩ ≥ 0`.
    GradientsAligned,
    /// `⟨∇φ_ε, G⟩ ≤ |∇ψ_ε| |G|`.
    PhiAgainstG,
    /// `⟨∇ψ_ε, F⟩ ≤ |∇φ_ε| |F|`.
    PsiAgainstF,
}

/// Sample point `(t, y, z)` at which a margin was evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatSample<T> {
    pub t: T,
    pub y: T,
    pub z: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport<T> {
    pub pass: bool,
    /// Smallest margin over every condition, `ε` and sample; negative means violated.
    pub worst_margin: T,
    pub worst_condition: CompatCondition,
    pub worst_eps: T,
    pub worst_sample: CompatSample<T>,
    pub evaluated: usize,
}

/// Evaluates the compatibility margins on every `(ε, sample)` pair.
pub fn compatibility_check<T: Scalar>(
    phi: &ConvexSpec<T>,
    psi: &ConvexSpec<T>,
    gen: &GeneratorSpec<T>,
    eps_list: &[T],
    samples: &[CompatSample<T>],
) -> Result<CompatibilityReport<T>> {
    if samples.is_empty() || eps_list.is_empty() {
        return Err(Error::DomainError(
            "compatibility check needs at least one eps and one sample".into(),
        ));
    }
    let mut report = CompatibilityReport {
        pass: true,
        worst_margin: T::infinity(),
        worst_condition: CompatCondition::GradientsAligned,
        worst_eps: eps_list[0],
        worst_sample: samples[0],
        evaluated: 0,
    };
    for &eps in eps_list {
        for &s in samples {
            let gp = phi.yosida_gradient(eps, s.y)?;
            let gs = psi.yosida_gradient(eps, s.y)?;
            let f = gen.f(s.t, s.y, s.z);
            let g = gen.g(s.t, s.y);
            let margins = [
                (CompatCondition::GradientsAligned, gp * gs),
                (CompatCondition::PhiAgainstG, gs.abs() * g.abs() - gp * g),
                (CompatCondition::PsiAgainstF, gp.abs() * f.abs() - gs * f),
            ];
            for (cond, m) in margins {
                report.evaluated += 1;
                if m < report.worst_margin || m.is_nan() {
                    report.worst_margin = m;
                    report.worst_condition = cond;
                    report.worst_eps = eps;
                    report.worst_sample = s;
                }
            }
        }
    }
    let tol = T::lit(1e-12);
    report.pass = report.worst_margin >= -tol;
    Ok(report)
}
