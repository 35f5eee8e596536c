//! Named, ready-to-run experiments.

use super::config::{
    default_radii, residual_js_bound, residual_js_max_shrinkage, Assertion, ConditionConfig, ConditionSpec, Expectation, Location1dComparison,
    LossComparison, RiskConfig, Setting,
};
use crate::calculus::{FieldSpec, VectorFieldSpec};
use crate::domination::{mixture_k, GridSpec};
use crate::estimators::EstimatorSpec;
use crate::loss_estimators::{BaseSpec, CorrectionSpec, Location1d, LossEstimatorSpec};
use crate::risk_engine::DEFAULT_RISK_N;
use crate::samplers::{MixingSpec, RadialSpec, SamplerSpec};

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub risk: Option<RiskConfig>,
    pub conditions: Option<ConditionConfig>,
}

pub const NAMES: [&str; 8] = [
    "johnstone-mle",
    "johnstone-js",
    "wan-zou",
    "mixture-t",
    "residual-ls",
    "residual-js",
    "bayes-paradox-1d",
    "thm21-js",
];

/// `scale / |x|²`.
fn inv_sq(scale: f64) -> FieldSpec {
    FieldSpec::NormPower { power: 2.0, scale }
}

/// `base - scale |x|^-2 · multiplier`.
fn fixed(scale: f64, base: BaseSpec) -> LossEstimatorSpec {
    LossEstimatorSpec::corrected(base, CorrectionSpec::Fixed { gamma: inv_sq(1.0), scale })
}

fn comparison(settings: Vec<Setting>, estimator: EstimatorSpec, baseline: BaseSpec, candidate: LossEstimatorSpec) -> RiskConfig {
    RiskConfig::LossEstimation(LossComparison {
        settings,
        estimator,
        baseline: LossEstimatorSpec::unbiased(baseline),
        candidates: vec![candidate],
        radii: default_radii(),
        n: DEFAULT_RISK_N,
        seed: None,
        assertion: Assertion::Dominates,
    })
}

fn setting(label: &str, sampler: SamplerSpec) -> Setting {
    Setting { label: label.into(), sampler }
}

fn conditions(p: usize, spec: ConditionSpec) -> Option<ConditionConfig> {
    Some(ConditionConfig { p, spec, grid: GridSpec::default(), expect: Expectation::Pass })
}

fn residual_settings(p: usize, k: usize) -> Vec<Setting> {
    let dim = (p + k) as f64;
    vec![
        setting("radial=chi", SamplerSpec::spherical_residual(p, k, RadialSpec::Chi { dof: dim, scale: 1.0 })),
        setting("radial=fixed", SamplerSpec::spherical_residual(p, k, RadialSpec::Fixed { r: dim.sqrt() })),
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    Some(match name {
        "johnstone-mle" => {
            let p = 5;
            let alpha = 2.0 * (p as f64 - 4.0);
            Preset {
                name: "johnstone-mle",
                summary: "p=5 normal, MLE: p - 2(p-4)/|x|^2 against the constant p",
                risk: Some(comparison(
                    vec![setting("normal", SamplerSpec::normal(p, 1.0))],
                    EstimatorSpec::Mle,
                    BaseSpec::ConstantSpherical,
                    fixed(alpha, BaseSpec::ConstantSpherical),
                )),
                conditions: conditions(p, ConditionSpec::Thm21 { m: FieldSpec::Constant { c: 1.0 }, xi: inv_sq(1.0) }),
            }
        }
        "johnstone-js" => {
            let p = 5;
            Preset {
                name: "johnstone-js",
                summary: "p=5 normal, James-Stein: SURE + 2p/|x|^2 against SURE",
                risk: Some(comparison(
                    vec![setting("normal", SamplerSpec::normal(p, 1.0))],
                    EstimatorSpec::JamesStein,
                    BaseSpec::SureKnownVar,
                    fixed(-2.0 * p as f64, BaseSpec::SureKnownVar),
                )),
                conditions: conditions(
                    p,
                    ConditionSpec::KnownVar { gamma: inv_sq(-2.0 * p as f64), estimator: EstimatorSpec::JamesStein },
                ),
            }
        }
        "wan-zou" => {
            let (p, k) = (5usize, 3usize);
            let kf = k as f64;
            let d = 2.0 / (kf + 2.0) * (p as f64 + (p as f64 - 2.0).powi(2) / (kf + 2.0));
            let settings = [0.5, 1.0, 2.0]
                .iter()
                .map(|&s2| setting(&format!("sigma2={s2}"), SamplerSpec::normal_with_variance(p, k, s2)))
                .collect();
            Preset {
                name: "wan-zou",
                summary: "p=5, k=3 unknown variance: unbiased + d S/|x|^2 with d = (2/(k+2))[p+(p-2)^2/(k+2)]",
                risk: Some(comparison(
                    settings,
                    EstimatorSpec::JsUnknownVar { k },
                    BaseSpec::UnbiasedUnknownVar,
                    fixed(-d, BaseSpec::UnbiasedUnknownVar),
                )),
                conditions: conditions(p, ConditionSpec::UnknownVar { gamma: inv_sq(-d), estimator: EstimatorSpec::JsUnknownVar { k } }),
            }
        }
        "mixture-t" => {
            let p = 6;
            let mixing = MixingSpec::student_t(6.0);
            let c = mixture_k(&mixing, p).expect("finite moments") * (p as f64 - 4.0);
            Preset {
                name: "mixture-t",
                summary: "p=6 multivariate t(6): E[R^2] - c/|x|^2 with c = k(p-4) from the mixing law",
                risk: Some(comparison(
                    vec![setting("t6", SamplerSpec::scale_mixture(p, mixing.clone()))],
                    EstimatorSpec::Mle,
                    BaseSpec::ConstantSpherical,
                    fixed(c, BaseSpec::ConstantSpherical),
                )),
                conditions: conditions(p, ConditionSpec::Mixture { gamma: inv_sq(c), mixing }),
            }
        }
        "residual-ls" => {
            let (p, k) = (6usize, 4usize);
            let d = 2.0 * (p as f64 - 4.0) / ((k as f64 + 4.0) * (k as f64 + 6.0));
            Preset {
                name: "residual-ls",
                summary: "p=6, k=4 residual vector, MLE: p|u|^2/k - d|u|^4/|x|^2, chi and fixed radius",
                risk: Some(comparison(residual_settings(p, k), EstimatorSpec::Mle, BaseSpec::ResidualLs, fixed(d, BaseSpec::ResidualLs))),
                conditions: conditions(p, ConditionSpec::ResidualLs { gamma: inv_sq(d), k }),
            }
        }
        "residual-js" => {
            let (p, k) = (6usize, 4usize);
            // The usual a = (p-2)/(k+2) leaves no d > 0; half the largest
            // shrinkage that does, with d at the midpoint of (0, -B].
            let a = residual_js_max_shrinkage(p, k) / 2.0;
            let d = -residual_js_bound(p, k, a) / 2.0;
            let g = VectorFieldSpec::JsShrinkage { c: a };
            Preset {
                name: "residual-js",
                summary: "p=6, k=4 residual shrinkage x - a|u|^2 x/|x|^2 (small a): unbiased - d|u|^4/|x|^2, d mid-range",
                risk: Some(comparison(
                    residual_settings(p, k),
                    EstimatorSpec::ResidualShrinkage { g: g.clone() },
                    BaseSpec::ResidualShrinkage,
                    fixed(d, BaseSpec::ResidualShrinkage),
                )),
                conditions: conditions(p, ConditionSpec::ResidualShrink { gamma: inv_sq(d), g, k }),
            }
        }
        "bayes-paradox-1d" => Preset {
            name: "bayes-paradox-1d",
            summary: "one normal observation, estimating theta^2: X^2+1 against X^2-1, risk gap 4",
            risk: Some(RiskConfig::Location1d(Location1dComparison {
                law: Location1d::Normal { sigma2: 1.0 },
                radii: default_radii(),
                n: DEFAULT_RISK_N,
                seed: None,
                assertion: Assertion::DiffEquals { value: None },
            })),
            conditions: None,
        },
        "thm21-js" => {
            let p = 5;
            let m = FieldSpec::NormPower { power: p as f64 - 2.0, scale: 1.0 };
            let xi = FieldSpec::NormPower { power: p as f64, scale: 1.0 };
            let alpha = 2.0 * p as f64;
            Preset {
                name: "thm21-js",
                summary: "p=5 James-Stein with xi = |x|^-p: K0 = 2p, admissible alpha in (0, 4p)",
                risk: Some(comparison(
                    vec![setting("normal", SamplerSpec::normal(p, 1.0))],
                    EstimatorSpec::JamesStein,
                    BaseSpec::SureKnownVar,
                    LossEstimatorSpec::corrected(BaseSpec::SureKnownVar, CorrectionSpec::SgnLaplacian { m: m.clone(), xi: xi.clone(), alpha }),
                )),
                conditions: conditions(p, ConditionSpec::Thm21 { m, xi }),
            }
        }
        _ => return None,
    })
}

pub fn all() -> Vec<Preset> {
    NAMES.iter().filter_map(|n| preset(n)).collect()
}
