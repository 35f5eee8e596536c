//! Experiment configurations and their runners. Runners return outcomes with
//! a `pass` verdict; the caller maps it onto the exit-code contract.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calculus::{FieldSpec, ScalarField, VectorFieldSpec};
use crate::domination::{
    alpha_range_thm21, check_known_var, check_mixture, check_prior_condition, check_residual_ls, check_residual_shrink,
    check_unknown_var, compute_k0, mixture_k, mixture_k_reciprocal, ConditionReport, GridSpec,
};
use crate::error::{Error, Result};
use crate::estimators::{log_gradient_field, EstimatorKind, EstimatorSpec};
use crate::loss_estimators::{theorem21_correction, BaseSpec, CorrectionSpec, Location1d, LossEstimatorSpec};
use crate::risk_engine::{
    accumulate, theta_sweep, Experiment, RiskReport, SpotCheck, Welford, DEFAULT_RISK_N, DEFAULT_SEED, SE_MULTIPLIER,
};
use crate::samplers::{replication_rng, SamplerKind, SamplerSpec};

pub fn default_radii() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 5.0, 10.0]
}

fn default_n() -> u64 {
    DEFAULT_RISK_N
}

/// What a risk comparison must show for exit code 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Assertion {
    #[default]
    None,
    /// Candidate risk minus baseline risk `≤ 4` paired SE at every row.
    Dominates,
    /// Paired difference within 4 paired SE of `value` at every row; the 1-D
    /// example defaults to `4 (E_0 X²)²`.
    DiffEquals { value: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub label: String,
    pub sampler: SamplerSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossComparison {
    pub settings: Vec<Setting>,
    pub estimator: EstimatorSpec,
    pub baseline: LossEstimatorSpec,
    pub candidates: Vec<LossEstimatorSpec>,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub assertion: Assertion,
}

/// Estimation of `θ²` from one observation: `X² + E_0X²` against `X² - E_0X²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location1dComparison {
    pub law: Location1d,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub assertion: Assertion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum RiskConfig {
    LossEstimation(LossComparison),
    Location1d(Location1dComparison),
}

#[derive(Debug, Clone, Default)]
pub struct RiskOverrides {
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub radii: Option<Vec<f64>>,
    /// Magnitude of every candidate's correction coefficient (sign kept).
    pub alpha: Option<f64>,
    pub assert: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionLine {
    pub setting: String,
    pub candidate: String,
    pub theta_norm: f64,
    pub diff_mean: f64,
    pub diff_se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskOutcome {
    pub rows: Vec<(String, RiskReport)>,
    pub spot_checks: Vec<(String, SpotCheck)>,
    pub assertions: Vec<AssertionLine>,
    pub warnings: Vec<String>,
}

impl RiskOutcome {
    pub fn pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub const CSV_HEADER_PREFIX: &'static str = "setting,";

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}{}", Self::CSV_HEADER_PREFIX, RiskReport::CSV_HEADER)?;
        for (s, r) in &self.rows {
            let s = if s.contains([',', '"']) { format!("\"{}\"", s.replace('"', "\"\"")) } else { s.clone() };
            writeln!(out, "{s},{}", r.csv_row())?;
        }
        Ok(())
    }
}

impl RiskConfig {
    pub fn apply(&mut self, o: &RiskOverrides) {
        let (n, seed, radii, assertion) = match self {
            RiskConfig::LossEstimation(c) => {
                if let Some(a) = o.alpha {
                    c.candidates.iter_mut().for_each(|d| set_alpha(d, a));
                }
                (&mut c.n, &mut c.seed, &mut c.radii, &mut c.assertion)
            }
            RiskConfig::Location1d(c) => (&mut c.n, &mut c.seed, &mut c.radii, &mut c.assertion),
        };
        if let Some(v) = o.n {
            *n = v;
        }
        if o.seed.is_some() {
            *seed = o.seed;
        }
        if let Some(r) = &o.radii {
            *radii = r.clone();
        }
        match o.assert {
            Some(false) => *assertion = Assertion::None,
            Some(true) if *assertion == Assertion::None => *assertion = Assertion::Dominates,
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, radii) = match self {
            RiskConfig::LossEstimation(c) => (c.n, &c.radii),
            RiskConfig::Location1d(c) => (c.n, &c.radii),
        };
        if n < 2 {
            return Err(Error::InvalidSpec("n must be at least 2".into()));
        }
        if radii.is_empty() {
            return Err(Error::EmptyInput("theta radii are empty".into()));
        }
        let RiskConfig::LossEstimation(c) = self else { return Ok(()) };
        if c.settings.is_empty() || c.candidates.is_empty() {
            return Err(Error::EmptyInput("need at least one setting and one candidate".into()));
        }
        for s in &c.settings {
            s.sampler.validate()?;
            let est = c.estimator.compile(s.sampler.p)?;
            for d in c.candidates.iter().chain(std::iter::once(&c.baseline)) {
                let residual = matches!(d.base, BaseSpec::ResidualLs | BaseSpec::ResidualShrinkage);
                if residual != (s.sampler.kind == SamplerKind::SphericalResidual) {
                    return Err(Error::InvalidSpec(format!(
                        "setting `{}`: residual loss estimators go with a spherical_residual sampler and only there",
                        s.label
                    )));
                }
                d.compile(&est, &s.sampler)?;
            }
        }
        Ok(())
    }

    pub fn run(&self, threads: Option<usize>) -> Result<RiskOutcome> {
        self.validate()?;
        match self {
            RiskConfig::LossEstimation(c) => run_loss(c, threads),
            RiskConfig::Location1d(c) => run_location(c, threads),
        }
    }
}

fn set_alpha(d: &mut LossEstimatorSpec, a: f64) {
    match &mut d.correction {
        Some(CorrectionSpec::Fixed { scale, .. }) => *scale = if *scale < 0.0 { -a } else { a },
        Some(CorrectionSpec::SgnLaplacian { alpha, .. }) => *alpha = a,
        None => {}
    }
}

fn judge(assertion: &Assertion, default_value: f64, setting: &str, r: &RiskReport) -> Option<AssertionLine> {
    let (m, se) = (r.paired_diff_mean?, r.paired_diff_se?);
    let pass = match assertion {
        Assertion::None => return None,
        Assertion::Dominates => m <= SE_MULTIPLIER * se,
        Assertion::DiffEquals { value } => (m - value.unwrap_or(default_value)).abs() <= SE_MULTIPLIER * se,
    };
    Some(AssertionLine {
        setting: setting.into(),
        candidate: r.loss_estimator.clone().unwrap_or_default(),
        theta_norm: r.theta_norm,
        diff_mean: m,
        diff_se: se,
        pass,
    })
}

fn run_loss(c: &LossComparison, threads: Option<usize>) -> Result<RiskOutcome> {
    let seed = c.seed.unwrap_or(DEFAULT_SEED);
    let mut out = RiskOutcome { rows: vec![], spot_checks: vec![], assertions: vec![], warnings: vec![] };
    for s in &c.settings {
        for cand in &c.candidates {
            let exp = Experiment {
                sampler: s.sampler.clone(),
                estimator: c.estimator.clone(),
                loss_estimator: Some(cand.clone()),
                baseline: Some(c.baseline.clone()),
                n: c.n,
                seed,
            };
            for w in exp.warnings() {
                if !out.warnings.contains(&w) {
                    out.warnings.push(w);
                }
            }
            let sweep = theta_sweep(&exp, &c.radii, threads)?;
            for r in sweep.rows {
                out.assertions.extend(judge(&c.assertion, 0.0, &s.label, &r));
                out.rows.push((s.label.clone(), r));
            }
            if let Some(sc) = sweep.spot_check {
                out.spot_checks.push((s.label.clone(), sc));
            }
        }
    }
    Ok(out)
}

fn run_location(c: &Location1dComparison, threads: Option<usize>) -> Result<RiskOutcome> {
    let seed = c.seed.unwrap_or(DEFAULT_SEED);
    let law = c.law;
    let m = law.second_moment();
    let setting = match law {
        Location1d::Normal { sigma2 } => format!("normal(sigma2={sigma2})"),
        Location1d::Laplace { scale } => format!("laplace(scale={scale})"),
    };
    let mut out = RiskOutcome { rows: vec![], spot_checks: vec![], assertions: vec![], warnings: vec![] };
    for &theta in &c.radii {
        let acc = accumulate(c.n, threads, |i, attempt| {
            let x = law.sample(&mut replication_rng(seed, i, attempt), theta);
            let t2 = theta * theta;
            let (a, b) = ((law.generalized_bayes(x) - t2).powi(2), (law.unbiased(x) - t2).powi(2));
            Ok([a, b, a - b])
        })?;
        let [a, b, d]: [Welford; 3] = acc.stats;
        let report = RiskReport {
            estimator: "theta_squared".into(),
            loss_estimator: Some("x2_plus_m".into()),
            baseline: Some("x2_minus_m".into()),
            theta: vec![theta],
            theta_norm: theta.abs(),
            mean: a.mean,
            std_error: a.std_error(),
            n: c.n,
            seed,
            baseline_mean: Some(b.mean),
            baseline_se: Some(b.std_error()),
            paired_diff_mean: Some(d.mean),
            paired_diff_se: Some(d.std_error()),
            unpaired_diff_se: Some((a.variance() / a.n as f64 + b.variance() / b.n as f64).sqrt()),
            rejections: acc.rejections,
            flags: vec![],
        };
        out.assertions.extend(judge(&c.assertion, 4.0 * m * m, &setting, &report));
        out.rows.push((setting.clone(), report));
    }
    Ok(out)
}

/// Differential inequality to check on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum ConditionSpec {
    /// `γ² + 4∇γᵗg + 2Δγ ≤ 0`, `g` the shift of a known-variance estimator.
    KnownVar { gamma: FieldSpec, estimator: EstimatorSpec },
    /// `K0 = inf m|Δξ|/ξ²`, the α range, and the known-variance check at `α = K0`.
    Thm21 { m: FieldSpec, xi: FieldSpec },
    UnknownVar { gamma: FieldSpec, estimator: EstimatorSpec },
    Mixture { gamma: FieldSpec, mixing: crate::samplers::MixingSpec },
    ResidualLs { gamma: FieldSpec, k: usize },
    ResidualShrink { gamma: FieldSpec, g: VectorFieldSpec, k: usize },
    Prior { pi: FieldSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    #[default]
    Pass,
    Fail,
    Either,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionConfig {
    pub p: usize,
    pub spec: ConditionSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub expect: Expectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionOutcome {
    pub constants: Vec<Constant>,
    pub report: ConditionReport,
    pub expect: Expectation,
}

impl ConditionOutcome {
    pub fn pass(&self) -> bool {
        match self.expect {
            Expectation::Pass => self.report.pass,
            Expectation::Fail => !self.report.pass,
            Expectation::Either => true,
        }
    }
}

fn constant(name: &str, value: f64) -> Constant {
    Constant { name: name.into(), value }
}

/// `(coefficient, power)` when `gamma` is `c / |x|^power`.
fn norm_power(gamma: &FieldSpec) -> Option<(f64, f64)> {
    match *gamma {
        FieldSpec::NormPower { power, scale } => Some((scale, power)),
        _ => None,
    }
}

impl ConditionConfig {
    pub fn run(&self) -> Result<ConditionOutcome> {
        let (p, grid) = (self.p, &self.grid);
        let pf = p as f64;
        grid.validate()?;
        let mut constants = Vec::new();
        let report = match &self.spec {
            ConditionSpec::KnownVar { gamma, estimator } => {
                let est = estimator.compile(p)?;
                let g = est
                    .known_var_shift()
                    .ok_or_else(|| Error::InvalidSpec("known_var needs a rule of the form x + g(x)".into()))?;
                if let Some((_, 2.0)) = norm_power(gamma) {
                    match estimator {
                        EstimatorSpec::Mle => constants.push(constant("alpha_bound", 4.0 * (pf - 4.0))),
                        EstimatorSpec::JamesStein => constants.push(constant("alpha_bound", 4.0 * pf)),
                        _ => {}
                    }
                }
                check_known_var(&gamma.build(p), &g, grid, p)?
            }
            ConditionSpec::Thm21 { m: ms, xi: xs } => {
                let (m, xi) = (ms.build(p), xs.build(p));
                let k0 = compute_k0(&m, &xi, grid, p)?;
                let range = alpha_range_thm21(&m, &xi, grid, p)?;
                constants.extend([constant("K0", k0), constant("alpha_lo", range.lo), constant("alpha_hi", range.hi)]);
                let gamma = thm21_gamma(ms, xs, &m, &xi, k0, p);
                check_known_var(&gamma, &log_gradient_field(&m), grid, p)?
            }
            ConditionSpec::UnknownVar { gamma, estimator } => {
                let est = estimator.compile(p)?;
                let EstimatorKind::VarianceScaled { g } = est.kind() else {
                    return Err(Error::InvalidSpec("unknown_var needs a variance-scaled estimator".into()));
                };
                if let EstimatorSpec::JsUnknownVar { k } = estimator {
                    let kf = *k as f64;
                    let bound = 4.0 / (kf + 2.0) * (pf + (pf - 2.0).powi(2) / (kf + 2.0));
                    constants.extend([constant("d_bound", bound), constant("d_half", bound / 2.0)]);
                }
                let k = match estimator {
                    EstimatorSpec::JsUnknownVar { k } => *k,
                    _ => return Err(Error::InvalidSpec("unknown_var needs js_unknown_var".into())),
                };
                check_unknown_var(&gamma.build(p), g, k, grid, p)?
            }
            ConditionSpec::Mixture { gamma, mixing } => {
                let k = mixture_k(mixing, p)?;
                constants.extend([
                    constant("k_const", k),
                    constant("k_reciprocal", mixture_k_reciprocal(mixing, p)?),
                    constant("c_bound", 2.0 * k * (pf - 4.0)),
                ]);
                check_mixture(&gamma.build(p), k, grid, p)?
            }
            ConditionSpec::ResidualLs { gamma, k } => {
                let kf = *k as f64;
                constants.push(constant("d_bound", 4.0 * (pf - 4.0) / ((kf + 4.0) * (kf + 6.0))));
                check_residual_ls(&gamma.build(p), *k, grid, p)?
            }
            ConditionSpec::ResidualShrink { gamma, g, k } => {
                if let VectorFieldSpec::JsShrinkage { c: a } = g {
                    constants.push(constant("B", residual_js_bound(p, *k, *a)));
                    constants.push(constant("d_max", (-residual_js_bound(p, *k, *a)).max(0.0)));
                    constants.push(constant("a_max", residual_js_max_shrinkage(p, *k)));
                }
                check_residual_shrink(&gamma.build(p), &g.build(p)?, *k, grid, p)?
            }
            ConditionSpec::Prior { pi } => check_prior_condition(&pi.build(p), grid, p)?,
        };
        Ok(ConditionOutcome { constants, report, expect: self.expect })
    }
}

/// `γ = -α sgn(Δξ) ξ/m` at `α = K0`; closed form when `ξ/m` is a power of `|x|`.
fn thm21_gamma(ms: &FieldSpec, xs: &FieldSpec, m: &ScalarField, xi: &ScalarField, alpha: f64, p: usize) -> ScalarField {
    let power = |f: &FieldSpec| match *f {
        FieldSpec::NormPower { power, scale } => Some((power, scale)),
        FieldSpec::Constant { c } => Some((0.0, c)),
        _ => None,
    };
    if let (Some((pm, sm)), Some((px, sx))) = (power(ms), power(xs)) {
        let mut e1 = vec![0.0; p];
        e1[0] = 1.0;
        if let Ok(lap) = xi.laplacian(&e1) {
            let scale = -alpha * lap.signum() * sx / sm;
            return FieldSpec::NormPower { power: px - pm, scale }.build(p);
        }
    }
    let (mm, xx) = (m.clone(), xi.clone());
    ScalarField::new("thm21_gamma", move |x| theorem21_correction(&mm, &xx, alpha, x).unwrap_or(f64::NAN))
}

/// For `g = -a x/|x|²` and `γ = d/|x|²` the residual-shrinkage condition is
/// `d (d + B) ≤ 0` with this `B`. With `γ ≥ 0` required, some `d > 0` is
/// admissible (namely `(0, -B]`) only when `B < 0`.
pub fn residual_js_bound(p: usize, k: usize, a: f64) -> f64 {
    let (pf, kf) = (p as f64, k as f64);
    4.0 * a * (pf - 2.0) / (kf + 2.0) - 4.0 * a * (pf - 4.0) / (kf + 6.0) - 4.0 * (pf - 4.0) / ((kf + 4.0) * (kf + 6.0))
}

/// The shrinkage `a` at which `B` changes sign; `B < 0` for `a` below it.
pub fn residual_js_max_shrinkage(p: usize, k: usize) -> f64 {
    let b0 = -residual_js_bound(p, k, 0.0);
    b0 / (residual_js_bound(p, k, 1.0) + b0)
}

/// Identity verifications to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityConfig {
    #[serde(default)]
    pub identities: Vec<String>,
    #[serde(default = "default_identity_n")]
    pub n: u64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_identity_n() -> u64 {
    crate::risk_engine::DEFAULT_IDENTITY_N
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self { identities: vec![], n: default_identity_n(), seed: None }
    }
}

/// Model-selection options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectConfig {
    #[serde(default = "default_response")]
    pub response: String,
    #[serde(default)]
    pub intercept: bool,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma2_hat: Option<f64>,
}

fn default_response() -> String {
    "y".into()
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self { response: default_response(), intercept: false, lambdas: None, sigma2_hat: None }
    }
}
