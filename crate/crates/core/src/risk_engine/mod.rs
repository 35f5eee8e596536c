//! Monte Carlo risks, paired risk differences on common random numbers,
//! θ-sweeps and identity verification.

mod accumulate;
pub mod identities;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use accumulate::{accumulate, Accumulated, Welford, CHUNK, MAX_ATTEMPTS};
pub use identities::{
    corollary_a_quadratic, sphere_projection_moment, verify_corollary_a, verify_lemma_a1_i, verify_lemma_a1_ii,
    verify_lemma_a5, verify_stein_identity, Control, IdentityReport, SFunction,
};

use crate::calculus::{norm, FieldSpec, VectorFieldSpec};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, EstimatorSpec};
use crate::loss_estimators::{BaseSpec, CorrectionSpec, LossEstimator, LossEstimatorSpec, TargetLoss};
use crate::samplers::{Observation, SamplerKind, SamplerSpec};

pub const DEFAULT_RISK_N: u64 = 200_000;
pub const DEFAULT_IDENTITY_N: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 42;
/// Agreement tolerance in standard errors.
pub const SE_MULTIPLIER: f64 = 4.0;
/// Relative standard error above which a report is flagged.
pub const HIGH_REL_SE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n: u64,
    pub seed: u64,
    /// `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl McConfig {
    pub fn new(n: u64, seed: u64) -> Self {
        Self { n, seed, threads: None }
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self::new(DEFAULT_RISK_N, DEFAULT_SEED)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub estimator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_estimator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    pub theta: Vec<f64>,
    pub theta_norm: f64,
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_se: Option<f64>,
    /// Mean of `loss(A) - loss(B)` on common draws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paired_diff_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paired_diff_se: Option<f64>,
    /// SE the difference would have with independent draws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unpaired_diff_se: Option<f64>,
    pub rejections: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl RiskReport {
    fn single(estimator: &str, loss_estimator: Option<&str>, theta: &[f64], cfg: &McConfig, w: &Welford, rejections: u64) -> Self {
        let mut r = RiskReport {
            estimator: estimator.into(),
            loss_estimator: loss_estimator.map(Into::into),
            baseline: None,
            theta: theta.to_vec(),
            theta_norm: norm(theta),
            mean: w.mean,
            std_error: w.std_error(),
            n: cfg.n,
            seed: cfg.seed,
            baseline_mean: None,
            baseline_se: None,
            paired_diff_mean: None,
            paired_diff_se: None,
            unpaired_diff_se: None,
            rejections,
            flags: Vec::new(),
        };
        r.flag_precision("mean", w);
        r
    }

    fn flag_precision(&mut self, what: &str, w: &Welford) {
        let se = w.std_error();
        if w.mean != 0.0 && se / w.mean.abs() > HIGH_REL_SE {
            self.flags.push(format!("relative SE of {what} exceeds {}%", HIGH_REL_SE * 100.0));
        }
    }

    pub fn is_paired(&self) -> bool {
        self.paired_diff_mean.is_some()
    }

    /// Whether the mean is within `SE_MULTIPLIER` standard errors of `target`.
    pub fn mean_agrees(&self, target: f64) -> bool {
        (self.mean - target).abs() <= SE_MULTIPLIER * self.std_error
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub const CSV_HEADER: &'static str =
        "theta_norm,estimator,loss_estimator,mean,se,n,seed,baseline,baseline_mean,baseline_se,paired_diff_mean,paired_diff_se,unpaired_diff_se,rejections";

    pub fn csv_row(&self) -> String {
        let f = |v: f64| format!("{v:.16e}");
        let o = |v: Option<f64>| v.map(f).unwrap_or_default();
        let q = |s: &str| if s.contains([',', '"']) { format!("\"{}\"", s.replace('"', "\"\"")) } else { s.to_string() };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f(self.theta_norm),
            q(&self.estimator),
            q(self.loss_estimator.as_deref().unwrap_or("")),
            f(self.mean),
            f(self.std_error),
            self.n,
            self.seed,
            q(self.baseline.as_deref().unwrap_or("")),
            o(self.baseline_mean),
            o(self.baseline_se),
            o(self.paired_diff_mean),
            o(self.paired_diff_se),
            o(self.unpaired_diff_se),
            self.rejections,
        )
    }
}

pub fn write_csv<W: Write>(mut out: W, rows: &[RiskReport]) -> Result<()> {
    writeln!(out, "{}", RiskReport::CSV_HEADER)?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Paired summary of two per-draw statistics `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Paired {
    pub a: Welford,
    pub b: Welford,
    pub diff: Welford,
    pub rejections: u64,
}

impl Paired {
    pub fn unpaired_se(&self) -> f64 {
        (self.a.variance() / self.a.n as f64 + self.b.variance() / self.b.n as f64).sqrt()
    }

    /// Whether `mean(a - b)` is within `SE_MULTIPLIER` paired SEs of `target`.
    pub fn diff_agrees(&self, target: f64) -> bool {
        (self.diff.mean - target).abs() <= SE_MULTIPLIER * self.diff.std_error()
    }
}

/// Evaluates two statistics on every draw of `sampler` at `theta`.
pub fn paired_statistic<F>(sampler: &SamplerSpec, theta: &[f64], cfg: &McConfig, f: F) -> Result<Paired>
where
    F: Fn(&Observation) -> Result<[f64; 2]> + Sync,
{
    let sampler = located(sampler, theta)?;
    let acc = accumulate(cfg.n, cfg.threads, |i, attempt| {
        let obs = sampler.draw_replication(cfg.seed, i, attempt);
        let [a, b] = f(&obs)?;
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::ShrinkageSingularity);
        }
        Ok([a, b, a - b])
    })?;
    let [a, b, diff] = acc.stats;
    Ok(Paired { a, b, diff, rejections: acc.rejections })
}

fn located(sampler: &SamplerSpec, theta: &[f64]) -> Result<SamplerSpec> {
    let s = sampler.clone().with_theta(theta.to_vec());
    s.validate()?;
    Ok(s)
}

/// Loss used to score a point estimate: invariant `|φ-θ|²/σ²` when the
/// variance is estimated, quadratic otherwise.
pub fn point_loss_target(sampler: &SamplerSpec) -> TargetLoss {
    if sampler.kind == SamplerKind::Normal && sampler.k > 0 {
        TargetLoss::Invariant { sigma2: sampler.sigma2 }
    } else {
        TargetLoss::Quadratic
    }
}

/// `E_θ[L(θ, φ(X))]`.
pub fn mc_point_risk(est: &EstimatorSpec, sampler: &SamplerSpec, theta: &[f64], cfg: &McConfig) -> Result<RiskReport> {
    let estimator = est.compile(sampler.p)?;
    let sampler = located(sampler, theta)?;
    let target = point_loss_target(&sampler);
    let acc = accumulate(cfg.n, cfg.threads, |i, attempt| {
        let obs = sampler.draw_replication(cfg.seed, i, attempt);
        Ok([target.evaluate(&estimator.estimate(&obs)?, theta)?])
    })?;
    Ok(RiskReport::single(estimator.label(), None, theta, cfg, &acc.stats[0], acc.rejections))
}

fn loss_error(delta: &LossEstimator, estimator: &Estimator, obs: &Observation, theta: &[f64]) -> Result<f64> {
    let loss = delta.target().evaluate(&estimator.estimate(obs)?, theta)?;
    let d = delta.evaluate(obs)? - loss;
    Ok(d * d)
}

/// `E_θ[(δ(X) - L(θ, φ(X)))²]`.
pub fn mc_loss_estimator_risk(
    delta: &LossEstimatorSpec,
    est: &EstimatorSpec,
    sampler: &SamplerSpec,
    theta: &[f64],
    cfg: &McConfig,
) -> Result<RiskReport> {
    let estimator = est.compile(sampler.p)?;
    let sampler = located(sampler, theta)?;
    let le = delta.compile(&estimator, &sampler)?;
    let acc = accumulate(cfg.n, cfg.threads, |i, attempt| {
        let obs = sampler.draw_replication(cfg.seed, i, attempt);
        Ok([loss_error(&le, &estimator, &obs, theta)?])
    })?;
    let mut r = RiskReport::single(estimator.label(), Some(le.label()), theta, cfg, &acc.stats[0], acc.rejections);
    r.flags.extend(finiteness_warnings(est, Some(delta), &sampler));
    Ok(r)
}

/// Risk of `delta_a` minus risk of `delta_b` on common draws.
pub fn mc_risk_difference(
    delta_a: &LossEstimatorSpec,
    delta_b: &LossEstimatorSpec,
    est: &EstimatorSpec,
    sampler: &SamplerSpec,
    theta: &[f64],
    cfg: &McConfig,
) -> Result<RiskReport> {
    let estimator = est.compile(sampler.p)?;
    let sampler = located(sampler, theta)?;
    let (a, b) = (delta_a.compile(&estimator, &sampler)?, delta_b.compile(&estimator, &sampler)?);
    let pair = paired_statistic(&sampler, theta, cfg, |obs| {
        let loss = a.target().evaluate(&estimator.estimate(obs)?, theta)?;
        let (ea, eb) = (a.evaluate(obs)? - loss, b.evaluate(obs)? - loss);
        Ok([ea * ea, eb * eb])
    })?;
    let mut r = RiskReport::single(estimator.label(), Some(a.label()), theta, cfg, &pair.a, pair.rejections);
    r.baseline = Some(b.label().into());
    r.baseline_mean = Some(pair.b.mean);
    r.baseline_se = Some(pair.b.std_error());
    r.paired_diff_mean = Some(pair.diff.mean);
    r.paired_diff_se = Some(pair.diff.std_error());
    r.unpaired_diff_se = Some(pair.unpaired_se());
    r.flags.extend(finiteness_warnings(est, Some(delta_a), &sampler));
    r.flags.extend(finiteness_warnings(est, Some(delta_b), &sampler));
    r.flags.dedup();
    Ok(r)
}

fn default_n() -> u64 {
    DEFAULT_RISK_N
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// A complete risk experiment: what to measure under which law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub sampler: SamplerSpec,
    pub estimator: EstimatorSpec,
    /// Absent: the point risk of the estimator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_estimator: Option<LossEstimatorSpec>,
    /// Present: paired comparison against this loss estimator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<LossEstimatorSpec>,
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Experiment {
    pub fn config(&self, threads: Option<usize>) -> McConfig {
        McConfig { n: self.n, seed: self.seed, threads }
    }

    pub fn run_at(&self, theta: &[f64], threads: Option<usize>) -> Result<RiskReport> {
        let cfg = self.config(threads);
        match (&self.loss_estimator, &self.baseline) {
            (None, None) => mc_point_risk(&self.estimator, &self.sampler, theta, &cfg),
            (Some(d), None) => mc_loss_estimator_risk(d, &self.estimator, &self.sampler, theta, &cfg),
            (Some(a), Some(b)) => mc_risk_difference(a, b, &self.estimator, &self.sampler, theta, &cfg),
            (None, Some(_)) => Err(Error::InvalidSpec("a baseline needs a loss_estimator to compare".into())),
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = finiteness_warnings(&self.estimator, self.loss_estimator.as_ref(), &self.sampler);
        if let Some(b) = &self.baseline {
            w.extend(finiteness_warnings(&self.estimator, Some(b), &self.sampler));
        }
        w.dedup();
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub radius: f64,
    pub axis: RiskReport,
    pub rotated: RiskReport,
    /// Combined-SE distance between the two reports.
    pub z: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<RiskReport>,
    pub spot_check: Option<SpotCheck>,
}

/// Headline statistic of a report: the paired difference when present.
fn headline(r: &RiskReport) -> (f64, f64) {
    match (r.paired_diff_mean, r.paired_diff_se) {
        (Some(m), Some(s)) => (m, s),
        _ => (r.mean, r.std_error),
    }
}

/// One report per `θ = r e₁`, plus a spot check at the largest positive
/// radius against `θ = r (1,…,1)/√p` on an independent seed.
pub fn theta_sweep(exp: &Experiment, radii: &[f64], threads: Option<usize>) -> Result<Sweep> {
    if radii.is_empty() {
        return Err(Error::EmptyInput("theta sweep needs at least one radius".into()));
    }
    if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::InvalidSpec(format!("radii must be finite and non-negative, got {r}")));
    }
    let p = exp.sampler.p;
    let axis = |r: f64| {
        let mut t = vec![0.0; p];
        t[0] = r;
        t
    };
    let rows = radii.iter().map(|&r| exp.run_at(&axis(r), threads)).collect::<Result<Vec<_>>>()?;
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let spot_check = if r_max > 0.0 && p > 1 {
        let i = radii.iter().position(|&r| r == r_max).expect("present");
        let rotated_exp = Experiment { seed: exp.seed ^ 0x005E_ED0F_F5E7, ..exp.clone() };
        let rotated = rotated_exp.run_at(&vec![r_max / (p as f64).sqrt(); p], threads)?;
        let ((m1, s1), (m2, s2)) = (headline(&rows[i]), headline(&rotated));
        let z = (m1 - m2).abs() / (s1 * s1 + s2 * s2).sqrt();
        Some(SpotCheck { radius: r_max, axis: rows[i].clone(), rotated, z, agrees: !(z > SE_MULTIPLIER) })
    } else {
        None
    };
    Ok(Sweep { rows, spot_check })
}

/// Order `a` of a singularity `|x|^{-a}` at the origin, 0 if none.
fn field_order(spec: &FieldSpec, p: usize) -> f64 {
    let rp = spec.profile(p);
    if rp.scale == 0.0 || rp.shift != 0.0 {
        0.0
    } else {
        (2.0 * rp.power).max(0.0)
    }
}

fn shift_order(spec: &VectorFieldSpec, p: usize) -> f64 {
    match spec {
        VectorFieldSpec::JsShrinkage { c } if *c != 0.0 => 1.0,
        VectorFieldSpec::LogGradient { m } => {
            let rp = m.profile(p);
            if rp.shift == 0.0 && rp.power != 0.0 {
                1.0
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

fn estimator_order(est: &EstimatorSpec, p: usize) -> f64 {
    match est {
        EstimatorSpec::Mle => 0.0,
        EstimatorSpec::JamesStein | EstimatorSpec::JsUnknownVar { .. } => 1.0,
        EstimatorSpec::PseudoBayes { m } => shift_order(&VectorFieldSpec::LogGradient { m: m.clone() }, p),
        EstimatorSpec::ResidualShrinkage { g } | EstimatorSpec::Shift { g } => shift_order(g, p),
    }
}

/// Heuristic moment checks; never errors.
///
/// A loss estimate containing `|x|^{-a}` has a finite second moment only when
/// `E|X|^{-2a} < ∞`, i.e. `p > 2a` near a normal-like density at the origin.
pub fn finiteness_warnings(est: &EstimatorSpec, delta: Option<&LossEstimatorSpec>, sampler: &SamplerSpec) -> Vec<String> {
    let p = sampler.p;
    let pf = p as f64;
    let mut out = Vec::new();
    let shrink = estimator_order(est, p);
    if shrink > 0.0 && pf <= 2.0 * shrink {
        out.push(format!("shrinkage of order |x|^-{shrink} may give infinite risk at p = {p}"));
    }
    if let Some(delta) = delta {
        // Divergence and squared norm of a |x|^-1 shift are of order |x|^-2.
        let base = match &delta.base {
            BaseSpec::SureKnownVar | BaseSpec::UnbiasedUnknownVar | BaseSpec::ResidualShrinkage => 2.0 * shrink,
            BaseSpec::PosteriorRisk { m } => field_order(m, p).min(2.0),
            _ => 0.0,
        };
        if base > 0.0 && pf <= 2.0 * base {
            out.push(format!("second moment of the unbiased estimate may be infinite at p = {p}"));
        }
        let corr = match &delta.correction {
            Some(CorrectionSpec::Fixed { gamma, scale }) if *scale != 0.0 => field_order(gamma, p),
            Some(CorrectionSpec::SgnLaplacian { m, xi, alpha }) if *alpha != 0.0 => {
                (field_order(xi, p) - field_order(m, p)).max(0.0)
            }
            _ => 0.0,
        };
        if corr > 0.0 && pf <= 2.0 * corr {
            out.push(format!("second moment of correction may be infinite at p = {p}"));
        }
        // (δ - L)² carries |x|^{-2 order}; its variance needs p > 4 order.
        let order = base.max(corr);
        if order > 0.0 && pf > 2.0 * order && pf <= 4.0 * order {
            out.push(format!(
                "squared loss-estimate error has infinite variance at p = {p}: Monte Carlo standard errors are unreliable"
            ));
        }
    }
    let heavy = match (sampler.kind, &sampler.mixing, &sampler.radial) {
        (SamplerKind::ScaleMixture, Some(m), _) => m.moment(-2.0).is_none(),
        (SamplerKind::RadialSpherical | SamplerKind::SphericalResidual, _, Some(r)) => {
            r.moment(4.0, sampler.sphere_dim()).is_none()
        }
        _ => false,
    };
    if heavy && delta.is_some() {
        out.push("sampling law has an infinite fourth moment: the risk of a loss estimate may be infinite".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::RadialSpec;

    fn cfg(n: u64) -> McConfig {
        McConfig::new(n, 7)
    }

    fn origin(p: usize) -> Vec<f64> {
        vec![0.0; p]
    }

    #[test]
    fn mle_and_js_point_risks() {
        let s = SamplerSpec::normal(5, 1.0);
        let mle = mc_point_risk(&EstimatorSpec::Mle, &s, &origin(5), &cfg(100_000)).unwrap();
        assert!(mle.mean_agrees(5.0), "{mle:?}");
        let js = mc_point_risk(&EstimatorSpec::JamesStein, &s, &origin(5), &cfg(100_000)).unwrap();
        assert!(js.mean_agrees(2.0), "{js:?}");
        assert!(!mle.is_paired());
    }

    #[test]
    fn residual_ls_point_risk_is_projection_moment() {
        let (p, k, r) = (4usize, 6usize, 3.0);
        let s = SamplerSpec::spherical_residual(p, k, RadialSpec::Fixed { r });
        let rep = mc_point_risk(&EstimatorSpec::Mle, &s, &origin(p), &cfg(50_000)).unwrap();
        let exact = p as f64 * r * r / (p + k) as f64;
        assert!(rep.mean_agrees(exact), "{rep:?} vs {exact}");
    }

    #[test]
    fn constant_loss_estimate_under_mle() {
        let s = SamplerSpec::normal(5, 1.0);
        let d = LossEstimatorSpec::unbiased(BaseSpec::ConstantSpherical);
        let rep = mc_loss_estimator_risk(&d, &EstimatorSpec::Mle, &s, &origin(5), &cfg(200_000)).unwrap();
        assert!(rep.mean_agrees(10.0), "{rep:?}");
    }

    #[test]
    fn identical_loss_estimates_have_zero_difference() {
        let s = SamplerSpec::normal(5, 1.0);
        let d = LossEstimatorSpec::unbiased(BaseSpec::SureKnownVar);
        let rep = mc_risk_difference(&d, &d, &EstimatorSpec::JamesStein, &s, &origin(5), &cfg(10_000)).unwrap();
        assert_eq!(rep.paired_diff_mean, Some(0.0));
        assert_eq!(rep.paired_diff_se, Some(0.0));
    }

    fn johnstone_mle(p: usize) -> LossEstimatorSpec {
        LossEstimatorSpec::corrected(
            BaseSpec::ConstantSpherical,
            CorrectionSpec::Fixed { gamma: FieldSpec::NormPower { power: 2.0, scale: 1.0 }, scale: 2.0 * (p as f64 - 4.0) },
        )
    }

    #[test]
    fn johnstone_mle_difference_and_pairing() {
        // p = 10 keeps the variance of the paired difference finite.
        let p = 10;
        let s = SamplerSpec::normal(p, 1.0);
        let base = LossEstimatorSpec::unbiased(BaseSpec::ConstantSpherical);
        let mut theta = vec![0.0; p];
        theta[0] = 1.0;
        let c = cfg(200_000);
        let rep = mc_risk_difference(&johnstone_mle(p), &base, &EstimatorSpec::Mle, &s, &theta, &c).unwrap();
        let inv4 = paired_statistic(&s, &theta, &c, |o| {
            let r2 = crate::calculus::norm_sq(&o.x);
            Ok([1.0 / (r2 * r2), 0.0])
        })
        .unwrap();
        let target = -4.0 * ((p - 4) as f64).powi(2) * inv4.a.mean;
        let (m, se) = (rep.paired_diff_mean.unwrap(), rep.paired_diff_se.unwrap());
        assert!((m - target).abs() <= SE_MULTIPLIER * se, "{rep:?} vs {target}");
        assert!(m < 0.0);
        assert!(se <= rep.unpaired_diff_se.unwrap());
    }

    #[test]
    fn reports_are_bitwise_reproducible() {
        let s = SamplerSpec::normal(5, 1.0);
        let d = LossEstimatorSpec::unbiased(BaseSpec::SureKnownVar);
        let run = |t| {
            mc_loss_estimator_risk(&d, &EstimatorSpec::JamesStein, &s, &origin(5), &cfg(20_000).with_threads(t)).unwrap()
        };
        assert_eq!(run(Some(1)), run(Some(3)));
        assert_eq!(run(None).csv_row(), run(Some(2)).csv_row());
    }

    #[test]
    fn sweep_rows_spot_check_and_empty_radii() {
        let exp = Experiment {
            sampler: SamplerSpec::normal(5, 1.0),
            estimator: EstimatorSpec::JamesStein,
            loss_estimator: None,
            baseline: None,
            n: 20_000,
            seed: 3,
        };
        let sweep = theta_sweep(&exp, &[0.0, 1.0, 2.0, 5.0, 10.0], None).unwrap();
        assert_eq!(sweep.rows.len(), 5);
        let spot = sweep.spot_check.unwrap();
        assert!(spot.agrees, "{spot:?}");
        assert_eq!(spot.radius, 10.0);
        assert!(theta_sweep(&exp, &[], None).is_err());
        let mut buf = Vec::new();
        write_csv(&mut buf, &sweep.rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
    }

    #[test]
    fn warnings_follow_dimension() {
        let gamma = |p: usize| {
            let d = LossEstimatorSpec::corrected(
                BaseSpec::ConstantSpherical,
                CorrectionSpec::Fixed { gamma: FieldSpec::NormPower { power: 2.0, scale: 1.0 }, scale: 1.0 },
            );
            finiteness_warnings(&EstimatorSpec::Mle, Some(&d), &SamplerSpec::normal(p, 1.0))
        };
        assert!(gamma(4).iter().any(|w| w.contains("second moment of correction may be infinite")));
        assert!(gamma(6).iter().any(|w| w.contains("standard errors are unreliable")));
        assert!(gamma(9).is_empty());
        let zero = LossEstimatorSpec::unbiased(BaseSpec::SureKnownVar);
        let g0 = EstimatorSpec::Shift { g: VectorFieldSpec::Zero };
        assert!(finiteness_warnings(&g0, Some(&zero), &SamplerSpec::normal(3, 1.0)).is_empty());
        let js = finiteness_warnings(&EstimatorSpec::JamesStein, Some(&zero), &SamplerSpec::normal(4, 1.0));
        assert!(!js.is_empty());
    }
}
