//! Losses and estimators of loss.
//!
//! A loss estimator is a base `δ0` (unbiased for the loss of the estimator it
//! accompanies) optionally corrected to `δ0 - w γ`, where the weight `w` is
//! `1` with known scale, `S` with an estimated variance and `|U|^4` with a
//! residual vector.

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calculus::{norm_sq, FieldSpec, JointField, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, EstimatorKind};
use crate::samplers::{Observation, RadialSpec, SamplerKind, SamplerSpec};

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: b.len(), got: a.len() });
    }
    Ok(())
}

pub fn quadratic_loss(phi: &[f64], theta: &[f64]) -> Result<f64> {
    check_dims(phi, theta)?;
    Ok(phi.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// `|φ - θ|^2 / σ^2`.
pub fn invariant_loss(phi: &[f64], theta: &[f64], sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::DomainError(format!("sigma2 must be positive, got {sigma2}")));
    }
    Ok(quadratic_loss(phi, theta)? / sigma2)
}

/// Squared error of a loss estimate.
pub fn loss_estimation_loss(delta: f64, loss: f64) -> f64 {
    (delta - loss) * (delta - loss)
}

/// `L/δ - log(L/δ) - 1`.
pub fn stein_type_loss(delta: f64, loss: f64) -> Result<f64> {
    if !(delta > 0.0 && loss > 0.0) {
        return Err(Error::DomainError(format!(
            "Stein-type loss needs positive arguments, got delta={delta}, loss={loss}"
        )));
    }
    let r = loss / delta;
    Ok(r - r.ln() - 1.0)
}

fn off_singularity(singular: crate::calculus::SingularSet, x: &[f64]) -> Result<()> {
    if singular.contains(x) {
        Err(Error::ShrinkageSingularity)
    } else {
        Ok(())
    }
}

/// `p + 2 div g(x) + |g(x)|^2` for `φ = x + g(x)` under `N(θ, I)`.
pub fn sure_known_var(g: &VectorField, x: &[f64]) -> Result<f64> {
    off_singularity(g.singular_set(), x)?;
    Ok(x.len() as f64 + 2.0 * g.divergence(x)? + norm_sq(&g.value(x)))
}

/// `p + s {(k+2)|g|^2 + 2 div_x g + 2 s ∂_s |g|^2}` for `φ = x + s g(x, s)`.
pub fn unbiased_loss_unknown_var(g: &JointField, x: &[f64], s: f64, k: usize) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::DomainError(format!("variance statistic must be positive, got {s}")));
    }
    off_singularity(g.singular_set(), x)?;
    let g2 = norm_sq(&g.value(x, s));
    let bracket = (k as f64 + 2.0) * g2 + 2.0 * g.divergence_x(x, s)? + 2.0 * s * g.ds_norm_sq(x, s)?;
    Ok(x.len() as f64 + s * bracket)
}

fn marginal_terms(m: &ScalarField, x: &[f64]) -> Result<(f64, f64)> {
    let mx = m.value(x);
    if !(mx > 0.0) {
        return Err(Error::InvalidMarginal(mx));
    }
    off_singularity(m.singular_set(), x)?;
    Ok((m.laplacian(x)? / mx, norm_sq(&m.gradient(x)?) / (mx * mx)))
}

/// Posterior risk of `x + grad m / m`: `p + lap m / m - |grad m|^2 / m^2`.
pub fn posterior_risk(m: &ScalarField, x: &[f64]) -> Result<f64> {
    let (lap, grad2) = marginal_terms(m, x)?;
    Ok(x.len() as f64 + lap - grad2)
}

/// Unbiased risk estimate of `x + grad m / m`: `p + 2 lap m / m - |grad m|^2 / m^2`.
pub fn unbiased_risk_bayes(m: &ScalarField, x: &[f64]) -> Result<f64> {
    let (lap, grad2) = marginal_terms(m, x)?;
    Ok(x.len() as f64 + 2.0 * lap - grad2)
}

/// `γ(x) = -α sgn(lap ξ(x)) ξ(x) / m(x)`.
pub fn theorem21_correction(m: &ScalarField, xi: &ScalarField, alpha: f64, x: &[f64]) -> Result<f64> {
    let mx = m.value(x);
    if mx == 0.0 || !mx.is_finite() {
        return Err(Error::InvalidMarginal(mx));
    }
    off_singularity(xi.singular_set(), x)?;
    let lap = xi.laplacian(x)?;
    let sign = if lap > 0.0 {
        1.0
    } else if lap < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok(-alpha * sign * xi.value(x) / mx)
}

/// `p |u|^2 / k`.
pub fn residual_unbiased_ls(u: &[f64], p: usize, k: usize) -> Result<f64> {
    if k == 0 || u.len() != k {
        return Err(Error::DimensionMismatch { expected: k.max(1), got: u.len() });
    }
    Ok(p as f64 * norm_sq(u) / k as f64)
}

/// `(p/k)|u|^2 + (|g(x)|^2 + (2/(k+2)) div g(x)) |u|^4` for `φ = x + |u|^2 g(x)`.
pub fn residual_unbiased_shrink(g: &VectorField, x: &[f64], u: &[f64], p: usize, k: usize) -> Result<f64> {
    let base = residual_unbiased_ls(u, p, k)?;
    check_dims(x, &vec![0.0; p])?;
    off_singularity(g.singular_set(), x)?;
    let u2 = norm_sq(u);
    let bracket = norm_sq(&g.value(x)) + 2.0 / (k as f64 + 2.0) * g.divergence(x)?;
    Ok(base + bracket * u2 * u2)
}

/// `E[R^2]` for a radius on a sphere of dimension `dim`.
pub fn constant_spherical_unbiased(radial: &RadialSpec, dim: usize) -> Result<f64> {
    radial.validate()?;
    radial
        .moment(2.0, dim)
        .ok_or_else(|| Error::DomainError(format!("radial law {radial:?} has no finite second moment")))
}

pub fn apply_correction(base: f64, gamma_value: f64, multiplier: f64) -> f64 {
    base - multiplier * gamma_value
}

pub fn positive_part(delta: f64) -> f64 {
    delta.max(0.0)
}

/// Correction term `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CorrectionSpec {
    /// `γ = scale * gamma(x)`.
    Fixed { gamma: FieldSpec, scale: f64 },
    /// `γ = -α sgn(lap ξ) ξ / m`.
    SgnLaplacian { m: FieldSpec, xi: FieldSpec, alpha: f64 },
}

impl CorrectionSpec {
    pub fn label(&self) -> String {
        match self {
            CorrectionSpec::Fixed { gamma, scale } => format!("{scale}*{}", gamma.label()),
            CorrectionSpec::SgnLaplacian { m, xi, alpha } => {
                format!("sgn_laplacian(m={},xi={},alpha={alpha})", m.label(), xi.label())
            }
        }
    }

    pub fn compile(&self, p: usize) -> Correction {
        match self {
            CorrectionSpec::Fixed { gamma, scale } => Correction::Fixed { gamma: gamma.build(p), scale: *scale },
            CorrectionSpec::SgnLaplacian { m, xi, alpha } => Correction::SgnLaplacian {
                m: m.build(p),
                xi: xi.build(p),
                alpha: *alpha,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub enum Correction {
    Fixed { gamma: ScalarField, scale: f64 },
    SgnLaplacian { m: ScalarField, xi: ScalarField, alpha: f64 },
}

impl Correction {
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            Correction::Fixed { gamma, scale } => {
                off_singularity(gamma.singular_set(), x)?;
                Ok(scale * gamma.value(x))
            }
            Correction::SgnLaplacian { m, xi, alpha } => theorem21_correction(m, xi, *alpha, x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseSpec {
    SureKnownVar,
    UnbiasedUnknownVar,
    ConstantSpherical,
    ResidualLs,
    ResidualShrinkage,
    PosteriorRisk { m: FieldSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossEstimatorSpec {
    pub base: BaseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction: Option<CorrectionSpec>,
    #[serde(default)]
    pub positive_part: bool,
}

impl LossEstimatorSpec {
    pub fn unbiased(base: BaseSpec) -> Self {
        Self { base, correction: None, positive_part: false }
    }

    pub fn corrected(base: BaseSpec, correction: CorrectionSpec) -> Self {
        Self { base, correction: Some(correction), positive_part: false }
    }

    pub fn with_positive_part(mut self) -> Self {
        self.positive_part = true;
        self
    }

    pub fn label(&self) -> String {
        let base = match &self.base {
            BaseSpec::SureKnownVar => "sure".to_string(),
            BaseSpec::UnbiasedUnknownVar => "unbiased_unknown_var".into(),
            BaseSpec::ConstantSpherical => "constant".into(),
            BaseSpec::ResidualLs => "residual_ls".into(),
            BaseSpec::ResidualShrinkage => "residual_shrinkage".into(),
            BaseSpec::PosteriorRisk { m } => format!("posterior_risk({})", m.label()),
        };
        let mut out = match &self.correction {
            Some(c) => format!("{base}-[{}]", c.label()),
            None => base,
        };
        if self.positive_part {
            out = format!("({out})+");
        }
        out
    }

    /// Binds the base to the estimator whose loss is being estimated.
    pub fn compile(&self, estimator: &Estimator, sampler: &SamplerSpec) -> Result<LossEstimator> {
        let p = sampler.p;
        let mismatch = |what: &str| {
            Err(Error::InvalidSpec(format!(
                "{what} does not fit estimator `{}` under a {:?} sampler",
                self.label(),
                sampler.kind
            )))
        };
        let base = match (&self.base, estimator.kind()) {
            (BaseSpec::SureKnownVar, _) => match estimator.known_var_shift() {
                Some(g) => Base::Sure { g },
                None => return mismatch("sure_known_var"),
            },
            (BaseSpec::UnbiasedUnknownVar, kind) => {
                if sampler.kind != SamplerKind::Normal || sampler.k == 0 {
                    return mismatch("unbiased_unknown_var needs a normal sampler with k >= 1;");
                }
                let g = match kind {
                    EstimatorKind::Mle => None,
                    EstimatorKind::VarianceScaled { g } => Some(g.clone()),
                    _ => return mismatch("unbiased_unknown_var"),
                };
                Base::UnknownVar { g, k: sampler.k }
            }
            (BaseSpec::ConstantSpherical, EstimatorKind::Mle) => Base::Constant { value: constant_unbiased(sampler)? },
            (BaseSpec::ResidualLs, EstimatorKind::Mle) if sampler.k > 0 => Base::ResidualLs { p, k: sampler.k },
            (BaseSpec::ResidualShrinkage, EstimatorKind::ResidualScaled { g }) if sampler.k > 0 => {
                Base::ResidualShrink { g: g.clone(), p, k: sampler.k }
            }
            (BaseSpec::PosteriorRisk { m }, _) => Base::Posterior { m: m.build(p) },
            _ => return mismatch("base"),
        };
        let target = match base {
            Base::UnknownVar { .. } => TargetLoss::Invariant { sigma2: sampler.sigma2 },
            _ => TargetLoss::Quadratic,
        };
        Ok(LossEstimator {
            label: self.label(),
            base,
            correction: self.correction.as_ref().map(|c| c.compile(p)),
            positive_part: self.positive_part,
            target,
        })
    }
}

/// Unbiased constant estimate `E|X - θ|^2` for the sampler's law.
pub fn constant_unbiased(sampler: &SamplerSpec) -> Result<f64> {
    sampler.validate()?;
    let p = sampler.p as f64;
    match sampler.kind {
        SamplerKind::Normal => Ok(p * sampler.sigma2),
        SamplerKind::ScaleMixture => {
            let mixing = sampler.mixing.as_ref().expect("validated");
            mixing
                .moment(-1.0)
                .map(|m| p * m)
                .ok_or_else(|| Error::DomainError(format!("mixing law {mixing:?} has infinite E[1/ς]")))
        }
        SamplerKind::RadialSpherical => constant_spherical_unbiased(sampler.radial.as_ref().expect("validated"), sampler.p),
        SamplerKind::SphericalResidual => Err(Error::InvalidSpec(
            "with a residual vector use the residual_ls base".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetLoss {
    Quadratic,
    Invariant { sigma2: f64 },
}

impl TargetLoss {
    pub fn evaluate(&self, phi: &[f64], theta: &[f64]) -> Result<f64> {
        match *self {
            TargetLoss::Quadratic => quadratic_loss(phi, theta),
            TargetLoss::Invariant { sigma2 } => invariant_loss(phi, theta, sigma2),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Base {
    Sure { g: VectorField },
    UnknownVar { g: Option<JointField>, k: usize },
    Constant { value: f64 },
    ResidualLs { p: usize, k: usize },
    ResidualShrink { g: VectorField, p: usize, k: usize },
    Posterior { m: ScalarField },
}

#[derive(Debug, Clone)]
pub struct LossEstimator {
    label: String,
    base: Base,
    correction: Option<Correction>,
    positive_part: bool,
    target: TargetLoss,
}

impl LossEstimator {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn target(&self) -> TargetLoss {
        self.target
    }

    pub fn base(&self) -> &Base {
        &self.base
    }

    pub fn base_value(&self, obs: &Observation) -> Result<f64> {
        let x = &obs.x;
        match &self.base {
            Base::Sure { g } => sure_known_var(g, x),
            Base::UnknownVar { g, k } => {
                let s = obs.require_s()?;
                match g {
                    Some(g) => unbiased_loss_unknown_var(g, x, s, *k),
                    None => Ok(x.len() as f64),
                }
            }
            Base::Constant { value } => Ok(*value),
            Base::ResidualLs { p, k } => residual_unbiased_ls(obs.require_u()?, *p, *k),
            Base::ResidualShrink { g, p, k } => residual_unbiased_shrink(g, x, obs.require_u()?, *p, *k),
            Base::Posterior { m } => posterior_risk(m, x),
        }
    }

    /// Weight on `γ`: `1`, `S` or `|U|^4` depending on the setting.
    pub fn multiplier(&self, obs: &Observation) -> Result<f64> {
        Ok(match &self.base {
            Base::UnknownVar { .. } => obs.require_s()?,
            Base::ResidualLs { .. } | Base::ResidualShrink { .. } => {
                let u2 = norm_sq(obs.require_u()?);
                u2 * u2
            }
            _ => 1.0,
        })
    }

    pub fn evaluate(&self, obs: &Observation) -> Result<f64> {
        let mut delta = self.base_value(obs)?;
        if let Some(c) = &self.correction {
            delta = apply_correction(delta, c.value(&obs.x)?, self.multiplier(obs)?);
        }
        if self.positive_part {
            delta = positive_part(delta);
        }
        if delta.is_finite() {
            Ok(delta)
        } else {
            Err(Error::ShrinkageSingularity)
        }
    }
}

/// One-dimensional location family used for the estimation of `θ^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Location1d {
    Normal { sigma2: f64 },
    Laplace { scale: f64 },
}

impl Location1d {
    /// `E_0[X^2]` in closed form.
    pub fn second_moment(&self) -> f64 {
        match *self {
            Location1d::Normal { sigma2 } => sigma2,
            Location1d::Laplace { scale } => 2.0 * scale * scale,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, theta: f64) -> f64 {
        match *self {
            Location1d::Normal { sigma2 } => theta + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal),
            Location1d::Laplace { scale } => {
                let a: f64 = Exp1.sample(rng);
                let b: f64 = Exp1.sample(rng);
                theta + scale * (a - b)
            }
        }
    }

    /// Generalized Bayes estimate of `θ^2` under the flat prior: `X^2 + E_0[X^2]`.
    pub fn generalized_bayes(&self, x: f64) -> f64 {
        x * x + self.second_moment()
    }

    /// Unbiased estimate of `θ^2`: `X^2 - E_0[X^2]`.
    pub fn unbiased(&self, x: f64) -> f64 {
        x * x - self.second_moment()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::VectorFieldSpec;
    use crate::estimators::EstimatorSpec;
    use crate::samplers::{replication_rng, MixingSpec};
    use rand::SeedableRng;
    use rand_distr::Distribution;

    fn js(p: usize) -> VectorField {
        VectorFieldSpec::JsShrinkage { c: p as f64 - 2.0 }.build(p).unwrap()
    }

    fn x_with_norm_sq(p: usize, r2: f64) -> Vec<f64> {
        let mut x = vec![0.0; p];
        x[0] = r2.sqrt();
        x
    }

    #[test]
    fn losses() {
        assert_eq!(quadratic_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(quadratic_loss(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 25.0);
        assert_eq!(invariant_loss(&[3.0, 4.0], &[0.0, 0.0], 4.0).unwrap(), 6.25);
        assert!(quadratic_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert_eq!(loss_estimation_loss(5.0, 5.0), 0.0);
        assert_eq!(loss_estimation_loss(5.0, 3.0), 4.0);
        assert_eq!(loss_estimation_loss(0.0, 2.0), 4.0);
        assert_eq!(stein_type_loss(2.0, 2.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((stein_type_loss(1.0, e).unwrap() - (e - 2.0)).abs() < 1e-15);
        assert!(matches!(stein_type_loss(0.0, 1.0), Err(Error::DomainError(_))));
        assert!(matches!(stein_type_loss(1.0, -1.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn sure_examples() {
        let zero = VectorFieldSpec::Zero.build(5).unwrap();
        assert_eq!(sure_known_var(&zero, &[1.0; 5]).unwrap(), 5.0);
        let x = x_with_norm_sq(5, 4.0);
        assert!((sure_known_var(&js(5), &x).unwrap() - 2.75).abs() < 1e-14);
        assert!((sure_known_var(&js(5).numeric_only(), &x).unwrap() - 2.75).abs() < 1e-7);
        // Johnstone's improvement on the MLE, p - 2(p-4)/|x|^2 at |x|^2 = 1.
        let gamma = CorrectionSpec::Fixed { gamma: FieldSpec::NormPower { power: 2.0, scale: 1.0 }, scale: 2.0 }.compile(5);
        let x = x_with_norm_sq(5, 1.0);
        let delta = apply_correction(sure_known_var(&zero, &x).unwrap(), gamma.value(&x).unwrap(), 1.0);
        assert!((delta - 3.0).abs() < 1e-14);
        assert!(matches!(sure_known_var(&js(5), &[0.0; 5]), Err(Error::ShrinkageSingularity)));
    }

    #[test]
    fn unknown_variance_examples() {
        let (p, k) = (5usize, 3usize);
        let x = x_with_norm_sq(p, 4.0);
        let zero = JointField::separable(VectorFieldSpec::Zero.build(p).unwrap(), 0.0);
        assert_eq!(unbiased_loss_unknown_var(&zero, &x, 2.0, k).unwrap(), 5.0);

        let a = (p as f64 - 2.0) / (k as f64 + 2.0);
        let g = JointField::separable(VectorFieldSpec::JsShrinkage { c: a }.build(p).unwrap(), 0.0);
        assert!((unbiased_loss_unknown_var(&g, &x, 2.0, k).unwrap() - 4.1).abs() < 1e-14);
        assert!((unbiased_loss_unknown_var(&g.numeric_only(), &x, 2.0, k).unwrap() - 4.1).abs() < 1e-7);
        assert!(unbiased_loss_unknown_var(&g, &x, 0.0, k).is_err());
    }

    #[test]
    fn unknown_variance_general_field_term_by_term() {
        // g(x, s) = c s x: |g|^2 = c^2 s^2 |x|^2, div_x g = c s p, ∂_s |g|^2 = 2 c^2 s |x|^2.
        let (p, k, c) = (4usize, 6usize, -0.3);
        let g = JointField::new("c s x", move |x, s| x.iter().map(|v| c * s * v).collect());
        let x = [0.5, 1.5, -1.0, 2.0];
        let r2 = norm_sq(&x);
        for s in [0.2, 1.0, 3.5] {
            let oracle = p as f64
                + s * ((k as f64 + 2.0) * c * c * s * s * r2 + 2.0 * c * s * p as f64 + 2.0 * s * 2.0 * c * c * s * r2);
            let got = unbiased_loss_unknown_var(&g, &x, s, k).unwrap();
            assert!((got - oracle).abs() < 1e-6 * oracle.abs().max(1.0), "s={s}: {got} vs {oracle}");
        }
    }

    #[test]
    fn posterior_and_unbiased_bayes_risk() {
        let x = x_with_norm_sq(5, 4.0);
        let one = FieldSpec::Constant { c: 1.0 }.build(5);
        assert_eq!(posterior_risk(&one, &x).unwrap(), 5.0);
        assert_eq!(unbiased_risk_bayes(&one, &x).unwrap(), 5.0);
        let h = FieldSpec::FundamentalHarmonic.build(5);
        assert!((posterior_risk(&h, &x).unwrap() - 2.75).abs() < 1e-13);
        assert!((unbiased_risk_bayes(&h, &x).unwrap() - 2.75).abs() < 1e-13);

        let m = FieldSpec::ShiftedNormPower { a: 1.0, b: 1.5, scale: 1.0 }.build(5);
        let pts = [vec![0.3, 0.1, -0.2, 0.5, 1.0], vec![2.0, -1.0, 0.0, 0.5, 3.0]];
        for x in &pts {
            let diff = unbiased_risk_bayes(&m, x).unwrap() - posterior_risk(&m, x).unwrap();
            let lap_ratio = crate::calculus::laplacian_fd(&m.numeric_only(), x, None).unwrap() / m.value(x);
            assert!((diff - lap_ratio).abs() < 1e-5 * lap_ratio.abs().max(1.0));
            assert!(lap_ratio.abs() > 1e-3);
        }
        let neg = FieldSpec::Constant { c: 0.0 }.build(5);
        assert!(matches!(posterior_risk(&neg, &x), Err(Error::InvalidMarginal(_))));
    }

    #[test]
    fn harmonic_marginal_coincidence() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for p in [3usize, 5, 9] {
            let h = FieldSpec::FundamentalHarmonic.build(p);
            for _ in 0..200 {
                let x: Vec<f64> = (0..p).map(|_| 3.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
                let a = posterior_risk(&h, &x).unwrap();
                let b = unbiased_risk_bayes(&h, &x).unwrap();
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn theorem21_examples() {
        let p = 6;
        let x = [1.0, -2.0, 0.5, 0.0, 1.5, -0.7];
        let r2 = norm_sq(&x);
        let h = FieldSpec::FundamentalHarmonic.build(p);
        let xi = FieldSpec::NormPower { power: p as f64, scale: 1.0 }.build(p);
        let g = theorem21_correction(&h, &xi, 3.0, &x).unwrap();
        assert!((g + 3.0 / r2).abs() < 1e-13);

        let one = FieldSpec::Constant { c: 1.0 }.build(p);
        let xi2 = FieldSpec::NormPower { power: 2.0, scale: 1.0 }.build(p);
        let g = theorem21_correction(&one, &xi2, 1.5, &x).unwrap();
        assert!((apply_correction(p as f64, g, 1.0) - (p as f64 - 1.5 / r2)).abs() < 1e-13);

        let xib = FieldSpec::ShiftedNormPower { a: 2.0, b: 1.0, scale: 1.0 }.build(p);
        let g = theorem21_correction(&one, &xib, 1.5, &x).unwrap();
        assert!((apply_correction(p as f64, g, 1.0) - (p as f64 - 1.5 / (r2 + 2.0))).abs() < 1e-13);
        let zero = FieldSpec::Constant { c: 0.0 }.build(p);
        assert!(theorem21_correction(&zero, &xi, 1.0, &x).is_err());
    }

    #[test]
    fn residual_examples() {
        assert_eq!(residual_unbiased_ls(&[1.0, 1.0, 1.0, 1.0], 6, 4).unwrap(), 6.0);
        let u = [1.0, 1.0, 0.0, 0.0];
        assert_eq!(residual_unbiased_ls(&u, 6, 4).unwrap(), 3.0);
        assert_eq!(residual_unbiased_ls(&[0.0; 4], 6, 4).unwrap(), 0.0);
        let zero = VectorFieldSpec::Zero.build(6).unwrap();
        assert_eq!(residual_unbiased_shrink(&zero, &[1.0; 6], &u, 6, 4).unwrap(), 3.0);

        // Oracle: the bracket collapses to -a^2/|x|^2 for the canonical a.
        let (p, k) = (5usize, 3usize);
        let a = (p as f64 - 2.0) / (k as f64 + 2.0);
        let g = VectorFieldSpec::JsShrinkage { c: a }.build(p).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            let u: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            let u2 = norm_sq(&u);
            let expected = p as f64 / k as f64 * u2 - a * a / norm_sq(&x) * u2 * u2;
            let got = residual_unbiased_shrink(&g, &x, &u, p, k).unwrap();
            assert!((got - expected).abs() < 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn constant_spherical_examples() {
        assert_eq!(constant_spherical_unbiased(&RadialSpec::Fixed { r: 2.0 }, 3).unwrap(), 4.0);
        let chi = RadialSpec::Chi { dof: 7.0, scale: 1.0 };
        assert!((constant_spherical_unbiased(&chi, 7).unwrap() - 7.0).abs() < 1e-12);
        let mix = RadialSpec::MixtureInduced { mixing: MixingSpec::PointMass { value: 4.0 } };
        assert!((constant_spherical_unbiased(&mix, 6).unwrap() - 6.0 / 4.0).abs() < 1e-12);
        let heavy = RadialSpec::MixtureInduced { mixing: MixingSpec::student_t(2.0) };
        assert!(constant_spherical_unbiased(&heavy, 3).is_err());
        let t = SamplerSpec::scale_mixture(6, MixingSpec::student_t(6.0));
        assert!((constant_unbiased(&t).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn correction_and_positive_part() {
        assert_eq!(apply_correction(5.0, 2.0, 1.0), 3.0);
        assert_eq!(positive_part(-1.0), 0.0);
        assert_eq!(positive_part(2.5), 2.5);
    }

    #[test]
    fn compiled_multipliers_follow_setting() {
        let (p, k) = (6usize, 4usize);
        let gamma = CorrectionSpec::Fixed { gamma: FieldSpec::NormPower { power: 2.0, scale: 1.0 }, scale: 0.05 };
        let sampler = SamplerSpec::spherical_residual(p, k, RadialSpec::Fixed { r: 3.0 });
        let est = EstimatorSpec::Mle.compile(p).unwrap();
        let le = LossEstimatorSpec::corrected(BaseSpec::ResidualLs, gamma.clone()).compile(&est, &sampler).unwrap();
        let obs = sampler.draw_replication(1, 0, 0);
        let x2 = norm_sq(&obs.x);
        let u2 = norm_sq(obs.u.as_ref().unwrap());
        let expected = p as f64 * u2 / k as f64 - u2 * u2 * 0.05 / x2;
        assert!((le.evaluate(&obs).unwrap() - expected).abs() < 1e-12);

        let sampler = SamplerSpec::normal_with_variance(5, 3, 1.0);
        let est = EstimatorSpec::JsUnknownVar { k: 3 }.compile(5).unwrap();
        let wz = CorrectionSpec::Fixed { gamma: FieldSpec::NormPower { power: 2.0, scale: 1.0 }, scale: -2.72 };
        let le = LossEstimatorSpec::corrected(BaseSpec::UnbiasedUnknownVar, wz).compile(&est, &sampler).unwrap();
        let obs = sampler.draw_replication(1, 0, 0);
        let s = obs.s.unwrap();
        let x2 = norm_sq(&obs.x);
        let expected = 5.0 - (9.0 / 5.0) * s / x2 + 2.72 * s / x2;
        assert!((le.evaluate(&obs).unwrap() - expected).abs() < 1e-12);
        assert_eq!(le.target(), TargetLoss::Invariant { sigma2: 1.0 });

        let bad = LossEstimatorSpec::unbiased(BaseSpec::ResidualLs).compile(&est, &sampler);
        assert!(bad.is_err());
    }

    #[test]
    fn positive_part_improves_every_draw() {
        let p = 5;
        let sampler = SamplerSpec::normal(p, 1.0);
        let est = EstimatorSpec::JamesStein.compile(p).unwrap();
        let raw = LossEstimatorSpec::unbiased(BaseSpec::SureKnownVar).compile(&est, &sampler).unwrap();
        let plus = LossEstimatorSpec::unbiased(BaseSpec::SureKnownVar).with_positive_part().compile(&est, &sampler).unwrap();
        let theta = vec![0.0; p];
        let mut strict = 0;
        for i in 0..20_000 {
            let obs = sampler.draw_replication(4, i, 0);
            let l = quadratic_loss(&est.estimate(&obs).unwrap(), &theta).unwrap();
            let (d, dp) = (raw.evaluate(&obs).unwrap(), plus.evaluate(&obs).unwrap());
            assert!(loss_estimation_loss(dp, l) <= loss_estimation_loss(d, l));
            if d < 0.0 && l > 0.0 {
                assert!(loss_estimation_loss(dp, l) < loss_estimation_loss(d, l));
                strict += 1;
            }
        }
        assert!(strict > 0);
    }

    #[test]
    fn one_dimensional_flat_prior_paradox() {
        for family in [Location1d::Normal { sigma2: 1.0 }, Location1d::Laplace { scale: 0.8 }] {
            let c = family.second_moment();
            for theta in [0.0, 1.5, 4.0] {
                let n = 100_000u64;
                let diffs: Vec<f64> = (0..n)
                    .map(|i| {
                        let x = family.sample(&mut replication_rng(8, i, 0), theta);
                        let t2 = theta * theta;
                        loss_estimation_loss(family.generalized_bayes(x), t2) - loss_estimation_loss(family.unbiased(x), t2)
                    })
                    .collect();
                let mean = diffs.iter().sum::<f64>() / n as f64;
                let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
                // Paired difference is 4c(X^2 - θ^2), with mean 4c^2.
                assert!((mean - 4.0 * c * c).abs() <= 4.0 * (var / n as f64).sqrt() + 1e-9);
            }
        }
    }
}
