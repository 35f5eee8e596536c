//! Point estimators of a location parameter.

use serde::{Deserialize, Serialize};

use crate::calculus::{norm_sq, FieldSpec, JointField, ScalarField, SingularSet, VectorField, VectorFieldSpec};
use crate::error::{Error, Result};
use crate::samplers::Observation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Mle,
    /// `(1 - (p-2)/|x|^2) x`.
    JamesStein,
    /// `x + grad m(x) / m(x)`.
    PseudoBayes { m: FieldSpec },
    /// `x - ((p-2)/(k+2)) (s/|x|^2) x`.
    JsUnknownVar { k: usize },
    /// `x + |u|^2 g(x)`.
    ResidualShrinkage { g: VectorFieldSpec },
    /// `x + g(x)` for an arbitrary shift field.
    Shift { g: VectorFieldSpec },
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Mle => "mle".into(),
            EstimatorSpec::JamesStein => "james_stein".into(),
            EstimatorSpec::PseudoBayes { m } => format!("pseudo_bayes({})", m.label()),
            EstimatorSpec::JsUnknownVar { k } => format!("js_unknown_var(k={k})"),
            EstimatorSpec::ResidualShrinkage { g } => format!("residual_shrinkage({})", g.label()),
            EstimatorSpec::Shift { g } => format!("shift({})", g.label()),
        }
    }

    pub fn compile(&self, p: usize) -> Result<Estimator> {
        let needs_p3 = matches!(self, EstimatorSpec::JamesStein | EstimatorSpec::JsUnknownVar { .. });
        if needs_p3 && p < 3 {
            return Err(Error::InvalidSpec(format!("{} needs p >= 3, got {p}", self.label())));
        }
        let label = self.label();
        let kind = match self {
            EstimatorSpec::Mle => EstimatorKind::Mle,
            EstimatorSpec::JamesStein => EstimatorKind::Shift {
                g: VectorFieldSpec::JsShrinkage { c: p as f64 - 2.0 }.build(p)?,
                marginal: None,
            },
            EstimatorSpec::PseudoBayes { m } => {
                let m = m.build(p);
                EstimatorKind::Shift { g: log_gradient_field(&m), marginal: Some(m) }
            }
            EstimatorSpec::JsUnknownVar { k } => {
                let a = (p as f64 - 2.0) / (*k as f64 + 2.0);
                let g0 = VectorFieldSpec::JsShrinkage { c: a }.build(p)?;
                EstimatorKind::VarianceScaled { g: JointField::separable(g0, 0.0) }
            }
            EstimatorSpec::ResidualShrinkage { g } => EstimatorKind::ResidualScaled { g: g.build(p)? },
            EstimatorSpec::Shift { g } => EstimatorKind::Shift { g: g.build(p)?, marginal: None },
        };
        Ok(Estimator { label, p, kind })
    }
}

#[derive(Debug, Clone)]
pub enum EstimatorKind {
    Mle,
    /// `x + g(x)`; `marginal` is kept for pseudo-Bayes rules so that `m(x) > 0` is enforced.
    Shift { g: VectorField, marginal: Option<ScalarField> },
    /// `x + s g(x, s)`.
    VarianceScaled { g: JointField },
    /// `x + |u|^2 g(x)`.
    ResidualScaled { g: VectorField },
}

#[derive(Debug, Clone)]
pub struct Estimator {
    label: String,
    p: usize,
    kind: EstimatorKind,
}

impl Estimator {
    pub fn from_kind(label: impl Into<String>, p: usize, kind: EstimatorKind) -> Self {
        Self { label: label.into(), p, kind }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn kind(&self) -> &EstimatorKind {
        &self.kind
    }

    /// Shift field of a known-variance rule `x + g(x)`; zero for the MLE.
    pub fn known_var_shift(&self) -> Option<VectorField> {
        match &self.kind {
            EstimatorKind::Mle => VectorFieldSpec::Zero.build(self.p).ok(),
            EstimatorKind::Shift { g, .. } => Some(g.clone()),
            _ => None,
        }
    }

    pub fn estimate(&self, obs: &Observation) -> Result<Vec<f64>> {
        let x = &obs.x;
        if x.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: x.len() });
        }
        let shifted = |g: Vec<f64>, scale: f64| -> Result<Vec<f64>> {
            let out: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + scale * b).collect();
            if out.iter().all(|v| v.is_finite()) {
                Ok(out)
            } else {
                Err(Error::ShrinkageSingularity)
            }
        };
        let check_singular = |s: SingularSet| {
            if s.contains(x) {
                Err(Error::ShrinkageSingularity)
            } else {
                Ok(())
            }
        };
        match &self.kind {
            EstimatorKind::Mle => Ok(x.clone()),
            EstimatorKind::Shift { g, marginal } => {
                check_singular(g.singular_set())?;
                if let Some(m) = marginal {
                    return shifted(pseudo_bayes_shift(m, x)?, 1.0);
                }
                shifted(g.value(x), 1.0)
            }
            EstimatorKind::VarianceScaled { g } => {
                let s = obs.require_s()?;
                check_singular(g.singular_set())?;
                shifted(g.value(x, s), s)
            }
            EstimatorKind::ResidualScaled { g } => {
                let u2 = norm_sq(obs.require_u()?);
                check_singular(g.singular_set())?;
                shifted(g.value(x), u2)
            }
        }
    }
}

/// Compiles `spec` for the observation's dimension and evaluates it.
pub fn estimate(spec: &EstimatorSpec, obs: &Observation) -> Result<Vec<f64>> {
    spec.compile(obs.x.len())?.estimate(obs)
}

/// `grad m(x) / m(x)`.
pub fn pseudo_bayes_shift(m: &ScalarField, x: &[f64]) -> Result<Vec<f64>> {
    let mx = m.value(x);
    if !(mx > 0.0) {
        return Err(Error::InvalidMarginal(mx));
    }
    Ok(m.gradient(x)?.into_iter().map(|v| v / mx).collect())
}

/// `grad m / m` as a vector field, with divergence `lap m / m - |grad m|^2 / m^2`.
pub fn log_gradient_field(m: &ScalarField) -> VectorField {
    let (me, md) = (m.clone(), m.clone());
    VectorField::new(format!("grad log {}", m.name()), move |x| {
        pseudo_bayes_shift(&me, x).unwrap_or_else(|_| vec![f64::NAN; x.len()])
    })
    .with_divergence(move |x| {
        let mx = md.value(x);
        match (md.laplacian(x), md.gradient(x)) {
            (Ok(lap), Ok(grad)) => lap / mx - norm_sq(&grad) / (mx * mx),
            _ => f64::NAN,
        }
    })
    .with_singularity(m.singular_set())
}
