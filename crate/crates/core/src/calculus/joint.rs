//! Shift fields `g(x, s)` for the unknown-variance setting `φ = X + S g(X, S)`.

use std::fmt;
use std::sync::Arc;

use super::{divergence_fd, norm_sq, SingularSet, VectorField};
use crate::error::{Error, Result};

type JointFn = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;
type JointScalarFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct JointField {
    name: String,
    eval: JointFn,
    divergence_x: Option<JointScalarFn>,
    ds_norm_sq: Option<JointScalarFn>,
    singular: SingularSet,
}

impl fmt::Debug for JointField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JointField")
            .field("name", &self.name)
            .field("analytic_divergence_x", &self.divergence_x.is_some())
            .field("analytic_ds_norm_sq", &self.ds_norm_sq.is_some())
            .finish()
    }
}

impl JointField {
    pub fn new(name: impl Into<String>, eval: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            divergence_x: None,
            ds_norm_sq: None,
            singular: SingularSet::Empty,
        }
    }

    pub fn with_divergence_x(mut self, f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        self.divergence_x = Some(Arc::new(f));
        self
    }

    pub fn with_ds_norm_sq(mut self, f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        self.ds_norm_sq = Some(Arc::new(f));
        self
    }

    pub fn with_singularity(mut self, singular: SingularSet) -> Self {
        self.singular = singular;
        self
    }

    /// `g(x, s) = s^q g0(x)`, with both partial terms in closed form.
    pub fn separable(g0: VectorField, q: f64) -> Self {
        let name = format!("s^{q} * {}", g0.name());
        let singular = g0.singular_set();
        let (ge, gd, gn) = (g0.clone(), g0.clone(), g0);
        Self::new(name, move |x, s| {
            let h = s.powf(q);
            ge.value(x).into_iter().map(|v| h * v).collect()
        })
        .with_divergence_x(move |x, s| s.powf(q) * gd.divergence(x).unwrap_or(f64::NAN))
        .with_ds_norm_sq(move |x, s| {
            if q == 0.0 {
                0.0
            } else {
                2.0 * q * s.powf(2.0 * q - 1.0) * norm_sq(&gn.value(x))
            }
        })
        .with_singularity(singular)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn singular_set(&self) -> SingularSet {
        self.singular
    }

    pub fn numeric_only(&self) -> Self {
        Self { divergence_x: None, ds_norm_sq: None, ..self.clone() }
    }

    pub fn value(&self, x: &[f64], s: f64) -> Vec<f64> {
        (self.eval)(x, s)
    }

    /// The x-slice at fixed `s` as an ordinary vector field.
    pub fn slice(&self, s: f64) -> VectorField {
        let eval = self.eval.clone();
        let slice = VectorField::new(format!("{}|s={s}", self.name), move |x| eval(x, s)).with_singularity(self.singular);
        match &self.divergence_x {
            Some(d) => {
                let d = d.clone();
                slice.with_divergence(move |x| d(x, s))
            }
            None => slice,
        }
    }

    pub fn divergence_x(&self, x: &[f64], s: f64) -> Result<f64> {
        match &self.divergence_x {
            Some(d) => Ok(d(x, s)),
            None => divergence_fd(&self.slice(s), x, None),
        }
    }

    /// `∂/∂s |g(x, s)|^2`; one-sided near the `s = 0` boundary.
    pub fn ds_norm_sq(&self, x: &[f64], s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::DomainError(format!("variance statistic must be positive, got {s}")));
        }
        if let Some(d) = &self.ds_norm_sq {
            return Ok(d(x, s));
        }
        let f = |t: f64| norm_sq(&(self.eval)(x, t));
        let h = f64::EPSILON.cbrt() * s.max(1.0);
        if s > 2.0 * h {
            Ok((f(s + h) - f(s - h)) / (2.0 * h))
        } else {
            Ok((-3.0 * f(s) + 4.0 * f(s + h) - f(s + 2.0 * h)) / (2.0 * h))
        }
    }
}
