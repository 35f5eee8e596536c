//! Differential operators on scalar and vector fields over R^p.
//!
//! Every field carries an evaluation closure and, optionally, closed-form
//! derivatives. The `*_fd` operators always use central differences; the
//! field methods (`gradient`, `laplacian`, ...) prefer the analytic form and
//! fall back to the stencil.
//!
//! Weak differentiability cannot be verified pointwise. Fields only declare a
//! singular set, and any stencil reaching within `10 h` of it is rejected.

mod joint;
mod library;

pub use joint::JointField;
pub use library::{field_library, Field, FieldSpec, RadialPower, VectorFieldSpec};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Multiplier on the step that defines the exclusion zone around a singularity.
const SINGULAR_MARGIN: f64 = 10.0;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

/// Points excluded from the domain of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SingularSet {
    #[default]
    Empty,
    Origin,
}

impl SingularSet {
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            SingularSet::Empty => f64::INFINITY,
            SingularSet::Origin => norm(x),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.distance(x) == 0.0
    }

    fn check_stencil(&self, name: &str, x: &[f64], h: f64) -> Result<()> {
        let distance = self.distance(x);
        if distance <= SINGULAR_MARGIN * h {
            return Err(Error::StencilOnSingularity {
                field: name.to_string(),
                distance,
                step: h,
            });
        }
        Ok(())
    }
}

/// Default step for first differences: cbrt(eps) scaled by max(1, |x|).
pub fn first_difference_step(x: &[f64]) -> f64 {
    f64::EPSILON.cbrt() * norm(x).max(1.0)
}

/// Default step for second differences: eps^(1/4) scaled by max(1, |x|).
pub fn second_difference_step(x: &[f64]) -> f64 {
    f64::EPSILON.powf(0.25) * norm(x).max(1.0)
}

/// Step for a fourth-order nested stencil (eps^(1/6)).
pub fn fourth_difference_step(x: &[f64]) -> f64 {
    f64::EPSILON.powf(1.0 / 6.0) * norm(x).max(1.0)
}

fn check_step(h: f64) -> Result<f64> {
    if h.is_finite() && h > 0.0 {
        Ok(h)
    } else {
        Err(Error::DomainError(format!("step size must be positive, got {h}")))
    }
}

/// A real-valued function on R^p with optional closed-form derivatives.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    eval: ScalarFn,
    gradient: Option<VectorFn>,
    laplacian: Option<ScalarFn>,
    bilaplacian: Option<ScalarFn>,
    singular: SingularSet,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("analytic_laplacian", &self.laplacian.is_some())
            .field("analytic_bilaplacian", &self.bilaplacian.is_some())
            .field("singular", &self.singular)
            .finish()
    }
}

impl ScalarField {
    pub fn new(name: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            gradient: None,
            laplacian: None,
            bilaplacian: None,
            singular: SingularSet::Empty,
        }
    }

    pub fn with_gradient(mut self, grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(grad));
        self
    }

    pub fn with_laplacian(mut self, lap: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.laplacian = Some(Arc::new(lap));
        self
    }

    pub fn with_bilaplacian(mut self, bilap: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.bilaplacian = Some(Arc::new(bilap));
        self
    }

    pub fn with_singularity(mut self, singular: SingularSet) -> Self {
        self.singular = singular;
        self
    }

    /// Drops every closed-form derivative, leaving only the stencils.
    pub fn numeric_only(&self) -> Self {
        Self {
            gradient: None,
            laplacian: None,
            bilaplacian: None,
            ..self.clone()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn singular_set(&self) -> SingularSet {
        self.singular
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn has_analytic_laplacian(&self) -> bool {
        self.laplacian.is_some()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn analytic_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn analytic_laplacian(&self, x: &[f64]) -> Option<f64> {
        self.laplacian.as_ref().map(|l| l(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.gradient {
            Some(g) => Ok(g(x)),
            None => gradient_fd(self, x, None),
        }
    }

    pub fn laplacian(&self, x: &[f64]) -> Result<f64> {
        match &self.laplacian {
            Some(l) => Ok(l(x)),
            None => laplacian_fd(self, x, None),
        }
    }

    pub fn bilaplacian(&self, x: &[f64]) -> Result<f64> {
        match &self.bilaplacian {
            Some(b) => Ok(b(x)),
            None => bilaplacian_fd(self, x, None),
        }
    }

    /// The field x -> scale * f(x), derivatives scaled along.
    pub fn scaled(&self, scale: f64) -> Self {
        let eval = self.eval.clone();
        let mut out = ScalarField::new(format!("{scale}*{}", self.name), move |x| scale * eval(x))
            .with_singularity(self.singular);
        if let Some(g) = self.gradient.clone() {
            out = out.with_gradient(move |x| g(x).into_iter().map(|v| scale * v).collect());
        }
        if let Some(l) = self.laplacian.clone() {
            out = out.with_laplacian(move |x| scale * l(x));
        }
        if let Some(b) = self.bilaplacian.clone() {
            out = out.with_bilaplacian(move |x| scale * b(x));
        }
        out
    }

    /// The Laplacian of this field as a field in its own right.
    fn laplacian_field(&self) -> Option<ScalarField> {
        let lap = self.laplacian.clone()?;
        Some(
            ScalarField {
                name: format!("lap({})", self.name),
                eval: lap,
                gradient: None,
                laplacian: self.bilaplacian.clone(),
                bilaplacian: None,
                singular: self.singular,
            },
        )
    }
}

/// A map R^p -> R^p with an optional closed-form divergence.
#[derive(Clone)]
pub struct VectorField {
    name: String,
    eval: VectorFn,
    divergence: Option<ScalarFn>,
    singular: SingularSet,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("analytic_divergence", &self.divergence.is_some())
            .field("singular", &self.singular)
            .finish()
    }
}

impl VectorField {
    pub fn new(name: impl Into<String>, eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            divergence: None,
            singular: SingularSet::Empty,
        }
    }

    pub fn with_divergence(mut self, div: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.divergence = Some(Arc::new(div));
        self
    }

    pub fn with_singularity(mut self, singular: SingularSet) -> Self {
        self.singular = singular;
        self
    }

    pub fn numeric_only(&self) -> Self {
        Self {
            divergence: None,
            ..self.clone()
        }
    }

    /// Gradient field of `f`; its divergence is the Laplacian of `f`.
    pub fn gradient_of(f: &ScalarField) -> Self {
        let inner = f.clone();
        let mut out = VectorField::new(format!("grad({})", f.name), move |x| {
            inner.gradient(x).unwrap_or_else(|_| vec![f64::NAN; x.len()])
        })
        .with_singularity(f.singular);
        if let Some(lap) = f.laplacian.clone() {
            out.divergence = Some(lap);
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn singular_set(&self) -> SingularSet {
        self.singular
    }

    pub fn has_analytic_divergence(&self) -> bool {
        self.divergence.is_some()
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn divergence(&self, x: &[f64]) -> Result<f64> {
        match &self.divergence {
            Some(d) => Ok(d(x)),
            None => divergence_fd(self, x, None),
        }
    }
}

/// Central-difference gradient, `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn gradient_fd(f: &ScalarField, x: &[f64], h: Option<f64>) -> Result<Vec<f64>> {
    let h = check_step(h.unwrap_or_else(|| first_difference_step(x)))?;
    f.singular.check_stencil(&f.name, x, h)?;
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f.value(&probe);
        probe[i] = x[i] - h;
        let minus = f.value(&probe);
        probe[i] = x[i];
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

/// Central-difference divergence: sum of diagonal partials of `g`.
pub fn divergence_fd(g: &VectorField, x: &[f64], h: Option<f64>) -> Result<f64> {
    let h = check_step(h.unwrap_or_else(|| first_difference_step(x)))?;
    g.singular.check_stencil(&g.name, x, h)?;
    let mut probe = x.to_vec();
    let mut total = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = g.value(&probe)[i];
        probe[i] = x[i] - h;
        let minus = g.value(&probe)[i];
        probe[i] = x[i];
        total += (plus - minus) / (2.0 * h);
    }
    Ok(total)
}

/// Second-difference Laplacian, `sum_i (f(x + h e_i) - 2 f(x) + f(x - h e_i)) / h^2`.
pub fn laplacian_fd(f: &ScalarField, x: &[f64], h: Option<f64>) -> Result<f64> {
    let h = check_step(h.unwrap_or_else(|| second_difference_step(x)))?;
    f.singular.check_stencil(&f.name, x, h)?;
    Ok(laplacian_stencil(&|y: &[f64]| f.value(y), x, h))
}

fn laplacian_stencil(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> f64 {
    let center = f(x);
    let mut probe = x.to_vec();
    let mut total = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        probe[i] = x[i];
        total += plus - 2.0 * center + minus;
    }
    total / (h * h)
}

/// Bi-Laplacian `Δ(Δf)`.
///
/// With an analytic Laplacian attached, one stencil Laplacian is applied to
/// it. Otherwise two nested stencils are used at a fourth-root step, which
/// is only accurate to roughly 1e-3.
pub fn bilaplacian_fd(f: &ScalarField, x: &[f64], h: Option<f64>) -> Result<f64> {
    if let Some(lap) = f.laplacian_field() {
        return laplacian_fd(&lap.numeric_only(), x, h);
    }
    let h = check_step(h.unwrap_or_else(|| fourth_difference_step(x)))?;
    f.singular.check_stencil(&f.name, x, 2.0 * h)?;
    let inner = |y: &[f64]| laplacian_stencil(&|z: &[f64]| f.value(z), y, h);
    Ok(laplacian_stencil(&inner, x, h))
}
