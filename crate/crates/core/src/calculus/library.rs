//! Named field families with closed-form derivatives.
//!
//! All scalar families here are radial powers `F(t) = scale (alpha t + shift)^(-power)`
//! with `t = |x|^2`. For a radial `F`:
//!
//! ```text
//! grad f   = 2 F'(t) x
//! lap f    = 2p F'(t) + 4t F''(t)
//! bilap f  = 4p(p+2) F''(t) + 16(p+2) t F'''(t) + 16 t^2 F''''(t)
//! ```

use serde::{Deserialize, Serialize};

use super::{norm_sq, ScalarField, SingularSet, VectorField};
use crate::error::{Error, Result};

/// `scale * (alpha * |x|^2 + shift)^(-power)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPower {
    pub scale: f64,
    pub alpha: f64,
    pub shift: f64,
    pub power: f64,
}

impl RadialPower {
    pub fn new(scale: f64, alpha: f64, shift: f64, power: f64) -> Self {
        Self { scale, alpha, shift, power }
    }

    /// n-th derivative of the profile in t.
    pub fn derivative(&self, n: u32, t: f64) -> f64 {
        let mut coeff = self.scale;
        for j in 0..n {
            coeff *= -(self.power + j as f64) * self.alpha;
        }
        if coeff == 0.0 {
            return 0.0;
        }
        coeff * (self.alpha * t + self.shift).powf(-self.power - n as f64)
    }

    pub fn singular_set(&self) -> SingularSet {
        let smooth_at_origin = self.shift > 0.0
            || self.power == 0.0
            || (self.power < 0.0 && self.power.fract() == 0.0);
        if smooth_at_origin {
            SingularSet::Empty
        } else {
            SingularSet::Origin
        }
    }

    pub fn laplacian_at(&self, t: f64, p: usize) -> f64 {
        let p = p as f64;
        2.0 * p * self.derivative(1, t) + 4.0 * t * self.derivative(2, t)
    }

    pub fn bilaplacian_at(&self, t: f64, p: usize) -> f64 {
        let pf = p as f64;
        4.0 * pf * (pf + 2.0) * self.derivative(2, t)
            + 16.0 * (pf + 2.0) * t * self.derivative(3, t)
            + 16.0 * t * t * self.derivative(4, t)
    }

    pub fn into_field(self, name: impl Into<String>, p: usize) -> ScalarField {
        let f = self;
        ScalarField::new(name, move |x| f.derivative(0, norm_sq(x)))
            .with_gradient(move |x| {
                let d1 = 2.0 * f.derivative(1, norm_sq(x));
                x.iter().map(|v| d1 * v).collect()
            })
            .with_laplacian(move |x| f.laplacian_at(norm_sq(x), p))
            .with_bilaplacian(move |x| f.bilaplacian_at(norm_sq(x), p))
            .with_singularity(self.singular_set())
    }
}

fn default_scale() -> f64 {
    1.0
}

/// Serializable name of a scalar field family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant {
        c: f64,
    },
    /// `|x|^(2-p)`.
    FundamentalHarmonic,
    /// `scale / |x|^power`.
    NormPower {
        power: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// `scale * (|x|^2 + a)^(-b)`.
    ShiftedNormPower {
        a: f64,
        b: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// `(|x|^2 / 2 + a)^(-b)`, the prior family used for posterior-risk checks.
    PriorShiftedPower { a: f64, b: f64 },
}

impl FieldSpec {
    pub fn profile(&self, p: usize) -> RadialPower {
        match *self {
            FieldSpec::Constant { c } => RadialPower::new(c, 1.0, 0.0, 0.0),
            FieldSpec::FundamentalHarmonic => RadialPower::new(1.0, 1.0, 0.0, (p as f64 - 2.0) / 2.0),
            FieldSpec::NormPower { power, scale } => RadialPower::new(scale, 1.0, 0.0, power / 2.0),
            FieldSpec::ShiftedNormPower { a, b, scale } => RadialPower::new(scale, 1.0, a, b),
            FieldSpec::PriorShiftedPower { a, b } => RadialPower::new(1.0, 0.5, a, b),
        }
    }

    pub fn label(&self) -> String {
        match self {
            FieldSpec::Constant { c } => format!("constant({c})"),
            FieldSpec::FundamentalHarmonic => "fundamental_harmonic".into(),
            FieldSpec::NormPower { power, scale } => format!("norm_power({power},{scale})"),
            FieldSpec::ShiftedNormPower { a, b, scale } => format!("shifted_norm_power({a},{b},{scale})"),
            FieldSpec::PriorShiftedPower { a, b } => format!("prior_shifted_power({a},{b})"),
        }
    }

    pub fn build(&self, p: usize) -> ScalarField {
        self.profile(p).into_field(self.label(), p)
    }
}

/// Serializable name of a vector field family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum VectorFieldSpec {
    Zero,
    /// `scale * (x - center)`; center defaults to the origin.
    Identity {
        #[serde(default = "default_scale")]
        scale: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// `-c x / |x|^2`.
    JsShrinkage { c: f64 },
    /// `grad m / m`.
    LogGradient { m: FieldSpec },
    /// `A x` for a p x p matrix given by rows.
    Linear { rows: Vec<Vec<f64>> },
}

impl VectorFieldSpec {
    pub fn label(&self) -> String {
        match self {
            VectorFieldSpec::Zero => "zero".into(),
            VectorFieldSpec::Identity { scale, .. } => format!("identity({scale})"),
            VectorFieldSpec::JsShrinkage { c } => format!("js_shrinkage({c})"),
            VectorFieldSpec::LogGradient { m } => format!("log_gradient({})", m.label()),
            VectorFieldSpec::Linear { .. } => "linear".into(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, VectorFieldSpec::Zero)
    }

    pub fn build(&self, p: usize) -> Result<VectorField> {
        let label = self.label();
        Ok(match self {
            VectorFieldSpec::Zero => {
                VectorField::new(label, |x| vec![0.0; x.len()]).with_divergence(|_| 0.0)
            }
            VectorFieldSpec::Identity { scale, center } => {
                let scale = *scale;
                let center = center.clone().unwrap_or_else(|| vec![0.0; p]);
                if center.len() != p {
                    return Err(Error::DimensionMismatch { expected: p, got: center.len() });
                }
                VectorField::new(label, move |x| {
                    x.iter().zip(&center).map(|(v, c)| scale * (v - c)).collect()
                })
                .with_divergence(move |x| scale * x.len() as f64)
            }
            VectorFieldSpec::JsShrinkage { c } => js_shrinkage(*c, label),
            VectorFieldSpec::LogGradient { m } => log_gradient(&m.profile(p), p, label),
            VectorFieldSpec::Linear { rows } => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(Error::InvalidSpec(format!("linear field needs a {p}x{p} matrix")));
                }
                let trace: f64 = (0..p).map(|i| rows[i][i]).sum();
                let rows = rows.clone();
                VectorField::new(label, move |x| {
                    rows.iter().map(|r| super::dot(r, x)).collect()
                })
                .with_divergence(move |_| trace)
            }
        })
    }
}

fn js_shrinkage(c: f64, label: String) -> VectorField {
    VectorField::new(label, move |x| {
        let n2 = norm_sq(x);
        x.iter().map(|v| -c * v / n2).collect()
    })
    .with_divergence(move |x| -c * (x.len() as f64 - 2.0) / norm_sq(x))
    .with_singularity(SingularSet::Origin)
}

/// `grad m / m = 2 F'(t)/F(t) x`, divergence `lap m / m - |grad m|^2 / m^2`.
fn log_gradient(m: &RadialPower, p: usize, label: String) -> VectorField {
    let m = *m;
    VectorField::new(label, move |x| {
        let t = norm_sq(x);
        let ratio = 2.0 * m.derivative(1, t) / m.derivative(0, t);
        x.iter().map(|v| ratio * v).collect()
    })
    .with_divergence(move |x| {
        let t = norm_sq(x);
        let f = m.derivative(0, t);
        let d1 = m.derivative(1, t);
        m.laplacian_at(t, p) / f - 4.0 * d1 * d1 * t / (f * f)
    })
    .with_singularity(m.singular_set())
}

/// Result of a by-name field lookup.
#[derive(Debug, Clone)]
pub enum Field {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl Field {
    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            Field::Scalar(f) => Ok(f),
            Field::Vector(v) => Err(Error::InvalidSpec(format!("`{}` is a vector field", v.name()))),
        }
    }

    pub fn into_vector(self) -> Result<VectorField> {
        match self {
            Field::Vector(v) => Ok(v),
            Field::Scalar(f) => Err(Error::InvalidSpec(format!("`{}` is a scalar field", f.name()))),
        }
    }
}

/// Looks up a field family by name with positional parameters.
///
/// Names: `constant(c)`, `fundamental_harmonic`, `norm_power(a[, scale])`,
/// `shifted_norm_power(a, b)`, `js_shrinkage(c)`, `prior_shifted_power(a, b)`.
pub fn field_library(name: &str, params: &[f64], p: usize) -> Result<Field> {
    let need = |n: usize| -> Result<()> {
        if params.len() < n {
            Err(Error::InvalidSpec(format!("`{name}` needs {n} parameter(s), got {}", params.len())))
        } else {
            Ok(())
        }
    };
    let spec = match name {
        "constant" => {
            need(1)?;
            FieldSpec::Constant { c: params[0] }
        }
        "fundamental_harmonic" => FieldSpec::FundamentalHarmonic,
        "norm_power" => {
            need(1)?;
            FieldSpec::NormPower { power: params[0], scale: params.get(1).copied().unwrap_or(1.0) }
        }
        "shifted_norm_power" => {
            need(2)?;
            FieldSpec::ShiftedNormPower { a: params[0], b: params[1], scale: 1.0 }
        }
        "prior_shifted_power" => {
            need(2)?;
            FieldSpec::PriorShiftedPower { a: params[0], b: params[1] }
        }
        "js_shrinkage" => {
            need(1)?;
            return Ok(Field::Vector(VectorFieldSpec::JsShrinkage { c: params[0] }.build(p)?));
        }
        other => return Err(Error::UnknownField(other.to_string())),
    };
    Ok(Field::Scalar(spec.build(p)))
}
