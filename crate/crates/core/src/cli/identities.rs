//! The identity suite run by `verify-identities`: three positive cases per
//! identity; the negative control runs the broken variant of each first case.

use crate::calculus::{norm_sq, FieldSpec, JointField, VectorFieldSpec};
use crate::error::{Error, Result};
use crate::risk_engine::identities::{
    verify_corollary_a, verify_lemma_a1_i, verify_lemma_a1_ii, verify_lemma_a5, verify_stein_identity, Control,
    IdentityReport, SFunction,
};
use crate::risk_engine::McConfig;

pub const NAMES: [&str; 5] = ["stein", "lemma-a1-i", "lemma-a1-ii", "lemma-a5", "corollary-a"];

fn e1(p: usize, r: f64) -> Vec<f64> {
    let mut t = vec![0.0; p];
    t[0] = r;
    t
}

/// Residual cases use the fixed radius sqrt(p+k) and |θ| = 5, which keeps X
/// away from the origin so that singular fields have finite variance.
const RESIDUAL: (usize, usize) = (6, 4);

fn residual_radius() -> f64 {
    ((RESIDUAL.0 + RESIDUAL.1) as f64).sqrt()
}

pub fn run(name: &str, control: Control, n: u64, seed: u64, threads: Option<usize>) -> Result<Vec<IdentityReport>> {
    let cfg = McConfig { n, seed, threads };
    let cases = match name {
        "stein" => stein(control, &cfg)?,
        "lemma-a1-i" => lemma_a1_i(control, &cfg)?,
        "lemma-a1-ii" => lemma_a1_ii(control, &cfg)?,
        "lemma-a5" => lemma_a5(control, &cfg)?,
        "corollary-a" => corollary_a(control, &cfg)?,
        _ => return Err(Error::InvalidSpec(format!("unknown identity `{name}`"))),
    };
    Ok(if control == Control::Broken { cases.into_iter().take(1).collect() } else { cases })
}

fn stein(control: Control, cfg: &McConfig) -> Result<Vec<IdentityReport>> {
    let id = VectorFieldSpec::Identity { scale: 1.0, center: None }.build(5)?;
    let mut out = vec![verify_stein_identity(&id, &e1(5, 1.0), 1.0, control, cfg)?];
    if control == Control::Faithful {
        let js = VectorFieldSpec::JsShrinkage { c: 3.0 }.build(5)?;
        out.push(verify_stein_identity(&js, &[0.0; 5], 1.0, control, cfg)?);
        let lg = VectorFieldSpec::LogGradient { m: FieldSpec::ShiftedNormPower { a: 1.0, b: 1.5, scale: 1.0 } }.build(4)?;
        out.push(verify_stein_identity(&lg, &[0.5, -1.0, 0.0, 2.0], 2.0, control, cfg)?);
    }
    Ok(out)
}

fn lemma_a1_i(control: Control, cfg: &McConfig) -> Result<Vec<IdentityReport>> {
    let (p, k) = (5usize, 4usize);
    let c = (p as f64 - 2.0) / (k as f64 + 2.0);
    let js = JointField::separable(VectorFieldSpec::JsShrinkage { c }.build(p)?, 1.0);
    let mut out = vec![verify_lemma_a1_i(&js, &e1(p, 1.0), 1.0, k, control, cfg)?];
    if control == Control::Faithful {
        let id = JointField::separable(VectorFieldSpec::Identity { scale: 1.0, center: None }.build(p)?, 2.0);
        out.push(verify_lemma_a1_i(&id, &e1(p, 2.0), 0.5, k, control, cfg)?);
        let lg = VectorFieldSpec::LogGradient { m: FieldSpec::ShiftedNormPower { a: 1.0, b: 1.0, scale: 1.0 } }.build(3)?;
        out.push(verify_lemma_a1_i(&JointField::separable(lg, 0.5), &[1.0, 1.0, 0.0], 2.0, 6, control, cfg)?);
    }
    Ok(out)
}

fn lemma_a1_ii(control: Control, cfg: &McConfig) -> Result<Vec<IdentityReport>> {
    let mut out = vec![verify_lemma_a1_ii(&SFunction::power(1.0), &e1(3, 1.0), 1.0, 4, control, cfg)?];
    if control == Control::Faithful {
        out.push(verify_lemma_a1_ii(&SFunction::power(2.0), &e1(3, 1.0), 1.5, 5, control, cfg)?);
        // Mixed dependence, derivative in s by finite differences.
        let h = SFunction::new("s^1.5 / (1 + |x|^2)", |x, s| s.powf(1.5) / (1.0 + norm_sq(x)));
        out.push(verify_lemma_a1_ii(&h, &[1.0, -0.5, 0.0, 0.25], 2.0, 6, control, cfg)?);
    }
    Ok(out)
}

fn lemma_a5(control: Control, cfg: &McConfig) -> Result<Vec<IdentityReport>> {
    let (p, k) = RESIDUAL;
    let (r, theta) = (residual_radius(), e1(p, 5.0));
    let shift = VectorFieldSpec::Identity { scale: 1.0, center: Some(theta.clone()) }.build(p)?;
    let mut out = vec![verify_lemma_a5(&shift, 0.0, r, &theta, k, control, cfg)?];
    if control == Control::Faithful {
        let js = VectorFieldSpec::JsShrinkage { c: (p - 2) as f64 }.build(p)?;
        out.push(verify_lemma_a5(&js, 2.0, r, &theta, k, control, cfg)?);
        let id = VectorFieldSpec::Identity { scale: 1.0, center: None }.build(p)?;
        out.push(verify_lemma_a5(&id, 4.0, r, &theta, k, control, cfg)?);
    }
    Ok(out)
}

fn corollary_a(control: Control, cfg: &McConfig) -> Result<Vec<IdentityReport>> {
    let (p, k) = RESIDUAL;
    let (r, theta) = (residual_radius(), e1(p, 5.0));
    let one = FieldSpec::Constant { c: 1.0 }.build(p);
    let mut out = vec![verify_corollary_a(&one, 0.0, r, &theta, k, control, cfg)?];
    if control == Control::Faithful {
        let inv = FieldSpec::NormPower { power: 2.0, scale: 0.5 }.build(p);
        out.push(verify_corollary_a(&inv, 4.0, r, &theta, k, control, cfg)?);
        let quad = FieldSpec::NormPower { power: -2.0, scale: 1.0 }.build(p);
        out.push(verify_corollary_a(&quad, 2.0, r, &theta, k, control, cfg)?);
    }
    Ok(out)
}
