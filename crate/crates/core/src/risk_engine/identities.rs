//! Monte Carlo checks of the integration-by-parts identities behind every
//! unbiased loss estimator. Each verifier evaluates both sides on common
//! draws and passes when the paired difference is within 4 standard errors
//! of zero. `Control::Broken` perturbs the right-hand side in a documented
//! way so that the verifier is seen to fail.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{accumulate, McConfig, SE_MULTIPLIER};
use crate::calculus::{dot, norm_sq, JointField, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::samplers::{Observation, RadialSpec, SamplerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    Faithful,
    Broken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub case: String,
    pub control: Control,
    pub lhs_mean: f64,
    pub rhs_mean: f64,
    pub diff_mean: f64,
    pub diff_se: f64,
    pub n: u64,
    pub seed: u64,
    pub rejections: u64,
    pub pass: bool,
}

impl IdentityReport {
    /// |difference| in units of its standard error.
    pub fn z(&self) -> f64 {
        if self.diff_se > 0.0 {
            self.diff_mean.abs() / self.diff_se
        } else if self.diff_mean == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::ShrinkageSingularity)
    }
}

fn run<F>(identity: &str, case: &str, control: Control, sampler: &SamplerSpec, cfg: &McConfig, sides: F) -> Result<IdentityReport>
where
    F: Fn(&Observation) -> Result<(f64, f64)> + Sync,
{
    sampler.validate()?;
    let acc = accumulate(cfg.n, cfg.threads, |i, attempt| {
        let obs = sampler.draw_replication(cfg.seed, i, attempt);
        let (l, r) = sides(&obs)?;
        let (l, r) = (finite(l)?, finite(r)?);
        Ok([l, r, l - r])
    })?;
    let [l, r, d] = acc.stats;
    let diff_se = d.std_error();
    Ok(IdentityReport {
        identity: identity.into(),
        case: case.into(),
        control,
        lhs_mean: l.mean,
        rhs_mean: r.mean,
        diff_mean: d.mean,
        diff_se,
        n: cfg.n,
        seed: cfg.seed,
        rejections: acc.rejections,
        pass: d.mean.abs() <= SE_MULTIPLIER * diff_se,
    })
}

fn centered(x: &[f64], theta: &[f64]) -> Vec<f64> {
    x.iter().zip(theta).map(|(a, b)| a - b).collect()
}

/// `E[(X-θ)ᵗ g(X)] = σ² E[div g(X)]` under `N(θ, σ² I)`. Broken: the sign of
/// the right-hand side is flipped.
pub fn verify_stein_identity(g: &VectorField, theta: &[f64], sigma2: f64, control: Control, cfg: &McConfig) -> Result<IdentityReport> {
    let sampler = SamplerSpec::normal(theta.len(), sigma2).with_theta(theta.to_vec());
    let sign = if control == Control::Broken { -1.0 } else { 1.0 };
    run("stein", g.name(), control, &sampler, cfg, |obs| {
        let lhs = dot(&centered(&obs.x, theta), &g.value(&obs.x));
        Ok((lhs, sign * sigma2 * g.divergence(&obs.x)?))
    })
}

/// Part (i): `E[(X-θ)ᵗ g(X,S) / σ²] = E[div_x g(X,S)]` with `S ~ σ² χ²_k`.
/// Broken: the sign of the right-hand side is flipped.
pub fn verify_lemma_a1_i(g: &JointField, theta: &[f64], sigma2: f64, k: usize, control: Control, cfg: &McConfig) -> Result<IdentityReport> {
    let sampler = SamplerSpec::normal_with_variance(theta.len(), k, sigma2).with_theta(theta.to_vec());
    let sign = if control == Control::Broken { -1.0 } else { 1.0 };
    run("lemma_a1_i", g.name(), control, &sampler, cfg, |obs| {
        let s = obs.require_s()?;
        let lhs = dot(&centered(&obs.x, theta), &g.value(&obs.x, s)) / sigma2;
        Ok((lhs, sign * g.divergence_x(&obs.x, s)?))
    })
}

type SFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Real function `h(x, s)` with an optional closed-form `∂h/∂s`.
#[derive(Clone)]
pub struct SFunction {
    name: String,
    eval: SFn,
    ds: Option<SFn>,
}

impl std::fmt::Debug for SFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SFunction").field("name", &self.name).field("analytic_ds", &self.ds.is_some()).finish()
    }
}

impl SFunction {
    pub fn new(name: impl Into<String>, eval: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), eval: Arc::new(eval), ds: None }
    }

    pub fn with_ds(mut self, ds: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        self.ds = Some(Arc::new(ds));
        self
    }

    /// `h = s^q`.
    pub fn power(q: f64) -> Self {
        Self::new(format!("s^{q}"), move |_, s| s.powf(q)).with_ds(move |_, s| q * s.powf(q - 1.0))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, x: &[f64], s: f64) -> f64 {
        (self.eval)(x, s)
    }

    /// `∂h/∂s`, central differences away from `s = 0`, one-sided near it.
    pub fn ds(&self, x: &[f64], s: f64) -> f64 {
        if let Some(d) = &self.ds {
            return d(x, s);
        }
        let h = f64::EPSILON.cbrt() * s.max(1.0);
        let f = |t: f64| (self.eval)(x, t);
        if s > 2.0 * h {
            (f(s + h) - f(s - h)) / (2.0 * h)
        } else {
            (-3.0 * f(s) + 4.0 * f(s + h) - f(s + 2.0 * h)) / (2.0 * h)
        }
    }
}

/// Part (ii): `E[h(X,S)/σ²] = E[2 ∂h/∂S + (k-2) h(X,S)/S]`. Broken: `k - 2`
/// is replaced by `k`.
pub fn verify_lemma_a1_ii(h: &SFunction, theta: &[f64], sigma2: f64, k: usize, control: Control, cfg: &McConfig) -> Result<IdentityReport> {
    let sampler = SamplerSpec::normal_with_variance(theta.len(), k, sigma2).with_theta(theta.to_vec());
    let c = if control == Control::Broken { k as f64 } else { k as f64 - 2.0 };
    run("lemma_a1_ii", h.name(), control, &sampler, cfg, |obs| {
        let s = obs.require_s()?;
        let hv = h.value(&obs.x, s);
        Ok((hv / sigma2, 2.0 * h.ds(&obs.x, s) + c * hv / s))
    })
}

fn residual_sampler(theta: &[f64], k: usize, r: f64) -> SamplerSpec {
    SamplerSpec::spherical_residual(theta.len(), k, RadialSpec::Fixed { r }).with_theta(theta.to_vec())
}

/// `E_R[h(|U|²)(X-θ)ᵗ g(X)] = E_R[H(|U|²)/|U|^{k-2} div g(X)]` for
/// `h(t) = t^{q/2}`, where `H(t) = ∫_0^t h(v) v^{k/2-1} dv / 2 = t^{(k+q)/2}/(k+q)`.
/// Broken: `H` loses its factor `1/2`.
pub fn verify_lemma_a5(
    g: &VectorField,
    q: f64,
    r: f64,
    theta: &[f64],
    k: usize,
    control: Control,
    cfg: &McConfig,
) -> Result<IdentityReport> {
    let sampler = residual_sampler(theta, k, r);
    let kq = k as f64 + q;
    if !(kq > 0.0) {
        return Err(Error::InvalidSpec(format!("need k + q > 0, got {kq}")));
    }
    let factor = if control == Control::Broken { 2.0 } else { 1.0 };
    run("lemma_a5", &format!("{} h=t^{}", g.name(), q / 2.0), control, &sampler, cfg, |obs| {
        let t = norm_sq(obs.require_u()?);
        let lhs = t.powf(q / 2.0) * dot(&centered(&obs.x, theta), &g.value(&obs.x));
        let rhs = factor * t.powf(q / 2.0 + 1.0) / kq * g.divergence(&obs.x)?;
        Ok((lhs, rhs))
    })
}

/// `E_R[|U|^q |X-θ|² γ] = p/(k+q) E_R[|U|^{q+2} γ] + E_R[|U|^{q+4} Δγ]/((k+q)(k+q+2))`.
/// Broken: `p/(k+q)` becomes `p/(k+q+2)`.
pub fn verify_corollary_a(
    gamma: &ScalarField,
    q: f64,
    r: f64,
    theta: &[f64],
    k: usize,
    control: Control,
    cfg: &McConfig,
) -> Result<IdentityReport> {
    let sampler = residual_sampler(theta, k, r);
    let (pf, kq) = (theta.len() as f64, k as f64 + q);
    let lead = if control == Control::Broken { pf / (kq + 2.0) } else { pf / kq };
    run("corollary_a", &format!("{} q={q}", gamma.name()), control, &sampler, cfg, |obs| {
        let t = norm_sq(obs.require_u()?);
        let uq = t.powf(q / 2.0);
        let gv = gamma.value(&obs.x);
        let lhs = uq * norm_sq(&centered(&obs.x, theta)) * gv;
        let rhs = lead * uq * t * gv + uq * t * t * gamma.laplacian(&obs.x)? / (kq * (kq + 2.0));
        Ok((lhs, rhs))
    })
}

/// `E_R[|X-θ|^{2a} |U|^{2b}]` for `(X-θ, U)` uniform on the radius-`r` sphere
/// of R^{p+k}: `|X-θ|²/r² ~ Beta(p/2, k/2)`.
pub fn sphere_projection_moment(p: usize, k: usize, r: f64, a: f64, b: f64) -> f64 {
    let (hp, hk) = (p as f64 / 2.0, k as f64 / 2.0);
    let ln_beta = |x: f64, y: f64| ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y);
    r.powf(2.0 * (a + b)) * (ln_beta(hp + a, hk + b) - ln_beta(hp, hk)).exp()
}

/// Both sides of the corollary for `γ(x) = |x|²` in closed form; the cross
/// term `2θᵗ(X-θ)` has zero mean against radial weights.
pub fn corollary_a_quadratic(p: usize, k: usize, q: f64, r: f64, theta_norm_sq: f64) -> (f64, f64) {
    let m = |a: f64, b: f64| sphere_projection_moment(p, k, r, a, b);
    let (pf, kq, hq) = (p as f64, k as f64 + q, q / 2.0);
    let lhs = m(2.0, hq) + theta_norm_sq * m(1.0, hq);
    let rhs = pf / kq * (m(1.0, hq + 1.0) + theta_norm_sq * m(0.0, hq + 1.0))
        + 2.0 * pf / (kq * (kq + 2.0)) * m(0.0, hq + 2.0);
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{FieldSpec, VectorFieldSpec};

    fn cfg(n: u64, seed: u64) -> McConfig {
        McConfig { n, seed, threads: None }
    }

    #[test]
    fn stein_identity_linear_and_control() {
        let g = VectorFieldSpec::Identity { scale: 1.0, center: None }.build(4).unwrap();
        let theta = [1.0, 0.0, -1.0, 0.5];
        let ok = verify_stein_identity(&g, &theta, 2.0, Control::Faithful, &cfg(100_000, 1)).unwrap();
        assert!(ok.pass, "{ok:?}");
        assert!((ok.rhs_mean - 8.0).abs() < 1e-12);
        let bad = verify_stein_identity(&g, &theta, 2.0, Control::Broken, &cfg(100_000, 1)).unwrap();
        assert!(!bad.pass);
    }

    #[test]
    fn lemma_a1_power_cases() {
        let theta = [0.0; 3];
        for (q, k) in [(1.0, 4usize), (2.0, 5)] {
            let h = SFunction::power(q);
            let r = verify_lemma_a1_ii(&h, &theta, 1.5, k, Control::Faithful, &cfg(100_000, 2)).unwrap();
            assert!(r.pass, "{r:?}");
        }
        // h = s: the right-hand side is the constant k.
        let r = verify_lemma_a1_ii(&SFunction::power(1.0), &theta, 1.0, 4, Control::Faithful, &cfg(1000, 3)).unwrap();
        assert!((r.rhs_mean - 4.0).abs() < 1e-12);
        let numeric = SFunction::new("s^2", |_, s| s * s);
        assert!((numeric.ds(&[], 3.0) - 6.0).abs() < 1e-8);
        assert!((numeric.ds(&[], 1e-9) - 2e-9).abs() < 1e-8);
    }

    #[test]
    fn closed_form_sphere_moments() {
        let (p, k, r) = (4usize, 3usize, 2.0);
        let n = (p + k) as f64;
        assert!((sphere_projection_moment(p, k, r, 1.0, 0.0) - r * r * p as f64 / n).abs() < 1e-12);
        assert!((sphere_projection_moment(p, k, r, 0.0, 1.0) - r * r * k as f64 / n).abs() < 1e-12);
        let expected = r.powi(4) * (p * (p + 2)) as f64 / (n * (n + 2.0));
        assert!((sphere_projection_moment(p, k, r, 2.0, 0.0) - expected).abs() < 1e-12);
        for q in [0.0, 2.0, 4.0] {
            for t2 in [0.0, 1.0, 9.0] {
                let (l, rr) = corollary_a_quadratic(6, 4, q, 1.7, t2);
                assert!((l - rr).abs() < 1e-12 * l.abs(), "q={q}: {l} vs {rr}");
            }
        }
    }

    #[test]
    fn corollary_quadratic_matches_monte_carlo() {
        let (p, k, q, r) = (5usize, 3usize, 2.0, 1.5);
        let theta = [1.0, 0.0, 0.0, 0.0, 0.0];
        let gamma = FieldSpec::NormPower { power: -2.0, scale: 1.0 }.build(p);
        let rep = verify_corollary_a(&gamma, q, r, &theta, k, Control::Faithful, &cfg(200_000, 4)).unwrap();
        let (l, rr) = corollary_a_quadratic(p, k, q, r, 1.0);
        assert!(rep.pass, "{rep:?}");
        assert!((rep.lhs_mean - l).abs() < 0.02 * l);
        assert!((rep.rhs_mean - rr).abs() < 0.02 * rr);
    }
}
