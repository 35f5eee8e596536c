//! Grid checks of the differential inequalities that make a corrected loss
//! estimator dominate the unbiased one, and the constants (K0, k, α, d)
//! those inequalities depend on.
//!
//! A grid check can refute an inequality but never prove it: every report
//! carries that caveat. Points are `r * u` for radii `r` and directions `u`
//! (the first direction is `e1`, the rest are seeded uniform draws).

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{dot, norm_sq, JointField, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::samplers::{replication_rng, unit_sphere, MixingSpec, RadialSpec};

pub const EVIDENCE_NOTE: &str = "grid evaluation: evidence, not proof";

/// A point is strictly negative when its value is below `-STRICT_REL` times the
/// sum of absolute values of its terms.
const STRICT_REL: f64 = 1e-9;

/// Relative accuracy requested from the tail quadratures.
pub const QUADRATURE_REL_TOL: f64 = 1e-8;

/// Integrands are truncated once they fall below this fraction of their peak.
pub const TRUNCATION_REL: f64 = 1e-15;

fn default_seed() -> u64 {
    0x600D_5EED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radii: Vec<f64>,
    pub directions_per_radius: usize,
    /// Values of the variance statistic for the unknown-variance check.
    pub s_values: Vec<f64>,
    pub tolerance: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            radii: log_spaced(0.1, 50.0, 40),
            directions_per_radius: 64,
            s_values: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            tolerance: 1e-9,
            seed: default_seed(),
        }
    }
}

/// `n` points from `lo` to `hi` (inclusive) with constant ratio.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone)]
pub struct GridPoint {
    pub radius: f64,
    pub direction: usize,
    pub x: Vec<f64>,
}

impl GridSpec {
    pub fn radial(radii: Vec<f64>, directions_per_radius: usize) -> Self {
        Self { radii, directions_per_radius, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.directions_per_radius == 0 {
            return Err(Error::InvalidSpec("grid needs at least one radius and one direction".into()));
        }
        if self.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidSpec("grid radii must be positive (the origin is singular)".into()));
        }
        if self.s_values.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidSpec("grid s values must be positive".into()));
        }
        Ok(())
    }

    pub fn directions(&self, p: usize) -> Vec<Vec<f64>> {
        (0..self.directions_per_radius)
            .map(|j| {
                if j == 0 {
                    let mut e1 = vec![0.0; p];
                    e1[0] = 1.0;
                    e1
                } else {
                    unit_sphere(&mut replication_rng(self.seed, j as u64, 0), p)
                }
            })
            .collect()
    }

    pub fn points(&self, p: usize) -> Result<Vec<GridPoint>> {
        self.validate()?;
        let dirs = self.directions(p);
        Ok(self
            .radii
            .iter()
            .flat_map(|&r| {
                dirs.iter().enumerate().map(move |(j, u)| GridPoint {
                    radius: r,
                    direction: j,
                    x: u.iter().map(|v| r * v).collect(),
                })
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Every point strictly negative.
    Strict,
    /// Within tolerance of zero somewhere, never above it.
    Boundary,
    Fail,
}

impl Verdict {
    pub fn passes(self) -> bool {
        self != Verdict::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub radius: f64,
    pub direction: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    pub lhs: f64,
    /// Sum of absolute values of the terms of `lhs`.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub check: String,
    pub verdict: Verdict,
    pub pass: bool,
    pub max_lhs: f64,
    pub worst_radius: f64,
    pub tolerance: f64,
    pub note: String,
    pub points: Vec<PointRecord>,
}

impl ConditionReport {
    fn from_points(check: impl Into<String>, points: Vec<PointRecord>, tolerance: f64) -> Self {
        let worst = points
            .iter()
            .max_by(|a, b| a.lhs.total_cmp(&b.lhs))
            .cloned()
            .expect("validated grids are nonempty");
        let pass = worst.lhs <= tolerance && points.iter().all(|p| p.lhs.is_finite());
        let strict = points.iter().all(|p| p.lhs < -STRICT_REL * p.scale);
        let verdict = match (pass, strict) {
            (false, _) => Verdict::Fail,
            (true, true) => Verdict::Strict,
            (true, false) => Verdict::Boundary,
        };
        Self {
            check: check.into(),
            verdict,
            pass,
            max_lhs: worst.lhs,
            worst_radius: worst.radius,
            tolerance,
            note: EVIDENCE_NOTE.into(),
            points,
        }
    }

    pub fn lhs_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lhs).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["check", "radius", "direction", "s", "lhs", "scale"])?;
        for p in &self.points {
            w.write_record([
                self.check.clone(),
                format!("{:.16e}", p.radius),
                p.direction.to_string(),
                p.s.map(|s| format!("{s:.16e}")).unwrap_or_default(),
                format!("{:.16e}", p.lhs),
                format!("{:.16e}", p.scale),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn evaluate<F>(check: &str, p: usize, grid: &GridSpec, terms: F) -> Result<ConditionReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let points = grid.points(p)?;
    let records = points
        .par_iter()
        .map(|pt| {
            let t = terms(&pt.x)?;
            Ok(PointRecord {
                radius: pt.radius,
                direction: pt.direction,
                s: None,
                lhs: t.iter().sum(),
                scale: t.iter().map(|v| v.abs()).sum(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport::from_points(check, records, grid.tolerance))
}

/// `γ² + 4 ∇γᵗ g + 2 Δγ ≤ 0` for `δ0 - γ` against SURE of `x + g(x)`.
pub fn check_known_var(gamma: &ScalarField, g: &VectorField, grid: &GridSpec, p: usize) -> Result<ConditionReport> {
    evaluate("known_var", p, grid, |x| {
        let gam = gamma.value(x);
        Ok(vec![gam * gam, 4.0 * dot(&gamma.gradient(x)?, &g.value(x)), 2.0 * gamma.laplacian(x)?])
    })
}

/// Grid infimum of `m |Δξ| / ξ²`.
pub fn compute_k0(m: &ScalarField, xi: &ScalarField, grid: &GridSpec, p: usize) -> Result<f64> {
    let points = grid.points(p)?;
    let values = points
        .par_iter()
        .map(|pt| {
            let v = xi.value(&pt.x);
            Ok(m.value(&pt.x) * xi.laplacian(&pt.x)?.abs() / (v * v))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.into_iter().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains_open(&self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }
}

/// Admissible `α` for `γ = -α sgn(Δξ) ξ/m`: the open interval `(0, 2 K0)`.
pub fn alpha_range_thm21(m: &ScalarField, xi: &ScalarField, grid: &GridSpec, p: usize) -> Result<Interval> {
    Ok(Interval { lo: 0.0, hi: 2.0 * compute_k0(m, xi, grid, p)? })
}

/// `γ² + (2/(k+2)) Δγ + 4 gᵗ∇γ + 4 γ |g|² ≤ 0` over points and `s` values.
pub fn check_unknown_var(gamma: &ScalarField, g: &JointField, k: usize, grid: &GridSpec, p: usize) -> Result<ConditionReport> {
    if grid.s_values.is_empty() {
        return Err(Error::InvalidSpec("unknown-variance check needs s values".into()));
    }
    let points = grid.points(p)?;
    let kf = k as f64;
    let records = points
        .par_iter()
        .flat_map_iter(|pt| {
            grid.s_values.iter().map(move |&s| {
                let x = &pt.x;
                let gv = g.value(x, s);
                let gam = gamma.value(x);
                let terms = [
                    gam * gam,
                    2.0 / (kf + 2.0) * gamma.laplacian(x)?,
                    4.0 * dot(&gv, &gamma.gradient(x)?),
                    4.0 * gam * norm_sq(&gv),
                ];
                Ok(PointRecord {
                    radius: pt.radius,
                    direction: pt.direction,
                    s: Some(s),
                    lhs: terms.iter().sum(),
                    scale: terms.iter().map(|v| v.abs()).sum(),
                })
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport::from_points("unknown_var", records, grid.tolerance))
}

fn finite_moment(mixing: &MixingSpec, q: f64, what: &str) -> Result<f64> {
    mixing
        .moment(q)
        .filter(|v| v.is_finite() && *v > 0.0)
        .ok_or_else(|| Error::DomainError(format!("mixing law {mixing:?} violates {what}: E[ς^{q}] is infinite")))
}

/// `k = 2 ∫ς^{p/2} dG / ∫ς^{p/2-2} dG`, after checking that `∫ς^{p/2} dG` and
/// `∫ς^{-2} dG` are finite.
pub fn mixture_k(mixing: &MixingSpec, p: usize) -> Result<f64> {
    mixing.validate()?;
    let half = p as f64 / 2.0;
    let top = finite_moment(mixing, half, "the moment condition on ς^{p/2}")?;
    finite_moment(mixing, -2.0, "the fourth-moment condition")?;
    let bottom = finite_moment(mixing, half - 2.0, "the moment condition on ς^{p/2-2}")?;
    Ok(2.0 * top / bottom)
}

/// The reciprocal ratio `2 ∫ς^{p/2-2} dG / ∫ς^{p/2} dG`. For a point mass at
/// `ς` it equals `2/ς²`, the Stein constant of `N(θ, I/ς)`, and it agrees with
/// the generating-function constant for normal laws; reported alongside
/// [`mixture_k`] as a cross-check.
pub fn mixture_k_reciprocal(mixing: &MixingSpec, p: usize) -> Result<f64> {
    Ok(4.0 / mixture_k(mixing, p)?)
}

/// `k Δγ + γ² < 0`.
pub fn check_mixture(gamma: &ScalarField, k_const: f64, grid: &GridSpec, p: usize) -> Result<ConditionReport> {
    evaluate("mixture", p, grid, |x| {
        let gam = gamma.value(x);
        Ok(vec![k_const * gamma.laplacian(x)?, gam * gam])
    })
}

/// The residual theorems drop a term `∝ -E[|U|^6 γ]`, which is only safe
/// for `γ ≥ 0`; a negative `γ` anywhere on the grid fails the check.
fn require_nonnegative(mut report: ConditionReport, gamma: &ScalarField, grid: &GridSpec, p: usize) -> Result<ConditionReport> {
    let negative = grid.points(p)?.iter().any(|pt| gamma.value(&pt.x) < 0.0);
    if negative {
        report.pass = false;
        report.verdict = Verdict::Fail;
        report.note = format!("gamma < 0 on the grid: the condition is only sufficient for nonnegative gamma; {}", report.note);
    }
    Ok(report)
}

/// `γ² + 2 Δγ / ((k+4)(k+6)) ≤ 0` with `γ ≥ 0`.
pub fn check_residual_ls(gamma: &ScalarField, k: usize, grid: &GridSpec, p: usize) -> Result<ConditionReport> {
    let c = 2.0 / ((k as f64 + 4.0) * (k as f64 + 6.0));
    let report = evaluate("residual_ls", p, grid, |x| {
        let gam = gamma.value(x);
        Ok(vec![gam * gam, c * gamma.laplacian(x)?])
    })?;
    require_nonnegative(report, gamma, grid, p)
}

/// `γ² - (4/(k+2)) γ div g + (4/(k+6)) div(γ g) + 2 Δγ/((k+4)(k+6)) ≤ 0`
/// with `γ ≥ 0`.
pub fn check_residual_shrink(
    gamma: &ScalarField,
    g: &VectorField,
    k: usize,
    grid: &GridSpec,
    p: usize,
) -> Result<ConditionReport> {
    let kf = k as f64;
    let c = 2.0 / ((kf + 4.0) * (kf + 6.0));
    let report = evaluate("residual_shrink", p, grid, |x| {
        let gam = gamma.value(x);
        let div_g = g.divergence(x)?;
        let div_gamma_g = dot(&gamma.gradient(x)?, &g.value(x)) + gam * div_g;
        Ok(vec![
            gam * gam,
            -4.0 / (kf + 2.0) * gam * div_g,
            4.0 / (kf + 6.0) * div_gamma_g,
            c * gamma.laplacian(x)?,
        ])
    })?;
    require_nonnegative(report, gamma, grid, p)
}

/// `(Δπ/π)² - 2 Δ²π/π ≤ 0`; the same form applies to marginals.
pub fn check_prior_condition(pi: &ScalarField, grid: &GridSpec, p: usize) -> Result<ConditionReport> {
    evaluate("prior", p, grid, |x| {
        let v = pi.value(x);
        let lap = pi.laplacian(x)? / v;
        Ok(vec![lap * lap, -2.0 * pi.bilaplacian(x)? / v])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub value: f64,
    pub verdict: Verdict,
    pub max_lhs: f64,
}

/// Runs a check for each parameter value.
pub fn scan<F>(values: &[f64], mut check: F) -> Result<Vec<ScanRow>>
where
    F: FnMut(f64) -> Result<ConditionReport>,
{
    values
        .iter()
        .map(|&v| {
            let r = check(v)?;
            Ok(ScanRow { value: v, verdict: r.verdict, max_lhs: r.max_lhs })
        })
        .collect()
}

/// Generating function `g` of a spherical density `p(x) ∝ g(|x - θ|²)` on R^p.
#[derive(Clone)]
pub enum GeneratingFunction {
    Density(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Radial(RadialSpec),
}

impl std::fmt::Debug for GeneratingFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeneratingFunction::Density(_) => f.write_str("Density(..)"),
            GeneratingFunction::Radial(r) => write!(f, "Radial({r:?})"),
        }
    }
}

impl GeneratingFunction {
    pub fn density(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        GeneratingFunction::Density(Arc::new(f))
    }

    /// The generating function up to a constant factor.
    pub fn resolve(&self, p: usize) -> Result<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
        let half = p as f64 / 2.0;
        Ok(match self {
            GeneratingFunction::Density(f) => f.clone(),
            GeneratingFunction::Radial(RadialSpec::Fixed { .. }) => {
                return Err(Error::Unsupported("a fixed radius has no density on R^p".into()))
            }
            GeneratingFunction::Radial(RadialSpec::Chi { dof, scale }) => {
                let (e, v) = ((dof - p as f64) / 2.0, scale * scale);
                Arc::new(move |z: f64| if e == 0.0 { (-z / (2.0 * v)).exp() } else { z.powf(e) * (-z / (2.0 * v)).exp() })
            }
            GeneratingFunction::Radial(RadialSpec::MixtureInduced { mixing }) => match *mixing {
                MixingSpec::PointMass { value } => Arc::new(move |z: f64| value.powf(half) * (-value * z / 2.0).exp()),
                MixingSpec::TwoPoint { s1, s2, w } => Arc::new(move |z: f64| {
                    w * s1.powf(half) * (-s1 * z / 2.0).exp() + (1.0 - w) * s2.powf(half) * (-s2 * z / 2.0).exp()
                }),
                MixingSpec::Gamma { shape, rate } => Arc::new(move |z: f64| (rate + z / 2.0).powf(-(shape + half))),
            },
        })
    }
}

/// `∫_s^∞ f`, truncated where `|f|` drops below `TRUNCATION_REL` of its
/// sampled peak, on doubling panels with tanh-sinh quadrature per panel.
pub fn tail_integral(f: &dyn Fn(f64) -> f64, s: f64) -> Result<f64> {
    let mut knots = vec![s];
    let mut width = 1.0;
    let mut peak = f(s).abs();
    loop {
        let z = s + width;
        let v = f(z).abs();
        peak = peak.max(v);
        knots.push(z);
        if v < TRUNCATION_REL * peak && knots.len() > 4 {
            break;
        }
        if knots.len() > 200 {
            return Err(Error::DomainError(format!("integrand does not decay from s = {s}")));
        }
        width *= 2.0;
    }
    let panels: Vec<(f64, f64)> = knots.windows(2).map(|w| (w[0], w[1])).collect();
    let pass = |tol_for: &dyn Fn(f64, f64) -> f64| -> f64 {
        panels
            .iter()
            .map(|&(a, b)| quadrature::integrate(f, a, b, tol_for(a, b)).integral)
            .sum()
    };
    let rough = pass(&|_, _| 1e-6 * peak.max(f64::MIN_POSITIVE));
    let target = QUADRATURE_REL_TOL * rough.abs().max(f64::MIN_POSITIVE) / panels.len() as f64;
    Ok(pass(&|_, _| target))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalPoint {
    pub s: f64,
    /// `∫_s^∞ g / (2 g(s))`.
    pub first_ratio: f64,
    /// `(∫_s^∞ z g - s ∫_s^∞ g) / (2 g(s))`.
    pub k_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralSphericalReport {
    /// `∫_s^∞ g / (2 g(s)) ≤ δ0/p` held at every `s` (up to quadrature accuracy).
    pub first_condition: bool,
    pub delta0_over_p: f64,
    pub max_first_ratio: f64,
    /// Grid infimum of the second bound: any `0 < k < k_const` is admissible.
    pub k_const: f64,
    pub note: String,
    pub points: Vec<SphericalPoint>,
}

/// Default `s` grid: zero plus 60 log-spaced values in `[1e-3, 100]`.
pub fn default_s_grid() -> Vec<f64> {
    std::iter::once(0.0).chain(log_spaced(1e-3, 100.0, 60)).collect()
}

pub fn check_general_spherical(
    gen: &GeneratingFunction,
    delta0: f64,
    p: usize,
    s_grid: &[f64],
) -> Result<GeneralSphericalReport> {
    if s_grid.is_empty() || s_grid.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidSpec("s grid must be nonempty and nonnegative".into()));
    }
    let g = gen.resolve(p)?;
    let points = s_grid
        .par_iter()
        .map(|&s| {
            let gs = g(s);
            if !(gs > 0.0 && gs.is_finite()) {
                return Err(Error::DomainError(format!("generating function must be positive at s = {s}")));
            }
            let tail = tail_integral(&|z| g(z), s)?;
            let excess = tail_integral(&|z| (z - s) * g(z), s)?;
            Ok(SphericalPoint { s, first_ratio: tail / (2.0 * gs), k_bound: excess / (2.0 * gs) })
        })
        .collect::<Result<Vec<_>>>()?;
    let bound = delta0 / p as f64;
    let max_first_ratio = points.iter().map(|p| p.first_ratio).fold(f64::NEG_INFINITY, f64::max);
    let k_const = points.iter().map(|p| p.k_bound).fold(f64::INFINITY, f64::min);
    Ok(GeneralSphericalReport {
        first_condition: max_first_ratio <= bound * (1.0 + 10.0 * QUADRATURE_REL_TOL),
        delta0_over_p: bound,
        max_first_ratio,
        k_const,
        note: EVIDENCE_NOTE.into(),
        points,
    })
}
