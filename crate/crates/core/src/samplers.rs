//! Random draws for the normal, scale-mixture, radial-spherical and
//! spherical-with-residual models.
//!
//! Seeding: replication `i` of a run with master seed `s` uses a fresh
//! `ChaCha8Rng` seeded with `subseed(s, i, attempt)`, a splitmix64 chain over the
//! three words. Nothing else is shared between replications, so any schedule of
//! replications over threads yields the same draws. Within one replication the
//! order of consumption is fixed: mixing variable (if any), then radius (if
//! any), then the Gaussian coordinates, then the variance statistic.
//! Normals come from `rand_distr::StandardNormal` (ziggurat) and gamma /
//! chi-square variates from `rand_distr::Gamma` (Marsaglia–Tsang); streams are
//! reproducible for a fixed build of those crates.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::calculus::norm_sq;
use crate::error::{Error, Result};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-derived seed for replication `index`, redraw `attempt`.
pub fn subseed(master: u64, index: u64, attempt: u32) -> u64 {
    let h = splitmix64(master);
    let h = splitmix64(h ^ index);
    splitmix64(h ^ ((attempt as u64) << 32 | 0x5EED))
}

pub fn replication_rng(master: u64, index: u64, attempt: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(master, index, attempt))
}

/// One draw: the location observation with its optional nuisance statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
}

impl Observation {
    pub fn new(x: Vec<f64>) -> Self {
        Self { x, s: None, u: None }
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = Some(s);
        self
    }

    pub fn with_u(mut self, u: Vec<f64>) -> Self {
        self.u = Some(u);
        self
    }

    pub fn require_s(&self) -> Result<f64> {
        self.s.ok_or(Error::MissingStatistic("s"))
    }

    pub fn require_u(&self) -> Result<&[f64]> {
        self.u.as_deref().ok_or(Error::MissingStatistic("u"))
    }
}

/// Law of the precision ς in `X | ς ~ N(θ, I/ς)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingSpec {
    PointMass { value: f64 },
    /// Mass `w` at `s1`, `1 - w` at `s2`.
    TwoPoint { s1: f64, s2: f64, w: f64 },
    Gamma { shape: f64, rate: f64 },
}

impl MixingSpec {
    /// Mixing law that turns the normal into a multivariate t with `nu` dof.
    pub fn student_t(nu: f64) -> Self {
        MixingSpec::Gamma { shape: nu / 2.0, rate: nu / 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MixingSpec::PointMass { value } => value > 0.0 && value.is_finite(),
            MixingSpec::TwoPoint { s1, s2, w } => {
                s1 > 0.0 && s2 > 0.0 && s1.is_finite() && s2.is_finite() && (0.0..=1.0).contains(&w)
            }
            MixingSpec::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("mixing law must put all mass on (0, inf): {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MixingSpec::PointMass { value } => value,
            MixingSpec::TwoPoint { s1, s2, w } => {
                if rng.random::<f64>() < w {
                    s1
                } else {
                    s2
                }
            }
            MixingSpec::Gamma { shape, rate } => {
                Gamma::new(shape, 1.0 / rate).expect("validated gamma").sample(rng)
            }
        }
    }

    /// `E[ς^q]`, or `None` when it diverges.
    pub fn moment(&self, q: f64) -> Option<f64> {
        match *self {
            MixingSpec::PointMass { value } => Some(value.powf(q)),
            MixingSpec::TwoPoint { s1, s2, w } => Some(w * s1.powf(q) + (1.0 - w) * s2.powf(q)),
            MixingSpec::Gamma { shape, rate } => {
                if shape + q <= 0.0 {
                    None
                } else {
                    Some((ln_gamma(shape + q) - ln_gamma(shape) - q * rate.ln()).exp())
                }
            }
        }
    }
}

/// Law of the radius `R = |(X - θ, U)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialSpec {
    Fixed { r: f64 },
    /// `R = scale * sqrt(chi^2_dof)`; with `dof = p + k` this is the normal model.
    Chi { dof: f64, scale: f64 },
    /// `R^2 = chi^2_dim / ς` with `ς` drawn from the mixing law.
    MixtureInduced { mixing: MixingSpec },
}

impl RadialSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RadialSpec::Fixed { r } if *r > 0.0 && r.is_finite() => Ok(()),
            RadialSpec::Chi { dof, scale } if *dof > 0.0 && *scale > 0.0 => Ok(()),
            RadialSpec::MixtureInduced { mixing } => mixing.validate(),
            other => Err(Error::InvalidSpec(format!("radial law must put all mass on (0, inf): {other:?}"))),
        }
    }

    /// Draws `R` for a sphere of dimension `dim`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, dim: usize) -> f64 {
        match self {
            RadialSpec::Fixed { r } => *r,
            RadialSpec::Chi { dof, scale } => {
                scale * ChiSquared::new(*dof).expect("validated chi").sample(rng).sqrt()
            }
            RadialSpec::MixtureInduced { mixing } => {
                let prec = mixing.sample(rng);
                let c2: f64 = ChiSquared::new(dim as f64).expect("positive dim").sample(rng);
                (c2 / prec).sqrt()
            }
        }
    }

    /// `E[R^q]` for a sphere of dimension `dim`, or `None` when it diverges.
    pub fn moment(&self, q: f64, dim: usize) -> Option<f64> {
        let chi_moment = |dof: f64| -> Option<f64> {
            if dof + q <= 0.0 {
                None
            } else {
                Some((0.5 * q * 2f64.ln() + ln_gamma((dof + q) / 2.0) - ln_gamma(dof / 2.0)).exp())
            }
        };
        match self {
            RadialSpec::Fixed { r } => Some(r.powf(q)),
            RadialSpec::Chi { dof, scale } => chi_moment(*dof).map(|m| m * scale.powf(q)),
            RadialSpec::MixtureInduced { mixing } => {
                Some(chi_moment(dim as f64)? * mixing.moment(-q / 2.0)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Normal,
    ScaleMixture,
    RadialSpherical,
    SphericalResidual,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub p: usize,
    /// Residual dimension; for `normal` a positive `k` attaches `S ~ σ² χ²_k`.
    #[serde(default)]
    pub k: usize,
    /// Empty means the origin.
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default = "one")]
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<MixingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial: Option<RadialSpec>,
}

impl SamplerSpec {
    pub fn normal(p: usize, sigma2: f64) -> Self {
        Self { kind: SamplerKind::Normal, p, k: 0, theta: Vec::new(), sigma2, mixing: None, radial: None }
    }

    /// Normal location with an independent `S ~ σ² χ²_k`.
    pub fn normal_with_variance(p: usize, k: usize, sigma2: f64) -> Self {
        Self { k, ..Self::normal(p, sigma2) }
    }

    pub fn scale_mixture(p: usize, mixing: MixingSpec) -> Self {
        Self { kind: SamplerKind::ScaleMixture, mixing: Some(mixing), ..Self::normal(p, 1.0) }
    }

    pub fn radial_spherical(p: usize, radial: RadialSpec) -> Self {
        Self { kind: SamplerKind::RadialSpherical, radial: Some(radial), ..Self::normal(p, 1.0) }
    }

    pub fn spherical_residual(p: usize, k: usize, radial: RadialSpec) -> Self {
        Self { kind: SamplerKind::SphericalResidual, k, radial: Some(radial), ..Self::normal(p, 1.0) }
    }

    pub fn with_theta(mut self, theta: Vec<f64>) -> Self {
        self.theta = theta;
        self
    }

    pub fn theta(&self) -> Vec<f64> {
        if self.theta.is_empty() {
            vec![0.0; self.p]
        } else {
            self.theta.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidSpec("p must be at least 1".into()));
        }
        if !self.theta.is_empty() && self.theta.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: self.theta.len() });
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidSpec(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        match self.kind {
            SamplerKind::Normal => Ok(()),
            SamplerKind::ScaleMixture => self
                .mixing
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec("scale_mixture needs `mixing`".into()))?
                .validate(),
            SamplerKind::RadialSpherical | SamplerKind::SphericalResidual => {
                if self.kind == SamplerKind::SphericalResidual && self.k == 0 {
                    return Err(Error::InvalidSpec("spherical_residual needs k >= 1".into()));
                }
                self.radial
                    .as_ref()
                    .ok_or_else(|| Error::InvalidSpec(format!("{:?} needs `radial`", self.kind)))?
                    .validate()
            }
        }
    }

    /// Dimension of the sphere the radius lives on.
    pub fn sphere_dim(&self) -> usize {
        match self.kind {
            SamplerKind::SphericalResidual => self.p + self.k,
            _ => self.p,
        }
    }

    /// One draw from an already-validated spec.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Observation {
        let theta = self.theta();
        match self.kind {
            SamplerKind::Normal => {
                let sd = self.sigma2.sqrt();
                let x = theta.iter().map(|t| t + sd * rng.sample::<f64, _>(StandardNormal)).collect();
                let obs = Observation::new(x);
                if self.k > 0 {
                    let c2: f64 = ChiSquared::new(self.k as f64).expect("k >= 1").sample(rng);
                    obs.with_s(self.sigma2 * c2)
                } else {
                    obs
                }
            }
            SamplerKind::ScaleMixture => {
                let prec = self.mixing.as_ref().expect("validated").sample(rng);
                let sd = (1.0 / prec).sqrt();
                Observation::new(theta.iter().map(|t| t + sd * rng.sample::<f64, _>(StandardNormal)).collect())
            }
            SamplerKind::RadialSpherical | SamplerKind::SphericalResidual => {
                let dim = self.sphere_dim();
                let r = self.radial.as_ref().expect("validated").sample(rng, dim);
                let z = unit_sphere(rng, dim);
                let x = theta.iter().zip(&z).map(|(t, v)| t + r * v).collect();
                let obs = Observation::new(x);
                if self.kind == SamplerKind::SphericalResidual {
                    obs.with_u(z[self.p..].iter().map(|v| r * v).collect())
                } else {
                    obs
                }
            }
        }
    }

    /// Draw for replication `index` of a run seeded with `seed`.
    pub fn draw_replication(&self, seed: u64, index: u64, attempt: u32) -> Observation {
        self.draw(&mut replication_rng(seed, index, attempt))
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Observation>> {
        self.validate()?;
        Ok((0..n as u64).map(|i| self.draw_replication(seed, i, 0)).collect())
    }
}

/// Uniform point on the unit sphere in R^dim; a zero Gaussian draw is redrawn.
pub fn unit_sphere<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n2 = norm_sq(&z);
        if n2 > 0.0 {
            let n = n2.sqrt();
            return z.into_iter().map(|v| v / n).collect();
        }
    }
}

fn require_kind(spec: &SamplerSpec, kind: SamplerKind) -> Result<()> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::InvalidSpec(format!("expected a {kind:?} sampler, got {:?}", spec.kind)));
    }
    Ok(())
}

pub fn sample_normal(spec: &SamplerSpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    require_kind(spec, SamplerKind::Normal)?;
    Ok(spec.sample(n, seed)?.into_iter().map(|o| o.x).collect())
}

pub fn sample_uniform_sphere(p: usize, r: f64, center: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(r > 0.0) {
        return Err(Error::InvalidSpec(format!("sphere radius must be positive, got {r}")));
    }
    if center.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: center.len() });
    }
    Ok((0..n as u64)
        .map(|i| {
            let z = unit_sphere(&mut replication_rng(seed, i, 0), p);
            center.iter().zip(z).map(|(c, v)| c + r * v).collect()
        })
        .collect())
}

pub fn sample_scale_mixture(spec: &SamplerSpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    require_kind(spec, SamplerKind::ScaleMixture)?;
    Ok(spec.sample(n, seed)?.into_iter().map(|o| o.x).collect())
}

pub fn sample_spherical_residual(spec: &SamplerSpec, n: usize, seed: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    require_kind(spec, SamplerKind::SphericalResidual)?;
    Ok(spec
        .sample(n, seed)?
        .into_iter()
        .map(|o| (o.x, o.u.expect("residual kind attaches u")))
        .collect())
}

/// `n` draws of `σ² χ²_k`.
pub fn sample_variance_stat(sigma2: f64, k: usize, n: usize, seed: u64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidSpec("variance statistic needs k >= 1".into()));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidSpec(format!("sigma2 must be positive, got {sigma2}")));
    }
    let chi = ChiSquared::new(k as f64).expect("k >= 1");
    Ok((0..n as u64)
        .map(|i| sigma2 * chi.sample(&mut replication_rng(seed, i, 0)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(v: impl Iterator<Item = f64>) -> (f64, f64, usize) {
        let v: Vec<f64> = v.collect();
        let n = v.len();
        let m = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (m, var, n)
    }

    fn assert_mc(values: impl Iterator<Item = f64>, expected: f64, what: &str) {
        let (m, var, n) = mean_var(values);
        let se = (var / n as f64).sqrt();
        assert!((m - expected).abs() < 4.0 * se, "{what}: {m} vs {expected} (se {se})");
    }

    #[test]
    fn normal_mean_and_spread() {
        let spec = SamplerSpec::normal(5, 1.0);
        let xs = sample_normal(&spec, 100_000, 1).unwrap();
        for j in 0..5 {
            let m = xs.iter().map(|x| x[j]).sum::<f64>() / xs.len() as f64;
            assert!(m.abs() < 4.0 / (1e5f64).sqrt());
        }
        assert_mc(xs.iter().map(|x| norm_sq(x)), 5.0, "E|X|^2");

        let spec = SamplerSpec::normal(5, 1.0).with_theta(vec![2.0, 0.0, 0.0, 0.0, 0.0]);
        let xs = sample_normal(&spec, 100_000, 2).unwrap();
        assert_mc(xs.iter().map(|x| x[0]), 2.0, "mean x1");
        assert_mc(xs.iter().map(|x| x[1]), 0.0, "mean x2");
    }

    #[test]
    fn sphere_draws_have_exact_radius() {
        let c = [1.0, -2.0, 0.5];
        let xs = sample_uniform_sphere(3, 2.5, &c, 10_000, 3).unwrap();
        for x in &xs {
            let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            assert!((norm_sq(&d).sqrt() - 2.5).abs() < 1e-12);
        }
        for j in 0..3 {
            assert_mc(xs.iter().map(|x| x[j]), c[j], "sphere center");
        }
        let xs = sample_uniform_sphere(2, 1.0, &[0.0, 0.0], 100_000, 4).unwrap();
        assert_mc(xs.iter().map(|x| x[0] * x[0]), 0.5, "E x1^2 on circle");
        assert!(sample_uniform_sphere(2, 0.0, &[0.0, 0.0], 1, 0).is_err());
    }

    #[test]
    fn point_mass_mixture_reproduces_normal_stream() {
        let normal = sample_normal(&SamplerSpec::normal(4, 1.0), 500, 9).unwrap();
        let mix = SamplerSpec::scale_mixture(4, MixingSpec::PointMass { value: 1.0 });
        assert_eq!(normal, sample_scale_mixture(&mix, 500, 9).unwrap());
    }

    #[test]
    fn student_t_mixture_second_moment() {
        // ς ~ gamma(3, 3): E[1/ς] = 3/2, so E|X-θ|^2 = 4.5 in R^3.
        let spec = SamplerSpec::scale_mixture(3, MixingSpec::student_t(6.0));
        let xs = sample_scale_mixture(&spec, 200_000, 5).unwrap();
        let inv_prec = spec.mixing.as_ref().unwrap().moment(-1.0).unwrap();
        assert!((inv_prec - 1.5).abs() < 1e-12);
        assert_mc(xs.iter().map(|x| norm_sq(x)), 3.0 * inv_prec, "t6 second moment");
    }

    #[test]
    fn two_point_mixture_second_moment() {
        let spec = SamplerSpec::scale_mixture(3, MixingSpec::TwoPoint { s1: 1.0, s2: 4.0, w: 0.5 });
        let xs = sample_scale_mixture(&spec, 200_000, 6).unwrap();
        assert_mc(xs.iter().map(|x| norm_sq(x)), 3.0 * 0.5 * (1.0 + 0.25), "two-point");
    }

    #[test]
    fn fixed_radius_residual_draws_lie_on_sphere() {
        let spec = SamplerSpec::spherical_residual(3, 2, RadialSpec::Fixed { r: 2.0 })
            .with_theta(vec![1.0, 1.0, 1.0]);
        for (x, u) in sample_spherical_residual(&spec, 5_000, 7).unwrap() {
            let d: f64 = x.iter().map(|v| (v - 1.0).powi(2)).sum();
            assert!((d + norm_sq(&u) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_radius_gives_normal_marginal() {
        let (p, k) = (3, 2);
        let spec = SamplerSpec::spherical_residual(p, k, RadialSpec::Chi { dof: (p + k) as f64, scale: 1.5 });
        let draws = sample_spherical_residual(&spec, 200_000, 8).unwrap();
        assert_mc(draws.iter().map(|(x, _)| x[0] * x[0]), 2.25, "var x1");
        assert_mc(draws.iter().map(|(x, _)| x[0].powi(4)), 3.0 * 2.25 * 2.25, "kurtosis x1");
        assert_mc(draws.iter().map(|(_, u)| norm_sq(u)), 2.25 * k as f64, "E|U|^2");
    }

    #[test]
    fn residual_to_location_energy_ratio() {
        // Oracle: brute-force projection moments at a fixed radius.
        let (p, k) = (4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let (mut eu, mut ex) = (0.0, 0.0);
        for _ in 0..n {
            let z = unit_sphere(&mut rng, p + k);
            ex += norm_sq(&z[..p]);
            eu += norm_sq(&z[p..]);
        }
        let oracle = eu / ex;
        assert!((oracle - k as f64 / p as f64).abs() < 0.01);
        for radial in [
            RadialSpec::Fixed { r: 3.0 },
            RadialSpec::Chi { dof: 7.0, scale: 1.0 },
            RadialSpec::MixtureInduced { mixing: MixingSpec::student_t(8.0) },
        ] {
            let spec = SamplerSpec::spherical_residual(p, k, radial);
            let d = sample_spherical_residual(&spec, 100_000, 10).unwrap();
            let u: f64 = d.iter().map(|(_, u)| norm_sq(u)).sum();
            let x: f64 = d.iter().map(|(x, _)| norm_sq(x)).sum();
            assert!((u / x - oracle).abs() < 0.03, "{} vs {oracle}", u / x);
        }
    }

    #[test]
    fn variance_statistic_moments() {
        let s = sample_variance_stat(1.0, 4, 200_000, 11).unwrap();
        assert_mc(s.iter().copied(), 4.0, "mean S");
        let (_, var, _) = mean_var(s.iter().copied());
        assert!((var - 8.0).abs() < 0.15);

        let sigma2 = 2.0;
        let s = sample_variance_stat(sigma2, 5, 200_000, 12).unwrap();
        let lhs = s.iter().map(|v| v * v / 7.0).sum::<f64>() / s.len() as f64;
        let rhs = s.iter().map(|v| sigma2 * v).sum::<f64>() / s.len() as f64;
        assert!((lhs - rhs).abs() / rhs < 0.02, "{lhs} vs {rhs}");
        assert!(sample_variance_stat(1.0, 0, 1, 0).is_err());
    }

    #[test]
    fn normal_with_k_attaches_variance_statistic() {
        let spec = SamplerSpec::normal_with_variance(5, 3, 2.0);
        let obs = spec.sample(50_000, 13).unwrap();
        assert_mc(obs.iter().map(|o| o.s.unwrap()), 6.0, "E S");
        assert_mc(obs.iter().map(|o| norm_sq(&o.x)), 10.0, "E|X|^2");
    }

    #[test]
    fn streams_are_deterministic_and_indexed() {
        let spec = SamplerSpec::scale_mixture(6, MixingSpec::student_t(5.0));
        let a = spec.sample(300, 42).unwrap();
        assert_eq!(a, spec.sample(300, 42).unwrap());
        assert_ne!(a, spec.sample(300, 43).unwrap());
        for (i, o) in a.iter().enumerate() {
            assert_eq!(*o, spec.draw_replication(42, i as u64, 0));
        }
        assert_ne!(subseed(42, 0, 0), subseed(42, 0, 1));
        assert_ne!(subseed(42, 1, 0), subseed(43, 0, 0));
    }

    #[test]
    fn spherical_draws_are_symmetric() {
        let p = 4;
        for spec in [
            SamplerSpec::normal(p, 1.0),
            SamplerSpec::scale_mixture(p, MixingSpec::Gamma { shape: 2.0, rate: 1.0 }),
            SamplerSpec::radial_spherical(p, RadialSpec::Fixed { r: 1.0 }),
            SamplerSpec::spherical_residual(p, 2, RadialSpec::Chi { dof: 6.0, scale: 1.0 }),
        ] {
            let dirs: Vec<Vec<f64>> = spec
                .sample(40_000, 14)
                .unwrap()
                .into_iter()
                .map(|o| {
                    let n = norm_sq(&o.x).sqrt();
                    o.x.iter().map(|v| v / n).collect()
                })
                .collect();
            for i in 0..p {
                assert_mc(dirs.iter().map(|d| d[i]), 0.0, "direction mean");
                for j in i..p {
                    let target = if i == j { 1.0 / p as f64 } else { 0.0 };
                    assert_mc(dirs.iter().map(|d| d[i] * d[j]), target, "direction second moment");
                }
            }
        }
    }

    #[test]
    fn radial_moments_closed_form() {
        let chi = RadialSpec::Chi { dof: 5.0, scale: 2.0 };
        assert!((chi.moment(2.0, 5).unwrap() - 20.0).abs() < 1e-12);
        let mix = RadialSpec::MixtureInduced { mixing: MixingSpec::student_t(6.0) };
        assert!((mix.moment(2.0, 6).unwrap() - 9.0).abs() < 1e-12);
        assert!(MixingSpec::student_t(2.0).moment(-1.0).is_none());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(SamplerSpec::normal(0, 1.0).validate().is_err());
        assert!(SamplerSpec::normal(3, -1.0).validate().is_err());
        assert!(SamplerSpec::normal(3, 1.0).with_theta(vec![1.0]).validate().is_err());
        assert!(SamplerSpec::scale_mixture(3, MixingSpec::TwoPoint { s1: 1.0, s2: 0.0, w: 0.5 }).validate().is_err());
        assert!(SamplerSpec::spherical_residual(3, 0, RadialSpec::Fixed { r: 1.0 }).validate().is_err());
        let json = r#"{"kind":"scale_mixture","p":3,"mixing":{"kind":"gamma","shape":3,"rate":3}}"#;
        let spec: SamplerSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec, SamplerSpec::scale_mixture(3, MixingSpec::student_t(6.0)));
    }
}
