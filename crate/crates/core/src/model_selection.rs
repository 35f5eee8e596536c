//! Canonical form of the linear model, degrees of freedom, Cp* and
//! SURE-based selection of the ridge penalty.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{divergence_fd, VectorField};
use crate::error::{Error, Result};
use crate::risk_engine::{accumulate, SE_MULTIPLIER};
use crate::samplers::replication_rng;

/// Relative tolerance on `|R_ii| / |R_00|` below which a column is dependent.
pub const RANK_TOL: f64 = 1e-10;

/// `Y = V β + ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModelData {
    pub y: Vec<f64>,
    pub v: DMatrix<f64>,
    pub column_names: Vec<String>,
}

impl LinearModelData {
    /// Shape and finiteness checks; the rank is checked by the transforms.
    /// `n = p` is accepted so that the residual-free case reaches
    /// `sigma2_unbiased`, which rejects it.
    pub fn new(y: Vec<f64>, v: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = v.shape();
        if p == 0 {
            return Err(Error::EmptyInput("design has no columns".into()));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        if column_names.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: column_names.len() });
        }
        if n < p {
            return Err(Error::InvalidSpec(format!("need n >= p, got n = {n}, p = {p}")));
        }
        if y.iter().chain(v.iter()).any(|a| !a.is_finite()) {
            return Err(Error::InvalidSpec("data contain non-finite values".into()));
        }
        Ok(Self { y, v, column_names })
    }

    pub fn from_columns(y: Vec<f64>, columns: &[(&str, Vec<f64>)]) -> Result<Self> {
        let n = y.len();
        if let Some((name, c)) = columns.iter().find(|(_, c)| c.len() != n) {
            return Err(Error::InvalidSpec(format!("column `{name}` has {} rows, expected {n}", c.len())));
        }
        let v = DMatrix::from_fn(n, columns.len(), |i, j| columns[j].1[i]);
        Self::new(y, v, columns.iter().map(|(s, _)| s.to_string()).collect())
    }

    /// Header row required; `response` names the response column and every
    /// other column is a numeric regressor. With `intercept` a column of ones
    /// named `intercept` is prepended.
    pub fn from_csv<R: Read>(reader: R, response: &str, intercept: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let yi = headers
            .iter()
            .position(|h| h == response)
            .ok_or_else(|| Error::InvalidSpec(format!("response column `{response}` not in header {headers:?}")))?;
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                let field = field.trim();
                if field.is_empty() {
                    return Err(Error::InvalidSpec(format!("missing value in column `{}` at row {}", headers[j], row + 1)));
                }
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidSpec(format!("non-numeric value `{field}` in column `{}` at row {}", headers[j], row + 1))
                })?;
                cols[j].push(v);
            }
        }
        let y = cols[yi].clone();
        if y.is_empty() {
            return Err(Error::EmptyInput("data file has no rows".into()));
        }
        let ones = vec![1.0; y.len()];
        let mut design: Vec<(&str, Vec<f64>)> = Vec::new();
        if intercept {
            design.push(("intercept", ones));
        }
        for (j, h) in headers.iter().enumerate() {
            if j != yi {
                design.push((h.as_str(), std::mem::take(&mut cols[j])));
            }
        }
        Self::from_columns(y, &design)
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    pub fn p(&self) -> usize {
        self.v.ncols()
    }

    /// Index of the first constant nonzero column, if any.
    pub fn intercept_column(&self) -> Option<usize> {
        (0..self.p()).find(|&j| {
            let c = self.v.column(j);
            c[0] != 0.0 && c.iter().all(|a| *a == c[0])
        })
    }
}

/// `X = G₁ Y`, `U = G₂ Y` with `G = (G₁ᵗ, G₂ᵗ)ᵗ` orthogonal and the rows of
/// `G₁` spanning the column space of `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// `G`, rows are the basis vectors; `G₁` is the first `p` rows.
    pub basis: DMatrix<f64>,
}

/// Column-pivoted Householder QR of `V`; the full orthogonal factor is fixed
/// by making the diagonal of `R` positive.
pub fn canonical_transform(data: &LinearModelData) -> Result<CanonicalForm> {
    let (n, p) = data.v.shape();
    let qr = data.v.clone().col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    let rank = (0..p).filter(|&i| r[(i, i)].abs() > RANK_TOL * lead.max(f64::MIN_POSITIVE)).count();
    if rank < p || lead == 0.0 {
        return Err(Error::RankDeficient { rank: if lead == 0.0 { 0 } else { rank }, columns: p });
    }
    let mut g = DMatrix::<f64>::identity(n, n);
    qr.q_tr_mul(&mut g);
    for i in 0..p {
        if r[(i, i)] < 0.0 {
            g.row_mut(i).neg_mut();
        }
    }
    let z = &g * DVector::from_column_slice(&data.y);
    Ok(CanonicalForm { x: z.rows(0, p).iter().copied().collect(), u: z.rows(p, n - p).iter().copied().collect(), basis: g })
}

/// `‖U‖² / (n - p)`.
pub fn sigma2_unbiased(data: &LinearModelData) -> Result<f64> {
    let dof = data.n() - data.p();
    if dof == 0 {
        return Err(Error::DomainError("n - p = 0 leaves no residual degrees of freedom".into()));
    }
    let cf = canonical_transform(data)?;
    Ok(cf.u.iter().map(|a| a * a).sum::<f64>() / dof as f64)
}

/// Trace of a smoother matrix.
pub fn df_linear(s: &DMatrix<f64>) -> Result<f64> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch { expected: s.nrows(), got: s.ncols() });
    }
    Ok(s.trace())
}

/// Sum of the diagonal of the hat matrix.
pub fn df_hat_diag(diag: &[f64]) -> f64 {
    diag.iter().sum()
}

/// Finite-difference divergence of the fitted-value map at `y`.
pub fn df_divergence(phi: &VectorField, y: &[f64]) -> Result<f64> {
    divergence_fd(phi, y, None)
}

/// `‖Y - φ‖²/n + 2 div φ σ̂²/n`.
pub fn cp_star(y: &[f64], fitted: &[f64], div_phi: f64, sigma2_hat: f64) -> Result<f64> {
    if fitted.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: fitted.len() });
    }
    if y.is_empty() {
        return Err(Error::EmptyInput("no observations".into()));
    }
    if !(sigma2_hat > 0.0 && sigma2_hat.is_finite()) {
        return Err(Error::DomainError(format!("sigma2_hat must be positive, got {sigma2_hat}")));
    }
    let n = y.len() as f64;
    let rss: f64 = y.iter().zip(fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(rss / n + 2.0 * div_phi * sigma2_hat / n)
}

/// Ridge smoother `S_λ` through one SVD of the (centred, when an intercept
/// column is present) design. The intercept is never penalised, so adding a
/// constant to `Y` shifts fitted values by that constant.
#[derive(Debug, Clone)]
pub struct RidgeSmoother {
    u: DMatrix<f64>,
    d2: Vec<f64>,
    intercept: bool,
    columns: usize,
}

impl RidgeSmoother {
    pub fn new(data: &LinearModelData) -> Self {
        Self::from_design(&data.v, data.intercept_column())
    }

    pub fn from_design(v: &DMatrix<f64>, intercept: Option<usize>) -> Self {
        let n = v.nrows();
        let penalised = match intercept {
            Some(j) => {
                let mut m = v.clone().remove_column(j);
                for mut c in m.column_iter_mut() {
                    let mean = c.mean();
                    c.add_scalar_mut(-mean);
                }
                m
            }
            None => v.clone(),
        };
        let (u, d2) = if penalised.ncols() == 0 {
            (DMatrix::zeros(n, 0), Vec::new())
        } else {
            let svd = penalised.svd(true, false);
            let d2 = svd.singular_values.iter().map(|d| d * d).collect();
            (svd.u.expect("requested"), d2)
        };
        Self { u, d2, intercept: intercept.is_some(), columns: v.ncols() }
    }

    fn factors(&self, lambda: f64) -> Result<Vec<f64>> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidPenalty(lambda));
        }
        let top = self.d2.iter().cloned().fold(0.0, f64::max);
        let f: Vec<f64> = self.d2.iter().map(|&d2| if d2 <= RANK_TOL * RANK_TOL * top { 0.0 } else { d2 / (d2 + lambda) }).collect();
        if lambda == 0.0 {
            let rank = f.iter().filter(|v| **v > 0.0).count() + self.intercept as usize;
            if rank < self.columns {
                return Err(Error::RankDeficient { rank, columns: self.columns });
            }
        }
        Ok(f)
    }

    pub fn fitted(&self, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let f = self.factors(lambda)?;
        if y.len() != self.u.nrows() {
            return Err(Error::DimensionMismatch { expected: self.u.nrows(), got: y.len() });
        }
        Ok(self.apply(&f, y))
    }

    fn apply(&self, f: &[f64], y: &[f64]) -> Vec<f64> {
        let yv = DVector::from_column_slice(y);
        let mut c = self.u.tr_mul(&yv);
        c.iter_mut().zip(f).for_each(|(a, b)| *a *= b);
        let mut out = &self.u * c;
        if self.intercept {
            out.add_scalar_mut(yv.mean());
        }
        out.iter().copied().collect()
    }

    /// `tr S_λ = [intercept] + Σ d_i²/(d_i² + λ)`.
    pub fn df(&self, lambda: f64) -> Result<f64> {
        Ok(self.factors(lambda)?.iter().sum::<f64>() + if self.intercept { 1.0 } else { 0.0 })
    }

    /// The `n × n` smoother matrix.
    pub fn matrix(&self, lambda: f64) -> Result<DMatrix<f64>> {
        let f = self.factors(lambda)?;
        let n = self.u.nrows();
        let mut s = &self.u * DMatrix::from_diagonal(&DVector::from_vec(f)) * self.u.transpose();
        if self.intercept {
            s.add_scalar_mut(1.0 / n as f64);
        }
        Ok(s)
    }

    /// `y ↦ S_λ y` as a vector field, for divergence checks.
    pub fn map(&self, lambda: f64) -> Result<VectorField> {
        let f = self.factors(lambda)?;
        let me = self.clone();
        Ok(VectorField::new(format!("ridge({lambda})"), move |y| me.apply(&f, y)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub lambda: f64,
    pub fitted: Vec<f64>,
    pub df: f64,
}

pub fn ridge_fit(data: &LinearModelData, lambda: f64) -> Result<RidgeFit> {
    let sm = RidgeSmoother::new(data);
    Ok(RidgeFit { lambda, fitted: sm.fitted(&data.y, lambda)?, df: sm.df(lambda)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpRow {
    pub lambda: f64,
    pub rss: f64,
    pub df: f64,
    pub cp_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen_lambda: f64,
    pub chosen_index: usize,
    pub sigma2_hat: f64,
    pub table: Vec<CpRow>,
}

impl Selection {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "lambda,rss,df,cp_star")?;
        for r in &self.table {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", r.lambda, r.rss, r.df, r.cp_star)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Cp* over the λ grid; the first minimiser wins ties. `sigma2_hat` defaults
/// to the residual estimate of the canonical form.
pub fn select(data: &LinearModelData, lambdas: &[f64], sigma2_hat: Option<f64>) -> Result<Selection> {
    if lambdas.is_empty() {
        return Err(Error::EmptyInput("lambda grid is empty".into()));
    }
    let sigma2_hat = match sigma2_hat {
        Some(s) => s,
        None => sigma2_unbiased(data)?,
    };
    let sm = RidgeSmoother::new(data);
    let table = lambdas
        .par_iter()
        .map(|&lambda| {
            let fitted = sm.fitted(&data.y, lambda)?;
            let df = sm.df(lambda)?;
            let rss = data.y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(CpRow { lambda, rss, df, cp_star: cp_star(&data.y, &fitted, df, sigma2_hat)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let chosen_index = table
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| if r.cp_star < table[best].cp_star { i } else { best });
    Ok(Selection { chosen_lambda: table[chosen_index].lambda, chosen_index, sigma2_hat, table })
}

/// `0` followed by `count` log-spaced values on `[lo, hi]`.
pub fn default_lambda_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    let (a, b) = (lo.ln(), hi.ln());
    out.extend((0..count).map(|i| (a + (b - a) * i as f64 / (count.max(2) - 1) as f64).exp()));
    out
}

/// Simulated check that Cp* is unbiased for prediction error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeStudy {
    pub n: usize,
    pub p: usize,
    pub sigma: f64,
    pub lambdas: Vec<f64>,
    pub replications: u64,
    pub seed: u64,
}

impl Default for RidgeStudy {
    fn default() -> Self {
        Self { n: 50, p: 10, sigma: 1.0, lambdas: default_lambda_grid(0.1, 1000.0, 13), replications: 10_000, seed: 42 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub lambda: f64,
    pub df_linear: f64,
    pub df_divergence: f64,
    pub cp_mean: f64,
    pub cp_se: f64,
    /// `E‖Y_new - φ(Y)‖²/n` with a fresh, independent response.
    pub pe_mean: f64,
    pub pe_se: f64,
    pub diff_mean: f64,
    pub diff_se: f64,
}

impl StudyRow {
    pub fn unbiased(&self) -> bool {
        self.diff_mean.abs() <= SE_MULTIPLIER * self.diff_se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub cp_argmin: usize,
    pub pe_argmin: usize,
    pub max_df_gap: f64,
}

fn argmin(v: impl Iterator<Item = f64>) -> usize {
    v.enumerate().fold((0, f64::INFINITY), |(bi, bv), (i, x)| if x < bv { (i, x) } else { (bi, bv) }).0
}

impl RidgeStudy {
    /// Fixed Gaussian design and coefficients `β_j = (-1)^j / (j + 1)`,
    /// drawn from replication stream `u64::MAX` of the seed.
    pub fn design(&self) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = replication_rng(self.seed, u64::MAX, 0);
        let v = DMatrix::from_fn(self.n, self.p, |_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let beta = DVector::from_fn(self.p, |j, _| if j % 2 == 0 { 1.0 } else { -1.0 } / (j + 1) as f64);
        let theta = (&v * beta).iter().copied().collect();
        (v, theta)
    }

    pub fn run(&self, threads: Option<usize>) -> Result<StudyReport> {
        if self.lambdas.is_empty() {
            return Err(Error::EmptyInput("lambda grid is empty".into()));
        }
        if self.n <= self.p {
            return Err(Error::InvalidSpec("the study needs n > p".into()));
        }
        let (v, theta) = self.design();
        let sm = RidgeSmoother::from_design(&v, None);
        let ls = sm.factors(0.0)?;
        let (n, dof) = (self.n as f64, (self.n - self.p) as f64);
        let draw = |i: u64| {
            let mut rng = replication_rng(self.seed, i, 0);
            let mut e = || self.sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng);
            let y: Vec<f64> = theta.iter().map(|t| t + e()).collect();
            let y_new: Vec<f64> = theta.iter().map(|t| t + e()).collect();
            (y, y_new)
        };
        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        let probe = draw(u64::MAX - 1).0;
        let mut rows = Vec::with_capacity(self.lambdas.len());
        for &lambda in &self.lambdas {
            let f = sm.factors(lambda)?;
            let df = sm.df(lambda)?;
            let df_lin = df_linear(&sm.matrix(lambda)?)?;
            let df_div = df_divergence(&sm.map(lambda)?, &probe)?;
            let acc = accumulate(self.replications, threads, |i, _| {
                let (y, y_new) = draw(i);
                let s2 = sq(&y, &sm.apply(&ls, &y)) / dof;
                let fit = sm.apply(&f, &y);
                let cp = cp_star(&y, &fit, df, s2)?;
                let pe = sq(&y_new, &fit) / n;
                Ok([cp, pe, cp - pe])
            })?;
            let [c, pe, d] = acc.stats;
            rows.push(StudyRow {
                lambda,
                df_linear: df_lin,
                df_divergence: df_div,
                cp_mean: c.mean,
                cp_se: c.std_error(),
                pe_mean: pe.mean,
                pe_se: pe.std_error(),
                diff_mean: d.mean,
                diff_se: d.std_error(),
            });
        }
        Ok(StudyReport {
            cp_argmin: argmin(rows.iter().map(|r| r.cp_mean)),
            pe_argmin: argmin(rows.iter().map(|r| r.pe_mean)),
            max_df_gap: rows.iter().map(|r| (r.df_linear - r.df_divergence).abs()).fold(0.0, f64::max),
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{norm_sq, VectorFieldSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, p: usize, seed: u64) -> LinearModelData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = || Distribution::<f64>::sample(&StandardNormal, &mut rng);
        let v = DMatrix::from_fn(n, p, |_, _| z());
        let y = (0..n).map(|_| z()).collect();
        LinearModelData::new(y, v, (0..p).map(|j| format!("x{j}")).collect()).unwrap()
    }

    fn ls_rss(data: &LinearModelData) -> f64 {
        let beta = data.v.clone().svd(true, true).solve(&DVector::from_column_slice(&data.y), 1e-12).unwrap();
        let r = DVector::from_column_slice(&data.y) - &data.v * beta;
        r.norm_squared()
    }

    #[test]
    fn canonical_form_of_identity_design() {
        let (n, p) = (6, 2);
        let v = DMatrix::from_fn(n, p, |i, j| if i == j { 1.0 } else { 0.0 });
        let y = vec![1.0, -2.0, 3.0, 4.0, -5.0, 6.0];
        let data = LinearModelData::new(y.clone(), v, vec!["a".into(), "b".into()]).unwrap();
        let cf = canonical_transform(&data).unwrap();
        assert!((cf.x[0] - 1.0).abs() < 1e-12 && (cf.x[1] + 2.0).abs() < 1e-12, "{:?}", cf.x);
        let mut tail: Vec<f64> = cf.u.iter().map(|a| a.abs()).collect();
        tail.sort_by(f64::total_cmp);
        assert!((tail.iter().map(|a| a * a).sum::<f64>() - (9.0 + 16.0 + 25.0 + 36.0)).abs() < 1e-10);
    }

    #[test]
    fn canonical_form_invariants() {
        for seed in 0..5 {
            let data = random_data(20, 3, seed);
            let cf = canonical_transform(&data).unwrap();
            let (x2, u2) = (norm_sq(&cf.x), norm_sq(&cf.u));
            assert!((x2 + u2 - norm_sq(&data.y)).abs() < 1e-10);
            assert!((u2 - ls_rss(&data)).abs() < 1e-10);
            let gtg = cf.basis.transpose() * &cf.basis;
            assert!((gtg - DMatrix::identity(20, 20)).amax() < 1e-12);
            // U is orthogonal to the column space: G₂ V = 0.
            let g2v = cf.basis.rows(3, 17) * &data.v;
            assert!(g2v.amax() < 1e-12);
        }
    }

    #[test]
    fn response_in_column_space_has_no_residual() {
        let mut data = random_data(10, 3, 9);
        data.y = (&data.v * DVector::from_vec(vec![1.0, 2.0, -1.0])).iter().copied().collect();
        let cf = canonical_transform(&data).unwrap();
        assert!(norm_sq(&cf.u) < 1e-20);
        assert!(sigma2_unbiased(&data).unwrap() < 1e-20);
    }

    #[test]
    fn rank_deficiency_and_zero_residual_dof() {
        let mut data = random_data(8, 3, 1);
        let c0 = data.v.column(0).clone_owned();
        data.v.set_column(2, &(c0 * 2.0));
        assert!(matches!(canonical_transform(&data), Err(Error::RankDeficient { rank: 2, columns: 3 })));
        assert!(matches!(ridge_fit(&data, 0.0), Err(Error::RankDeficient { .. })));
        assert!(ridge_fit(&data, 1.0).is_ok());
        let square = random_data(4, 4, 2);
        assert!(sigma2_unbiased(&square).is_err());
    }

    #[test]
    fn sigma2_is_unbiased_across_replications() {
        let base = random_data(30, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reps = 4000;
        let mean = (0..reps)
            .map(|_| {
                let y = (0..30).map(|_| 2f64.sqrt() * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
                sigma2_unbiased(&LinearModelData { y, ..base.clone() }).unwrap()
            })
            .sum::<f64>()
            / reps as f64;
        // sd of one estimate is 2 sqrt(2/26) ≈ 0.55.
        assert!((mean - 2.0).abs() < 4.0 * 0.555 / (reps as f64).sqrt(), "{mean}");
    }

    #[test]
    fn df_of_simple_smoothers() {
        assert_eq!(df_linear(&DMatrix::identity(10, 10)).unwrap(), 10.0);
        let data = random_data(12, 4, 5);
        let sm = RidgeSmoother::new(&data);
        let h = sm.matrix(0.0).unwrap();
        assert!((df_linear(&h).unwrap() - 4.0).abs() < 1e-10);
        assert!((df_hat_diag(h.diagonal().as_slice()) - 4.0).abs() < 1e-10);
        let d = data.v.clone().svd(false, false).singular_values;
        for lambda in [0.0, 0.5, 3.0, 100.0] {
            let expect: f64 = d.iter().map(|d| d * d / (d * d + lambda)).sum();
            let lin = df_linear(&sm.matrix(lambda).unwrap()).unwrap();
            let div = df_divergence(&sm.map(lambda).unwrap(), &data.y).unwrap();
            assert!((lin - expect).abs() < 1e-10 && (lin - div).abs() < 1e-5, "λ={lambda}: {lin} {div} {expect}");
        }
        let fit = ridge_fit(&data, 1e12).unwrap();
        assert!(fit.df < 1e-9 && norm_sq(&fit.fitted) < 1e-12);
    }

    #[test]
    fn df_of_mle_and_james_stein_maps() {
        let n = 7;
        let y: Vec<f64> = (0..n).map(|i| 0.3 * i as f64 - 1.0).collect();
        let id = VectorFieldSpec::Identity { scale: 1.0, center: None }.build(n).unwrap();
        assert!((df_divergence(&id.numeric_only(), &y).unwrap() - n as f64).abs() < 1e-8);
        // φ = (1 - c/|y|²) y has divergence n - c(n-2)/|y|².
        let c = (n - 2) as f64;
        let js = VectorField::new("js", move |y: &[f64]| {
            let s = 1.0 - c / norm_sq(y);
            y.iter().map(|a| s * a).collect()
        });
        let expect = n as f64 - c * (n as f64 - 2.0) / norm_sq(&y);
        assert!((df_divergence(&js, &y).unwrap() - expect).abs() < 1e-7);
    }

    #[test]
    fn cp_star_edge_cases() {
        let y = [1.0, 2.0, 3.0];
        assert!((cp_star(&y, &y, 3.0, 0.7).unwrap() - 1.4).abs() < 1e-15);
        assert!((cp_star(&y, &[0.0; 3], 0.0, 1.0).unwrap() - 14.0 / 3.0).abs() < 1e-15);
        assert!(cp_star(&y, &y, 3.0, 0.0).is_err());
        assert!(matches!(ridge_fit(&random_data(5, 2, 0), -1.0), Err(Error::InvalidPenalty(_))));
    }

    #[test]
    fn selection_grid_and_intercept_invariance() {
        let base = random_data(25, 3, 6);
        let x: Vec<(String, Vec<f64>)> = (0..3).map(|j| (format!("x{j}"), base.v.column(j).iter().copied().collect())).collect();
        let mut cols: Vec<(&str, Vec<f64>)> = vec![("intercept", vec![1.0; 25])];
        cols.extend(x.iter().map(|(s, c)| (s.as_str(), c.clone())));
        let data = LinearModelData::from_columns(base.y.clone(), &cols).unwrap();
        assert_eq!(data.intercept_column(), Some(0));
        let grid = default_lambda_grid(0.01, 100.0, 9);
        let a = select(&data, &grid, None).unwrap();
        let shifted = LinearModelData { y: data.y.iter().map(|v| v + 17.5).collect(), ..data.clone() };
        let b = select(&shifted, &grid, None).unwrap();
        assert_eq!(a.chosen_index, b.chosen_index);
        for (r, s) in a.table.iter().zip(&b.table) {
            assert!((r.cp_star - s.cp_star).abs() < 1e-9 * r.cp_star.abs());
            assert!((r.df - s.df).abs() < 1e-12);
        }
        assert!((a.table[0].df - 4.0).abs() < 1e-10);
        let one = select(&data, &[2.5], None).unwrap();
        assert_eq!(one.chosen_lambda, 2.5);
        assert!(select(&data, &[], None).is_err());
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), grid.len() + 1);
    }

    #[test]
    fn csv_ingestion() {
        let text = "y,a,b\n1.0,2,3\n2.0,1,0\n0.5,4,1\n3.0,0,2\n";
        let d = LinearModelData::from_csv(text.as_bytes(), "y", true).unwrap();
        assert_eq!(d.column_names, ["intercept", "a", "b"]);
        assert_eq!(d.y, [1.0, 2.0, 0.5, 3.0]);
        assert_eq!(d.v[(2, 1)], 4.0);
        assert!(LinearModelData::from_csv("y,a\n1,x\n".as_bytes(), "y", false).is_err());
        assert!(LinearModelData::from_csv("y,a\n1,\n".as_bytes(), "y", false).is_err());
        assert!(LinearModelData::from_csv("y,a\n1,2\n".as_bytes(), "z", false).is_err());
    }

    #[test]
    fn small_ridge_study_is_unbiased() {
        let study = RidgeStudy { replications: 2000, lambdas: vec![0.0, 1.0, 10.0], ..RidgeStudy::default() };
        let rep = study.run(None).unwrap();
        assert!(rep.rows.iter().all(StudyRow::unbiased), "{rep:?}");
        assert!(rep.max_df_gap < 1e-5);
        assert_eq!(rep, study.run(Some(3)).unwrap());
    }
}
