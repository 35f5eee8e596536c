//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances are 4
//! paired standard errors for Monte Carlo comparisons.

use std::process::Command;

use steinloss::calculus::{norm_sq, FieldSpec, VectorFieldSpec};
use steinloss::cli::{identities, presets};
use steinloss::domination::{check_prior_condition, check_residual_ls, check_residual_shrink, compute_k0, GridSpec, Verdict};
use steinloss::estimators::EstimatorSpec;
use steinloss::loss_estimators::{positive_part, BaseSpec, CorrectionSpec, LossEstimatorSpec};
use steinloss::model_selection::RidgeStudy;
use steinloss::risk_engine::identities::Control;
use steinloss::risk_engine::{paired_statistic, McConfig, DEFAULT_IDENTITY_N, DEFAULT_RISK_N, SE_MULTIPLIER};
use steinloss::samplers::{MixingSpec, RadialSpec, SamplerSpec};

const SEED: u64 = 42;
const RADII: [f64; 3] = [0.0, 2.0, 5.0];

struct Line {
    id: u32,
    pass: bool,
    detail: String,
}

fn e1(p: usize, r: f64) -> Vec<f64> {
    let mut t = vec![0.0; p];
    t[0] = r;
    t
}

fn cfg(n: u64) -> McConfig {
    McConfig { n, seed: SEED, threads: None }
}

/// Paired check of `E[δ] = E[L]` for `delta` scoring `est` under `sampler`.
fn unbiased_at(label: &str, sampler: &SamplerSpec, est: &EstimatorSpec, base: BaseSpec, r: f64) -> (bool, String) {
    let estimator = est.compile(sampler.p).unwrap();
    let theta = e1(sampler.p, r);
    let located = sampler.clone().with_theta(theta.clone());
    let delta = LossEstimatorSpec::unbiased(base).compile(&estimator, &located).unwrap();
    let pair = paired_statistic(sampler, &theta, &cfg(DEFAULT_RISK_N), |obs| {
        let loss = delta.target().evaluate(&estimator.estimate(obs)?, &theta)?;
        Ok([delta.evaluate(obs)?, loss])
    })
    .unwrap();
    let z = pair.diff.mean.abs() / pair.diff.std_error();
    (z <= SE_MULTIPLIER, format!("{label}@{r}: z={z:.2}"))
}

fn criterion_1() -> Line {
    let (p5, p6, k3, k4) = (5usize, 6usize, 3usize, 4usize);
    let js = EstimatorSpec::JamesStein;
    let settings: Vec<(&str, SamplerSpec, EstimatorSpec, BaseSpec)> = vec![
        ("known-var JS", SamplerSpec::normal(p5, 1.0), js.clone(), BaseSpec::SureKnownVar),
        ("unknown-var JS", SamplerSpec::normal_with_variance(p5, k3, 1.0), EstimatorSpec::JsUnknownVar { k: k3 }, BaseSpec::UnbiasedUnknownVar),
        ("t6 MLE", SamplerSpec::scale_mixture(p6, MixingSpec::student_t(6.0)), EstimatorSpec::Mle, BaseSpec::ConstantSpherical),
        (
            "residual fixed",
            SamplerSpec::spherical_residual(p6, k4, RadialSpec::Fixed { r: 10f64.sqrt() }),
            EstimatorSpec::Mle,
            BaseSpec::ResidualLs,
        ),
        (
            "residual chi",
            SamplerSpec::spherical_residual(p6, k4, RadialSpec::Chi { dof: 10.0, scale: 1.0 }),
            EstimatorSpec::Mle,
            BaseSpec::ResidualLs,
        ),
        (
            "residual chi shrink",
            SamplerSpec::spherical_residual(p6, k4, RadialSpec::Chi { dof: 10.0, scale: 1.0 }),
            EstimatorSpec::ResidualShrinkage { g: VectorFieldSpec::JsShrinkage { c: 4.0 / 6.0 } },
            BaseSpec::ResidualShrinkage,
        ),
    ];
    let mut pass = true;
    let mut worst = (0.0f64, String::new());
    for (label, s, est, base) in &settings {
        for r in RADII {
            let (ok, d) = unbiased_at(label, s, est, base.clone(), r);
            pass &= ok;
            let z: f64 = d.rsplit('=').next().unwrap().parse().unwrap();
            if z >= worst.0 {
                worst = (z, d);
            }
        }
    }
    Line { id: 1, pass, detail: format!("{} settings x |theta| in {{0,2,5}}; worst {}", settings.len(), worst.1) }
}

/// Paired draw-wise comparison of the risk difference of `candidate` over
/// `baseline` with `oracle(x)`; returns the worst z over the radii.
fn risk_difference_matches(
    p: usize,
    est: EstimatorSpec,
    baseline: BaseSpec,
    candidate: LossEstimatorSpec,
    oracle: impl Fn(&[f64]) -> f64 + Sync,
) -> (bool, String) {
    let sampler = SamplerSpec::normal(p, 1.0);
    let estimator = est.compile(p).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in RADII {
        let theta = e1(p, r);
        let located = sampler.clone().with_theta(theta.clone());
        let a = candidate.compile(&estimator, &located).unwrap();
        let b = LossEstimatorSpec::unbiased(baseline.clone()).compile(&estimator, &located).unwrap();
        let pair = paired_statistic(&sampler, &theta, &cfg(DEFAULT_RISK_N), |obs| {
            let loss = a.target().evaluate(&estimator.estimate(obs)?, &theta)?;
            let (ea, eb) = (a.evaluate(obs)? - loss, b.evaluate(obs)? - loss);
            Ok([ea * ea - eb * eb, oracle(&obs.x)])
        })
        .unwrap();
        let z = pair.diff.mean.abs() / pair.diff.std_error();
        pass &= z <= SE_MULTIPLIER;
        parts.push(format!("|theta|={r}: {:.4} vs {:.4} (z={z:.2})", pair.a.mean, pair.b.mean));
    }
    (pass, parts.join("; "))
}

fn inv_sq(scale: f64) -> FieldSpec {
    FieldSpec::NormPower { power: 2.0, scale }
}

// At p = 5 both sides involve |X|^-4, whose variance E|X|^-8 is infinite
// for p <= 8: the standard errors are not meaningful there. p = 10 is
// reported alongside as a finite-variance check of the same formula.

fn johnstone_mle(p: usize) -> (bool, String) {
    let pf = p as f64;
    let cand = LossEstimatorSpec::corrected(
        BaseSpec::ConstantSpherical,
        CorrectionSpec::Fixed { gamma: inv_sq(1.0), scale: 2.0 * (pf - 4.0) },
    );
    risk_difference_matches(p, EstimatorSpec::Mle, BaseSpec::ConstantSpherical, cand, move |x| {
        -4.0 * (pf - 4.0).powi(2) / norm_sq(x).powi(2)
    })
}

fn criterion_2() -> Line {
    let (pass, detail) = johnstone_mle(5);
    let (ok10, d10) = johnstone_mle(10);
    Line {
        id: 2,
        pass,
        detail: format!(
            "MLE p=5, diff vs -4(p-4)^2/|X|^4: {detail} || p=10 (information, {}): {d10}",
            if ok10 { "agrees" } else { "disagrees" }
        ),
    }
}

fn johnstone_js(p: usize, power: i32) -> (bool, String) {
    let pf = p as f64;
    let cand =
        LossEstimatorSpec::corrected(BaseSpec::SureKnownVar, CorrectionSpec::Fixed { gamma: inv_sq(1.0), scale: -2.0 * pf });
    risk_difference_matches(p, EstimatorSpec::JamesStein, BaseSpec::SureKnownVar, cand, move |x| {
        -4.0 * pf * pf / norm_sq(x).powi(power)
    })
}

fn criterion_3() -> Line {
    // The stated 1/|X|² form is inconsistent with the derivation, which
    // gives -4p² E[1/|X|⁴]; the two coincide at θ = 0 for p = 5, where
    // E|X|^-2 = E|X|^-4 = 1/3.
    let (pass, detail) = johnstone_js(5, 2);
    let (_, literal) = johnstone_js(5, 1);
    let (ok10, d10) = johnstone_js(10, 2);
    Line {
        id: 3,
        pass,
        detail: format!(
            "JS p=5, diff vs -4p^2/|X|^4: {detail} || stated 1/|X|^2 form (information): {literal} || p=10 (information, {}): {d10}",
            if ok10 { "agrees" } else { "disagrees" }
        ),
    }
}

fn run_preset(name: &str) -> (bool, String) {
    let out = presets::preset(name).unwrap().risk.unwrap().run(None).unwrap();
    let worst = out
        .assertions
        .iter()
        .map(|a| (a.diff_mean / a.diff_se, a))
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .unwrap();
    let detail = format!(
        "{} assertions; largest diff/se {:.2} ({} |theta|={})",
        out.assertions.len(),
        worst.0,
        worst.1.setting,
        worst.1.theta_norm
    );
    (out.pass() && !out.assertions.is_empty(), detail)
}

fn criterion_4() -> Line {
    let (pass, detail) = run_preset("bayes-paradox-1d");
    Line { id: 4, pass, detail: format!("1-D normal, X^2+1 vs X^2-1, diff = 4: {detail}") }
}

fn criterion_5() -> Line {
    let (pass, detail) = run_preset("wan-zou");
    Line { id: 5, pass, detail: format!("Wan-Zou d=2.72, sigma2 in {{0.5,1,2}}: {detail}") }
}

fn criterion_6() -> Line {
    let (pass, detail) = run_preset("mixture-t");
    Line { id: 6, pass, detail: format!("t6 p=6, c=k(p-4): {detail}") }
}

fn criterion_7() -> Line {
    let (pass, detail) = run_preset("residual-ls");
    Line { id: 7, pass, detail: format!("p=6 k=4 d=0.05, chi and fixed radius: {detail}") }
}

fn criterion_8() -> Line {
    let p = 5;
    let sampler = SamplerSpec::normal(p, 1.0);
    let estimator = EstimatorSpec::JamesStein.compile(p).unwrap();
    let delta = LossEstimatorSpec::unbiased(BaseSpec::SureKnownVar).compile(&estimator, &sampler).unwrap();
    let theta = vec![0.0; p];
    let (mut violations, mut strict, mut negative) = (0u64, 0u64, 0u64);
    for i in 0..1_000_000u64 {
        let obs = sampler.draw_replication(SEED, i, 0);
        let loss = delta.target().evaluate(&estimator.estimate(&obs).unwrap(), &theta).unwrap();
        let d = delta.evaluate(&obs).unwrap();
        let (plus, raw) = ((positive_part(d) - loss).powi(2), (d - loss).powi(2));
        violations += u64::from(plus > raw);
        strict += u64::from(plus < raw);
        negative += u64::from(d < 0.0);
    }
    Line {
        id: 8,
        pass: violations == 0 && strict > 0,
        detail: format!("JS SURE p=5 theta=0, 1e6 draws: {negative} negative, {strict} strict improvements, {violations} violations"),
    }
}

fn criterion_9() -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in identities::NAMES {
        let ok = identities::run(name, Control::Faithful, DEFAULT_IDENTITY_N, SEED, None).unwrap();
        let bad = identities::run(name, Control::Broken, DEFAULT_IDENTITY_N, SEED, None).unwrap();
        let good = ok.iter().filter(|r| r.pass).count();
        let zmax = ok.iter().map(|r| r.z()).fold(0.0, f64::max);
        let control_fails = bad.iter().all(|r| !r.pass);
        pass &= ok.len() >= 3 && good == ok.len() && control_fails;
        parts.push(format!("{name} {good}/{} (max z {zmax:.2}), control {}", ok.len(), if control_fails { "fails" } else { "PASSES" }));
    }
    Line { id: 9, pass, detail: parts.join("; ") }
}

fn criterion_10() -> Line {
    let grid = GridSpec::default();
    let p = 5usize;
    let pf = p as f64;
    let np = |power: f64| FieldSpec::NormPower { power, scale: 1.0 }.build(p);
    let k_js = compute_k0(&np(pf - 2.0), &np(pf), &grid, p).unwrap();
    let k_mle = compute_k0(&FieldSpec::Constant { c: 1.0 }.build(p), &np(2.0), &grid, p).unwrap();
    let k_ok = (k_js - 2.0 * pf).abs() <= 1e-9 * 2.0 * pf && (k_mle - 2.0 * (pf - 4.0)).abs() <= 1e-9;
    let prior = FieldSpec::PriorShiftedPower { a: 1.0, b: 1.0 };
    let holds8 = check_prior_condition(&prior.build(8), &grid, 8).unwrap();
    let fails4 = check_prior_condition(&prior.build(4), &grid, 4).unwrap();
    let prior_ok = holds8.pass && fails4.verdict == Verdict::Fail;
    let (p6, k) = (6usize, 4usize);
    let zero = VectorFieldSpec::Zero.build(p6).unwrap();
    let mut max_gap = 0.0f64;
    for d in [0.01, 0.05, 0.1, 0.3] {
        let gamma = inv_sq(d).build(p6);
        let a = check_residual_shrink(&gamma, &zero, k, &grid, p6).unwrap();
        let b = check_residual_ls(&gamma, k, &grid, p6).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            max_gap = max_gap.max((x.lhs - y.lhs).abs());
        }
    }
    Line {
        id: 10,
        pass: k_ok && prior_ok && max_gap <= 1e-12,
        detail: format!(
            "K0(JS) = {k_js} (2p = {}), K0(MLE) = {k_mle} (2(p-4) = {}); prior a=b=1: p=8 {:?}, p=4 {:?}; residual g=0 max gap {max_gap:.1e}",
            2.0 * pf,
            2.0 * (pf - 4.0),
            holds8.verdict,
            fails4.verdict
        ),
    }
}

fn criterion_11() -> Line {
    let study = RidgeStudy::default();
    let rep = study.run(None).unwrap();
    let zmax = rep.rows.iter().map(|r| r.diff_mean.abs() / r.diff_se).fold(0.0, f64::max);
    let pass = rep.rows.iter().all(|r| r.unbiased()) && rep.max_df_gap <= 1e-5;
    Line {
        id: 11,
        pass,
        detail: format!(
            "ridge n={} p={} reps={}: {} penalties, max |Cp*-PE|/se = {zmax:.2}, max df gap = {:.1e}",
            study.n,
            study.p,
            study.replications,
            rep.rows.len(),
            rep.max_df_gap
        ),
    }
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_steinloss")).args(args).env_remove("STEINLOSS_SEED").output().unwrap();
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_12() -> Line {
    let mut pass = true;
    let mut checked = 0;
    for name in presets::NAMES {
        let base = ["risk-compare", "--preset", name, "--n", "20000", "--seed", "7"];
        let runs: Vec<_> = ["1", "3", "8"].iter().map(|t| cli(&[&base[..], &["--threads", t]].concat())).collect();
        pass &= runs.iter().all(|r| !r.1.is_empty() && r.1 == runs[0].1 && r.0 == runs[0].0);
        checked += 1;
    }
    let sim = ["model-select", "--simulate", "--replications", "2000"];
    let a = cli(&[&sim[..], &["--threads", "1"]].concat());
    let b = cli(&[&sim[..], &["--threads", "6"]].concat());
    pass &= a.1 == b.1 && !a.1.is_empty();
    Line { id: 12, pass, detail: format!("{checked} presets and the ridge study, --threads 1/3/8 byte-identical") }
}

#[test]
fn acceptance() {
    let criteria: [fn() -> Line; 12] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
        criterion_11,
        criterion_12,
    ];
    let mut failed = Vec::new();
    for c in criteria {
        let line = c();
        println!("criterion {:>2}: {} — {}", line.id, if line.pass { "PASS" } else { "FAIL" }, line.detail);
        if !line.pass {
            failed.push(line.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
