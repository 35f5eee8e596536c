//! Batch runner. Exit codes: 0 all assertions pass, 1 an assertion failed,
//! 2 usage or configuration error.

pub mod config;
pub mod identities;
pub mod presets;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::model_selection::{default_lambda_grid, select, LinearModelData, RidgeStudy};
use crate::risk_engine::{Control, DEFAULT_SEED};
use config::{ConditionConfig, IdentityConfig, RiskConfig, RiskOverrides, SelectConfig};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_ASSERTION: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "steinloss", version, about = "Loss estimation experiments: risks, identities, domination conditions, Cp*")]
pub struct Cli {
    /// Master seed; falls back to STEINLOSS_SEED, then the config, then 42.
    #[arg(long, global = true, env = "STEINLOSS_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Paired risk comparison of loss estimators over a θ sweep.
    RiskCompare(RiskArgs),
    /// Monte Carlo checks of the integration-by-parts identities.
    VerifyIdentities(IdentityArgs),
    /// Grid checks of the domination conditions.
    CheckConditions(ConditionArgs),
    /// Ridge penalty selection by Cp*.
    ModelSelect(SelectArgs),
    /// List presets whose name contains FILTER.
    ListPresets { filter: Option<String> },
}

#[derive(Debug, Args)]
pub struct Source {
    /// Named preset (see list-presets).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub n: Option<u64>,
    /// Comma-separated |θ| values.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Magnitude of the correction coefficient of every candidate.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Force the domination assertion on.
    #[arg(long = "assert", conflicts_with = "no_assert")]
    pub assert_on: bool,
    #[arg(long)]
    pub no_assert: bool,
    /// CSV output (stdout when absent).
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IdentityArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Restrict to these identities (repeatable).
    #[arg(long = "identity")]
    pub identities: Vec<String>,
    #[arg(long)]
    pub n: Option<u64>,
    /// Run the deliberately broken variants; they are expected to fail.
    #[arg(long)]
    pub negative_control: bool,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConditionArgs {
    #[command(flatten)]
    pub source: Source,
    /// Comma-separated grid radii.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    #[arg(long)]
    pub directions: Option<usize>,
    /// Per-point CSV output.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Data file; omit with --simulate.
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub response: Option<String>,
    /// Prepend an unpenalised intercept column.
    #[arg(long)]
    pub intercept: bool,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Run the simulated ridge study instead of fitting a file.
    #[arg(long, conflicts_with = "data")]
    pub simulate: bool,
    #[arg(long)]
    pub replications: Option<u64>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

/// Parses `args` and runs; never panics on bad input.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::from(EXIT_PASS),
        Ok(false) => ExitCode::from(EXIT_ASSERTION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

/// `Ok(pass)` or a configuration error.
pub fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::RiskCompare(a) => risk_compare(cli, a),
        Command::VerifyIdentities(a) => verify_identities(cli, a),
        Command::CheckConditions(a) => check_conditions(a),
        Command::ModelSelect(a) => model_select(cli, a),
        Command::ListPresets { filter } => {
            let f = filter.as_deref().unwrap_or("");
            for p in presets::all().iter().filter(|p| p.name.contains(f)) {
                println!("{:<18} {}", p.name, p.summary);
            }
            Ok(true)
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))
}

fn unknown_preset(name: &str) -> Error {
    Error::InvalidSpec(format!("unknown preset `{name}`; try list-presets"))
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn risk_compare(cli: &Cli, a: &RiskArgs) -> Result<bool> {
    let mut cfg: RiskConfig = match (&a.source.preset, &a.source.config) {
        (Some(name), _) => presets::preset(name)
            .ok_or_else(|| unknown_preset(name))?
            .risk
            .ok_or_else(|| Error::InvalidSpec(format!("preset `{name}` has no risk comparison")))?,
        (None, Some(path)) => read_json(path)?,
        (None, None) => return Err(Error::InvalidSpec("give --preset or --config".into())),
    };
    let assert = if a.assert_on { Some(true) } else if a.no_assert { Some(false) } else { None };
    cfg.apply(&RiskOverrides { n: a.n, seed: cli.seed, radii: a.radii.clone(), alpha: a.alpha, assert });
    let outcome = cfg.run(cli.threads)?;
    let mut out = output(a.out_csv.as_ref())?;
    outcome.write_csv(&mut out)?;
    out.flush()?;
    if let Some(p) = &a.out_json {
        write_json(p, &outcome)?;
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for (s, sc) in &outcome.spot_checks {
        eprintln!("spot-check {s} |theta|={}: z = {:.2} ({})", sc.radius, sc.z, if sc.agrees { "agrees" } else { "DISAGREES" });
    }
    for l in &outcome.assertions {
        eprintln!(
            "{} {} {} |theta|={}: diff {:.6e} (se {:.3e})",
            if l.pass { "PASS" } else { "FAIL" },
            l.setting,
            l.candidate,
            l.theta_norm,
            l.diff_mean,
            l.diff_se
        );
    }
    Ok(outcome.pass())
}

fn verify_identities(cli: &Cli, a: &IdentityArgs) -> Result<bool> {
    let mut cfg: IdentityConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => IdentityConfig::default(),
    };
    if !a.identities.is_empty() {
        cfg.identities = a.identities.clone();
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let control = if a.negative_control { Control::Broken } else { Control::Faithful };
    let names: Vec<&str> = if cfg.identities.is_empty() {
        identities::NAMES.to_vec()
    } else {
        cfg.identities.iter().map(String::as_str).collect()
    };
    if let Some(bad) = names.iter().find(|n| !identities::NAMES.contains(n)) {
        return Err(Error::InvalidSpec(format!("unknown identity `{bad}`; known: {}", identities::NAMES.join(", "))));
    }
    let mut reports = Vec::new();
    for name in names {
        for r in identities::run(name, control, cfg.n, seed, cli.threads)? {
            println!(
                "{} {:<12} {:<40} lhs {:.6e} rhs {:.6e} z {:.2}",
                if r.pass { "PASS" } else { "FAIL" },
                r.identity,
                r.case,
                r.lhs_mean,
                r.rhs_mean,
                r.z()
            );
            reports.push(r);
        }
    }
    if let Some(p) = &a.out_json {
        write_json(p, &reports)?;
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn check_conditions(a: &ConditionArgs) -> Result<bool> {
    let mut cfg: ConditionConfig = match (&a.source.preset, &a.source.config) {
        (Some(name), _) => presets::preset(name)
            .ok_or_else(|| unknown_preset(name))?
            .conditions
            .ok_or_else(|| Error::InvalidSpec(format!("preset `{name}` has no condition check")))?,
        (None, Some(path)) => read_json(path)?,
        (None, None) => return Err(Error::InvalidSpec("give --preset or --config".into())),
    };
    if let Some(r) = &a.radii {
        cfg.grid.radii = r.clone();
    }
    if let Some(d) = a.directions {
        cfg.grid.directions_per_radius = d;
    }
    let outcome = cfg.run()?;
    let r = &outcome.report;
    println!("check: {} (p = {})", r.check, cfg.p);
    for c in &outcome.constants {
        println!("{} = {}", c.name, c.value);
    }
    println!("verdict: {:?}, max lhs {:.6e} at radius {:.4}", r.verdict, r.max_lhs, r.worst_radius);
    println!("note: {}", r.note);
    if let Some(p) = &a.out_csv {
        r.write_csv(BufWriter::new(File::create(p)?))?;
    }
    if let Some(p) = &a.out_json {
        write_json(p, &outcome)?;
    }
    Ok(outcome.pass())
}

fn model_select(cli: &Cli, a: &SelectArgs) -> Result<bool> {
    let mut cfg: SelectConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SelectConfig::default(),
    };
    if let Some(r) = &a.response {
        cfg.response = r.clone();
    }
    cfg.intercept |= a.intercept;
    if a.lambdas.is_some() {
        cfg.lambdas = a.lambdas.clone();
    }
    if a.sigma2.is_some() {
        cfg.sigma2_hat = a.sigma2;
    }
    if a.simulate {
        let mut study = RidgeStudy { seed: cli.seed.unwrap_or(DEFAULT_SEED), ..RidgeStudy::default() };
        if let Some(l) = cfg.lambdas {
            study.lambdas = l;
        }
        if let Some(r) = a.replications {
            study.replications = r;
        }
        let rep = study.run(cli.threads)?;
        let mut out = output(a.out_csv.as_ref())?;
        writeln!(out, "lambda,df_linear,df_divergence,cp_mean,cp_se,pe_mean,pe_se,diff_mean,diff_se")?;
        for r in &rep.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.lambda, r.df_linear, r.df_divergence, r.cp_mean, r.cp_se, r.pe_mean, r.pe_se, r.diff_mean, r.diff_se
            )?;
        }
        out.flush()?;
        if let Some(p) = &a.out_json {
            write_json(p, &rep)?;
        }
        let pass = rep.rows.iter().all(|r| r.unbiased()) && rep.max_df_gap <= 1e-5;
        eprintln!(
            "{} Cp* unbiased on {} penalties; max |df_linear - df_divergence| = {:.2e}",
            if pass { "PASS" } else { "FAIL" },
            rep.rows.len(),
            rep.max_df_gap
        );
        return Ok(pass);
    }
    let path = a.data.as_ref().ok_or_else(|| Error::InvalidSpec("give a data file or --simulate".into()))?;
    let file = File::open(path).map_err(|e| Error::InvalidSpec(format!("cannot open {}: {e}", path.display())))?;
    let data = LinearModelData::from_csv(file, &cfg.response, cfg.intercept)?;
    let lambdas = cfg.lambdas.clone().unwrap_or_else(|| default_lambda_grid(1e-3, 1e3, 25));
    let sel = select(&data, &lambdas, cfg.sigma2_hat)?;
    let mut out = output(a.out_csv.as_ref())?;
    sel.write_csv(&mut out)?;
    out.flush()?;
    if let Some(p) = &a.out_json {
        write_json(p, &sel)?;
    }
    eprintln!("chosen lambda = {} (sigma2_hat = {})", sel.chosen_lambda, sel.sigma2_hat);
    Ok(true)
}
