//! Command-line front end: `fit`, `select`, `diagnose` on CSV data and
//! `simulate` for the Monte Carlo examples. Every command writes TSV files and
//! a `manifest.tsv` of all resolved settings into the output directory.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::error::{Error, Result};
use crate::inference::{sandwich_cov, CovarianceReport};
use crate::likelihood::{Dataset, Family, LikelihoodModel};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::selection::{default_lambda_grid, gcv_select, log_grid, GcvCurve};
use crate::simulation::{self, Example, GeneratorSpec, DEFAULT_GRID_LEN};
use crate::solver::{self, FitConfig, FitResult};
use crate::tsv::{self, fmt_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Fit at one lambda and report coefficients with sandwich standard errors.
    Fit,
    /// Choose lambda by GCV over a grid.
    Select,
    /// Run a Monte Carlo example (linear1, logistic2, cox3, cox-misspec, timing).
    Simulate,
    /// Fit, then report the local convergence rate.
    Diagnose,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Select => "select",
            Command::Simulate => "simulate",
            Command::Diagnose => "diagnose",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = "pennmm", version, about = "Penalized-likelihood variable selection by perturbed MM iterations")]
pub struct RunConfig {
    pub command: Command,
    /// Example name for `simulate`.
    pub example: Option<String>,
    #[arg(long)]
    pub input_path: Option<PathBuf>,
    /// linear, logistic, poisson or cox.
    #[arg(long, default_value = "linear")]
    pub family: String,
    /// scad, l1, lq or hard.
    #[arg(long, default_value = "scad")]
    pub penalty: String,
    /// SCAD shape constant.
    #[arg(long, default_value_t = 3.7)]
    pub a: f64,
    /// L_q exponent.
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// `lo:hi:count` (log-spaced) or a comma-separated list.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub tau: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, env = "PENNMM_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = simulation::DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value = "pennmm-out")]
    pub output_dir: PathBuf,
    /// Covariate correlation for linear1 / logistic2.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Sample size override for `simulate`.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = simulation::DEFAULT_MC_DRAWS)]
    pub mc_draws: usize,
    /// Coefficient of the two omitted terms in cox-misspec.
    #[arg(long, default_value_t = 0.2)]
    pub beta_extra: f64,
}

impl RunConfig {
    pub fn family(&self) -> Result<Family> {
        Family::parse(&self.family).ok_or_else(|| Error::Config(format!("unknown family `{}`", self.family)))
    }

    pub fn penalty_kind(&self) -> Result<PenaltyKind> {
        let kind = match self.penalty.to_ascii_lowercase().as_str() {
            "scad" => PenaltyKind::Scad { a: self.a },
            "l1" | "lasso" => PenaltyKind::L1,
            "lq" => PenaltyKind::Lq { q: self.q },
            "hard" | "hard-threshold" => PenaltyKind::HardThreshold,
            other => return Err(Error::Config(format!("unknown penalty `{other}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn fit_config(&self) -> Result<FitConfig> {
        let cfg = FitConfig {
            tau: self.tau,
            max_iter: self.max_iter,
            ..FitConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Grid from `--grid`, or the default grid for `n` observations.
    pub fn lambda_grid(&self, n: usize) -> Result<Vec<f64>> {
        let Some(text) = &self.grid else {
            return Ok(default_lambda_grid(n, DEFAULT_GRID_LEN));
        };
        let bad = || Error::Config(format!("cannot parse grid `{text}`; use lo:hi:count or a comma list"));
        let grid: Vec<f64> = if text.contains(':') {
            let parts: Vec<&str> = text.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
            let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
            let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
            if !(lo > 0.0 && hi >= lo && count >= 1) {
                return Err(bad());
            }
            log_grid(lo, hi, count)
        } else {
            text.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_>>()?
        };
        if grid.is_empty() || grid.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(bad());
        }
        Ok(grid)
    }

    fn input(&self) -> Result<&Path> {
        self.input_path
            .as_deref()
            .ok_or_else(|| Error::Config(format!("`{}` needs --input-path", self.command.name())))
    }

    pub fn example(&self) -> Result<Option<Example>> {
        let Some(name) = &self.example else {
            return Ok(None);
        };
        Ok(Some(match name.as_str() {
            "linear1" => Example::Linear1 {
                rho: self.rho.unwrap_or(0.5),
            },
            "logistic2" => Example::Logistic2 {
                rho: self.rho.unwrap_or(0.25),
                d: simulation::LOGISTIC2_D,
            },
            "cox3" => Example::Cox3,
            "cox-misspec" => Example::CoxMisspec {
                beta_extra: self.beta_extra,
            },
            "timing" => return Ok(None),
            other => return Err(Error::Config(format!("unknown example `{other}`"))),
        }))
    }

    /// Every field, in a fixed order.
    pub fn manifest_entries(&self) -> Vec<(String, String)> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        vec![
            ("command".into(), self.command.name().into()),
            ("example".into(), opt(self.example.clone())),
            ("input_path".into(), opt(self.input_path.as_ref().map(|p| p.display().to_string()))),
            ("family".into(), self.family.clone()),
            ("penalty".into(), self.penalty.clone()),
            ("a".into(), fmt_f64(self.a)),
            ("q".into(), fmt_f64(self.q)),
            ("lambda".into(), opt(self.lambda.map(fmt_f64))),
            ("grid".into(), opt(self.grid.clone())),
            ("tau".into(), fmt_f64(self.tau)),
            ("max_iter".into(), self.max_iter.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("replicates".into(), self.replicates.to_string()),
            ("threads".into(), self.threads.to_string()),
            ("output_dir".into(), self.output_dir.display().to_string()),
            ("rho".into(), opt(self.rho.map(fmt_f64))),
            ("n".into(), opt(self.n.map(|n| n.to_string()))),
            ("mc_draws".into(), self.mc_draws.to_string()),
            ("beta_extra".into(), fmt_f64(self.beta_extra)),
        ]
    }
}

/// What a command produced; `converged` drives the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub converged: bool,
    pub message: String,
}

fn fit_entries(fit: &FitResult) -> Vec<(String, String)> {
    let c = &fit.config;
    vec![
        ("penalty_resolved".into(), fit.penalty.to_string()),
        ("epsilon".into(), fmt_f64(fit.epsilon)),
        ("epsilon_degenerate".into(), fit.epsilon_degenerate.to_string()),
        ("epsilon_refinements".into(), fit.epsilon_refinements.to_string()),
        ("status".into(), fit.status.name().into()),
        ("iterations".into(), fit.iterations.to_string()),
        ("max_halvings".into(), c.max_halvings.to_string()),
        ("curvature".into(), format!("{:?}", c.curvature)),
        ("algorithm".into(), format!("{:?}", c.algorithm)),
        ("refit".into(), fit.refit.to_string()),
        ("shift_fallbacks".into(), fit.shift_fallbacks.to_string()),
        ("ascent_violations".into(), fit.ascent_violations.to_string()),
    ]
}

fn write_manifest(dir: &Path, entries: &[(String, String)]) -> Result<PathBuf> {
    let path = dir.join("manifest.tsv");
    let rows: Vec<Vec<String>> = entries.iter().map(|(k, v)| vec![k.clone(), v.clone()]).collect();
    tsv::write_table(&path, &["key", "value"], &rows)?;
    Ok(path)
}

fn write_coefficients(dir: &Path, data: &Dataset, fit: &FitResult, cov: &CovarianceReport) -> Result<PathBuf> {
    let path = dir.join("coefficients.tsv");
    let rows: Vec<Vec<String>> = (0..data.d())
        .map(|j| {
            vec![
                data.column_names()[j].clone(),
                fmt_f64(fit.beta_hat[j]),
                if cov.available[j] { fmt_f64(cov.se[j]) } else { "NA".into() },
                if fit.active[j] { "1" } else { "0" }.into(),
            ]
        })
        .collect();
    tsv::write_table(&path, &["name", "estimate", "se", "active"], &rows)?;
    Ok(path)
}

fn write_trace(dir: &Path, fit: &FitResult) -> Result<PathBuf> {
    let path = dir.join("trace.tsv");
    let rows: Vec<Vec<String>> = fit
        .trace
        .iter()
        .map(|r| vec![r.iteration.to_string(), fmt_f64(r.q_eps), fmt_f64(r.alpha), fmt_f64(r.grad_max)])
        .collect();
    tsv::write_table(&path, &["iteration", "q_eps", "alpha", "grad_max"], &rows)?;
    Ok(path)
}

fn write_gcv(dir: &Path, curve: &GcvCurve) -> Result<PathBuf> {
    let path = dir.join("gcv.tsv");
    let rows: Vec<Vec<String>> = (0..curve.lambdas.len())
        .map(|i| {
            vec![
                fmt_f64(curve.lambdas[i]),
                fmt_f64(curve.scores[i]),
                fmt_f64(curve.edf[i]),
                if i == curve.chosen { "1" } else { "0" }.into(),
            ]
        })
        .collect();
    tsv::write_table(&path, &["lambda", "gcv", "edf", "chosen"], &rows)?;
    Ok(path)
}

fn load_model(config: &RunConfig) -> Result<LikelihoodModel> {
    let family = config.family()?;
    let data = tsv::read_dataset(config.input()?, family)?;
    LikelihoodModel::new(family, data)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes coefficient, trace and manifest files for one fit.
fn report_fit(config: &RunConfig, model: &LikelihoodModel, fit: &FitResult, extra: Vec<(String, String)>) -> Result<Outcome> {
    let dir = &config.output_dir;
    let cov = sandwich_cov(model, &fit.penalty, fit)?;
    let mut entries = config.manifest_entries();
    entries.extend(fit_entries(fit));
    entries.extend(extra);
    let files = vec![
        write_coefficients(dir, model.data(), fit, &cov)?,
        write_trace(dir, fit)?,
        write_manifest(dir, &entries)?,
    ];
    Ok(Outcome {
        files,
        converged: fit.converged(),
        message: format!(
            "{}: {} iterations, {} of {} coefficients active",
            fit.status.name(),
            fit.iterations,
            fit.n_active(),
            model.d()
        ),
    })
}

pub fn cmd_fit(config: &RunConfig) -> Result<Outcome> {
    let model = load_model(config)?;
    let spec = PenaltySpec::new(config.penalty_kind()?, config.lambda.unwrap_or(0.0))?;
    let fit = solver::fit(&model, &spec, None, &config.fit_config()?)?;
    ensure_dir(&config.output_dir)?;
    report_fit(config, &model, &fit, Vec::new())
}

pub fn cmd_select(config: &RunConfig) -> Result<Outcome> {
    let model = load_model(config)?;
    let grid = config.lambda_grid(model.n())?;
    let (curve, fit) = gcv_select(&model, config.penalty_kind()?, &grid, &config.fit_config()?)?;
    ensure_dir(&config.output_dir)?;
    let extra = vec![
        ("grid_resolved".into(), grid.iter().map(|&l| fmt_f64(l)).collect::<Vec<_>>().join(",")),
        ("lambda_chosen".into(), fmt_f64(curve.chosen_lambda())),
    ];
    let mut out = report_fit(config, &model, &fit, extra)?;
    out.files.push(write_gcv(&config.output_dir, &curve)?);
    out.message = format!("lambda = {}; {}", curve.chosen_lambda(), out.message);
    Ok(out)
}

/// `|b_{k+1} - b*| / |b_k - b*|` along the trace, with `b*` the final iterate.
pub fn contraction_ratios(fit: &FitResult) -> Vec<f64> {
    let star = &fit.beta_eps;
    let dist: Vec<f64> = fit.trace.iter().map(|r| (&r.beta - star).norm()).collect();
    dist.windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| w[1] / w[0])
        .collect()
}

pub fn cmd_diagnose(config: &RunConfig) -> Result<Outcome> {
    let model = load_model(config)?;
    let spec = PenaltySpec::new(config.penalty_kind()?, config.lambda.unwrap_or(0.0))?;
    let cfg = config.fit_config()?;
    let fit = solver::fit(&model, &spec, None, &cfg)?;
    ensure_dir(&config.output_dir)?;
    let mut out = report_fit(config, &model, &fit, Vec::new())?;
    if !fit.converged() {
        return Ok(out);
    }
    let diag = solver::rate_diagnostic(&model, &fit.penalty, &fit.beta_eps, cfg.tau)?;
    let mut rows = vec![vec!["rho".to_string(), "0".to_string(), fmt_f64(diag.rho)]];
    rows.extend(
        diag.eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &e)| vec!["eigenvalue".into(), i.to_string(), fmt_f64(e)]),
    );
    rows.extend(
        contraction_ratios(&fit)
            .iter()
            .enumerate()
            .map(|(k, &r)| vec!["contraction".into(), k.to_string(), fmt_f64(r)]),
    );
    let path = config.output_dir.join("rate.tsv");
    tsv::write_table(&path, &["kind", "index", "value"], &rows)?;
    out.files.push(path);
    out.message = format!("rho = {}; {}", diag.rho, out.message);
    Ok(out)
}

pub fn cmd_simulate(config: &RunConfig) -> Result<Outcome> {
    let name = config
        .example
        .as_deref()
        .ok_or_else(|| Error::Config("`simulate` needs an example name".into()))?;
    ensure_dir(&config.output_dir)?;
    let mut entries = config.manifest_entries();
    if name == "timing" {
        let n = config.n.unwrap_or(simulation::LOGISTIC2_N);
        let rows = simulation::timing_study(&[8, 9, 10, 11], n, config.rho.unwrap_or(0.25), config.lambda.unwrap_or(0.08), config.seed, config.replicates.min(10))?;
        let path = config.output_dir.join("timing.tsv");
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![r.d.to_string(), fmt_f64(r.subset_secs), fmt_f64(r.mm_secs)])
            .collect();
        tsv::write_table(&path, &["d", "bic_secs", "mm_secs"], &table)?;
        let manifest = write_manifest(&config.output_dir, &entries)?;
        return Ok(Outcome {
            files: vec![path, manifest],
            converged: true,
            message: "timing study written".into(),
        });
    }
    let example = config.example()?.expect("named example");
    let mut spec = GeneratorSpec::new(example)
        .with_seed(config.seed)
        .with_replicates(config.replicates)
        .with_mc_draws(config.mc_draws);
    if let Some(n) = config.n {
        spec = spec.with_n(n);
    }
    spec.validate()?;
    let outcomes = simulation::run_experiment(&spec, config.threads)?;
    let report = simulation::summarize(&spec, &outcomes);
    let tsv_path = config.output_dir.join("report.tsv");
    let txt_path = config.output_dir.join("report.txt");
    simulation::write_report(&report, &tsv_path)?;
    simulation::write_sidecar(&report, &txt_path)?;
    entries.push(("n_resolved".into(), spec.n.to_string()));
    entries.push(("grid_len".into(), spec.grid_len.to_string()));
    let manifest = write_manifest(&config.output_dir, &entries)?;
    let failures: usize = report.rows.iter().map(|r| r.failures).sum();
    Ok(Outcome {
        files: vec![tsv_path, txt_path, manifest],
        converged: true,
        message: format!("{} replicates of {}; {failures} method failures", spec.replicates, example.name()),
    })
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    match config.command {
        Command::Fit => cmd_fit(config),
        Command::Select => cmd_select(config),
        Command::Simulate => cmd_simulate(config),
        Command::Diagnose => cmd_diagnose(config),
    }
}

/// Exit status: 0 success, 1 solver failure or non-convergence, 2 input error.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.converged => 0,
        Ok(_) => 1,
        Err(e) if e.is_input_error() => 2,
        Err(_) => 1,
    }
}

/// Parses `args`, runs the command and reports on stderr; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = run(&config);
    match &result {
        Ok(o) => eprintln!("{}", o.message),
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&result)
}

/// Coefficients as written to `coefficients.tsv`, for callers that parse them back.
pub fn read_coefficients(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .skip(1)
        .enumerate()
        .map(|(i, line)| {
            let mut f = line.split('\t');
            let name = f.next().unwrap_or_default().to_string();
            let v = f.next().and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i as u64 + 2,
                message: "bad estimate".into(),
            })?;
            Ok((name, v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        RunConfig::try_parse_from(std::iter::once("pennmm").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn grid_forms() {
        let c = parse(&["select", "--grid", "0.01:1:3"]);
        let g = c.lambda_grid(100).unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] - 0.1).abs() < 1e-12);
        let c = parse(&["select", "--grid", "0, 0.5,1"]);
        assert_eq!(c.lambda_grid(100).unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse(&["select", "--grid", "a:b"]).lambda_grid(100).is_err());
        assert_eq!(parse(&["select"]).lambda_grid(100).unwrap().len(), DEFAULT_GRID_LEN);
    }

    #[test]
    fn penalties_and_examples_resolve() {
        assert_eq!(parse(&["fit", "--penalty", "l1"]).penalty_kind().unwrap(), PenaltyKind::L1);
        assert!(parse(&["fit", "--penalty", "scad", "--a", "1.5"]).penalty_kind().is_err());
        assert!(parse(&["fit", "--penalty", "ridge"]).penalty_kind().is_err());
        let c = parse(&["simulate", "logistic2", "--rho", "0.75"]);
        assert_eq!(c.example().unwrap(), Some(Example::Logistic2 { rho: 0.75, d: 9 }));
        assert!(parse(&["simulate", "example9"]).example().is_err());
    }

    #[test]
    fn fit_without_input_is_an_input_error() {
        let r = run(&parse(&["fit"]));
        assert_eq!(exit_code(&r), 2);
    }
}
