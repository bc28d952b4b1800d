//! `epgpr`: trace orbits, detect eigenvalue exchanges and localize
//! exceptional points from the command line.

mod config;
mod failure;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use epgpr::epsearch::{brute_force_ep, EpResult};
use epgpr::gpr::{fit, GprModel, Hyperparameters, Point};
use epgpr::grouping::{group_paths, ExchangeReport, Metric};
use epgpr::models::{trace_orbit, OrbitSpectrumSet};
use epgpr::pipeline::{search_exchanging_pairs, PipelineOptions};
use epgpr::Complex64;
use serde::{Deserialize, Serialize};

use config::{CommonArgs, RunConfig};
use failure::{Failure, Kind};
use output::{paths_csv, spectra_csv, uniform_angles, write_atomic, write_json};

#[derive(Debug, Parser)]
#[command(name = "epgpr", version, about = "Exceptional point localization with Gaussian process surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Diagonalize along the orbit; writes spectra.json and spectra.csv.
    Trace,
    /// Sort the orbit spectra into paths and report exchanging pairs.
    Group,
    /// Run the surrogate search for every exchanging pair.
    FindEp,
    /// Newton search on the exact p of the closest eigenvalue pair.
    Oracle,
    /// Fit GPs to a data file and report LML and leave-one-out residuals.
    GprFit {
        /// JSON with `x` (list of [a, b]) and `y` (one list per target).
        #[arg(long)]
        data: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = cli.common.resolve()?;
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global().map_err(|e| Failure::config_msg(e.to_string()))?;
    }
    match cli.command {
        Command::Trace => cmd_trace(&cfg),
        Command::Group => cmd_group(&cfg),
        Command::FindEp => cmd_find_ep(&cfg),
        Command::Oracle => cmd_oracle(&cfg),
        Command::GprFit { data } => cmd_gpr_fit(&cfg, &data),
    }
}

fn persist_config(cfg: &RunConfig) -> Result<(), Failure> {
    write_json(&cfg.out_dir, "run_config.json", cfg).map(|_| ())
}

fn obtain_spectra(cfg: &RunConfig) -> Result<OrbitSpectrumSet, Failure> {
    if let Some(path) = &cfg.spectra {
        return OrbitSpectrumSet::load(path).map_err(Failure::config);
    }
    let family = cfg.build_family()?;
    let orbit = cfg.build_orbit()?;
    Ok(trace_orbit(&family, &orbit, cfg.grouping.metric == Metric::Cosine)?)
}

fn cmd_trace(cfg: &RunConfig) -> Result<(), Failure> {
    let family = cfg.build_family()?;
    let orbit = cfg.build_orbit()?;
    let set = trace_orbit(&family, &orbit, cfg.grouping.metric == Metric::Cosine)?;
    persist_config(cfg)?;
    write_json(&cfg.out_dir, "spectra.json", &set)?;
    write_atomic(&cfg.out_dir, "spectra.csv", spectra_csv(&set, &orbit.angles()).as_bytes())?;
    println!("traced {} points of a {}-level family into {}", set.n_points(), set.dim(), cfg.out_dir.display());
    Ok(())
}

fn group(cfg: &RunConfig, set: &OrbitSpectrumSet) -> Result<ExchangeReport, Failure> {
    let report = group_paths(set, &cfg.grouping)?;
    write_json(&cfg.out_dir, "exchange.json", &report.to_json())?;
    write_atomic(&cfg.out_dir, "paths.csv", paths_csv(&report, &uniform_angles(set.n_points())).as_bytes())?;
    Ok(report)
}

fn cmd_group(cfg: &RunConfig) -> Result<(), Failure> {
    let set = obtain_spectra(cfg)?;
    persist_config(cfg)?;
    let report = group(cfg, &set)?;
    println!(
        "{} exchanging pair(s): {:?}; {} closed path(s)",
        report.exchanging_pairs.len(),
        report.exchanging_pairs,
        report.closed_paths().len()
    );
    Ok(())
}

fn cmd_find_ep(cfg: &RunConfig) -> Result<(), Failure> {
    let family = cfg.build_family()?;
    let set = obtain_spectra(cfg)?;
    if set.dim() != family.dim() {
        return Err(Failure::config_msg(format!("spectra have {} levels but the family has {}", set.dim(), family.dim())));
    }
    persist_config(cfg)?;
    let report = group(cfg, &set)?;
    if report.exchanging_pairs.is_empty() {
        return Err(Failure::new(Kind::NoSignature, "no exchanging eigenvalue pair on the orbit"));
    }
    let opts = PipelineOptions { grouping: cfg.grouping.clone(), subsample: cfg.subsample, search: cfg.search_config() };
    let mut results: Vec<EpResult> = search_exchanging_pairs(&family, &report, &opts)?;
    if let Some(map) = &cfg.parameter_map {
        results = results.into_iter().map(|r| r.with_map(map)).collect();
    }
    write_json(&cfg.out_dir, "ep_results.json", &results)?;
    for (k, r) in results.iter().enumerate() {
        write_atomic(&cfg.out_dir, &format!("iterations_{k}.csv"), r.diagnostics.to_csv().as_bytes())?;
        println!(
            "pair {k}: kappa_ep = {:.12} {:+.12}i  delta_lambda = {:.3e}  status = {:?}  diagonalizations = {}",
            r.kappa_ep.re, r.kappa_ep.im, r.delta_lambda, r.status, r.diagonalizations
        );
    }
    let failed: Vec<usize> = (0..results.len()).filter(|&k| !results[k].status.is_converged()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(Kind::NotConverged, format!("searches {failed:?} did not converge")))
    }
}

#[derive(Serialize)]
struct OracleFile {
    kappa_ep: Complex64,
    #[serde(skip_serializing_if = "Option::is_none")]
    physical: Option<(f64, f64)>,
    lambda1: Complex64,
    lambda2: Complex64,
    residual: f64,
    tolerance: f64,
    iterations: usize,
    start: Complex64,
}

fn cmd_oracle(cfg: &RunConfig) -> Result<(), Failure> {
    let family = cfg.build_family()?;
    let start = cfg.oracle_start.unwrap_or(cfg.orbit.center);
    let start = Complex64::new(start[0], start[1]);
    persist_config(cfg)?;
    let r = brute_force_ep(&family, start, &cfg.oracle)?;
    let file = OracleFile {
        kappa_ep: r.kappa_ep,
        physical: cfg.parameter_map.map(|m| m.forward(r.kappa_ep)),
        lambda1: r.lambda1,
        lambda2: r.lambda2,
        residual: r.residual,
        tolerance: r.tolerance,
        iterations: r.iterations,
        start,
    };
    write_json(&cfg.out_dir, "oracle.json", &file)?;
    println!("oracle kappa_ep = {:.15} {:+.15}i  |p| = {:.3e}", r.kappa_ep.re, r.kappa_ep.im, r.residual);
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DataFile {
    x: Vec<Point>,
    y: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct TargetDiagnostics {
    log_marginal_likelihood: f64,
    hyperparameters: Hyperparameters,
    jitter: f64,
    optimizer_stalled: bool,
    max_training_residual: f64,
    loo_rms: f64,
    loo_max_abs: f64,
}

fn diagnostics(model: &GprModel, ys: &[Vec<f64>]) -> Vec<TargetDiagnostics> {
    (0..model.n_targets())
        .map(|t| {
            let tm = model.target(t);
            let loo = model.loo_residuals(t);
            let n = loo.len() as f64;
            let max_training_residual =
                model.inputs().iter().zip(&ys[t]).map(|(x, y)| (model.predict_mean(t, x) - y).abs()).fold(0.0, f64::max);
            TargetDiagnostics {
                log_marginal_likelihood: model.log_marginal_likelihood(t),
                hyperparameters: *tm.hyperparameters(),
                jitter: tm.jitter(),
                optimizer_stalled: tm.optimizer_stalled(),
                max_training_residual,
                loo_rms: (loo.iter().map(|r| r * r).sum::<f64>() / n).sqrt(),
                loo_max_abs: loo.iter().fold(0.0, |m, r| m.max(r.abs())),
            }
        })
        .collect()
}

fn cmd_gpr_fit(cfg: &RunConfig, data: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(data).map_err(|e| Failure::config_msg(format!("{}: {e}", data.display())))?;
    let file: DataFile = serde_json::from_str(&text).map_err(|e| Failure::config_msg(format!("{}: {e}", data.display())))?;
    if file.y.is_empty() {
        return Err(Failure::config_msg("data file has no targets"));
    }
    let h0 = cfg.search.hyperparameters.unwrap_or(Hyperparameters { noise_variance: cfg.search.noise_variance, ..Default::default() });
    let mut opts = cfg.search.fit.clone();
    opts.seed = cfg.seed;
    let model = fit(&file.x, &file.y, &h0, &opts)?;
    persist_config(cfg)?;
    write_json(&cfg.out_dir, "gpr_model.json", &model.to_dump())?;
    let diag = diagnostics(&model, &file.y);
    write_json(&cfg.out_dir, "gpr_diagnostics.json", &diag)?;
    for (t, d) in diag.iter().enumerate() {
        println!(
            "target {t}: lml = {:.6e}  loo_rms = {:.3e}  max_training_residual = {:.3e}",
            d.log_marginal_likelihood, d.loo_rms, d.max_training_residual
        );
    }
    Ok(())
}
