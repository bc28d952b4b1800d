use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use epgpr::epsearch::{OracleOptions, SearchConfig};
use epgpr::grouping::{GroupingOptions, Metric};
use epgpr::models::{MatrixFamily, Orbit, ParameterMap};
use epgpr::pipeline::DEFAULT_SUBSAMPLE;
use epgpr::Complex64;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Kato2,
    Random5,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilySpec {
    pub name: FamilyName,
    pub seed: u64,
    pub file: Option<PathBuf>,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec { name: FamilyName::Kato2, seed: 42, file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitSpec {
    pub center: [f64; 2],
    pub radius: f64,
    /// Ellipse semi-axes; overrides `radius` when present.
    pub semi_axes: Option<[f64; 2]>,
    pub n_points: usize,
}

impl Default for OrbitSpec {
    fn default() -> Self {
        OrbitSpec { center: [0.0, 0.8], radius: 0.5, semi_axes: None, n_points: 100 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilySpec,
    pub orbit: OrbitSpec,
    /// Precomputed spectra used instead of tracing the orbit.
    pub spectra: Option<PathBuf>,
    pub grouping: GroupingOptions,
    pub subsample: Option<usize>,
    pub search: SearchConfig,
    pub oracle: OracleOptions,
    /// Oracle starting point; the orbit center when absent.
    pub oracle_start: Option<[f64; 2]>,
    pub parameter_map: Option<ParameterMap>,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: FamilySpec::default(),
            orbit: OrbitSpec::default(),
            spectra: None,
            grouping: GroupingOptions::default(),
            subsample: Some(DEFAULT_SUBSAMPLE),
            search: SearchConfig::default(),
            oracle: OracleOptions::default(),
            oracle_start: None,
            parameter_map: None,
            seed: 0,
            jobs: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected RE,IM but got {s:?}"))?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok([a, b])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trigger(pub Option<usize>);

fn parse_trigger(s: &str) -> Result<Trigger, String> {
    match s {
        "off" | "none" | "never" => Ok(Trigger(None)),
        _ => s.parse::<usize>().map(|n| Trigger(Some(n))).map_err(|e| e.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Euclidean,
    Cosine,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub family: Option<FamilyName>,
    #[arg(long, global = true)]
    pub family_seed: Option<u64>,
    #[arg(long, global = true)]
    pub family_file: Option<PathBuf>,
    /// Orbit center as RE,IM.
    #[arg(long, global = true, value_parser = parse_pair, allow_hyphen_values = true)]
    pub center: Option<[f64; 2]>,
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Ellipse semi-axes as A,B.
    #[arg(long, global = true, value_parser = parse_pair)]
    pub semi_axes: Option<[f64; 2]>,
    #[arg(long, global = true)]
    pub n_points: Option<usize>,
    #[arg(long, global = true)]
    pub spectra: Option<PathBuf>,
    #[arg(long, global = true)]
    pub metric: Option<MetricArg>,
    #[arg(long, global = true)]
    pub optimal_assignment: bool,
    #[arg(long, global = true)]
    pub closure_tolerance: Option<f64>,
    #[arg(long, global = true)]
    pub subsample: Option<usize>,
    #[arg(long, global = true)]
    pub noise_variance: Option<f64>,
    #[arg(long, global = true)]
    pub optimize_noise: bool,
    /// Keep the starting hyperparameters.
    #[arg(long, global = true)]
    pub no_optimize: bool,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub drop_factor: Option<f64>,
    #[arg(long, global = true)]
    pub min_gap: Option<f64>,
    /// Iteration after which the exploration point is added, or `off`.
    #[arg(long, global = true, value_parser = parse_trigger)]
    pub exploration_after: Option<Trigger>,
    #[arg(long, global = true)]
    pub delta_lambda_tol: Option<f64>,
    #[arg(long, global = true, value_parser = parse_pair, allow_hyphen_values = true)]
    pub oracle_start: Option<[f64; 2]>,
    /// Physical center of the parameter map as C1,C2.
    #[arg(long, global = true, value_parser = parse_pair, allow_hyphen_values = true)]
    pub map_center: Option<[f64; 2]>,
    #[arg(long, global = true)]
    pub map_radius: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut RunConfig) -> Result<(), Failure> {
        if let Some(v) = self.family {
            cfg.family.name = v;
        }
        if let Some(v) = self.family_seed {
            cfg.family.seed = v;
        }
        if let Some(v) = &self.family_file {
            cfg.family.file = Some(v.clone());
            if self.family.is_none() {
                cfg.family.name = FamilyName::File;
            }
        }
        if let Some(v) = self.center {
            cfg.orbit.center = v;
        }
        if let Some(v) = self.radius {
            cfg.orbit.radius = v;
            cfg.orbit.semi_axes = None;
        }
        if let Some(v) = self.semi_axes {
            cfg.orbit.semi_axes = Some(v);
        }
        if let Some(v) = self.n_points {
            cfg.orbit.n_points = v;
        }
        if let Some(v) = &self.spectra {
            cfg.spectra = Some(v.clone());
        }
        if let Some(v) = self.metric {
            cfg.grouping.metric = match v {
                MetricArg::Euclidean => Metric::Euclidean,
                MetricArg::Cosine => Metric::Cosine,
            };
        }
        if self.optimal_assignment {
            cfg.grouping.optimal_assignment = true;
        }
        if let Some(v) = self.closure_tolerance {
            cfg.grouping.closure_tolerance = Some(v);
        }
        if let Some(v) = self.subsample {
            cfg.subsample = Some(v);
        }
        if let Some(v) = self.noise_variance {
            cfg.search.noise_variance = v;
            if let Some(h) = cfg.search.hyperparameters.as_mut() {
                h.noise_variance = v;
            }
        }
        if self.optimize_noise {
            cfg.search.fit.optimize_noise = true;
        }
        if self.no_optimize {
            cfg.search.fit.optimize = false;
        }
        if let Some(v) = self.max_iter {
            cfg.search.max_iter = v;
        }
        if let Some(v) = self.drop_factor {
            cfg.search.drop_factor = v;
        }
        if let Some(v) = self.min_gap {
            cfg.search.min_gap = v;
        }
        if let Some(Trigger(v)) = self.exploration_after {
            cfg.search.exploration_after = v;
        }
        if let Some(v) = self.delta_lambda_tol {
            cfg.search.delta_lambda_tol = Some(v);
        }
        if let Some(v) = self.oracle_start {
            cfg.oracle_start = Some(v);
        }
        match (self.map_center, self.map_radius) {
            (Some(c), Some(r)) => {
                cfg.parameter_map = Some(ParameterMap::new((c[0], c[1]), r).map_err(Failure::config)?);
            }
            (None, None) => {}
            _ => return Err(Failure::config_msg("--map-center and --map-radius must be given together")),
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = Some(v);
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config_msg(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config_msg(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn build_family(&self) -> Result<MatrixFamily, Failure> {
        match self.family.name {
            FamilyName::Kato2 => Ok(MatrixFamily::kato2()),
            FamilyName::Random5 => Ok(MatrixFamily::random5(self.family.seed)),
            FamilyName::File => {
                let path = self.family.file.as_ref().ok_or_else(|| Failure::config_msg("family 'file' needs family.file"))?;
                MatrixFamily::load(path).map_err(Failure::config)
            }
        }
    }

    pub fn build_orbit(&self) -> Result<Orbit, Failure> {
        let center = Complex64::new(self.orbit.center[0], self.orbit.center[1]);
        let orbit = match self.orbit.semi_axes {
            Some([a, b]) => Orbit::ellipse(center, a, b, self.orbit.n_points),
            None => Orbit::circle(center, self.orbit.radius, self.orbit.n_points),
        };
        orbit.map_err(Failure::config)
    }

    /// Search settings with the run seed and orbit geometry folded in.
    pub fn search_config(&self) -> SearchConfig {
        let mut search = self.search.clone();
        search.fit.seed = self.seed;
        search.orbit_center.get_or_insert(Complex64::new(self.orbit.center[0], self.orbit.center[1]));
        search.orbit_radius.get_or_insert(self.orbit.semi_axes.map_or(self.orbit.radius, |[a, b]| a.max(b)));
        search
    }
}
