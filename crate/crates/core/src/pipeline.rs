//! Orbit to EP estimates in one call.

use serde::{Deserialize, Serialize};

use crate::epsearch::{iterate, EpResult, SearchConfig};
use crate::error::{Error, Result};
use crate::grouping::{extract_training_set, group_paths, ExchangeReport, GroupingOptions};
use crate::models::{trace_orbit, MatrixFamily, Orbit, OrbitSpectrumSet};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub grouping: GroupingOptions,
    /// Orbit points used as initial training pairs per exchanging pair.
    pub subsample: Option<usize>,
    pub search: SearchConfig,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { grouping: GroupingOptions::default(), subsample: Some(DEFAULT_SUBSAMPLE), search: SearchConfig::default() }
    }
}

pub const DEFAULT_SUBSAMPLE: usize = 20;

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub spectra: OrbitSpectrumSet,
    pub report: ExchangeReport,
    pub results: Vec<EpResult>,
}

/// Runs one search per exchanging pair of an already traced orbit.
pub fn search_exchanging_pairs(family: &MatrixFamily, report: &ExchangeReport, opts: &PipelineOptions) -> Result<Vec<EpResult>> {
    if report.exchanging_pairs.is_empty() {
        return Err(Error::NotExchanging(0));
    }
    let n = report.kappa.len();
    let subsample = opts.subsample.map_or(n, |s| s.min(n));
    (0..report.exchanging_pairs.len())
        .map(|k| {
            let initial = extract_training_set(report, k, subsample)?;
            iterate(family, initial, &opts.search)
        })
        .collect()
}

/// Traces the orbit, groups its paths and searches every exchanging pair.
pub fn find_eps(family: &MatrixFamily, orbit: &Orbit, opts: &PipelineOptions) -> Result<PipelineOutput> {
    let features = opts.grouping.metric == crate::grouping::Metric::Cosine;
    let spectra = trace_orbit(family, orbit, features)?;
    let report = group_paths(&spectra, &opts.grouping)?;
    let mut search = opts.clone();
    search.search.orbit_center.get_or_insert(orbit.center());
    search.search.orbit_radius.get_or_insert(orbit.radius());
    let results = search_exchanging_pairs(family, &report, &search)?;
    Ok(PipelineOutput { spectra, report, results })
}
