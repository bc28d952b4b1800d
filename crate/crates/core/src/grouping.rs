//! Stepwise grouping of eigenvalue spectra into continuous paths.
//!
//! Paths are seeded at the first orbit point (sorted by real part, then
//! imaginary part) and continued point by point: every path proposes the
//! closest unclaimed eigenvalue of the next spectrum, a contested value goes
//! to the closest proposer, and the losers pick again among what is left.
//! One extra step from the last point back to the first closes the loop;
//! paths whose endpoints swap form exchanging pairs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Pair;
use crate::models::{OrbitSpectrumSet, MIN_ORBIT_POINTS};

const TIE_TOLERANCE: f64 = 1e-14;

/// `|λ_m - λ_n|`.
pub fn euclidean_distance(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm()
}

/// `1 - cos∠(a, b)`, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!("cosine distance of lengths {} and {}", a.len(), b.len())));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupingOptions {
    pub metric: Metric,
    /// Use a minimum-cost matching per step instead of greedy continuation.
    #[serde(default)]
    pub optimal_assignment: bool,
    /// Standardize each cosine-feature component over the whole data set.
    #[serde(default)]
    pub standardize_features: bool,
    /// Overrides the default of ten times the median step length.
    #[serde(default)]
    pub closure_tolerance: Option<f64>,
}

impl GroupingOptions {
    pub fn with_metric(metric: Metric) -> Self {
        GroupingOptions { metric, ..Default::default() }
    }
}

/// One eigenvalue traced around the orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPath {
    /// Index into each spectrum, one per angle.
    pub indices: Vec<usize>,
    pub values: Vec<Complex64>,
    /// Value reached after continuing from the last angle back to the first.
    pub end: Complex64,
}

impl EigenPath {
    pub fn start(&self) -> Complex64 {
        self.values[0]
    }
}

#[derive(Debug, Clone)]
pub struct ExchangeReport {
    pub kappa: Vec<Complex64>,
    pub paths: Vec<EigenPath>,
    pub exchanging_pairs: Vec<(usize, usize)>,
    pub closure_tolerance: f64,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    paths: Vec<&'a [usize]>,
    exchanging_pairs: Vec<[usize; 2]>,
    closed_paths: Vec<usize>,
    closure_tolerance: f64,
}

impl ExchangeReport {
    /// Paths that return to their own starting value.
    pub fn closed_paths(&self) -> Vec<usize> {
        (0..self.paths.len()).filter(|&j| euclidean_distance(self.paths[j].end, self.paths[j].start()) <= self.closure_tolerance).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = ReportFile {
            paths: self.paths.iter().map(|p| p.indices.as_slice()).collect(),
            exchanging_pairs: self.exchanging_pairs.iter().map(|&(a, b)| [a, b]).collect(),
            closed_paths: self.closed_paths(),
            closure_tolerance: self.closure_tolerance,
        };
        serde_json::to_value(file).expect("report serializes")
    }
}

/// An eigenvalue pair with its squared difference `p` and centroid `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PairRepr", into = "PairRepr")]
pub struct TrainingPair {
    kappa: Complex64,
    lambda1: Complex64,
    lambda2: Complex64,
    p: Complex64,
    s: Complex64,
}

#[derive(Serialize, Deserialize)]
struct PairRepr {
    kappa: Pair,
    lambda1: Pair,
    lambda2: Pair,
    #[serde(default, skip_deserializing)]
    p: Option<Pair>,
    #[serde(default, skip_deserializing)]
    s: Option<Pair>,
}

impl From<PairRepr> for TrainingPair {
    fn from(r: PairRepr) -> Self {
        TrainingPair::new(r.kappa.into(), r.lambda1.into(), r.lambda2.into())
    }
}

impl From<TrainingPair> for PairRepr {
    fn from(t: TrainingPair) -> Self {
        PairRepr { kappa: t.kappa.into(), lambda1: t.lambda1.into(), lambda2: t.lambda2.into(), p: Some(t.p.into()), s: Some(t.s.into()) }
    }
}

impl TrainingPair {
    pub fn new(kappa: Complex64, lambda1: Complex64, lambda2: Complex64) -> Self {
        let d = lambda1 - lambda2;
        TrainingPair { kappa, lambda1, lambda2, p: d * d, s: (lambda1 + lambda2) * 0.5 }
    }

    pub fn kappa(&self) -> Complex64 {
        self.kappa
    }

    pub fn lambdas(&self) -> (Complex64, Complex64) {
        (self.lambda1, self.lambda2)
    }

    pub fn p(&self) -> Complex64 {
        self.p
    }

    pub fn s(&self) -> Complex64 {
        self.s
    }

    /// `|λ₁ - λ₂|`.
    pub fn delta_lambda(&self) -> f64 {
        (self.lambda1 - self.lambda2).norm()
    }
}

/// Distance between eigenvalue slots under the chosen metric.
struct Distances {
    metric: Metric,
    spectra: Vec<Vec<Complex64>>,
    vectors: Option<Vec<Vec<Vec<f64>>>>,
}

impl Distances {
    fn new(set: &OrbitSpectrumSet, opts: &GroupingOptions) -> Result<Self> {
        let vectors = match opts.metric {
            Metric::Euclidean => None,
            Metric::Cosine => {
                let features = set.features.as_ref().ok_or(Error::MissingFeatures)?;
                let mut psi: Vec<Vec<Vec<f64>>> = set
                    .spectra
                    .iter()
                    .zip(features)
                    .map(|(spec, feats)| {
                        spec.iter()
                            .zip(feats)
                            .map(|(z, f)| {
                                let mut v = Vec::with_capacity(2 + f.len());
                                v.push(z.re);
                                v.push(z.im);
                                v.extend_from_slice(f);
                                v
                            })
                            .collect()
                    })
                    .collect();
                if opts.standardize_features {
                    standardize_components(&mut psi);
                }
                Some(psi)
            }
        };
        Ok(Distances { metric: opts.metric, spectra: set.spectra.clone(), vectors })
    }

    fn between(&self, a: (usize, usize), b: (usize, usize)) -> Result<f64> {
        match self.metric {
            Metric::Euclidean => Ok(euclidean_distance(self.spectra[a.0][a.1], self.spectra[b.0][b.1])),
            Metric::Cosine => {
                let v = self.vectors.as_ref().expect("cosine vectors");
                cosine_distance(&v[a.0][a.1], &v[b.0][b.1])
            }
        }
    }

    fn identical(&self, angle: usize, i: usize, j: usize) -> bool {
        match &self.vectors {
            None => euclidean_distance(self.spectra[angle][i], self.spectra[angle][j]) <= TIE_TOLERANCE,
            Some(v) => v[angle][i].iter().zip(&v[angle][j]).all(|(x, y)| (x - y).abs() <= TIE_TOLERANCE),
        }
    }
}

fn standardize_components(psi: &mut [Vec<Vec<f64>>]) {
    let width = psi.first().and_then(|a| a.first()).map_or(0, Vec::len);
    let count = psi.iter().map(Vec::len).sum::<usize>() as f64;
    for c in 0..width {
        let mean = psi.iter().flatten().map(|v| v[c]).sum::<f64>() / count;
        let var = psi.iter().flatten().map(|v| (v[c] - mean).powi(2)).sum::<f64>() / count;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for v in psi.iter_mut().flatten() {
            v[c] = (v[c] - mean) / sd;
        }
    }
}

/// Sorts spectra into continuous paths and finds exchanging pairs.
pub fn group_paths(set: &OrbitSpectrumSet, opts: &GroupingOptions) -> Result<ExchangeReport> {
    set.validate()?;
    let n = set.n_points();
    if n < MIN_ORBIT_POINTS {
        return Err(Error::InvalidOrbit(format!("{n} orbit points, need at least {MIN_ORBIT_POINTS}")));
    }
    let dim = set.dim();
    let dist = Distances::new(set, opts)?;

    let mut start: Vec<usize> = (0..dim).collect();
    start.sort_by(|&a, &b| {
        let (x, y) = (set.spectra[0][a], set.spectra[0][b]);
        x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im))
    });

    let mut indices: Vec<Vec<usize>> = start.iter().map(|&i| vec![i]).collect();
    let mut wrap = vec![0usize; dim];
    for step in 1..=n {
        let angle = step % n;
        let prev: Vec<usize> = indices.iter().map(|p| *p.last().expect("seeded")).collect();
        let mut cost = vec![vec![0.0; dim]; dim];
        for (j, &pj) in prev.iter().enumerate() {
            for (c, slot) in cost[j].iter_mut().enumerate() {
                *slot = dist.between((step - 1, pj), (angle, c))?;
            }
        }
        let choice = if opts.optimal_assignment {
            min_cost_assignment(&cost)
        } else {
            greedy_assignment(&cost, |a, b| dist.identical(angle, a, b))
                .map_err(|distance| Error::AmbiguousAssignment { angle, distance })?
        };
        // Each path must stay closer to its own predecessor than to any other.
        for (j, &c) in choice.iter().enumerate() {
            for k in 0..dim {
                if k != j && cost[k][c] < cost[j][c] && !dist.identical(step - 1, prev[k], prev[j]) {
                    return Err(Error::TooSparse { angle });
                }
            }
        }
        if step == n {
            wrap = choice;
        } else {
            for (j, c) in choice.into_iter().enumerate() {
                indices[j].push(c);
            }
        }
    }

    let paths: Vec<EigenPath> = indices
        .into_iter()
        .zip(&wrap)
        .map(|(idx, &w)| {
            let values = idx.iter().enumerate().map(|(a, &i)| set.spectra[a][i]).collect();
            EigenPath { indices: idx, values, end: set.spectra[0][w] }
        })
        .collect();

    let closure_tolerance = match opts.closure_tolerance {
        Some(t) => t,
        None => default_closure_tolerance(&paths),
    };

    let mut exchanging_pairs = Vec::new();
    let mut used = vec![false; dim];
    for a in 0..dim {
        if used[a] || euclidean_distance(paths[a].end, paths[a].start()) <= closure_tolerance {
            continue;
        }
        let partner = (a + 1..dim).filter(|&b| !used[b]).find(|&b| {
            euclidean_distance(paths[a].end, paths[b].start()) <= closure_tolerance
                && euclidean_distance(paths[b].end, paths[a].start()) <= closure_tolerance
        });
        if let Some(b) = partner {
            used[a] = true;
            used[b] = true;
            exchanging_pairs.push((a, b));
        }
    }

    Ok(ExchangeReport { kappa: set.kappa.clone(), paths, exchanging_pairs, closure_tolerance })
}

fn default_closure_tolerance(paths: &[EigenPath]) -> f64 {
    let mut steps: Vec<f64> = paths.iter().flat_map(|p| p.values.windows(2).map(|w| euclidean_distance(w[0], w[1]))).collect();
    if steps.is_empty() {
        return 0.0;
    }
    steps.sort_by(f64::total_cmp);
    let m = steps.len();
    let median = if m % 2 == 1 { steps[m / 2] } else { 0.5 * (steps[m / 2 - 1] + steps[m / 2]) };
    10.0 * median
}

/// Greedy continuation with reassignment. `Err(distance)` reports a tie
/// between two distinct candidates.
fn greedy_assignment(cost: &[Vec<f64>], identical: impl Fn(usize, usize) -> bool) -> std::result::Result<Vec<usize>, f64> {
    let n = cost.len();
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut taken = vec![false; n];
    while assigned.iter().any(Option::is_none) {
        let mut proposals: Vec<Option<(usize, f64)>> = vec![None; n];
        for j in (0..n).filter(|&j| assigned[j].is_none()) {
            let mut best: Option<(usize, f64)> = None;
            let mut second: Option<(usize, f64)> = None;
            for c in (0..n).filter(|&c| !taken[c]) {
                let d = cost[j][c];
                match best {
                    Some((_, bd)) if d >= bd => {
                        if second.is_none_or(|(_, sd)| d < sd) {
                            second = Some((c, d));
                        }
                    }
                    _ => {
                        second = best;
                        best = Some((c, d));
                    }
                }
            }
            let (bc, bd) = best.expect("a free candidate exists for every free path");
            if let Some((sc, sd)) = second {
                if sd - bd <= TIE_TOLERANCE && !identical(bc, sc) {
                    return Err(bd);
                }
            }
            proposals[j] = Some((bc, bd));
        }
        for (c, slot) in taken.iter_mut().enumerate() {
            let winner =
                (0..n).filter_map(|j| proposals[j].filter(|&(pc, _)| pc == c).map(|(_, d)| (j, d))).min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, _)) = winner {
                assigned[j] = Some(c);
                *slot = true;
            }
        }
    }
    Ok(assigned.into_iter().map(Option::unwrap).collect())
}

/// Hungarian algorithm; returns the column assigned to each row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    // 1-based potentials as in the classic formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Evenly spaced training pairs from one exchanging pair.
pub fn extract_training_set(report: &ExchangeReport, pair_index: usize, subsample: usize) -> Result<Vec<TrainingPair>> {
    let &(a, b) = report.exchanging_pairs.get(pair_index).ok_or(Error::NotExchanging(pair_index))?;
    let n = report.kappa.len();
    if subsample < MIN_ORBIT_POINTS || subsample > n {
        return Err(Error::InvalidArgument(format!("subsample must lie in {MIN_ORBIT_POINTS}..={n}, got {subsample}")));
    }
    Ok((0..subsample)
        .map(|k| k * n / subsample)
        .map(|i| TrainingPair::new(report.kappa[i], report.paths[a].values[i], report.paths[b].values[i]))
        .collect())
}

/// Orbit average of `|λ₁ - λ₂|` over a training set.
pub fn mean_delta_lambda(pairs: &[TrainingPair]) -> f64 {
    pairs.iter().map(TrainingPair::delta_lambda).sum::<f64>() / pairs.len().max(1) as f64
}
