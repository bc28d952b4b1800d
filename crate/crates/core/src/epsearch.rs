//! Surrogate-driven exceptional point search.
//!
//! A GP surrogate of `p = (λ₁ - λ₂)²` and `s = (λ₁ + λ₂)/2` over the
//! parameter plane is refit every iteration; the root of the predicted `p`
//! is diagonalized exactly, and the eigenvalue pair closest to the surrogate
//! (by pair discrepancy) becomes the next training point.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::{fit, FitOptions, GprModel, Hyperparameters, Point, Prediction};
use crate::grouping::{mean_delta_lambda, TrainingPair};
use crate::linalg::eigendecompose;
use crate::models::{MatrixFamily, ParameterMap};

/// Target order inside the surrogate.
pub const TARGETS: [&str; 4] = ["re_p", "im_p", "re_s", "im_s"];

/// JSON has no infinity; an infinite ratio is written as `null`.
mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn to_point(z: Complex64) -> Point {
    [z.re, z.im]
}

fn to_complex(x: Point) -> Complex64 {
    Complex64::new(x[0], x[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RootSearchOptions {
    pub fd_step: f64,
    /// Success when `‖mean_p‖₂ ≤ tolerance·scale(p)`, or when the residual is
    /// within the rounding error of the surrogate mean.
    pub tolerance: f64,
    pub max_newton: usize,
    pub max_pattern_evals: usize,
}

impl Default for RootSearchOptions {
    fn default() -> Self {
        RootSearchOptions { fd_step: 1e-6, tolerance: 1e-10, max_newton: 100, max_pattern_evals: 4000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootMethod {
    Newton,
    PatternSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootResult {
    pub point: Point,
    pub residual: f64,
    pub converged: bool,
    pub method: RootMethod,
    pub start_index: usize,
}

fn p_residual(model: &GprModel, x: &Point) -> [f64; 2] {
    [model.predict_mean(0, x), model.predict_mean(1, x)]
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Output scale of the `p` targets, used to make tolerances relative.
pub fn p_scale(model: &GprModel) -> f64 {
    model.target(0).standardization().1.max(model.target(1).standardization().1)
}

fn input_extent(model: &GprModel) -> f64 {
    let xs = model.inputs();
    let mut extent: f64 = 0.0;
    for a in xs {
        for b in xs {
            extent = extent.max((a[0] - b[0]).hypot(a[1] - b[1]));
        }
    }
    if extent > 0.0 {
        extent
    } else {
        1.0
    }
}

fn newton(model: &GprModel, start: Point, opts: &RootSearchOptions, tol: f64, max_step: f64) -> (Point, f64) {
    let mut x = start;
    let mut f = p_residual(model, &x);
    let mut r = norm2(f);
    let h = opts.fd_step;
    for _ in 0..opts.max_newton {
        if r <= tol {
            break;
        }
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fp = p_residual(model, &xp);
            let fm = p_residual(model, &xm);
            jac[0][k] = (fp[0] - fm[0]) / (2.0 * h);
            jac[1][k] = (fp[1] - fm[1]) / (2.0 * h);
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let mut dx = [-(jac[1][1] * f[0] - jac[0][1] * f[1]) / det, -(-jac[1][0] * f[0] + jac[0][0] * f[1]) / det];
        let len = norm2(dx);
        if len > max_step {
            dx = [dx[0] * max_step / len, dx[1] * max_step / len];
        }
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-10 {
            let trial = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            let ft = p_residual(model, &trial);
            let rt = norm2(ft);
            if rt < r {
                x = trial;
                f = ft;
                r = rt;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, r)
}

fn pattern_search(model: &GprModel, start: Point, step0: f64, max_evals: usize) -> (Point, f64) {
    let mut x = start;
    let mut r = norm2(p_residual(model, &x));
    let mut step = step0;
    let mut evals = 1;
    const DIRS: [[f64; 2]; 4] = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
    while evals < max_evals && step > 1e-15 * (1.0 + norm2(x)) {
        let mut moved = false;
        for d in DIRS {
            let trial = [x[0] + step * d[0], x[1] + step * d[1]];
            let rt = norm2(p_residual(model, &trial));
            evals += 1;
            if rt < r {
                x = trial;
                r = rt;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (x, r)
}

/// Finds a zero of the surrogate mean of `p` (targets 0 and 1 of `model`).
///
/// Damped Newton runs from every start in order; pattern search on
/// `‖mean_p‖²` from the best Newton endpoint is the fallback.
pub fn root_search(model: &GprModel, starts: &[Point], opts: &RootSearchOptions) -> Result<RootResult> {
    if model.n_targets() < 2 {
        return Err(Error::InvalidArgument("root search needs the two p targets".into()));
    }
    if starts.is_empty() || starts.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("root search start"));
    }
    let tol = opts.tolerance * p_scale(model);
    let extent = input_extent(model);
    // the surrogate mean cannot be resolved below its own rounding error
    let accept = |x: &Point, r: f64| {
        let floor = model.predict_mean_with_bound(0, x).1.hypot(model.predict_mean_with_bound(1, x).1);
        r <= tol.max(floor)
    };
    let mut best = RootResult { point: starts[0], residual: f64::INFINITY, converged: false, method: RootMethod::Newton, start_index: 0 };
    for (i, &s) in starts.iter().enumerate() {
        let (x, r) = newton(model, s, opts, tol, extent);
        if r < best.residual {
            best = RootResult { point: x, residual: r, converged: accept(&x, r), method: RootMethod::Newton, start_index: i };
        }
        if best.converged {
            return Ok(best);
        }
    }
    let (x, r) = pattern_search(model, best.point, 0.25 * extent, opts.max_pattern_evals);
    if r < best.residual {
        best = RootResult {
            point: x,
            residual: r,
            converged: accept(&x, r),
            method: RootMethod::PatternSearch,
            start_index: best.start_index,
        };
    }
    if best.converged {
        Ok(best)
    } else {
        Err(Error::NoRootFound { re: best.point[0], im: best.point[1], residual: best.residual })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDiscrepancy {
    pub c: f64,
    pub pair: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRanking {
    /// Ascending in `c`.
    pub entries: Vec<PairDiscrepancy>,
    /// `c₂ / c₁`; infinite when `c₁ = 0` or only one pair exists.
    #[serde(with = "infinite_as_null")]
    pub gap_ratio: f64,
}

impl DiscrepancyRanking {
    pub fn best(&self) -> PairDiscrepancy {
        self.entries[0]
    }
}

/// Scores every unordered eigenvalue pair against the surrogate predictions
/// `[Re p, Im p, Re s, Im s]`.
pub fn pair_discrepancy_all(spectrum: &[Complex64], predictions: &[Prediction; 4]) -> Result<DiscrepancyRanking> {
    if spectrum.len() < 2 {
        return Err(Error::InvalidArgument("pair discrepancy needs at least two eigenvalues".into()));
    }
    for (name, p) in TARGETS.iter().zip(predictions) {
        if !(p.variance > 0.0) {
            return Err(Error::ZeroVariance(name));
        }
    }
    let mut entries = Vec::with_capacity(spectrum.len() * (spectrum.len() - 1) / 2);
    for i in 0..spectrum.len() {
        for j in i + 1..spectrum.len() {
            let (a, b) = (spectrum[i], spectrum[j]);
            let p = (a - b) * (a - b);
            let s = (a + b) * 0.5;
            let c = [p.re, p.im, s.re, s.im].iter().zip(predictions).map(|(v, m)| (v - m.mean).powi(2) / (2.0 * m.variance)).sum();
            entries.push(PairDiscrepancy { c, pair: (i, j) });
        }
    }
    entries.sort_by(|x, y| x.c.total_cmp(&y.c));
    let gap_ratio = match entries.get(1) {
        Some(second) if entries[0].c > 0.0 => second.c / entries[0].c,
        _ => f64::INFINITY,
    };
    Ok(DiscrepancyRanking { entries, gap_ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    ConvergedKernelDrop,
    ConvergedDeltaLambda,
    ConvergedMaxIter,
    Failed,
}

impl Status {
    pub fn is_converged(self) -> bool {
        matches!(self, Status::ConvergedKernelDrop | Status::ConvergedDeltaLambda)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub max_iter: usize,
    pub drop_factor: f64,
    pub min_gap: f64,
    /// Add the extrapolated point after this iteration; `None` disables it.
    pub exploration_after: Option<usize>,
    pub delta_lambda_tol: Option<f64>,
    /// Starting hyperparameters; derived from the training inputs if absent.
    pub hyperparameters: Option<Hyperparameters>,
    pub noise_variance: f64,
    pub fit: FitOptions,
    pub root: RootSearchOptions,
    /// Orbit geometry, used only to warn about roots far outside the loop.
    pub orbit_center: Option<Complex64>,
    pub orbit_radius: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_iter: 25,
            drop_factor: 1e3,
            min_gap: 10.0,
            exploration_after: Some(2),
            delta_lambda_tol: None,
            hyperparameters: None,
            noise_variance: crate::gpr::DEFAULT_NOISE_VARIANCE,
            fit: FitOptions::default(),
            root: RootSearchOptions::default(),
            orbit_center: None,
            orbit_radius: None,
        }
    }
}

/// Per-iteration details beyond the three convergence series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub root_residual: f64,
    pub root_converged: bool,
    pub selected_pair: (usize, usize),
    pub c_best: f64,
    #[serde(with = "infinite_as_null")]
    pub gap_ratio: f64,
    pub ambiguous: bool,
    pub exploration: Option<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpSearchState {
    pub training: Vec<TrainingPair>,
    pub kappa_history: Vec<Complex64>,
    pub kernel_eig_history: Vec<f64>,
    pub delta_lambda_history: Vec<f64>,
    pub status: Status,
    pub records: Vec<IterationRecord>,
    pub diagonalizations: usize,
}

impl EpSearchState {
    /// Seeds the histories from the initial training set.
    pub fn new(initial: Vec<TrainingPair>) -> Self {
        let anchor = initial.iter().min_by(|a, b| a.p().norm().total_cmp(&b.p().norm())).map_or(Complex64::default(), |t| t.kappa());
        let dl0 = mean_delta_lambda(&initial);
        EpSearchState {
            training: initial,
            kappa_history: vec![anchor],
            kernel_eig_history: vec![f64::NAN],
            delta_lambda_history: vec![dl0],
            status: Status::Running,
            records: Vec::new(),
            diagonalizations: 0,
        }
    }

    pub fn iterations(&self) -> usize {
        self.kappa_history.len() - 1
    }

    /// `iteration, re_kappa, im_kappa, min_kernel_eig, delta_lambda` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,re_kappa,im_kappa,min_kernel_eig,delta_lambda\n");
        for i in 0..self.kappa_history.len() {
            let k = self.kappa_history[i];
            let _ =
                writeln!(out, "{i},{:.16e},{:.16e},{:.16e},{:.16e}", k.re, k.im, self.kernel_eig_history[i], self.delta_lambda_history[i]);
        }
        out
    }

    /// Iterations after the first at which `Δλ` increased.
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        (2..self.delta_lambda_history.len()).filter(|&i| self.delta_lambda_history[i] > self.delta_lambda_history[i - 1]).collect()
    }
}

/// Convergence status from the recorded histories.
pub fn check_convergence(state: &EpSearchState, cfg: &SearchConfig) -> Status {
    let n = state.kernel_eig_history.len();
    if n < 2 || state.delta_lambda_history.len() != n {
        return Status::Running;
    }
    let dl = &state.delta_lambda_history;
    let last = dl[n - 1];
    if let Some(tol) = cfg.delta_lambda_tol {
        if last <= tol {
            return Status::ConvergedDeltaLambda;
        }
    }
    let (prev, cur) = (state.kernel_eig_history[n - 2], state.kernel_eig_history[n - 1]);
    let dropped = prev.is_finite() && cur.is_finite() && cur.max(0.0) * cfg.drop_factor <= prev;
    let improving = last < dl[0] && last <= dl[n - 2];
    if dropped && improving {
        Status::ConvergedKernelDrop
    } else {
        Status::Running
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpResult {
    pub kappa_ep: Complex64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub physical: Option<(f64, f64)>,
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    pub delta_lambda: f64,
    pub iterations: usize,
    pub diagonalizations: usize,
    pub status: Status,
    pub diagnostics: EpSearchState,
}

impl EpResult {
    pub fn with_map(mut self, map: &ParameterMap) -> Self {
        self.physical = Some(map.forward(self.kappa_ep));
        self
    }
}

fn training_data(training: &[TrainingPair]) -> (Vec<Point>, Vec<Vec<f64>>) {
    let x = training.iter().map(|t| to_point(t.kappa())).collect();
    let mut ys: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(training.len())).collect();
    for t in training {
        let (p, s) = (t.p(), t.s());
        ys[0].push(p.re);
        ys[1].push(p.im);
        ys[2].push(s.re);
        ys[3].push(s.im);
    }
    (x, ys)
}

fn default_hyperparameters(x: &[Point], noise: f64) -> Hyperparameters {
    let n = x.len() as f64;
    let mean = [x.iter().map(|p| p[0]).sum::<f64>() / n, x.iter().map(|p| p[1]).sum::<f64>() / n];
    let rms = (x.iter().map(|p| (p[0] - mean[0]).powi(2) + (p[1] - mean[1]).powi(2)).sum::<f64>() / n).sqrt();
    let l = if rms > 0.0 { rms } else { 1.0 };
    Hyperparameters { length_scales: [l, l], noise_variance: noise, ..Default::default() }
}

/// Variances floored at `1e-16·scale²` per target.
fn floored_predictions(model: &GprModel, x: &Point) -> [Prediction; 4] {
    let mut out = [Prediction { mean: 0.0, variance: 0.0 }; 4];
    for (t, slot) in out.iter_mut().enumerate() {
        let mut p = model.predict_target(t, x);
        let scale = model.target(t).standardization().1;
        p.variance = p.variance.max(1e-16 * scale * scale);
        *slot = p;
    }
    out
}

struct Selection {
    pair: TrainingPair,
    ranking: DiscrepancyRanking,
}

fn diagonalize_and_select(family: &MatrixFamily, model: &GprModel, kappa: Complex64, count: &mut usize) -> Result<Selection> {
    let m = family.evaluate(kappa)?;
    let spectrum = eigendecompose(&m, false)?.eigenvalues;
    *count += 1;
    let ranking = pair_discrepancy_all(&spectrum, &floored_predictions(model, &to_point(kappa)))?;
    let (i, j) = ranking.best().pair;
    Ok(Selection { pair: TrainingPair::new(kappa, spectrum[i], spectrum[j]), ranking })
}

fn fit_surrogate(training: &[TrainingPair], h0: &Hyperparameters, cfg: &SearchConfig, iteration: usize) -> Result<GprModel> {
    let (x, ys) = training_data(training);
    let mut opts = cfg.fit.clone();
    opts.seed = cfg.fit.seed.wrapping_add(16 * iteration as u64);
    fit(&x, &ys, h0, &opts)
}

/// Winding number of the closed polygon `loop_points` around `z`.
fn winding_number(loop_points: &[Point], z: Point) -> i64 {
    let mut total = 0.0;
    for (i, a) in loop_points.iter().enumerate() {
        let b = loop_points[(i + 1) % loop_points.len()];
        let u = Complex64::new(a[0] - z[0], a[1] - z[1]);
        let v = Complex64::new(b[0] - z[0], b[1] - z[1]);
        total += (v / u).arg();
    }
    (total / std::f64::consts::TAU).round() as i64
}

/// Runs the surrogate loop from an initial training set, given in loop
/// order. An estimate outside that loop ends with [`Status::Failed`].
pub fn iterate(family: &MatrixFamily, initial: Vec<TrainingPair>, cfg: &SearchConfig) -> Result<EpResult> {
    if initial.len() < crate::models::MIN_ORBIT_POINTS {
        return Err(Error::InvalidArgument(format!(
            "at least {} initial training pairs are required, got {}",
            crate::models::MIN_ORBIT_POINTS,
            initial.len()
        )));
    }
    let mut state = EpSearchState::new(initial);
    let (x0, _) = training_data(&state.training);
    let mut hyper = cfg.hyperparameters.unwrap_or_else(|| default_hyperparameters(&x0, cfg.noise_variance));
    let mut last_pair = None;
    let centroid = {
        let n = x0.len() as f64;
        [x0.iter().map(|p| p[0]).sum::<f64>() / n, x0.iter().map(|p| p[1]).sum::<f64>() / n]
    };

    for t in 1..=cfg.max_iter {
        let model = fit_surrogate(&state.training, &hyper, cfg, t)?;
        hyper = *model.target(0).hyperparameters();
        if t == 1 {
            state.kernel_eig_history[0] = model.min_covariance_eigenvalue_with(0, &[])?;
        }

        let anchor = state.training.iter().min_by(|a, b| a.p().norm().total_cmp(&b.p().norm())).expect("non-empty training set").kappa();
        let previous = *state.kappa_history.last().expect("seeded history");
        let starts = [to_point(anchor), to_point(previous), centroid];
        let root = match root_search(&model, &starts, &cfg.root) {
            Ok(r) => r,
            Err(Error::NoRootFound { re, im, residual }) => {
                log::warn!("iteration {t}: surrogate root not resolved (residual {residual:e}); using best point");
                RootResult { point: [re, im], residual, converged: false, method: RootMethod::PatternSearch, start_index: 0 }
            }
            Err(e) => return Err(e),
        };
        let kappa = to_complex(root.point);
        if let (Some(c), Some(r)) = (cfg.orbit_center, cfg.orbit_radius) {
            if (kappa - c).norm() > 2.0 * r {
                log::warn!("iteration {t}: root {kappa} lies outside twice the orbit radius");
            }
        }

        let sel = diagonalize_and_select(family, &model, kappa, &mut state.diagonalizations)?;
        let ambiguous = sel.ranking.gap_ratio < cfg.min_gap;
        if ambiguous {
            log::warn!("iteration {t}: ambiguous pair selection, gap ratio {:.3}", sel.ranking.gap_ratio);
        }
        let kernel_eig = model.min_covariance_eigenvalue_with(0, &[root.point])?;
        state.training.push(sel.pair);
        state.kappa_history.push(kappa);
        state.kernel_eig_history.push(kernel_eig);
        state.delta_lambda_history.push(sel.pair.delta_lambda());

        let mut exploration = None;
        if cfg.exploration_after == Some(t) {
            let probe = kappa + (kappa - previous);
            let extra = diagonalize_and_select(family, &model, probe, &mut state.diagonalizations)?;
            state.training.push(extra.pair);
            exploration = Some(probe);
        }
        state.records.push(IterationRecord {
            iteration: t,
            root_residual: root.residual,
            root_converged: root.converged,
            selected_pair: sel.ranking.best().pair,
            c_best: sel.ranking.best().c,
            gap_ratio: sel.ranking.gap_ratio,
            ambiguous,
            exploration,
        });
        last_pair = Some(sel.pair);

        state.status = check_convergence(&state, cfg);
        if state.status.is_converged() {
            break;
        }
    }
    let kappa_ep = last_pair.expect("max_iter >= 1").kappa();
    if state.status != Status::Running && winding_number(&x0, to_point(kappa_ep)) == 0 {
        log::warn!("estimate {kappa_ep} is not enclosed by the initial training loop");
        state.status = Status::Failed;
    }
    if state.status == Status::Running {
        state.status = Status::ConvergedMaxIter;
    }
    if state.status.is_converged() {
        for i in state.monotonicity_violations() {
            log::warn!("delta lambda increased at iteration {i}");
        }
    }
    let pair = last_pair.expect("max_iter >= 1");
    let (lambda1, lambda2) = pair.lambdas();
    Ok(EpResult {
        kappa_ep: pair.kappa(),
        physical: None,
        lambda1,
        lambda2,
        delta_lambda: pair.delta_lambda(),
        iterations: state.iterations(),
        diagonalizations: state.diagonalizations,
        status: state.status,
        diagnostics: state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    pub fd_step: f64,
    /// Target residual `|p|`; floored at the attainable precision
    /// `64·ε·‖M‖_F²`.
    pub p_tol: f64,
    pub max_iter: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { fd_step: 1e-7, p_tol: 1e-20, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub kappa_ep: Complex64,
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    pub residual: f64,
    pub tolerance: f64,
    pub iterations: usize,
}

fn min_p_pair(family: &MatrixFamily, kappa: Complex64) -> Result<(Complex64, Complex64, Complex64, f64)> {
    let m = family.evaluate(kappa)?;
    let norm = m.frobenius_norm();
    let ev = eigendecompose(&m, false)?.eigenvalues;
    let mut best = (Complex64::default(), ev[0], ev[1], f64::INFINITY);
    for i in 0..ev.len() {
        for j in i + 1..ev.len() {
            let p = (ev[i] - ev[j]) * (ev[i] - ev[j]);
            if p.norm() < best.3 {
                best = (p, ev[i], ev[j], p.norm());
            }
        }
    }
    Ok((best.0, best.1, best.2, norm))
}

/// Newton search on the exact `p` of the closest eigenvalue pair.
pub fn brute_force_ep(family: &MatrixFamily, x0: Complex64, opts: &OracleOptions) -> Result<OracleResult> {
    if family.dim() > 16 {
        return Err(Error::UnsupportedDimension(family.dim()));
    }
    if !(x0.re.is_finite() && x0.im.is_finite()) {
        return Err(Error::NonFinite("oracle start"));
    }
    let h = opts.fd_step;
    let mut kappa = x0;
    let (mut p, mut l1, mut l2, mut norm) = min_p_pair(family, kappa)?;
    let tol = |norm: f64| opts.p_tol.max(64.0 * f64::EPSILON * norm * norm);
    let mut iterations = 0;
    while iterations < opts.max_iter && p.norm() > tol(norm) {
        iterations += 1;
        let mut jac = [[0.0; 2]; 2];
        for (k, dir) in [Complex64::new(h, 0.0), Complex64::new(0.0, h)].into_iter().enumerate() {
            let fp = min_p_pair(family, kappa + dir)?.0;
            let fm = min_p_pair(family, kappa - dir)?.0;
            let d = (fp - fm) / (2.0 * h);
            jac[0][k] = d.re;
            jac[1][k] = d.im;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let step = Complex64::new(-(jac[1][1] * p.re - jac[0][1] * p.im) / det, -(-jac[1][0] * p.re + jac[0][0] * p.im) / det);
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-12 {
            let trial = kappa + step * lambda;
            let (tp, t1, t2, tn) = min_p_pair(family, trial)?;
            if tp.norm() < p.norm() {
                (kappa, p, l1, l2, norm) = (trial, tp, t1, t2, tn);
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let tolerance = tol(norm);
    if p.norm() > tolerance {
        return Err(Error::NoRootFound { re: kappa.re, im: kappa.im, residual: p.norm() });
    }
    Ok(OracleResult { kappa_ep: kappa, lambda1: l1, lambda2: l2, residual: p.norm(), tolerance, iterations })
}
