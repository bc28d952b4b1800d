//! Gaussian process regression on two-dimensional inputs.
//!
//! Every output column is an independent scalar GP over the shared inputs,
//! with its own Matérn-5/2 hyperparameters (signal variance, one length
//! scale per input dimension, noise variance). Outputs are standardized to
//! zero mean and unit variance before fitting; predictions are mapped back.
//! Hyperparameters are found by maximizing the log marginal likelihood with a
//! multi-start Nelder–Mead search in log space.

pub mod optim;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_ladder, symmetric_eigenvalues};
use optim::{nelder_mead, SimplexOptions};

pub type Point = [f64; 2];

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Matérn with ν = 5/2.
    #[default]
    Matern52,
    /// Squared exponential, the ν → ∞ limit.
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub signal_variance: f64,
    pub length_scales: [f64; 2],
    pub noise_variance: f64,
    #[serde(default)]
    pub kernel: KernelKind,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            signal_variance: 1.0,
            length_scales: [1.0, 1.0],
            noise_variance: DEFAULT_NOISE_VARIANCE,
            kernel: KernelKind::Matern52,
        }
    }
}

/// Fixed observation noise used unless noise optimization is enabled.
pub const DEFAULT_NOISE_VARIANCE: f64 = 1e-12;

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.signal_variance) || !self.length_scales.iter().all(|&l| ok(l)) {
            return Err(Error::InvalidArgument(format!("hyperparameters must be positive: {self:?}")));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise variance must be nonnegative: {}", self.noise_variance)));
        }
        Ok(())
    }

    /// Scaled distance `|(a - b) / l|`.
    pub fn scaled_distance(&self, a: &Point, b: &Point) -> f64 {
        let d0 = (a[0] - b[0]) / self.length_scales[0];
        let d1 = (a[1] - b[1]) / self.length_scales[1];
        d0.hypot(d1)
    }

    /// Noise-free covariance `k(a, b)`.
    pub fn covariance(&self, a: &Point, b: &Point) -> f64 {
        let r = self.scaled_distance(a, b);
        self.signal_variance * correlation(self.kernel, r)
    }

    fn to_log(self, with_noise: bool) -> Vec<f64> {
        let mut v = vec![self.signal_variance.ln(), self.length_scales[0].ln(), self.length_scales[1].ln()];
        if with_noise {
            v.push(self.noise_variance.max(1e-300).ln());
        }
        v
    }

    fn from_log(theta: &[f64], template: &Hyperparameters) -> Self {
        Hyperparameters {
            signal_variance: theta[0].exp(),
            length_scales: [theta[1].exp(), theta[2].exp()],
            noise_variance: theta.get(3).map_or(template.noise_variance, |v| v.exp()),
            kernel: template.kernel,
        }
    }
}

/// Unit-variance correlation at scaled distance `r`.
pub fn correlation(kernel: KernelKind, r: f64) -> f64 {
    match kernel {
        KernelKind::Matern52 => {
            let s = SQRT5 * r;
            (1.0 + s + s * s / 3.0) * (-s).exp()
        }
        KernelKind::Rbf => (-0.5 * r * r).exp(),
    }
}

/// Kernel entry between two inputs; `same_point` adds the noise variance
/// (the Kronecker delta over training indices).
pub fn matern_kernel(xp: &Point, xq: &Point, h: &Hyperparameters, same_point: bool) -> f64 {
    let k = h.covariance(xp, xq);
    if same_point {
        k + h.noise_variance
    } else {
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// Box constraints on log hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub log_signal_variance: (f64, f64),
    pub log_length_scale: (f64, f64),
    pub log_noise_variance: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { log_signal_variance: (-10.0, 10.0), log_length_scale: (-6.0, 6.0), log_noise_variance: (-30.0, 0.0) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub optimize: bool,
    pub optimize_noise: bool,
    pub standardize: bool,
    pub n_starts: usize,
    pub max_evals: usize,
    /// Half-width of the uniform log-space perturbation for extra starts.
    pub start_spread: f64,
    pub bounds: Bounds,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            optimize: true,
            optimize_noise: false,
            standardize: true,
            n_starts: 5,
            max_evals: 500,
            start_spread: 2.0,
            bounds: Bounds::default(),
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn fixed() -> Self {
        FitOptions { optimize: false, ..Default::default() }
    }
}

/// A fitted scalar GP.
#[derive(Debug, Clone)]
pub struct TargetModel {
    y: Vec<f64>,
    shift: f64,
    scale: f64,
    hyper: Hyperparameters,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
    lml: f64,
    optimizer_stalled: bool,
}

impl TargetModel {
    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    /// `(shift, scale)` with `y = shift + scale·y_std`.
    pub fn standardization(&self) -> (f64, f64) {
        (self.shift, self.scale)
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn optimizer_stalled(&self) -> bool {
        self.optimizer_stalled
    }

    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.chol
    }
}

/// Independent GPs, one per output column, over shared inputs.
#[derive(Debug, Clone)]
pub struct GprModel {
    inputs: Vec<Point>,
    targets: Vec<TargetModel>,
}

fn standardize(y: &[f64], enabled: bool) -> (f64, f64) {
    if !enabled {
        return (0.0, 1.0);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let scale = if sd > 1e-300 { sd } else { 1.0 };
    (mean, scale)
}

fn gram(x: &[Point], h: &Hyperparameters) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = h.signal_variance + h.noise_variance;
        for j in 0..i {
            let v = h.covariance(&x[i], &x[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

struct Factored {
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
    lml: f64,
}

fn factor(x: &[Point], y_std: &DVector<f64>, h: &Hyperparameters) -> Result<Factored> {
    let k = gram(x, h);
    let (chol, jitter) = cholesky_with_ladder(&k)?;
    let z = chol.solve_lower_triangular(y_std).expect("nonzero diagonal");
    let alpha = chol.transpose().solve_upper_triangular(&z).expect("nonzero diagonal");
    let n = x.len() as f64;
    let log_det_half: f64 = chol.diagonal().iter().map(|d| d.ln()).sum();
    let lml = -0.5 * z.norm_squared() - log_det_half - 0.5 * n * (2.0 * PI).ln();
    Ok(Factored { chol, alpha, jitter, lml })
}

fn has_duplicate_rows(x: &[Point]) -> bool {
    (0..x.len()).any(|i| (0..i).any(|j| x[i] == x[j]))
}

fn fit_target(x: &[Point], y: &[f64], h0: &Hyperparameters, opts: &FitOptions, seed: u64) -> Result<TargetModel> {
    let (shift, scale) = standardize(y, opts.standardize);
    let y_std = DVector::from_iterator(y.len(), y.iter().map(|v| (v - shift) / scale));

    let mut hyper = *h0;
    let mut optimizer_stalled = false;
    if opts.optimize {
        let with_noise = opts.optimize_noise;
        let b = opts.bounds;
        let mut bounds = vec![b.log_signal_variance, b.log_length_scale, b.log_length_scale];
        if with_noise {
            bounds.push(b.log_noise_variance);
        }
        let objective = |theta: &[f64]| -> f64 {
            let h = Hyperparameters::from_log(theta, h0);
            match factor(x, &y_std, &h) {
                Ok(f) if f.jitter == 0.0 => -f.lml,
                _ => f64::INFINITY,
            }
        };
        let theta0: Vec<f64> = h0.to_log(with_noise).iter().zip(&bounds).map(|(v, &(lo, hi))| v.clamp(lo, hi)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut starts = vec![theta0.clone()];
        for _ in 1..opts.n_starts.max(1) {
            starts.push(
                theta0
                    .iter()
                    .zip(&bounds)
                    .map(|(v, &(lo, hi))| (v + rng.random_range(-opts.start_spread..=opts.start_spread)).clamp(lo, hi))
                    .collect(),
            );
        }
        let simplex = SimplexOptions { max_evals: opts.max_evals, ..Default::default() };
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut any_converged = false;
        for start in &starts {
            let r = nelder_mead(objective, start, &bounds, simplex);
            any_converged |= r.converged;
            if best.as_ref().is_none_or(|(_, v)| r.value < *v) {
                best = Some((r.x, r.value));
            }
        }
        let (theta, value) = best.expect("at least one start");
        if value.is_finite() {
            hyper = Hyperparameters::from_log(&theta, h0);
        }
        if !any_converged {
            optimizer_stalled = true;
            log::warn!("hyperparameter search hit its evaluation cap on every start; keeping best-so-far");
        }
    }

    if hyper.noise_variance == 0.0 && has_duplicate_rows(x) {
        return Err(Error::NotPositiveDefinite { pivot: 0, value: 0.0, jitter: 0.0 });
    }
    let f = factor(x, &y_std, &hyper)?;
    Ok(TargetModel { y: y.to_vec(), shift, scale, hyper, chol: f.chol, alpha: f.alpha, jitter: f.jitter, lml: f.lml, optimizer_stalled })
}

/// Fits one GP per column of `ys` (each of length `x.len()`).
pub fn fit(x: &[Point], ys: &[Vec<f64>], h0: &Hyperparameters, opts: &FitOptions) -> Result<GprModel> {
    h0.validate()?;
    if x.is_empty() {
        return Err(Error::InvalidArgument("at least one training point is required".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training inputs"));
    }
    for (t, y) in ys.iter().enumerate() {
        if y.len() != x.len() {
            return Err(Error::DimensionMismatch(format!("target {t} has {} values for {} inputs", y.len(), x.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training outputs"));
        }
    }
    let targets =
        ys.par_iter().enumerate().map(|(t, y)| fit_target(x, y, h0, opts, opts.seed.wrapping_add(t as u64))).collect::<Result<Vec<_>>>()?;
    Ok(GprModel { inputs: x.to_vec(), targets })
}

impl GprModel {
    pub fn inputs(&self) -> &[Point] {
        &self.inputs
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn target(&self, t: usize) -> &TargetModel {
        &self.targets[t]
    }

    fn cross(&self, tm: &TargetModel, x: &Point) -> DVector<f64> {
        DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|xi| tm.hyper.covariance(x, xi)))
    }

    /// Posterior mean only.
    pub fn predict_mean(&self, t: usize, x: &Point) -> f64 {
        let tm = &self.targets[t];
        let k = self.cross(tm, x);
        tm.shift + tm.scale * k.dot(&tm.alpha)
    }

    /// Posterior mean and a rounding-error bound `ε·Σ|k_i α_i|` on it.
    pub fn predict_mean_with_bound(&self, t: usize, x: &Point) -> (f64, f64) {
        let tm = &self.targets[t];
        let k = self.cross(tm, x);
        let bound: f64 = k.iter().zip(tm.alpha.iter()).map(|(a, b)| (a * b).abs()).sum();
        (tm.shift + tm.scale * k.dot(&tm.alpha), f64::EPSILON * tm.scale * bound)
    }

    pub fn predict_target(&self, t: usize, x: &Point) -> Prediction {
        let tm = &self.targets[t];
        let k = self.cross(tm, x);
        let mean = tm.shift + tm.scale * k.dot(&tm.alpha);
        let v = tm.chol.solve_lower_triangular(&k).expect("nonzero diagonal");
        let mut var = tm.hyper.signal_variance - v.norm_squared();
        if var < 0.0 {
            if var < -1e-12 * tm.hyper.signal_variance {
                log::warn!("negative predictive variance {var:e} clamped to zero");
            }
            var = 0.0;
        }
        Prediction { mean, variance: var * tm.scale * tm.scale }
    }

    pub fn predict(&self, x: &Point) -> Vec<Prediction> {
        (0..self.targets.len()).map(|t| self.predict_target(t, x)).collect()
    }

    /// Log marginal likelihood of the standardized outputs.
    pub fn log_marginal_likelihood(&self, t: usize) -> f64 {
        self.targets[t].lml
    }

    /// Leave-one-out residuals `y_i - μ_{-i}(x_i)`, in output units.
    pub fn loo_residuals(&self, t: usize) -> Vec<f64> {
        let tm = &self.targets[t];
        let n = self.inputs.len();
        let linv = tm.chol.solve_lower_triangular(&DMatrix::identity(n, n)).expect("nonzero diagonal");
        (0..n)
            .map(|i| {
                let kinv_ii = linv.column(i).norm_squared();
                tm.scale * tm.alpha[i] / kinv_ii
            })
            .collect()
    }

    /// `K(X, X) + σ_n² I` for target `t` (jitter excluded).
    pub fn covariance_matrix(&self, t: usize) -> DMatrix<f64> {
        gram(&self.inputs, &self.targets[t].hyper)
    }

    /// Smallest eigenvalue of the covariance matrix after adding `extra`
    /// inputs, under target `t`'s fitted hyperparameters.
    pub fn min_covariance_eigenvalue_with(&self, t: usize, extra: &[Point]) -> Result<f64> {
        let mut x = self.inputs.clone();
        x.extend_from_slice(extra);
        let ev = symmetric_eigenvalues(&gram(&x, &self.targets[t].hyper))?;
        Ok(ev[0])
    }

    pub fn to_dump(&self) -> ModelDump {
        ModelDump {
            inputs: self.inputs.clone(),
            targets: self
                .targets
                .iter()
                .map(|t| TargetDump { y: t.y.clone(), shift: t.shift, scale: t.scale, hyperparameters: t.hyper })
                .collect(),
        }
    }

    /// Rebuilds a model from a dump; Cholesky factors are recomputed.
    pub fn from_dump(dump: &ModelDump) -> Result<Self> {
        let targets = dump
            .targets
            .iter()
            .map(|td| {
                td.hyperparameters.validate()?;
                if td.y.len() != dump.inputs.len() {
                    return Err(Error::DimensionMismatch("dump target length differs from inputs".into()));
                }
                let y_std = DVector::from_iterator(td.y.len(), td.y.iter().map(|v| (v - td.shift) / td.scale));
                let f = factor(&dump.inputs, &y_std, &td.hyperparameters)?;
                Ok(TargetModel {
                    y: td.y.clone(),
                    shift: td.shift,
                    scale: td.scale,
                    hyper: td.hyperparameters,
                    chol: f.chol,
                    alpha: f.alpha,
                    jitter: f.jitter,
                    lml: f.lml,
                    optimizer_stalled: false,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GprModel { inputs: dump.inputs.clone(), targets })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetDump {
    pub y: Vec<f64>,
    pub shift: f64,
    pub scale: f64,
    pub hyperparameters: Hyperparameters,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDump {
    pub inputs: Vec<Point>,
    pub targets: Vec<TargetDump>,
}
