//! Parameter-dependent matrix families, orbits in the complex parameter
//! plane, and the affine map between orbit coordinates and physical
//! control parameters.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigendecompose, ComplexMatrix, Pair, MAX_DIM};

/// Smallest number of orbit points accepted anywhere in the pipeline.
pub const MIN_ORBIT_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FamilyKind {
    Kato2,
    Random5 { seed: u64 },
    UserDefined,
}

/// `κ ↦ base + κ·Σ E_ij` over the coupling positions.
#[derive(Debug, Clone)]
pub struct MatrixFamily {
    kind: FamilyKind,
    base: ComplexMatrix,
    coupling: Vec<(usize, usize)>,
    symmetric: bool,
}

/// On-disk form of a matrix family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyFile {
    pub dim: usize,
    pub symmetric: bool,
    /// Row-major `[re, im]` entries.
    pub base: Vec<Pair>,
    /// Zero-based positions receiving `+κ`.
    pub coupling: Vec<[usize; 2]>,
}

impl MatrixFamily {
    /// The two-level model `[[1, κ], [κ, -1]]`.
    pub fn kato2() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let base = ComplexMatrix::from_row_slice(2, &[one, Complex64::default(), Complex64::default(), -one]).expect("2x2");
        MatrixFamily { kind: FamilyKind::Kato2, base, coupling: vec![(0, 1), (1, 0)], symmetric: true }
    }

    /// Five-level complex-symmetric model: the `kato2` block in the upper
    /// left corner, all entries in columns 3..5 (and their transposes) drawn
    /// uniformly from `[-1, 1] + i[-1, 1]` with a SplitMix64 stream.
    pub fn random5(seed: u64) -> Self {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let mut base = ComplexMatrix::zeros(5);
        base.set(0, 0, Complex64::new(1.0, 0.0));
        base.set(1, 1, Complex64::new(-1.0, 0.0));
        for i in 0..5 {
            for j in i.max(2)..5 {
                let re = rng.random_range(-1.0..=1.0);
                let im = rng.random_range(-1.0..=1.0);
                let z = Complex64::new(re, im);
                base.set(i, j, z);
                base.set(j, i, z);
            }
        }
        MatrixFamily { kind: FamilyKind::Random5 { seed }, base, coupling: vec![(0, 1), (1, 0)], symmetric: true }
    }

    /// Builds a user-defined family, validating shape and symmetry.
    pub fn from_file_repr(file: &FamilyFile) -> Result<Self> {
        let ctx = "family file";
        if !(2..=MAX_DIM).contains(&file.dim) {
            return Err(Error::parse(ctx, format!("field `dim`: {} outside 2..={MAX_DIM}", file.dim)));
        }
        if file.base.len() != file.dim * file.dim {
            return Err(Error::parse(
                ctx,
                format!("field `base`: expected {} entries for dim {}, got {}", file.dim * file.dim, file.dim, file.base.len()),
            ));
        }
        let entries: Vec<Complex64> = file.base.iter().map(|&p| p.into()).collect();
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::parse(ctx, "field `base`: non-finite entry"));
        }
        let base = ComplexMatrix::from_row_slice(file.dim, &entries)?;
        let mut coupling = Vec::with_capacity(file.coupling.len());
        for (k, &[i, j]) in file.coupling.iter().enumerate() {
            if i >= file.dim || j >= file.dim {
                return Err(Error::parse(ctx, format!("field `coupling[{k}]`: position ({i}, {j}) out of range")));
            }
            coupling.push((i, j));
        }
        let family = MatrixFamily { kind: FamilyKind::UserDefined, base, coupling, symmetric: file.symmetric };
        if file.symmetric {
            // a generic κ exposes both base and coupling asymmetries
            let probe = family.evaluate(Complex64::new(0.734, -0.291))?;
            if let Some((row, col, delta)) = probe.symmetry_violation() {
                return Err(Error::SymmetryViolation { row, col, delta });
            }
        }
        Ok(family)
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let file: FamilyFile = serde_json::from_str(text).map_err(|e| Error::parse(context, e))?;
        Self::from_file_repr(&file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_file_repr(&self) -> FamilyFile {
        FamilyFile {
            dim: self.dim(),
            symmetric: self.symmetric,
            base: self.base.to_row_major().into_iter().map(Pair::from).collect(),
            coupling: self.coupling.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn evaluate(&self, kappa: Complex64) -> Result<ComplexMatrix> {
        if !kappa.re.is_finite() || !kappa.im.is_finite() {
            return Err(Error::NonFinite("kappa"));
        }
        let mut m = self.base.clone();
        for &(i, j) in &self.coupling {
            m.set(i, j, m.get(i, j) + kappa);
        }
        Ok(m)
    }
}

/// Closed elliptic path `κ(φ) = κ₀ + ρ_re cos φ + i ρ_im sin φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub center: Pair,
    pub semi_axes: (f64, f64),
    pub n_points: usize,
}

impl Orbit {
    pub fn circle(center: Complex64, radius: f64, n_points: usize) -> Result<Self> {
        Self::ellipse(center, radius, radius, n_points)
    }

    pub fn ellipse(center: Complex64, radius_re: f64, radius_im: f64, n_points: usize) -> Result<Self> {
        let orbit = Orbit { center: center.into(), semi_axes: (radius_re, radius_im), n_points };
        orbit.validate()?;
        Ok(orbit)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < MIN_ORBIT_POINTS {
            return Err(Error::InvalidOrbit(format!("n_points = {} is below the minimum of {MIN_ORBIT_POINTS}", self.n_points)));
        }
        let (a, b) = self.semi_axes;
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidOrbit(format!("semi-axes must be positive and finite, got ({a}, {b})")));
        }
        if !self.center.0.is_finite() || !self.center.1.is_finite() {
            return Err(Error::InvalidOrbit("center must be finite".into()));
        }
        Ok(())
    }

    pub fn center(&self) -> Complex64 {
        self.center.into()
    }

    /// The larger semi-axis.
    pub fn radius(&self) -> f64 {
        self.semi_axes.0.max(self.semi_axes.1)
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| 2.0 * PI * i as f64 / self.n_points as f64).collect()
    }

    pub fn point(&self, phi: f64) -> Complex64 {
        let (a, b) = self.semi_axes;
        self.center() + Complex64::new(a * phi.cos(), b * phi.sin())
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.angles().into_iter().map(|phi| self.point(phi)).collect()
    }
}

/// Affine map between orbit coordinates `κ` and two physical parameters,
/// `(c₁(1 + ϱ Re κ), c₂(1 + ϱ Im κ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterMap {
    pub center: (f64, f64),
    pub relative_radius: f64,
}

impl ParameterMap {
    pub fn new(center: (f64, f64), relative_radius: f64) -> Result<Self> {
        if !(relative_radius > 0.0) || !relative_radius.is_finite() {
            return Err(Error::InvalidArgument(format!("relative radius must be positive, got {relative_radius}")));
        }
        if center.0 == 0.0 || center.1 == 0.0 || !center.0.is_finite() || !center.1.is_finite() {
            return Err(Error::InvalidArgument("parameter-map center components must be finite and nonzero".into()));
        }
        Ok(ParameterMap { center, relative_radius })
    }

    /// Recovers the center from absolute half-widths `Δ₁ = ϱ c₁`, `Δ₂ = ϱ c₂`.
    pub fn from_deltas(delta: (f64, f64), relative_radius: f64) -> Result<Self> {
        Self::new((delta.0 / relative_radius, delta.1 / relative_radius), relative_radius)
    }

    pub fn forward(&self, kappa: Complex64) -> (f64, f64) {
        let r = self.relative_radius;
        (self.center.0 * (1.0 + r * kappa.re), self.center.1 * (1.0 + r * kappa.im))
    }

    pub fn backward(&self, physical: (f64, f64)) -> Complex64 {
        let r = self.relative_radius;
        Complex64::new((physical.0 / self.center.0 - 1.0) / r, (physical.1 / self.center.1 - 1.0) / r)
    }

    pub fn deltas(&self) -> (f64, f64) {
        (self.center.0 * self.relative_radius, self.center.1 * self.relative_radius)
    }
}

/// Spectra along a closed path, in angle order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSpectrumSet {
    #[serde(with = "complex_vec")]
    pub kappa: Vec<Complex64>,
    #[serde(with = "complex_nested")]
    pub spectra: Vec<Vec<Complex64>>,
    /// `features[angle][eigenvalue]` real feature vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<Vec<f64>>>>,
}

impl OrbitSpectrumSet {
    pub fn n_points(&self) -> usize {
        self.spectra.len()
    }

    pub fn dim(&self) -> usize {
        self.spectra.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa.len() != self.spectra.len() {
            return Err(Error::DimensionMismatch(format!("{} parameter points but {} spectra", self.kappa.len(), self.spectra.len())));
        }
        let dim = self.dim();
        if let Some(i) = self.spectra.iter().position(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch(format!("spectrum {i} has length {} (expected {dim})", self.spectra[i].len())));
        }
        if let Some(features) = &self.features {
            if features.len() != self.spectra.len() {
                return Err(Error::DimensionMismatch("features must have one entry per angle".into()));
            }
            let width = features.first().and_then(|f| f.first()).map_or(0, Vec::len);
            for (i, per_angle) in features.iter().enumerate() {
                if per_angle.len() != dim || per_angle.iter().any(|v| v.len() != width) {
                    return Err(Error::DimensionMismatch(format!("feature vectors at angle {i} have inconsistent shape")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let set: OrbitSpectrumSet = serde_json::from_str(text).map_err(|e| Error::parse(context, e))?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, &path.display().to_string())
    }
}

/// Diagonalizes the family at every orbit point.
///
type AngleSpectrum = (Vec<Complex64>, Option<Vec<Vec<f64>>>);

/// With `features`, each eigenvalue carries the normalized weights
/// `|v_k|² / |v|²` of its eigenvector on the basis states.
pub fn trace_orbit(family: &MatrixFamily, orbit: &Orbit, features: bool) -> Result<OrbitSpectrumSet> {
    orbit.validate()?;
    let kappa = orbit.points();
    let per_angle: Vec<AngleSpectrum> = kappa
        .par_iter()
        .enumerate()
        .map(|(index, &k)| {
            let at = |source: Error| Error::AtAngle { index, source: Box::new(source) };
            let m = family.evaluate(k).map_err(at)?;
            let d = eigendecompose(&m, features).map_err(at)?;
            let weights = d.eigenvectors.as_ref().map(|v| {
                (0..v.ncols())
                    .map(|j| {
                        let col = v.column(j);
                        let total: f64 = col.iter().map(|z| z.norm_sqr()).sum();
                        col.iter().map(|z| z.norm_sqr() / total).collect()
                    })
                    .collect()
            });
            Ok((d.eigenvalues, weights))
        })
        .collect::<Result<_>>()?;
    let (spectra, feats): (Vec<_>, Vec<_>) = per_angle.into_iter().unzip();
    let features = if features { Some(feats.into_iter().map(Option::unwrap).collect()) } else { None };
    Ok(OrbitSpectrumSet { kappa, spectra, features })
}

pub(crate) mod complex_vec {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

pub(crate) mod complex_nested {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<Complex64>], s: S) -> Result<S::Ok, S::Error> {
        let nested: Vec<Vec<[f64; 2]>> = v.iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect();
        nested.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Complex64>>, D::Error> {
        let nested: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        Ok(nested.into_iter().map(|row| row.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()).collect())
    }
}
