use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative jitter levels tried in order, in units of the mean diagonal.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Lower Cholesky factor `L` of `a + jitter·I`.
///
/// Only the lower triangle of `a` is read. Fails on the first pivot that is
/// not strictly positive.
pub fn cholesky_spd(a: &DMatrix<f64>, jitter: f64) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("cholesky needs a square matrix".into()));
    }
    if !(jitter >= 0.0) {
        return Err(Error::InvalidArgument(format!("jitter must be nonnegative, got {jitter}")));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("cholesky input"));
    }
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d, jitter });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Tries [`JITTER_LADDER`] until a factorization succeeds.
///
/// Returns the factor together with the absolute jitter that was added.
pub fn cholesky_with_ladder(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = a.nrows().max(1);
    let mean_diag = (a.diagonal().iter().sum::<f64>() / n as f64).abs();
    let mut last = None;
    for rel in JITTER_LADDER {
        let jitter = rel * mean_diag;
        match cholesky_spd(a, jitter) {
            Ok(l) => return Ok((l, jitter)),
            Err(e @ Error::NotPositiveDefinite { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("ladder is non-empty"))
}
