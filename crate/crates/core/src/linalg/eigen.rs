//! Complex non-Hermitian eigensolver.
//!
//! Balancing (Parlett–Reinsch, radix 2), Householder reduction to upper
//! Hessenberg form, then single-shift complex QR with Wilkinson shifts and
//! Givens bulge chasing. Eigenvectors come from back substitution on the
//! triangular Schur factor.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{ComplexMatrix, MAX_DIM};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Eigenvalues (and optionally eigenvectors) of a complex matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm right eigenvectors stored as columns.
    pub eigenvectors: Option<DMatrix<Complex64>>,
    /// `max_j |M v_j - λ_j v_j| / |v_j|`; zero when vectors were not requested.
    pub residual_norm: f64,
}

/// Cabs1-style magnitude used for deflation tests.
fn abs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Computes all eigenvalues of `m`, with eigenvectors if requested.
///
/// Eigenvalue order is whatever the QR iteration produces.
pub fn eigendecompose(m: &ComplexMatrix, want_vectors: bool) -> Result<EigenDecomposition> {
    let n = m.dim();
    if !(2..=MAX_DIM).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix entries"));
    }

    let mut h = m.as_matrix().clone();
    let scale = balance(&mut h);
    let mut z = want_vectors.then(|| DMatrix::<Complex64>::identity(n, n));
    hessenberg(&mut h, z.as_mut());
    schur_qr(&mut h, z.as_mut())?;

    let eigenvalues: Vec<Complex64> = (0..n).map(|i| h[(i, i)]).collect();
    let (eigenvectors, residual_norm) = match z {
        Some(z) => {
            let mut v = triangular_eigenvectors(&h, &z);
            for j in 0..n {
                for i in 0..n {
                    v[(i, j)] *= scale[i];
                }
                let norm = v.column(j).norm();
                if norm > 0.0 {
                    v.column_mut(j).unscale_mut(norm);
                }
            }
            let residual = residual(m.as_matrix(), &eigenvalues, &v);
            (Some(v), residual)
        }
        None => (None, 0.0),
    };
    Ok(EigenDecomposition { eigenvalues, eigenvectors, residual_norm })
}

fn residual(m: &DMatrix<Complex64>, values: &[Complex64], vectors: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for (j, &lambda) in values.iter().enumerate() {
        let v: DVector<Complex64> = vectors.column(j).into_owned();
        let r = m * &v - &v * lambda;
        let vn = v.norm();
        if vn > 0.0 {
            worst = worst.max(r.norm() / vn);
        }
    }
    worst
}

/// Balances `a` in place by diagonal similarity with powers of two and
/// returns the scaling vector `d` (original eigenvector = `d ∘ balanced`).
fn balance(a: &mut DMatrix<Complex64>) -> Vec<f64> {
    let n = a.nrows();
    let mut d = vec![1.0; n];
    const RADIX: f64 = 2.0;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += abs1(a[(j, i)]);
                    r += abs1(a[(i, j)]);
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
    d
}

/// Householder reduction to upper Hessenberg form, accumulating into `z`.
fn hessenberg(a: &mut DMatrix<Complex64>, mut z: Option<&mut DMatrix<Complex64>>) {
    let n = a.nrows();
    for k in 0..n.saturating_sub(2) {
        let xnorm = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -phase * xnorm;
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for c in v.iter_mut() {
            *c /= vnorm;
        }
        // a <- (I - 2 v v*) a
        for j in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(t, vt)| vt.conj() * a[(k + 1 + t, j)]).sum();
            for (t, vt) in v.iter().enumerate() {
                a[(k + 1 + t, j)] -= *vt * dot * 2.0;
            }
        }
        // a <- a (I - 2 v v*)
        for i in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(t, vt)| a[(i, k + 1 + t)] * vt).sum();
            for (t, vt) in v.iter().enumerate() {
                a[(i, k + 1 + t)] -= dot * vt.conj() * 2.0;
            }
        }
        if let Some(z) = z.as_deref_mut() {
            for i in 0..n {
                let dot: Complex64 = v.iter().enumerate().map(|(t, vt)| z[(i, k + 1 + t)] * vt).sum();
                for (t, vt) in v.iter().enumerate() {
                    z[(i, k + 1 + t)] -= dot * vt.conj() * 2.0;
                }
            }
        }
        a[(k + 1, k)] = alpha;
        for i in (k + 2)..n {
            a[(i, k)] = ZERO;
        }
    }
}

/// Rotation `[[c, s], [-conj(s), c]]` mapping `(x, y)` to `(r, 0)`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    if y == ZERO {
        return (1.0, ZERO);
    }
    let ax = x.norm();
    if ax == 0.0 {
        return (0.0, y.conj() / y.norm());
    }
    let norm = ax.hypot(y.norm());
    (ax / norm, (x / ax) * y.conj() / norm)
}

/// Eigenvalue of the trailing 2x2 block closer to its last diagonal entry.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mu1 = (a + d) * 0.5 + disc;
    let mu2 = (a + d) * 0.5 - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

/// Reduces an upper Hessenberg matrix to upper triangular Schur form.
fn schur_qr(h: &mut DMatrix<Complex64>, mut z: Option<&mut DMatrix<Complex64>>) -> Result<()> {
    let n = h.nrows();
    let max_sweeps = 30 * n;
    let norm = h.iter().map(|x| abs1(*x)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut sweeps = 0usize;
    let mut its = 0usize;
    let mut hi = n - 1;
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let mut tst = abs1(h[(lo - 1, lo - 1)]) + abs1(h[(lo, lo)]);
            if tst == 0.0 {
                tst = norm;
            }
            if abs1(h[(lo, lo - 1)]) <= f64::EPSILON * tst {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            its = 0;
            continue;
        }
        sweeps += 1;
        its += 1;
        if sweeps > max_sweeps {
            return Err(Error::ConvergenceFailure { iterations: sweeps - 1 });
        }

        let mu = if its % 10 == 0 {
            // exceptional shift
            h[(hi, hi)] + Complex64::new(0.75 * abs1(h[(hi, hi - 1)]), 0.0)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        for k in lo..hi {
            let (x, y) = if k == lo { (h[(lo, lo)] - mu, h[(lo + 1, lo)]) } else { (h[(k, k - 1)], h[(k + 1, k - 1)]) };
            let (c, s) = givens(x, y);
            let col_start = if k == lo { k } else { k - 1 };
            for j in col_start..n {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = -s.conj() * a + b * c;
            }
            let row_end = (k + 2).min(hi);
            for i in 0..=row_end {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * c + b * s.conj();
                h[(i, k + 1)] = -a * s + b * c;
            }
            if let Some(z) = z.as_deref_mut() {
                for i in 0..n {
                    let a = z[(i, k)];
                    let b = z[(i, k + 1)];
                    z[(i, k)] = a * c + b * s.conj();
                    z[(i, k + 1)] = -a * s + b * c;
                }
            }
            if k > lo {
                h[(k + 1, k - 1)] = ZERO;
            }
        }
    }
    Ok(())
}

/// Eigenvectors `Z y_k` from the triangular Schur factor `t`.
fn triangular_eigenvectors(t: &DMatrix<Complex64>, z: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = t.nrows();
    let tnorm = t.iter().map(|x| x.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = ONE;
        for j in (0..k).rev() {
            let mut sum = ZERO;
            for m in (j + 1)..=k {
                sum += t[(j, m)] * y[(m, k)];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < small {
                denom = Complex64::new(small, 0.0);
            }
            y[(j, k)] = -sum / denom;
            let big = y.column(k).iter().map(|c| c.norm()).fold(0.0, f64::max);
            if big > 1e100 {
                y.column_mut(k).unscale_mut(big);
            }
        }
    }
    z * y
}
