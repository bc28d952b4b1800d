use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use epgpr::grouping::ExchangeReport;
use epgpr::models::OrbitSpectrumSet;
use serde::Serialize;

use crate::failure::Failure;

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(Failure::io)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(Failure::io)?;
    f.write_all(bytes).map_err(Failure::io)?;
    f.sync_all().map_err(Failure::io)?;
    drop(f);
    fs::rename(&tmp, &target).map_err(Failure::io)?;
    Ok(target)
}

pub fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::new(crate::failure::Kind::Io, e.to_string()))?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

fn num(out: &mut String, v: f64) {
    let _ = write!(out, ",{v:.16e}");
}

/// `index, phi, re_kappa, im_kappa, re_lambda_k, im_lambda_k, ...`.
pub fn spectra_csv(set: &OrbitSpectrumSet, angles: &[f64]) -> String {
    let mut out = String::from("index,phi,re_kappa,im_kappa");
    for k in 0..set.dim() {
        let _ = write!(out, ",re_lambda_{k},im_lambda_{k}");
    }
    out.push('\n');
    for (i, spectrum) in set.spectra.iter().enumerate() {
        let _ = write!(out, "{i}");
        num(&mut out, angles.get(i).copied().unwrap_or(f64::NAN));
        num(&mut out, set.kappa[i].re);
        num(&mut out, set.kappa[i].im);
        for z in spectrum {
            num(&mut out, z.re);
            num(&mut out, z.im);
        }
        out.push('\n');
    }
    out
}

/// Sorted paths; one `re_path_j, im_path_j` column pair per path.
pub fn paths_csv(report: &ExchangeReport, angles: &[f64]) -> String {
    let mut out = String::from("index,phi");
    for j in 0..report.paths.len() {
        let _ = write!(out, ",re_path_{j},im_path_{j}");
    }
    out.push('\n');
    for i in 0..report.kappa.len() {
        let _ = write!(out, "{i}");
        num(&mut out, angles.get(i).copied().unwrap_or(f64::NAN));
        for p in &report.paths {
            num(&mut out, p.values[i].re);
            num(&mut out, p.values[i].im);
        }
        out.push('\n');
    }
    out
}

/// Orbit angles `2πi/n`.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|i| std::f64::consts::TAU * i as f64 / n as f64).collect()
}
