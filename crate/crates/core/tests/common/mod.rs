#![allow(dead_code)]

use epgpr::epsearch::{brute_force_ep, OracleOptions, OracleResult};
use epgpr::grouping::{group_paths, GroupingOptions};
use epgpr::models::{trace_orbit, MatrixFamily, Orbit};
use epgpr::Complex64;

pub const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const RADII: [f64; 5] = [0.5, 0.3, 0.2, 0.1, 0.05];

pub fn kato_orbit() -> Orbit {
    Orbit::circle(Complex64::new(0.0, 0.8), 0.5, 100).unwrap()
}

/// Oracle EP from `i` and a 100-point circle around it, offset by `0.4ρ`
/// downward, using the largest listed radius that encloses exactly one
/// exchanging pair.
pub fn random5_case(seed: u64) -> (MatrixFamily, OracleResult, Orbit) {
    let family = MatrixFamily::random5(seed);
    let ep = brute_force_ep(&family, Complex64::new(0.0, 1.0), &OracleOptions::default()).unwrap();
    for rho in RADII {
        let orbit = Orbit::circle(ep.kappa_ep - Complex64::new(0.0, 0.4 * rho), rho, 100).unwrap();
        let set = trace_orbit(&family, &orbit, false).unwrap();
        if let Ok(r) = group_paths(&set, &GroupingOptions::default()) {
            if r.exchanging_pairs.len() == 1 {
                return (family, ep, orbit);
            }
        }
    }
    panic!("no single-exchange orbit for seed {seed}");
}
