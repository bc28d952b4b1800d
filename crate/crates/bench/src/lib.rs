//! Shared inputs for the criterion benches.

use epgpr::gpr::Point;
use epgpr::linalg::ComplexMatrix;
use epgpr::models::MatrixFamily;
use epgpr::Complex64;

/// `random5` evaluated at `κ = 0.3 + 0.9i`, tiled to `dim` with a diagonal shift.
pub fn test_matrix(dim: usize) -> ComplexMatrix {
    let base = MatrixFamily::random5(42).evaluate(Complex64::new(0.3, 0.9)).expect("finite kappa");
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            let v = base.get(i % 5, j % 5) / (1.0 + (i / 5 + j / 5) as f64);
            m.set(i, j, v + if i == j { Complex64::new(i as f64 * 0.1, 0.0) } else { Complex64::default() });
        }
    }
    m
}

/// `n × n` grid on the unit square with `sin(3x)cos(2y)` targets.
pub fn grid_data(n: usize) -> (Vec<Point>, Vec<f64>) {
    let step = 1.0 / (n - 1) as f64;
    let x: Vec<Point> = (0..n).flat_map(|i| (0..n).map(move |j| [i as f64 * step, j as f64 * step])).collect();
    let y = x.iter().map(|p| (3.0 * p[0]).sin() * (2.0 * p[1]).cos()).collect();
    (x, y)
}
