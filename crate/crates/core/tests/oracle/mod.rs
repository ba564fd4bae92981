//! Brute-force reference computations, independent of the library paths they
//! check. Shared by the integration and acceptance suites.
#![allow(dead_code)]

use nalgebra::DMatrix;

/// Angular matrix by intersecting the ray from each pixel center with every
/// segment of the reference border and keeping the nearest hit.
pub fn angular_matrix(n: usize, theta_deg: f64) -> DMatrix<f64> {
    let t = theta_deg.to_radians();
    let (dx, dy) = (t.cos(), -t.sin());
    // border points in image-y-down block coordinates, with reference index
    let mut top = Vec::new();
    for k in 0..=2 * n {
        top.push(((k as f64) - 0.5, -0.5, k));
    }
    let mut left = Vec::new();
    for k in 0..=n {
        left.push((-0.5, (k as f64) - 0.5, if k == 0 { 0 } else { 2 * n + k }));
    }
    let mut m = DMatrix::zeros(n * n, 3 * n + 1);
    for j in 0..n {
        for i in 0..n {
            let (px, py) = (i as f64 + 0.5, j as f64 + 0.5);
            let mut best: Option<(f64, usize, usize, f64)> = None;
            for chain in [&top, &left] {
                for w in chain.windows(2) {
                    let (ax, ay, ia) = w[0];
                    let (bx, by, ib) = w[1];
                    let (ex, ey) = (bx - ax, by - ay);
                    // P + t d = A + s e
                    let det = dx * (-ey) - dy * (-ex);
                    if det.abs() < 1e-15 {
                        continue;
                    }
                    let (rx, ry) = (ax - px, ay - py);
                    let tt = (rx * (-ey) - ry * (-ex)) / det;
                    let s = (dx * ry - dy * rx) / det;
                    if tt > 1e-12 && (-1e-12..=1.0 + 1e-12).contains(&s) {
                        let s = s.clamp(0.0, 1.0);
                        if best.is_none_or(|b| tt < b.0 - 1e-12) {
                            best = Some((tt, ia, ib, s));
                        }
                    }
                }
            }
            let row = j * n + i;
            match best {
                Some((_, ia, ib, s)) => {
                    m[(row, ia)] += 1.0 - s;
                    m[(row, ib)] += s;
                }
                None if dy < 0.0 => m[(row, 2 * n)] = 1.0,
                None => m[(row, 3 * n)] = 1.0,
            }
        }
    }
    m
}

/// `Y Xᵀ (X Xᵀ + λI)⁻¹` by explicit inversion.
pub fn ridge_by_inversion(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let mut g = x * x.transpose();
    for i in 0..g.nrows() {
        g[(i, i)] += lambda;
    }
    let inv = g.try_inverse().expect("oracle instance must be invertible");
    y * x.transpose() * inv
}

/// Exhaustive argmin over `(sample, mode)` with a strict comparison so the
/// first minimum wins.
pub fn brute_force_labels(x: &DMatrix<f64>, y: &DMatrix<f64>, modes: &[DMatrix<f64>]) -> Vec<usize> {
    (0..x.ncols())
        .map(|s| {
            let mut best = (0, f64::INFINITY);
            for (p, m) in modes.iter().enumerate() {
                let mut sq = 0.0;
                for r in 0..m.nrows() {
                    let mut acc = 0.0;
                    for c in 0..m.ncols() {
                        acc += m[(r, c)] * x[(c, s)];
                    }
                    sq += (y[(r, s)] - acc).powi(2);
                }
                if sq < best.1 {
                    best = (p, sq);
                }
            }
            best.0
        })
        .collect()
}

/// Plain row-by-column product.
pub fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * x[c]).sum())
        .collect()
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
