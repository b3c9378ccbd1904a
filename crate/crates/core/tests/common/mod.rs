#![allow(dead_code)]

use dpp_cftp::{ModelSpec, Point, SpectralKernel};

pub fn gaussian(rho: f64, alpha: f64) -> SpectralKernel {
    SpectralKernel::with_defaults(ModelSpec::gaussian(rho, alpha).unwrap()).unwrap()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn dense_det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    det
}

pub fn j_gram(kernel: &SpectralKernel, points: &[Point]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| points.iter().map(|q| kernel.j_eval(p, q)).collect())
        .collect()
}

/// `det J(ξ ∪ x) / det J(ξ)` computed densely.
pub fn dense_intensity(kernel: &SpectralKernel, xi: &[Point], x: Point) -> f64 {
    let mut with = xi.to_vec();
    with.push(x);
    dense_det(j_gram(kernel, &with)) / dense_det(j_gram(kernel, xi))
}
