#![allow(dead_code)]

use huber_mm::{DenseMatrix, RegressionProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Gaussian elimination with partial pivoting on a dense square system.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            let pivot_row = a[k].clone();
            for (aij, akj) in a[i][k..].iter_mut().zip(&pivot_row[k..]) {
                *aij -= f * akj;
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Least squares through the normal equations, optionally weighted.
pub fn weighted_ls(x: &DenseMatrix, y: &[f64], w: Option<&[f64]>) -> Vec<f64> {
    let p = x.cols();
    let wt = |i: usize| w.map_or(1.0, |w| w[i]);
    let a: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            (0..p)
                .map(|k| {
                    (0..x.rows())
                        .map(|i| wt(i) * x.get(i, j) * x.get(i, k))
                        .sum()
                })
                .collect()
        })
        .collect();
    let b: Vec<f64> = (0..p)
        .map(|j| (0..x.rows()).map(|i| wt(i) * x.get(i, j) * y[i]).sum())
        .collect();
    gauss_solve(a, b)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DenseMatrix {
    let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::from_col_major(n, p, data).unwrap()
}

pub fn unit_columns(x: DenseMatrix) -> DenseMatrix {
    let inv: Vec<f64> = x.column_norms().iter().map(|v| 1.0 / v).collect();
    x.scale_columns(&inv).unwrap()
}

/// Seeded regression instance with a share of gross outliers; sizes vary
/// with the index.
pub fn descent_instance(index: u64) -> RegressionProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + index);
    let n = rng.random_range(30..=100);
    let p = rng.random_range(2..=10);
    let x = gaussian_matrix(&mut rng, n, p);
    let beta: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let mut y = x.matvec(&beta).unwrap();
    let share = [0.0, 0.05, 0.1, 0.2][(index % 4) as usize];
    for v in y.iter_mut() {
        *v += 0.5 * rng.sample::<f64, _>(StandardNormal);
        if rng.random::<f64>() < share {
            *v += 20.0 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    RegressionProblem::new(y, x, false).unwrap()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let s: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    d / s.max(f64::MIN_POSITIVE)
}

pub fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2]) as f64
    }
}
