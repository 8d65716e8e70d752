//! Fixtures and independent reference computations shared by the integration tests.
#![allow(dead_code)]

use loora::design::DesignSpec;
use loora::estimators::ObservedSample;
use loora::linalg::DesignMatrix;
use loora::oracle::Population;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

/// Row-major `n x k` Gaussian matrix with standardized columns.
pub fn standardized_rows(r: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    let mut x: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| normal(r)).collect()).collect();
    for j in 0..k {
        let m = x.iter().map(|row| row[j]).sum::<f64>() / n as f64;
        let s = (x.iter().map(|row| (row[j] - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        for row in x.iter_mut() {
            row[j] = (row[j] - m) / s.max(1e-12);
        }
    }
    x
}

/// Rows with Student-t(2) entries and random row scales: heavy tails on purpose.
pub fn heavy_rows(r: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    let t = StudentT::new(2.0).unwrap();
    (0..n)
        .map(|_| {
            let scale = (2.0 * normal(r)).exp();
            (0..k).map(|_| scale * r.sample(t)).collect()
        })
        .collect()
}

pub fn matrix(rows: &[Vec<f64>]) -> DesignMatrix {
    DesignMatrix::from_rows(rows).unwrap()
}

pub fn gaussian_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(r)).collect()
}

pub fn population(r: &mut ChaCha8Rng, n: usize, k: usize) -> Population {
    let x = matrix(&standardized_rows(r, n, k));
    let y0 = gaussian_vec(r, n);
    let y1: Vec<f64> = y0.iter().map(|v| v + 0.7 + 0.8 * normal(r)).collect();
    Population::new(x, y1, y0).unwrap()
}

pub fn probabilities(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(0.2..0.8)).collect()
}

pub fn random_assignment_complete(r: &mut ChaCha8Rng, n: usize, nt: usize) -> Vec<bool> {
    let idx = rand::seq::index::sample(r, n, nt);
    let mut d = vec![false; n];
    for i in idx {
        d[i] = true;
    }
    d
}

pub fn observed(pop: &Population, spec: &DesignSpec, d: Vec<bool>) -> ObservedSample {
    ObservedSample::from_d(pop.x.clone(), pop.outcomes(&d), d, spec.clone()).unwrap()
}

/// Gauss-Jordan solve with partial pivoting, independent of the library's factorizations.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, bi)| {
        let mut r = row.clone();
        r.push(*bi);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "singular system");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    for j in col..=n {
                        m[i][j] -= f * m[col][j];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n]).collect()
}

/// `(X'X + lambda I)^-1 X'y` by explicit normal equations.
pub fn ridge_beta(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let k = x[0].len();
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for (row, yi) in x.iter().zip(y) {
        for i in 0..k {
            b[i] += row[i] * yi;
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] += lambda;
    }
    solve(&a, &b)
}

/// Full hat matrix by explicit inverse columns.
pub fn hat_matrix(x: &[Vec<f64>], lambda: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let k = x[0].len();
    let mut a = vec![vec![0.0; k]; k];
    for row in x {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] += lambda;
    }
    let w: Vec<Vec<f64>> = x.iter().map(|row| solve(&a, row)).collect();
    (0..n)
        .map(|i| (0..n).map(|j| dotv(&x[i], &w[j])).collect())
        .collect()
}

pub fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn drop_index<T: Clone>(v: &[T], i: usize) -> Vec<T> {
    v.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x.clone()).collect()
}

pub fn rows_of(x: &DesignMatrix) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i)).collect()
}

/// Exact mean and population variance of `f` by brute force over all assignments.
pub fn brute_moments<F: Fn(&[bool]) -> f64>(spec: &DesignSpec, f: F) -> (f64, f64) {
    let n = spec.n();
    let mut vals = Vec::new();
    for code in 0u64..(1 << n) {
        let d: Vec<bool> = (0..n).map(|i| (code >> i) & 1 == 1).collect();
        let prob = match spec {
            DesignSpec::Simple { p } => d.iter().zip(p).map(|(&di, pi)| if di { *pi } else { 1.0 - pi }).product(),
            DesignSpec::Complete { n_t, .. } => {
                if d.iter().filter(|b| **b).count() == *n_t {
                    1.0
                } else {
                    0.0
                }
            }
        };
        if prob > 0.0 {
            vals.push((f(&d), prob));
        }
    }
    let w: f64 = vals.iter().map(|v| v.1).sum();
    let m = vals.iter().map(|(v, p)| v * p).sum::<f64>() / w;
    let var = vals.iter().map(|(v, p)| p * (v - m).powi(2)).sum::<f64>() / w;
    (m, var)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
