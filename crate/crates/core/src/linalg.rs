//! Ridge regression and leverage machinery.
//!
//! Everything downstream leans on one identity: for the ridge fit
//! `beta = (X'X + lambda I)^-1 X'y` with leverages `h_ii = x_i' (X'X + lambda I)^-1 x_i`,
//! the fit without row `i` satisfies
//!
//! ```text
//! y_i - x_i' beta = (1 - h_ii) (y_i - x_i' beta_(-i))
//! ```
//!
//! so all `n` leave-one-out fits come from a single factorization. Rows whose
//! leverage is within `LEVERAGE_GUARD` of one are rejected instead of clamped.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::all_finite;

/// Minimum admissible `1 - h_ii` for a leave-one-out fit.
pub const LEVERAGE_GUARD: f64 = 1e-12;

/// Dense `n x k` covariate matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    m: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "design matrix must be at least 1x1, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if let Some(idx) = m.iter().position(|v| !v.is_finite()) {
            let (i, j) = (idx % m.nrows(), idx / m.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite covariate at row {i}, column {j}"
            )));
        }
        Ok(Self { m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput("ragged covariate rows".into()));
        }
        Self::new(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
    }

    pub fn from_row_major(n: usize, k: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * k {
            return Err(Error::InvalidInput(format!(
                "expected {} covariate values, got {}",
                n * k,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, k, data))
    }

    pub fn nrows(&self) -> usize {
        self.m.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.m.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.m.row(i).iter().copied().collect()
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.m.row(i).norm()
    }

    /// The (2, infinity) operator norm: largest row 2-norm.
    pub fn max_row_norm(&self) -> f64 {
        (0..self.nrows()).map(|i| self.row_norm(i)).fold(0.0, f64::max)
    }

    /// Prepends a column of ones.
    pub fn with_intercept(&self) -> Self {
        let (n, k) = self.m.shape();
        let m = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { self.m[(i, j - 1)] });
        Self { m }
    }

    /// Row `i` multiplied by `s[i]`.
    pub fn scale_rows(&self, s: &[f64]) -> Result<Self> {
        if s.len() != self.nrows() {
            return Err(Error::InvalidInput("row scale length mismatch".into()));
        }
        let mut m = self.m.clone();
        for (i, si) in s.iter().enumerate() {
            m.row_mut(i).scale_mut(*si);
        }
        Self::new(m)
    }

    /// Copy with the listed rows removed.
    pub fn without_rows(&self, drop: &[usize]) -> Result<Self> {
        let keep: Vec<usize> = (0..self.nrows()).filter(|i| !drop.contains(i)).collect();
        Self::new(self.m.select_rows(keep.iter()))
    }

    pub fn column_means(&self) -> Vec<f64> {
        (0..self.ncols())
            .map(|j| crate::numeric::mean(self.m.column(j).as_slice()))
            .collect()
    }

    /// `X - 1 xbar'` using the full-sample column means.
    pub fn centered(&self) -> DMatrix<f64> {
        let means = self.column_means();
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| self.m[(i, j)] - means[j])
    }
}

/// Result of one ridge solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub lambda: f64,
    pub beta: DVector<f64>,
    pub hat_diag: DVector<f64>,
    pub hat_full: Option<DMatrix<f64>>,
}

/// A factorized ridge problem for fixed `(X, lambda)`, reusable across outcome vectors.
#[derive(Debug, Clone)]
pub struct RidgeSystem {
    lambda: f64,
    x: DMatrix<f64>,
    /// `(X'X + lambda I)^-1 X'`, stored `k x n`.
    w: DMatrix<f64>,
    h: Vec<f64>,
}

impl RidgeSystem {
    pub fn new(x: &DesignMatrix, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let xm = x.as_matrix();
        let k = xm.ncols();
        let mut a = xm.tr_mul(xm);
        for j in 0..k {
            a[(j, j)] += lambda;
        }
        let w = match cholesky_solve_t(&a, xm) {
            Some(w) => w,
            None if lambda > 0.0 => svd_ridge_operator(xm, lambda),
            None => return Err(Error::RankDeficient),
        };
        let h = (0..xm.nrows())
            .map(|i| xm.row(i).iter().zip(w.column(i).iter()).map(|(a, b)| a * b).sum())
            .collect();
        Ok(Self {
            lambda,
            x: xm.clone(),
            w,
            h,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn leverages(&self) -> &[f64] {
        &self.h
    }

    /// `(X'X + lambda I)^-1 x_i`.
    pub fn influence(&self, i: usize) -> DVector<f64> {
        self.w.column(i).into_owned()
    }

    pub fn beta(&self, y: &[f64]) -> DVector<f64> {
        &self.w * DVector::from_column_slice(y)
    }

    pub fn fitted(&self, y: &[f64]) -> Vec<f64> {
        (&self.x * self.beta(y)).as_slice().to_vec()
    }

    pub fn hat_full(&self) -> DMatrix<f64> {
        &self.x * &self.w
    }

    /// Fails on the first row whose leverage is within the guard of one.
    pub fn check_leverage(&self) -> Result<()> {
        match self.h.iter().position(|h| 1.0 - h <= LEVERAGE_GUARD) {
            Some(row) => Err(Error::LeverageSingular {
                row,
                leverage: self.h[row],
            }),
            None => Ok(()),
        }
    }

    /// `y_i - x_i' beta_(-i)` for every row.
    pub fn loo_residuals(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        self.check_leverage()?;
        let fit = self.fitted(y);
        Ok((0..y.len())
            .map(|i| (y[i] - fit[i]) / (1.0 - self.h[i]))
            .collect())
    }

    /// `x_i' beta_(-i)` for every row. Does not depend on `y_i`.
    pub fn loo_predictions(&self, y: &[f64]) -> Result<Vec<f64>> {
        let r = self.loo_residuals(y)?;
        Ok(y.iter().zip(&r).map(|(yi, ri)| yi - ri).collect())
    }

    /// Leave-one-out coefficients through the rank-one downdate.
    pub fn loo_coefficients(&self, y: &[f64]) -> Result<Vec<DVector<f64>>> {
        self.check_len(y)?;
        self.check_leverage()?;
        let beta = self.beta(y);
        let fit = &self.x * &beta;
        Ok((0..y.len())
            .map(|i| {
                let e = (y[i] - fit[i]) / (1.0 - self.h[i]);
                &beta - self.w.column(i) * e
            })
            .collect())
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.x.nrows() {
            return Err(Error::InvalidInput(format!(
                "outcome length {} does not match {} rows",
                y.len(),
                self.x.nrows()
            )));
        }
        if !all_finite(y) {
            return Err(Error::InvalidInput("non-finite outcome".into()));
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

/// Solves `A W = X'` by Cholesky; `None` when `A` is numerically singular.
fn cholesky_solve_t(a: &DMatrix<f64>, x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..a.nrows()).map(|j| l[(j, j)]).collect();
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = diag.iter().copied().fold(0.0, f64::max);
    let rcond = (lo / hi).powi(2);
    if !(rcond.is_finite() && rcond > 1e-14 * a.nrows() as f64) {
        return None;
    }
    Some(chol.solve(&x.transpose()))
}

/// `V diag(s / (s^2 + lambda)) U'` from the thin SVD; valid for any rank when lambda > 0.
fn svd_ridge_operator(x: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v requested");
    let mut scaled = vt.transpose();
    for (j, s) in svd.singular_values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(s / (s * s + lambda));
    }
    scaled * u.transpose()
}

pub fn ridge_fit(x: &DesignMatrix, y: &[f64], lambda: f64, want_full_hat: bool) -> Result<RidgeFit> {
    let sys = RidgeSystem::new(x, lambda)?;
    sys.check_len(y)?;
    Ok(RidgeFit {
        lambda,
        beta: sys.beta(y),
        hat_diag: DVector::from_column_slice(sys.leverages()),
        hat_full: want_full_hat.then(|| sys.hat_full()),
    })
}

pub fn loo_fit_all(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<Vec<DVector<f64>>> {
    RidgeSystem::new(x, lambda)?.loo_coefficients(y)
}

pub fn loo_residuals(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    RidgeSystem::new(x, lambda)?.loo_residuals(y)
}

/// Leverages from the compact SVD: `h_ii = sum_j s_j^2 u_ij^2 / (s_j^2 + lambda)`.
pub fn ridge_leverages_svd(x: &DesignMatrix, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let xm = x.as_matrix();
    let svd = xm.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let tol = smax * xm.nrows().max(xm.ncols()) as f64 * f64::EPSILON;
    Ok((0..xm.nrows())
        .map(|i| {
            s.iter()
                .enumerate()
                .filter(|(_, sj)| lambda > 0.0 || **sj > tol)
                .map(|(j, sj)| sj * sj * u[(i, j)].powi(2) / (sj * sj + lambda))
                .sum()
        })
        .collect())
}

/// `lambda = c ||X||_(2,inf)^2`, which caps every ridge leverage at `1 / (1 + c)`.
pub fn leverage_regularizer(x: &DesignMatrix, c: f64) -> Result<f64> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "regularizer constant must be finite and nonnegative, got {c}"
        )));
    }
    Ok(c * x.max_row_norm().powi(2))
}

/// Least squares with a per-column quadratic penalty.
#[derive(Debug, Clone)]
pub struct PenalizedFit {
    pub beta: DVector<f64>,
    /// `(M'M + P)^-1`.
    pub bread: DMatrix<f64>,
    pub residuals: Vec<f64>,
}

/// Solves `min ||y - M b||^2 + sum_j penalty_j b_j^2` through QR of the stacked system.
pub fn penalized_least_squares(m: &DMatrix<f64>, y: &[f64], penalty: &[f64]) -> Result<PenalizedFit> {
    let (n, k) = m.shape();
    if y.len() != n || penalty.len() != k {
        return Err(Error::InvalidInput("penalized least squares shape mismatch".into()));
    }
    if penalty.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidInput("penalties must be finite and nonnegative".into()));
    }
    let pen_rows: Vec<usize> = (0..k).filter(|&j| penalty[j] > 0.0).collect();
    let rows = n + pen_rows.len();
    if rows < k {
        return Err(Error::RankDeficient);
    }
    let mut aug = DMatrix::zeros(rows, k);
    aug.view_mut((0, 0), (n, k)).copy_from(m);
    let mut rhs = DVector::zeros(rows);
    rhs.rows_mut(0, n).copy_from_slice(y);
    for (r, &j) in pen_rows.iter().enumerate() {
        aug[(n + r, j)] = penalty[j].sqrt();
    }
    let qr = aug.qr();
    let r = qr.r();
    let rmax = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..k).any(|j| r[(j, j)].abs() <= 1e-12 * rmax.max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().tr_mul(&rhs);
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient)?;
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::RankDeficient)?;
    let bread = &rinv * rinv.transpose();
    let fitted = m * &beta;
    let residuals = (0..n).map(|i| y[i] - fitted[i]).collect();
    Ok(PenalizedFit {
        beta,
        bread,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn eye2() -> DesignMatrix {
        DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn identity_design_interpolates() {
        let fit = ridge_fit(&eye2(), &[3.0, 5.0], 0.0, true).unwrap();
        assert_abs_diff_eq!(fit.beta.as_slice(), &[3.0, 5.0][..], epsilon = 1e-14);
        assert_abs_diff_eq!(fit.hat_diag.as_slice(), &[1.0, 1.0][..], epsilon = 1e-14);
        assert!(fit.hat_full.is_some());
    }

    #[test]
    fn identity_design_shrinks_by_half() {
        let fit = ridge_fit(&eye2(), &[3.0, 5.0], 1.0, false).unwrap();
        assert_abs_diff_eq!(fit.beta.as_slice(), &[1.5, 2.5][..], epsilon = 1e-14);
        assert_abs_diff_eq!(fit.hat_diag.as_slice(), &[0.5, 0.5][..], epsilon = 1e-14);
        assert!(fit.hat_full.is_none());
    }

    #[test]
    fn rank_deficient_at_zero_lambda() {
        let x = DesignMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(ridge_fit(&x, &[1.0, 2.0, 3.0], 0.0, false), Err(Error::RankDeficient));
        let fit = ridge_fit(&x, &[1.0, 2.0, 3.0], 0.5, false).unwrap();
        let svd = ridge_leverages_svd(&x, 0.5).unwrap();
        assert_abs_diff_eq!(fit.hat_diag.as_slice(), &svd[..], epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_finite_input() {
        let x = DesignMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert!(matches!(ridge_fit(&x, &[1.0, f64::NAN], 0.0, false), Err(Error::InvalidInput(_))));
        assert!(matches!(ridge_fit(&x, &[1.0, 1.0], -1.0, false), Err(Error::InvalidInput(_))));
        assert!(DesignMatrix::from_rows(&[vec![f64::INFINITY]]).is_err());
    }

    #[test]
    fn two_point_loo() {
        let x = DesignMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let betas = loo_fit_all(&x, &[0.0, 2.0], 0.0).unwrap();
        assert_abs_diff_eq!(betas[0][0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(betas[1][0], 0.0, epsilon = 1e-14);
        let r = loo_residuals(&x, &[0.0, 2.0], 0.0).unwrap();
        assert_abs_diff_eq!(&r[..], &[-2.0, 2.0][..], epsilon = 1e-14);
    }

    #[test]
    fn exact_fit_has_zero_loo_residuals() {
        let x = DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]])
            .unwrap();
        let y = [1.0, 3.0, 5.0, 7.0];
        for r in loo_residuals(&x, &y, 0.0).unwrap() {
            assert_abs_diff_eq!(r, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_leverage_is_rejected_with_row() {
        let x = DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        match loo_residuals(&x, &[1.0, 2.0, 3.0], 0.0) {
            Err(Error::LeverageSingular { row, .. }) => assert_eq!(row, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn huge_lambda_kills_coefficients() {
        let x = DesignMatrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.3, 0.3]]).unwrap();
        let y = [1.0, -2.0, 0.5];
        let lam = 1e12 * x.max_row_norm().powi(2);
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for b in loo_fit_all(&x, &y, lam).unwrap() {
            assert!(b.norm() <= 1e-6 * ynorm);
        }
    }

    #[test]
    fn svd_leverages_small_cases() {
        let h = ridge_leverages_svd(&eye2(), 1.0).unwrap();
        assert_abs_diff_eq!(&h[..], &[0.5, 0.5][..], epsilon = 1e-14);
        let x = DesignMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap();
        for lam in [0.0, 0.5, 3.0] {
            let h = ridge_leverages_svd(&x, lam).unwrap();
            assert_abs_diff_eq!(h[0], 4.0 / (4.0 + lam), epsilon = 1e-14);
            assert_abs_diff_eq!(h[1], 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn regularizer_rule() {
        let x = DesignMatrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(leverage_regularizer(&x, 2.0).unwrap(), 8.0);
        assert_eq!(leverage_regularizer(&x, 0.0).unwrap(), 0.0);
        let lam = leverage_regularizer(&x, 2.0).unwrap();
        let fit = ridge_fit(&x, &[0.0, 0.0], lam, false).unwrap();
        assert!(fit.hat_diag.iter().all(|h| *h <= 1.0 / 3.0 + 1e-15));
    }

    #[test]
    fn penalized_least_squares_matches_normal_equations() {
        let m = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 4.0]);
        let y = [1.0, 2.0, 2.5, 5.0];
        let fit = penalized_least_squares(&m, &y, &[0.0, 2.0]).unwrap();
        let mut a = m.tr_mul(&m);
        a[(1, 1)] += 2.0;
        let direct = a.clone().lu().solve(&(m.tr_mul(&DVector::from_column_slice(&y)))).unwrap();
        assert_abs_diff_eq!(fit.beta.as_slice(), direct.as_slice(), epsilon = 1e-12);
        let inv = a.try_inverse().unwrap();
        assert_abs_diff_eq!(fit.bread.as_slice(), inv.as_slice(), epsilon = 1e-12);
    }
}
