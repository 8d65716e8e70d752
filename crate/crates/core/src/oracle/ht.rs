use nalgebra::DVector;

use super::Population;
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::estimators::{ht_row_scale, ht_tilde_design};
use crate::linalg::{penalized_least_squares, DesignMatrix, RidgeSystem};
use crate::numeric::{sum, Accumulator};

/// Signal vectors behind every HT-type variance.
#[derive(Debug, Clone, PartialEq)]
pub struct HtSignal {
    /// `sqrt((1-p)/p) y1 + sqrt(p/(1-p)) y0`.
    pub mu: Vec<f64>,
    /// `((1-p)^2 y1 - p^2 y0) / r`.
    pub t: Vec<f64>,
    /// `sqrt(p (1-p))`.
    pub r: Vec<f64>,
    /// `R^-1 X`.
    pub x_tilde: DesignMatrix,
}

impl HtSignal {
    pub fn new(pop: &Population, p: &[f64]) -> Result<Self> {
        DesignSpec::simple(p.to_vec())?;
        if p.len() != pop.n() {
            return Err(Error::InvalidInput("probability vector length mismatch".into()));
        }
        let r = ht_row_scale(p);
        let mu = (0..pop.n())
            .map(|i| ((1.0 - p[i]) / p[i]).sqrt() * pop.y1[i] + (p[i] / (1.0 - p[i])).sqrt() * pop.y0[i])
            .collect();
        let t = (0..pop.n())
            .map(|i| ((1.0 - p[i]).powi(2) * pop.y1[i] - p[i].powi(2) * pop.y0[i]) / r[i])
            .collect();
        let x_tilde = ht_tilde_design(&pop.x, p)?;
        Ok(Self { mu, t, r, x_tilde })
    }
}

/// `n^-2 ||mu||^2`.
pub fn ht_variance(pop: &Population, p: &[f64]) -> Result<f64> {
    let s = HtSignal::new(pop, p)?;
    let n = pop.n() as f64;
    Ok(sum(s.mu.iter().map(|m| m * m)) / (n * n))
}

/// `n^-2 ||mu - R^-1 X b||^2`, the variance of HT applied to `y - X b`.
pub fn adjusted_ht_variance(pop: &Population, p: &[f64], b: &[f64]) -> Result<f64> {
    if b.len() != pop.k() {
        return Err(Error::InvalidInput("coefficient length mismatch".into()));
    }
    let s = HtSignal::new(pop, p)?;
    let fit = s.x_tilde.as_matrix() * DVector::from_column_slice(b);
    let n = pop.n() as f64;
    Ok(sum(s.mu.iter().zip(fit.iter()).map(|(m, f)| (m - f).powi(2))) / (n * n))
}

/// Minimizer `b*` of the fixed-adjustment variance and the minimum it attains.
pub fn adjusted_ht_optimal(pop: &Population, p: &[f64]) -> Result<(Vec<f64>, f64)> {
    let s = HtSignal::new(pop, p)?;
    let fit = penalized_least_squares(s.x_tilde.as_matrix(), &s.mu, &vec![0.0; pop.k()])?;
    let b: Vec<f64> = fit.beta.iter().copied().collect();
    let v = adjusted_ht_variance(pop, p, &b)?;
    Ok((b, v))
}

/// The two terms of the exact leave-one-out HT variance, already divided by `n^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HtVarianceTerms {
    /// `sum_i (x~_i' beta - mu_i)^2 / (1 - h~_ii)^2`, with `beta` the ridge fit of `mu` on `X~`.
    pub fit: f64,
    /// `sum_{i<j} h~_ij^2 (t_j / (r_j (1 - h~_ii)) + t_i / (r_i (1 - h~_jj)))^2`.
    pub cross: f64,
}

impl HtVarianceTerms {
    pub fn total(&self) -> f64 {
        self.fit + self.cross
    }
}

pub fn loora_ht_variance_terms(pop: &Population, p: &[f64], lambda: f64) -> Result<HtVarianceTerms> {
    let s = HtSignal::new(pop, p)?;
    let sys = RidgeSystem::new(&s.x_tilde, lambda)?;
    sys.check_leverage()?;
    let h = sys.hat_full();
    let fitted = sys.fitted(&s.mu);
    let n = pop.n();
    let hb: Vec<f64> = (0..n).map(|i| 1.0 - h[(i, i)]).collect();
    let fit = sum((0..n).map(|i| ((fitted[i] - s.mu[i]) / hb[i]).powi(2)));
    let tr: Vec<f64> = (0..n).map(|i| s.t[i] / s.r[i]).collect();
    let mut cross = Accumulator::new();
    for i in 0..n {
        for j in i + 1..n {
            let w = tr[j] / hb[i] + tr[i] / hb[j];
            cross.add(h[(i, j)].powi(2) * w * w);
        }
    }
    let n2 = (n * n) as f64;
    Ok(HtVarianceTerms {
        fit: fit / n2,
        cross: cross.value() / n2,
    })
}

/// Exact variance of the leave-one-out ridge-adjusted HT estimator at penalty `lambda`.
pub fn loora_ht_variance(pop: &Population, p: &[f64], lambda: f64) -> Result<f64> {
    loora_ht_variance_terms(pop, p, lambda).map(|t| t.total())
}
