//! HC0 variance estimates and normal-theory confidence intervals.
//!
//! Both leave-one-out estimators are coefficients in an auxiliary regression of
//! leave-one-out adjusted outcomes. For the HT family the regression is of
//! `u_i = (y_i - x_i' beta_(-i)) / q_i` on `z_i`; for the DM family it is of
//! `u_i = y_i - x_i' beta_(-i)` on `[1, d_i]`. The variance estimate is the
//! matching diagonal entry of the HC0 sandwich.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    estimate_dm, estimate_ht, loora_dm_fit, loora_ht_fit, regression_fit, EstimatorId, LambdaRule,
    ObservedSample, TREATMENT_COLUMN,
};
use crate::numeric::{sum, Accumulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: EstimatorId,
    pub tau_hat: f64,
    pub var_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub lambda_used: f64,
}

/// Standard normal quantile.
///
/// Acklam's rational approximation refined by one Halley step against `erfc`.
pub fn normal_quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const LOW: f64 = 0.02425;
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let mut x = if p < LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };
    let e = 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x -= u / (1.0 + x * u / 2.0);
    x
}

/// `tau_hat +- z_(1 - alpha/2) sqrt(var_hat)`.
pub fn confidence_interval(tau_hat: f64, var_hat: f64, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("confidence level {level} outside (0, 1)")));
    }
    if var_hat.is_nan() || var_hat < 0.0 {
        return Err(Error::InvalidInput(format!("variance estimate {var_hat} is negative")));
    }
    let half = normal_quantile(0.5 + level / 2.0) * var_hat.sqrt();
    Ok((tau_hat - half, tau_hat + half))
}

fn ht_family(s: &ObservedSample, predictions: &[f64], tau: f64) -> Vec<f64> {
    let a = &s.assignment;
    (0..s.n())
        .map(|i| (s.y[i] - predictions[i]) / a.q[i] - a.z[i] * tau)
        .collect()
}

/// HC0 residuals `r_i = u_i - z_i tau_hat` for the leave-one-out HT estimator.
pub fn hw_residuals_ht(s: &ObservedSample, rule: LambdaRule) -> Result<Vec<f64>> {
    let fit = loora_ht_fit(s, rule)?;
    Ok(ht_family(s, &fit.predictions, fit.tau))
}

/// `n^-2 sum r_i^2`.
pub fn hw_variance_ht(s: &ObservedSample, rule: LambdaRule) -> Result<f64> {
    let r = hw_residuals_ht(s, rule)?;
    let n = s.n() as f64;
    Ok(sum(r.iter().map(|v| v * v)) / (n * n))
}

/// The same estimate written as `(Z'Z)^-1 Z' S Z (Z'Z)^-1` with `S = diag(r^2)`.
pub fn hw_variance_ht_sandwich(s: &ObservedSample, rule: LambdaRule) -> Result<f64> {
    let r = hw_residuals_ht(s, rule)?;
    let z = &s.assignment.z;
    let ztz = sum(z.iter().map(|v| v * v));
    let meat = sum(z.iter().zip(&r).map(|(z, r)| z * z * r * r));
    Ok(meat / (ztz * ztz))
}

/// OLS of `u` on `[1, d]` with the HC0 variance of the slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxiliaryRegression {
    pub intercept: f64,
    pub slope: f64,
    pub slope_variance: f64,
}

pub fn dm_auxiliary_regression(u: &[f64], d: &[bool]) -> Result<AuxiliaryRegression> {
    let n = u.len();
    let nt = d.iter().filter(|x| **x).count();
    let nc = n - nt;
    if nt == 0 || nc == 0 || d.len() != n {
        return Err(Error::Degenerate("auxiliary regression needs both arms".into()));
    }
    let (ntf, ncf, nf) = (nt as f64, nc as f64, n as f64);
    let sum_u = sum(u.iter().copied());
    let sum_du = sum(u.iter().zip(d).filter(|(_, &di)| di).map(|(v, _)| *v));
    // (N'N)^-1 = (n_C n_T)^-1 [[n_T, -n_T], [-n_T, n]]
    let det = ntf * ncf;
    let intercept = (ntf * sum_u - ntf * sum_du) / det;
    let slope = (-ntf * sum_u + nf * sum_du) / det;
    let (mut m00, mut m01, mut m11) = (Accumulator::new(), Accumulator::new(), Accumulator::new());
    for (ui, &di) in u.iter().zip(d) {
        let di = di as u8 as f64;
        let r = ui - intercept - slope * di;
        let r2 = r * r;
        m00.add(r2);
        m01.add(r2 * di);
        m11.add(r2 * di * di);
    }
    let (b0, b1) = (-ntf / det, nf / det);
    let slope_variance = b0 * b0 * m00.value() + 2.0 * b0 * b1 * m01.value() + b1 * b1 * m11.value();
    Ok(AuxiliaryRegression {
        intercept,
        slope,
        slope_variance,
    })
}

/// Leave-one-out adjusted outcomes `u_i = y_i - x_i' beta_(-i)` for the DM family.
pub fn dm_adjusted_outcomes(s: &ObservedSample, rule: LambdaRule) -> Result<Vec<f64>> {
    let fit = loora_dm_fit(s, rule)?;
    Ok(s.y.iter().zip(&fit.predictions).map(|(y, p)| y - p).collect())
}

pub fn hw_variance_dm(s: &ObservedSample, rule: LambdaRule) -> Result<f64> {
    let u = dm_adjusted_outcomes(s, rule)?;
    Ok(dm_auxiliary_regression(&u, s.d())?.slope_variance)
}

fn regression_hc0(s: &ObservedSample, id: EstimatorId, rule: LambdaRule) -> Result<(f64, f64, f64)> {
    let f = regression_fit(s, id, rule)?;
    let m = &f.design;
    let b = f.fit.bread.row(TREATMENT_COLUMN).transpose();
    // g_i = row_i(M) . b, variance = sum_i g_i^2 e_i^2
    let g = m * &b;
    let v = sum(g.iter().zip(&f.fit.residuals).map(|(g, e)| (g * e).powi(2)));
    Ok((f.tau, v, f.lambda))
}

/// Point estimate, HC0 variance and interval for any estimator.
pub fn estimate_report(s: &ObservedSample, id: EstimatorId, rule: LambdaRule, level: f64) -> Result<EstimateReport> {
    let (tau, var, lambda) = match id {
        EstimatorId::Ht => {
            let tau = estimate_ht(s)?;
            let r = ht_family(s, &vec![0.0; s.n()], tau);
            let n = s.n() as f64;
            (tau, sum(r.iter().map(|v| v * v)) / (n * n), 0.0)
        }
        EstimatorId::LooraHt => {
            let fit = loora_ht_fit(s, rule)?;
            let r = ht_family(s, &fit.predictions, fit.tau);
            let n = s.n() as f64;
            (fit.tau, sum(r.iter().map(|v| v * v)) / (n * n), fit.lambda)
        }
        EstimatorId::Dm => {
            let tau = estimate_dm(s)?;
            (tau, dm_auxiliary_regression(&s.y, s.d())?.slope_variance, 0.0)
        }
        EstimatorId::LooraDm => {
            let fit = loora_dm_fit(s, rule)?;
            let u: Vec<f64> = s.y.iter().zip(&fit.predictions).map(|(y, p)| y - p).collect();
            (fit.tau, dm_auxiliary_regression(&u, s.d())?.slope_variance, fit.lambda)
        }
        EstimatorId::Adj | EstimatorId::Int | EstimatorId::RidgeReg => regression_hc0(s, id, rule)?,
    };
    if !(tau.is_finite() && var.is_finite()) {
        return Err(Error::Degenerate(format!("{id} produced a non-finite estimate")));
    }
    let (ci_low, ci_high) = confidence_interval(tau, var, level)?;
    Ok(EstimateReport {
        method: id,
        tau_hat: tau,
        var_hat: var,
        ci_low,
        ci_high,
        level,
        lambda_used: lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quantile_table() {
        assert_abs_diff_eq!(normal_quantile(0.975), 1.959_963_984_540_054, epsilon = 1e-12);
        assert_abs_diff_eq!(normal_quantile(0.5), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_quantile(0.841_344_746_068_542_9), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(normal_quantile(0.001), -3.090_232_306_167_813_5, epsilon = 1e-11);
        assert_abs_diff_eq!(normal_quantile(0.9995), 3.290_526_731_491_926, epsilon = 1e-10);
        assert!(normal_quantile(1.5).is_nan());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..2000 {
            let p = 0.0005 + 0.999 * i as f64 / 2000.0;
            let x = normal_quantile(p);
            let back = 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2);
            assert!((back - p).abs() < 1e-14, "p = {p}");
        }
    }

    #[test]
    fn intervals() {
        assert_eq!(confidence_interval(1.5, 0.0, 0.95).unwrap(), (1.5, 1.5));
        let (lo, hi) = confidence_interval(0.0, 1.0, 0.95).unwrap();
        assert_abs_diff_eq!(hi, 1.959_964, epsilon = 1e-5);
        assert_abs_diff_eq!(lo, -1.959_964, epsilon = 1e-5);
        let (lo, hi) = confidence_interval(2.0, 1.0, 0.682_689_5).unwrap();
        assert_abs_diff_eq!(hi - 2.0, 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(2.0 - lo, 1.0, epsilon = 1e-4);
        assert!(confidence_interval(0.0, -1.0, 0.95).is_err());
        assert!(confidence_interval(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn hand_auxiliary_regression() {
        let aux = dm_auxiliary_regression(&[2.0, 0.0, 1.0, 1.0], &[true, true, false, false]).unwrap();
        assert_abs_diff_eq!(aux.intercept, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(aux.slope, 0.0, epsilon = 1e-15);
        // residuals (1, -1, 0, 0): S_T / n_T^2 + S_C / n_C^2 = 2 / 4
        assert_abs_diff_eq!(aux.slope_variance, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn affine_outcomes_have_zero_variance() {
        let aux = dm_auxiliary_regression(&[3.0, 3.0, 1.0, 1.0, 1.0], &[true, true, false, false, false]).unwrap();
        assert_abs_diff_eq!(aux.slope, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(aux.slope_variance, 0.0, epsilon = 1e-30);
    }
}
