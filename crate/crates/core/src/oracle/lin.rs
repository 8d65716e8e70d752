use super::Population;
use crate::error::{Error, Result};
use crate::linalg::penalized_least_squares;
use crate::numeric::{dot, mean};

/// Asymptotic variance of the interacted regression estimator, at finite `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinVariance {
    /// `((1-p)/p) s_T^2 + (p/(1-p)) s_C^2 + 2 s_TC`.
    pub value: f64,
    /// `n^-1 ||(X - Xbar) b* - (mu - mean mu)||^2`, algebraically equal to `value`.
    pub projection: f64,
    pub sigma_t2: f64,
    pub sigma_c2: f64,
    pub sigma_tc: f64,
}

fn centered_residuals(pop: &Population, v: &[f64]) -> Result<Vec<f64>> {
    let xc = pop.x.centered();
    let m = mean(v);
    let vc: Vec<f64> = v.iter().map(|x| x - m).collect();
    let fit = penalized_least_squares(&xc, &vc, &vec![0.0; pop.k()])?;
    Ok(fit.residuals)
}

pub fn lin_asymptotic_variance(pop: &Population, p_t: f64) -> Result<LinVariance> {
    if !(p_t > 0.0 && p_t < 1.0) {
        return Err(Error::ParameterOutOfRange(format!("treated fraction {p_t} outside (0, 1)")));
    }
    let n = pop.n() as f64;
    let et = centered_residuals(pop, &pop.y1)?;
    let ec = centered_residuals(pop, &pop.y0)?;
    let sigma_t2 = dot(&et, &et) / n;
    let sigma_c2 = dot(&ec, &ec) / n;
    let sigma_tc = dot(&et, &ec) / n;
    let value = (1.0 - p_t) / p_t * sigma_t2 + p_t / (1.0 - p_t) * sigma_c2 + 2.0 * sigma_tc;

    let (a, b) = (((1.0 - p_t) / p_t).sqrt(), (p_t / (1.0 - p_t)).sqrt());
    let mu: Vec<f64> = (0..pop.n()).map(|i| a * pop.y1[i] + b * pop.y0[i]).collect();
    let e = centered_residuals(pop, &mu)?;
    let projection = dot(&e, &e) / n;
    Ok(LinVariance {
        value,
        projection,
        sigma_t2,
        sigma_c2,
        sigma_tc,
    })
}
