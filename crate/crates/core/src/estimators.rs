//! Point estimators of the average treatment effect.
//!
//! `HT` and `LOORA_HT` need a simple design, the difference-in-means family
//! needs a complete design. The leave-one-out estimators come in two
//! implementations: the fast path uses one ridge factorization and the
//! leverage identity, while [`literal`] refits `n` times and is kept for
//! verification.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{Assignment, DesignSpec};
use crate::error::{Error, Result};
use crate::linalg::{leverage_regularizer, penalized_least_squares, DesignMatrix, PenalizedFit, RidgeSystem};
use crate::numeric::{all_finite, sum, Accumulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorId {
    #[serde(rename = "HT")]
    Ht,
    #[serde(rename = "DM")]
    Dm,
    #[serde(rename = "ADJ")]
    Adj,
    #[serde(rename = "INT")]
    Int,
    #[serde(rename = "RIDGE_REG")]
    RidgeReg,
    #[serde(rename = "LOORA_HT")]
    LooraHt,
    #[serde(rename = "LOORA_DM")]
    LooraDm,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 7] = [
        EstimatorId::Ht,
        EstimatorId::Dm,
        EstimatorId::Adj,
        EstimatorId::Int,
        EstimatorId::RidgeReg,
        EstimatorId::LooraHt,
        EstimatorId::LooraDm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorId::Ht => "HT",
            EstimatorId::Dm => "DM",
            EstimatorId::Adj => "ADJ",
            EstimatorId::Int => "INT",
            EstimatorId::RidgeReg => "RIDGE_REG",
            EstimatorId::LooraHt => "LOORA_HT",
            EstimatorId::LooraDm => "LOORA_DM",
        }
    }

    /// Whether the estimator is defined for simple designs (otherwise complete).
    pub fn wants_simple(self) -> bool {
        matches!(self, EstimatorId::Ht | EstimatorId::LooraHt)
    }

    /// Whether a lambda rule affects the estimate.
    pub fn uses_lambda(self) -> bool {
        matches!(self, EstimatorId::RidgeReg | EstimatorId::LooraHt | EstimatorId::LooraDm)
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        EstimatorId::ALL
            .into_iter()
            .find(|id| id.name() == norm)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method '{s}'")))
    }
}

/// How the ridge penalty is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum LambdaRule {
    Fixed(f64),
    /// `lambda = c ||X||_(2,inf)^2` on the matrix actually regressed.
    Auto(f64),
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Auto(2.0)
    }
}

impl LambdaRule {
    pub fn resolve(&self, x: &DesignMatrix) -> Result<f64> {
        match *self {
            LambdaRule::Fixed(v) if v.is_finite() && v >= 0.0 => Ok(v),
            LambdaRule::Fixed(v) => Err(Error::InvalidInput(format!("lambda must be nonnegative, got {v}"))),
            LambdaRule::Auto(c) => leverage_regularizer(x, c),
        }
    }
}

impl fmt::Display for LambdaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaRule::Fixed(v) => write!(f, "fixed:{v}"),
            LambdaRule::Auto(c) => write!(f, "auto:{c}"),
        }
    }
}

impl FromStr for LambdaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, val) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("lambda rule '{s}' is not fixed:<v> or auto:<c>")))?;
        let v: f64 = val
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad number in lambda rule '{s}'")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidInput(format!("lambda rule value must be nonnegative, got {v}")));
        }
        match kind.trim() {
            "fixed" => Ok(LambdaRule::Fixed(v)),
            "auto" => Ok(LambdaRule::Auto(v)),
            _ => Err(Error::InvalidInput(format!("unknown lambda rule '{kind}'"))),
        }
    }
}

/// What an analyst observes: covariates, realized outcomes, assignment and design.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSample {
    pub x: DesignMatrix,
    pub y: Vec<f64>,
    pub assignment: Assignment,
    pub spec: DesignSpec,
}

impl ObservedSample {
    pub fn new(x: DesignMatrix, y: Vec<f64>, assignment: Assignment, spec: DesignSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n();
        if x.nrows() != n || y.len() != n || assignment.n() != n {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: X has {} rows, y has {}, assignment has {}, design has {}",
                x.nrows(),
                y.len(),
                assignment.n(),
                n
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite outcome at row {i}")));
        }
        let check = Assignment::new(&spec, assignment.d.clone())?;
        if check.q != assignment.q {
            return Err(Error::InvalidInput("assignment is inconsistent with the design".into()));
        }
        Ok(Self { x, y, assignment, spec })
    }

    pub fn from_d(x: DesignMatrix, y: Vec<f64>, d: Vec<bool>, spec: DesignSpec) -> Result<Self> {
        let a = Assignment::new(&spec, d)?;
        Self::new(x, y, a, spec)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> &[bool] {
        &self.assignment.d
    }

    /// Reinterprets the sample under a complete design with the realized treated count.
    pub fn as_complete(&self) -> Result<Self> {
        let n_t = self.assignment.n_treated();
        let spec = DesignSpec::complete(self.n(), n_t)
            .map_err(|_| Error::Degenerate(format!("{n_t} of {} units treated", self.n())))?;
        Self::from_d(self.x.clone(), self.y.clone(), self.assignment.d.clone(), spec)
    }

    /// Reinterprets the sample under a simple design with probabilities `p`.
    pub fn as_simple(&self, p: Vec<f64>) -> Result<Self> {
        let spec = DesignSpec::simple(p)?;
        Self::from_d(self.x.clone(), self.y.clone(), self.assignment.d.clone(), spec)
    }

    pub fn with_covariates(&self, x: DesignMatrix) -> Result<Self> {
        Self::new(x, self.y.clone(), self.assignment.clone(), self.spec.clone())
    }

    fn simple_p(&self, who: EstimatorId) -> Result<&[f64]> {
        match &self.spec {
            DesignSpec::Simple { p } => Ok(p),
            _ => Err(Error::SpecMismatch {
                estimator: who,
                expected: "simple",
            }),
        }
    }

    fn complete_counts(&self, who: EstimatorId) -> Result<(usize, usize)> {
        match &self.spec {
            DesignSpec::Complete { n, n_t } => Ok((*n_t, n - n_t)),
            _ => Err(Error::SpecMismatch {
                estimator: who,
                expected: "complete",
            }),
        }
    }
}

/// A leave-one-out adjusted estimate with its per-unit predictions `x_i' beta_(-i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LooFit {
    pub tau: f64,
    pub lambda: f64,
    pub predictions: Vec<f64>,
}

pub fn estimate_ht(s: &ObservedSample) -> Result<f64> {
    let p = s.simple_p(EstimatorId::Ht)?;
    let n = s.n() as f64;
    Ok(sum(s.y.iter().zip(s.d()).zip(p).map(|((y, &d), p)| {
        if d {
            y / p
        } else {
            -y / (1.0 - p)
        }
    })) / n)
}

pub fn estimate_dm(s: &ObservedSample) -> Result<f64> {
    s.complete_counts(EstimatorId::Dm)?;
    Ok(group_mean_difference(&s.y, s.d()))
}

fn group_mean_difference(v: &[f64], d: &[bool]) -> f64 {
    let (mut t, mut c) = (Accumulator::new(), Accumulator::new());
    let (mut nt, mut nc) = (0usize, 0usize);
    for (x, &di) in v.iter().zip(d) {
        if di {
            t.add(*x);
            nt += 1;
        } else {
            c.add(*x);
            nc += 1;
        }
    }
    t.value() / nt as f64 - c.value() / nc as f64
}

/// `sqrt(p (1 - p))`, the row scale that turns `X` into `X~`.
pub fn ht_row_scale(p: &[f64]) -> Vec<f64> {
    p.iter().map(|p| (p * (1.0 - p)).sqrt()).collect()
}

/// `X~ = R^-1 X`.
pub fn ht_tilde_design(x: &DesignMatrix, p: &[f64]) -> Result<DesignMatrix> {
    let inv: Vec<f64> = ht_row_scale(p).iter().map(|r| 1.0 / r).collect();
    x.scale_rows(&inv)
}

/// Transformed outcomes `y~_i`, written per arm:
/// `sqrt(1 - p) / p^(3/2) y` when treated and `sqrt(p) / (1 - p)^(3/2) y` otherwise.
pub fn ht_tilde_outcomes(y: &[f64], d: &[bool], p: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(d)
        .zip(p)
        .map(|((y, &d), &p)| {
            if d {
                (1.0 - p).sqrt() / p.powf(1.5) * y
            } else {
                p.sqrt() / (1.0 - p).powf(1.5) * y
            }
        })
        .collect()
}

pub fn loora_ht_fit(s: &ObservedSample, rule: LambdaRule) -> Result<LooFit> {
    let p = s.simple_p(EstimatorId::LooraHt)?;
    let r = ht_row_scale(p);
    let xt = ht_tilde_design(&s.x, p)?;
    let lambda = rule.resolve(&xt)?;
    let yt = ht_tilde_outcomes(&s.y, s.d(), p);
    let sys = RidgeSystem::new(&xt, lambda)?;
    let loo = sys.loo_residuals(&yt)?;
    let predictions: Vec<f64> = (0..s.n()).map(|i| r[i] * (yt[i] - loo[i])).collect();
    let a = &s.assignment;
    let tau = sum((0..s.n()).map(|i| a.z[i] / a.q[i] * (s.y[i] - predictions[i]))) / s.n() as f64;
    Ok(LooFit {
        tau,
        lambda,
        predictions,
    })
}

pub fn estimate_loora_ht(s: &ObservedSample, rule: LambdaRule) -> Result<f64> {
    loora_ht_fit(s, rule).map(|f| f.tau)
}

/// Outcome vector regressed when adjusting a unit of the given arm.
///
/// For a treated unit the weights are `1 / (n_T (n_T - 1))` on treated entries and
/// `1 / n_C^2` on control entries, mirrored for a control unit, all times
/// `n_T n_C (n - 1) / n`. Own-arm weights are set to zero when that arm has a single
/// unit: the only such entry is the removed unit, which never enters its own fit.
pub fn dm_group_outcomes(y: &[f64], d: &[bool], treated_arm: bool) -> Vec<f64> {
    let n = y.len() as f64;
    let nt = d.iter().filter(|x| **x).count() as f64;
    let nc = n - nt;
    let scale = nt * nc * (n - 1.0) / n;
    let (w_t, w_c) = if treated_arm {
        (if nt >= 2.0 { 1.0 / (nt * (nt - 1.0)) } else { 0.0 }, 1.0 / (nc * nc))
    } else {
        (1.0 / (nt * nt), if nc >= 2.0 { 1.0 / (nc * (nc - 1.0)) } else { 0.0 })
    };
    y.iter()
        .zip(d)
        .map(|(y, &di)| scale * if di { w_t } else { w_c } * y)
        .collect()
}

pub fn loora_dm_fit(s: &ObservedSample, rule: LambdaRule) -> Result<LooFit> {
    s.complete_counts(EstimatorId::LooraDm)?;
    let lambda = rule.resolve(&s.x)?;
    let sys = RidgeSystem::new(&s.x, lambda)?;
    let d = s.d();
    let pred_t = sys.loo_predictions(&dm_group_outcomes(&s.y, d, true))?;
    let pred_c = sys.loo_predictions(&dm_group_outcomes(&s.y, d, false))?;
    let predictions: Vec<f64> = (0..s.n()).map(|i| if d[i] { pred_t[i] } else { pred_c[i] }).collect();
    let u: Vec<f64> = s.y.iter().zip(&predictions).map(|(y, m)| y - m).collect();
    Ok(LooFit {
        tau: group_mean_difference(&u, d),
        lambda,
        predictions,
    })
}

pub fn estimate_loora_dm(s: &ObservedSample, rule: LambdaRule) -> Result<f64> {
    loora_dm_fit(s, rule).map(|f| f.tau)
}

/// The leave-two-out pairwise form
/// `(n_T n_C)^-1 sum_{i<j} (d_i - d_j)(y_i - y_j - phi_ij)`.
///
/// Each `phi_ij` uses the ridge fits without unit `i` and without unit `j`, both
/// applied to the covariate sum over the remaining `n - 2` units. Those fits are
/// solved directly from `X'X + lambda I - x_i x_i'` rather than through the
/// leverage identity.
///
/// The representation needs two units in each arm: with a single treated unit,
/// every control unit's fit in the one-at-a-time form still uses that unit,
/// which no leave-two-out fit can.
pub fn estimate_loora_dm_pairwise(s: &ObservedSample, rule: LambdaRule) -> Result<f64> {
    let (nt, nc) = s.complete_counts(EstimatorId::LooraDm)?;
    if nt < 2 || nc < 2 {
        return Err(Error::ParameterOutOfRange(format!(
            "pairwise form needs at least two units per arm, got n_T = {nt}, n_C = {nc}"
        )));
    }
    let lambda = rule.resolve(&s.x)?;
    let xm = s.x.as_matrix();
    let (n, k) = xm.shape();
    let d = s.d();
    let nf = n as f64;
    let (ntf, ncf) = (nt as f64, nc as f64);
    let w_t = ncf * (nf - 1.0) / ((ntf - 1.0) * nf);
    let w_c = ntf * (nf - 1.0) / ((ncf - 1.0) * nf);
    let yt: Vec<f64> = (0..n).map(|i| s.y[i] * if d[i] { w_t } else { w_c }).collect();

    let mut a = xm.tr_mul(xm);
    for j in 0..k {
        a[(j, j)] += lambda;
    }
    let mut u: Vec<DVector<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let xi = xm.row(i).transpose();
        let ai = &a - &xi * xi.transpose();
        let chol = ai.cholesky().ok_or(Error::LeverageSingular {
            row: i,
            leverage: f64::NAN,
        })?;
        u.push(chol.solve(&xi));
    }
    let total: DVector<f64> = xm.tr_mul(&DVector::from_column_slice(&yt));

    let mut acc = Accumulator::new();
    for i in (0..n).filter(|&i| d[i]) {
        for j in (0..n).filter(|&j| !d[j]) {
            let rest = &total - xm.row(i).transpose() * yt[i] - xm.row(j).transpose() * yt[j];
            let phi = u[i].dot(&rest) - u[j].dot(&rest);
            acc.add(s.y[i] - s.y[j] - phi);
        }
    }
    Ok(acc.value() / (ntf * ncf))
}

/// Regression benchmark fit: design, coefficients, bread and the penalty used.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub tau: f64,
    pub lambda: f64,
    pub design: DMatrix<f64>,
    pub fit: PenalizedFit,
}

/// Column index of the treatment indicator in every benchmark design.
pub const TREATMENT_COLUMN: usize = 1;

pub fn regression_fit(s: &ObservedSample, id: EstimatorId, rule: LambdaRule) -> Result<RegressionFit> {
    s.complete_counts(id)?;
    let x = s.x.as_matrix();
    let (n, k) = x.shape();
    let d: Vec<f64> = s.d().iter().map(|&b| b as u8 as f64).collect();
    let (design, lambda) = match id {
        EstimatorId::Adj | EstimatorId::RidgeReg => {
            let m = DMatrix::from_fn(n, k + 2, |i, j| match j {
                0 => 1.0,
                1 => d[i],
                _ => x[(i, j - 2)],
            });
            let lambda = if id == EstimatorId::RidgeReg { rule.resolve(&s.x)? } else { 0.0 };
            (m, lambda)
        }
        EstimatorId::Int => {
            let xc = s.x.centered();
            let m = DMatrix::from_fn(n, 2 * k + 2, |i, j| match j {
                0 => 1.0,
                1 => d[i],
                j if j < k + 2 => xc[(i, j - 2)],
                j => d[i] * xc[(i, j - k - 2)],
            });
            (m, 0.0)
        }
        other => {
            return Err(Error::InvalidInput(format!("{other} is not a regression benchmark")));
        }
    };
    let mut penalty = vec![lambda; design.ncols()];
    penalty[0] = 0.0;
    penalty[TREATMENT_COLUMN] = 0.0;
    let fit = penalized_least_squares(&design, &s.y, &penalty)?;
    Ok(RegressionFit {
        tau: fit.beta[TREATMENT_COLUMN],
        lambda,
        design,
        fit,
    })
}

pub fn estimate_adj(s: &ObservedSample) -> Result<f64> {
    regression_fit(s, EstimatorId::Adj, LambdaRule::Fixed(0.0)).map(|f| f.tau)
}

pub fn estimate_int(s: &ObservedSample) -> Result<f64> {
    regression_fit(s, EstimatorId::Int, LambdaRule::Fixed(0.0)).map(|f| f.tau)
}

pub fn estimate_ridge_reg(s: &ObservedSample, rule: LambdaRule) -> Result<f64> {
    regression_fit(s, EstimatorId::RidgeReg, rule).map(|f| f.tau)
}

/// HT applied to `y - X b` for a fixed, outcome-independent `b`.
pub fn estimate_ht_fixed_adjustment(s: &ObservedSample, b: &[f64]) -> Result<f64> {
    let adjusted = fixed_residuals(s, b)?;
    estimate_ht(&ObservedSample { y: adjusted, ..s.clone() })
}

/// DM applied to `y - X b` for a fixed, outcome-independent `b`.
pub fn estimate_dm_fixed_adjustment(s: &ObservedSample, b: &[f64]) -> Result<f64> {
    let adjusted = fixed_residuals(s, b)?;
    estimate_dm(&ObservedSample { y: adjusted, ..s.clone() })
}

fn fixed_residuals(s: &ObservedSample, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != s.x.ncols() {
        return Err(Error::InvalidInput(format!(
            "coefficient vector has {} entries, X has {} columns",
            b.len(),
            s.x.ncols()
        )));
    }
    let xb = s.x.as_matrix() * DVector::from_column_slice(b);
    Ok(s.y.iter().zip(xb.iter()).map(|(y, f)| y - f).collect())
}

/// Dispatches on the estimator id.
pub fn estimate(s: &ObservedSample, id: EstimatorId, rule: LambdaRule) -> Result<f64> {
    let tau = match id {
        EstimatorId::Ht => estimate_ht(s)?,
        EstimatorId::Dm => estimate_dm(s)?,
        EstimatorId::Adj => estimate_adj(s)?,
        EstimatorId::Int => estimate_int(s)?,
        EstimatorId::RidgeReg => estimate_ridge_reg(s, rule)?,
        EstimatorId::LooraHt => estimate_loora_ht(s, rule)?,
        EstimatorId::LooraDm => estimate_loora_dm(s, rule)?,
    };
    if !tau.is_finite() {
        return Err(Error::Degenerate(format!("{id} produced a non-finite estimate")));
    }
    Ok(tau)
}

/// Reference implementations that refit the ridge regression once per unit.
pub mod literal {
    use super::*;
    use crate::linalg::ridge_fit;

    /// `y~_i = q_i^-1 ((1 - p_i) / p_i)^(z_i / 2) y_i`.
    pub fn ht_tilde_outcomes_exponent(y: &[f64], a: &Assignment, p: &[f64]) -> Vec<f64> {
        (0..y.len())
            .map(|i| ((1.0 - p[i]) / p[i]).powf(a.z[i] / 2.0) / a.q[i] * y[i])
            .collect()
    }

    pub fn loora_ht(s: &ObservedSample, rule: LambdaRule) -> Result<f64> {
        let p = s.simple_p(EstimatorId::LooraHt)?;
        let xt = ht_tilde_design(&s.x, p)?;
        let lambda = rule.resolve(&xt)?;
        let yt = ht_tilde_outcomes_exponent(&s.y, &s.assignment, p);
        let n = s.n();
        let mut acc = Accumulator::new();
        for i in 0..n {
            let xi = xt.without_rows(&[i])?;
            let yi: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| yt[j]).collect();
            let beta = ridge_fit(&xi, &yi, lambda, false)?.beta;
            let pred: f64 = s.x.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let a = &s.assignment;
            acc.add(a.z[i] / a.q[i] * (s.y[i] - pred));
        }
        Ok(acc.value() / n as f64)
    }

    pub fn loora_dm(s: &ObservedSample, rule: LambdaRule) -> Result<f64> {
        let (nt, nc) = s.complete_counts(EstimatorId::LooraDm)?;
        let lambda = rule.resolve(&s.x)?;
        let n = s.n();
        let d = s.d();
        let (nf, ntf, ncf) = (n as f64, nt as f64, nc as f64);
        let scale = ntf * ncf * (nf - 1.0) / nf;
        let mut acc = Accumulator::new();
        for i in 0..n {
            let rest: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            // Only the n - 1 retained weights are formed; the own-arm weight with
            // denominator n_T - 1 (or n_C - 1) exists only when that arm has another unit.
            let yi: Vec<f64> = rest
                .iter()
                .map(|&j| {
                    let f = match (d[i], d[j]) {
                        (true, true) => 1.0 / (ntf * (ntf - 1.0)),
                        (true, false) => 1.0 / (ncf * ncf),
                        (false, true) => 1.0 / (ntf * ntf),
                        (false, false) => 1.0 / (ncf * (ncf - 1.0)),
                    };
                    scale * f * s.y[j]
                })
                .collect();
            debug_assert!(all_finite(&yi));
            let xi = s.x.without_rows(&[i])?;
            let beta = ridge_fit(&xi, &yi, lambda, false)?.beta;
            let pred: f64 = s.x.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let (v, z) = if d[i] { (1.0 / ntf, 1.0) } else { (1.0 / ncf, -1.0) };
            acc.add(v * z * (s.y[i] - pred));
        }
        Ok(acc.value())
    }
}
