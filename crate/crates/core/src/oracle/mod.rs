//! Ground-truth quantities that need both potential outcomes.
//!
//! Closed-form finite-population variances for the unadjusted, fixed-adjustment
//! and leave-one-out adjusted estimators under both designs, the asymptotic
//! variance of the interacted regression estimator, and exact moments by
//! enumerating every assignment.

mod dm;
mod enumeration;
mod ht;
mod lin;

pub use dm::{
    dm_adjusted_variance, dm_projection_minimum, dm_q_blocks, dm_variance, dm_variance_neyman,
    loora_dm_variance, loora_dm_variance_terms, DmSignal, DmVarianceOptions, DmVarianceTerms, QFault,
    Q_MATERIALIZE_MAX_N,
};
pub use enumeration::{enumerate_values, enumeration_moments, moments_of, Moments};
pub use ht::{
    adjusted_ht_optimal, adjusted_ht_variance, ht_variance, loora_ht_variance, loora_ht_variance_terms,
    HtSignal, HtVarianceTerms,
};
pub use lin::{lin_asymptotic_variance, LinVariance};

use crate::design::{Assignment, DesignSpec};
use crate::error::{Error, Result};
use crate::estimators::ObservedSample;
use crate::linalg::DesignMatrix;
use crate::numeric::{all_finite, mean};

/// A finite population: covariates and both potential outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub x: DesignMatrix,
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
}

impl Population {
    pub fn new(x: DesignMatrix, y1: Vec<f64>, y0: Vec<f64>) -> Result<Self> {
        let n = x.nrows();
        if y1.len() != n || y0.len() != n {
            return Err(Error::InvalidInput(format!(
                "potential outcome lengths {} and {} do not match {n} covariate rows",
                y1.len(),
                y0.len()
            )));
        }
        if !all_finite(&y1) || !all_finite(&y0) {
            return Err(Error::InvalidInput("non-finite potential outcome".into()));
        }
        Ok(Self { x, y1, y0 })
    }

    pub fn n(&self) -> usize {
        self.y1.len()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    /// Average treatment effect.
    pub fn tau(&self) -> f64 {
        let diff: Vec<f64> = self.y1.iter().zip(&self.y0).map(|(a, b)| a - b).collect();
        mean(&diff)
    }

    /// Observed outcomes `d y1 + (1 - d) y0`.
    pub fn outcomes(&self, d: &[bool]) -> Vec<f64> {
        d.iter()
            .enumerate()
            .map(|(i, &di)| if di { self.y1[i] } else { self.y0[i] })
            .collect()
    }

    pub fn observe(&self, spec: &DesignSpec, assignment: &Assignment) -> Result<ObservedSample> {
        ObservedSample::new(self.x.clone(), self.outcomes(&assignment.d), assignment.clone(), spec.clone())
    }

    pub fn with_covariates(&self, x: DesignMatrix) -> Result<Self> {
        Self::new(x, self.y1.clone(), self.y0.clone())
    }
}
