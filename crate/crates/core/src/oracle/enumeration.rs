use rayon::prelude::*;

use super::Population;
use crate::design::{enumerate_range, enumeration_size, Assignment, DesignSpec};
use crate::error::Result;
use crate::estimators::{estimate, EstimatorId, LambdaRule};
use crate::numeric::{sum, weighted_moments};

const CHUNK: u64 = 4096;

/// Exact first two moments over the assignment distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub count: u64,
    /// Total probability mass visited; one up to rounding.
    pub mass: f64,
}

/// Evaluates `f` on every assignment, returning `(value, probability)` in enumeration order.
///
/// Chunks run in parallel; results are concatenated in order so any later
/// reduction is independent of the thread count.
pub fn enumerate_values<F>(spec: &DesignSpec, f: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(&Assignment) -> Result<f64> + Sync,
{
    let total = enumeration_size(spec)?;
    let starts: Vec<u64> = (0..total).step_by(CHUNK as usize).collect();
    let chunks: Vec<Result<Vec<(f64, f64)>>> = starts
        .par_iter()
        .map(|&start| {
            enumerate_range(spec, start, start + CHUNK)?
                .map(|(a, p)| f(&a).map(|v| (v, p)))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(total as usize);
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

pub fn moments_of(values: &[(f64, f64)]) -> Moments {
    let v: Vec<f64> = values.iter().map(|x| x.0).collect();
    let w: Vec<f64> = values.iter().map(|x| x.1).collect();
    let (mean, variance) = weighted_moments(&v, &w);
    Moments {
        mean,
        variance,
        count: values.len() as u64,
        mass: sum(w.iter().copied()),
    }
}

/// Exact mean and variance of an estimator under `spec`.
pub fn enumeration_moments(
    pop: &Population,
    spec: &DesignSpec,
    estimator: EstimatorId,
    rule: LambdaRule,
) -> Result<Moments> {
    let values = enumerate_values(spec, |a| estimate(&pop.observe(spec, a)?, estimator, rule))?;
    Ok(moments_of(&values))
}
