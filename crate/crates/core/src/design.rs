//! Treatment assignment mechanisms.
//!
//! Two designs: simple random assignment (independent Bernoulli draws with
//! unit-specific probabilities) and complete random assignment (a uniformly
//! random treated subset of fixed size). Each can be sampled from a seed or
//! enumerated exhaustively for exact expectations.
//!
//! Enumeration order is lexicographic in `d` with unit 0 as the most
//! significant position, so `00, 01, 10, 11` for two units.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::binomial;

/// Largest unit count accepted for simple-design enumeration.
pub const MAX_SIMPLE_ENUMERATION_N: usize = 20;
/// Largest number of subsets accepted for complete-design enumeration.
pub const MAX_COMPLETE_ENUMERATION: u128 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum DesignSpec {
    Simple { p: Vec<f64> },
    Complete { n: usize, n_t: usize },
}

impl DesignSpec {
    pub fn simple(p: Vec<f64>) -> Result<Self> {
        let s = DesignSpec::Simple { p };
        s.validate()?;
        Ok(s)
    }

    pub fn simple_uniform(n: usize, p: f64) -> Result<Self> {
        Self::simple(vec![p; n])
    }

    pub fn complete(n: usize, n_t: usize) -> Result<Self> {
        let s = DesignSpec::Complete { n, n_t };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DesignSpec::Simple { p } => {
                if p.is_empty() {
                    return Err(Error::InvalidSpec("no units".into()));
                }
                if let Some(i) = p.iter().position(|pi| !(*pi > 0.0 && *pi < 1.0)) {
                    return Err(Error::InvalidSpec(format!(
                        "probability for unit {i} is {}, must lie strictly inside (0, 1)",
                        p[i]
                    )));
                }
            }
            DesignSpec::Complete { n, n_t } => {
                if *n < 2 || *n_t < 1 || *n_t >= *n {
                    return Err(Error::InvalidSpec(format!(
                        "complete design needs 1 <= n_T <= n - 1, got n = {n}, n_T = {n_t}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        match self {
            DesignSpec::Simple { p } => p.len(),
            DesignSpec::Complete { n, .. } => *n,
        }
    }

    pub fn is_simple(&self) -> bool {
        matches!(self, DesignSpec::Simple { .. })
    }

    /// `min_i min(p_i, 1 - p_i)`; for complete designs uses `n_T / n`.
    pub fn min_probability(&self) -> f64 {
        match self {
            DesignSpec::Simple { p } => p.iter().map(|pi| pi.min(1.0 - pi)).fold(1.0, f64::min),
            DesignSpec::Complete { n, n_t } => {
                let f = *n_t as f64 / *n as f64;
                f.min(1.0 - f)
            }
        }
    }

    /// Marginal treatment probabilities.
    pub fn marginal_probabilities(&self) -> Vec<f64> {
        match self {
            DesignSpec::Simple { p } => p.clone(),
            DesignSpec::Complete { n, n_t } => vec![*n_t as f64 / *n as f64; *n],
        }
    }

    /// Number of assignments with positive probability.
    pub fn assignment_count(&self) -> u128 {
        match self {
            DesignSpec::Simple { p } => {
                if p.len() >= 128 {
                    u128::MAX
                } else {
                    1u128 << p.len()
                }
            }
            DesignSpec::Complete { n, n_t } => binomial(*n as u64, *n_t as u64),
        }
    }
}

/// A realized assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub d: Vec<bool>,
    /// `2 d - 1`.
    pub z: Vec<f64>,
    /// Probability of the realized arm, `p_i d_i + (1 - p_i)(1 - d_i)`.
    pub q: Vec<f64>,
}

impl Assignment {
    /// Builds the assignment and checks it is feasible under `spec`.
    pub fn new(spec: &DesignSpec, d: Vec<bool>) -> Result<Self> {
        if d.len() != spec.n() {
            return Err(Error::InvalidInput(format!(
                "assignment has {} units, design has {}",
                d.len(),
                spec.n()
            )));
        }
        if let DesignSpec::Complete { n_t, .. } = spec {
            let got = d.iter().filter(|x| **x).count();
            if got != *n_t {
                return Err(Error::InvalidSpec(format!(
                    "assignment treats {got} units, complete design fixes n_T = {n_t}"
                )));
            }
        }
        let p = spec.marginal_probabilities();
        let z = d.iter().map(|&di| if di { 1.0 } else { -1.0 }).collect();
        let q = d
            .iter()
            .zip(&p)
            .map(|(&di, &pi)| if di { pi } else { 1.0 - pi })
            .collect();
        Ok(Self { d, z, q })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn n_treated(&self) -> usize {
        self.d.iter().filter(|x| **x).count()
    }
}

/// Draws one assignment, deterministic in `seed`.
pub fn draw(spec: &DesignSpec, seed: u64) -> Result<Assignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_with(spec, &mut rng)
}

pub fn draw_with<R: Rng + ?Sized>(spec: &DesignSpec, rng: &mut R) -> Result<Assignment> {
    spec.validate()?;
    let d = match spec {
        DesignSpec::Simple { p } => p.iter().map(|&pi| rng.random::<f64>() < pi).collect(),
        DesignSpec::Complete { n, n_t } => {
            let mut d = vec![false; *n];
            for i in index::sample(rng, *n, *n_t) {
                d[i] = true;
            }
            d
        }
    };
    Assignment::new(spec, d)
}

/// Probability of a full assignment vector under `spec`.
pub fn assignment_probability(spec: &DesignSpec, d: &[bool]) -> f64 {
    match spec {
        DesignSpec::Simple { p } => d
            .iter()
            .zip(p)
            .map(|(&di, &pi)| if di { pi } else { 1.0 - pi })
            .product(),
        DesignSpec::Complete { n_t, .. } => {
            if d.iter().filter(|x| **x).count() == *n_t {
                1.0 / spec.assignment_count() as f64
            } else {
                0.0
            }
        }
    }
}

/// Checks the enumeration guard rails and returns the assignment count.
pub fn enumeration_size(spec: &DesignSpec) -> Result<u64> {
    spec.validate()?;
    match spec {
        DesignSpec::Simple { p } if p.len() > MAX_SIMPLE_ENUMERATION_N => Err(Error::TooLarge {
            count: spec.assignment_count(),
            limit: 1u128 << MAX_SIMPLE_ENUMERATION_N,
        }),
        DesignSpec::Complete { .. } if spec.assignment_count() > MAX_COMPLETE_ENUMERATION => {
            Err(Error::TooLarge {
                count: spec.assignment_count(),
                limit: MAX_COMPLETE_ENUMERATION,
            })
        }
        _ => Ok(spec.assignment_count() as u64),
    }
}

/// The assignment at position `rank` of the lexicographic enumeration.
pub fn unrank(spec: &DesignSpec, rank: u64) -> Vec<bool> {
    let n = spec.n();
    match spec {
        DesignSpec::Simple { .. } => (0..n).map(|i| (rank >> (n - 1 - i)) & 1 == 1).collect(),
        DesignSpec::Complete { n_t, .. } => {
            let mut d = vec![false; n];
            let mut rank = rank as u128;
            let mut ones = *n_t;
            for (i, di) in d.iter_mut().enumerate() {
                if ones == 0 {
                    break;
                }
                let with_zero = binomial((n - i - 1) as u64, ones as u64);
                if rank >= with_zero {
                    *di = true;
                    rank -= with_zero;
                    ones -= 1;
                }
            }
            d
        }
    }
}

/// Iterator over every assignment with its probability, in lexicographic order.
pub struct Enumeration {
    spec: DesignSpec,
    next: u64,
    end: u64,
}

impl Iterator for Enumeration {
    type Item = (Assignment, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.end {
            return None;
        }
        let d = unrank(&self.spec, self.next);
        self.next += 1;
        let prob = assignment_probability(&self.spec, &d);
        let a = Assignment::new(&self.spec, d).expect("enumerated assignment is feasible");
        Some((a, prob))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

pub fn enumerate(spec: &DesignSpec) -> Result<Enumeration> {
    let end = enumeration_size(spec)?;
    Ok(Enumeration {
        spec: spec.clone(),
        next: 0,
        end,
    })
}

/// Enumeration restricted to ranks `[start, end)`, for parallel chunks.
pub fn enumerate_range(spec: &DesignSpec, start: u64, end: u64) -> Result<Enumeration> {
    let total = enumeration_size(spec)?;
    Ok(Enumeration {
        spec: spec.clone(),
        next: start.min(total),
        end: end.min(total),
    })
}
