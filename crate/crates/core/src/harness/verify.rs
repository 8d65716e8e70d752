//! Self-checks runnable from the command line.
//!
//! Each check compares a fast or closed-form computation with a brute-force
//! counterpart on seeded fixtures and reports the worst discrepancy seen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};

use super::HarnessError;
use crate::design::DesignSpec;
use crate::error::Result;
use crate::estimators::{estimate_loora_dm, estimate_loora_dm_pairwise, estimate_loora_ht, ht_tilde_design, literal, EstimatorId, LambdaRule};
use crate::linalg::{leverage_regularizer, ridge_fit, DesignMatrix};
use crate::oracle::{
    enumeration_moments, lin_asymptotic_variance, loora_dm_variance_terms, loora_ht_variance, DmVarianceOptions, Population, QFault,
};
use crate::simulation::{run_study, synth_population, PopulationKind, Reps, StudyConfig, StudyDesign};

pub const DEFAULT_CHECKS: [&str; 8] = [
    "unbiasedness",
    "ht-exact-variance",
    "loora-dm-exact-variance",
    "loo-identity",
    "leverage-bound",
    "leave-two-out",
    "ridge-monotonicity",
    "frobenius-bound",
];

pub const ALL_CHECKS: [&str; 9] = [
    "unbiasedness",
    "ht-exact-variance",
    "loora-dm-exact-variance",
    "loo-identity",
    "leverage-bound",
    "leave-two-out",
    "ridge-monotonicity",
    "frobenius-bound",
    "lin-equivalence",
];

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub checks: Vec<String>,
    pub n: usize,
    pub reps: u64,
    pub seed: u64,
    /// Perturb one entry of the pattern-moment matrix in the exact DM variance.
    pub q_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            checks: Vec::new(),
            n: 5000,
            reps: 5000,
            seed: 0,
            q_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, discrepancy: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            discrepancy,
            tolerance,
            passed: discrepancy <= tolerance,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn fixture(seed: u64, n: usize, k: usize) -> Result<Population> {
    synth_population(PopulationKind::LinearHeterogeneous, n, k, seed)
}

fn probabilities(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(0.2..0.8)).collect()
}

fn small_fixtures(seed: u64) -> impl Iterator<Item = (u64, usize, usize)> {
    (0..24u64).map(move |i| (seed.wrapping_mul(1000).wrapping_add(i), 4 + (i as usize % 4), 1 + (i as usize / 4) % 2))
}

fn unbiasedness(seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    for (s, n, k) in small_fixtures(seed) {
        let pop = fixture(s, n, k)?;
        let scale = pop.tau().abs().max(1.0);
        let simple = DesignSpec::simple(probabilities(&mut r, n))?;
        let complete = DesignSpec::complete(n, n / 2)?;
        for (spec, id) in [(&simple, EstimatorId::LooraHt), (&complete, EstimatorId::LooraDm)] {
            let m = enumeration_moments(&pop, spec, id, LambdaRule::Auto(2.0))?;
            worst = worst.max((m.mean - pop.tau()).abs() / scale);
        }
    }
    Ok(worst)
}

fn ht_exact_variance(seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for (s, n, k) in small_fixtures(seed) {
        let pop = fixture(s, n, k)?;
        let p = probabilities(&mut r, n);
        let spec = DesignSpec::simple(p.clone())?;
        let xt = ht_tilde_design(&pop.x, &p)?;
        for rule in [LambdaRule::Fixed(0.0), LambdaRule::Auto(2.0)] {
            let lam = rule.resolve(&xt)?;
            if lam == 0.0 && n <= k + 1 {
                continue;
            }
            let m = enumeration_moments(&pop, &spec, EstimatorId::LooraHt, LambdaRule::Fixed(lam))?;
            worst = worst.max(rel(loora_ht_variance(&pop, &p, lam)?, m.variance));
        }
    }
    Ok(worst)
}

fn dm_exact_variance(seed: u64, q_fault: bool) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let opts = DmVarianceOptions { allow_n4: true };
    let fault = q_fault.then_some(QFault {
        block: (1, 0),
        j: 0,
        l: 1,
        delta: 0.25,
    });
    for (s, n, k) in small_fixtures(seed) {
        let pop = fixture(s, n, k)?;
        for nt in 2..=n - 2 {
            let spec = DesignSpec::complete(n, nt)?;
            for rule in [LambdaRule::Fixed(0.0), LambdaRule::Auto(2.0)] {
                let lam = rule.resolve(&pop.x)?;
                if lam == 0.0 && n <= k + 2 {
                    continue;
                }
                let m = enumeration_moments(&pop, &spec, EstimatorId::LooraDm, LambdaRule::Fixed(lam))?;
                let v = loora_dm_variance_terms(&pop, nt, lam, opts, fault)?.total();
                worst = worst.max(rel(v, m.variance));
            }
        }
    }
    Ok(worst)
}

fn loo_identity(seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x100);
    for i in 0..20usize {
        let n = 10 + i * 50 / 19;
        let k = 1 + i % 8;
        let pop = fixture(seed + i as u64, n, k)?;
        let p = probabilities(&mut r, n);
        let simple = DesignSpec::simple(p.clone())?;
        let d: Vec<bool> = p.iter().map(|&pi| r.random::<f64>() < pi).collect();
        let s = pop.observe(&simple, &crate::design::Assignment::new(&simple, d)?)?;
        let a = estimate_loora_ht(&s, LambdaRule::Auto(2.0))?;
        worst = worst.max((a - literal::loora_ht(&s, LambdaRule::Auto(2.0))?).abs() / (1.0 + a.abs()));

        let complete = DesignSpec::complete(n, n / 2)?;
        let s = pop.observe(&complete, &crate::design::draw_with(&complete, &mut r)?)?;
        let a = estimate_loora_dm(&s, LambdaRule::Auto(2.0))?;
        worst = worst.max((a - literal::loora_dm(&s, LambdaRule::Auto(2.0))?).abs() / (1.0 + a.abs()));
    }
    Ok(worst)
}

fn heavy_matrix(r: &mut ChaCha8Rng, n: usize, k: usize) -> Result<DesignMatrix> {
    let t = StudentT::new(2.0).expect("valid degrees of freedom");
    let mut data = Vec::with_capacity(n * k);
    for _ in 0..n {
        let scale = (2.0 * r.sample::<f64, _>(StandardNormal)).exp();
        data.extend((0..k).map(|_| scale * r.sample(t)));
    }
    DesignMatrix::from_row_major(n, k, &data)
}

fn leverage_bound(seed: u64) -> Result<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x200);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let n = r.random_range(3..=20);
        let k = r.random_range(1..=6);
        let x = heavy_matrix(&mut r, n, k)?;
        for c in [0.5, 1.0, 2.0, 5.0] {
            let h = ridge_fit(&x, &vec![0.0; n], leverage_regularizer(&x, c)?, false)?.hat_diag;
            worst = worst.max(h.iter().copied().fold(f64::MIN, f64::max) - 1.0 / (1.0 + c));
        }
    }
    Ok(worst.max(0.0))
}

fn leave_two_out(seed: u64) -> Result<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x300);
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let n = r.random_range(5..=30);
        let k = r.random_range(1..=4);
        let nt = r.random_range(2..=n - 2);
        let pop = fixture(seed + 7 * i, n, k)?;
        let spec = DesignSpec::complete(n, nt)?;
        let s = pop.observe(&spec, &crate::design::draw_with(&spec, &mut r)?)?;
        let a = estimate_loora_dm(&s, LambdaRule::Auto(2.0))?;
        let b = estimate_loora_dm_pairwise(&s, LambdaRule::Auto(2.0))?;
        worst = worst.max((a - b).abs() / (1.0 + a.abs()));
    }
    Ok(worst)
}

fn gaussian(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

/// Largest relative increase of the ridge residual norm as lambda decreases.
fn ridge_monotonicity(seed: u64) -> Result<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x400);
    let grid = [1e-6, 1e-3, 0.1, 1.0, 10.0, 1e3];
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(3..=15);
        let k = r.random_range(1..=5);
        let x = DesignMatrix::from_row_major(n, k, &gaussian(&mut r, n * k))?;
        let v = gaussian(&mut r, n);
        let mut prev: Option<f64> = None;
        for &l in &grid {
            let fit = ridge_fit(&x, &v, l, false)?;
            let f = x.as_matrix() * &fit.beta;
            let norm: f64 = v.iter().zip(f.iter()).map(|(a, b)| (a - b).powi(2)).sum();
            if let Some(p) = prev {
                worst = worst.max((p - norm) / norm.max(1e-300));
            }
            prev = Some(norm);
        }
    }
    Ok(worst.max(0.0))
}

/// Largest excess of the off-diagonal hat mass over `k / 2`.
fn frobenius_bound(seed: u64) -> Result<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x500);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = r.random_range(2..=20);
        let k = r.random_range(1..=6);
        let lam = r.random_range(0.0..10.0) + if n <= k { 0.1 } else { 0.0 };
        let x = DesignMatrix::from_row_major(n, k, &gaussian(&mut r, n * k))?;
        let h = ridge_fit(&x, &vec![0.0; n], lam, true)?.hat_full.expect("requested");
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += h[(i, j)].powi(2);
            }
        }
        worst = worst.max(s - k as f64 / 2.0);
    }
    Ok(worst.max(0.0))
}

/// Monte Carlo variance of `sqrt(n) (tau_hat - tau)` against the interacted-regression
/// asymptotic variance, for both leave-one-out estimators.
pub fn lin_equivalence(n: usize, reps: u64, seed: u64) -> Result<f64> {
    let pop = synth_population(PopulationKind::LinearHeterogeneous, n, 5, seed)?;
    let target = lin_asymptotic_variance(&pop, 0.5)?.value;
    let mut worst: f64 = 0.0;
    for (design, method) in [
        (StudyDesign::SimpleHalf, EstimatorId::LooraHt),
        (StudyDesign::Complete { n_t: n / 2 }, EstimatorId::LooraDm),
    ] {
        let cfg = StudyConfig {
            design,
            methods: vec![method],
            reps: Reps::Count(reps),
            seed,
            ..StudyConfig::default()
        };
        let rep = run_study(&pop, &cfg)?;
        let emp = n as f64 * rep.methods[0].std.powi(2);
        worst = worst.max((emp / target - 1.0).abs());
    }
    Ok(worst)
}

pub fn run_check(name: &str, opts: &VerifyOptions) -> std::result::Result<CheckResult, HarnessError> {
    let s = opts.seed;
    let (d, tol) = match name {
        "unbiasedness" => (unbiasedness(s)?, 1e-11),
        "ht-exact-variance" => (ht_exact_variance(s)?, 1e-9),
        "loora-dm-exact-variance" => (dm_exact_variance(s, opts.q_fault)?, 1e-9),
        "loo-identity" => (loo_identity(s)?, 1e-9),
        "leverage-bound" => (leverage_bound(s)?, 1e-12),
        "leave-two-out" => (leave_two_out(s)?, 1e-9),
        "ridge-monotonicity" => (ridge_monotonicity(s)?, 1e-12),
        "frobenius-bound" => (frobenius_bound(s)?, 1e-10),
        "lin-equivalence" => (lin_equivalence(opts.n, opts.reps, s)?, 0.05),
        other => {
            return Err(HarnessError::Schema(format!(
                "unknown check '{other}'; available: {}",
                ALL_CHECKS.join(", ")
            )))
        }
    };
    Ok(CheckResult::new(name, d, tol))
}

pub fn run_checks(opts: &VerifyOptions) -> std::result::Result<Vec<CheckResult>, HarnessError> {
    let names: Vec<String> = if opts.checks.is_empty() {
        DEFAULT_CHECKS.iter().map(|s| s.to_string()).collect()
    } else {
        opts.checks.clone()
    };
    names.iter().map(|n| run_check(n, opts)).collect()
}
