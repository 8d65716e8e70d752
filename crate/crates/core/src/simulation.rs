//! Monte Carlo evaluation of estimators on a fixed population.
//!
//! Replicate `r` draws its assignment from a ChaCha8 stream keyed by
//! `(seed, r)`, so results do not depend on how replicates are scheduled.
//! Per-replicate outcomes are collected in replicate order and reduced
//! sequentially with compensated sums, which makes reports bit-identical for
//! any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{draw_with, enumeration_size, unrank, assignment_probability, Assignment, DesignSpec};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorId, LambdaRule, ObservedSample};
use crate::inference::estimate_report;
use crate::linalg::{DesignMatrix, RidgeSystem};
use crate::numeric::Accumulator;
use crate::oracle::Population;

/// Stream reserved for study-level draws such as the probability direction.
pub const STUDY_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StudyDesign {
    /// Simple assignment with every probability one half.
    SimpleHalf,
    /// Simple assignment with probabilities tied to covariate direction.
    SimpleCorrelated,
    /// Complete assignment of `n_t` treated units.
    Complete { n_t: usize },
}

impl StudyDesign {
    pub fn label(&self) -> String {
        match self {
            StudyDesign::SimpleHalf => "simple-half".into(),
            StudyDesign::SimpleCorrelated => "simple-covariate-correlated".into(),
            StudyDesign::Complete { n_t } => format!("complete-{n_t}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reps {
    Count(u64),
    /// Every assignment once, weighted by its probability.
    Enumerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub design: StudyDesign,
    pub methods: Vec<EstimatorId>,
    pub reps: Reps,
    pub level: f64,
    pub seed: u64,
    pub lambda: LambdaRule,
    /// Prepend a constant column to the covariates of the leave-one-out estimators.
    pub intercept: bool,
    /// Run estimators under a design other than their own, using the realized
    /// treated count or the marginal treated fraction.
    pub allow_design_mismatch: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            design: StudyDesign::SimpleHalf,
            methods: vec![EstimatorId::LooraHt],
            reps: Reps::Count(1000),
            level: 0.95,
            seed: 0,
            lambda: LambdaRule::default(),
            intercept: true,
            allow_design_mismatch: false,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if let Reps::Count(0) = self.reps {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!("level {} outside (0, 1)", self.level)));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods requested".into()));
        }
        if !self.allow_design_mismatch {
            let simple = !matches!(self.design, StudyDesign::Complete { .. });
            if let Some(m) = self.methods.iter().find(|m| m.wants_simple() != simple) {
                return Err(Error::SpecMismatch {
                    estimator: *m,
                    expected: if m.wants_simple() { "simple" } else { "complete" },
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: EstimatorId,
    pub bias: f64,
    pub std: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub avg_ci_length: f64,
    pub completed: u64,
    pub failed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub design: String,
    pub tau: f64,
    pub reps: u64,
    pub level: f64,
    pub methods: Vec<MethodSummary>,
}

/// `p_i = clamp((1 + cos(x_i, g)) / 2, 0.2, 0.8)` with one Gaussian direction `g`.
///
/// Rows of zero norm get cosine zero, hence probability one half.
pub fn covariate_correlated_probabilities(x: &DesignMatrix, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STUDY_STREAM);
    let g: Vec<f64> = (0..x.ncols()).map(|_| rng.sample(StandardNormal)).collect();
    probabilities_from_direction(x, &g)
}

pub fn probabilities_from_direction(x: &DesignMatrix, g: &[f64]) -> Vec<f64> {
    let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    (0..x.nrows())
        .map(|i| {
            let row = x.row(i);
            let rn = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            let c = if rn == 0.0 || gn == 0.0 {
                0.0
            } else {
                row.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / (rn * gn)
            };
            ((1.0 + c) / 2.0).clamp(0.2, 0.8)
        })
        .collect()
}

/// The design a study draws from.
pub fn study_spec(pop: &Population, cfg: &StudyConfig) -> Result<DesignSpec> {
    let n = pop.n();
    match cfg.design {
        StudyDesign::SimpleHalf => DesignSpec::simple_uniform(n, 0.5),
        StudyDesign::SimpleCorrelated => DesignSpec::simple(covariate_correlated_probabilities(&pop.x, cfg.seed)),
        StudyDesign::Complete { n_t } => DesignSpec::complete(n, n_t),
    }
}

type Outcome = Option<(f64, f64, f64)>;

struct Runner<'a> {
    pop: &'a Population,
    spec: DesignSpec,
    cfg: &'a StudyConfig,
    x_loo: DesignMatrix,
}

impl Runner<'_> {
    fn sample_for(&self, method: EstimatorId, a: &Assignment) -> Result<ObservedSample> {
        let x = match method {
            EstimatorId::LooraHt | EstimatorId::LooraDm => self.x_loo.clone(),
            _ => self.pop.x.clone(),
        };
        let base = ObservedSample::new(x, self.pop.outcomes(&a.d), a.clone(), self.spec.clone())?;
        match (method.wants_simple(), &self.spec) {
            (true, DesignSpec::Simple { .. }) | (false, DesignSpec::Complete { .. }) => Ok(base),
            (true, DesignSpec::Complete { n, n_t }) => base.as_simple(vec![*n_t as f64 / *n as f64; *n]),
            (false, DesignSpec::Simple { .. }) => base.as_complete(),
        }
    }

    fn run(&self, a: &Assignment) -> Vec<Outcome> {
        self.cfg
            .methods
            .iter()
            .map(|&m| {
                let s = self.sample_for(m, a).ok()?;
                let r = estimate_report(&s, m, self.cfg.lambda, self.cfg.level).ok()?;
                Some((r.tau_hat, r.ci_low, r.ci_high))
            })
            .collect()
    }
}

pub fn run_study(pop: &Population, cfg: &StudyConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let spec = study_spec(pop, cfg)?;
    let x_loo = if cfg.intercept { pop.x.with_intercept() } else { pop.x.clone() };
    let runner = Runner { pop, spec, cfg, x_loo };

    let (outcomes, weights): (Vec<Vec<Outcome>>, Vec<f64>) = match cfg.reps {
        Reps::Count(reps) => {
            let out = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(rep);
                    let a = draw_with(&runner.spec, &mut rng).expect("validated design");
                    runner.run(&a)
                })
                .collect();
            (out, vec![1.0; reps as usize])
        }
        Reps::Enumerate => {
            let total = enumeration_size(&runner.spec)?;
            (0..total)
                .into_par_iter()
                .map(|rank| {
                    let d = unrank(&runner.spec, rank);
                    let w = assignment_probability(&runner.spec, &d);
                    let a = Assignment::new(&runner.spec, d).expect("enumerated assignment is feasible");
                    (runner.run(&a), w)
                })
                .unzip()
        }
    };

    let tau = pop.tau();
    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| summarize(method, tau, outcomes.iter().map(|o| o[mi]), &weights))
        .collect();
    Ok(SimulationReport {
        design: cfg.design.label(),
        tau,
        reps: weights.len() as u64,
        level: cfg.level,
        methods,
    })
}

fn summarize<I: Iterator<Item = Outcome>>(method: EstimatorId, tau: f64, outcomes: I, weights: &[f64]) -> MethodSummary {
    let ok: Vec<((f64, f64, f64), f64)> = outcomes
        .zip(weights)
        .filter_map(|(o, &w)| o.map(|v| (v, w)))
        .collect();
    let failed = (weights.len() - ok.len()) as u64;
    let wsum: f64 = ok.iter().map(|x| x.1).collect::<Accumulator>().value();
    let wmean = |f: &dyn Fn(&(f64, f64, f64)) -> f64| {
        ok.iter().map(|(v, w)| w * f(v)).collect::<Accumulator>().value() / wsum
    };
    let mean = wmean(&|v| v.0);
    let var = wmean(&|v| (v.0 - mean).powi(2));
    let bias = mean - tau;
    let std = var.sqrt();
    MethodSummary {
        method,
        bias,
        std,
        rmse: (bias * bias + var).sqrt(),
        coverage: wmean(&|v| (v.1 <= tau && tau <= v.2) as u8 as f64),
        avg_ci_length: wmean(&|v| v.2 - v.1),
        completed: ok.len() as u64,
        failed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopulationKind {
    LinearHeterogeneous,
    LeverageStress,
    BinaryOutcome,
}

impl std::str::FromStr for PopulationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-heterogeneous" | "linear" => Ok(PopulationKind::LinearHeterogeneous),
            "leverage-stress" => Ok(PopulationKind::LeverageStress),
            "binary-outcome" | "binary" => Ok(PopulationKind::BinaryOutcome),
            _ => Err(Error::InvalidInput(format!("unknown population kind '{s}'"))),
        }
    }
}

/// Generator knobs for synthetic populations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub tau0: f64,
    /// Standard deviation of the entries of the control-outcome coefficients.
    pub signal_sd: f64,
    /// Standard deviation of the entries of the effect-heterogeneity coefficients.
    pub het_sd: f64,
    pub noise_sd: f64,
    /// Norm multiplier for the stressed row.
    pub stress_factor: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            tau0: 1.0,
            signal_sd: 1.0,
            het_sd: 0.25,
            noise_sd: 1.0,
            stress_factor: 20.0,
        }
    }
}

/// Minimum leverage of the stressed row at `lambda = 0`.
pub const STRESS_MIN_LEVERAGE: f64 = 0.9;

pub fn synth_population(kind: PopulationKind, n: usize, k: usize, seed: u64) -> Result<Population> {
    synth_population_with(kind, n, k, seed, SynthParams::default())
}

/// Draws a synthetic population.
///
/// Linear kinds: `y0 = X b0 + noise`, `y1 = y0 + tau0 + X b_het`.
/// The stressed kind scales the first row to `stress_factor` times the largest
/// other row norm, further if needed to push its leverage to at least
/// [`STRESS_MIN_LEVERAGE`]. The binary kind thresholds the same two latent
/// outcomes at zero over 0/1 covariates.
pub fn synth_population_with(kind: PopulationKind, n: usize, k: usize, seed: u64, prm: SynthParams) -> Result<Population> {
    if k == 0 || n < 2 {
        return Err(Error::InvalidInput("synthetic population needs n >= 2 and k >= 1".into()));
    }
    if kind != PopulationKind::BinaryOutcome && n <= k {
        return Err(Error::InvalidInput(format!("linear populations need n > k, got n = {n}, k = {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let mut xs: Vec<f64> = match kind {
        PopulationKind::BinaryOutcome => (0..n * k).map(|_| (normal() > 0.5) as u8 as f64).collect(),
        _ => (0..n * k).map(|_| normal()).collect(),
    };
    let b0: Vec<f64> = (0..k).map(|_| prm.signal_sd * normal()).collect();
    let bh: Vec<f64> = (0..k).map(|_| prm.het_sd * normal()).collect();
    let e0: Vec<f64> = (0..n).map(|_| prm.noise_sd * normal()).collect();

    if kind == PopulationKind::LeverageStress {
        stress_first_row(&mut xs, n, k, prm.stress_factor)?;
    }
    let x = DesignMatrix::from_row_major(n, k, &xs)?;
    let lin = |b: &[f64], i: usize| (0..k).map(|j| xs[i * k + j] * b[j]).sum::<f64>();
    let latent0: Vec<f64> = (0..n).map(|i| lin(&b0, i) + e0[i]).collect();
    let latent1: Vec<f64> = (0..n).map(|i| latent0[i] + prm.tau0 + lin(&bh, i)).collect();
    let (y1, y0) = match kind {
        PopulationKind::BinaryOutcome => (
            latent1.iter().map(|v| (*v > 0.0) as u8 as f64).collect(),
            latent0.iter().map(|v| (*v > 0.0) as u8 as f64).collect(),
        ),
        _ => (latent1, latent0),
    };
    Population::new(x, y1, y0)
}

fn stress_first_row(xs: &mut [f64], n: usize, k: usize, factor: f64) -> Result<()> {
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let others = (1..n).map(|i| norm(&xs[i * k..(i + 1) * k])).fold(0.0, f64::max);
    let own = norm(&xs[..k]).max(f64::MIN_POSITIVE);
    let mut scale = factor * others / own;
    for _ in 0..60 {
        let mut trial = xs.to_vec();
        trial[..k].iter_mut().for_each(|v| *v *= scale);
        let x = DesignMatrix::from_row_major(n, k, &trial)?;
        let h0 = RidgeSystem::new(&x, 0.0).map(|s| s.leverages()[0]).unwrap_or(1.0);
        if h0 >= STRESS_MIN_LEVERAGE {
            xs.copy_from_slice(&trial);
            return Ok(());
        }
        scale *= 2.0;
    }
    Err(Error::Degenerate("could not raise the stressed row's leverage".into()))
}
