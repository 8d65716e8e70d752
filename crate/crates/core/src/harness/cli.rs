use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::config::{FileConfig, RepsValue};
use super::dataset::{write_population, DatasetOptions, Table};
use super::manifest::RunManifest;
use super::report::{self, Record};
use super::verify::{run_checks, CheckResult, VerifyOptions};
use super::HarnessError;
use crate::design::DesignSpec;
use crate::estimators::{EstimatorId, LambdaRule, ObservedSample};
use crate::inference::estimate_report;
use crate::linalg::DesignMatrix;
use crate::oracle::Population;
use crate::simulation::{run_study, synth_population, PopulationKind, Reps, SimulationReport, StudyConfig, StudyDesign};

type Res<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Parser)]
#[command(name = "loora", version, about = "Design-based treatment effect estimation with leave-one-out ridge adjustment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the average treatment effect from an observed experiment.
    Estimate(EstimateArgs),
    /// Monte Carlo or exhaustive study on a population with both potential outcomes.
    Simulate(SimulateArgs),
    /// Run the built-in consistency checks.
    Verify(VerifyArgs),
    /// Write a synthetic population to CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Input CSV file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Field delimiter: a single character, or `tab`.
    #[arg(long)]
    pub delimiter: Option<String>,
    /// The file has no header row; columns are named c0, c1, ...
    #[arg(long)]
    pub no_header: bool,
    #[arg(long)]
    pub y_col: Option<String>,
    #[arg(long)]
    pub d_col: Option<String>,
    #[arg(long)]
    pub y1_col: Option<String>,
    #[arg(long)]
    pub y0_col: Option<String>,
    /// Covariate columns (default: every column without another role).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Columns to one-hot encode.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Option<Vec<String>>,
    /// Columns to leave out.
    #[arg(long, value_delimiter = ',')]
    pub ignore: Option<Vec<String>>,
    /// Drop the first level of every categorical column.
    #[arg(long)]
    pub drop_first: bool,
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Estimators, comma separated (HT, DM, ADJ, INT, RIDGE_REG, LOORA_HT, LOORA_DM).
    #[arg(long = "method", value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// `fixed:<value>` or `auto:<c>`.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Confidence level.
    #[arg(long)]
    pub level: Option<f64>,
    /// Do not prepend a constant column for the leave-one-out estimators.
    #[arg(long)]
    pub no_intercept: bool,
    /// Run estimators under a design other than their own.
    #[arg(long)]
    pub allow_design_mismatch: bool,
    /// Machine-readable output (JSON lines, manifest first).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Additional CSV report.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Record wall time in the manifest.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// `simple` or `complete`.
    #[arg(long)]
    pub design: Option<String>,
    /// Common treatment probability for a simple design.
    #[arg(long)]
    pub p: Option<f64>,
    /// Column of per-unit treatment probabilities for a simple design.
    #[arg(long)]
    pub p_col: Option<String>,
    /// Number of treated units for a complete design (default: as observed).
    #[arg(long)]
    pub nt: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Designs, comma separated: simple-half, simple-correlated, complete.
    #[arg(long, value_delimiter = ',')]
    pub design: Option<Vec<String>>,
    /// Treated count for the complete design (default: n / 2).
    #[arg(long)]
    pub nt: Option<usize>,
    /// Number of replications, or `enumerate` for every assignment.
    #[arg(long)]
    pub reps: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (falls back to LOORA_THREADS).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Synthetic population instead of --data: linear-heterogeneous, leverage-stress, binary-outcome.
    #[arg(long)]
    pub population: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Seed of the synthetic population.
    #[arg(long)]
    pub pop_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Checks to run (default: every fast check).
    #[arg(long = "check", value_delimiter = ',')]
    pub checks: Vec<String>,
    /// Population size for lin-equivalence.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    /// Replications for lin-equivalence.
    #[arg(long, default_value_t = 5000)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, hide = true)]
    pub inject_q_fault: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "linear-heterogeneous")]
    pub population: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with<I, T, W, E>(args: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { super::EXIT_SCHEMA } else { super::EXIT_OK };
            let _ = write!(if e.use_stderr() { err as &mut dyn Write } else { out as &mut dyn Write }, "{}", e.render());
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => super::EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run<W: Write>(cli: Cli, out: &mut W) -> Res<()> {
    match cli.command {
        Command::Estimate(a) => estimate_cmd(a, out),
        Command::Simulate(a) => simulate_cmd(a, out),
        Command::Verify(a) => verify_cmd(a, out),
        Command::Synth(a) => synth_cmd(a, out),
    }
}

fn load_config(path: &Option<PathBuf>) -> Res<FileConfig> {
    path.as_deref().map(FileConfig::load).transpose().map(Option::unwrap_or_default)
}

fn parse_delimiter(s: &str) -> Res<u8> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(HarnessError::Schema(format!("delimiter must be one ASCII character, got '{s}'"))),
    }
}

fn dataset_options(a: &DataArgs, f: &FileConfig) -> Res<DatasetOptions> {
    let mut o = DatasetOptions::default();
    if let Some(d) = a.delimiter.as_ref().or(f.delimiter.as_ref()) {
        o.delimiter = parse_delimiter(d)?;
    }
    o.header = if a.no_header { false } else { f.header.unwrap_or(true) };
    let pick = |flag: &Option<String>, file: &Option<String>, dflt: &str| flag.clone().or_else(|| file.clone()).unwrap_or_else(|| dflt.into());
    o.y = pick(&a.y_col, &f.y_col, "y");
    o.d = pick(&a.d_col, &f.d_col, "d");
    o.y1 = pick(&a.y1_col, &f.y1_col, "y1");
    o.y0 = pick(&a.y0_col, &f.y0_col, "y0");
    o.covariates = a.covariates.clone().or_else(|| f.covariates.clone());
    o.categorical = a.categorical.clone().or_else(|| f.categorical.clone()).unwrap_or_default();
    o.ignore = a.ignore.clone().or_else(|| f.ignore.clone()).unwrap_or_default();
    o.drop_first = a.drop_first || f.drop_first.unwrap_or(false);
    Ok(o)
}

fn data_path(a: &DataArgs, f: &FileConfig) -> Option<PathBuf> {
    a.data.clone().or_else(|| f.data.as_ref().map(PathBuf::from))
}

fn parse_methods(list: &[String]) -> Res<Vec<EstimatorId>> {
    list.iter()
        .map(|m| m.parse::<EstimatorId>().map_err(|_| HarnessError::Schema(format!("unknown method '{m}'"))))
        .collect()
}

fn parse_lambda(s: &str) -> Res<LambdaRule> {
    s.parse().map_err(|e: crate::Error| HarnessError::Schema(e.to_string()))
}

/// Settings shared by `estimate` and `simulate` after merging flags and file.
#[derive(Debug, Clone, Serialize)]
struct Common {
    methods: Option<Vec<EstimatorId>>,
    lambda: LambdaRule,
    level: f64,
    intercept: bool,
    allow_design_mismatch: bool,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    #[serde(skip)]
    timing: bool,
}

fn common(a: &CommonArgs, f: &FileConfig) -> Res<Common> {
    let methods = a.methods.as_ref().or(f.methods.as_ref()).map(|m| parse_methods(m)).transpose()?;
    let lambda = match a.lambda.as_ref().or(f.lambda.as_ref()) {
        Some(s) => parse_lambda(s)?,
        None => LambdaRule::default(),
    };
    let level = a.level.or(f.level).unwrap_or(0.95);
    if !(level > 0.0 && level < 1.0) {
        return Err(HarnessError::Schema(format!("level {level} outside (0, 1)")));
    }
    Ok(Common {
        methods,
        lambda,
        level,
        intercept: !a.no_intercept && f.intercept.unwrap_or(true),
        allow_design_mismatch: a.allow_design_mismatch || f.allow_design_mismatch.unwrap_or(false),
        out: a.out.clone().or_else(|| f.out.as_ref().map(PathBuf::from)),
        csv: a.csv.clone().or_else(|| f.csv.as_ref().map(PathBuf::from)),
        timing: a.timing,
    })
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn finish<W: Write>(
    out: &mut W,
    c: &Common,
    mut manifest: RunManifest,
    records: Vec<Record>,
    csv: impl FnOnce(&Path) -> Res<()>,
    started: Instant,
) -> Res<()> {
    manifest.outputs = c.out.iter().chain(&c.csv).map(|p| path_string(p)).collect();
    if c.timing {
        manifest.wall_time_s = Some(started.elapsed().as_secs_f64());
    }
    if let Some(path) = &c.csv {
        csv(path)?;
    }
    if let Some(path) = &c.out {
        let mut all = vec![manifest.record()];
        all.extend(records);
        let mut buf = Vec::new();
        report::write_records(&mut buf, &all)?;
        std::fs::write(path, buf)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn create(path: &Path) -> Res<std::fs::File> {
    std::fs::File::create(path).map_err(|e| HarnessError::Schema(format!("cannot create {}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct EstimateSettings<'a> {
    data: String,
    dataset: &'a DatasetOptions,
    design: &'a DesignSpec,
    common: &'a Common,
}

fn needs_covariates(id: EstimatorId) -> bool {
    !matches!(id, EstimatorId::Ht | EstimatorId::Dm)
}

fn default_methods(simple: bool) -> Vec<EstimatorId> {
    if simple {
        vec![EstimatorId::Ht, EstimatorId::LooraHt]
    } else {
        vec![EstimatorId::Dm, EstimatorId::Adj, EstimatorId::Int, EstimatorId::RidgeReg, EstimatorId::LooraDm]
    }
}

fn estimate_cmd<W: Write>(a: EstimateArgs, out: &mut W) -> Res<()> {
    let started = Instant::now();
    let f = load_config(&a.common.config)?;
    let mut opts = dataset_options(&a.data, &f)?;
    let c = common(&a.common, &f)?;
    let path = data_path(&a.data, &f).ok_or_else(|| HarnessError::Schema("no --data file given".into()))?;
    let design = a.design.clone().or_else(|| f.design.as_ref().and_then(|d| d.first().cloned()));
    let design = design.ok_or_else(|| HarnessError::Schema("--design simple|complete is required".into()))?;
    let p_col = a.p_col.clone().or_else(|| f.p_col.clone());
    if design == "simple" {
        opts.p = p_col.clone();
    }
    let table = Table::read(&path, &opts)?;
    let obs = table.observed(&opts)?;
    let n = obs.y.len();
    let spec = match design.as_str() {
        "simple" => match (a.p.or(f.p), obs.p.clone()) {
            (None, Some(p)) => DesignSpec::simple(p)?,
            (Some(p), None) => DesignSpec::simple_uniform(n, p)?,
            (Some(_), Some(_)) => return Err(HarnessError::Schema("give either --p or --p-col, not both".into())),
            (None, None) => return Err(HarnessError::Schema("simple design needs --p or --p-col".into())),
        },
        "complete" => {
            let observed_nt = obs.d.iter().filter(|b| **b).count();
            let nt = a.nt.or(f.nt).unwrap_or(observed_nt);
            if nt != observed_nt {
                return Err(HarnessError::Schema(format!("--nt {nt} but the data have {observed_nt} treated units")));
            }
            DesignSpec::complete(n, nt)?
        }
        other => return Err(HarnessError::Schema(format!("unknown design '{other}' (expected simple or complete)"))),
    };
    let methods = c.methods.clone().unwrap_or_else(|| default_methods(spec.is_simple()));
    let (x, _names) = match obs.covariates.clone() {
        Some(cv) => (Some(cv.0), cv.1),
        None => (None, Vec::new()),
    };
    let ones = DesignMatrix::from_row_major(n, 1, &vec![1.0; n])?;
    let mut reports = Vec::new();
    for id in methods {
        let xm = match (&x, id) {
            (Some(x), EstimatorId::LooraHt | EstimatorId::LooraDm) if c.intercept => x.with_intercept(),
            (Some(x), _) => x.clone(),
            (None, EstimatorId::LooraHt | EstimatorId::LooraDm) if c.intercept => ones.clone(),
            (None, id) if needs_covariates(id) => {
                return Err(HarnessError::Schema(format!("{id} needs at least one covariate column")))
            }
            (None, _) => ones.clone(),
        };
        let base = ObservedSample::from_d(xm, obs.y.clone(), obs.d.clone(), spec.clone())?;
        let s = if id.wants_simple() == spec.is_simple() {
            base
        } else if !c.allow_design_mismatch {
            return Err(crate::Error::SpecMismatch {
                estimator: id,
                expected: if id.wants_simple() { "simple" } else { "complete" },
            }
            .into());
        } else if id.wants_simple() {
            let nt = base.assignment.n_treated() as f64;
            base.as_simple(vec![nt / n as f64; n])?
        } else {
            base.as_complete()?
        };
        let rep = estimate_report(&s, id, c.lambda, c.level).map_err(|e| match e {
            crate::Error::RankDeficient if !opts.categorical.is_empty() && !opts.drop_first => HarnessError::Numeric {
                row: None,
                message: format!("{id}: {e}; one-hot columns are collinear with the intercept, try --drop-first"),
            },
            e => e.into(),
        })?;
        reports.push(rep);
    }
    write!(out, "{}", report::estimate_table(&reports))?;
    let settings = EstimateSettings {
        data: path_string(&path),
        dataset: &opts,
        design: &spec,
        common: &c,
    };
    let manifest = RunManifest::new("estimate", &settings, None);
    let records = reports.iter().map(report::estimate_record).collect();
    finish(out, &c, manifest, records, |p| report::write_estimate_csv(create(p)?, &reports), started)
}

#[derive(Debug, Clone, Serialize)]
enum Source {
    Data { path: String, dataset: DatasetOptions },
    Synthetic { kind: PopulationKind, n: usize, k: usize, seed: u64 },
}

#[derive(Debug, Serialize)]
struct SimulateSettings<'a> {
    source: &'a Source,
    studies: &'a [StudyConfig],
}

fn parse_study_design(s: &str, nt: usize) -> Res<StudyDesign> {
    match s {
        "simple-half" => Ok(StudyDesign::SimpleHalf),
        "simple-correlated" | "simple-covariate-correlated" => Ok(StudyDesign::SimpleCorrelated),
        "complete" => Ok(StudyDesign::Complete { n_t: nt }),
        other => Err(HarnessError::Schema(format!(
            "unknown design '{other}' (expected simple-half, simple-correlated or complete)"
        ))),
    }
}

fn parse_reps(v: &RepsValue) -> Res<Reps> {
    match v {
        RepsValue::Count(n) => Ok(Reps::Count(*n)),
        RepsValue::Word(w) if w == "enumerate" => Ok(Reps::Enumerate),
        RepsValue::Word(w) => w
            .parse::<u64>()
            .map(Reps::Count)
            .map_err(|_| HarnessError::Schema(format!("--reps must be a count or 'enumerate', got '{w}'"))),
    }
}

/// Thread count from the flag, the config file, then `LOORA_THREADS`.
pub fn resolve_threads(flag: Option<usize>, file: Option<usize>) -> Res<Option<usize>> {
    if let Some(t) = flag.or(file) {
        return Ok(Some(t));
    }
    match std::env::var("LOORA_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| HarnessError::Schema(format!("LOORA_THREADS must be a positive integer, got '{v}'"))),
        _ => Ok(None),
    }
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Res<T> {
    match threads {
        Some(0) => Err(HarnessError::Schema("thread count must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| HarnessError::Schema(format!("thread pool: {e}")))
            .map(|pool| pool.install(f)),
        None => Ok(f()),
    }
}

fn simulate_cmd<W: Write>(a: SimulateArgs, out: &mut W) -> Res<()> {
    let started = Instant::now();
    let f = load_config(&a.common.config)?;
    let c = common(&a.common, &f)?;
    let (pop, source): (Population, Source) = match (data_path(&a.data, &f), a.population.clone().or_else(|| f.population.clone())) {
        (Some(_), Some(_)) => return Err(HarnessError::Schema("give either --data or --population, not both".into())),
        (Some(path), None) => {
            let opts = dataset_options(&a.data, &f)?;
            let (pop, _) = Table::read(&path, &opts)?.population(&opts)?;
            (pop, Source::Data { path: path_string(&path), dataset: opts })
        }
        (None, Some(kind)) => {
            let kind: PopulationKind = kind.parse().map_err(|e: crate::Error| HarnessError::Schema(e.to_string()))?;
            let n = a.n.or(f.n).ok_or_else(|| HarnessError::Schema("--population needs --n".into()))?;
            let k = a.k.or(f.k).ok_or_else(|| HarnessError::Schema("--population needs --k".into()))?;
            let seed = a.pop_seed.or(f.pop_seed).unwrap_or(0);
            (synth_population(kind, n, k, seed)?, Source::Synthetic { kind, n, k, seed })
        }
        (None, None) => return Err(HarnessError::Schema("simulate needs --data or --population".into())),
    };
    let nt = a.nt.or(f.nt).unwrap_or(pop.n() / 2);
    let names = a.design.clone().or_else(|| f.design.clone()).unwrap_or_else(|| vec!["simple-half".into()]);
    let reps = match a.reps.clone().map(RepsValue::Word).or_else(|| f.reps.clone()) {
        Some(v) => parse_reps(&v)?,
        None => Reps::Count(1000),
    };
    let seed = a.seed.or(f.seed).unwrap_or(0);
    let threads = resolve_threads(a.threads, f.threads)?;

    let mut studies = Vec::new();
    for name in &names {
        let design = parse_study_design(name, nt)?;
        let simple = !matches!(design, StudyDesign::Complete { .. });
        let methods = match &c.methods {
            None => default_methods(simple),
            Some(m) if c.allow_design_mismatch => m.clone(),
            Some(m) => {
                let fits: Vec<EstimatorId> = m.iter().copied().filter(|id| id.wants_simple() == simple).collect();
                if fits.is_empty() {
                    return Err(crate::Error::SpecMismatch {
                        estimator: m[0],
                        expected: if m[0].wants_simple() { "simple" } else { "complete" },
                    }
                    .into());
                }
                fits
            }
        };
        studies.push(StudyConfig {
            design,
            methods,
            reps,
            level: c.level,
            seed,
            lambda: c.lambda,
            intercept: c.intercept,
            allow_design_mismatch: c.allow_design_mismatch,
        });
    }
    let results: Vec<SimulationReport> = in_pool(threads, || studies.iter().map(|s| run_study(&pop, s)).collect::<crate::Result<Vec<_>>>())??;
    for r in &results {
        writeln!(out, "{}", report::simulation_table(r))?;
    }
    let settings = SimulateSettings {
        source: &source,
        studies: &studies,
    };
    let manifest = RunManifest::new("simulate", &settings, Some(seed));
    let records = results.iter().flat_map(report::summary_records).collect();
    let rows: Vec<_> = results.iter().flat_map(report::summary_rows).collect();
    finish(out, &c, manifest, records, |p| report::write_summary_csv(create(p)?, &rows), started)
}

fn check_record(r: &CheckResult) -> Record {
    Record::new("check")
        .str("name", r.name.clone())
        .num("discrepancy", r.discrepancy)
        .num("tolerance", r.tolerance)
        .with("passed", report::Field::Bool(r.passed))
}

fn verify_cmd<W: Write>(a: VerifyArgs, out: &mut W) -> Res<()> {
    let opts = VerifyOptions {
        checks: a.checks.clone(),
        n: a.n,
        reps: a.reps,
        seed: a.seed,
        q_fault: a.inject_q_fault,
    };
    let threads = resolve_threads(a.threads, None)?;
    let results = in_pool(threads, || run_checks(&opts))??;
    for r in &results {
        writeln!(
            out,
            "{} {:<26} discrepancy {:.3e}  tolerance {:.1e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.discrepancy,
            r.tolerance
        )?;
    }
    if let Some(path) = &a.out {
        #[derive(Serialize)]
        struct VerifySettings<'a> {
            checks: &'a [String],
            n: usize,
            reps: u64,
            seed: u64,
        }
        let settings = VerifySettings {
            checks: &opts.checks,
            n: opts.n,
            reps: opts.reps,
            seed: opts.seed,
        };
        let mut manifest = RunManifest::new("verify", &settings, Some(opts.seed));
        manifest.outputs = vec![path_string(path)];
        let mut all = vec![manifest.record()];
        all.extend(results.iter().map(check_record));
        let mut buf = Vec::new();
        report::write_records(&mut buf, &all)?;
        std::fs::write(path, buf)?;
    }
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.name.clone()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::VerifyFailed(failed))
    }
}

fn synth_cmd<W: Write>(a: SynthArgs, out: &mut W) -> Res<()> {
    let kind: PopulationKind = a.population.parse().map_err(|e: crate::Error| HarnessError::Schema(e.to_string()))?;
    let pop = synth_population(kind, a.n, a.k, a.seed)?;
    let names: Vec<String> = (1..=a.k).map(|j| format!("x{j}")).collect();
    write_population(create(&a.out)?, &pop, &names)?;
    writeln!(out, "wrote {} ({} units, tau {:.6})", a.out.display(), pop.n(), pop.tau())?;
    Ok(())
}
