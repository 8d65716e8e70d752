//! CSV ingestion.
//!
//! Columns get one of a few roles. Outcome and assignment columns are looked up
//! by name; every other column is a covariate unless listed as ignored.
//! Categorical covariates are expanded one-hot, one indicator per level in the
//! order levels first appear in the file, optionally dropping the first level.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::linalg::DesignMatrix;
use crate::oracle::Population;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub delimiter: u8,
    pub header: bool,
    pub y: String,
    pub d: String,
    pub y1: String,
    pub y0: String,
    /// Per-unit treatment probability column, simple designs only.
    pub p: Option<String>,
    /// Explicit covariate list; `None` means every column without another role.
    pub covariates: Option<Vec<String>>,
    pub categorical: Vec<String>,
    pub ignore: Vec<String>,
    pub drop_first: bool,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            header: true,
            y: "y".into(),
            d: "d".into(),
            y1: "y1".into(),
            y0: "y0".into(),
            p: None,
            covariates: None,
            categorical: Vec::new(),
            ignore: Vec::new(),
            drop_first: false,
        }
    }
}

/// Raw string cells plus column names (`c0`, `c1`, ... without a header row).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path, opts: &DatasetOptions) -> Result<Self, HarnessError> {
        let file = std::fs::File::open(path)
            .map_err(|e| HarnessError::Schema(format!("cannot open {}: {e}", path.display())))?;
        Self::from_reader(file, opts)
    }

    pub fn from_reader<R: std::io::Read>(rdr: R, opts: &DatasetOptions) -> Result<Self, HarnessError> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(opts.delimiter)
            .has_headers(opts.header)
            .trim(csv::Trim::All)
            .from_reader(rdr);
        let mut names: Vec<String> = if opts.header {
            rdr.headers()
                .map_err(|e| HarnessError::Schema(format!("bad header: {e}")))?
                .iter()
                .map(str::to_owned)
                .collect()
        } else {
            Vec::new()
        };
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| HarnessError::Schema(format!("row {i}: {e}")))?;
            rows.push(rec.iter().map(str::to_owned).collect::<Vec<_>>());
        }
        if !opts.header {
            let width = rows.first().map_or(0, Vec::len);
            names = (0..width).map(|j| format!("c{j}")).collect();
        }
        let mut seen = HashMap::new();
        for (j, name) in names.iter().enumerate() {
            if let Some(prev) = seen.insert(name.as_str(), j) {
                return Err(HarnessError::Schema(format!(
                    "duplicate column '{name}' at positions {prev} and {j}"
                )));
            }
        }
        if rows.is_empty() {
            return Err(HarnessError::Schema("dataset has no rows".into()));
        }
        Ok(Self { names, rows })
    }

    pub fn has(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    fn index(&self, name: &str, role: &str) -> Result<usize, HarnessError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| HarnessError::Schema(format!("missing {role} column '{name}'")))
    }

    fn numeric(&self, j: usize) -> Result<Vec<f64>, HarnessError> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cell = &r[j];
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    HarnessError::Schema(format!("row {i}, column '{}': '{cell}' is not a finite number", self.names[j]))
                })
            })
            .collect()
    }

    fn indicator(&self, j: usize) -> Result<Vec<bool>, HarnessError> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| match r[j].to_ascii_lowercase().as_str() {
                "1" | "1.0" | "true" | "t" => Ok(true),
                "0" | "0.0" | "false" | "f" => Ok(false),
                other => Err(HarnessError::Schema(format!(
                    "row {i}, column '{}': '{other}' is not a 0/1 assignment",
                    self.names[j]
                ))),
            })
            .collect()
    }

    /// Covariate block after one-hot expansion, with its column names.
    ///
    /// Returns `None` when no covariate columns are selected.
    pub fn covariates(&self, opts: &DatasetOptions, roles: &[&str]) -> Result<Option<(DesignMatrix, Vec<String>)>, HarnessError> {
        for c in opts.categorical.iter().chain(&opts.ignore) {
            self.index(c, "listed")?;
        }
        let chosen: Vec<usize> = match &opts.covariates {
            Some(list) => list.iter().map(|c| self.index(c, "covariate")).collect::<Result<_, _>>()?,
            None => (0..self.names.len())
                .filter(|&j| {
                    let n = self.names[j].as_str();
                    !roles.contains(&n) && !opts.ignore.iter().any(|c| c == n)
                })
                .collect(),
        };
        let n = self.rows.len();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut names = Vec::new();
        for j in chosen {
            let name = &self.names[j];
            if opts.categorical.contains(name) {
                let (levels, codes) = one_hot_levels(self.rows.iter().map(|r| r[j].as_str()));
                let start = usize::from(opts.drop_first);
                for (l, level) in levels.iter().enumerate().skip(start) {
                    cols.push(codes.iter().map(|&c| if c == l { 1.0 } else { 0.0 }).collect());
                    names.push(format!("{name}={level}"));
                }
            } else {
                cols.push(self.numeric(j)?);
                names.push(name.clone());
            }
        }
        if cols.is_empty() {
            return Ok(None);
        }
        let data: Vec<f64> = (0..n).flat_map(|i| cols.iter().map(move |c| c[i])).collect();
        let x = DesignMatrix::from_row_major(n, cols.len(), &data).map_err(|e| HarnessError::Schema(e.to_string()))?;
        Ok(Some((x, names)))
    }

    pub fn observed(&self, opts: &DatasetOptions) -> Result<ObservedData, HarnessError> {
        let jy = self.index(&opts.y, "outcome")?;
        let jd = self.index(&opts.d, "assignment")?;
        let p = match &opts.p {
            Some(name) => Some(self.numeric(self.index(name, "probability")?)?),
            None => None,
        };
        let mut roles = vec![opts.y.as_str(), opts.d.as_str()];
        if let Some(name) = &opts.p {
            roles.push(name);
        }
        Ok(ObservedData {
            y: self.numeric(jy)?,
            d: self.indicator(jd)?,
            p,
            covariates: self.covariates(opts, &roles)?,
        })
    }

    pub fn population(&self, opts: &DatasetOptions) -> Result<(Population, Vec<String>), HarnessError> {
        let j1 = self.index(&opts.y1, "treated potential outcome")?;
        let j0 = self.index(&opts.y0, "control potential outcome")?;
        let (x, names) = self
            .covariates(opts, &[opts.y1.as_str(), opts.y0.as_str()])?
            .ok_or_else(|| HarnessError::Schema("population mode needs at least one covariate column".into()))?;
        let pop = Population::new(x, self.numeric(j1)?, self.numeric(j0)?).map_err(|e| HarnessError::Schema(e.to_string()))?;
        Ok((pop, names))
    }
}

/// Distinct levels in first-appearance order and the level index of every cell.
pub fn one_hot_levels<'a, I: IntoIterator<Item = &'a str>>(cells: I) -> (Vec<String>, Vec<usize>) {
    let mut levels: Vec<String> = Vec::new();
    let mut index: HashMap<&'a str, usize> = HashMap::new();
    let codes = cells
        .into_iter()
        .map(|c| {
            *index.entry(c).or_insert_with(|| {
                levels.push(c.to_owned());
                levels.len() - 1
            })
        })
        .collect();
    (levels, codes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    pub y: Vec<f64>,
    pub d: Vec<bool>,
    pub p: Option<Vec<f64>>,
    pub covariates: Option<(DesignMatrix, Vec<String>)>,
}

/// Writes a population as `x..., y1, y0` with a header row.
pub fn write_population<W: std::io::Write>(w: W, pop: &Population, names: &[String]) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = names.to_vec();
    header.push("y1".into());
    header.push("y0".into());
    wtr.write_record(&header)?;
    for i in 0..pop.n() {
        let mut rec: Vec<String> = pop.x.row(i).iter().map(|v| super::report::fmt_f64(*v)).collect();
        rec.push(super::report::fmt_f64(pop.y1[i]));
        rec.push(super::report::fmt_f64(pop.y0[i]));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
