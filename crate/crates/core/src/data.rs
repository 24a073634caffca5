//! Trial records and their delimited on-disk format.
//!
//! A masked dataset is what an analyst would actually see from a
//! parallel-arm trial: control subjects contribute `(x, t0)`, treated
//! subjects `(x, s1, t1)`, and the remaining potential-outcome slots are
//! structurally absent (`None`), not sentinel values. The surrogate under
//! control is identically zero and is therefore not stored at all.
//!
//! File layout: header `id,z,<covariate columns...>,s1,t0,t1`, one row per
//! subject, missing values as empty fields. Covariate column names are
//! free-form but must not collide with the five fixed names.

use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    BadRecord { row: usize, message: String },
    #[error("header error: {0}")]
    BadHeader(String),
}

/// One subject. Exactly one of `t0`/`t1` is observed, matching the arm;
/// `s1` is observed only under treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub id: u64,
    /// Arm indicator: 0 control, 1 treated.
    pub z: u8,
    pub x: Vec<f64>,
    pub s1: Option<f64>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
}

impl TrialRecord {
    /// Arm-consistency check used on load and before fitting.
    pub fn check(&self, n_covariates: usize) -> Result<(), String> {
        if self.z > 1 {
            return Err(format!("arm indicator must be 0 or 1, got {}", self.z));
        }
        if self.x.len() != n_covariates {
            return Err(format!(
                "expected {n_covariates} covariates, got {}",
                self.x.len()
            ));
        }
        let finite = self.x.iter().all(|v| v.is_finite())
            && [self.s1, self.t0, self.t1]
                .iter()
                .all(|s| s.is_none_or(|v| v.is_finite()));
        if !finite {
            return Err("non-finite value".into());
        }
        match self.z {
            0 => {
                if self.t0.is_none() {
                    return Err("control record missing t0".into());
                }
                if self.s1.is_some() || self.t1.is_some() {
                    return Err("control record must not carry s1 or t1".into());
                }
            }
            _ => {
                if self.s1.is_none() || self.t1.is_none() {
                    return Err("treated record missing s1 or t1".into());
                }
                if self.t0.is_some() {
                    return Err("treated record must not carry t0".into());
                }
            }
        }
        Ok(())
    }
}

/// A masked trial dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariate_names: Vec<String>,
    /// Which covariate column is the pre-treatment outcome measurement,
    /// when one exists; required by difference-from-baseline endpoints.
    pub baseline_col: Option<usize>,
    pub records: Vec<TrialRecord>,
}

const FIXED_NAMES: [&str; 5] = ["id", "z", "s1", "t0", "t1"];

impl Dataset {
    pub fn new(
        covariate_names: Vec<String>,
        baseline_col: Option<usize>,
        records: Vec<TrialRecord>,
    ) -> Result<Self, DataError> {
        let data = Dataset { covariate_names, baseline_col, records };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        for name in &self.covariate_names {
            if FIXED_NAMES.contains(&name.as_str()) {
                return Err(DataError::BadHeader(format!(
                    "covariate column may not be named '{name}'"
                )));
            }
        }
        if let Some(col) = self.baseline_col {
            if col >= self.covariate_names.len() {
                return Err(DataError::BadHeader(format!(
                    "baseline column index {col} out of range"
                )));
            }
        }
        for (i, rec) in self.records.iter().enumerate() {
            rec.check(self.covariate_names.len())
                .map_err(|message| DataError::BadRecord { row: i + 2, message })?;
        }
        Ok(())
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn arm(&self, z: u8) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(move |r| r.z == z)
    }

    /// All covariate rows, pooled over arms (baseline covariates share one
    /// distribution by randomization).
    pub fn covariate_rows(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.x.clone()).collect()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), DataError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string(), "z".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        header.extend(["s1", "t0", "t1"].map(String::from));
        out.write_record(&header)?;
        for rec in &self.records {
            let mut row = vec![rec.id.to_string(), rec.z.to_string()];
            row.extend(rec.x.iter().map(|v| v.to_string()));
            for slot in [rec.s1, rec.t0, rec.t1] {
                row.push(slot.map(|v| v.to_string()).unwrap_or_default());
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn read_from(r: impl Read) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(r);
        let header = rdr.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 5 || cols[0] != "id" || cols[1] != "z" {
            return Err(DataError::BadHeader(
                "expected header starting with id,z and ending with s1,t0,t1".into(),
            ));
        }
        let tail = &cols[cols.len() - 3..];
        if tail != ["s1", "t0", "t1"] {
            return Err(DataError::BadHeader("last columns must be s1,t0,t1".into()));
        }
        let covariate_names: Vec<String> =
            cols[2..cols.len() - 3].iter().map(|s| s.to_string()).collect();
        let k = covariate_names.len();

        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let bad = |message: String| DataError::BadRecord { row: i + 2, message };
            if row.len() != k + 5 {
                return Err(bad(format!("expected {} fields, got {}", k + 5, row.len())));
            }
            let id: u64 = row[0]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad id '{}'", &row[0])))?;
            let z: u8 = row[1]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad arm '{}'", &row[1])))?;
            let mut x = Vec::with_capacity(k);
            for j in 0..k {
                let field = row[2 + j].trim();
                x.push(
                    field
                        .parse()
                        .map_err(|_| bad(format!("bad covariate '{field}'")))?,
                );
            }
            let mut opt = [None; 3];
            for (j, slot) in opt.iter_mut().enumerate() {
                let field = row[2 + k + j].trim();
                if !field.is_empty() {
                    *slot = Some(
                        field
                            .parse()
                            .map_err(|_| bad(format!("bad outcome '{field}'")))?,
                    );
                }
            }
            records.push(TrialRecord { id, z, x, s1: opt[0], t0: opt[1], t1: opt[2] });
        }
        // Default baseline: a single covariate column is taken to be the
        // pre-treatment measurement; multi-covariate files need an
        // explicit designation from the caller.
        let baseline_col = if k == 1 { Some(0) } else { None };
        Dataset::new(covariate_names, baseline_col, records)
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Self::read_from(std::fs::File::open(path)?)
    }

    pub fn with_baseline_named(mut self, name: &str) -> Result<Self, DataError> {
        match self.covariate_names.iter().position(|n| n == name) {
            Some(col) => {
                self.baseline_col = Some(col);
                Ok(self)
            }
            None => Err(DataError::BadHeader(format!("no covariate column named '{name}'"))),
        }
    }
}
