//! Datasets, CSV input/output and feature preprocessing.
//!
//! Continuous columns are standardized to zero mean and unit sample variance;
//! categorical columns are replaced by one indicator column per level (all
//! levels kept). Constant continuous columns are dropped. Statistics are fit on
//! one set of rows and can then be applied to any other rows, so held-out data
//! never leaks into the scaling.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RrmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    /// One-hot indicator produced from a categorical column.
    Indicator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    /// `(mean, sd)` applied to this column, if it was standardized.
    pub scaling: Option<(f64, f64)>,
}

impl ColumnMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnMeta {
            name: name.into(),
            kind: ColumnKind::Continuous,
            scaling: None,
        }
    }
}

/// Feature matrix, target and per-column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub target: Array1<f64>,
    pub columns: Vec<ColumnMeta>,
    pub target_name: String,
}

impl Dataset {
    /// Dataset with continuous columns named `x1..xp` and target `y`.
    pub fn new(features: Array2<f64>, target: Array1<f64>) -> Result<Self> {
        if features.nrows() != target.len() {
            return Err(RrmError::DimensionMismatch {
                expected: features.nrows(),
                got: target.len(),
            });
        }
        let columns = (1..=features.ncols())
            .map(|j| ColumnMeta::continuous(format!("x{j}")))
            .collect();
        Ok(Dataset {
            features,
            target,
            columns,
            target_name: "y".into(),
        })
    }

    pub fn n(&self) -> usize {
        self.target.len()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.n() == 0
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            target: self.target.select(Axis(0), rows),
            columns: self.columns.clone(),
            target_name: self.target_name.clone(),
        }
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Renders a matrix with a header as CSV using shortest round-trip float formatting.
pub fn csv_bytes(header: &[&str], columns: &[ArrayView2<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    let n = columns.first().map(|c| c.nrows()).unwrap_or(0);
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..n {
        rec.clear();
        for block in columns {
            rec.extend(block.row(i).iter().map(|v| format!("{v}")));
        }
        w.write_record(&rec)?;
    }
    w.into_inner()
        .map_err(|e| RrmError::Io(std::io::Error::other(e.to_string())))
}

/// Writes a dataset as CSV: feature columns then the target column.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut header: Vec<&str> = data.feature_names();
    header.push(&data.target_name);
    let t = data.target.view().insert_axis(Axis(1));
    let bytes = csv_bytes(&header, &[data.features.view(), t])?;
    atomic_write(path, &bytes)
}

/// CSV contents as raw string cells.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub path: PathBuf,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read(path: &Path) -> Result<Self> {
        let data_err = |message: String| RrmError::Data {
            path: path.to_path_buf(),
            message,
        };
        if !path.exists() {
            return Err(data_err("file not found".into()));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)?;
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if headers.is_empty() {
            return Err(data_err("missing header row".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(RawTable {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| RrmError::Data {
                path: self.path.clone(),
                message: format!("column `{name}` not found"),
            })
    }

    /// Drops rows with a missing cell or an unparseable numeric cell among the
    /// used columns. Returns the number of dropped rows.
    pub fn drop_invalid(&mut self, target: Option<&str>, categorical: &[String]) -> Result<usize> {
        if let Some(t) = target {
            self.column_index(t)?;
        }
        let cat_idx: Vec<usize> = categorical
            .iter()
            .map(|c| self.column_index(c))
            .collect::<Result<_>>()?;
        let width = self.headers.len();
        let before = self.rows.len();
        self.rows.retain(|row| {
            row.len() == width
                && row.iter().enumerate().all(|(j, cell)| {
                    if cat_idx.contains(&j) {
                        !cell.is_empty()
                    } else {
                        parse_number(cell).is_some()
                    }
                })
        });
        Ok(before - self.rows.len())
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ColumnStep {
    Standardize { column: String, mean: f64, sd: f64 },
    Passthrough { column: String },
    OneHot { column: String, levels: Vec<String> },
}

/// Fitted preprocessing: one step per retained input column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub target: String,
    pub steps: Vec<ColumnStep>,
    /// Columns removed because they were constant on the fitting rows.
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessOptions {
    pub categorical: Vec<String>,
    /// Standardize continuous columns (otherwise they pass through).
    pub standardize: bool,
}

impl Preprocessor {
    /// Fits column statistics on `rows` of `table`.
    pub fn fit(table: &RawTable, rows: &[usize], target: &str, opts: &PreprocessOptions) -> Result<Self> {
        let target_idx = table.column_index(target)?;
        for c in &opts.categorical {
            table.column_index(c)?;
            if c == target {
                return Err(RrmError::Data {
                    path: table.path.clone(),
                    message: "target column cannot be categorical".into(),
                });
            }
        }
        let mut steps = Vec::new();
        let mut dropped = Vec::new();
        for (j, name) in table.headers.iter().enumerate() {
            if j == target_idx {
                continue;
            }
            if opts.categorical.contains(name) {
                let levels: BTreeSet<&str> = rows.iter().map(|&i| table.rows[i][j].as_str()).collect();
                steps.push(ColumnStep::OneHot {
                    column: name.clone(),
                    levels: levels.into_iter().map(String::from).collect(),
                });
                continue;
            }
            let vals: Vec<f64> = rows
                .iter()
                .map(|&i| parse_number(&table.rows[i][j]).unwrap_or(f64::NAN))
                .collect();
            let (mean, sd) = mean_sd(&vals);
            if !(sd > 0.0) || !sd.is_finite() {
                log::warn!("dropping constant column `{name}`");
                dropped.push(name.clone());
                continue;
            }
            if opts.standardize {
                steps.push(ColumnStep::Standardize {
                    column: name.clone(),
                    mean,
                    sd,
                });
            } else {
                steps.push(ColumnStep::Passthrough { column: name.clone() });
            }
        }
        if steps.is_empty() {
            return Err(RrmError::Data {
                path: table.path.clone(),
                message: "no usable feature columns".into(),
            });
        }
        Ok(Preprocessor {
            target: target.to_string(),
            steps,
            dropped,
        })
    }

    pub fn columns(&self) -> Vec<ColumnMeta> {
        let mut out = Vec::new();
        for step in &self.steps {
            match step {
                ColumnStep::Standardize { column, mean, sd } => out.push(ColumnMeta {
                    name: column.clone(),
                    kind: ColumnKind::Continuous,
                    scaling: Some((*mean, *sd)),
                }),
                ColumnStep::Passthrough { column } => out.push(ColumnMeta::continuous(column.clone())),
                ColumnStep::OneHot { column, levels } => out.extend(levels.iter().map(|l| ColumnMeta {
                    name: format!("{column}={l}"),
                    kind: ColumnKind::Indicator,
                    scaling: None,
                })),
            }
        }
        out
    }

    pub fn n_features(&self) -> usize {
        self.steps
            .iter()
            .map(|s| match s {
                ColumnStep::OneHot { levels, .. } => levels.len(),
                _ => 1,
            })
            .sum()
    }

    /// Feature matrix for `rows`; a level unseen at fit time encodes as all zeros.
    pub fn transform_features(&self, table: &RawTable, rows: &[usize]) -> Result<Array2<f64>> {
        let idx: Vec<usize> = self
            .steps
            .iter()
            .map(|s| match s {
                ColumnStep::Standardize { column, .. }
                | ColumnStep::Passthrough { column }
                | ColumnStep::OneHot { column, .. } => table.column_index(column),
            })
            .collect::<Result<_>>()?;
        let p = self.n_features();
        let mut out = Array2::zeros((rows.len(), p));
        for (r, &i) in rows.iter().enumerate() {
            let row = &table.rows[i];
            let mut col = 0;
            for (step, &j) in self.steps.iter().zip(&idx) {
                let cell = row.get(j).map(String::as_str).unwrap_or("");
                match step {
                    ColumnStep::Standardize { column, mean, sd } => {
                        let v = parse_number(cell).ok_or_else(|| bad_cell(table, i, column))?;
                        out[[r, col]] = (v - mean) / sd;
                        col += 1;
                    }
                    ColumnStep::Passthrough { column } => {
                        out[[r, col]] = parse_number(cell).ok_or_else(|| bad_cell(table, i, column))?;
                        col += 1;
                    }
                    ColumnStep::OneHot { levels, .. } => {
                        if let Some(k) = levels.iter().position(|l| l == cell) {
                            out[[r, col + k]] = 1.0;
                        }
                        col += levels.len();
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn transform(&self, table: &RawTable, rows: &[usize]) -> Result<Dataset> {
        let features = self.transform_features(table, rows)?;
        let t = table.column_index(&self.target)?;
        let target = rows
            .iter()
            .map(|&i| parse_number(&table.rows[i][t]).ok_or_else(|| bad_cell(table, i, &self.target)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            features,
            target: Array1::from(target),
            columns: self.columns(),
            target_name: self.target.clone(),
        })
    }
}

fn bad_cell(table: &RawTable, row: usize, column: &str) -> RrmError {
    RrmError::Data {
        path: table.path.clone(),
        message: format!("row {}: invalid value in column `{column}`", row + 1),
    }
}

/// Mean and sample standard deviation.
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Options for [`load_csv`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub target: String,
    pub categorical: Vec<String>,
    pub standardize: bool,
}

impl LoadOptions {
    pub fn new(target: impl Into<String>) -> Self {
        LoadOptions {
            target: target.into(),
            categorical: Vec::new(),
            standardize: true,
        }
    }
}

/// Result of [`load_csv`]: the dataset, the fitted preprocessing and how many rows were dropped.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub preprocessor: Preprocessor,
    pub dropped_rows: usize,
}

/// Reads a CSV file, drops invalid rows, and fits + applies preprocessing on all rows.
pub fn load_csv(path: &Path, opts: &LoadOptions) -> Result<Loaded> {
    let mut table = RawTable::read(path)?;
    table.column_index(&opts.target)?;
    let dropped_rows = table.drop_invalid(Some(&opts.target), &opts.categorical)?;
    if dropped_rows > 0 {
        log::warn!("{}: dropped {dropped_rows} rows with missing or invalid values", path.display());
    }
    if table.rows.is_empty() {
        return Err(RrmError::Data {
            path: path.to_path_buf(),
            message: "no usable rows".into(),
        });
    }
    let rows: Vec<usize> = (0..table.rows.len()).collect();
    let preprocessor = Preprocessor::fit(
        &table,
        &rows,
        &opts.target,
        &PreprocessOptions {
            categorical: opts.categorical.clone(),
            standardize: opts.standardize,
        },
    )?;
    let dataset = preprocessor.transform(&table, &rows)?;
    Ok(Loaded {
        dataset,
        preprocessor,
        dropped_rows,
    })
}
