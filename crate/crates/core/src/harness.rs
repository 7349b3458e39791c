//! Repeated-holdout experiments: method comparisons, win proportions and
//! β/γ sweeps.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bagging;
use crate::data::{mean_sd, Dataset, PreprocessOptions, Preprocessor, RawTable};
use crate::datagen::{self, SimSpec};
use crate::error::{Result, RrmError};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::machines::{self, PilotErrors, RrmConfig};
use crate::metrics::{agreement, error_score, rmse};
use crate::par;
use crate::seed;
use crate::svr::{self, SvrParams};

/// Share of the training rows used to score pilots with [`PilotSplit::Inner`].
pub const INNER_PILOT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Svr(KernelFamily),
    Bsvr(KernelFamily),
    Rrm,
}

impl Method {
    /// `SVR.*` for the four kernels, then `BSVR.*`, then `RRM`.
    pub fn all() -> Vec<Method> {
        let mut v: Vec<Method> = KernelFamily::ALL.iter().map(|&k| Method::Svr(k)).collect();
        v.extend(KernelFamily::ALL.iter().map(|&k| Method::Bsvr(k)));
        v.push(Method::Rrm);
        v
    }

    pub fn is_ensemble(self) -> bool {
        !matches!(self, Method::Svr(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Svr(k) => write!(f, "SVR.{}", k.short()),
            Method::Bsvr(k) => write!(f, "BSVR.{}", k.short()),
            Method::Rrm => f.write_str("RRM"),
        }
    }
}

impl FromStr for Method {
    type Err = RrmError;
    fn from_str(s: &str) -> Result<Self> {
        Method::all()
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                RrmError::Config(format!(
                    "unknown method `{s}` (expected one of SVR.Lin, SVR.Pol, SVR.Gau, SVR.Lap, BSVR.Lin, BSVR.Pol, BSVR.Gau, BSVR.Lap, RRM)"
                ))
            })
    }
}

impl TryFrom<String> for Method {
    type Error = RrmError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

/// Where RRM's pilot models are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PilotSplit {
    /// The repetition's test split.
    #[default]
    Test,
    /// A held-out 20% of the training split; pilots are fit on the rest.
    Inner,
}

impl FromStr for PilotSplit {
    type Err = RrmError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "test" => Ok(PilotSplit::Test),
            "inner" => Ok(PilotSplit::Inner),
            other => Err(RrmError::InvalidParameter(format!(
                "pilot split must be `test` or `inner`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for PilotSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PilotSplit::Test => "test",
            PilotSplit::Inner => "inner",
        })
    }
}

/// Hyperparameters shared by every method in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub degree: u32,
    pub c: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub b: usize,
    pub beta: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            gamma: 1.0,
            degree: 2,
            c: 1.0,
            epsilon: 0.1,
            tol: 1e-3,
            b: 100,
            beta: 2.0,
        }
    }
}

impl ModelParams {
    pub fn kernel(&self, family: KernelFamily) -> Result<KernelSpec> {
        KernelSpec::new(family, self.gamma, self.degree)
    }

    pub fn svr_params(&self) -> Result<SvrParams> {
        Ok(SvrParams::new(self.c, self.epsilon)?.with_tol(self.tol))
    }

    pub fn rrm_config(&self) -> Result<RrmConfig> {
        let cfg = RrmConfig {
            kernels: KernelSpec::standard_set(self.gamma, self.degree)?,
            b: self.b,
            beta: self.beta,
            svr_params: self.svr_params()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.rrm_config().map(|_| ())
    }

    /// Compact `key=value;...` label stored with every record.
    pub fn label(&self) -> String {
        format!(
            "gamma={};degree={};c={};epsilon={};b={};beta={}",
            self.gamma, self.degree, self.c, self.epsilon, self.b, self.beta
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Simulation(SimSpec),
    Csv {
        path: PathBuf,
        target: String,
        categorical: Vec<String>,
        standardize: bool,
    },
}

impl DataSource {
    pub fn label(&self) -> String {
        match self {
            DataSource::Simulation(s) => format!("model{}_n{}", s.model_id, s.n),
            DataSource::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub methods: Vec<Method>,
    pub params: ModelParams,
    pub repetitions: usize,
    /// Training fraction of each split.
    pub split: f64,
    pub master_seed: u64,
    pub pilot_split: PilotSplit,
}

impl ExperimentConfig {
    pub fn new(source: DataSource) -> Self {
        ExperimentConfig {
            source,
            methods: Method::all(),
            params: ModelParams::default(),
            repetitions: 30,
            split: 0.7,
            master_seed: 0,
            pilot_split: PilotSplit::Test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(RrmError::Config("repetitions must be >= 1".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(RrmError::Config(format!("split must be in (0, 1), got {}", self.split)));
        }
        if self.methods.is_empty() {
            return Err(RrmError::Config("no methods configured".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(RrmError::Config(format!("method {m} listed twice")));
            }
        }
        if let DataSource::Simulation(s) = &self.source {
            s.validate()?;
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rmse,
    ErrorScore,
    Agreement,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::ErrorScore => "error_score",
            Metric::Agreement => "agreement",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub dataset: String,
    pub method: String,
    pub repetition: usize,
    pub metric: Metric,
    pub value: f64,
    pub parameters: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub dataset: String,
    pub method: String,
    pub repetition: usize,
    pub parameters: String,
    pub message: String,
}

/// Long-format results.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultsTable {
    pub records: Vec<Record>,
    pub failures: Vec<Failure>,
}

/// Mean of one `(dataset, parameters, method, metric)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub parameters: String,
    pub method: String,
    pub metric: Metric,
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

impl ResultsTable {
    pub fn append(&mut self, other: ResultsTable) {
        self.records.extend(other.records);
        self.failures.extend(other.failures);
    }

    pub fn values(&self, method: &str, metric: Metric) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.method == method && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    /// Mean of `metric` for `method` over every record, or `None` without records.
    pub fn mean(&self, method: &str, metric: Metric) -> Option<f64> {
        let v = self.values(method, metric);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Records as CSV: `dataset,method,repetition,metric,value,parameters`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dataset", "method", "repetition", "metric", "value", "parameters"])?;
        for r in &self.records {
            w.write_record([
                r.dataset.as_str(),
                r.method.as_str(),
                &r.repetition.to_string(),
                r.metric.as_str(),
                &fmt_f64(r.value),
                r.parameters.as_str(),
            ])?;
        }
        w.into_inner().map_err(|e| RrmError::Io(e.into_error()))
    }

    pub fn failures_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dataset", "method", "repetition", "parameters", "message"])?;
        for f in &self.failures {
            w.write_record([
                f.dataset.as_str(),
                f.method.as_str(),
                &f.repetition.to_string(),
                f.parameters.as_str(),
                f.message.as_str(),
            ])?;
        }
        w.into_inner().map_err(|e| RrmError::Io(e.into_error()))
    }

    /// Per-group means in first-appearance order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut order: Vec<(String, String, String, Metric)> = Vec::new();
        let mut groups: HashMap<(String, String, String, Metric), Vec<f64>> = HashMap::new();
        for r in &self.records {
            let key = (r.dataset.clone(), r.parameters.clone(), r.method.clone(), r.metric);
            groups
                .entry(key.clone())
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(r.value);
        }
        order
            .into_iter()
            .map(|key| {
                let v = &groups[&key];
                let (mean, sd) = mean_sd(v);
                SummaryRow {
                    dataset: key.0,
                    parameters: key.1,
                    method: key.2,
                    metric: key.3,
                    mean,
                    sd,
                    count: v.len(),
                }
            })
            .collect()
    }

    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dataset", "parameters", "method", "metric", "mean", "sd", "count"])?;
        for s in self.summary() {
            w.write_record([
                s.dataset.as_str(),
                s.parameters.as_str(),
                s.method.as_str(),
                s.metric.as_str(),
                &fmt_f64(s.mean),
                &fmt_f64(s.sd),
                &s.count.to_string(),
            ])?;
        }
        w.into_inner().map_err(|e| RrmError::Io(e.into_error()))
    }

    /// Aligned plain-text summary: one block per `(dataset, parameters)` with
    /// a row per method and a column per metric (mean ± sd).
    pub fn summary_text(&self) -> String {
        let rows = self.summary();
        let mut blocks: Vec<(String, String)> = Vec::new();
        for r in &rows {
            let k = (r.dataset.clone(), r.parameters.clone());
            if !blocks.contains(&k) {
                blocks.push(k);
            }
        }
        let metrics = [Metric::Rmse, Metric::ErrorScore, Metric::Agreement];
        let mut out = String::new();
        for (dataset, params) in blocks {
            let _ = writeln!(out, "{dataset}  [{params}]");
            let mut methods: Vec<&str> = Vec::new();
            for r in rows.iter().filter(|r| r.dataset == dataset && r.parameters == params) {
                if !methods.contains(&r.method.as_str()) {
                    methods.push(&r.method);
                }
            }
            let cell = |m: &str, metric: Metric| {
                rows.iter()
                    .find(|r| r.dataset == dataset && r.parameters == params && r.method == m && r.metric == metric)
                    .map(|r| format!("{:.4} ± {:.4}", r.mean, r.sd))
                    .unwrap_or_else(|| "-".into())
            };
            let width = methods.iter().map(|m| m.len()).max().unwrap_or(6).max(6);
            let _ = write!(out, "  {:<width$}", "method");
            for m in metrics {
                let _ = write!(out, "  {:>17}", m.as_str());
            }
            out.push('\n');
            for m in &methods {
                let _ = write!(out, "  {m:<width$}");
                for metric in metrics {
                    let _ = write!(out, "  {:>17}", cell(m, metric));
                }
                out.push('\n');
            }
            out.push('\n');
        }
        if !self.failures.is_empty() {
            let _ = writeln!(out, "{} method failures (see failures.csv)", self.failures.len());
        }
        out
    }
}

/// Training and test row counts: training is `⌊split·n⌋`, capped so at least
/// one test row remains.
pub fn split_sizes(n: usize, split: f64) -> Result<(usize, usize)> {
    let train = ((split * n as f64).floor() as usize).min(n.saturating_sub(1));
    if train < 2 {
        return Err(RrmError::TooFewRows { needed: 3, got: n });
    }
    Ok((train, n - train))
}

/// Shuffled train/test row indices for one repetition.
pub fn holdout_split(n: usize, split: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let (n_train, _) = split_sizes(n, split)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed));
    let test = perm.split_off(n_train);
    Ok((perm, test))
}

enum Loaded {
    Ready(Dataset),
    Raw {
        table: RawTable,
        target: String,
        opts: PreprocessOptions,
    },
}

impl Loaded {
    fn n(&self) -> usize {
        match self {
            Loaded::Ready(d) => d.n(),
            Loaded::Raw { table, .. } => table.rows.len(),
        }
    }

    /// Train and test sets; preprocessing is fit on the training rows only.
    fn split(&self, train: &[usize], test: &[usize]) -> Result<(Dataset, Dataset)> {
        match self {
            Loaded::Ready(d) => Ok((d.subset(train), d.subset(test))),
            Loaded::Raw { table, target, opts } => {
                let pre = Preprocessor::fit(table, train, target, opts)?;
                Ok((pre.transform(table, train)?, pre.transform(table, test)?))
            }
        }
    }
}

fn load_source(source: &DataSource) -> Result<Loaded> {
    match source {
        DataSource::Simulation(spec) => Ok(Loaded::Ready(datagen::generate(spec)?)),
        DataSource::Csv {
            path,
            target,
            categorical,
            standardize,
        } => {
            let mut table = RawTable::read(path)?;
            let dropped = table.drop_invalid(Some(target), categorical)?;
            if dropped > 0 {
                log::warn!("{}: dropped {dropped} rows with missing or invalid values", path.display());
            }
            if table.rows.is_empty() {
                return Err(RrmError::Data {
                    path: path.clone(),
                    message: "no usable rows".into(),
                });
            }
            Ok(Loaded::Raw {
                table,
                target: target.clone(),
                opts: PreprocessOptions {
                    categorical: categorical.clone(),
                    standardize: *standardize,
                },
            })
        }
    }
}

/// Test-set RMSE and, for ensembles, the member agreement.
struct Outcome {
    rmse: f64,
    agreement: Option<f64>,
}

fn member_agreement(preds: &Array2<f64>) -> Option<f64> {
    match agreement(preds.view()) {
        Ok(a) => Some(a.value),
        Err(e) => {
            log::debug!("agreement not recorded: {e}");
            None
        }
    }
}

/// Pilot errors from an inner split: pilots are fit on a shuffled 80% of
/// `train` and scored on the remaining 20%.
pub fn inner_pilot_errors(train: &Dataset, cfg: &RrmConfig, seed: u64) -> Result<PilotErrors> {
    let n_hold = ((INNER_PILOT_FRACTION * train.n() as f64).round() as usize).max(1);
    let n_fit = train
        .n()
        .checked_sub(n_hold)
        .filter(|&k| k >= 2)
        .ok_or(RrmError::TooFewRows { needed: 3, got: train.n() })?;
    let mut perm: Vec<usize> = (0..train.n()).collect();
    perm.shuffle(&mut seed::child_rng(seed, 0));
    machines::pilot_errors(
        &train.subset(&perm[..n_fit]),
        &train.subset(&perm[n_fit..]),
        &cfg.kernels,
        &cfg.svr_params,
    )
}

fn evaluate(
    method: Method,
    train: &Dataset,
    test: &Dataset,
    config: &ExperimentConfig,
    rep_seed: u64,
) -> Result<Outcome> {
    let params = &config.params;
    let svr_params = params.svr_params()?;
    let method_seed = seed::derive(rep_seed, seed::label_tag(&method.to_string()));
    let y = test.target.view();
    match method {
        Method::Svr(family) => {
            let m = svr::train_svr(train.features.view(), train.target.view(), &params.kernel(family)?, &svr_params)?;
            let pred = m.predict(test.features.view())?;
            Ok(Outcome {
                rmse: rmse(y, pred.view())?,
                agreement: None,
            })
        }
        Method::Bsvr(family) => {
            let m = bagging::train_bagged_svr(train, &params.kernel(family)?, params.b, &svr_params, method_seed)?;
            let preds = bagging::member_predictions(&m.members, test.features.view())?;
            let pred = bagging::mean_rows(preds.view());
            Ok(Outcome {
                rmse: rmse(y, pred.view())?,
                agreement: member_agreement(&preds),
            })
        }
        Method::Rrm => {
            let cfg = params.rrm_config()?;
            let model = match config.pilot_split {
                PilotSplit::Test => machines::train_rrm(train, test, &cfg, method_seed)?,
                PilotSplit::Inner => {
                    let pilots = inner_pilot_errors(train, &cfg, method_seed)?;
                    machines::train_rrm_with_pilots(train, pilots, &cfg, seed::derive(method_seed, 1))?
                }
            };
            let preds = bagging::member_predictions(&model.members, test.features.view())?;
            let pred = machines::weighted_sum(preds.view(), &model.member_weights)?;
            Ok(Outcome {
                rmse: rmse(y, pred.view())?,
                agreement: member_agreement(&preds),
            })
        }
    }
}

fn run_repetition(data: &Loaded, config: &ExperimentConfig, dataset: &str, rep: usize) -> ResultsTable {
    let parameters = config.params.label();
    let rep_seed = seed::derive(config.master_seed, rep as u64);
    let mut out = ResultsTable::default();
    let fail = |out: &mut ResultsTable, method: String, e: RrmError| {
        log::warn!("{dataset} repetition {rep} {method}: {e}");
        out.failures.push(Failure {
            dataset: dataset.to_string(),
            method,
            repetition: rep,
            parameters: parameters.clone(),
            message: e.to_string(),
        });
    };
    let sets = holdout_split(data.n(), config.split, seed::derive(rep_seed, 0))
        .and_then(|(tr, te)| data.split(&tr, &te));
    let (train, test) = match sets {
        Ok(s) => s,
        Err(e) => {
            fail(&mut out, "*".into(), e);
            return out;
        }
    };
    let rec = |method: &str, metric: Metric, value: f64| Record {
        dataset: dataset.to_string(),
        method: method.to_string(),
        repetition: rep,
        metric,
        value,
        parameters: parameters.clone(),
    };
    let mut survivors: Vec<(String, f64)> = Vec::new();
    for &method in &config.methods {
        let name = method.to_string();
        match evaluate(method, &train, &test, config, rep_seed) {
            Ok(o) => {
                out.records.push(rec(&name, Metric::Rmse, o.rmse));
                if let Some(a) = o.agreement {
                    out.records.push(rec(&name, Metric::Agreement, a));
                }
                survivors.push((name, o.rmse));
            }
            Err(e) => fail(&mut out, name, e),
        }
    }
    if survivors.len() >= 2 {
        let errs: Vec<f64> = survivors.iter().map(|s| s.1).collect();
        if let Ok(es) = error_score(&errs) {
            for ((name, _), s) in survivors.iter().zip(es.scores) {
                out.records.push(rec(name, Metric::ErrorScore, s));
            }
        }
    }
    out
}

/// Repeated holdout: every repetition shuffles with a seed derived from
/// `(master_seed, repetition)`, splits, and fits all methods on the same
/// split. Method failures are recorded and do not stop the run.
pub fn run_repeated_holdout(config: &ExperimentConfig) -> Result<ResultsTable> {
    config.validate()?;
    let data = load_source(&config.source)?;
    split_sizes(data.n(), config.split)?;
    let dataset = config.source.label();
    let parts = par::map(config.repetitions, |rep| run_repetition(&data, config, &dataset, rep));
    let mut table = ResultsTable::default();
    for p in parts {
        table.append(p);
    }
    Ok(table)
}

/// Pairwise win proportions; `values[[a, b]]` is the share of shared
/// `(dataset, parameters, repetition)` cells where `a` had lower RMSE than `b`,
/// with ties counted as half. Pairs that never share a cell are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct WinMatrix {
    pub methods: Vec<String>,
    pub values: Array2<f64>,
}

impl WinMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.methods.iter().position(|m| m == a)?;
        let j = self.methods.iter().position(|m| m == b)?;
        Some(self.values[[i, j]])
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string()];
        header.extend(self.methods.iter().cloned());
        w.write_record(&header)?;
        for (i, m) in self.methods.iter().enumerate() {
            let mut row = vec![m.clone()];
            row.extend(self.values.row(i).iter().map(|&v| fmt_f64(v)));
            w.write_record(&row)?;
        }
        w.into_inner().map_err(|e| RrmError::Io(e.into_error()))
    }
}

pub fn win_proportions(results: &ResultsTable) -> Result<WinMatrix> {
    let mut methods: Vec<String> = Vec::new();
    let mut cells: HashMap<(&str, &str, usize), HashMap<usize, f64>> = HashMap::new();
    for r in results.records.iter().filter(|r| r.metric == Metric::Rmse) {
        let m = match methods.iter().position(|x| *x == r.method) {
            Some(i) => i,
            None => {
                methods.push(r.method.clone());
                methods.len() - 1
            }
        };
        cells
            .entry((r.dataset.as_str(), r.parameters.as_str(), r.repetition))
            .or_default()
            .insert(m, r.value);
    }
    let k = methods.len();
    let mut wins = Array2::<f64>::zeros((k, k));
    let mut shared = Array2::<f64>::zeros((k, k));
    for cell in cells.values() {
        for (&a, &ra) in cell {
            for (&b, &rb) in cell {
                shared[[a, b]] += 1.0;
                wins[[a, b]] += if ra < rb {
                    1.0
                } else if ra == rb {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    let overlap = (0..k).any(|a| (0..k).any(|b| a != b && shared[[a, b]] > 0.0));
    if !overlap {
        return Err(RrmError::NoOverlap);
    }
    let values = Array2::from_shape_fn((k, k), |(a, b)| {
        if shared[[a, b]] > 0.0 {
            wins[[a, b]] / shared[[a, b]]
        } else {
            f64::NAN
        }
    });
    Ok(WinMatrix { methods, values })
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(RrmError::InvalidParameter(format!(
            "grid needs lo < hi and at least 2 points, got ({lo}, {hi}, {points})"
        )));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| if i == points - 1 { hi } else { lo + step * i as f64 }).collect())
}

/// β grid 0, 0.25, …, 5.
pub fn default_beta_grid() -> Vec<f64> {
    linear_grid(0.0, 5.0, 21).expect("valid grid")
}

/// γ grid 2⁻³, …, 2³.
pub fn default_gamma_grid() -> Vec<f64> {
    (-3..=3).map(|k| 2f64.powi(k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Beta,
    Gamma,
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParameter::Beta => "beta",
            SweepParameter::Gamma => "gamma",
        })
    }
}

/// Per-method means at one grid value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub method: String,
    pub mean_rmse: f64,
    /// `mean_rmse` centred and scaled by its mean and sample sd across the
    /// grid for this method (0 when the sd is 0).
    pub standardized_rmse: f64,
    pub mean_agreement: Option<f64>,
    pub mean_error_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub table: ResultsTable,
}

impl SweepResult {
    pub fn point(&self, method: &str, value: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.method == method && p.value == value)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            self.parameter.to_string().as_str(),
            "method",
            "mean_rmse",
            "standardized_rmse",
            "mean_agreement",
            "mean_error_score",
        ])?;
        for p in &self.points {
            w.write_record([
                fmt_f64(p.value),
                p.method.clone(),
                fmt_f64(p.mean_rmse),
                fmt_f64(p.standardized_rmse),
                opt(p.mean_agreement),
                opt(p.mean_error_score),
            ])?;
        }
        w.into_inner().map_err(|e| RrmError::Io(e.into_error()))
    }
}

/// Runs one repeated holdout per grid value, substituting the value into
/// the configuration. All grid points share the master seed, so they see
/// the same splits.
pub fn sweep(config: &ExperimentConfig, parameter: SweepParameter, grid: &[f64]) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(RrmError::InvalidParameter("empty sweep grid".into()));
    }
    if parameter == SweepParameter::Beta && !config.methods.contains(&Method::Rrm) {
        return Err(RrmError::Config("a beta sweep needs RRM among the methods".into()));
    }
    let mut table = ResultsTable::default();
    let mut raw: Vec<SweepPoint> = Vec::new();
    for &v in grid {
        let mut cfg = config.clone();
        match parameter {
            SweepParameter::Beta => cfg.params.beta = v,
            SweepParameter::Gamma => cfg.params.gamma = v,
        }
        let t = run_repeated_holdout(&cfg)?;
        for m in &cfg.methods {
            let name = m.to_string();
            if let Some(mean_rmse) = t.mean(&name, Metric::Rmse) {
                raw.push(SweepPoint {
                    value: v,
                    method: name.clone(),
                    mean_rmse,
                    standardized_rmse: 0.0,
                    mean_agreement: t.mean(&name, Metric::Agreement),
                    mean_error_score: t.mean(&name, Metric::ErrorScore),
                });
            }
        }
        table.append(t);
    }
    for m in &config.methods {
        let name = m.to_string();
        let vals: Vec<f64> = raw.iter().filter(|p| p.method == name).map(|p| p.mean_rmse).collect();
        let (mean, sd) = mean_sd(&vals);
        for p in raw.iter_mut().filter(|p| p.method == name) {
            p.standardized_rmse = if sd > 0.0 { (p.mean_rmse - mean) / sd } else { 0.0 };
        }
    }
    Ok(SweepResult {
        parameter,
        grid: grid.to_vec(),
        points: raw,
        table,
    })
}

pub fn beta_sweep(config: &ExperimentConfig, grid: &[f64]) -> Result<SweepResult> {
    sweep(config, SweepParameter::Beta, grid)
}

pub fn gamma_sweep(config: &ExperimentConfig, grid: &[f64]) -> Result<SweepResult> {
    sweep(config, SweepParameter::Gamma, grid)
}
