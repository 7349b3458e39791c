//! Experiment configuration files (TOML).
//!
//! ```toml
//! [dataset]
//! kind = "simulation"        # or "csv"
//! model = 1                  # simulation: model id 1..=8
//! n = 1000                   # simulation: number of rows
//! seed = 2024                # simulation: generator seed
//! noise_arg = "variance"     # simulation: "variance" or "sd"
//! # path = "data.csv"        # csv: input file
//! # target = "y"             # csv: target column
//! # categorical = ["color"]  # csv: columns to one-hot encode
//! # standardize = true       # csv: scale continuous columns
//!
//! [methods]
//! include = ["SVR.Lin", "SVR.Pol", "SVR.Gau", "SVR.Lap",
//!            "BSVR.Lin", "BSVR.Pol", "BSVR.Gau", "BSVR.Lap", "RRM"]
//!
//! [params]
//! gamma = 1.0
//! degree = 2
//! c = 1.0
//! epsilon = 0.1
//! tol = 0.001
//! b = 100
//! beta = 2.0
//!
//! [experiment]
//! operation = "holdout"      # "holdout", "sweep-beta" or "sweep-gamma"
//! repetitions = 30
//! split = 0.7
//! seed = 0
//! pilot_split = "test"       # or "inner"
//!
//! [sweeps]
//! beta = [0.0, 0.25, 0.5]    # default: 0 to 5 in steps of 0.25
//! gamma = [0.5, 1.0, 2.0]    # default: 2^-3 .. 2^3
//!
//! [output]
//! dir = "results"
//! ```
//!
//! Every section and key is optional except `[dataset]`; omitted values take
//! the defaults shown. Unknown sections, keys and method names are errors.
//! Relative paths (`path`, `dir`) are taken relative to the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::datagen::{NoiseArg, SimSpec};
use crate::error::{Result, RrmError};
use crate::harness::{default_beta_grid, default_gamma_grid, DataSource, ExperimentConfig, Method, ModelParams, PilotSplit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    #[default]
    Holdout,
    SweepBeta,
    SweepGamma,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    dataset: DatasetSection,
    #[serde(default)]
    methods: MethodsSection,
    #[serde(default)]
    params: ParamsSection,
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default)]
    sweeps: SweepsSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum DatasetKind {
    Simulation,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetSection {
    kind: DatasetKind,
    model: Option<u8>,
    n: Option<usize>,
    seed: Option<u64>,
    noise_arg: Option<NoiseArg>,
    path: Option<PathBuf>,
    target: Option<String>,
    #[serde(default)]
    categorical: Vec<String>,
    standardize: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MethodsSection {
    include: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsSection {
    gamma: Option<f64>,
    degree: Option<u32>,
    c: Option<f64>,
    epsilon: Option<f64>,
    tol: Option<f64>,
    b: Option<usize>,
    beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    #[serde(default)]
    operation: Operation,
    repetitions: Option<usize>,
    split: Option<f64>,
    seed: Option<u64>,
    pilot_split: Option<PilotSplit>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepsSection {
    beta: Option<Vec<f64>>,
    gamma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub operation: Operation,
    pub beta_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub output_dir: PathBuf,
}

fn require<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| RrmError::Config(format!("missing key `{key}`")))
}

/// Parses configuration text. Relative paths are resolved against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let file: FileConfig = toml::from_str(text).map_err(|e| RrmError::Config(e.to_string()))?;
    let d = file.dataset;
    let source = match d.kind {
        DatasetKind::Simulation => {
            for (key, set) in [
                ("path", d.path.is_some()),
                ("target", d.target.is_some()),
                ("categorical", !d.categorical.is_empty()),
                ("standardize", d.standardize.is_some()),
            ] {
                if set {
                    return Err(RrmError::Config(format!("`dataset.{key}` applies only to kind = \"csv\"")));
                }
            }
            let spec = SimSpec::new(
                require(d.model, "dataset.model")?,
                require(d.n, "dataset.n")?,
                d.seed.unwrap_or(0),
            )
            .map_err(|e| RrmError::Config(format!("dataset: {e}")))?;
            DataSource::Simulation(spec.with_noise_arg(d.noise_arg.unwrap_or_default()))
        }
        DatasetKind::Csv => {
            for (key, set) in [
                ("model", d.model.is_some()),
                ("n", d.n.is_some()),
                ("seed", d.seed.is_some()),
                ("noise_arg", d.noise_arg.is_some()),
            ] {
                if set {
                    return Err(RrmError::Config(format!(
                        "`dataset.{key}` applies only to kind = \"simulation\""
                    )));
                }
            }
            let path = require(d.path, "dataset.path")?;
            DataSource::Csv {
                path: if path.is_relative() { base.join(path) } else { path },
                target: require(d.target, "dataset.target")?,
                categorical: d.categorical,
                standardize: d.standardize.unwrap_or(true),
            }
        }
    };
    let methods = match file.methods.include {
        None => Method::all(),
        Some(names) => names
            .iter()
            .map(|n| {
                n.parse::<Method>()
                    .map_err(|_| RrmError::Config(format!("methods.include: unknown method `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let def = ModelParams::default();
    let p = file.params;
    let params = ModelParams {
        gamma: p.gamma.unwrap_or(def.gamma),
        degree: p.degree.unwrap_or(def.degree),
        c: p.c.unwrap_or(def.c),
        epsilon: p.epsilon.unwrap_or(def.epsilon),
        tol: p.tol.unwrap_or(def.tol),
        b: p.b.unwrap_or(def.b),
        beta: p.beta.unwrap_or(def.beta),
    };
    let mut experiment = ExperimentConfig::new(source);
    experiment.methods = methods;
    experiment.params = params;
    let e = file.experiment;
    if let Some(r) = e.repetitions {
        experiment.repetitions = r;
    }
    if let Some(s) = e.split {
        experiment.split = s;
    }
    experiment.master_seed = e.seed.unwrap_or(0);
    experiment.pilot_split = e.pilot_split.unwrap_or_default();
    experiment
        .validate()
        .map_err(|err| match err {
            RrmError::Config(_) => err,
            other => RrmError::Config(other.to_string()),
        })?;
    let beta_grid = file.sweeps.beta.unwrap_or_else(default_beta_grid);
    let gamma_grid = file.sweeps.gamma.unwrap_or_else(default_gamma_grid);
    if beta_grid.is_empty() || gamma_grid.is_empty() {
        return Err(RrmError::Config("sweep grids must not be empty".into()));
    }
    Ok(RunConfig {
        experiment,
        operation: e.operation,
        beta_grid,
        gamma_grid,
        output_dir: base.join(file.output.dir.unwrap_or_else(|| PathBuf::from("results"))),
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base).map_err(|e| match e {
        RrmError::Config(msg) => RrmError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
