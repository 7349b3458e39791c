//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::{Array2, Axis};

use crate::bagging;
use crate::config::{load_config, Operation, RunConfig};
use crate::data::{atomic_write, csv_bytes, load_csv, write_csv, LoadOptions, RawTable};
use crate::datagen::{self, NoiseArg, SimSpec};
use crate::error::{Result, RrmError};
use crate::harness::{
    self, win_proportions, DataSource, Method, ModelParams, PilotSplit, ResultsTable, SweepParameter,
};
use crate::machines;
use crate::model_io::{ModelFile, StoredModel};
use crate::par;
use crate::seed;
use crate::svr;

#[derive(Debug, Parser)]
#[command(name = "rrm", version, about = "Regression Random Machines")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "RRM_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Write a simulated data set as CSV.
    Datagen(DatagenArgs),
    /// Fit one model on a CSV file and save it.
    Fit(FitArgs),
    /// Predict a CSV file with a saved model.
    Predict(PredictArgs),
    /// Sweep β over a grid for the configured experiment.
    SweepBeta(SweepArgs),
    /// Sweep γ over a grid for the configured experiment.
    SweepGamma(SweepArgs),
    /// Evaluate a saved model and a simulation's true surface on a 2-D grid.
    Surface(SurfaceArgs),
}

#[derive(Debug, Args)]
pub struct ExperimentOverrides {
    /// Master seed (overrides the config file).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides the config file).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where RRM scores its pilot models.
    #[arg(long, value_parser = parse_pilot_split)]
    pub pilot_split: Option<PilotSplit>,
    /// How to read the simulation noise argument.
    #[arg(long, value_parser = parse_noise_arg)]
    pub noise_arg: Option<NoiseArg>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (TOML).
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: ExperimentOverrides,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Experiment config (TOML).
    pub config: PathBuf,
    /// Comma-separated grid values (overrides the config file).
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub overrides: ExperimentOverrides,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    /// Simulation model id (1-8).
    #[arg(long)]
    pub model: u8,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_noise_arg, default_value = "variance")]
    pub noise_arg: NoiseArg,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Number of bootstrap members.
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
}

impl ParamArgs {
    fn resolve(&self) -> ModelParams {
        let d = ModelParams::default();
        ModelParams {
            gamma: self.gamma.unwrap_or(d.gamma),
            degree: self.degree.unwrap_or(d.degree),
            c: self.c.unwrap_or(d.c),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            tol: self.tol.unwrap_or(d.tol),
            b: self.b.unwrap_or(d.b),
            beta: self.beta.unwrap_or(d.beta),
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub target: String,
    /// Comma-separated categorical columns.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    /// Keep continuous columns on their original scale.
    #[arg(long)]
    pub no_standardize: bool,
    /// Method name, e.g. RRM, BSVR.Gau or SVR.Lin.
    #[arg(long, default_value = "RRM")]
    pub method: String,
    /// CSV used to score the RRM pilot models with `--pilot-split test`.
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    /// `test` scores pilots on `--holdout`; `inner` (the default without
    /// `--holdout`) on 20% of the training rows.
    #[arg(long, value_parser = parse_pilot_split)]
    pub pilot_split: Option<PilotSplit>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model_file: PathBuf,
    /// CSV with the model's input columns.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub model_file: PathBuf,
    /// Simulation model whose true surface is evaluated.
    #[arg(long)]
    pub model_id: u8,
    /// Grid points per axis.
    #[arg(long, default_value_t = 50)]
    pub resolution: usize,
    /// Values of x3, x4, ... for models with more than two predictors.
    #[arg(long, value_delimiter = ',')]
    pub fixed: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_pilot_split(s: &str) -> std::result::Result<PilotSplit, String> {
    s.parse().map_err(|e: RrmError| e.to_string())
}

fn parse_noise_arg(s: &str) -> std::result::Result<NoiseArg, String> {
    s.parse().map_err(|e: RrmError| e.to_string())
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 2 for usage or configuration errors, 1 otherwise.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let threads = cli.threads;
    match par::with_threads(threads, move || execute(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                RrmError::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(a) => {
            let cfg = apply_overrides(load_config(&a.config)?, &a.overrides)?;
            match cfg.operation {
                Operation::Holdout => run_holdout(&cfg),
                Operation::SweepBeta => run_sweep(&cfg, SweepParameter::Beta, None),
                Operation::SweepGamma => run_sweep(&cfg, SweepParameter::Gamma, None),
            }
        }
        Command::SweepBeta(a) => {
            let cfg = apply_overrides(load_config(&a.config)?, &a.overrides)?;
            run_sweep(&cfg, SweepParameter::Beta, a.grid)
        }
        Command::SweepGamma(a) => {
            let cfg = apply_overrides(load_config(&a.config)?, &a.overrides)?;
            run_sweep(&cfg, SweepParameter::Gamma, a.grid)
        }
        Command::Datagen(a) => {
            let spec = SimSpec::new(a.model, a.n, a.seed)?.with_noise_arg(a.noise_arg);
            write_csv(&datagen::generate(&spec)?, &a.out)
        }
        Command::Fit(a) => fit(&a),
        Command::Predict(a) => predict(&a),
        Command::Surface(a) => surface(&a),
    }
}

fn apply_overrides(mut cfg: RunConfig, o: &ExperimentOverrides) -> Result<RunConfig> {
    if let Some(s) = o.seed {
        cfg.experiment.master_seed = s;
    }
    if let Some(d) = &o.out {
        cfg.output_dir = d.clone();
    }
    if let Some(p) = o.pilot_split {
        cfg.experiment.pilot_split = p;
    }
    if let Some(n) = o.noise_arg {
        match &mut cfg.experiment.source {
            DataSource::Simulation(s) => s.noise_arg = n,
            DataSource::Csv { .. } => {
                return Err(RrmError::Config("--noise-arg applies only to simulated data".into()));
            }
        }
    }
    Ok(cfg)
}

fn write_tables(dir: &Path, table: &ResultsTable) -> Result<()> {
    atomic_write(&dir.join("results.csv"), &table.to_csv()?)?;
    atomic_write(&dir.join("failures.csv"), &table.failures_csv()?)?;
    atomic_write(&dir.join("summary.csv"), &table.summary_csv()?)?;
    atomic_write(&dir.join("summary.txt"), table.summary_text().as_bytes())?;
    match win_proportions(table) {
        Ok(w) => atomic_write(&dir.join("win_proportions.csv"), &w.to_csv()?)?,
        Err(RrmError::NoOverlap) => {}
        Err(e) => return Err(e),
    }
    Ok(())
}

fn run_holdout(cfg: &RunConfig) -> Result<()> {
    let table = harness::run_repeated_holdout(&cfg.experiment)?;
    write_tables(&cfg.output_dir, &table)?;
    print!("{}", table.summary_text());
    Ok(())
}

fn run_sweep(cfg: &RunConfig, parameter: SweepParameter, grid: Option<Vec<f64>>) -> Result<()> {
    let grid = grid.unwrap_or_else(|| match parameter {
        SweepParameter::Beta => cfg.beta_grid.clone(),
        SweepParameter::Gamma => cfg.gamma_grid.clone(),
    });
    let res = harness::sweep(&cfg.experiment, parameter, &grid)?;
    write_tables(&cfg.output_dir, &res.table)?;
    atomic_write(&cfg.output_dir.join(format!("sweep_{parameter}.csv")), &res.to_csv()?)?;
    print!("{}", String::from_utf8_lossy(&res.to_csv()?));
    Ok(())
}

fn fit(a: &FitArgs) -> Result<()> {
    let method: Method = a.method.parse()?;
    let params = a.params.resolve();
    params.validate()?;
    let opts = LoadOptions {
        target: a.target.clone(),
        categorical: a.categorical.clone(),
        standardize: !a.no_standardize,
    };
    let loaded = load_csv(&a.data, &opts)?;
    let train = &loaded.dataset;
    let svr_params = params.svr_params()?;
    let model = match method {
        Method::Svr(k) => StoredModel::Svr(svr::train_svr(
            train.features.view(),
            train.target.view(),
            &params.kernel(k)?,
            &svr_params,
        )?),
        Method::Bsvr(k) => {
            StoredModel::BaggedSvr(bagging::train_bagged_svr(train, &params.kernel(k)?, params.b, &svr_params, a.seed)?)
        }
        Method::Rrm => {
            let cfg = params.rrm_config()?;
            let split = a.pilot_split.unwrap_or(if a.holdout.is_some() {
                PilotSplit::Test
            } else {
                PilotSplit::Inner
            });
            let pilots = match (split, &a.holdout) {
                (PilotSplit::Test, Some(path)) => {
                    let mut table = RawTable::read(path)?;
                    let dropped = table.drop_invalid(Some(&a.target), &a.categorical)?;
                    if dropped > 0 {
                        log::warn!("{}: dropped {dropped} invalid rows", path.display());
                    }
                    let rows: Vec<usize> = (0..table.rows.len()).collect();
                    let holdout = loaded.preprocessor.transform(&table, &rows)?;
                    machines::pilot_errors(train, &holdout, &cfg.kernels, &cfg.svr_params)?
                }
                (PilotSplit::Test, None) => {
                    return Err(RrmError::Config("--pilot-split test needs --holdout".into()));
                }
                (PilotSplit::Inner, _) => harness::inner_pilot_errors(train, &cfg, a.seed)?,
            };
            StoredModel::Rrm(machines::train_rrm_with_pilots(train, pilots, &cfg, seed::derive(a.seed, 1))?)
        }
    };
    let names = train.feature_names().iter().map(|s| s.to_string()).collect();
    let file = ModelFile::new(
        method.to_string(),
        names,
        train.target_name.clone(),
        Some(loaded.preprocessor),
        model,
    );
    file.save(&a.out)
}

/// Model inputs for every row of `table`.
fn model_inputs(file: &ModelFile, table: &RawTable) -> Result<Array2<f64>> {
    let rows: Vec<usize> = (0..table.rows.len()).collect();
    if let Some(pre) = &file.preprocessor {
        return pre.transform_features(table, &rows);
    }
    let idx: Vec<usize> = file
        .feature_names
        .iter()
        .map(|n| table.column_index(n))
        .collect::<Result<_>>()?;
    let mut x = Array2::zeros((rows.len(), idx.len()));
    for (i, row) in table.rows.iter().enumerate() {
        for (j, &c) in idx.iter().enumerate() {
            let cell = row.get(c).map(String::as_str).unwrap_or("");
            x[[i, j]] = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| RrmError::Data {
                path: table.path.clone(),
                message: format!("row {}: invalid value in column `{}`", i + 1, file.feature_names[j]),
            })?;
        }
    }
    Ok(x)
}

fn predict(a: &PredictArgs) -> Result<()> {
    let file = ModelFile::load(&a.model_file)?;
    let table = RawTable::read(&a.data)?;
    let x = model_inputs(&file, &table)?;
    let pred = file.model.predict(x.view())?;
    let col = pred.view().insert_axis(Axis(1));
    atomic_write(&a.out, &csv_bytes(&["prediction"], &[col])?)
}

/// Grid coordinates: `resolution` evenly spaced points on [0, 1].
pub fn unit_grid(resolution: usize) -> Result<Vec<f64>> {
    match resolution {
        0 => Err(RrmError::InvalidParameter("resolution must be >= 1".into())),
        1 => Ok(vec![0.5]),
        r => Ok((0..r).map(|i| i as f64 / (r - 1) as f64).collect()),
    }
}

fn surface(a: &SurfaceArgs) -> Result<()> {
    let p = datagen::dim(a.model_id)?;
    if p > 2 && a.fixed.len() != p - 2 {
        return Err(RrmError::InvalidParameter(format!(
            "model {} has {p} predictors; pass --fixed with {} values for x3..x{p}",
            a.model_id,
            p - 2
        )));
    }
    if p == 2 && !a.fixed.is_empty() {
        return Err(RrmError::InvalidParameter(format!("model {} has no extra predictors to fix", a.model_id)));
    }
    let file = ModelFile::load(&a.model_file)?;
    let g = unit_grid(a.resolution)?;
    let m = g.len() * g.len();
    let mut raw = Array2::zeros((m, p));
    for (i, &x1) in g.iter().enumerate() {
        for (j, &x2) in g.iter().enumerate() {
            let r = i * g.len() + j;
            raw[[r, 0]] = x1;
            raw[[r, 1]] = x2;
            for (k, &v) in a.fixed.iter().enumerate() {
                raw[[r, 2 + k]] = v;
            }
        }
    }
    let truth: Vec<f64> = raw
        .outer_iter()
        .map(|row| datagen::true_surface(a.model_id, row.as_slice().expect("standard layout")))
        .collect::<Result<_>>()?;
    let headers: Vec<String> = (1..=p).map(|k| format!("x{k}")).collect();
    let table = RawTable {
        path: PathBuf::from("<grid>"),
        headers,
        rows: raw.outer_iter().map(|r| r.iter().map(|v| format!("{v}")).collect()).collect(),
    };
    let x = model_inputs(&file, &table)?;
    let pred = file.model.predict(x.view())?;
    let mut out = Array2::zeros((m, 4));
    for r in 0..m {
        out[[r, 0]] = raw[[r, 0]];
        out[[r, 1]] = raw[[r, 1]];
        out[[r, 2]] = truth[r];
        out[[r, 3]] = pred[r];
    }
    atomic_write(&a.out, &csv_bytes(&["x1", "x2", "true_y", "predicted_y"], &[out.view()])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        assert_eq!(unit_grid(1).unwrap(), vec![0.5]);
        assert_eq!(unit_grid(3).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(unit_grid(50).unwrap().len(), 50);
        assert!(unit_grid(0).is_err());
    }

    #[test]
    fn parses_commands() {
        let c = Cli::try_parse_from(["rrm", "datagen", "--model", "1", "--n", "100", "--seed", "7", "--out", "m1.csv"])
            .unwrap();
        assert!(matches!(c.command, Command::Datagen(DatagenArgs { model: 1, n: 100, seed: 7, .. })));
        let c = Cli::try_parse_from([
            "rrm",
            "--threads",
            "2",
            "run",
            "exp.toml",
            "--pilot-split",
            "inner",
            "--noise-arg",
            "sd",
        ])
        .unwrap();
        assert_eq!(c.threads, Some(2));
        match c.command {
            Command::Run(r) => {
                assert_eq!(r.overrides.pilot_split, Some(PilotSplit::Inner));
                assert_eq!(r.overrides.noise_arg, Some(NoiseArg::Sd));
            }
            _ => panic!("expected run"),
        }
        assert!(Cli::try_parse_from(["rrm", "run", "x.toml", "--pilot-split", "outer"]).is_err());
        let c = Cli::try_parse_from(["rrm", "sweep-beta", "x.toml", "--grid", "0,0.5,1"]).unwrap();
        match c.command {
            Command::SweepBeta(s) => assert_eq!(s.grid, Some(vec![0.0, 0.5, 1.0])),
            _ => panic!("expected sweep-beta"),
        }
    }
}
