//! Regression Random Machines.
//!
//! 1. Fit one pilot SVR per candidate kernel on the training set and score it
//!    on a holdout set; the RMSE vector is divided by its sample standard
//!    deviation to give `δ`.
//! 2. Kernel sampling probabilities are `λ = softmax(−β δ)`.
//! 3. Draw `B` bootstrap replicates; each member samples its kernel from
//!    `Categorical(λ)` and is trained on its in-bag rows.
//! 4. Each member's out-of-bag RMSE `Λ` (standardized the same way) gives its
//!    weight `w = softmax(−β Λ)`.
//! 5. The ensemble predicts `G(x) = Σⱼ wⱼ gⱼ(x)`.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::bagging::{self, SharedGram};
use crate::data::{mean_sd, Dataset};
use crate::error::{Result, RrmError};
use crate::kernel::KernelSpec;
use crate::metrics::rmse;
use crate::par;
use crate::seed;
use crate::svr::{self, SvrModel, SvrParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrmConfig {
    /// Candidate kernels; must be pairwise distinct.
    pub kernels: Vec<KernelSpec>,
    /// Number of bootstrap members.
    pub b: usize,
    /// Correlation parameter: 0 gives uniform kernel draws and weights,
    /// large values concentrate both on the best kernels/members.
    pub beta: f64,
    pub svr_params: SvrParams,
}

impl Default for RrmConfig {
    fn default() -> Self {
        RrmConfig {
            kernels: KernelSpec::standard_set(1.0, 2).expect("valid default kernels"),
            b: 100,
            beta: 2.0,
            svr_params: SvrParams::default(),
        }
    }
}

impl RrmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() {
            return Err(RrmError::InvalidParameter("at least one kernel is required".into()));
        }
        for (i, a) in self.kernels.iter().enumerate() {
            a.validate()?;
            if self.kernels[i + 1..].contains(a) {
                return Err(RrmError::InvalidParameter(format!("kernel {a} listed twice")));
            }
        }
        if self.b == 0 {
            return Err(RrmError::InvalidParameter("B must be >= 1".into()));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(RrmError::InvalidParameter(format!("beta must be >= 0, got {}", self.beta)));
        }
        self.svr_params.validate()
    }
}

/// A trained ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrmModel {
    pub kernels: Vec<KernelSpec>,
    pub beta: f64,
    pub members: Vec<SvrModel>,
    pub member_weights: Vec<f64>,
    /// Index into `kernels` used by each member.
    pub assigned_kernels: Vec<usize>,
    /// Kernel sampling probabilities `λ`.
    pub kernel_probs: Vec<f64>,
    /// Standardized pilot errors `δ`.
    pub pilot_errors: Vec<f64>,
    /// Pilot RMSEs before standardization.
    pub pilot_rmse: Vec<f64>,
    /// Out-of-bag RMSE `Λ` of each member (after filling empty OOB sets).
    pub member_oob_errors: Vec<f64>,
}

impl RrmModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        predict_rrm(self, x)
    }

    /// How many members use each kernel.
    pub fn kernel_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.kernels.len()];
        for &k in &self.assigned_kernels {
            c[k] += 1;
        }
        c
    }
}

/// Divides by the sample standard deviation; leaves the values unchanged
/// when there are fewer than two of them or they are all equal.
pub fn standardize_by_sd(v: &[f64]) -> Vec<f64> {
    if v.len() < 2 {
        return v.to_vec();
    }
    let (_, sd) = mean_sd(v);
    if sd > 0.0 && sd.is_finite() {
        v.iter().map(|x| x / sd).collect()
    } else {
        v.to_vec()
    }
}

/// `exp(−β vᵢ) / Σⱼ exp(−β vⱼ)`, evaluated relative to the minimum so large
/// `β` cannot overflow.
pub fn softmax_neg(v: &[f64], beta: f64) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = v.iter().map(|x| (-beta * (x - min)).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Pilot errors: raw holdout RMSE per kernel and the standardized `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotErrors {
    pub rmse: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Fits one SVR per kernel on `train` and scores it on `holdout`.
pub fn pilot_errors(
    train: &Dataset,
    holdout: &Dataset,
    kernels: &[KernelSpec],
    params: &SvrParams,
) -> Result<PilotErrors> {
    if holdout.is_empty() {
        return Err(RrmError::Empty("pilot holdout set"));
    }
    if kernels.is_empty() {
        return Err(RrmError::InvalidParameter("at least one kernel is required".into()));
    }
    if train.p() != holdout.p() {
        return Err(RrmError::DimensionMismatch {
            expected: train.p(),
            got: holdout.p(),
        });
    }
    let raw = par::try_map(kernels.len(), |r| {
        let spec = &kernels[r];
        let fit = || -> Result<f64> {
            let m = svr::train_svr(train.features.view(), train.target.view(), spec, params)?;
            let pred = m.predict(holdout.features.view())?;
            rmse(holdout.target.view(), pred.view())
        };
        fit().map_err(|e| RrmError::Pilot {
            kernel: spec.to_string(),
            source: Box::new(e),
        })
    })?;
    let delta = standardize_by_sd(&raw);
    Ok(PilotErrors { rmse: raw, delta })
}

/// `λ = softmax(−β δ)`.
pub fn kernel_probabilities(delta: &[f64], beta: f64) -> Vec<f64> {
    softmax_neg(delta, beta)
}

/// `w = softmax(−β Λ/sd(Λ))`.
pub fn member_weights(oob_errors: &[f64], beta: f64) -> Vec<f64> {
    softmax_neg(&standardize_by_sd(oob_errors), beta)
}

/// Replaces missing OOB errors with the mean of the available ones (0 if none).
fn fill_missing(errors: &[Option<f64>]) -> Vec<f64> {
    let known: Vec<f64> = errors.iter().flatten().copied().collect();
    let fill = if known.is_empty() {
        0.0
    } else {
        known.iter().sum::<f64>() / known.len() as f64
    };
    errors.iter().map(|e| e.unwrap_or(fill)).collect()
}

/// Trains the ensemble. `holdout` scores the pilot models; all randomness
/// is derived from `seed`.
pub fn train_rrm(train: &Dataset, holdout: &Dataset, config: &RrmConfig, seed: u64) -> Result<RrmModel> {
    config.validate()?;
    let pilots = pilot_errors(train, holdout, &config.kernels, &config.svr_params)?;
    train_rrm_with_pilots(train, pilots, config, seed)
}

/// Trains the ensemble from pilot errors computed elsewhere (for example on
/// an inner split of the training set).
pub fn train_rrm_with_pilots(train: &Dataset, pilots: PilotErrors, config: &RrmConfig, seed: u64) -> Result<RrmModel> {
    config.validate()?;
    if train.n() < 2 {
        return Err(RrmError::TooFewRows { needed: 2, got: train.n() });
    }
    if pilots.delta.len() != config.kernels.len() {
        return Err(RrmError::DimensionMismatch {
            expected: config.kernels.len(),
            got: pilots.delta.len(),
        });
    }
    let kernel_probs = kernel_probabilities(&pilots.delta, config.beta);

    // Kernel assignment is drawn serially, before any member is trained.
    let mut master = seed::child_rng(seed, 0);
    let picker = WeightedIndex::new(&kernel_probs)
        .map_err(|e| RrmError::InvalidParameter(format!("kernel probabilities: {e}")))?;
    let assigned: Vec<usize> = (0..config.b).map(|_| picker.sample(&mut master)).collect();

    let draws = bagging::member_draws(train.n(), config.b, seed::derive(seed, 1))?;
    let x = train.features.view();
    let y = train.target.view();
    let used: Vec<usize> = (0..config.kernels.len())
        .filter(|r| assigned.contains(r))
        .collect();
    let grams: Vec<Option<SharedGram>> = {
        let built = par::map(used.len(), |u| SharedGram::build(&config.kernels[used[u]], x));
        let mut all: Vec<Option<SharedGram>> = (0..config.kernels.len()).map(|_| None).collect();
        for (u, g) in used.iter().zip(built) {
            all[*u] = g;
        }
        all
    };

    let fitted = par::try_map(config.b, |i| {
        let r = assigned[i];
        let draw = &draws[i];
        let (model, oob_pred) =
            bagging::fit_member(x, y, draw, &config.kernels[r], &config.svr_params, grams[r].as_ref())
                .map_err(|e| RrmError::member(i, e))?;
        let oob_err = if draw.oob.is_empty() {
            None
        } else {
            let truth: Vec<f64> = draw.oob.iter().map(|&o| y[o]).collect();
            Some(rmse(ArrayView1::from(&truth), ArrayView1::from(&oob_pred))?)
        };
        Ok((model, oob_err))
    })?;
    let (members, oob): (Vec<SvrModel>, Vec<Option<f64>>) = fitted.into_iter().unzip();
    let member_oob_errors = fill_missing(&oob);
    let member_weights = member_weights(&member_oob_errors, config.beta);

    Ok(RrmModel {
        kernels: config.kernels.clone(),
        beta: config.beta,
        members,
        member_weights,
        assigned_kernels: assigned,
        kernel_probs,
        pilot_errors: pilots.delta,
        pilot_rmse: pilots.rmse,
        member_oob_errors,
    })
}

/// `Σⱼ wⱼ · preds[j, ·]`, accumulated in member order.
pub fn weighted_sum(preds: ArrayView2<f64>, weights: &[f64]) -> Result<Array1<f64>> {
    if preds.nrows() != weights.len() {
        return Err(RrmError::DimensionMismatch {
            expected: weights.len(),
            got: preds.nrows(),
        });
    }
    let mut acc = Array1::zeros(preds.ncols());
    for (row, &w) in preds.outer_iter().zip(weights) {
        acc.scaled_add(w, &row);
    }
    Ok(acc)
}

/// `G(x) = Σⱼ wⱼ gⱼ(x)`.
pub fn predict_rrm(model: &RrmModel, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    let preds = bagging::member_predictions(&model.members, x)?;
    weighted_sum(preds.view(), &model.member_weights)
}
