//! Bootstrap resampling with out-of-bag bookkeeping, and bagged SVR.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, RrmError};
use crate::kernel::{self, KernelSpec};
use crate::par;
use crate::seed;
use crate::svr::{self, SvrModel, SvrParams};

/// Largest training set for which a full Gram matrix is precomputed and shared
/// across ensemble members.
pub(crate) const SHARED_GRAM_MAX_ROWS: usize = 4096;

const MAX_REDRAWS: usize = 100;

/// One bootstrap replicate. Indices are zero-based row positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapDraw {
    /// `n` draws with replacement, in draw order.
    pub in_bag: Vec<usize>,
    /// Sorted rows never drawn.
    pub oob: Vec<usize>,
}

impl BootstrapDraw {
    pub fn distinct_in_bag(&self) -> usize {
        let n = self.in_bag.len();
        n - self.oob.len()
    }
}

/// Draws `n` rows uniformly with replacement from `0..n`.
pub fn bootstrap_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<BootstrapDraw> {
    if n == 0 {
        return Err(RrmError::Empty("bootstrap population"));
    }
    let mut seen = vec![false; n];
    let in_bag: Vec<usize> = (0..n)
        .map(|_| {
            let i = rng.random_range(0..n);
            seen[i] = true;
            i
        })
        .collect();
    let oob = (0..n).filter(|&i| !seen[i]).collect();
    Ok(BootstrapDraw { in_bag, oob })
}

/// Bootstrap draw with at least two distinct rows when `n ≥ 2`; redraws up to
/// 100 times before accepting whatever the last draw was.
pub(crate) fn bootstrap_for_training<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<BootstrapDraw> {
    let mut draw = bootstrap_sample(n, rng)?;
    let mut attempts = 1;
    while n >= 2 && draw.distinct_in_bag() < 2 && attempts < MAX_REDRAWS {
        draw = bootstrap_sample(n, rng)?;
        attempts += 1;
    }
    Ok(draw)
}

/// Per-member bootstrap draws, each from its own generator derived from `seed`.
pub(crate) fn member_draws(n: usize, b: usize, seed: u64) -> Result<Vec<BootstrapDraw>> {
    (0..b)
        .map(|i| bootstrap_for_training(n, &mut seed::child_rng(seed, i as u64)))
        .collect()
}

/// Kernel matrix of the training rows, shared by all members using `spec`.
pub(crate) struct SharedGram {
    pub spec: KernelSpec,
    pub values: Vec<f64>,
}

impl SharedGram {
    pub fn build(spec: &KernelSpec, x: ArrayView2<f64>) -> Option<Self> {
        (x.nrows() <= SHARED_GRAM_MAX_ROWS).then(|| SharedGram {
            spec: *spec,
            values: kernel::self_gram(spec, x),
        })
    }
}

/// Trains one member on `draw.in_bag`, then evaluates it on `draw.oob`.
/// Returns the model and its OOB predictions.
pub(crate) fn fit_member(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    draw: &BootstrapDraw,
    spec: &KernelSpec,
    params: &SvrParams,
    shared: Option<&SharedGram>,
) -> Result<(SvrModel, Vec<f64>)> {
    let gram = shared.filter(|g| g.spec == *spec).map(|g| g.values.as_slice());
    let model = svr::train_svr_on_rows(x, y, &draw.in_bag, spec, params, gram)?;
    let oob_pred = match gram {
        Some(k) => {
            let n = x.nrows();
            draw.oob
                .iter()
                .map(|&o| {
                    model
                        .support_indices
                        .iter()
                        .zip(model.coeffs.iter())
                        .map(|(&s, &c)| c * k[draw.in_bag[s] * n + o])
                        .sum::<f64>()
                        + model.bias
                })
                .collect()
        }
        None => {
            let xo = x.select(ndarray::Axis(0), &draw.oob);
            model.predict(xo.view())?.to_vec()
        }
    };
    Ok((model, oob_pred))
}

/// Bagged single-kernel SVR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggedSvrModel {
    pub members: Vec<SvrModel>,
    pub kernel: KernelSpec,
    pub draws: Vec<BootstrapDraw>,
}

impl BaggedSvrModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        predict_bagged(self, x)
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }
}

/// Trains `b` SVRs on bootstrap replicates of `data`, all with `kernel`.
///
/// Member `i` draws its replicate from a generator derived from `(seed, i)`,
/// so the model does not depend on how members are scheduled.
pub fn train_bagged_svr(
    data: &Dataset,
    kernel: &KernelSpec,
    b: usize,
    params: &SvrParams,
    seed: u64,
) -> Result<BaggedSvrModel> {
    if b == 0 {
        return Err(RrmError::InvalidParameter("number of bootstrap members must be >= 1".into()));
    }
    if data.n() < 2 {
        return Err(RrmError::TooFewRows { needed: 2, got: data.n() });
    }
    kernel.validate()?;
    params.validate()?;
    let x = data.features.view();
    let y = data.target.view();
    let draws = member_draws(data.n(), b, seed)?;
    let shared = SharedGram::build(kernel, x);
    let members = par::try_map(b, |i| {
        svr::train_svr_on_rows(x, y, &draws[i].in_bag, kernel, params, shared.as_ref().map(|g| g.values.as_slice()))
            .map_err(|e| RrmError::member(i, e))
    })?;
    Ok(BaggedSvrModel {
        members,
        kernel: *kernel,
        draws,
    })
}

/// Predictions of every member: row `i` holds member `i`'s predictions on `x`.
pub fn member_predictions(members: &[SvrModel], x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let rows = par::try_map(members.len(), |i| members[i].predict(x))?;
    let mut out = Array2::zeros((members.len(), x.nrows()));
    for (mut dst, src) in out.outer_iter_mut().zip(rows) {
        dst.assign(&src);
    }
    Ok(out)
}

/// `H(x) = (1/B) Σᵢ hᵢ(x)`.
pub fn predict_bagged(model: &BaggedSvrModel, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    let preds = member_predictions(&model.members, x)?;
    Ok(mean_rows(preds.view()))
}

/// Column means of a member-prediction matrix, summed in member order.
pub fn mean_rows(preds: ArrayView2<f64>) -> Array1<f64> {
    let b = preds.nrows() as f64;
    let mut acc = Array1::zeros(preds.ncols());
    for row in preds.outer_iter() {
        acc += &row;
    }
    acc / b
}
