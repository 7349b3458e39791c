//! ε-insensitive support vector regression.
//!
//! Training solves the standard dual
//!
//! ```text
//! max  −½ Σᵢⱼ cᵢ cⱼ K(xᵢ, xⱼ) + Σᵢ cᵢ yᵢ − ε Σᵢ (αᵢ + α′ᵢ)
//! s.t. Σᵢ cᵢ = 0,  0 ≤ αᵢ, α′ᵢ ≤ C,  cᵢ = αᵢ − α′ᵢ
//! ```
//!
//! with an SMO solver over the 2n variables `[α; α′]`, picking the working
//! pair by maximal violation for the first index and second-order gain for the
//! second. The regression function is `f(x) = Σᵢ cᵢ K(xᵢ, x) + b`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RrmError};
use crate::kernel::{self, KernelSpec};

/// Coefficients below this magnitude are dropped from the model.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    /// Box constraint.
    pub c: f64,
    /// Half-width of the insensitive tube.
    pub epsilon: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// Iteration cap; `None` means `10_000 · n`.
    pub max_iter: Option<u64>,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            c: 1.0,
            epsilon: 0.1,
            tol: 1e-3,
            max_iter: None,
        }
    }
}

impl SvrParams {
    pub fn new(c: f64, epsilon: f64) -> Result<Self> {
        let p = SvrParams {
            c,
            epsilon,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(RrmError::InvalidParameter(format!("C must be positive, got {}", self.c)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(RrmError::InvalidParameter(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(RrmError::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == Some(0) {
            return Err(RrmError::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }

    fn iteration_cap(&self, n: usize) -> u64 {
        self.max_iter.unwrap_or(10_000 * n as u64)
    }
}

/// A trained ε-SVR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_vectors: Array2<f64>,
    /// `αᵢ − α′ᵢ` for each retained support vector.
    pub coeffs: Array1<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub params: SvrParams,
    /// Row of the training matrix each support vector came from.
    pub support_indices: Vec<usize>,
    pub n_features: usize,
    pub iterations: u64,
}

impl SvrModel {
    /// A model with no support vectors that predicts `bias` everywhere.
    pub fn constant(bias: f64, n_features: usize, kernel: KernelSpec, params: SvrParams) -> Self {
        SvrModel {
            support_vectors: Array2::zeros((0, n_features)),
            coeffs: Array1::zeros(0),
            bias,
            kernel,
            params,
            support_indices: Vec::new(),
            n_features,
            iterations: 0,
        }
    }

    pub fn n_support(&self) -> usize {
        self.coeffs.len()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        predict_svr(self, x)
    }

    /// Coefficient of every training row, zero for rows that are not support vectors.
    pub fn dense_coeffs(&self, n_train: usize) -> Vec<f64> {
        let mut c = vec![0.0; n_train];
        for (&i, &v) in self.support_indices.iter().zip(self.coeffs.iter()) {
            if i < n_train {
                c[i] += v;
            }
        }
        c
    }
}

fn check_training_input(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(RrmError::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.nrows() < 2 {
        return Err(RrmError::TooFewRows {
            needed: 2,
            got: x.nrows(),
        });
    }
    if x.ncols() == 0 {
        return Err(RrmError::Empty("feature columns"));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(RrmError::NonFinite("training features"));
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(RrmError::NonFinite("training target"));
    }
    Ok(())
}

/// Fits an ε-SVR on `(x, y)`. Training is deterministic.
pub fn train_svr(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    kernel: &KernelSpec,
    params: &SvrParams,
) -> Result<SvrModel> {
    kernel.validate()?;
    params.validate()?;
    check_training_input(x, y)?;
    let gram = kernel::self_gram(kernel, x);
    fit_with_gram(x, y, &gram, kernel, params)
}

/// Fits on the rows `rows` of `x`, reading kernel values from `base_gram`
/// (the row-major Gram matrix of all of `x`). Support indices refer to
/// positions in `rows`.
pub(crate) fn train_svr_on_rows(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    rows: &[usize],
    kernel: &KernelSpec,
    params: &SvrParams,
    base_gram: Option<&[f64]>,
) -> Result<SvrModel> {
    let xs = x.select(Axis(0), rows);
    let ys = y.select(Axis(0), rows);
    match base_gram {
        Some(base) => {
            kernel.validate()?;
            params.validate()?;
            check_training_input(xs.view(), ys.view())?;
            let n_all = x.nrows();
            let m = rows.len();
            let mut gram = vec![0.0; m * m];
            for (a, &ra) in rows.iter().enumerate() {
                let src = &base[ra * n_all..(ra + 1) * n_all];
                let dst = &mut gram[a * m..(a + 1) * m];
                for (d, &rb) in dst.iter_mut().zip(rows) {
                    *d = src[rb];
                }
            }
            fit_with_gram(xs.view(), ys.view(), &gram, kernel, params)
        }
        None => train_svr(xs.view(), ys.view(), kernel, params),
    }
}

fn fit_with_gram(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    gram: &[f64],
    kernel: &KernelSpec,
    params: &SvrParams,
) -> Result<SvrModel> {
    let y: Vec<f64> = y.to_vec();
    let sol = solve_dual(gram, &y, params)?;
    let support_indices: Vec<usize> = (0..y.len())
        .filter(|&i| sol.coeffs[i].abs() >= PRUNE_THRESHOLD)
        .collect();
    let coeffs = Array1::from_iter(support_indices.iter().map(|&i| sol.coeffs[i]));
    let support_vectors = x.select(Axis(0), &support_indices);
    Ok(SvrModel {
        support_vectors,
        coeffs,
        bias: sol.bias,
        kernel: *kernel,
        params: *params,
        support_indices,
        n_features: x.ncols(),
        iterations: sol.iterations,
    })
}

struct DualSolution {
    coeffs: Vec<f64>,
    bias: f64,
    iterations: u64,
}

/// SMO on `min ½ aᵀQa + pᵀa` with `a = [α; α′]`, signs `s = [+1; −1]`,
/// `Q_tu = s_t s_u K(t mod n, u mod n)` and `p = [ε − y; ε + y]`.
fn solve_dual(gram: &[f64], y: &[f64], params: &SvrParams) -> Result<DualSolution> {
    let n = y.len();
    let l = 2 * n;
    let c = params.c;
    let eps = params.epsilon;
    let cap = params.iteration_cap(n);

    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let mut alpha = vec![0.0f64; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| if t < n { eps - y[t] } else { eps + y[t - n] })
        .collect();
    let diag: Vec<f64> = (0..n).map(|i| gram[i * n + i]).collect();

    let mut iter: u64 = 0;
    loop {
        // First index: maximal violation among I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..l {
            let v = if t < n {
                if alpha[t] < c { -grad[t] } else { continue }
            } else if alpha[t] > 0.0 {
                grad[t]
            } else {
                continue;
            };
            if v >= gmax {
                gmax = v;
                i_sel = t;
            }
        }

        // Second index: largest second-order decrease among I_low.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        if i_sel != usize::MAX {
            let ii = i_sel % n;
            let krow = &gram[ii * n..(ii + 1) * n];
            for t in 0..l {
                let tt = t % n;
                let (grad_diff, q) = if t < n {
                    if alpha[t] <= 0.0 {
                        continue;
                    }
                    if grad[t] >= gmax2 {
                        gmax2 = grad[t];
                    }
                    (gmax + grad[t], diag[ii] + diag[tt] - 2.0 * krow[tt])
                } else {
                    if alpha[t] >= c {
                        continue;
                    }
                    if -grad[t] >= gmax2 {
                        gmax2 = -grad[t];
                    }
                    (gmax - grad[t], diag[ii] + diag[tt] - 2.0 * krow[tt])
                };
                if grad_diff > 0.0 {
                    let q = if q > 0.0 { q } else { TAU };
                    let obj = -(grad_diff * grad_diff) / q;
                    if obj <= best {
                        best = obj;
                        j_sel = t;
                    }
                }
            }
        }

        let violation = gmax + gmax2;
        if i_sel == usize::MAX || j_sel == usize::MAX || violation < params.tol {
            break;
        }
        if iter >= cap {
            return Err(RrmError::NotConverged {
                iterations: iter,
                max_violation: violation,
            });
        }
        iter += 1;

        let (i, j) = (i_sel, j_sel);
        let (si, sj) = (sign(i), sign(j));
        let (ii, jj) = (i % n, j % n);
        let kij = gram[ii * n + jj];
        let qij = si * sj * kij;
        let (old_i, old_j) = (alpha[i], alpha[j]);

        if si != sj {
            let mut quad = diag[ii] + diag[jj] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = diag[ii] + diag[jj] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = (alpha[i] - old_i) * si;
        let dj = (alpha[j] - old_j) * sj;
        if di == 0.0 && dj == 0.0 {
            continue;
        }
        let ki = &gram[ii * n..(ii + 1) * n];
        let kj = &gram[jj * n..(jj + 1) * n];
        let (g_up, g_down) = grad.split_at_mut(n);
        for k in 0..n {
            let step = di * ki[k] + dj * kj[k];
            g_up[k] += step;
            g_down[k] -= step;
        }
    }

    // Bias from free variables, else the midpoint of the feasible interval.
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..l {
        let yg = sign(t) * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if t >= n {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if t < n {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_count += 1;
            free_sum += yg;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (ub + lb) / 2.0
    };

    let coeffs = (0..n).map(|i| alpha[i] - alpha[i + n]).collect();
    Ok(DualSolution {
        coeffs,
        bias: -rho,
        iterations: iter,
    })
}

/// `ŷⱼ = Σₖ coeffₖ K(svₖ, xⱼ) + b`.
pub fn predict_svr(model: &SvrModel, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    if x.ncols() != model.n_features {
        return Err(RrmError::DimensionMismatch {
            expected: model.n_features,
            got: x.ncols(),
        });
    }
    let x = x.as_standard_layout();
    let p = model.n_features.max(1);
    let sv = model.support_vectors.as_standard_layout();
    let sv_rows: Vec<&[f64]> = sv.as_slice().expect("standard layout").chunks(p).collect();
    let coeffs = model.coeffs.as_slice().expect("contiguous coefficients");
    let out = x
        .as_slice()
        .expect("standard layout")
        .chunks(p)
        .map(|row| {
            let s: f64 = sv_rows
                .iter()
                .zip(coeffs)
                .map(|(sv, &c)| c * model.kernel.eval_slices(sv, row))
                .sum();
            s + model.bias
        })
        .collect::<Vec<_>>();
    // chunks() yields nothing for zero rows; that is the correct empty result.
    Ok(Array1::from(out))
}

/// Residuals of the optimality conditions of a trained model on its training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// Largest violation of the complementary-slackness / tube conditions.
    pub complementary_slackness: f64,
    /// Largest amount by which a coefficient leaves `[−C, C]`.
    pub box_violation: f64,
    /// `|Σ cᵢ|`.
    pub equality_residual: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.complementary_slackness
            .max(self.box_violation)
            .max(self.equality_residual)
    }
}

/// Checks the model against the KKT conditions of the dual on `(x, y)`,
/// the set it was trained on.
pub fn kkt_report(model: &SvrModel, x: ArrayView2<f64>, y: ArrayView1<f64>) -> KktReport {
    let n = y.len();
    let coeffs = model.dense_coeffs(n);
    let fitted = predict_svr(model, x).unwrap_or_else(|_| Array1::from_elem(n, f64::NAN));
    kkt_residuals(&coeffs, fitted.view(), y, model.params.c, model.params.epsilon)
}

/// KKT residuals for an arbitrary coefficient vector with fitted values `fitted`.
pub fn kkt_residuals(
    coeffs: &[f64],
    fitted: ArrayView1<f64>,
    y: ArrayView1<f64>,
    c: f64,
    epsilon: f64,
) -> KktReport {
    let bound_tol = c * 1e-12;
    let mut slack = 0.0f64;
    let mut boxv = 0.0f64;
    for (i, &ci) in coeffs.iter().enumerate() {
        let r = fitted[i] - y[i];
        boxv = boxv.max(ci.abs() - c);
        let v = if ci.abs() < PRUNE_THRESHOLD {
            (r.abs() - epsilon).max(0.0)
        } else if ci >= c - bound_tol {
            (r + epsilon).max(0.0)
        } else if ci <= -c + bound_tol {
            (epsilon - r).max(0.0)
        } else if ci > 0.0 {
            (r + epsilon).abs()
        } else {
            (r - epsilon).abs()
        };
        slack = slack.max(if v.is_nan() { f64::INFINITY } else { v });
    }
    KktReport {
        complementary_slackness: slack,
        box_violation: boxv.max(0.0),
        equality_residual: coeffs.iter().sum::<f64>().abs(),
    }
}

/// Dual objective `−½ cᵀKc + cᵀy − ε‖c‖₁` of the model's coefficients on its training set.
pub fn dual_objective(model: &SvrModel, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
    let coeffs = Array1::from(model.dense_coeffs(y.len()));
    let k = kernel::gram_matrix(&model.kernel, x, x)?;
    let kc = k.dot(&coeffs);
    Ok(-0.5 * coeffs.dot(&kc) + coeffs.dot(&y) - model.params.epsilon * coeffs.mapv(f64::abs).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn linear_fixture() -> (Array2<f64>, Array1<f64>, SvrModel) {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = array![0.0, 1.0, 2.0, 3.0];
        let params = SvrParams::new(10.0, 0.05).unwrap().with_tol(1e-6);
        let m = train_svr(x.view(), y.view(), &KernelSpec::linear(1.0).unwrap(), &params).unwrap();
        (x, y, m)
    }

    #[test]
    fn linear_data_fits_inside_tube() {
        let (x, y, m) = linear_fixture();
        let pred = m.predict(x.view()).unwrap();
        for (p, t) in pred.iter().zip(y.iter()) {
            assert!((p - t).abs() <= 0.05 + 1e-6, "{p} vs {t}");
        }
        let mid = m.predict(array![[1.5]].view()).unwrap()[0];
        assert!((mid - 1.5).abs() <= 0.05 + 1e-6);
    }

    #[test]
    fn constant_target_gives_constant_model() {
        let x = array![[0.0, 1.0], [1.0, 0.5], [2.0, -1.0], [0.3, 0.3]];
        let y = Array1::from_elem(4, 2.5);
        for spec in KernelSpec::standard_set(1.0, 2).unwrap() {
            let m = train_svr(x.view(), y.view(), &spec, &SvrParams::default()).unwrap();
            assert_eq!(m.n_support(), 0);
            assert_eq!(m.bias, 2.5);
            let p = m.predict(array![[5.0, 5.0], [-1.0, 0.0]].view()).unwrap();
            assert!(p.iter().all(|&v| v == 2.5));
        }
    }

    #[test]
    fn empty_support_set_predicts_bias() {
        let m = SvrModel::constant(5.0, 2, KernelSpec::gaussian(1.0).unwrap(), SvrParams::default());
        let p = m.predict(array![[1.0, 2.0], [3.0, 4.0]].view()).unwrap();
        assert_eq!(p, array![5.0, 5.0]);
        assert!(m.predict(array![[1.0]].view()).is_err());
    }

    #[test]
    fn free_support_vectors_sit_on_tube_edge() {
        let mut rng = crate::seed::rng(5);
        let x = Array2::from_shape_fn((30, 2), |_| rng.random_range(-1.0..1.0));
        let y = x.map_axis(Axis(1), |r| (3.0f64 * r[0]).sin() + r[1] * r[1]);
        let params = SvrParams::new(1.0, 0.1).unwrap().with_tol(1e-6);
        let m = train_svr(x.view(), y.view(), &KernelSpec::gaussian(1.0).unwrap(), &params).unwrap();
        let pred = m.predict(x.view()).unwrap();
        let dense = m.dense_coeffs(30);
        let mut free = 0;
        for i in 0..30 {
            let r = (pred[i] - y[i]).abs();
            if dense[i].abs() > 0.0 && dense[i].abs() < params.c {
                free += 1;
                assert!((r - params.epsilon).abs() <= 1e-5, "free sv residual {r}");
            }
            if dense[i].abs() < params.c {
                assert!(r <= params.epsilon + 1e-5);
            }
        }
        assert!(free > 0);
        assert!(kkt_report(&m, x.view(), y.view()).max() <= 1e-6);
    }

    #[test]
    fn kkt_report_flags_zeroed_coefficients() {
        let mut rng = crate::seed::rng(9);
        let x = Array2::from_shape_fn((20, 1), |_| rng.random_range(-2.0..2.0));
        let y = x.column(0).mapv(|v| v * v);
        let mut m =
            train_svr(x.view(), y.view(), &KernelSpec::gaussian(0.5).unwrap(), &SvrParams::default()).unwrap();
        let r = kkt_report(&m, x.view(), y.view());
        assert!(r.max() <= m.params.tol, "{r:?}");
        m.coeffs.fill(0.0);
        let r = kkt_report(&m, x.view(), y.view());
        assert!(r.complementary_slackness > 0.1);
    }

    #[test]
    fn duplicate_inputs_average_out() {
        let x = array![[0.0], [0.0]];
        let y = array![0.0, 1.0];
        let m = train_svr(x.view(), y.view(), &KernelSpec::gaussian(1.0).unwrap(), &SvrParams::default()).unwrap();
        let p = m.predict(array![[0.0]].view()).unwrap()[0];
        assert!((p - 0.5).abs() < 1e-9, "{p}");
    }

    #[test]
    fn rejects_bad_input() {
        let k = KernelSpec::linear(1.0).unwrap();
        let p = SvrParams::default();
        assert!(matches!(
            train_svr(array![[1.0]].view(), array![1.0].view(), &k, &p),
            Err(RrmError::TooFewRows { .. })
        ));
        assert!(train_svr(array![[1.0], [f64::NAN]].view(), array![1.0, 2.0].view(), &k, &p).is_err());
        assert!(SvrParams::new(0.0, 0.1).is_err());
        assert!(SvrParams::new(1.0, -0.1).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let mut rng = crate::seed::rng(2);
        let x = Array2::from_shape_fn((40, 2), |_| rng.random_range(-1.0..1.0));
        let y = x.map_axis(Axis(1), |r| r[0] * 3.0 - r[1]);
        let params = SvrParams {
            max_iter: Some(3),
            tol: 1e-9,
            ..Default::default()
        };
        match train_svr(x.view(), y.view(), &KernelSpec::gaussian(1.0).unwrap(), &params) {
            Err(RrmError::NotConverged { iterations, max_violation }) => {
                assert_eq!(iterations, 3);
                assert!(max_violation > 1e-9);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn training_on_rows_matches_direct_training() {
        let mut rng = crate::seed::rng(21);
        let x = Array2::from_shape_fn((25, 2), |_| rng.random_range(-1.0..1.0));
        let y = x.map_axis(Axis(1), |r| r[0] - r[1] * r[1]);
        let rows: Vec<usize> = (0..25).map(|_| rng.random_range(0..25)).collect();
        let spec = KernelSpec::laplacian(1.0).unwrap();
        let p = SvrParams::default();
        let base = kernel::self_gram(&spec, x.view());
        let a = train_svr_on_rows(x.view(), y.view(), &rows, &spec, &p, Some(&base)).unwrap();
        let b = train_svr_on_rows(x.view(), y.view(), &rows, &spec, &p, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic() {
        let (x, y, m) = linear_fixture();
        let again =
            train_svr(x.view(), y.view(), &KernelSpec::linear(1.0).unwrap(), &m.params).unwrap();
        assert_eq!(m, again);
    }
}
