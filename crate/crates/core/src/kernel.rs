//! Kernel functions and Gram matrices.
//!
//! | family     | K(x, y)               |
//! |------------|-----------------------|
//! | Linear     | γ (x·y)               |
//! | Polynomial | (γ (x·y))^d           |
//! | Gaussian   | exp(−γ ‖x − y‖²)      |
//! | Laplacian  | exp(−γ ‖x − y‖)       |
//!
//! The polynomial kernel has no additive constant. All norms are Euclidean.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RrmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Linear,
    Polynomial,
    Gaussian,
    Laplacian,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::Linear,
        KernelFamily::Polynomial,
        KernelFamily::Gaussian,
        KernelFamily::Laplacian,
    ];

    /// Three-letter tag used in method names (`Lin`, `Pol`, `Gau`, `Lap`).
    pub fn short(self) -> &'static str {
        match self {
            KernelFamily::Linear => "Lin",
            KernelFamily::Polynomial => "Pol",
            KernelFamily::Gaussian => "Gau",
            KernelFamily::Laplacian => "Lap",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KernelFamily::Linear => "linear",
            KernelFamily::Polynomial => "polynomial",
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplacian => "laplacian",
        };
        f.write_str(s)
    }
}

impl FromStr for KernelFamily {
    type Err = RrmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "lin" => Ok(KernelFamily::Linear),
            "polynomial" | "poly" | "pol" => Ok(KernelFamily::Polynomial),
            "gaussian" | "rbf" | "gau" => Ok(KernelFamily::Gaussian),
            "laplacian" | "laplace" | "lap" => Ok(KernelFamily::Laplacian),
            other => Err(RrmError::InvalidParameter(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Kernel family plus its hyperparameters. `degree` is only read by the
/// polynomial family and is ignored by equality for the others.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub gamma: f64,
    pub degree: u32,
}

impl PartialEq for KernelSpec {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
            && self.gamma == other.gamma
            && (self.family != KernelFamily::Polynomial || self.degree == other.degree)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Polynomial => {
                write!(f, "{}(gamma={}, degree={})", self.family, self.gamma, self.degree)
            }
            _ => write!(f, "{}(gamma={})", self.family, self.gamma),
        }
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, gamma: f64, degree: u32) -> Result<Self> {
        let spec = KernelSpec { family, gamma, degree };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Linear, gamma, 1)
    }

    pub fn polynomial(gamma: f64, degree: u32) -> Result<Self> {
        Self::new(KernelFamily::Polynomial, gamma, degree)
    }

    pub fn gaussian(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, gamma, 1)
    }

    pub fn laplacian(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Laplacian, gamma, 1)
    }

    /// The four standard kernels sharing `gamma` (and `degree` for the polynomial).
    pub fn standard_set(gamma: f64, degree: u32) -> Result<Vec<Self>> {
        KernelFamily::ALL
            .iter()
            .map(|&f| Self::new(f, gamma, degree))
            .collect()
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(self.family, gamma, self.degree)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(RrmError::InvalidParameter(format!(
                "kernel gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.degree < 1 {
            return Err(RrmError::InvalidParameter("kernel degree must be >= 1".into()));
        }
        Ok(())
    }

    /// Kernel value without dimension or finiteness checks.
    #[inline]
    pub(crate) fn eval_slices(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Linear => self.gamma * dot(x, y),
            KernelFamily::Polynomial => powi(self.gamma * dot(x, y), self.degree),
            KernelFamily::Gaussian => (-self.gamma * sq_dist(x, y)).exp(),
            KernelFamily::Laplacian => (-self.gamma * sq_dist(x, y).sqrt()).exp(),
        }
    }

    #[inline]
    pub(crate) fn eval_views(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        match (x.as_slice(), y.as_slice()) {
            (Some(a), Some(b)) => self.eval_slices(a, b),
            _ => {
                let a = x.to_vec();
                let b = y.to_vec();
                self.eval_slices(&a, &b)
            }
        }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

#[inline]
fn powi(base: f64, degree: u32) -> f64 {
    match degree {
        1 => base,
        2 => base * base,
        d => base.powi(d as i32),
    }
}

/// Evaluates `spec` at `(x, y)`.
pub fn eval_kernel(spec: &KernelSpec, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(RrmError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(RrmError::Empty("kernel input vector"));
    }
    if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
        return Err(RrmError::NonFinite("kernel input"));
    }
    Ok(spec.eval_views(x, y))
}

/// Entry `(i, j)` is `K(a_i, b_j)`.
pub fn gram_matrix(spec: &KernelSpec, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    spec.validate()?;
    if a.ncols() != b.ncols() {
        return Err(RrmError::DimensionMismatch {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let p = a.ncols().max(1);
    let mut out = Array2::zeros((a.nrows(), b.nrows()));
    let bs = b.as_slice().expect("standard layout");
    for (i, ai) in a.as_slice().expect("standard layout").chunks(p).enumerate() {
        for (j, bj) in bs.chunks(p).enumerate() {
            out[[i, j]] = spec.eval_slices(ai, bj);
        }
    }
    Ok(out)
}

/// Row-major `n × n` Gram matrix of `x` with itself, exploiting symmetry.
pub(crate) fn self_gram(spec: &KernelSpec, x: ArrayView2<f64>) -> Vec<f64> {
    let x = x.as_standard_layout();
    let n = x.nrows();
    let rows: Vec<&[f64]> = x.as_slice().expect("standard layout").chunks(x.ncols().max(1)).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = spec.eval_slices(rows[i], rows[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::Rng;

    fn all_specs() -> Vec<KernelSpec> {
        vec![
            KernelSpec::linear(0.7).unwrap(),
            KernelSpec::polynomial(0.5, 2).unwrap(),
            KernelSpec::polynomial(1.3, 3).unwrap(),
            KernelSpec::gaussian(1.0).unwrap(),
            KernelSpec::laplacian(2.0).unwrap(),
        ]
    }

    #[test]
    fn gaussian_at_identical_points_is_one() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let x = array![0.3, 0.7];
        assert_eq!(eval_kernel(&k, x.view(), x.view()).unwrap(), 1.0);
    }

    #[test]
    fn linear_is_dot_product() {
        let k = KernelSpec::linear(1.0).unwrap();
        let v = eval_kernel(&k, array![1.0, 2.0].view(), array![3.0, 4.0].view()).unwrap();
        assert_eq!(v, 11.0);
    }

    #[test]
    fn laplacian_uses_unsquared_norm() {
        let k = KernelSpec::laplacian(2.0).unwrap();
        let v = eval_kernel(&k, array![0.0, 0.0].view(), array![3.0, 4.0].view()).unwrap();
        assert_abs_diff_eq!(v, (-10.0f64).exp(), epsilon = 1e-18);
        assert_abs_diff_eq!(v, 4.54e-5, epsilon = 1e-7);
    }

    #[test]
    fn eval_errors() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert!(matches!(
            eval_kernel(&k, array![1.0].view(), array![1.0, 2.0].view()),
            Err(RrmError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            eval_kernel(&k, array![f64::NAN].view(), array![1.0].view()),
            Err(RrmError::NonFinite(_))
        ));
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::polynomial(1.0, 0).is_err());
    }

    #[test]
    fn equality_ignores_unused_degree() {
        let a = KernelSpec { family: KernelFamily::Gaussian, gamma: 1.0, degree: 2 };
        let b = KernelSpec { family: KernelFamily::Gaussian, gamma: 1.0, degree: 5 };
        assert_eq!(a, b);
        let p = KernelSpec::polynomial(1.0, 2).unwrap();
        assert_ne!(p, KernelSpec::polynomial(1.0, 3).unwrap());
        assert_ne!(p, KernelSpec::polynomial(0.5, 2).unwrap());
        assert_ne!(KernelSpec::linear(1.0).unwrap(), KernelSpec::gaussian(1.0).unwrap());
    }

    #[test]
    fn gram_examples() {
        let a = array![[0.1, 0.2], [0.5, -1.0], [2.0, 3.0]];
        let g = gram_matrix(&KernelSpec::gaussian(1.0).unwrap(), a.view(), a.view()).unwrap();
        for i in 0..3 {
            assert_eq!(g[[i, i]], 1.0);
        }
        let eye = array![[1.0, 0.0], [0.0, 1.0]];
        let g = gram_matrix(&KernelSpec::linear(1.0).unwrap(), eye.view(), eye.view()).unwrap();
        assert_eq!(g, eye);
        let one = array![[1.0, 1.0]];
        let g = gram_matrix(&KernelSpec::polynomial(1.0, 2).unwrap(), one.view(), one.view()).unwrap();
        assert_eq!(g, array![[4.0]]);
        assert!(gram_matrix(&KernelSpec::linear(1.0).unwrap(), a.view(), array![[1.0]].view()).is_err());
    }

    #[test]
    fn self_gram_matches_gram_matrix() {
        let mut rng = crate::seed::rng(3);
        let a = Array2::from_shape_fn((7, 3), |_| rng.random_range(-1.0..1.0));
        for spec in all_specs() {
            let full = gram_matrix(&spec, a.view(), a.view()).unwrap();
            let flat = self_gram(&spec, a.view());
            for i in 0..7 {
                for j in 0..7 {
                    assert_eq!(full[[i, j]], flat[i * 7 + j]);
                    assert!((full[[i, j]] - full[[j, i]]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        let mut rng = crate::seed::rng(11);
        for trial in 0..200 {
            let n = 2 + trial % 7;
            let p = 1 + trial % 3;
            let a = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
            for spec in all_specs() {
                let g = gram_matrix(&spec, a.view(), a.view()).unwrap();
                let m = nalgebra::DMatrix::from_fn(n, n, |i, j| g[[i, j]]);
                let min = m.symmetric_eigenvalues().min();
                assert!(min >= -1e-8, "{spec}: smallest eigenvalue {min}");
            }
        }
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            x in proptest::collection::vec(-5.0f64..5.0, 3),
            y in proptest::collection::vec(-5.0f64..5.0, 3),
            gamma in 0.01f64..4.0,
        ) {
            let xv = ndarray::Array1::from(x.clone());
            let yv = ndarray::Array1::from(y.clone());
            for family in KernelFamily::ALL {
                let spec = KernelSpec::new(family, gamma, 2).unwrap();
                let a = eval_kernel(&spec, xv.view(), yv.view()).unwrap();
                let b = eval_kernel(&spec, yv.view(), xv.view()).unwrap();
                prop_assert_eq!(a, b);
                if matches!(family, KernelFamily::Gaussian | KernelFamily::Laplacian) {
                    prop_assert!(a > 0.0 && a <= 1.0);
                    if x == y {
                        prop_assert_eq!(a, 1.0);
                    }
                }
            }
        }
    }
}
