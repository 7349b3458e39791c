//! The eight synthetic regression scenarios.
//!
//! Models 1–7 draw `X ~ Uniform[0,1]^p` and are written in terms of
//! `x̃ = 2(x − 0.5)`; model 8 draws standard normal predictors.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, RrmError};
use crate::seed;

/// Number of predictors of models 1..=8.
pub const DIMS: [usize; 8] = [2, 8, 4, 4, 8, 6, 4, 6];

/// The second argument of each model's `N(0, v)` noise term.
const NOISE_ARG: [f64; 8] = [0.25, 0.5, 0.5, 0.5, 0.5, 0.5, 0.0, 1.0];

/// How to read `v` in `N(0, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseArg {
    /// `v` is a variance: `σ = √v`.
    #[default]
    Variance,
    /// `v` is a standard deviation.
    Sd,
}

impl fmt::Display for NoiseArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseArg::Variance => "variance",
            NoiseArg::Sd => "sd",
        })
    }
}

impl FromStr for NoiseArg {
    type Err = RrmError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "variance" | "var" => Ok(NoiseArg::Variance),
            "sd" | "std" => Ok(NoiseArg::Sd),
            other => Err(RrmError::InvalidParameter(format!(
                "noise argument must be `variance` or `sd`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSpec {
    pub model_id: u8,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise_arg: NoiseArg,
}

impl SimSpec {
    pub fn new(model_id: u8, n: usize, seed: u64) -> Result<Self> {
        let s = SimSpec {
            model_id,
            n,
            seed,
            noise_arg: NoiseArg::Variance,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_noise_arg(mut self, noise_arg: NoiseArg) -> Self {
        self.noise_arg = noise_arg;
        self
    }

    pub fn validate(&self) -> Result<()> {
        dim(self.model_id)?;
        if self.n == 0 {
            return Err(RrmError::InvalidParameter("n must be >= 1".into()));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        DIMS[self.model_id as usize - 1]
    }

    pub fn noise_sd(&self) -> f64 {
        noise_sd(self.model_id, self.noise_arg).expect("validated model id")
    }
}

/// Number of predictors of `model_id`.
pub fn dim(model_id: u8) -> Result<usize> {
    match model_id {
        1..=8 => Ok(DIMS[model_id as usize - 1]),
        _ => Err(RrmError::InvalidParameter(format!(
            "model id must be in 1..=8, got {model_id}"
        ))),
    }
}

/// Standard deviation of `model_id`'s noise term.
pub fn noise_sd(model_id: u8, arg: NoiseArg) -> Result<f64> {
    dim(model_id)?;
    let v = NOISE_ARG[model_id as usize - 1];
    Ok(match arg {
        NoiseArg::Variance => v.sqrt(),
        NoiseArg::Sd => v,
    })
}

pub fn tilde(x: f64) -> f64 {
    2.0 * (x - 0.5)
}

fn ind(c: bool) -> f64 {
    if c {
        1.0
    } else {
        0.0
    }
}

/// Noiseless response of `model_id` at `x` (raw predictors, before `tilde`).
pub fn true_surface(model_id: u8, x: &[f64]) -> Result<f64> {
    let p = dim(model_id)?;
    if x.len() != p {
        return Err(RrmError::DimensionMismatch { expected: p, got: x.len() });
    }
    Ok(surface_unchecked(model_id, x))
}

fn surface_unchecked(model_id: u8, x: &[f64]) -> f64 {
    if model_id == 8 {
        let log_x1 = if x[0] == 0.0 { f64::EPSILON.ln() } else { x[0].abs().ln() };
        return x[0]
            + 0.707 * x[1].powi(2)
            + 2.0 * ind(x[2] > 0.0)
            + 0.873 * log_x1 * x[2].abs()
            + 0.894 * x[1] * x[3]
            + 2.0 * ind(x[4] > 0.0)
            + 0.464 * x[5].exp();
    }
    let t: Vec<f64> = x.iter().map(|&v| tilde(v)).collect();
    match model_id {
        1 => t[0].powi(2) + (-t[1].powi(2)).exp(),
        2 => t[0] * t[1] + t[2].powi(2) - t[3] * t[6] + t[4] * t[7] - t[5].powi(2),
        3 => -t[0].sin() + t[1].powi(2) + t[2] - (-x[3].powi(2)).exp(),
        4 => {
            let s3 = (2.0 * PI * t[2]).sin();
            let a4 = 2.0 * PI * t[3];
            t[0] + (2.0 * t[1] - 1.0).powi(2)
                + 2.0 * s3 / (2.0 - s3)
                + a4.sin()
                + 2.0 * a4.cos()
                + 3.0 * a4.sin().powi(2)
                + 4.0 * a4.cos().powi(2)
        }
        5 => {
            ind(t[0] > 0.0)
                + t[1].powi(3)
                + ind(t[2] + t[3] - t[5] - t[4] > 1.0 + t[6])
                + (-t[7].powi(2)).exp()
        }
        6 => t[0].powi(2) + t[1].powi(2) * t[2] * (-t[3].abs()).exp() + t[5] - t[4],
        7 => t[0] + 3.0 * t[1].powi(2) - 2.0 * (-t[2]).exp() + t[3],
        _ => unreachable!("model id checked by caller"),
    }
}

/// Draws `spec.n` rows of `spec.model_id` with its stated noise.
pub fn generate(spec: &SimSpec) -> Result<Dataset> {
    spec.validate()?;
    generate_with_noise_sd(spec, spec.noise_sd())
}

/// As [`generate`] but with an explicit noise standard deviation. The
/// predictor draws do not depend on `sd`.
pub fn generate_with_noise_sd(spec: &SimSpec, sd: f64) -> Result<Dataset> {
    spec.validate()?;
    if !(sd.is_finite() && sd >= 0.0) {
        return Err(RrmError::InvalidParameter(format!("noise sd must be >= 0, got {sd}")));
    }
    let p = spec.p();
    let mut x_rng = seed::child_rng(spec.seed, 0);
    let mut e_rng = seed::child_rng(spec.seed, 1);
    let x = if spec.model_id == 8 {
        Array2::from_shape_simple_fn((spec.n, p), || StandardNormal.sample(&mut x_rng))
    } else {
        Array2::from_shape_simple_fn((spec.n, p), || x_rng.random::<f64>())
    };
    let y = Array1::from_iter(x.outer_iter().map(|row| {
        let f = surface_unchecked(spec.model_id, row.as_slice().expect("standard layout"));
        let e: f64 = StandardNormal.sample(&mut e_rng);
        f + sd * e
    }));
    Dataset::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tilde_examples() {
        assert_eq!(tilde(0.5), 0.0);
        assert_eq!(tilde(0.0), -1.0);
        assert_eq!(tilde(0.75), 0.5);
    }

    #[test]
    fn surface_examples() {
        assert_eq!(true_surface(1, &[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(true_surface(2, &[0.5; 8]).unwrap(), 0.0);
        assert!((true_surface(4, &[0.5; 4]).unwrap() - 7.0).abs() < 1e-12);
        assert!((true_surface(7, &[0.5, 1.0, 0.5, 0.75]).unwrap() - 1.5).abs() < 1e-12);
        // Model 3's last term uses the raw x4.
        let v = true_surface(3, &[0.5, 0.5, 0.5, 1.0]).unwrap();
        assert!((v + (-1.0f64).exp()).abs() < 1e-15);
        // Model 5: indicator terms.
        let v = true_surface(5, &[1.0, 0.5, 1.0, 1.0, 0.0, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(v, 1.0 + 0.0 + 1.0 + 1.0);
        let v = true_surface(6, &[1.0, 1.0, 1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!((v - 4.0).abs() < 1e-15);
    }

    #[test]
    fn model_eight_log_floor() {
        let v = true_surface(8, &[0.0, 0.0, 1.0, 0.0, -1.0, 0.0]).unwrap();
        let want = 2.0 + 0.873 * f64::EPSILON.ln() + 0.464;
        assert!((v - want).abs() < 1e-12);
        assert!(v.is_finite());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(true_surface(1, &[0.5]).is_err());
        assert!(true_surface(9, &[0.5]).is_err());
        assert!(SimSpec::new(0, 10, 1).is_err());
        assert!(SimSpec::new(3, 0, 1).is_err());
        assert!("both".parse::<NoiseArg>().is_err());
    }

    #[test]
    fn dimensions_and_determinism() {
        for m in 1..=8u8 {
            let s = SimSpec::new(m, 25, 3).unwrap();
            let d = generate(&s).unwrap();
            assert_eq!(d.p(), DIMS[m as usize - 1]);
            assert_eq!(d.n(), 25);
            assert_eq!(d, generate(&s).unwrap());
            assert_ne!(d.features, generate(&SimSpec::new(m, 25, 4).unwrap()).unwrap().features);
        }
    }

    #[test]
    fn zero_noise_matches_surface() {
        for m in 1..=8u8 {
            let s = SimSpec::new(m, 50, 11).unwrap();
            let d = generate_with_noise_sd(&s, 0.0).unwrap();
            let noisy = generate(&s).unwrap();
            assert_eq!(d.features, noisy.features);
            for (row, y) in d.features.outer_iter().zip(d.target.iter()) {
                assert_eq!(*y, true_surface(m, row.as_slice().unwrap()).unwrap());
            }
        }
    }

    #[test]
    fn uniform_range() {
        let d = generate(&SimSpec::new(2, 500, 0).unwrap()).unwrap();
        assert!(d.features.iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn noise_levels() {
        for m in 1..=8u8 {
            for arg in [NoiseArg::Variance, NoiseArg::Sd] {
                let s = SimSpec::new(m, 100_000, 21).unwrap().with_noise_arg(arg);
                let d = generate(&s).unwrap();
                let resid: Vec<f64> = d
                    .features
                    .outer_iter()
                    .zip(d.target.iter())
                    .map(|(r, y)| y - true_surface(m, r.as_slice().unwrap()).unwrap())
                    .collect();
                let (_, sd) = crate::data::mean_sd(&resid);
                let want = s.noise_sd();
                if want == 0.0 {
                    assert_eq!(sd, 0.0);
                } else {
                    assert!((sd / want - 1.0).abs() < 0.03, "model {m} {arg}: {sd} vs {want}");
                }
            }
        }
        assert_eq!(noise_sd(1, NoiseArg::Variance).unwrap(), 0.5);
    }

    #[test]
    fn model_eight_indicator_mean() {
        let d = generate(&SimSpec::new(8, 100_000, 5).unwrap()).unwrap();
        let m = d.features.column(2).iter().map(|&v| 2.0 * ind(v > 0.0)).sum::<f64>() / 1e5;
        assert!((m - 1.0).abs() < 0.02, "{m}");
    }
}
