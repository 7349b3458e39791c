//! Error and diversity metrics.

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Result, RrmError};

/// Root mean squared error.
pub fn rmse(y: ArrayView1<f64>, yhat: ArrayView1<f64>) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(RrmError::DimensionMismatch {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(RrmError::Empty("rmse input"));
    }
    let ss: f64 = y.iter().zip(yhat.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

/// Min-max rescaled errors: the best method maps to 0 and the worst to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorScore {
    pub scores: Vec<f64>,
    /// Set when every input was equal; `scores` is then all zeros.
    pub degenerate: bool,
}

pub fn error_score(errors: &[f64]) -> Result<ErrorScore> {
    if errors.len() < 2 {
        return Err(RrmError::InvalidParameter(format!(
            "error score needs at least 2 methods, got {}",
            errors.len()
        )));
    }
    if !errors.iter().all(|e| e.is_finite()) {
        return Err(RrmError::NonFinite("error score input"));
    }
    let min = errors.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = errors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range <= 0.0 {
        return Ok(ErrorScore {
            scores: vec![0.0; errors.len()],
            degenerate: true,
        });
    }
    Ok(ErrorScore {
        scores: errors.iter().map(|e| ((e - min) / range).clamp(0.0, 1.0)).collect(),
        degenerate: false,
    })
}

/// Mean pairwise correlation of a prediction matrix (one row per model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    pub value: f64,
    /// Pairs skipped because one of the rows was constant.
    pub skipped_pairs: usize,
    pub used_pairs: usize,
}

/// Mean Pearson correlation over all pairs `i < j` of rows of `preds`.
pub fn agreement(preds: ArrayView2<f64>) -> Result<Agreement> {
    let b = preds.nrows();
    let t = preds.ncols();
    if b < 2 {
        return Err(RrmError::TooFewRows { needed: 2, got: b });
    }
    if t < 2 {
        return Err(RrmError::InvalidParameter(format!(
            "agreement needs at least 2 test points, got {t}"
        )));
    }
    // Centre and normalise each row once.
    let normed: Vec<Option<Vec<f64>>> = preds
        .outer_iter()
        .map(|row| {
            let mean = row.sum() / t as f64;
            let centred: Vec<f64> = row.iter().map(|v| v - mean).collect();
            let norm = centred.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = centred.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            // Rows whose spread is rounding noise count as constant.
            if norm > 0.0 && scale > 1e-12 * mean.abs().max(1e-300) {
                Some(centred.into_iter().map(|v| v / norm).collect())
            } else {
                None
            }
        })
        .collect();
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for i in 0..b {
        for j in i + 1..b {
            match (&normed[i], &normed[j]) {
                (Some(a), Some(c)) => {
                    let r: f64 = a.iter().zip(c).map(|(u, v)| u * v).sum();
                    sum += r.clamp(-1.0, 1.0);
                    used += 1;
                }
                _ => skipped += 1,
            }
        }
    }
    if used == 0 {
        return Err(RrmError::UndefinedAgreement);
    }
    Ok(Agreement {
        value: sum / used as f64,
        skipped_pairs: skipped,
        used_pairs: used,
    })
}
