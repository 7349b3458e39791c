//! Model files.
//!
//! A model file is UTF-8 JSON with this top-level layout:
//!
//! ```json
//! {
//!   "format": "rrm-model",
//!   "version": 1,
//!   "method": "RRM",
//!   "feature_names": ["x1", "x2"],
//!   "target_name": "y",
//!   "preprocessor": null,
//!   "model": { "kind": "rrm", ... }
//! }
//! ```
//!
//! * `method` is one of the harness method names.
//! * `preprocessor`, when present, maps raw CSV columns to model features:
//!   a list of steps `{"op": "standardize", "column", "mean", "sd"}`,
//!   `{"op": "passthrough", "column"}` or `{"op": "one_hot", "column", "levels"}`.
//! * `model.kind` is `svr`, `bagged_svr` or `rrm`. An SVR stores its support
//!   vectors (`{"v": 1, "dim": [k, p], "data": [...]}` row-major), the
//!   coefficients `α − α′`, the bias and the kernel
//!   (`{"family", "gamma", "degree"}`). Ensembles store their members as SVRs;
//!   `rrm` adds `member_weights`, `kernel_probs`, `pilot_errors`, `pilot_rmse`,
//!   `member_oob_errors` and `assigned_kernels`.
//!
//! Floats are written in shortest round-trip form, so saving and loading is
//! exact. Readers reject other formats and versions.

use std::path::Path;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::bagging::BaggedSvrModel;
use crate::data::{atomic_write, Preprocessor};
use crate::error::{Result, RrmError};
use crate::machines::RrmModel;
use crate::svr::SvrModel;

pub const FORMAT: &str = "rrm-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoredModel {
    Svr(SvrModel),
    BaggedSvr(BaggedSvrModel),
    Rrm(RrmModel),
}

impl StoredModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        match self {
            StoredModel::Svr(m) => m.predict(x),
            StoredModel::BaggedSvr(m) => m.predict(x),
            StoredModel::Rrm(m) => m.predict(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub method: String,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub preprocessor: Option<Preprocessor>,
    pub model: StoredModel,
}

impl ModelFile {
    pub fn new(
        method: impl Into<String>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        preprocessor: Option<Preprocessor>,
        model: StoredModel,
    ) -> Self {
        ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            method: method.into(),
            feature_names,
            target_name: target_name.into(),
            preprocessor,
            model,
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self).map_err(|e| RrmError::ModelFormat(e.to_string()))?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let h: Header = serde_json::from_slice(bytes).map_err(|e| RrmError::ModelFormat(e.to_string()))?;
        if h.format != FORMAT {
            return Err(RrmError::ModelFormat(format!("not a model file (format `{}`)", h.format)));
        }
        if h.version != VERSION {
            return Err(RrmError::ModelFormat(format!(
                "unsupported model file version {} (expected {VERSION})",
                h.version
            )));
        }
        serde_json::from_slice(bytes).map_err(|e| RrmError::ModelFormat(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read(path)?)
    }
}
