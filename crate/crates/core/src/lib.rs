//! Regression Random Machines: bagged ε-SVR ensembles whose members draw
//! their kernel from a softmax over pilot errors and are weighted by their
//! out-of-bag error.

pub mod bagging;
pub mod cli;
pub mod config;
pub mod data;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod machines;
pub mod metrics;
pub mod model_io;
pub mod par;
pub mod seed;
pub mod svr;

pub use error::{Result, RrmError};
