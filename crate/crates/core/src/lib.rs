//! Attribute-conditioned review generation and explanation evaluation.
//!
//! The crate is organised bottom-up:
//!
//! * [`numeric`] dense tensors, a reverse-mode tape, RMSProp and initialisers
//! * [`corpus`] review ingestion, filtering, splitting and baseline selectors
//! * [`encoding`] tokenisation, vocabularies and attribute encoders
//! * [`genmodels`] the GCN / context / attention generators over a two-layer LSTM
//! * [`training`] teacher-forced training with validation-based selection
//! * [`textmetrics`] BLEU-4, readability indices, polarity and Pearson correlation
//! * [`recsys`] a DeepCoNN-style rating predictor and RMSE / discrepancy evaluation
//! * [`experiment`] configuration and the staged prepare → report pipeline
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

pub mod corpus;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod genmodels;
pub mod hashing;
pub mod numeric;
pub mod par;
pub mod recsys;
pub mod synth;
pub mod textmetrics;
pub mod training;

pub use error::{Error, Result};
