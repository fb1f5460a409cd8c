//! Code clone detection: a token-bag overlap detector with prefix-filtered
//! index pruning, an embedding detector over Identifier and AST sequences,
//! and the evaluation harness around them (candidate filtering, consensus
//! labels, confusion matrices, precision/recall, type distributions and
//! timing).

pub mod detector;
pub mod embedder;
pub mod error;
pub mod evaluator;
pub mod extractor;
pub mod io;
pub mod mutation;
pub mod pair;
pub mod par;
pub mod synth;

pub use error::{Error, Result};
pub use par::Execution;
pub use pair::{ClonePair, DetectorTag, PairKey};
