//! Core algorithms for assessing the correctness of program-repair patches.
//!
//! This crate is `no_std`-compatible (requires `alloc`) and holds the pure
//! computational pieces of the toolkit:
//!
//! - [`diff`]: unified-diff parsing and byte-exact re-serialization.
//! - [`corpus`]: labeled patch records, deduplication, and cross-tool folds.
//! - [`bpe`]: byte-level byte-pair-encoding tokenizer.
//! - [`embedder`]: a small contrastively trained patch encoder.
//! - [`retrieval`]: exact cosine-similarity nearest-neighbour search.
//! - [`guidance`]: bug-level context blocks (description, traces, coverage).
//! - [`prompt`]: in-context-learning prompt assembly under a token budget.
//! - [`llm`]: next-token scoring backends and the binary classifier.
//! - [`metrics`]: confusion-matrix metrics, AUC, and weighted averages.
//! - [`stats`]: the Wilcoxon signed-rank test.
//!
//! All floating-point transcendentals go through [`libm`] so results are
//! bit-identical across platforms and with or without `std`.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

// Re-exported so downstream crates seed the exact RNG this crate trains
// with, without pinning the version twice.
pub use rand_chacha;

pub mod bpe;
pub mod corpus;
pub mod diff;
pub mod embedder;
pub mod guidance;
pub mod linalg;
pub mod llm;
pub mod math;
pub mod metrics;
pub mod prompt;
pub mod retrieval;
pub mod stats;
