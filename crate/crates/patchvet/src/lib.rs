//! Filesystem, network, and orchestration layers around [`patchvet_core`].
//!
//! The core crate holds the pure algorithms; this crate adds everything
//! that touches the outside world:
//!
//! - [`config`]: layered run configuration (flags > environment > file >
//!   defaults) echoed verbatim into every report.
//! - [`dataset`]: the line-delimited patch-record format and exclusion
//!   lists.
//! - [`bugdir`]: the per-bug artifact directory layout.
//! - [`formats`]: versioned artifact files (vocabulary, embedder
//!   checkpoint, retrieval index, prediction lines, evaluation reports).
//! - [`http`]: the completion-style HTTP backend with retries.
//! - [`pipeline`]: per-fold training and single-patch assessment.
//! - [`eval`]: the cross-tool leave-one-out harness and the
//!   hyper-parameter sweep.

pub mod bugdir;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod formats;
pub mod http;
pub mod pipeline;
