//! Detection toolkit for GAN-synthesized driving-scene videos.
//!
//! The crate covers the full desk-scale pipeline: corpus manifests and
//! deterministic splits ([`dataset`]), the H.264 compression harness and
//! frame pipeline ([`media`]), a scalable Xception-style per-frame
//! classifier ([`model`]), the optimization loop ([`training`]), the
//! matched / compression-mismatch / cross-dataset evaluation protocols
//! ([`eval`]), a synthetic fixture generator ([`synthgen`]) and the
//! `deepstreets` command-line entry point ([`cli`]).

pub mod cli;
pub mod dataset;
pub mod eval;
pub mod media;
pub mod model;
pub mod synthgen;
pub mod training;
