//! Template-based dense correspondence between point clouds.
//!
//! A point-cloud encoder produces a fixed-length feature embedding; a
//! hypernetwork maps that embedding to the complete parameter set of a
//! small per-point decoder that deforms a learned template onto the
//! encoded shape. Correspondence between two clouds is read off their
//! shared alignment to the template.
//!
//! The crate is organised bottom-up:
//!
//! * [`scalar`], [`linalg`], [`tape`], [`adam`] — numeric kernels and a
//!   buffer-level reverse-mode gradient tape,
//! * [`geometry`] — point clouds, nearest-neighbour index, Chamfer
//!   distance, rotations, mesh/point file I/O,
//! * [`model`] — encoder, hypernetwork, meta decoder, learnable template,
//!   and a latent-vector-concatenation (LVC) baseline decoder,
//! * [`data`] — a synthetic articulated-figure dataset with exact
//!   ground-truth correspondence, plus model checkpoints,
//! * [`pipeline`] — training, rotation grid search, embedding
//!   optimization, correspondence extraction, evaluation, benchmarks.
//!
//! Everything is deterministic for a fixed seed and thread-count
//! independent: parallel and sequential execution produce bit-identical
//! results (see [`exec`]).

pub mod adam;
pub mod data;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod tape;

pub use error::{Error, Result};
pub use scalar::Scalar;
