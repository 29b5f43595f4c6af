//! Spatial record linkage for repeated forest surveys, and growth models
//! fitted with linkage uncertainty carried through.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod growth;
pub mod linkage;
pub mod pipeline;
pub mod records;
pub mod rng;
pub mod sim;
pub mod spatial;
pub mod stats;

pub use error::{Error, Result};
pub use records::{Record, RecordFile};
pub use spatial::{Domain, Point2, RigidTransform};
