//! Mode decomposition learning: feedforward networks whose weights are
//! trained as products of pattern matrices and importance vectors, together
//! with baselines, analysis tools and an online teacher-student theory.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod baselines;
pub mod checkpoint;
pub mod datasets;
pub mod error;
pub mod linalg;
pub mod modes;
pub mod online;
pub mod training;

pub use error::{Error, Result};
