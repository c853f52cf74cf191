//! Discrete trace and lifting operators on hybrid polynomial spaces.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod condense;
pub mod error;
pub mod flat;
pub mod io;
pub mod lemma_lab;
pub mod lifting;
pub mod mesh;
pub mod par;
pub mod quadrature;
pub mod rng;
pub mod seminorms;
pub mod space;
pub mod spectral;

pub use error::{Result, TraceLabError};
