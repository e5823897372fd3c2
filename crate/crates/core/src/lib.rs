//! Domain statistics, mixture optimization and token-budgeted data selection
//! for annotated pre-training corpora.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod corpus;
pub mod error;
pub mod lab;
pub mod mixture;
pub mod pipeline;
pub mod reference;
pub mod regression;
pub mod rng;
pub mod sampling;
pub mod search;
pub mod selection;
pub mod taxonomy;

pub use error::{Error, Result};
pub use mixture::Mixture;
pub use taxonomy::Taxonomy;
