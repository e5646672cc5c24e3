//! Table answer selection for web search queries.
//!
//! Given a query and a ranked list of HTML documents, the engine extracts
//! relational tables, scores each query-table pair with a boosted-tree
//! classifier over query-table similarity and table dominance/quality
//! features, returns the best table when its score clears a threshold, and
//! renders an m x n snippet of it.

pub mod classifier;
pub mod docmap;
pub mod error;
pub mod eval;
pub mod extraction;
pub mod features;
pub mod pipeline;
pub mod quality;
pub mod selector;
pub mod similarity;
pub mod snippet;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
