//! Semantic role labeling cast as reading comprehension: sense selection by
//! multiple choice, role filtering by global top-λN selection, and span
//! labeling with one query per candidate role, merged by a constrained decoder.

pub mod baseline;
pub mod corpus;
pub mod decoder;
pub mod disambiguation;
pub mod error;
pub mod evaluation;
pub mod frames;
pub mod pipeline;
pub mod querygen;
pub mod role_filter;
pub mod scoring;
pub mod synth;

pub use error::{Error, Result};
