//! Building blocks for classifying mathematical preprints under MSC 2020 with a
//! chat LLM and scoring the suggestions against arXiv-provided ground truth.
//!
//! The crate is split along the pipeline:
//!
//! - [`msc`]: the MSC 2020 code grammar, the code list and free-text extraction.
//! - [`corpus`]: sampling recent arXiv preprints per top-level class and
//!   normalizing their text.
//! - [`classifier`]: the prompt protocol, chat providers and reply parsing.
//! - [`evaluation`]: per-item comparison rows, aggregates, quality scores and
//!   report rendering.
//! - [`store`]: the append-only run store, transcript cache and replay fixture.

pub mod classifier;
pub mod corpus;
pub mod evaluation;
pub mod msc;
pub mod net;
pub mod store;

pub use msc::{MscCode, Taxonomy, TopClass, ValidationStatus};
