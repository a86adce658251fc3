//! Knowledgeable reading comprehension over cloze-style stories.
//!
//! The crate is organized around the pipeline: [`data`] parses CBT-format
//! instances and builds vocabulary/embeddings, [`knowledge`] ingests and
//! indexes commonsense fact triples, [`retrieval`] selects weighted facts
//! per instance, [`tensor`] provides the reverse-mode differentiation core,
//! [`model`] implements the reader's forward pass over a per-instance
//! key-value fact memory, and [`train`] drives optimization, evaluation and
//! the analysis tooling.

pub mod data;
pub mod knowledge;
pub mod model;
pub mod retrieval;
pub mod tensor;
pub mod train;
