//! The knowledgeable reader: configuration, parameters, forward pass and
//! attention traces.

mod config;
mod forward;
mod gradcheck;
mod params;
mod trace;

pub use config::{
    Interaction, InteractionSet, KvStrategy, ModelConfig, ALL_INTERACTIONS,
};
pub use forward::{
    encode_fact_memory, forward, query_memory, resolve_facts, EncodedFact, FactMemory,
    ForwardOutput,
};
pub use gradcheck::{gradcheck_toy, GradCheckConfig, GradCheckReport, GRADCHECK_TOLERANCE};
pub use params::{
    ModelParams, ParamIds, GROUP_CTX_ENCODER, GROUP_EMBEDDINGS, GROUP_ENSEMBLE,
    GROUP_FACT_ENCODER,
};
pub use trace::{argmax, read_traces, write_traces, AttentionTrace, TokenFactAttention};

use crate::tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("question is empty")]
    EmptyQuestion,
    #[error("placeholder index {index} out of range for question of length {len}")]
    PlaceholderOutOfRange { index: usize, len: usize },
    #[error("candidate {candidate_index} has no document occurrence")]
    CandidateWithoutOccurrence { candidate_index: usize },
    #[error("occurrence position {position} out of range for document of length {len}")]
    OccurrenceOutOfRange { position: usize, len: usize },
    #[error("fact {fact_id} has an empty subject or object")]
    EmptyFactArgument { fact_id: usize },
    #[error("fact token {token:?} is not in the vocabulary")]
    FactTokenUnresolvable { token: String },
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("checkpoint: {message}")]
    Checkpoint { message: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
