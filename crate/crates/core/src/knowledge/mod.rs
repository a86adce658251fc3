//! Commonsense fact triples: ingestion, lemma inverted index, and the
//! CN5All / CN5WN3 / CN5Sel source views.

mod lemma;
mod store;

pub use lemma::{default_lemmatizer, Lemmatizer};
pub use store::{
    default_wordnet_predicate, FactId, FactStore, KnowledgeTriple, SourceVariant,
    SELECTED_EXCLUDED_RELATIONS,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("triple file line {line}: {message}")]
    Ingest { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
