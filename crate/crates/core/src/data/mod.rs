//! CBT-format data ingestion: parsing, vocabulary, id encoding, pretrained
//! embeddings and length-sorted batching.

mod batch;
mod embed;
mod encode;
mod parse;
mod vocab;

pub use batch::{batch_instances, shuffle_batches, Batch};
pub use embed::{load_embeddings, random_embeddings, EmbeddingMatrix};
pub use encode::{encode_instance, EncodedInstance};
pub use parse::{parse_cbt_file, parse_cbt_str, write_cbt, ClozeInstance, ParseConfig};
pub use vocab::{Vocabulary, NUM_UNK_IDS, PAD_ID};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("block {block}: {rule}")]
    Parse { block: usize, rule: String },
    #[error("instance {instance_id}: candidate {candidate:?} has no document occurrence")]
    CandidateWithoutOccurrence {
        instance_id: String,
        candidate: String,
    },
    #[error("instance {instance_id}: gold answer {gold:?} not among candidates")]
    GoldNotACandidate { instance_id: String, gold: String },
    #[error("embedding file line {line}: {message}")]
    EmbeddingFormat { line: usize, message: String },
    #[error("vocabulary file line {line}: {message}")]
    VocabFormat { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
