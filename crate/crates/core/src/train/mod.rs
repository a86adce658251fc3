//! Training, evaluation, ensembling and the analysis harness.

mod ablate;
mod eval;
mod harness;
mod stats;
mod synth;

pub use ablate::{
    ablation_sweep, budget_sweep, kv_sweep, run_experiment, sweep_table, variant_sweep,
    ExperimentResult, SweepDatasets, SweepRow,
};
pub use eval::{accuracy, evaluate, majority_vote, Prediction};
pub use harness::{
    compute_traces, prepare_dataset, retrieve_all, retrieve_with_cache, train, CheckpointRecord,
    PreparedDataset, RunResult, TrainConfig,
};
pub use stats::{reversed_prediction_stats, reversed_prediction_stats_for, ComponentFlips};
pub use synth::{
    generate_synthetic, knowledge_necessity_train_config, SynthConfig, SynthData, SYNTH_RELATION,
};

use crate::data::DataError;
use crate::knowledge::KnowledgeError;
use crate::model::ModelError;
use crate::retrieval::RetrievalError;
use crate::tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("prediction sets do not cover identical instances: {0}")]
    MismatchedPredictionSets(String),
    #[error("trace lacks scores for component {0}; run the full model")]
    MissingComponent(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
