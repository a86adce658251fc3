//! Accuracy evaluation and multi-run majority voting.

use super::harness::PreparedDataset;
use super::TrainError;
use crate::model::{forward, ModelConfig, ModelParams};
use crate::tensor::Graph;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub predicted_index: usize,
    pub gold_index: usize,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    pub fn correct(&self) -> bool {
        self.predicted_index == self.gold_index
    }
}

pub fn accuracy(predictions: &[Prediction]) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    predictions.iter().filter(|p| p.correct()).count() as f64 / predictions.len() as f64
}

/// Dropout-free forward over the dataset. Argmax ties resolve toward the
/// lowest candidate index.
pub fn evaluate(
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    dataset: &PreparedDataset,
) -> Result<(f64, Vec<Prediction>), TrainError> {
    let mut predictions = Vec::with_capacity(dataset.len());
    for (i, inst) in dataset.encoded.iter().enumerate() {
        let mut g = Graph::new();
        let pids = params.register(&mut g);
        let out = forward(&mut g, &pids, inst, &dataset.facts[i], cfg, None)?;
        predictions.push(Prediction {
            instance_id: inst.instance_id.clone(),
            predicted_index: out.predicted_index,
            gold_index: inst.gold_index,
            probabilities: out.probabilities,
        });
    }
    Ok((accuracy(&predictions), predictions))
}

/// Majority voting over per-run prediction sets covering identical
/// instances. Vote ties break by highest mean probability, then lowest
/// candidate index. The returned probabilities are the per-candidate means.
pub fn majority_vote(prediction_sets: &[Vec<Prediction>]) -> Result<Vec<Prediction>, TrainError> {
    let first = prediction_sets
        .first()
        .ok_or_else(|| TrainError::MismatchedPredictionSets("no prediction sets".into()))?;
    for (ri, set) in prediction_sets.iter().enumerate() {
        if set.len() != first.len() {
            return Err(TrainError::MismatchedPredictionSets(format!(
                "set 0 has {} instances, set {ri} has {}",
                first.len(),
                set.len()
            )));
        }
        for (a, b) in first.iter().zip(set) {
            if a.instance_id != b.instance_id {
                return Err(TrainError::MismatchedPredictionSets(format!(
                    "instance {} vs {}",
                    a.instance_id, b.instance_id
                )));
            }
        }
    }

    let runs = prediction_sets.len() as f64;
    let mut out = Vec::with_capacity(first.len());
    for i in 0..first.len() {
        let n_cand = first[i].probabilities.len();
        let mut votes = vec![0usize; n_cand];
        let mut mean_probs = vec![0.0f64; n_cand];
        for set in prediction_sets {
            votes[set[i].predicted_index] += 1;
            for (m, p) in mean_probs.iter_mut().zip(&set[i].probabilities) {
                *m += p / runs;
            }
        }
        let top_votes = *votes.iter().max().unwrap();
        let mut winner = None;
        for c in 0..n_cand {
            if votes[c] != top_votes {
                continue;
            }
            winner = match winner {
                None => Some(c),
                Some(w) if mean_probs[c] > mean_probs[w] => Some(c),
                w => w,
            };
        }
        out.push(Prediction {
            instance_id: first[i].instance_id.clone(),
            predicted_index: winner.expect("at least one candidate"),
            gold_index: first[i].gold_index,
            probabilities: mean_probs,
        });
    }
    Ok(out)
}
