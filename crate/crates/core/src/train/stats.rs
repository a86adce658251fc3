//! Reversed-prediction statistics: how often each knowledge-bearing
//! component flips the text-only answer, counted from stored traces without
//! retraining.

use super::harness::{compute_traces, PreparedDataset};
use super::TrainError;
use crate::model::{argmax, AttentionTrace, Interaction, ModelConfig, ModelParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentFlips {
    pub component: String,
    pub wrong_to_correct: usize,
    pub correct_to_wrong: usize,
}

const KNOWLEDGE_COMPONENTS: [Interaction; 3] =
    [Interaction::CtxKn, Interaction::KnCtx, Interaction::KnKn];

/// Compare each knowledge component's standalone argmax (and the ensemble
/// of the three weighted knowledge terms) against the text-only argmax.
pub fn reversed_prediction_stats(
    traces: &[AttentionTrace],
) -> Result<Vec<ComponentFlips>, TrainError> {
    let mut flips: Vec<ComponentFlips> = KNOWLEDGE_COMPONENTS
        .iter()
        .map(|c| ComponentFlips {
            component: c.table_label().to_string(),
            wrong_to_correct: 0,
            correct_to_wrong: 0,
        })
        .chain(std::iter::once(ComponentFlips {
            component: "Ensemble (w/o D_ctx, Q_ctx)".to_string(),
            wrong_to_correct: 0,
            correct_to_wrong: 0,
        }))
        .collect();

    for trace in traces {
        let ctx_sums = trace.interaction_sums[Interaction::CtxCtx.weight_index()]
            .as_ref()
            .ok_or_else(|| TrainError::MissingComponent("D_ctx, Q_ctx".into()))?;
        let ctx_pred = argmax(ctx_sums);
        let ctx_correct = ctx_pred == trace.gold_index;

        let mut record = |slot: usize, pred: usize| {
            let correct = pred == trace.gold_index;
            if !ctx_correct && correct {
                flips[slot].wrong_to_correct += 1;
            } else if ctx_correct && !correct {
                flips[slot].correct_to_wrong += 1;
            }
        };

        let mut ensemble = vec![0.0f64; ctx_sums.len()];
        for (slot, comp) in KNOWLEDGE_COMPONENTS.iter().enumerate() {
            let sums = trace.interaction_sums[comp.weight_index()]
                .as_ref()
                .ok_or_else(|| TrainError::MissingComponent(comp.table_label().into()))?;
            record(slot, argmax(sums));
            let w = trace.ensemble_weights[comp.weight_index()];
            for (e, s) in ensemble.iter_mut().zip(sums) {
                *e += w * s;
            }
        }
        record(KNOWLEDGE_COMPONENTS.len(), argmax(&ensemble));
    }
    Ok(flips)
}

/// Convenience wrapper: trace the dataset with the given model, then count.
pub fn reversed_prediction_stats_for(
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    dataset: &PreparedDataset,
) -> Result<Vec<ComponentFlips>, TrainError> {
    let traces = compute_traces(params, cfg, dataset)?;
    reversed_prediction_stats(&traces)
}
