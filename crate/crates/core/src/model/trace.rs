//! Attention traces: everything needed to inspect how the memory
//! contributed to one prediction, exportable as one JSON document per
//! instance.

use super::config::{Interaction, ALL_INTERACTIONS};
use crate::data::ClozeInstance;
use serde::{Deserialize, Serialize};

/// Fact-attention row for one candidate occurrence token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenFactAttention {
    pub candidate_index: usize,
    pub document_position: usize,
    /// Distribution over memory rows; sums to 1.
    pub attention: Vec<f64>,
}

/// Full record of one forward pass over one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    pub instance_id: String,
    /// Question text and candidate strings; filled by [`AttentionTrace::fill_text`].
    #[serde(default)]
    pub question_tokens: Vec<String>,
    #[serde(default)]
    pub candidates: Vec<String>,
    pub placeholder_index: usize,
    pub gold_index: usize,
    pub predicted_index: usize,
    /// Final distribution over the candidates.
    pub probabilities: Vec<f64>,
    /// Per-candidate ensemble attention sums (the logits of the final
    /// softmax).
    pub ensemble_scores: Vec<f64>,
    /// Raw (unweighted) per-candidate attention sums for each interaction,
    /// in W1..W4 order; absent where the variant was not computed.
    pub interaction_sums: [Option<Vec<f64>>; 4],
    pub ensemble_weights: [f64; 4],
    /// Text of each memory row's fact, aligned with attention columns.
    pub fact_texts: Vec<String>,
    /// Attention over memory rows from the question placeholder; absent
    /// when the memory is empty.
    pub query_fact_attention: Option<Vec<f64>>,
    pub token_fact_attention: Vec<TokenFactAttention>,
}

impl AttentionTrace {
    /// Attach the human-readable fields from the raw instance.
    pub fn fill_text(&mut self, instance: &ClozeInstance) {
        self.question_tokens = instance.question_tokens.clone();
        self.candidates = instance.candidates.clone();
    }

    pub fn predicted_answer(&self) -> Option<&str> {
        self.candidates.get(self.predicted_index).map(String::as_str)
    }

    pub fn gold_answer(&self) -> Option<&str> {
        self.candidates.get(self.gold_index).map(String::as_str)
    }

    pub fn memory_size(&self) -> usize {
        self.fact_texts.len()
    }

    /// Interactions whose standalone scores the trace carries.
    pub fn available_interactions(&self) -> Vec<Interaction> {
        ALL_INTERACTIONS
            .into_iter()
            .filter(|i| self.interaction_sums[i.weight_index()].is_some())
            .collect()
    }

    /// Argmax of one interaction's standalone per-candidate sums, with ties
    /// resolved toward the lowest candidate index.
    pub fn component_prediction(&self, interaction: Interaction) -> Option<usize> {
        self.interaction_sums[interaction.weight_index()]
            .as_ref()
            .map(|sums| argmax(sums))
    }
}

/// First index attaining the maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Serialize traces as JSON lines.
pub fn write_traces<W: std::io::Write>(
    traces: &[AttentionTrace],
    mut w: W,
) -> Result<(), std::io::Error> {
    for t in traces {
        serde_json::to_writer(&mut w, t)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_traces<R: std::io::BufRead>(r: R) -> Result<Vec<AttentionTrace>, std::io::Error> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
