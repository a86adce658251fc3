//! Instance encoding: token ids, per-instance UNK assignment and candidate
//! occurrence pointers.

use super::parse::CANDIDATES_PER_INSTANCE;
use super::{ClozeInstance, DataError, Vocabulary};
use rand::Rng;
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInstance {
    pub instance_id: String,
    pub document_ids: Vec<u32>,
    pub question_ids: Vec<u32>,
    pub placeholder_index: usize,
    pub candidate_ids: Vec<u32>,
    /// For each candidate, the document positions its id occurs at (the
    /// index pointers the attention sum runs over).
    pub candidate_occurrences: Vec<Vec<usize>>,
    pub gold_index: usize,
    /// Out-of-vocabulary word -> unknown id chosen for this instance.
    pub unk_assignment: HashMap<String, u32>,
}

impl EncodedInstance {
    pub fn document_len(&self) -> usize {
        self.document_ids.len()
    }
}

/// Encode one instance against a vocabulary. Every out-of-vocabulary word
/// is mapped to one of the 100 unknown ids, drawn from the given seeded
/// source and reused for all occurrences of the word within this instance.
/// Distinct words get distinct unknown ids while unused ids remain.
pub fn encode_instance<R: Rng>(
    instance: &ClozeInstance,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<EncodedInstance, DataError> {
    let mut unk_assignment: HashMap<String, u32> = HashMap::new();
    let mut available: Vec<u32> = vocab.unk_ids().to_vec();

    let mut id_of = |word: &str, rng: &mut R| -> u32 {
        if let Some(id) = vocab.id_of(word) {
            return id;
        }
        if let Some(&id) = unk_assignment.get(word) {
            return id;
        }
        let id = if available.is_empty() {
            // More distinct OOV words than unknown slots: fall back to
            // sampling with replacement.
            vocab.unk_ids()[rng.random_range(0..vocab.unk_ids().len())]
        } else {
            available.swap_remove(rng.random_range(0..available.len()))
        };
        unk_assignment.insert(word.to_string(), id);
        id
    };

    let document_ids: Vec<u32> = instance
        .document_tokens
        .iter()
        .map(|t| id_of(t, rng))
        .collect();
    let question_ids: Vec<u32> = instance
        .question_tokens
        .iter()
        .map(|t| id_of(t, rng))
        .collect();
    let candidate_ids: Vec<u32> = instance
        .candidates
        .iter()
        .map(|t| id_of(t, rng))
        .collect();

    let mut candidate_occurrences = Vec::with_capacity(CANDIDATES_PER_INSTANCE);
    for (ci, &cid) in candidate_ids.iter().enumerate() {
        let occ: Vec<usize> = document_ids
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == cid)
            .map(|(j, _)| j)
            .collect();
        if occ.is_empty() {
            return Err(DataError::CandidateWithoutOccurrence {
                instance_id: instance.instance_id.clone(),
                candidate: instance.candidates[ci].clone(),
            });
        }
        candidate_occurrences.push(occ);
    }

    let gold_index = instance
        .candidates
        .iter()
        .position(|c| c == &instance.gold_answer)
        .ok_or_else(|| DataError::GoldNotACandidate {
            instance_id: instance.instance_id.clone(),
            gold: instance.gold_answer.clone(),
        })?;

    Ok(EncodedInstance {
        instance_id: instance.instance_id.clone(),
        document_ids,
        question_ids,
        placeholder_index: instance.placeholder_index,
        candidate_ids,
        candidate_occurrences,
        gold_index,
        unk_assignment,
    })
}
