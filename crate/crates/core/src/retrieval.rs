//! Per-instance fact selection: weighted scoring, equal per-candidate
//! quotas, cross-candidate deduplication and stable tie-breaking.

use crate::data::ClozeInstance;
use crate::knowledge::{FactId, FactStore, Lemmatizer};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("fact budget {budget} is not divisible by the candidate count {candidates}")]
    BudgetNotDivisible { budget: usize, candidates: usize },
    #[error("weights must be strictly decreasing and positive: {0:?}")]
    InvalidWeights((u32, u32, u32)),
}

/// Node weight tiers: a phrase matching an answer candidate outranks one
/// matching only the question, which outranks one matching only the
/// document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeWeights {
    pub answer: u32,
    pub question: u32,
    pub document: u32,
}

impl Default for NodeWeights {
    fn default() -> Self {
        NodeWeights {
            answer: 4,
            question: 3,
            document: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Total fact budget per instance.
    pub budget: usize,
    pub weights: NodeWeights,
}

impl RetrievalConfig {
    pub const DEFAULT_BUDGET: usize = 50;

    pub fn new(budget: usize) -> Self {
        RetrievalConfig {
            budget,
            weights: NodeWeights::default(),
        }
    }

    /// Equal quota per candidate; the budget must divide evenly.
    pub fn per_candidate_cap(&self, candidates: usize) -> Result<usize, RetrievalError> {
        if candidates == 0 || self.budget % candidates != 0 {
            return Err(RetrievalError::BudgetNotDivisible {
                budget: self.budget,
                candidates,
            });
        }
        let w = &self.weights;
        if !(w.answer > w.question && w.question > w.document && w.document > 0) {
            return Err(RetrievalError::InvalidWeights((
                w.answer, w.question, w.document,
            )));
        }
        Ok(self.budget / candidates)
    }
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig::new(Self::DEFAULT_BUDGET)
    }
}

/// One selected fact with its weight and the candidate that claimed it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievedFact {
    pub fact_id: FactId,
    pub weight: u32,
    pub candidate_index: usize,
}

/// Ordered selection for one instance: per-candidate slices concatenated in
/// candidate order, each slice weight-descending with ordinal tie-breaks.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RetrievedFacts {
    pub entries: Vec<RetrievedFact>,
}

impl RetrievedFacts {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn fact_ids(&self) -> impl Iterator<Item = FactId> + '_ {
        self.entries.iter().map(|e| e.fact_id)
    }
}

/// Lemma sets of one instance, precomputed with the store's lemmatizer.
pub struct InstanceLemmas {
    candidate: HashSet<String>,
    question: HashSet<String>,
    document: HashSet<String>,
}

impl InstanceLemmas {
    pub fn compute(instance: &ClozeInstance, lemmatizer: Lemmatizer) -> Self {
        let set = |tokens: &[String]| tokens.iter().map(|t| lemmatizer(t)).collect();
        InstanceLemmas {
            candidate: instance
                .candidates
                .iter()
                .flat_map(|c| c.split_whitespace())
                .map(lemmatizer)
                .collect(),
            question: set(&instance.question_tokens),
            document: set(&instance.document_tokens),
        }
    }
}

/// Weight of one fact argument: the maximum applicable tier, or 0 when no
/// token lemma occurs in the instance at all.
pub fn node_weight(
    phrase_tokens: &[String],
    lemmas: &InstanceLemmas,
    weights: &NodeWeights,
    lemmatizer: Lemmatizer,
) -> u32 {
    let mut best = 0;
    for tok in phrase_tokens {
        let lemma = lemmatizer(tok);
        let tier = if lemmas.candidate.contains(&lemma) {
            weights.answer
        } else if lemmas.question.contains(&lemma) {
            weights.question
        } else if lemmas.document.contains(&lemma) {
            weights.document
        } else {
            0
        };
        best = best.max(tier);
    }
    best
}

/// Fact weight: the sum of its subject and object argument weights.
pub fn score_fact(
    fact_id: FactId,
    store: &FactStore,
    lemmas: &InstanceLemmas,
    weights: &NodeWeights,
) -> u32 {
    let triple = store.triple(fact_id);
    let lem = store.lemmatizer();
    node_weight(&triple.subject_tokens, lemmas, weights, lem)
        + node_weight(&triple.object_tokens, lemmas, weights, lem)
}

/// Select up to budget facts: for each candidate in instance order, gather
/// facts containing one of its token lemmas, sort by weight descending with
/// store-ordinal tie-breaks, and take up to the per-candidate cap, skipping
/// facts already claimed by an earlier candidate.
pub fn retrieve_facts(
    instance: &ClozeInstance,
    store: &FactStore,
    cfg: &RetrievalConfig,
) -> Result<RetrievedFacts, RetrievalError> {
    let cap = cfg.per_candidate_cap(instance.candidates.len())?;
    let lemmatizer = store.lemmatizer();
    let lemmas = InstanceLemmas::compute(instance, lemmatizer);

    let mut claimed: HashSet<FactId> = HashSet::new();
    let mut entries = Vec::new();
    for (ci, candidate) in instance.candidates.iter().enumerate() {
        // Union over the candidate's token lemmas; BTreeSet keeps ordinal
        // (= id) order.
        let mut ids: BTreeSet<FactId> = BTreeSet::new();
        for tok in candidate.split_whitespace() {
            ids.extend(store.facts_containing(&lemmatizer(tok)));
        }
        let mut scored: Vec<(FactId, u32)> = ids
            .into_iter()
            .map(|id| (id, score_fact(id, store, &lemmas, &cfg.weights)))
            .collect();
        // Stable: equal weights stay in ordinal order.
        scored.sort_by_key(|&(_, w)| std::cmp::Reverse(w));

        let mut taken = 0;
        for (fact_id, weight) in scored {
            if taken == cap {
                break;
            }
            if !claimed.insert(fact_id) {
                continue;
            }
            entries.push(RetrievedFact {
                fact_id,
                weight,
                candidate_index: ci,
            });
            taken += 1;
        }
    }
    Ok(RetrievedFacts { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::default_lemmatizer;

    fn instance() -> ClozeInstance {
        let candidates: Vec<String> = [
            "head", "bird", "animal", "winter", "song", "tree", "cat", "dog", "fox", "hen",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let mut document_tokens: Vec<String> = "the bird sang in the cold garden all day long"
            .split_whitespace()
            .map(String::from)
            .collect();
        document_tokens.extend(candidates.iter().cloned());
        ClozeInstance {
            instance_id: "0".into(),
            document_tokens,
            question_tokens: "what has a bird in spite of all his singing xxxxx"
                .split_whitespace()
                .map(String::from)
                .collect(),
            placeholder_index: 10,
            candidates,
            gold_answer: "head".into(),
        }
    }

    fn store(lines: &str) -> FactStore {
        FactStore::ingest(lines.as_bytes(), default_lemmatizer).unwrap()
    }

    #[test]
    fn node_weight_tiers() {
        let inst = instance();
        let lemmas = InstanceLemmas::compute(&inst, default_lemmatizer);
        let w = NodeWeights::default();
        let phrase = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
        // Candidate match wins the top tier.
        assert_eq!(node_weight(&phrase("head"), &lemmas, &w, default_lemmatizer), 4);
        // Nothing in the instance.
        assert_eq!(node_weight(&phrase("apples"), &lemmas, &w, default_lemmatizer), 0);
        // Question-plus-document word takes the question tier. "garden" is
        // document-only; "spite" question-only; "cold" document-only.
        assert_eq!(node_weight(&phrase("spite"), &lemmas, &w, default_lemmatizer), 3);
        assert_eq!(node_weight(&phrase("garden"), &lemmas, &w, default_lemmatizer), 2);
        // "sang" occurs in both question ("singing" does not lemmatize to
        // sang) and document; document tier applies.
        assert_eq!(node_weight(&phrase("cold garden"), &lemmas, &w, default_lemmatizer), 2);
        // A phrase in question and document takes the maximum tier (3).
        assert_eq!(node_weight(&phrase("all"), &lemmas, &w, default_lemmatizer), 3);
    }

    #[test]
    fn score_is_sum_of_argument_weights() {
        let inst = instance();
        let lemmas = InstanceLemmas::compute(&inst, default_lemmatizer);
        let st = store(
            "head\t/r/PartOf\tspite\tomcs\n\
             garden\t/r/RelatedTo\tcold\tomcs\n\
             nothing\t/r/IsA\tnowhere\tomcs\n",
        );
        let w = NodeWeights::default();
        // A (4) + Q (3) = 7.
        assert_eq!(score_fact(0, &st, &lemmas, &w), 7);
        // D (2) + D (2) = 4.
        assert_eq!(score_fact(1, &st, &lemmas, &w), 4);
        // No match at all.
        assert_eq!(score_fact(2, &st, &lemmas, &w), 0);
    }

    #[test]
    fn empty_store_retrieves_nothing() {
        let st = store("");
        let got = retrieve_facts(&instance(), &st, &RetrievalConfig::new(50)).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn abundant_facts_fill_exact_quota() {
        let inst = instance();
        let mut lines = String::new();
        for cand in &inst.candidates {
            for i in 0..5 {
                lines.push_str(&format!("{cand}\t/r/HasProperty\tthing{i}\tomcs\n"));
            }
        }
        let st = store(&lines);
        let got = retrieve_facts(&inst, &st, &RetrievalConfig::new(20)).unwrap();
        assert_eq!(got.len(), 20);
        for ci in 0..10 {
            let n = got.entries.iter().filter(|e| e.candidate_index == ci).count();
            assert_eq!(n, 2, "candidate {ci}");
        }
    }

    #[test]
    fn fact_naming_two_candidates_is_owned_by_the_earlier_one() {
        let inst = instance();
        // Mentions candidates a2 ("animal") and a4 ("song").
        let st = store("animal\t/r/RelatedTo\tsong\tomcs\n");
        let got = retrieve_facts(&inst, &st, &RetrievalConfig::new(50)).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got.entries[0].candidate_index, 2);
        // Appears exactly once in the whole result.
        assert_eq!(got.fact_ids().count(), 1);
    }

    #[test]
    fn ties_resolve_by_store_ordinal() {
        let inst = instance();
        let st = store(
            "head\t/r/RelatedTo\tzzz\tomcs\n\
             head\t/r/RelatedTo\tyyy\tomcs\n\
             head\t/r/RelatedTo\txxx\tomcs\n",
        );
        // All three facts score 4 + 0; cap of 2 keeps the two earliest.
        let got = retrieve_facts(&inst, &st, &RetrievalConfig::new(20)).unwrap();
        let head_facts: Vec<FactId> = got
            .entries
            .iter()
            .filter(|e| e.candidate_index == 0)
            .map(|e| e.fact_id)
            .collect();
        assert_eq!(head_facts, vec![0, 1]);
    }

    #[test]
    fn per_candidate_slices_are_weight_sorted() {
        let inst = instance();
        let st = store(
            "head\t/r/RelatedTo\tnothinghere\tomcs\n\
             head\t/r/PartOf\tbird\tomcs\n\
             head\t/r/AtLocation\tgarden\tomcs\n",
        );
        let got = retrieve_facts(&inst, &st, &RetrievalConfig::new(50)).unwrap();
        let head: Vec<(FactId, u32)> = got
            .entries
            .iter()
            .filter(|e| e.candidate_index == 0)
            .map(|e| (e.fact_id, e.weight))
            .collect();
        // 4+4=8 first, then 4+2=6, then 4+0=4.
        assert_eq!(head, vec![(1, 8), (2, 6), (0, 4)]);
    }

    #[test]
    fn budget_must_divide_by_candidate_count() {
        let st = store("");
        let err = retrieve_facts(&instance(), &st, &RetrievalConfig::new(55)).unwrap_err();
        assert!(matches!(err, RetrievalError::BudgetNotDivisible { .. }));
    }

    #[test]
    fn determinism_byte_for_byte() {
        let inst = instance();
        let st = store(
            "head\t/r/PartOf\tbird\tomcs\n\
             ear\t/r/PartOf\thead\tomcs\n\
             bird\t/r/CapableOf\tsinging songs\tomcs\n",
        );
        let a = retrieve_facts(&inst, &st, &RetrievalConfig::new(50)).unwrap();
        let b = retrieve_facts(&inst, &st, &RetrievalConfig::new(50)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
