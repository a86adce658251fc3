//! The reader's forward pass: shared-context encoding of document and
//! question, a placeholder-pickup query, chained fact encoding into a
//! key-value memory, per-token enrichment, and the four-way ensemble
//! attention sum over candidate occurrences.

use super::config::{KvStrategy, ModelConfig};
use super::params::ParamIds;
use super::trace::{argmax, AttentionTrace, TokenFactAttention};
use super::ModelError;
use crate::data::{EncodedInstance, Vocabulary};
use crate::knowledge::{FactId, FactStore};
use crate::retrieval::RetrievedFacts;
use crate::tensor::{bigru, BiGruParamIds, Graph, NodeId, Real, Tensor, TensorError};
use rand_chacha::ChaCha8Rng;

/// A retrieved fact resolved to vocabulary ids, ready for memory encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFact {
    pub fact_id: FactId,
    pub candidate_index: usize,
    pub weight: u32,
    pub subject_ids: Vec<u32>,
    pub relation_id: u32,
    pub object_ids: Vec<u32>,
    pub text: String,
}

/// Resolve retrieval output against the store and vocabulary. Fails when a
/// fact word is missing from the vocabulary (the store the vocabulary was
/// built with always resolves).
pub fn resolve_facts(
    retrieved: &RetrievedFacts,
    store: &FactStore,
    vocab: &Vocabulary,
) -> Result<Vec<EncodedFact>, ModelError> {
    let id_of = |token: &str| {
        vocab
            .id_of(token)
            .ok_or_else(|| ModelError::FactTokenUnresolvable {
                token: token.to_string(),
            })
    };
    retrieved
        .entries
        .iter()
        .map(|e| {
            let t = store.triple(e.fact_id);
            Ok(EncodedFact {
                fact_id: e.fact_id,
                candidate_index: e.candidate_index,
                weight: e.weight,
                subject_ids: t
                    .subject_tokens
                    .iter()
                    .map(|tok| id_of(tok))
                    .collect::<Result<_, _>>()?,
                relation_id: id_of(&t.relation)?,
                object_ids: t
                    .object_tokens
                    .iter()
                    .map(|tok| id_of(tok))
                    .collect::<Result<_, _>>()?,
                text: t.text(),
            })
        })
        .collect()
}

/// Per-instance key-value memory: row-aligned key and value matrices.
pub struct FactMemory {
    pub keys: NodeId,
    pub values: NodeId,
    pub fact_ids: Vec<FactId>,
}

/// Attend over memory keys with a dot product, softmax the scores, and
/// return the attention-weighted sum of values together with the attention
/// node.
pub fn query_memory<T: Real>(
    g: &mut Graph<T>,
    memory: &FactMemory,
    token: NodeId,
) -> Result<(NodeId, NodeId), TensorError> {
    let scores = g.matvec(memory.keys, token)?;
    let att = g.softmax(scores, None)?;
    let out = g.matvec_t(memory.values, att)?;
    Ok((out, att))
}

pub struct ForwardOutput {
    /// Distribution over the instance's candidates.
    pub probabilities: Vec<f64>,
    /// Argmax with ties resolved toward the lowest candidate index.
    pub predicted_index: usize,
    /// Scalar training loss node (fused log-softmax cross entropy).
    pub loss: NodeId,
    pub trace: AttentionTrace,
}

/// Run the model over one instance. `dropout_rng` being present marks
/// training mode; evaluation passes `None` and dropout is the identity.
pub fn forward<T: Real>(
    g: &mut Graph<T>,
    pids: &ParamIds,
    instance: &EncodedInstance,
    facts: &[EncodedFact],
    cfg: &ModelConfig,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<ForwardOutput, ModelError> {
    if instance.document_ids.is_empty() {
        return Err(ModelError::EmptyDocument);
    }
    if instance.question_ids.is_empty() {
        return Err(ModelError::EmptyQuestion);
    }
    if instance.placeholder_index >= instance.question_ids.len() {
        return Err(ModelError::PlaceholderOutOfRange {
            index: instance.placeholder_index,
            len: instance.question_ids.len(),
        });
    }

    let mut rng = dropout_rng;
    let hidden = {
        // Hidden width comes from the registered context parameters.
        let b_z = g.value(pids.ctx.fwd.b_z).shape().to_vec();
        b_z[0]
    };
    let zero_h = g.input(Tensor::zeros(vec![hidden]));
    let zero_2h = g.input(Tensor::zeros(vec![2 * hidden]));

    // Embedding lookup with dropout at the layer output, shared by every
    // token sequence in the pass.
    let mut embed_seq = |g: &mut Graph<T>, ids: &[u32]| -> Result<Vec<NodeId>, ModelError> {
        let idx: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let mut mat = g.gather_rows(pids.embeddings, &idx)?;
        if let Some(r) = rng.as_deref_mut() {
            mat = g.dropout(mat, cfg.dropout_keep, true, r)?;
        }
        let rows: Result<Vec<NodeId>, TensorError> =
            (0..idx.len()).map(|t| g.pickup(mat, t)).collect();
        Ok(rows?)
    };

    // Context encoding, one shared encoder for document and question.
    let doc_rows = embed_seq(g, &instance.document_ids)?;
    let doc_enc = bigru(g, &pids.ctx, &doc_rows, zero_h, zero_h)?;
    let q_rows = embed_seq(g, &instance.question_ids)?;
    let q_enc = bigru(g, &pids.ctx, &q_rows, zero_h, zero_h)?;

    // Per-instance fact memory.
    let memory = if cfg.knowledge_enabled && !facts.is_empty() {
        encode_fact_memory_inner(g, &pids.fact, facts, cfg.kv_strategy, hidden, &mut embed_seq)?
    } else {
        None
    };

    // Query: the placeholder token's encoding.
    let r_ctx = q_enc.steps[instance.placeholder_index];
    let gamma = T::from_f64_lossy(cfg.gamma);

    let attend = |g: &mut Graph<T>,
                  token: NodeId|
     -> Result<(NodeId, Option<Vec<f64>>), ModelError> {
        match &memory {
            Some(m) => {
                let (out, att) = query_memory(g, m, token)?;
                Ok((out, Some(g.value(att).to_f64_vec())))
            }
            None => Ok((zero_2h, None)),
        }
    };

    let (q_comb, query_fact_attention) = if cfg.knowledge_enabled {
        let (q_kn, att) = attend(g, r_ctx)?;
        (Some(g.combine(r_ctx, q_kn, gamma)?), att)
    } else {
        (None, None)
    };

    // Ensemble attention over candidate occurrences.
    let n_cand = instance.candidate_ids.len();
    let mut cand_sum_nodes = Vec::with_capacity(n_cand);
    let mut interaction_sums: [Option<Vec<f64>>; 4] = if cfg.knowledge_enabled {
        std::array::from_fn(|_| Some(Vec::with_capacity(n_cand)))
    } else {
        [Some(Vec::with_capacity(n_cand)), None, None, None]
    };
    let mut token_fact_attention = Vec::new();

    for (ci, occs) in instance.candidate_occurrences.iter().enumerate() {
        if occs.is_empty() {
            return Err(ModelError::CandidateWithoutOccurrence { candidate_index: ci });
        }
        let mut alpha_nodes = Vec::with_capacity(occs.len());
        let mut term_values: [f64; 4] = [0.0; 4];
        for &j in occs {
            if j >= doc_enc.steps.len() {
                return Err(ModelError::OccurrenceOutOfRange {
                    position: j,
                    len: doc_enc.steps.len(),
                });
            }
            let d_ctx = doc_enc.steps[j];
            let t_ctx_ctx = g.dot(r_ctx, d_ctx)?;
            term_values[0] += g.value(t_ctx_ctx).item().to_f64().unwrap();

            if cfg.knowledge_enabled {
                let (d_kn, d_att) = attend(g, d_ctx)?;
                let d_comb = g.combine(d_ctx, d_kn, gamma)?;
                let q_c = q_comb.expect("enriched query exists when knowledge is on");
                let t_ctx_kn = g.dot(r_ctx, d_comb)?;
                let t_kn_ctx = g.dot(q_c, d_ctx)?;
                let t_kn_kn = g.dot(q_c, d_comb)?;
                let terms = [t_ctx_ctx, t_ctx_kn, t_kn_ctx, t_kn_kn];
                for t in 1..4 {
                    term_values[t] += g.value(terms[t]).item().to_f64().unwrap();
                }
                if let Some(att) = d_att {
                    token_fact_attention.push(TokenFactAttention {
                        candidate_index: ci,
                        document_position: j,
                        attention: att,
                    });
                }
                let mut weighted = Vec::with_capacity(cfg.interactions.count());
                for inter in cfg.interactions.iter() {
                    let t = inter.weight_index();
                    weighted.push(g.mul(pids.ensemble[t], terms[t])?);
                }
                alpha_nodes.push(g.add_n(&weighted)?);
            } else {
                // Text-only baseline: the raw dot is the attention score.
                alpha_nodes.push(t_ctx_ctx);
            }
        }
        cand_sum_nodes.push(g.add_n(&alpha_nodes)?);
        for t in 0..4 {
            if let Some(sums) = interaction_sums[t].as_mut() {
                sums.push(term_values[t]);
            }
        }
    }

    let logits = g.concat(&cand_sum_nodes)?;
    let probs_node = g.softmax(logits, None)?;
    let loss = g.log_softmax_xent(logits, instance.gold_index)?;

    let probabilities = g.value(probs_node).to_f64_vec();
    let predicted_index = argmax(&probabilities);
    let ensemble_scores = g.value(logits).to_f64_vec();
    let ensemble_weights =
        std::array::from_fn(|i| g.value(pids.ensemble[i]).item().to_f64().unwrap());

    let trace = AttentionTrace {
        instance_id: instance.instance_id.clone(),
        question_tokens: Vec::new(),
        candidates: Vec::new(),
        placeholder_index: instance.placeholder_index,
        gold_index: instance.gold_index,
        predicted_index,
        probabilities: probabilities.clone(),
        ensemble_scores,
        interaction_sums,
        ensemble_weights,
        fact_texts: if cfg.knowledge_enabled {
            facts.iter().map(|f| f.text.clone()).collect()
        } else {
            Vec::new()
        },
        query_fact_attention,
        token_fact_attention,
    };

    Ok(ForwardOutput {
        probabilities,
        predicted_index,
        loss,
        trace,
    })
}

/// Encode facts into the key-value memory: run the fact encoder over the
/// subject from zero state, chain its final states into the single relation
/// token, chain again into the object; the value is the object state, the
/// key is the subject state or the object state depending on strategy.
pub fn encode_fact_memory<T: Real>(
    g: &mut Graph<T>,
    fact_encoder: &BiGruParamIds,
    embeddings: NodeId,
    facts: &[EncodedFact],
    strategy: KvStrategy,
    hidden: usize,
) -> Result<Option<FactMemory>, ModelError> {
    let mut embed = |g: &mut Graph<T>, ids: &[u32]| -> Result<Vec<NodeId>, ModelError> {
        let idx: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let mat = g.gather_rows(embeddings, &idx)?;
        let rows: Result<Vec<NodeId>, TensorError> =
            (0..idx.len()).map(|t| g.pickup(mat, t)).collect();
        Ok(rows?)
    };
    encode_fact_memory_inner(g, fact_encoder, facts, strategy, hidden, &mut embed)
}

fn encode_fact_memory_inner<T: Real>(
    g: &mut Graph<T>,
    fact_encoder: &BiGruParamIds,
    facts: &[EncodedFact],
    strategy: KvStrategy,
    hidden: usize,
    embed_seq: &mut dyn FnMut(&mut Graph<T>, &[u32]) -> Result<Vec<NodeId>, ModelError>,
) -> Result<Option<FactMemory>, ModelError> {
    if facts.is_empty() {
        return Ok(None);
    }
    let zero_h = g.input(Tensor::zeros(vec![hidden]));
    let mut keys = Vec::with_capacity(facts.len());
    let mut values = Vec::with_capacity(facts.len());
    for f in facts {
        if f.subject_ids.is_empty() || f.object_ids.is_empty() {
            return Err(ModelError::EmptyFactArgument { fact_id: f.fact_id });
        }
        let subj_rows = embed_seq(g, &f.subject_ids)?;
        let s = bigru(g, fact_encoder, &subj_rows, zero_h, zero_h)?;
        let rel_rows = embed_seq(g, &[f.relation_id])?;
        let r = bigru(g, fact_encoder, &rel_rows, s.final_fwd, s.final_bwd)?;
        let obj_rows = embed_seq(g, &f.object_ids)?;
        let o = bigru(g, fact_encoder, &obj_rows, r.final_fwd, r.final_bwd)?;
        let f_subj = g.concat2(s.final_fwd, s.final_bwd)?;
        let f_obj = g.concat2(o.final_fwd, o.final_bwd)?;
        keys.push(match strategy {
            KvStrategy::SubjObj => f_subj,
            KvStrategy::ObjObj => f_obj,
        });
        values.push(f_obj);
    }
    Ok(Some(FactMemory {
        keys: g.stack_rows(&keys)?,
        values: g.stack_rows(&values)?,
        fact_ids: facts.iter().map(|f| f.fact_id).collect(),
    }))
}
