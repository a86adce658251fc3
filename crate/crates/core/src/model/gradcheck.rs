//! End-to-end gradient verification: central finite differences against the
//! reverse-mode gradients of the full forward pass on a toy fixture, run in
//! f64 and reported per parameter group.

use super::config::{KvStrategy, ModelConfig};
use super::forward::{forward, EncodedFact};
use super::params::ModelParams;
use crate::data::EncodedInstance;
use crate::tensor::Graph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;
/// Relative-error denominator floor. Central differences at step 1e-5 on an
/// O(1) loss carry ~1e-10 of noise, so gradients below this scale cannot be
/// certified to a tighter relative error.
const DENOM_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub hidden_size: usize,
    pub embed_dim: usize,
    pub seed: u64,
    pub kv_strategy: KvStrategy,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            hidden_size: 4,
            embed_dim: 8,
            seed: 12345,
            kv_strategy: KvStrategy::SubjObj,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub group: String,
    pub parameters: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
    pub max_rel_err: f64,
    pub passed: bool,
}

const TOY_VOCAB: usize = 24;

fn toy_instance() -> EncodedInstance {
    // Ids 4..14 are the candidates, each with one occurrence; a couple of
    // filler ids pad the story. Everything stays below TOY_VOCAB.
    let document_ids: Vec<u32> = vec![1, 4, 5, 2, 6, 7, 8, 3, 9, 10, 11, 12, 13, 1, 4];
    let candidate_ids: Vec<u32> = (4..14).collect();
    let candidate_occurrences = candidate_ids
        .iter()
        .map(|cid| {
            document_ids
                .iter()
                .enumerate()
                .filter(|(_, d)| *d == cid)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    EncodedInstance {
        instance_id: "gradcheck".into(),
        document_ids,
        question_ids: vec![2, 15, 1, 6],
        placeholder_index: 1,
        candidate_ids,
        candidate_occurrences,
        gold_index: 3,
        unk_assignment: HashMap::new(),
    }
}

fn toy_facts() -> Vec<EncodedFact> {
    vec![
        EncodedFact {
            fact_id: 0,
            candidate_index: 0,
            weight: 7,
            subject_ids: vec![15, 16],
            relation_id: 17,
            object_ids: vec![7],
            text: "fact-0".into(),
        },
        EncodedFact {
            fact_id: 1,
            candidate_index: 2,
            weight: 4,
            subject_ids: vec![18],
            relation_id: 17,
            object_ids: vec![6, 19],
            text: "fact-1".into(),
        },
    ]
}

/// Loss of the full forward pass for a given parameter setting. Dropout is
/// disabled so the function is deterministic.
fn loss_for(params: &ModelParams<f64>, cfg: &ModelConfig) -> f64 {
    let mut g = Graph::new();
    let pids = params.register(&mut g);
    let out = forward(&mut g, &pids, &toy_instance(), &toy_facts(), cfg, None)
        .expect("toy forward");
    g.value(out.loss).item()
}

/// Check every parameter group of the toy model against central finite
/// differences. Runtime is dominated by two forward passes per scalar
/// parameter.
pub fn gradcheck_toy(check: &GradCheckConfig) -> GradCheckReport {
    let cfg = ModelConfig {
        hidden_size: check.hidden_size,
        embed_dim: check.embed_dim,
        dropout_keep: 1.0,
        kv_strategy: check.kv_strategy,
        ..ModelConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(check.seed);
    let params = ModelParams::<f64>::init(&cfg, TOY_VOCAB, None, &mut rng).unwrap();

    // Analytic gradients from one reverse pass.
    let mut g = Graph::new();
    let pids = params.register(&mut g);
    let out = forward(&mut g, &pids, &toy_instance(), &toy_facts(), &cfg, None)
        .expect("toy forward");
    g.backward(out.loss).expect("backward");
    let analytic = pids.gradients(&g);

    let names: Vec<String> = params
        .named_tensors()
        .iter()
        .map(|(n, _)| n.clone())
        .collect();
    let mut group_errs: Vec<(String, usize, f64)> = Vec::new();

    let mut probe = params.clone();
    for (ti, name) in names.iter().enumerate() {
        let group = ModelParams::<f64>::group_of(name).to_string();
        let numel = analytic[ti].numel();
        let mut worst = 0.0f64;
        for k in 0..numel {
            let orig = probe.tensors_mut()[ti].data()[k];
            probe.tensors_mut()[ti].data_mut()[k] = orig + FD_STEP;
            let plus = loss_for(&probe, &cfg);
            probe.tensors_mut()[ti].data_mut()[k] = orig - FD_STEP;
            let minus = loss_for(&probe, &cfg);
            probe.tensors_mut()[ti].data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = analytic[ti].data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOM_FLOOR);
            worst = worst.max(rel);
        }
        match group_errs.iter_mut().find(|(gname, _, _)| *gname == group) {
            Some(entry) => {
                entry.1 += numel;
                entry.2 = entry.2.max(worst);
            }
            None => group_errs.push((group, numel, worst)),
        }
    }

    let groups: Vec<GroupReport> = group_errs
        .into_iter()
        .map(|(group, parameters, max_rel_err)| GroupReport {
            group,
            parameters,
            max_rel_err,
        })
        .collect();
    let max_rel_err = groups.iter().map(|g| g.max_rel_err).fold(0.0, f64::max);
    GradCheckReport {
        passed: max_rel_err < GRADCHECK_TOLERANCE,
        groups,
        max_rel_err,
    }
}
