//! Synthetic knowledge-necessity dataset: stories of filler tokens plus 10
//! candidates, and questions whose answer is determined solely by a planted
//! (question-cue, relation, answer) triple.
//!
//! Each instance gets its own cue token, so the cue-to-answer binding is
//! never learnable from the training split: a text-only model faces unseen
//! cue embeddings at test time and stays near chance, while the memory path
//! can resolve the binding by attending to the planted fact. A base fact
//! per pool candidate guarantees every candidate retrieves something.

use super::harness::TrainConfig;
use crate::data::{parse_cbt_str, ClozeInstance, ParseConfig};
use crate::model::{InteractionSet, KvStrategy, ModelConfig};
use crate::retrieval::RetrievalConfig;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SYNTH_RELATION: &str = "/r/signals";

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    /// Distinct candidate tokens shared across instances.
    pub candidate_pool: usize,
    /// Distinct filler tokens for story padding.
    pub filler_pool: usize,
    /// Width of the generated stand-in pretrained embeddings.
    pub embed_dim: usize,
    /// Component range of the generated embeddings. Unit-scale rows give
    /// the dot-product attention usable contrast from the start, like real
    /// pretrained vectors do.
    pub embed_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_train: 500,
            n_dev: 100,
            n_test: 100,
            candidate_pool: 30,
            filler_pool: 20,
            embed_dim: 16,
            embed_scale: 2.0,
            seed: 71,
        }
    }
}

/// CBT-format text for the three splits, the triple file, and a pretrained
/// embedding file covering every generated word.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: String,
    pub dev: String,
    pub test: String,
    pub kb: String,
    pub embeddings: String,
}

/// The training recipe the knowledge-necessity experiment is pinned to:
/// frozen stand-in embeddings, one fact per candidate, object-keyed memory.
pub fn knowledge_necessity_train_config() -> TrainConfig {
    TrainConfig {
        epochs: 50,
        batch_size: 5,
        eval_every: 500,
        embed_train_steps: 0,
        learning_rate: 0.01,
        seed: 7,
        min_count: 1,
        deterministic: true,
        retrieval: RetrievalConfig::new(10),
        model: ModelConfig {
            hidden_size: 32,
            embed_dim: 16,
            gamma: 0.5,
            kv_strategy: KvStrategy::ObjObj,
            interactions: InteractionSet::full(),
            dropout_keep: 0.8,
            knowledge_enabled: true,
        },
    }
}

impl SynthData {
    pub fn parse_split(&self, split: &str) -> Vec<ClozeInstance> {
        let text = match split {
            "train" => &self.train,
            "dev" => &self.dev,
            "test" => &self.test,
            other => panic!("unknown split {other}"),
        };
        parse_cbt_str(text, &ParseConfig::default()).expect("generated text parses")
    }
}

pub fn generate_synthetic(cfg: &SynthConfig) -> SynthData {
    assert!(
        cfg.candidate_pool >= 10,
        "need at least 10 candidates in the pool"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let candidates: Vec<String> = (0..cfg.candidate_pool).map(|i| format!("cand{i:02}")).collect();
    let fillers: Vec<String> = (0..cfg.filler_pool).map(|i| format!("filler{i:02}")).collect();

    // Base facts first: every pool candidate is retrievable even when no
    // instance planted a fact for it. Their subjects never occur in any
    // story or question.
    let mut kb = String::new();
    for (i, cand) in candidates.iter().enumerate() {
        kb.push_str(&format!("base{i:02}\t{SYNTH_RELATION}\t{cand}\tsynth\n"));
    }

    let total = cfg.n_train + cfg.n_dev + cfg.n_test;
    let mut blocks: Vec<String> = Vec::with_capacity(total);
    for k in 0..total {
        let cue = format!("cue{k:04}");
        // 10 distinct candidates, random order; gold uniform among them.
        let mut pool: Vec<usize> = (0..cfg.candidate_pool).collect();
        pool.shuffle(&mut rng);
        let chosen: Vec<&String> = pool[..10].iter().map(|&i| &candidates[i]).collect();
        let gold = chosen[rng.random_range(0..10)].clone();
        kb.push_str(&format!("{cue}\t{SYNTH_RELATION}\t{gold}\tsynth\n"));

        // 20 single-token story lines: the 10 candidates once each,
        // interleaved with filler lines, in random line order.
        let mut lines: Vec<String> = chosen.iter().map(|c| (*c).clone()).collect();
        for _ in 0..10 {
            let f = &fillers[rng.random_range(0..cfg.filler_pool)];
            lines.push(f.clone());
        }
        lines.shuffle(&mut rng);

        let mut block = String::new();
        for (ln, text) in lines.iter().enumerate() {
            block.push_str(&format!("{} {text}\n", ln + 1));
        }
        let cand_list: Vec<String> = chosen.iter().map(|c| (*c).clone()).collect();
        block.push_str(&format!(
            "21 {cue} XXXXX .\t{gold}\t{}\n",
            cand_list.join("|")
        ));
        blocks.push(block);
    }

    // Stand-in pretrained embeddings for every word the generator emits.
    let mut erng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut embeddings = String::new();
    let mut emit = |word: &str, erng: &mut ChaCha8Rng, out: &mut String| {
        let vals: Vec<String> = (0..cfg.embed_dim)
            .map(|_| format!("{:.6}", erng.random_range(-cfg.embed_scale..cfg.embed_scale)))
            .collect();
        out.push_str(&format!("{word} {}\n", vals.join(" ")));
    };
    for w in candidates.iter().chain(&fillers) {
        emit(w, &mut erng, &mut embeddings);
    }
    for i in 0..cfg.candidate_pool {
        emit(&format!("base{i:02}"), &mut erng, &mut embeddings);
    }
    for k in 0..total {
        emit(&format!("cue{k:04}"), &mut erng, &mut embeddings);
    }
    emit(SYNTH_RELATION, &mut erng, &mut embeddings);
    emit(".", &mut erng, &mut embeddings);
    emit("xxxxx", &mut erng, &mut embeddings);

    let join = |slice: &[String]| slice.join("\n");
    SynthData {
        train: join(&blocks[..cfg.n_train]),
        dev: join(&blocks[cfg.n_train..cfg.n_train + cfg.n_dev]),
        test: join(&blocks[cfg.n_train + cfg.n_dev..]),
        kb,
        embeddings,
    }
}
