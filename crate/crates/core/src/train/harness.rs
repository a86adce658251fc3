//! The training loop: length-sorted shuffled batches, clipped Adam steps, an
//! embedding-finetune horizon, periodic dev evaluation with checkpointing,
//! and dev-based model selection.

use super::eval::{evaluate, Prediction};
use super::TrainError;
use crate::data::{
    batch_instances, encode_instance, shuffle_batches, ClozeInstance, EmbeddingMatrix,
    EncodedInstance, Vocabulary,
};
use crate::knowledge::FactStore;
use crate::model::{
    forward, resolve_facts, AttentionTrace, EncodedFact, ModelConfig, ModelParams,
};
use crate::retrieval::{retrieve_facts, RetrievalConfig, RetrievedFacts};
use crate::tensor::{clip_then_adam_step, Graph, OptimizerState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Evaluate on dev (and checkpoint) every this many optimizer steps.
    pub eval_every: usize,
    /// Embeddings receive updates only during the first this many steps.
    pub embed_train_steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub min_count: usize,
    /// Recorded in manifests; execution is sequential either way, so a
    /// fixed seed always reproduces runs bit for bit.
    pub deterministic: bool,
    pub retrieval: RetrievalConfig,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            eval_every: 1000,
            embed_train_steps: 8000,
            learning_rate: 0.001,
            seed: 13,
            min_count: 5,
            deterministic: true,
            retrieval: RetrievalConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(TrainError::Config(
                "batch_size and eval_every must be positive".into(),
            ));
        }
        if self.min_count == 0 {
            return Err(TrainError::Config("min_count must be at least 1".into()));
        }
        self.model.validate().map_err(TrainError::Config)?;
        Ok(())
    }

    /// Derived stream seeds, so the independent random decisions (parameter
    /// init, unk assignment, batch order, dropout) never share a stream.
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9e37_79b9).wrapping_add(stream))
    }
}

/// Instances encoded against one vocabulary with their retrieved facts.
pub struct PreparedDataset {
    pub raw: Vec<ClozeInstance>,
    pub encoded: Vec<EncodedInstance>,
    /// Aligned with `encoded`; empty per-instance lists when retrieval is
    /// disabled or nothing matched.
    pub facts: Vec<Vec<EncodedFact>>,
}

impl PreparedDataset {
    pub fn len(&self) -> usize {
        self.encoded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoded.is_empty()
    }
}

/// Retrieve facts for every instance.
pub fn retrieve_all(
    instances: &[ClozeInstance],
    store: &FactStore,
    cfg: &RetrievalConfig,
) -> Result<Vec<RetrievedFacts>, TrainError> {
    instances
        .iter()
        .map(|inst| retrieve_facts(inst, store, cfg).map_err(TrainError::from))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    instance_id: String,
    retrieved: RetrievedFacts,
}

/// Disk-cached retrieval: loads the JSONL cache when it covers the dataset,
/// otherwise recomputes and rewrites it. Retrieval is deterministic, so the
/// cache key (path) only needs to distinguish dataset, variant and budget.
pub fn retrieve_with_cache(
    instances: &[ClozeInstance],
    store: &FactStore,
    cfg: &RetrievalConfig,
    cache_path: &Path,
) -> Result<Vec<RetrievedFacts>, TrainError> {
    if cache_path.exists() {
        let reader = BufReader::new(std::fs::File::open(cache_path)?);
        let mut records: Vec<CacheRecord> = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(std::io::Error::from)?);
        }
        if records.len() == instances.len()
            && records
                .iter()
                .zip(instances)
                .all(|(r, i)| r.instance_id == i.instance_id)
        {
            return Ok(records.into_iter().map(|r| r.retrieved).collect());
        }
    }
    let retrieved = retrieve_all(instances, store, cfg)?;
    if let Some(dir) = cache_path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(cache_path)?;
    for (inst, r) in instances.iter().zip(&retrieved) {
        let record = CacheRecord {
            instance_id: inst.instance_id.clone(),
            retrieved: r.clone(),
        };
        serde_json::to_writer(&mut f, &record).map_err(std::io::Error::from)?;
        writeln!(f)?;
    }
    Ok(retrieved)
}

/// Encode instances and resolve their retrieved facts. The unk-assignment
/// source is seeded from the config so preparation is reproducible.
pub fn prepare_dataset(
    instances: Vec<ClozeInstance>,
    vocab: &Vocabulary,
    store: &FactStore,
    cfg: &TrainConfig,
    cache_path: Option<&Path>,
) -> Result<PreparedDataset, TrainError> {
    let retrieved = if cfg.model.knowledge_enabled {
        match cache_path {
            Some(p) => retrieve_with_cache(&instances, store, &cfg.retrieval, p)?,
            None => retrieve_all(&instances, store, &cfg.retrieval)?,
        }
    } else {
        vec![RetrievedFacts::default(); instances.len()]
    };

    let mut unk_rng = cfg.rng(1);
    let mut encoded = Vec::with_capacity(instances.len());
    let mut facts = Vec::with_capacity(instances.len());
    for (inst, r) in instances.iter().zip(&retrieved) {
        encoded.push(encode_instance(inst, vocab, &mut unk_rng)?);
        facts.push(resolve_facts(r, store, vocab)?);
    }
    Ok(PreparedDataset {
        raw: instances,
        encoded,
        facts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub step: u64,
    pub dev_accuracy: f64,
    /// Mean training loss over the steps since the previous evaluation;
    /// zero for the initial checkpoint.
    pub mean_train_loss: f64,
    pub path: Option<PathBuf>,
}

pub struct RunResult {
    /// Dev trajectory, one record per evaluation.
    pub checkpoints: Vec<CheckpointRecord>,
    /// Index into `checkpoints` of the selected model: maximal dev
    /// accuracy, earliest on ties.
    pub selected: usize,
    /// Parameters of the selected checkpoint.
    pub params: ModelParams<f32>,
    /// Dev predictions of the selected checkpoint.
    pub dev_predictions: Vec<Prediction>,
}

impl RunResult {
    pub fn selected_dev_accuracy(&self) -> f64 {
        self.checkpoints[self.selected].dev_accuracy
    }
}

/// Train with dev-based selection. When `out_dir` is given every evaluated
/// checkpoint is written there as `checkpoint-<step>.ckpt`.
pub fn train(
    train_set: &PreparedDataset,
    dev_set: &PreparedDataset,
    vocab: &Vocabulary,
    pretrained: Option<&EmbeddingMatrix>,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<RunResult, TrainError> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut init_rng = cfg.rng(2);
    let mut params =
        ModelParams::<f32>::init(&cfg.model, vocab.len(), pretrained, &mut init_rng)?;
    let names: Vec<String> = params
        .named_tensors()
        .iter()
        .map(|(n, _)| n.clone())
        .collect();
    let mut optimizer = OptimizerState::new(cfg.learning_rate as f32, &params.shapes());

    let mut dropout_rng = cfg.rng(3);
    let batches = batch_instances(&train_set.encoded, cfg.batch_size);

    let mut checkpoints: Vec<CheckpointRecord> = Vec::new();
    let mut best: Option<(usize, ModelParams<f32>, Vec<Prediction>)> = None;
    let mut loss_acc = 0.0f64;
    let mut loss_count = 0usize;

    let record = |step: u64,
                      params: &ModelParams<f32>,
                      checkpoints: &mut Vec<CheckpointRecord>,
                      best: &mut Option<(usize, ModelParams<f32>, Vec<Prediction>)>,
                      loss_acc: &mut f64,
                      loss_count: &mut usize|
     -> Result<(), TrainError> {
        let (dev_accuracy, dev_predictions) = evaluate(params, &cfg.model, dev_set)?;
        let mean_train_loss = if *loss_count > 0 {
            *loss_acc / *loss_count as f64
        } else {
            0.0
        };
        *loss_acc = 0.0;
        *loss_count = 0;
        let path = match out_dir {
            Some(dir) => {
                let p = dir.join(format!("checkpoint-{step}.ckpt"));
                let mut f = std::fs::File::create(&p)?;
                params.save(&mut f)?;
                Some(p)
            }
            None => None,
        };
        checkpoints.push(CheckpointRecord {
            step,
            dev_accuracy,
            mean_train_loss,
            path,
        });
        let better = match best {
            Some((i, _, _)) => dev_accuracy > checkpoints[*i].dev_accuracy,
            None => true,
        };
        if better {
            *best = Some((checkpoints.len() - 1, params.clone(), dev_predictions));
        }
        Ok(())
    };

    // Initial state counts as a checkpoint so zero-epoch runs still select
    // something.
    record(
        0,
        &params,
        &mut checkpoints,
        &mut best,
        &mut loss_acc,
        &mut loss_count,
    )?;

    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        let mut epoch_batches = batches.clone();
        let mut order_rng = cfg.rng(4 + epoch as u64);
        shuffle_batches(&mut epoch_batches, &mut order_rng);

        for batch in &epoch_batches {
            let mut g = Graph::new();
            let pids = params.register(&mut g);
            let mut losses = Vec::with_capacity(batch.instance_indices.len());
            for &idx in &batch.instance_indices {
                let out = forward(
                    &mut g,
                    &pids,
                    &train_set.encoded[idx],
                    &train_set.facts[idx],
                    &cfg.model,
                    Some(&mut dropout_rng),
                )?;
                losses.push(out.loss);
            }
            let total = g.add_n(&losses)?;
            let mean = g.scale(total, 1.0 / losses.len() as f32);
            g.backward(mean)?;
            loss_acc += g.value(mean).item() as f64;
            loss_count += 1;

            let grads = pids.gradients(&g);
            let embeddings_active = step < cfg.embed_train_steps as u64;
            let active: Vec<bool> = names
                .iter()
                .map(|n| n != "embeddings" || embeddings_active)
                .collect();
            clip_then_adam_step(&mut params.tensors_mut(), &grads, &mut optimizer, &active)?;
            step += 1;

            if step % cfg.eval_every as u64 == 0 {
                record(
                    step,
                    &params,
                    &mut checkpoints,
                    &mut best,
                    &mut loss_acc,
                    &mut loss_count,
                )?;
            }
        }
    }
    if checkpoints.last().map(|c| c.step) != Some(step) {
        record(
            step,
            &params,
            &mut checkpoints,
            &mut best,
            &mut loss_acc,
            &mut loss_count,
        )?;
    }

    let (selected, params, dev_predictions) = best.expect("at least the initial checkpoint");
    Ok(RunResult {
        checkpoints,
        selected,
        params,
        dev_predictions,
    })
}

/// Evaluation-mode traces for every instance, with text attached.
pub fn compute_traces(
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    dataset: &PreparedDataset,
) -> Result<Vec<AttentionTrace>, TrainError> {
    let mut out = Vec::with_capacity(dataset.len());
    for (i, inst) in dataset.encoded.iter().enumerate() {
        let mut g = Graph::new();
        let pids = params.register(&mut g);
        let fwd = forward(&mut g, &pids, inst, &dataset.facts[i], cfg, None)?;
        let mut trace = fwd.trace;
        trace.fill_text(&dataset.raw[i]);
        out.push(trace);
    }
    Ok(out)
}
