//! Configuration sweeps: the nine interaction ablations, fact budgets,
//! knowledge source variants and key-value strategies. Each row is one
//! train-and-evaluate run at the given config.

use super::eval::evaluate;
use super::harness::{prepare_dataset, train, PreparedDataset, TrainConfig};
use super::TrainError;
use crate::data::{ClozeInstance, Vocabulary};
use crate::knowledge::{FactStore, SourceVariant};
use crate::model::{Interaction, InteractionSet, KvStrategy, ModelConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
}

pub struct SweepDatasets<'a> {
    pub train: &'a [ClozeInstance],
    pub dev: &'a [ClozeInstance],
    pub test: &'a [ClozeInstance],
    pub store: &'a FactStore,
}

pub struct ExperimentResult {
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
}

/// Train on prepared data, select on dev, report dev and test accuracy of
/// the selected checkpoint.
pub fn run_experiment(
    train_set: &PreparedDataset,
    dev_set: &PreparedDataset,
    test_set: &PreparedDataset,
    vocab: &Vocabulary,
    cfg: &TrainConfig,
) -> Result<ExperimentResult, TrainError> {
    let run = train(train_set, dev_set, vocab, None, cfg, None)?;
    let (test_accuracy, _) = evaluate(&run.params, &cfg.model, test_set)?;
    Ok(ExperimentResult {
        dev_accuracy: run.selected_dev_accuracy(),
        test_accuracy,
    })
}

fn build_vocab(data: &SweepDatasets, cfg: &TrainConfig) -> Vocabulary {
    Vocabulary::build(data.train, data.store.vocabulary_words(), cfg.min_count)
}

fn prepare_all(
    data: &SweepDatasets,
    vocab: &Vocabulary,
    store: &FactStore,
    cfg: &TrainConfig,
) -> Result<(PreparedDataset, PreparedDataset, PreparedDataset), TrainError> {
    Ok((
        prepare_dataset(data.train.to_vec(), vocab, store, cfg, None)?,
        prepare_dataset(data.dev.to_vec(), vocab, store, cfg, None)?,
        prepare_dataset(data.test.to_vec(), vocab, store, cfg, None)?,
    ))
}

/// The nine interaction-mask rows: text-only baseline, each knowledge
/// interaction alone, the full model, and each leave-one-out ablation.
pub fn ablation_sweep(
    base: &TrainConfig,
    data: &SweepDatasets,
) -> Result<Vec<SweepRow>, TrainError> {
    let vocab = build_vocab(data, base);

    enum Row {
        WithoutKnowledge,
        Only(Interaction),
        Full,
        Without(Interaction),
    }
    let rows = [
        Row::WithoutKnowledge,
        Row::Only(Interaction::KnKn),
        Row::Only(Interaction::KnCtx),
        Row::Only(Interaction::CtxKn),
        Row::Full,
        Row::Without(Interaction::CtxCtx),
        Row::Without(Interaction::KnKn),
        Row::Without(Interaction::KnCtx),
        Row::Without(Interaction::CtxKn),
    ];

    // Knowledge-bearing rows share one preparation; the baseline skips
    // retrieval entirely.
    let (ktrain, kdev, ktest) = prepare_all(data, &vocab, data.store, base)?;
    let mut out = Vec::with_capacity(rows.len());
    for row in &rows {
        let (label, model) = match row {
            Row::WithoutKnowledge => (
                format!("{} (w/o know)", Interaction::CtxCtx.table_label()),
                ModelConfig {
                    knowledge_enabled: false,
                    interactions: InteractionSet::only(Interaction::CtxCtx),
                    ..base.model.clone()
                },
            ),
            Row::Only(i) => (
                i.table_label().to_string(),
                ModelConfig {
                    interactions: InteractionSet::only(*i),
                    ..base.model.clone()
                },
            ),
            Row::Full => ("Full model".to_string(), base.model.clone()),
            Row::Without(i) => (
                format!("w/o {}", i.table_label()),
                ModelConfig {
                    interactions: InteractionSet::without(*i),
                    ..base.model.clone()
                },
            ),
        };
        let cfg = TrainConfig {
            model,
            ..base.clone()
        };
        let r = run_experiment(&ktrain, &kdev, &ktest, &vocab, &cfg)?;
        out.push(SweepRow {
            label,
            dev_accuracy: r.dev_accuracy,
            test_accuracy: r.test_accuracy,
        });
    }
    Ok(out)
}

/// One row per fact budget.
pub fn budget_sweep(
    base: &TrainConfig,
    data: &SweepDatasets,
    budgets: &[usize],
) -> Result<Vec<SweepRow>, TrainError> {
    let vocab = build_vocab(data, base);
    let mut out = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        let mut cfg = base.clone();
        cfg.retrieval.budget = budget;
        let (tr, dv, te) = prepare_all(data, &vocab, data.store, &cfg)?;
        let r = run_experiment(&tr, &dv, &te, &vocab, &cfg)?;
        out.push(SweepRow {
            label: format!("{budget} facts"),
            dev_accuracy: r.dev_accuracy,
            test_accuracy: r.test_accuracy,
        });
    }
    Ok(out)
}

/// One row per knowledge source view. The vocabulary is built from the full
/// store so ids stay comparable across variants.
pub fn variant_sweep(
    base: &TrainConfig,
    data: &SweepDatasets,
    variants: &[SourceVariant],
) -> Result<Vec<SweepRow>, TrainError> {
    let vocab = build_vocab(data, base);
    let mut out = Vec::with_capacity(variants.len());
    for &variant in variants {
        let view = data.store.select_source(variant);
        let (tr, dv, te) = prepare_all(data, &vocab, &view, base)?;
        let r = run_experiment(&tr, &dv, &te, &vocab, base)?;
        out.push(SweepRow {
            label: variant.name().to_string(),
            dev_accuracy: r.dev_accuracy,
            test_accuracy: r.test_accuracy,
        });
    }
    Ok(out)
}

/// Subj/Obj versus Obj/Obj key selection.
pub fn kv_sweep(base: &TrainConfig, data: &SweepDatasets) -> Result<Vec<SweepRow>, TrainError> {
    let vocab = build_vocab(data, base);
    let (tr, dv, te) = prepare_all(data, &vocab, data.store, base)?;
    let mut out = Vec::with_capacity(2);
    for strategy in [KvStrategy::SubjObj, KvStrategy::ObjObj] {
        let cfg = TrainConfig {
            model: ModelConfig {
                kv_strategy: strategy,
                ..base.model.clone()
            },
            ..base.clone()
        };
        let r = run_experiment(&tr, &dv, &te, &vocab, &cfg)?;
        out.push(SweepRow {
            label: match strategy {
                KvStrategy::SubjObj => "Subj/Obj".to_string(),
                KvStrategy::ObjObj => "Obj/Obj".to_string(),
            },
            dev_accuracy: r.dev_accuracy,
            test_accuracy: r.test_accuracy,
        });
    }
    Ok(out)
}

/// Tab-separated table with a header, one line per row.
pub fn sweep_table(title: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{title}\tdev\ttest\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{:.4}\t{:.4}\n",
            r.label, r.dev_accuracy, r.test_accuracy
        ));
    }
    out
}
