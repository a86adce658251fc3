//! Model configuration: dimensions, the static combine coefficient, the
//! key-value strategy and the ensemble interaction mask.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Which final fact state serves as the memory key. The value is always the
/// object state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KvStrategy {
    SubjObj,
    ObjObj,
}

impl KvStrategy {
    pub fn parse(s: &str) -> Option<KvStrategy> {
        match s.to_ascii_lowercase().as_str() {
            "subjobj" | "subj/obj" => Some(KvStrategy::SubjObj),
            "objobj" | "obj/obj" => Some(KvStrategy::ObjObj),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KvStrategy::SubjObj => "subjobj",
            KvStrategy::ObjObj => "objobj",
        }
    }
}

/// One (question-representation, document-representation) pairing of the
/// ensemble score. Order matches the scalar weights W1..W4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interaction {
    /// W1: plain question to plain document.
    CtxCtx,
    /// W2: plain question to knowledge-enriched document.
    CtxKn,
    /// W3: knowledge-enriched question to plain document.
    KnCtx,
    /// W4: both enriched.
    KnKn,
}

pub const ALL_INTERACTIONS: [Interaction; 4] = [
    Interaction::CtxCtx,
    Interaction::CtxKn,
    Interaction::KnCtx,
    Interaction::KnKn,
];

impl Interaction {
    pub fn weight_index(&self) -> usize {
        match self {
            Interaction::CtxCtx => 0,
            Interaction::CtxKn => 1,
            Interaction::KnCtx => 2,
            Interaction::KnKn => 3,
        }
    }

    /// Row label in document-first order, as the ablation tables print it.
    pub fn table_label(&self) -> &'static str {
        match self {
            Interaction::CtxCtx => "D_ctx, Q_ctx",
            Interaction::CtxKn => "D_ctx+kn, Q_ctx",
            Interaction::KnCtx => "D_ctx, Q_ctx+kn",
            Interaction::KnKn => "D_ctx+kn, Q_ctx+kn",
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            Interaction::CtxCtx => "ctx-ctx",
            Interaction::CtxKn => "ctx-kn",
            Interaction::KnCtx => "kn-ctx",
            Interaction::KnKn => "kn-kn",
        }
    }
}

/// Non-empty subset of the four interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionSet {
    enabled: [bool; 4],
}

impl InteractionSet {
    pub fn full() -> Self {
        InteractionSet {
            enabled: [true; 4],
        }
    }

    pub fn only(i: Interaction) -> Self {
        let mut enabled = [false; 4];
        enabled[i.weight_index()] = true;
        InteractionSet { enabled }
    }

    pub fn without(i: Interaction) -> Self {
        let mut enabled = [true; 4];
        enabled[i.weight_index()] = false;
        InteractionSet { enabled }
    }

    pub fn contains(&self, i: Interaction) -> bool {
        self.enabled[i.weight_index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = Interaction> + '_ {
        ALL_INTERACTIONS.into_iter().filter(|i| self.contains(*i))
    }

    pub fn count(&self) -> usize {
        self.enabled.iter().filter(|&&e| e).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Parse either a 4-bit mask ("1011", order W1..W4) or a comma list of
    /// interaction keys ("ctx-ctx,kn-kn").
    pub fn parse(s: &str) -> Option<InteractionSet> {
        let s = s.trim();
        if s.len() == 4 && s.chars().all(|c| c == '0' || c == '1') {
            let mut enabled = [false; 4];
            for (i, c) in s.chars().enumerate() {
                enabled[i] = c == '1';
            }
            let set = InteractionSet { enabled };
            return (!set.is_empty()).then_some(set);
        }
        let mut enabled = [false; 4];
        for part in s.split(',') {
            let i = ALL_INTERACTIONS
                .into_iter()
                .find(|i| i.key() == part.trim().to_ascii_lowercase())?;
            enabled[i.weight_index()] = true;
        }
        let set = InteractionSet { enabled };
        (!set.is_empty()).then_some(set)
    }

    pub fn mask_string(&self) -> String {
        self.enabled
            .iter()
            .map(|&e| if e { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for InteractionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let keys: Vec<&str> = self.iter().map(|i| i.key()).collect();
        write!(f, "{}", keys.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Hidden width of a single GRU direction; encoder outputs are 2h.
    pub hidden_size: usize,
    pub embed_dim: usize,
    /// Static combine coefficient between context and knowledge.
    pub gamma: f64,
    pub kv_strategy: KvStrategy,
    pub interactions: InteractionSet,
    pub dropout_keep: f64,
    /// When false the memory is bypassed entirely and answers come from the
    /// plain context attention sum (the text-only baseline).
    pub knowledge_enabled: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_size: 32,
            embed_dim: 100,
            gamma: 0.5,
            kv_strategy: KvStrategy::SubjObj,
            interactions: InteractionSet::full(),
            dropout_keep: 0.8,
            knowledge_enabled: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.hidden_size == 0 || self.embed_dim == 0 {
            return Err("hidden_size and embed_dim must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if self.interactions.is_empty() {
            return Err("at least one interaction must be enabled".into());
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return Err(format!(
                "dropout keep probability must lie in (0, 1], got {}",
                self.dropout_keep
            ));
        }
        Ok(())
    }
}
