//! Fact triple store with a lemma inverted index and the three knowledge
//! source views.

use super::lemma::Lemmatizer;
use super::KnowledgeError;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::BufRead;

pub type FactId = usize;

/// Relations excluded from the selected view (with or without the "/r/"
/// prefix, case-insensitive).
pub const SELECTED_EXCLUDED_RELATIONS: [&str; 5] =
    ["relatedto", "isa", "synonym", "similarto", "hascontext"];

/// One (subject, relation, object) fact. Tokens are lowercased at
/// ingestion; the relation is a single atomic word token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeTriple {
    pub subject_tokens: Vec<String>,
    pub relation: String,
    pub object_tokens: Vec<String>,
    pub source_tag: String,
    /// Ingestion sequence number; preserved across source views so
    /// downstream tie-breaking is stable.
    pub store_ordinal: usize,
}

impl KnowledgeTriple {
    pub fn text(&self) -> String {
        format!(
            "{} {} {}",
            self.subject_tokens.join(" "),
            self.relation,
            self.object_tokens.join(" ")
        )
    }

    /// Every word the triple contributes to the vocabulary, the relation
    /// included as one whole string.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.subject_tokens
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.relation.as_str()))
            .chain(self.object_tokens.iter().map(String::as_str))
    }

    fn excluded_from_selected(&self) -> bool {
        let bare = self.relation.strip_prefix("/r/").unwrap_or(&self.relation);
        SELECTED_EXCLUDED_RELATIONS
            .iter()
            .any(|r| bare.eq_ignore_ascii_case(r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceVariant {
    Cn5All,
    Cn5Wn3,
    Cn5Sel,
}

impl SourceVariant {
    pub fn parse(s: &str) -> Option<SourceVariant> {
        match s.to_ascii_lowercase().as_str() {
            "cn5all" => Some(SourceVariant::Cn5All),
            "cn5wn3" => Some(SourceVariant::Cn5Wn3),
            "cn5sel" => Some(SourceVariant::Cn5Sel),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SourceVariant::Cn5All => "cn5all",
            SourceVariant::Cn5Wn3 => "cn5wn3",
            SourceVariant::Cn5Sel => "cn5sel",
        }
    }
}

/// Immutable after ingestion; the index maps a lemma to every fact whose
/// subject or object contains a token with that lemma, in ordinal order.
#[derive(Debug)]
pub struct FactStore {
    triples: Vec<KnowledgeTriple>,
    index: HashMap<String, Vec<FactId>>,
    lemmatizer: Lemmatizer,
}

impl FactStore {
    pub fn empty(lemmatizer: Lemmatizer) -> Self {
        FactStore {
            triples: Vec::new(),
            index: HashMap::new(),
            lemmatizer,
        }
    }

    /// Ingest the triple file format: one record per line, tab-separated
    /// subject phrase / relation / object phrase / source tag, or the JSON
    /// object variant with keys subject, relation, object, source.
    pub fn ingest<R: BufRead>(reader: R, lemmatizer: Lemmatizer) -> Result<Self, KnowledgeError> {
        let mut store = FactStore::empty(lemmatizer);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let record = parse_record(trimmed, i + 1)?;
            store.push(record);
        }
        Ok(store)
    }

    fn push(&mut self, mut triple: KnowledgeTriple) {
        triple.store_ordinal = self.triples.len();
        let id = self.triples.len();
        let mut seen: Vec<String> = Vec::new();
        for tok in triple.subject_tokens.iter().chain(&triple.object_tokens) {
            let lemma = (self.lemmatizer)(tok);
            if seen.contains(&lemma) {
                continue;
            }
            self.index.entry(lemma.clone()).or_default().push(id);
            seen.push(lemma);
        }
        self.triples.push(triple);
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triple(&self, id: FactId) -> &KnowledgeTriple {
        &self.triples[id]
    }

    pub fn triples(&self) -> &[KnowledgeTriple] {
        &self.triples
    }

    pub fn lemmatizer(&self) -> Lemmatizer {
        self.lemmatizer
    }

    /// Fact ids whose subject or object contains a token with this lemma,
    /// in store ordinal order. Unknown lemmas yield the empty slice.
    pub fn facts_containing(&self, lemma: &str) -> &[FactId] {
        self.index.get(lemma).map_or(&[], Vec::as_slice)
    }

    /// All distinct words across stored facts, for vocabulary extension.
    pub fn vocabulary_words(&self) -> impl Iterator<Item = &str> {
        self.triples.iter().flat_map(|t| t.words())
    }

    /// Filtered view for one of the knowledge source variants. Ordinals are
    /// preserved, so tie-breaking downstream is unchanged.
    pub fn select_source(&self, variant: SourceVariant) -> FactStore {
        match variant {
            SourceVariant::Cn5All => self.filter(|_| true),
            SourceVariant::Cn5Wn3 => self.select_wordnet_with(default_wordnet_predicate),
            SourceVariant::Cn5Sel => self.filter(|t| !t.excluded_from_selected()),
        }
    }

    /// WordNet-provenance view with a caller-supplied source-tag predicate.
    pub fn select_wordnet_with(&self, predicate: fn(&str) -> bool) -> FactStore {
        self.filter(|t| predicate(&t.source_tag))
    }

    fn filter(&self, keep: impl Fn(&KnowledgeTriple) -> bool) -> FactStore {
        let mut out = FactStore::empty(self.lemmatizer);
        for t in &self.triples {
            if keep(t) {
                let ordinal = t.store_ordinal;
                out.push(t.clone());
                // push() renumbers; restore the original ordinal.
                out.triples.last_mut().unwrap().store_ordinal = ordinal;
            }
        }
        out
    }
}

pub fn default_wordnet_predicate(tag: &str) -> bool {
    tag.to_ascii_lowercase().contains("wordnet")
}

fn lower_tokens(field: &str) -> Vec<String> {
    field.split_whitespace().map(|t| t.to_lowercase()).collect()
}

#[derive(Deserialize)]
struct JsonRecord {
    subject: Vec<String>,
    relation: String,
    object: Vec<String>,
    #[serde(default)]
    source: String,
}

fn parse_record(line: &str, line_no: usize) -> Result<KnowledgeTriple, KnowledgeError> {
    let err = |message: String| KnowledgeError::Ingest {
        line: line_no,
        message,
    };

    let (subject_tokens, relation, object_tokens, source_tag) = if line.starts_with('{') {
        let rec: JsonRecord =
            serde_json::from_str(line).map_err(|e| err(format!("bad json record: {e}")))?;
        (
            rec.subject.iter().map(|t| t.to_lowercase()).collect(),
            rec.relation.to_lowercase(),
            rec.object.iter().map(|t| t.to_lowercase()).collect(),
            rec.source,
        )
    } else {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(err(format!(
                "expected subject, relation and object fields, got {}",
                fields.len()
            )));
        }
        (
            lower_tokens(fields[0]),
            fields[1].trim().to_lowercase(),
            lower_tokens(fields[2]),
            fields.get(3).map(|s| s.trim().to_string()).unwrap_or_default(),
        )
    };

    if subject_tokens.is_empty() {
        return Err(err("record has an empty subject".into()));
    }
    if relation.is_empty() {
        return Err(err("record has an empty relation".into()));
    }
    if object_tokens.is_empty() {
        return Err(err("record has an empty object".into()));
    }
    Ok(KnowledgeTriple {
        subject_tokens,
        relation,
        object_tokens,
        source_tag,
        store_ordinal: 0,
    })
}
