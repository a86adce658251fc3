//! Vocabulary with the multi-UNK scheme: a padding id, 100 reserved unknown
//! ids, training words above a frequency threshold, and every word from the
//! knowledge store.

use super::{ClozeInstance, DataError};
use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

pub const PAD_ID: u32 = 0;
pub const NUM_UNK_IDS: usize = 100;
pub const PAD_TOKEN: &str = "<pad>";

fn unk_token(i: usize) -> String {
    format!("<unk{i}>")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    word_to_id: HashMap<String, u32>,
    id_to_word: Vec<String>,
    unk_ids: Vec<u32>,
    min_count: usize,
}

impl Vocabulary {
    /// Build from training instances and the knowledge store's word list.
    /// Words are kept when their corpus frequency reaches `min_count` or
    /// they appear in any stored fact. Ids are assigned deterministically:
    /// padding, the 100 unknown slots, then retained words in sorted order.
    pub fn build<'a, W>(instances: &[ClozeInstance], fact_words: W, min_count: usize) -> Vocabulary
    where
        W: IntoIterator<Item = &'a str>,
    {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for inst in instances {
            for tok in inst.document_tokens.iter().chain(&inst.question_tokens) {
                *freq.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        let mut retained: BTreeSet<String> = freq
            .into_iter()
            .filter(|(_, n)| *n >= min_count)
            .map(|(w, _)| w.to_string())
            .collect();
        for w in fact_words {
            retained.insert(w.to_string());
        }
        // Reserved names cannot double as corpus words.
        retained.remove(PAD_TOKEN);
        for i in 1..=NUM_UNK_IDS {
            retained.remove(&unk_token(i));
        }

        let mut id_to_word = Vec::with_capacity(retained.len() + NUM_UNK_IDS + 1);
        id_to_word.push(PAD_TOKEN.to_string());
        let mut unk_ids = Vec::with_capacity(NUM_UNK_IDS);
        for i in 1..=NUM_UNK_IDS {
            unk_ids.push(id_to_word.len() as u32);
            id_to_word.push(unk_token(i));
        }
        id_to_word.extend(retained);

        let word_to_id = id_to_word
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocabulary {
            word_to_id,
            id_to_word,
            unk_ids,
            min_count,
        }
    }

    pub fn id_of(&self, word: &str) -> Option<u32> {
        self.word_to_id.get(word).copied()
    }

    pub fn word_of(&self, id: u32) -> Option<&str> {
        self.id_to_word.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_word.is_empty()
    }

    pub fn unk_ids(&self) -> &[u32] {
        &self.unk_ids
    }

    pub fn is_unk_id(&self, id: u32) -> bool {
        (1..=NUM_UNK_IDS as u32).contains(&id)
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    /// Versioned, sorted text format: header, then one `word<TAB>id` per
    /// line in id order.
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), DataError> {
        writeln!(w, "knreader-vocab v1")?;
        writeln!(w, "min_count\t{}", self.min_count)?;
        writeln!(w, "words\t{}", self.id_to_word.len())?;
        for (id, word) in self.id_to_word.iter().enumerate() {
            writeln!(w, "{word}\t{id}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Vocabulary, DataError> {
        let fmt = |line: usize, message: String| DataError::VocabFormat { line, message };
        let mut lines = r.lines().enumerate();
        let header = |entry: Option<(usize, std::io::Result<String>)>| -> Result<(usize, String), DataError> {
            match entry {
                Some((n, Ok(l))) => Ok((n + 1, l)),
                Some((n, Err(e))) => Err(fmt(n + 1, e.to_string())),
                None => Err(fmt(0, "unexpected end of file".into())),
            }
        };
        let (n, version) = header(lines.next())?;
        if version.trim() != "knreader-vocab v1" {
            return Err(fmt(n, format!("unknown format header {version:?}")));
        }
        let (n, mc_line) = header(lines.next())?;
        let min_count = mc_line
            .strip_prefix("min_count\t")
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| fmt(n, "expected min_count header".into()))?;
        let (n, count_line) = header(lines.next())?;
        let count = count_line
            .strip_prefix("words\t")
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| fmt(n, "expected words header".into()))?;

        let mut id_to_word = vec![String::new(); count];
        let mut seen = 0usize;
        for (i, line) in lines {
            let line = line.map_err(|e| fmt(i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let (word, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| fmt(i + 1, "expected word<TAB>id".into()))?;
            let id: usize = id
                .parse()
                .map_err(|_| fmt(i + 1, format!("bad id {id:?}")))?;
            if id >= count {
                return Err(fmt(i + 1, format!("id {id} out of range ({count} words)")));
            }
            id_to_word[id] = word.to_string();
            seen += 1;
        }
        if seen != count {
            return Err(fmt(0, format!("expected {count} entries, found {seen}")));
        }
        let word_to_id = id_to_word
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let unk_ids = (1..=NUM_UNK_IDS as u32).collect();
        Ok(Vocabulary {
            word_to_id,
            id_to_word,
            unk_ids,
            min_count,
        })
    }
}
