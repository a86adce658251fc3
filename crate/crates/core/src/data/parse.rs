//! Parser for the CBT text format: blank-line-separated blocks of 20
//! numbered story sentences plus a 21st line holding the question, the
//! answer and the 10-candidate list in tab-separated fields.

use super::DataError;
use serde::{Deserialize, Serialize};
use std::io::BufRead;

pub const CANDIDATES_PER_INSTANCE: usize = 10;
const STORY_LINES: usize = 20;

/// One cloze task item. Tokens are lowercased, whitespace-split, with the
/// leading line numbers already stripped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeInstance {
    pub instance_id: String,
    /// The 20 story sentences concatenated into one token list.
    pub document_tokens: Vec<String>,
    pub question_tokens: Vec<String>,
    /// Position of the placeholder token within the question.
    pub placeholder_index: usize,
    pub candidates: Vec<String>,
    pub gold_answer: String,
}

impl ClozeInstance {
    pub fn gold_index(&self) -> usize {
        self.candidates
            .iter()
            .position(|c| c == &self.gold_answer)
            .expect("gold answer is a candidate")
    }
}

#[derive(Debug, Clone)]
pub struct ParseConfig {
    /// Placeholder token as it appears in question lines. Compared after
    /// lowercasing, like every other token.
    pub placeholder: String,
}

impl Default for ParseConfig {
    fn default() -> Self {
        ParseConfig {
            placeholder: "XXXXX".to_string(),
        }
    }
}

impl ParseConfig {
    pub fn placeholder_lower(&self) -> String {
        self.placeholder.to_lowercase()
    }
}

pub fn parse_cbt_file<R: BufRead>(reader: R, cfg: &ParseConfig) -> Result<Vec<ClozeInstance>, DataError> {
    let mut text = String::new();
    let mut r = reader;
    r.read_to_string(&mut text)?;
    parse_cbt_str(&text, cfg)
}

pub fn parse_cbt_str(text: &str, cfg: &ParseConfig) -> Result<Vec<ClozeInstance>, DataError> {
    let mut instances = Vec::new();
    let mut block_lines: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !block_lines.is_empty() {
                instances.push(parse_block(&block_lines, instances.len(), cfg)?);
                block_lines.clear();
            }
        } else {
            block_lines.push(line);
        }
    }
    if !block_lines.is_empty() {
        instances.push(parse_block(&block_lines, instances.len(), cfg)?);
    }
    Ok(instances)
}

fn parse_err(block: usize, rule: impl Into<String>) -> DataError {
    DataError::Parse {
        block,
        rule: rule.into(),
    }
}

/// Strip the leading line number, checking it matches the expected ordinal.
fn strip_line_number<'a>(line: &'a str, expect: usize, block: usize) -> Result<&'a str, DataError> {
    let mut parts = line.splitn(2, char::is_whitespace);
    let num = parts.next().unwrap_or("");
    if num.parse::<usize>() != Ok(expect) {
        return Err(parse_err(
            block,
            format!("line must start with line number {expect}, got {num:?}"),
        ));
    }
    Ok(parts.next().unwrap_or(""))
}

fn tokens_of(text: &str) -> Vec<String> {
    text.split_whitespace().map(|t| t.to_lowercase()).collect()
}

fn parse_block(lines: &[&str], ordinal: usize, cfg: &ParseConfig) -> Result<ClozeInstance, DataError> {
    if lines.len() != STORY_LINES + 1 {
        return Err(parse_err(
            ordinal,
            format!("block must have 21 lines, got {}", lines.len()),
        ));
    }

    let mut document_tokens = Vec::new();
    for (i, line) in lines[..STORY_LINES].iter().enumerate() {
        let rest = strip_line_number(line, i + 1, ordinal)?;
        document_tokens.extend(tokens_of(rest));
    }

    let last = strip_line_number(lines[STORY_LINES], STORY_LINES + 1, ordinal)?;
    // Real CBT files carry an empty field between answer and candidates;
    // tolerate it by dropping empty fields.
    let fields: Vec<&str> = last.split('\t').map(str::trim).filter(|f| !f.is_empty()).collect();
    if fields.len() != 3 {
        return Err(parse_err(
            ordinal,
            format!(
                "question line must have question, answer and candidates in tab-separated fields, got {}",
                fields.len()
            ),
        ));
    }

    let question_tokens = tokens_of(fields[0]);
    let gold_answer = fields[1].to_lowercase();
    let candidates: Vec<String> = fields[2]
        .split('|')
        .map(|c| c.trim().to_lowercase())
        .filter(|c| !c.is_empty())
        .collect();

    let placeholder = cfg.placeholder_lower();
    let placeholder_index = question_tokens
        .iter()
        .position(|t| t == &placeholder)
        .ok_or_else(|| {
            parse_err(
                ordinal,
                format!("question contains no placeholder token {placeholder:?}"),
            )
        })?;

    if candidates.len() != CANDIDATES_PER_INSTANCE {
        return Err(parse_err(
            ordinal,
            format!("expected 10 candidates, got {}", candidates.len()),
        ));
    }
    for (i, c) in candidates.iter().enumerate() {
        if candidates[..i].contains(c) {
            return Err(parse_err(ordinal, format!("duplicate candidate {c:?}")));
        }
    }
    if !candidates.contains(&gold_answer) {
        return Err(parse_err(
            ordinal,
            format!("answer {gold_answer:?} is not among the candidates"),
        ));
    }
    for c in &candidates {
        if !document_tokens.contains(c) {
            return Err(parse_err(
                ordinal,
                format!("candidate {c:?} does not occur in the story"),
            ));
        }
    }

    Ok(ClozeInstance {
        instance_id: format!("{ordinal}"),
        document_tokens,
        question_tokens,
        placeholder_index,
        candidates,
        gold_answer,
    })
}

/// Serialize instances back to the CBT text format. The parser guarantees
/// 20 story lines per block; the writer re-chunks document tokens into 20
/// lines (sentence boundaries are not stored, so it splits evenly), which
/// round-trips through `parse_cbt_str` to structurally equal instances.
pub fn write_cbt(instances: &[ClozeInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        let n = inst.document_tokens.len();
        let per = n.div_ceil(STORY_LINES).max(1);
        for line in 0..STORY_LINES {
            let lo = (line * per).min(n);
            let hi = ((line + 1) * per).min(n);
            out.push_str(&format!("{} {}\n", line + 1, inst.document_tokens[lo..hi].join(" ")));
        }
        out.push_str(&format!(
            "21 {}\t{}\t{}\n\n",
            inst.question_tokens.join(" "),
            inst.gold_answer,
            inst.candidates.join("|")
        ));
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn fixture_block() -> String {
        let mut s = String::new();
        s.push_str("1 once there was a small bird in the garden .\n");
        for i in 2..=18 {
            s.push_str(&format!("{i} the bird sang near the old tree every day .\n"));
        }
        s.push_str("19 a cat and a dog and a fox and a hen and a cow lived there too .\n");
        s.push_str("20 the mouse and the sheep and the goat slept in the barn .\n");
        s.push_str("21 the XXXXX sang in the garden .\tbird\tbird|cat|dog|fox|hen|cow|mouse|sheep|goat|tree\n");
        s
    }

    #[test]
    fn parses_fixture_block_with_placeholder_position() {
        let insts = parse_cbt_str(&fixture_block(), &ParseConfig::default()).unwrap();
        assert_eq!(insts.len(), 1);
        let inst = &insts[0];
        assert_eq!(inst.question_tokens[inst.placeholder_index], "xxxxx");
        assert_eq!(inst.placeholder_index, 1);
        assert_eq!(inst.gold_answer, "bird");
        assert_eq!(inst.candidates.len(), 10);
        assert_eq!(inst.gold_index(), 0);
        // Line numbers are stripped and not part of the token stream.
        assert!(!inst.document_tokens.contains(&"1".to_string()));
        assert!(inst.document_tokens.contains(&"garden".to_string()));
    }

    #[test]
    fn empty_stream_yields_empty_list() {
        assert!(parse_cbt_str("", &ParseConfig::default()).unwrap().is_empty());
        assert!(parse_cbt_str("\n\n\n", &ParseConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn answer_not_among_candidates_is_an_error() {
        let bad = fixture_block().replace("\tbird\t", "\twolf\t");
        let err = parse_cbt_str(&bad, &ParseConfig::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("block 0"), "{msg}");
        assert!(msg.contains("not among the candidates"), "{msg}");
    }

    #[test]
    fn missing_placeholder_is_an_error() {
        let bad = fixture_block().replace("XXXXX", "YYYYY");
        let err = parse_cbt_str(&bad, &ParseConfig::default()).unwrap_err();
        assert!(err.to_string().contains("placeholder"), "{err}");
    }

    #[test]
    fn short_block_is_an_error_naming_the_ordinal() {
        let good = fixture_block();
        let mut text = good.clone();
        // Second block missing a line.
        let truncated: Vec<&str> = good.lines().skip(1).collect();
        text.push('\n');
        text.push_str(&truncated.join("\n"));
        let err = parse_cbt_str(&text, &ParseConfig::default()).unwrap_err();
        assert!(err.to_string().contains("block 1"), "{err}");
        assert!(err.to_string().contains("21 lines"), "{err}");
    }

    #[test]
    fn missing_tabs_is_an_error() {
        let bad = fixture_block().replace('\t', " ");
        let err = parse_cbt_str(&bad, &ParseConfig::default()).unwrap_err();
        assert!(err.to_string().contains("tab-separated"), "{err}");
    }

    #[test]
    fn custom_placeholder_is_honored() {
        let text = fixture_block().replace("XXXXX", "BLANK");
        let cfg = ParseConfig {
            placeholder: "BLANK".into(),
        };
        let insts = parse_cbt_str(&text, &cfg).unwrap();
        assert_eq!(insts[0].question_tokens[insts[0].placeholder_index], "blank");
    }

    #[test]
    fn real_cbt_empty_field_between_answer_and_candidates_is_tolerated() {
        let text = fixture_block().replace("\tbird\t", "\tbird\t\t");
        let insts = parse_cbt_str(&text, &ParseConfig::default()).unwrap();
        assert_eq!(insts[0].gold_answer, "bird");
    }

    #[test]
    fn round_trip_is_structurally_identical() {
        let insts = parse_cbt_str(&fixture_block(), &ParseConfig::default()).unwrap();
        let re = parse_cbt_str(&write_cbt(&insts), &ParseConfig::default()).unwrap();
        assert_eq!(insts, re);
    }
}
