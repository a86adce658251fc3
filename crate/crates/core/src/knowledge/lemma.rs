//! Default lemmatizer: lowercasing plus a small English inflection
//! stripper with doubling rules and an exception table for common
//! irregulars. Deterministic and dependency-free so index contents are
//! stable across runs and platforms.

/// Pluggable pure lemmatization function used by the fact index and the
/// retrieval weighting.
pub type Lemmatizer = fn(&str) -> String;

const EXCEPTIONS: &[(&str, &str)] = &[
    ("children", "child"),
    ("men", "man"),
    ("women", "woman"),
    ("mice", "mouse"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("geese", "goose"),
    ("people", "person"),
    ("oxen", "ox"),
    ("wolves", "wolf"),
    ("knives", "knife"),
    ("leaves", "leaf"),
    ("wives", "wife"),
];

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Undo consonant doubling left by -ing/-ed stripping ("running" ->
/// "runn" -> "run"). Double 'l' and 's' stay ("falling" keeps "fall").
fn undouble(stem: &str) -> String {
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    if n >= 3 {
        let last = chars[n - 1];
        if last == chars[n - 2] && !is_vowel(last) && last != 'l' && last != 's' {
            return chars[..n - 1].iter().collect();
        }
    }
    stem.to_string()
}

pub fn default_lemmatizer(token: &str) -> String {
    let word = token.to_lowercase();
    for (irregular, lemma) in EXCEPTIONS {
        if word == *irregular {
            return (*lemma).to_string();
        }
    }
    // -ing / -ed with doubling rules.
    if let Some(stem) = word.strip_suffix("ing") {
        if stem.len() >= 3 && stem.chars().any(is_vowel) {
            return undouble(stem);
        }
    }
    if let Some(stem) = word.strip_suffix("ed") {
        if stem.len() >= 3 && stem.chars().any(is_vowel) {
            return undouble(stem);
        }
    }
    // Plurals.
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.len() >= 2 {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = word.strip_suffix("es") {
        if stem.ends_with('s') || stem.ends_with('x') || stem.ends_with('z')
            || stem.ends_with("ch") || stem.ends_with("sh")
        {
            return stem.to_string();
        }
    }
    if word.ends_with('s') && !word.ends_with("ss") && word.len() >= 3 {
        return word[..word.len() - 1].to_string();
    }
    word
}
