//! Pretrained embedding loading. Rows for words missing from the file are
//! sampled uniformly from [-0.1, 0.1]; the padding row stays zero.

use super::{DataError, Vocabulary, PAD_ID};
use rand::Rng;
use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

pub const OOV_INIT_RANGE: f64 = 0.1;

/// |V| x E embedding table kept in f64; the model converts to its working
/// precision when parameters are initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    /// Row-major |V| x dim values, row index = vocabulary id.
    pub values: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn row(&self, id: u32) -> &[f64] {
        let d = self.dim;
        &self.values[id as usize * d..(id as usize + 1) * d]
    }

    pub fn vocab_size(&self) -> usize {
        self.values.len() / self.dim
    }
}

/// Uniform [-0.1, 0.1] rows for every word; used when no pretrained file is
/// given. The padding row is zero.
pub fn random_embeddings<R: Rng>(vocab: &Vocabulary, dim: usize, rng: &mut R) -> EmbeddingMatrix {
    let mut values = vec![0.0f64; vocab.len() * dim];
    for id in 0..vocab.len() as u32 {
        if id == PAD_ID {
            continue;
        }
        let start = id as usize * dim;
        for v in &mut values[start..start + dim] {
            *v = rng.random_range(-OOV_INIT_RANGE..OOV_INIT_RANGE);
        }
    }
    EmbeddingMatrix { dim, values }
}

/// Load a text-format pretrained file ("word v1 .. vE" per line), matching
/// rows by vocabulary word. The width E is taken from the first line and
/// must be consistent.
pub fn load_embeddings<R: Rng>(
    path: &Path,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<EmbeddingMatrix, DataError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut pretrained: HashMap<String, Vec<f64>> = HashMap::new();
    let mut dim: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap().to_string();
        let vals: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| DataError::EmbeddingFormat {
            line: i + 1,
            message: e.to_string(),
        })?;
        match dim {
            None => dim = Some(vals.len()),
            Some(d) if d != vals.len() => {
                return Err(DataError::EmbeddingFormat {
                    line: i + 1,
                    message: format!("expected {d} components, got {}", vals.len()),
                })
            }
            _ => {}
        }
        // Only vocabulary words are kept; the file may be much larger.
        if vocab.id_of(&word).is_some() {
            pretrained.insert(word, vals);
        }
    }
    let dim = dim.ok_or(DataError::EmbeddingFormat {
        line: 0,
        message: "empty embedding file".into(),
    })?;

    let mut matrix = random_embeddings(vocab, dim, rng);
    for (word, vals) in pretrained {
        let id = vocab.id_of(&word).unwrap();
        let start = id as usize * dim;
        matrix.values[start..start + dim].copy_from_slice(&vals);
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn vocab() -> Vocabulary {
        Vocabulary::build(&[], ["apple", "pear", "quince"], 5)
    }

    #[test]
    fn matched_rows_copied_unmatched_rows_in_range() {
        let v = vocab();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "apple 0.5 -0.25 1.0").unwrap();
        writeln!(f, "banana 0.1 0.1 0.1").unwrap();
        f.flush().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = load_embeddings(f.path(), &v, &mut rng).unwrap();
        assert_eq!(m.dim, 3);
        assert_eq!(m.row(v.id_of("apple").unwrap()), &[0.5, -0.25, 1.0]);
        for w in ["pear", "quince"] {
            for &x in m.row(v.id_of(w).unwrap()) {
                assert!((-OOV_INIT_RANGE..OOV_INIT_RANGE).contains(&x), "{w}: {x}");
            }
        }
        assert_eq!(m.row(PAD_ID), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn inconsistent_width_is_a_format_error() {
        let v = vocab();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "apple 0.5 -0.25 1.0").unwrap();
        writeln!(f, "pear 0.5 -0.25").unwrap();
        f.flush().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let err = load_embeddings(f.path(), &v, &mut rng).unwrap_err();
        assert!(matches!(err, DataError::EmbeddingFormat { line: 2, .. }), "{err}");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let v = vocab();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let err = load_embeddings(Path::new("/nonexistent/glove.txt"), &v, &mut rng).unwrap_err();
        assert!(matches!(err, DataError::Io(_)));
    }

    #[test]
    fn random_embeddings_cover_whole_vocabulary() {
        let v = vocab();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_embeddings(&v, 8, &mut rng);
        assert_eq!(m.vocab_size(), v.len());
        for x in &m.values {
            assert!((-OOV_INIT_RANGE..=OOV_INIT_RANGE).contains(x));
        }
    }
}
