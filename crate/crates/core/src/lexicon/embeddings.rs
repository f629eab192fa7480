use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::diag::Diagnostics;
use crate::error::{Error, Result};

/// Word vectors stored contiguously, in file order.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    dim: usize,
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` pairs. The first pair fixes the
    /// dimension; mismatched or duplicate entries are skipped with a
    /// diagnostic.
    pub fn from_pairs<I>(pairs: I) -> Result<(Self, Diagnostics)>
    where
        I: IntoIterator<Item = (String, Vec<f32>)>,
    {
        let mut diagnostics = Diagnostics::new();
        let mut table = EmbeddingTable {
            vocabulary: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            dim: 0,
        };
        for (word, vector) in pairs {
            table.push(word, vector, &mut diagnostics);
        }
        if table.vocabulary.is_empty() {
            return Err(Error::EmptyEmbeddings);
        }
        Ok((table, diagnostics))
    }

    fn push(&mut self, word: String, vector: Vec<f32>, diagnostics: &mut Diagnostics) {
        if self.vocabulary.is_empty() {
            if vector.is_empty() {
                diagnostics.record("dimension_mismatch", format!("`{word}` has no components"));
                return;
            }
            self.dim = vector.len();
        }
        if vector.len() != self.dim {
            diagnostics.record(
                "dimension_mismatch",
                format!(
                    "`{word}` has {} components, expected {}",
                    vector.len(),
                    self.dim
                ),
            );
            return;
        }
        if self.index.contains_key(&word) {
            diagnostics.record("duplicate_word", format!("`{word}` repeated"));
            return;
        }
        self.index.insert(word.clone(), self.vocabulary.len());
        self.vocabulary.push(word);
        self.data.extend_from_slice(&vector);
    }

    /// Reads a header-free `word v1 ... vd` text file.
    pub fn load(path: &Path) -> Result<(Self, Diagnostics)> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut diagnostics = Diagnostics::new();
        let mut pairs = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let parsed: std::result::Result<Vec<f32>, _> = fields.map(str::parse::<f32>).collect();
            match parsed {
                Ok(v) => pairs.push((word.to_owned(), v)),
                Err(e) => diagnostics.record(
                    "unparsable_vector",
                    format!("{}:{}: {e}", path.display(), lineno + 1),
                ),
            }
        }
        let (table, more) = Self::from_pairs(pairs)?;
        Ok((table, diagnostics.merged(more)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn vector(&self, word: &str) -> Option<&[f32]> {
        self.index.get(word).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// The word closest to `word` in Euclidean distance, skipping `word`
    /// itself and everything in `exclusions`. Ties go to the earlier
    /// vocabulary entry.
    pub fn nearest_adversarial(&self, word: &str, exclusions: &HashSet<String>) -> Option<&str> {
        let &query_idx = self.index.get(word)?;
        let query = self.row(query_idx);
        let mut best: Option<(f64, usize)> = None;
        for (i, candidate) in self.vocabulary.iter().enumerate() {
            if i == query_idx || exclusions.contains(candidate) {
                continue;
            }
            let dist: f64 = self
                .row(i)
                .iter()
                .zip(query)
                .map(|(&a, &b)| {
                    let d = f64::from(a) - f64::from(b);
                    d * d
                })
                .sum();
            if best.is_none_or(|(bd, _)| dist < bd) {
                best = Some((dist, i));
            }
        }
        best.map(|(_, i)| self.vocabulary[i].as_str())
    }
}
