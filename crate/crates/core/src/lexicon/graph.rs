use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::diag::Diagnostics;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Synonym,
    Hypernym,
    Hyponym,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Synonym => "synonym",
            Relation::Hypernym => "hypernym",
            Relation::Hyponym => "hyponym",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "synonym" => Ok(Relation::Synonym),
            "hypernym" => Ok(Relation::Hypernym),
            "hyponym" => Ok(Relation::Hyponym),
            other => Err(format!("unknown relation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Relations {
    pub synonyms: Vec<String>,
    pub hypernyms: Vec<String>,
    pub hyponyms: Vec<String>,
}

impl Relations {
    fn list_mut(&mut self, rel: Relation) -> &mut Vec<String> {
        match rel {
            Relation::Synonym => &mut self.synonyms,
            Relation::Hypernym => &mut self.hypernyms,
            Relation::Hyponym => &mut self.hyponyms,
        }
    }

    pub fn list(&self, rel: Relation) -> &[String] {
        match rel {
            Relation::Synonym => &self.synonyms,
            Relation::Hypernym => &self.hypernyms,
            Relation::Hyponym => &self.hyponyms,
        }
    }
}

/// Synonym, hypernym and hyponym relations keyed by lowercase word.
///
/// Each relation list keeps insertion order (file order) without duplicates,
/// so "the first entry" is well defined.
#[derive(Debug, Clone, Default)]
pub struct LexicalGraph {
    entries: HashMap<String, Relations>,
}

fn key(word: &str) -> String {
    word.trim().to_lowercase()
}

impl LexicalGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `source -relation-> target`. Returns false when the edge is a
    /// self-relation or already present.
    pub fn insert(&mut self, source: &str, relation: Relation, target: &str) -> bool {
        let source = key(source);
        let target = key(target);
        if source.is_empty() || target.is_empty() || source == target {
            return false;
        }
        let list = self.entries.entry(source).or_default().list_mut(relation);
        if list.contains(&target) {
            return false;
        }
        list.push(target);
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn relations(&self, word: &str) -> Option<&Relations> {
        self.entries.get(&key(word))
    }

    pub fn related(&self, word: &str, relation: Relation) -> &[String] {
        self.relations(word)
            .map(|r| r.list(relation))
            .unwrap_or(&[])
    }

    pub fn hypernym_of(&self, word: &str) -> Option<&str> {
        self.related(word, Relation::Hypernym)
            .first()
            .map(String::as_str)
    }

    pub fn hyponym_of(&self, word: &str) -> Option<&str> {
        self.related(word, Relation::Hyponym)
            .first()
            .map(String::as_str)
    }

    pub fn synonyms_of(&self, word: &str) -> &[String] {
        self.related(word, Relation::Synonym)
    }

    /// Parses `word<TAB>relation<TAB>word` lines. Self-relations, unknown
    /// relation names and malformed lines are skipped with a diagnostic.
    pub fn parse(text: &str) -> (Self, Diagnostics) {
        let mut graph = Self::new();
        let mut diagnostics = Diagnostics::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [source, relation, target] = fields[..] else {
                diagnostics.record(
                    "malformed_relation",
                    format!("line {}: expected 3 tab-separated fields", lineno + 1),
                );
                continue;
            };
            let relation = match relation.trim().parse::<Relation>() {
                Ok(r) => r,
                Err(e) => {
                    diagnostics.record("malformed_relation", format!("line {}: {e}", lineno + 1));
                    continue;
                }
            };
            if key(source) == key(target) {
                diagnostics.record(
                    "self_relation",
                    format!("line {}: `{}` related to itself", lineno + 1, source.trim()),
                );
                continue;
            }
            graph.insert(source, relation, target);
        }
        (graph, diagnostics)
    }

    pub fn load(path: &Path) -> Result<(Self, Diagnostics)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    /// Writes the graph back as relation lines, sorted by source word.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut words: Vec<&String> = self.entries.keys().collect();
        words.sort();
        for word in words {
            let rel = &self.entries[word];
            for relation in [Relation::Synonym, Relation::Hypernym, Relation::Hyponym] {
                for target in rel.list(relation) {
                    writeln!(out, "{word}\t{relation}\t{target}")?;
                }
            }
        }
        Ok(())
    }
}
