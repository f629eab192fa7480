//! Conversion of a native WordNet database directory (`index.*` and
//! `data.*` files) into a [`LexicalGraph`].
//!
//! Relation lists follow WordNet's sense order: for each lemma, synsets are
//! visited in the order listed in `index.<pos>`, so the first hypernym of a
//! word comes from its most frequent sense.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::lexicon::{LexicalGraph, Relation};

const POS_FILES: [&str; 4] = ["noun", "verb", "adj", "adv"];

#[derive(Debug, Default)]
struct Synset {
    words: Vec<String>,
    hypernyms: Vec<u64>,
    hyponyms: Vec<u64>,
}

fn clean_word(raw: &str) -> String {
    // Adjective entries may carry a syntactic marker such as `galore(ip)`.
    let base = raw.split('(').next().unwrap_or(raw);
    base.replace('_', " ").to_lowercase()
}

fn parse_data_line(line: &str) -> Option<(u64, Synset)> {
    let body = line.split(" | ").next().unwrap_or(line);
    let mut fields = body.split_whitespace();
    let offset: u64 = fields.next()?.parse().ok()?;
    let _lex_filenum = fields.next()?;
    let _ss_type = fields.next()?;
    let w_cnt = usize::from_str_radix(fields.next()?, 16).ok()?;
    let mut synset = Synset::default();
    for _ in 0..w_cnt {
        let word = fields.next()?;
        let _lex_id = fields.next()?;
        synset.words.push(clean_word(word));
    }
    let p_cnt: usize = fields.next()?.parse().ok()?;
    for _ in 0..p_cnt {
        let symbol = fields.next()?;
        let target: u64 = fields.next()?.parse().ok()?;
        let _pos = fields.next()?;
        let _source_target = fields.next()?;
        match symbol {
            "@" | "@i" => synset.hypernyms.push(target),
            "~" | "~i" => synset.hyponyms.push(target),
            _ => {}
        }
    }
    Some((offset, synset))
}

fn parse_index_line(line: &str) -> Option<(String, Vec<u64>)> {
    let mut fields = line.split_whitespace();
    let lemma = fields.next()?;
    let _pos = fields.next()?;
    let synset_cnt: usize = fields.next()?.parse().ok()?;
    let p_cnt: usize = fields.next()?.parse().ok()?;
    for _ in 0..p_cnt {
        fields.next()?;
    }
    let _sense_cnt = fields.next()?;
    let _tagsense_cnt = fields.next()?;
    let offsets: Option<Vec<u64>> = fields.take(synset_cnt).map(|f| f.parse().ok()).collect();
    let offsets = offsets?;
    (offsets.len() == synset_cnt).then(|| (clean_word(lemma), offsets))
}

fn is_license_line(line: &str) -> bool {
    line.starts_with("  ") || line.trim().is_empty()
}

/// Builds a graph from every part of speech found in `dir`.
pub fn import_wordnet(dir: &Path) -> Result<(LexicalGraph, Diagnostics)> {
    let mut graph = LexicalGraph::new();
    let mut diagnostics = Diagnostics::new();
    let mut found_any = false;
    for pos in POS_FILES {
        let data_path = dir.join(format!("data.{pos}"));
        let index_path = dir.join(format!("index.{pos}"));
        if !data_path.exists() || !index_path.exists() {
            continue;
        }
        found_any = true;
        let data = fs::read_to_string(&data_path).map_err(|e| Error::io(&data_path, e))?;
        let mut synsets: HashMap<u64, Synset> = HashMap::new();
        for (lineno, line) in data.lines().enumerate() {
            if is_license_line(line) {
                continue;
            }
            match parse_data_line(line) {
                Some((offset, synset)) => {
                    synsets.insert(offset, synset);
                }
                None => diagnostics.record(
                    "malformed_wordnet_line",
                    format!("{}:{}", data_path.display(), lineno + 1),
                ),
            }
        }
        let index = fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        for (lineno, line) in index.lines().enumerate() {
            if is_license_line(line) {
                continue;
            }
            let Some((lemma, offsets)) = parse_index_line(line) else {
                diagnostics.record(
                    "malformed_wordnet_line",
                    format!("{}:{}", index_path.display(), lineno + 1),
                );
                continue;
            };
            for offset in offsets {
                let Some(synset) = synsets.get(&offset) else {
                    diagnostics.record(
                        "dangling_synset",
                        format!("{}: {lemma} -> {offset}", index_path.display()),
                    );
                    continue;
                };
                for word in &synset.words {
                    graph.insert(&lemma, Relation::Synonym, word);
                }
                let linked = [
                    (Relation::Hypernym, &synset.hypernyms),
                    (Relation::Hyponym, &synset.hyponyms),
                ];
                for (relation, targets) in linked {
                    for target in targets {
                        if let Some(t) = synsets.get(target) {
                            for word in &t.words {
                                graph.insert(&lemma, relation, word);
                            }
                        }
                    }
                }
            }
        }
    }
    if !found_any {
        return Err(Error::Format {
            path: dir.to_owned(),
            message: "no WordNet index.<pos>/data.<pos> pairs found".into(),
        });
    }
    Ok((graph, diagnostics))
}
