//! Easy data augmentation: synonym replacement, random insertion, random
//! swap and random deletion.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::lexicon::LexicalGraph;
use crate::text::{core_lower, replace_core};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdaOp {
    SynonymReplacement,
    RandomInsertion,
    RandomSwap,
    RandomDeletion,
}

impl EdaOp {
    pub const ALL: [EdaOp; 4] = [
        EdaOp::SynonymReplacement,
        EdaOp::RandomInsertion,
        EdaOp::RandomSwap,
        EdaOp::RandomDeletion,
    ];
}

impl fmt::Display for EdaOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdaOp::SynonymReplacement => "SR",
            EdaOp::RandomInsertion => "RI",
            EdaOp::RandomSwap => "RS",
            EdaOp::RandomDeletion => "RD",
        })
    }
}

/// `max(1, round(rate * len))`.
pub fn edit_count(rate: f64, len: usize) -> usize {
    ((rate * len as f64).round() as usize).max(1)
}

fn synonyms<'g>(graph: &'g LexicalGraph, token: &str) -> &'g [String] {
    let core = core_lower(token);
    if core.is_empty() {
        &[]
    } else {
        graph.synonyms_of(&core)
    }
}

fn synonym_replacement<R: Rng + ?Sized>(
    tokens: &[String],
    n: usize,
    rng: &mut R,
    graph: &LexicalGraph,
) -> Option<Vec<String>> {
    let mut candidates: Vec<usize> = (0..tokens.len())
        .filter(|&i| !synonyms(graph, &tokens[i]).is_empty())
        .collect();
    if candidates.is_empty() {
        return None;
    }
    candidates.shuffle(rng);
    let mut out = tokens.to_vec();
    for &i in candidates.iter().take(n) {
        let syns = synonyms(graph, &tokens[i]);
        let pick = &syns[rng.random_range(0..syns.len())];
        out[i] = replace_core(&tokens[i], pick);
    }
    Some(out)
}

fn random_insertion<R: Rng + ?Sized>(
    tokens: &[String],
    n: usize,
    rng: &mut R,
    graph: &LexicalGraph,
) -> Option<Vec<String>> {
    let candidates: Vec<usize> = (0..tokens.len())
        .filter(|&i| !synonyms(graph, &tokens[i]).is_empty())
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let mut out = tokens.to_vec();
    for _ in 0..n {
        let source = candidates[rng.random_range(0..candidates.len())];
        let syns = synonyms(graph, &tokens[source]);
        let word = syns[rng.random_range(0..syns.len())].clone();
        let at = rng.random_range(0..=out.len());
        out.insert(at, word);
    }
    Some(out)
}

fn random_swap<R: Rng + ?Sized>(tokens: &[String], n: usize, rng: &mut R) -> Vec<String> {
    let mut out = tokens.to_vec();
    if out.len() < 2 {
        return out;
    }
    for _ in 0..n {
        let i = rng.random_range(0..out.len());
        let mut j = rng.random_range(0..out.len() - 1);
        if j >= i {
            j += 1;
        }
        out.swap(i, j);
    }
    out
}

/// Drops each token with probability `p`; if that would drop everything,
/// one uniformly chosen token survives.
fn random_deletion<R: Rng + ?Sized>(tokens: &[String], p: f64, rng: &mut R) -> Vec<String> {
    if tokens.len() <= 1 {
        return tokens.to_vec();
    }
    let kept: Vec<String> = tokens
        .iter()
        .filter(|_| !rng.random_bool(p.clamp(0.0, 1.0)))
        .cloned()
        .collect();
    if kept.is_empty() {
        vec![tokens[rng.random_range(0..tokens.len())].clone()]
    } else {
        kept
    }
}

/// Applies `op`, falling back to random swap when synonym replacement or
/// insertion finds no word with a synonym. Returns the op actually applied.
pub fn apply_op<R: Rng + ?Sized>(
    op: EdaOp,
    tokens: &[String],
    rate: f64,
    deletion_p: f64,
    rng: &mut R,
    graph: &LexicalGraph,
) -> (Vec<String>, EdaOp) {
    let n = edit_count(rate, tokens.len());
    let attempt = match op {
        EdaOp::SynonymReplacement => synonym_replacement(tokens, n, rng, graph),
        EdaOp::RandomInsertion => random_insertion(tokens, n, rng, graph),
        EdaOp::RandomSwap => Some(random_swap(tokens, n, rng)),
        EdaOp::RandomDeletion => Some(random_deletion(tokens, deletion_p, rng)),
    };
    match attempt {
        Some(out) => (out, op),
        None => (random_swap(tokens, n, rng), EdaOp::RandomSwap),
    }
}

/// Picks one of the four operations uniformly and applies it.
pub fn eda<R: Rng + ?Sized>(
    tokens: &[String],
    rate: f64,
    deletion_p: f64,
    rng: &mut R,
    graph: &LexicalGraph,
) -> (Vec<String>, EdaOp) {
    let op = EdaOp::ALL[rng.random_range(0..EdaOp::ALL.len())];
    apply_op(op, tokens, rate, deletion_p, rng, graph)
}
