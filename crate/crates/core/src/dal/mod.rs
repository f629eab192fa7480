//! Language-side augmentation: EDA, back translation and contextual word
//! replacement or insertion, applied to either the question or the
//! description.

pub mod client;
pub mod eda;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::lexicon::LexicalGraph;
use crate::text::{normalize_ws, owned_tokens, replace_core};
use crate::triplet::{Origin, Triplet};

pub use client::{
    CachedInfiller, CachedTranslator, DictionaryInfiller, DictionaryTranslator, IdentityInfiller,
    IdentityTranslator, InfillMode, Infiller, ResponseCache, ServiceInfiller, ServiceTranslator,
    Translator,
};
pub use eda::{eda, edit_count, EdaOp};

#[derive(Debug, Clone, PartialEq)]
pub struct DalConfig {
    /// EDA edit rate α.
    pub eda_rate: f64,
    /// Per-word deletion probability for random deletion.
    pub eda_deletion_p: f64,
    /// Positions touched by contextual replace/insert; `None` uses the EDA
    /// edit count.
    pub contextual_k: Option<usize>,
    pub source_lang: String,
    pub pivot_lang: String,
}

impl Default for DalConfig {
    fn default() -> Self {
        DalConfig {
            eda_rate: 0.1,
            eda_deletion_p: 0.1,
            contextual_k: None,
            source_lang: "en".into(),
            pivot_lang: "de".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Question,
    Description,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DalTechnique {
    Eda,
    BackTranslation,
    ContextualReplace,
    ContextualInsert,
}

impl DalTechnique {
    pub const ALL: [DalTechnique; 4] = [
        DalTechnique::Eda,
        DalTechnique::BackTranslation,
        DalTechnique::ContextualReplace,
        DalTechnique::ContextualInsert,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DalTechnique::Eda => "eda",
            DalTechnique::BackTranslation => "bt",
            DalTechnique::ContextualReplace => "cwr",
            DalTechnique::ContextualInsert => "cwi",
        }
    }

    pub fn origin(self, target: Target) -> Origin {
        use DalTechnique::*;
        match (self, target) {
            (Eda, Target::Question) => Origin::EdaQuestion,
            (Eda, Target::Description) => Origin::EdaDescription,
            (BackTranslation, Target::Question) => Origin::BackTranslationQuestion,
            (BackTranslation, Target::Description) => Origin::BackTranslationDescription,
            (ContextualReplace, Target::Question) => Origin::ContextualReplaceQuestion,
            (ContextualReplace, Target::Description) => Origin::ContextualReplaceDescription,
            (ContextualInsert, Target::Question) => Origin::ContextualInsertQuestion,
            (ContextualInsert, Target::Description) => Origin::ContextualInsertDescription,
        }
    }
}

impl fmt::Display for DalTechnique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DalTechnique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DalTechnique::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown language technique `{s}`")))
    }
}

/// Round trip through the pivot language. `None` when the paraphrase is
/// empty or equal to the input after whitespace normalization.
pub fn back_translate(text: &str, client: &dyn Translator) -> Result<Option<String>> {
    let out = normalize_ws(&client.round_trip(text)?);
    Ok((!out.is_empty() && out != normalize_ws(text)).then_some(out))
}

fn contextual_positions<R: Rng + ?Sized>(
    len: usize,
    config: &DalConfig,
    rng: &mut R,
) -> Vec<usize> {
    let k = config
        .contextual_k
        .unwrap_or_else(|| edit_count(config.eda_rate, len))
        .min(len);
    let mut picked = index::sample(rng, len, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Replaces the words at k random positions, left to right, each request
/// seeing the replacements already made.
pub fn contextual_replace<R: Rng + ?Sized>(
    tokens: &[String],
    client: &dyn Infiller,
    config: &DalConfig,
    rng: &mut R,
) -> Result<Vec<String>> {
    let mut out = tokens.to_vec();
    for pos in contextual_positions(tokens.len(), config, rng) {
        let word = client.infill(&out, pos, InfillMode::Replace)?;
        out[pos] = replace_core(&out[pos], &word);
    }
    Ok(out)
}

/// Inserts one word after each of k random positions. Positions are
/// visited right to left so earlier indices stay valid.
pub fn contextual_insert<R: Rng + ?Sized>(
    tokens: &[String],
    client: &dyn Infiller,
    config: &DalConfig,
    rng: &mut R,
) -> Result<Vec<String>> {
    let mut out = tokens.to_vec();
    for pos in contextual_positions(tokens.len(), config, rng)
        .into_iter()
        .rev()
    {
        let word = client.infill(&out, pos, InfillMode::Insert)?;
        out.insert(pos + 1, word);
    }
    Ok(out)
}

/// Backends the language techniques need; EDA needs only the graph.
#[derive(Clone, Copy)]
pub struct DalClients<'a> {
    pub graph: &'a LexicalGraph,
    pub translator: Option<&'a dyn Translator>,
    pub infiller: Option<&'a dyn Infiller>,
}

/// One synthetic sample from `s`, rewriting only the targeted field.
/// Answers and question type are carried over. Client errors propagate so
/// the caller can count them.
pub fn apply_dal<R: Rng + ?Sized>(
    s: &Triplet,
    technique: DalTechnique,
    target: Target,
    config: &DalConfig,
    clients: DalClients<'_>,
    rng: &mut R,
    diag: &mut Diagnostics,
) -> Result<Option<Triplet>> {
    let text = match target {
        Target::Question => &s.question,
        Target::Description => &s.description,
    };
    let tokens = owned_tokens(text);
    if tokens.is_empty() {
        diag.record(
            "empty_text",
            format!("{}: nothing to rewrite for {technique}", s.question_id),
        );
        return Ok(None);
    }
    let missing =
        |what: &str| Error::Usage(format!("technique {technique} needs a {what} backend"));
    let rewritten = match technique {
        DalTechnique::Eda => {
            let (out, _) = eda(
                &tokens,
                config.eda_rate,
                config.eda_deletion_p,
                rng,
                clients.graph,
            );
            out.join(" ")
        }
        DalTechnique::BackTranslation => {
            let client = clients.translator.ok_or_else(|| missing("translation"))?;
            match back_translate(text, client)? {
                Some(out) => out,
                None => {
                    diag.record(
                        "bt_unchanged",
                        format!("{}: paraphrase equals input", s.question_id),
                    );
                    return Ok(None);
                }
            }
        }
        DalTechnique::ContextualReplace => {
            let client = clients.infiller.ok_or_else(|| missing("infill"))?;
            contextual_replace(&tokens, client, config, rng)?.join(" ")
        }
        DalTechnique::ContextualInsert => {
            let client = clients.infiller.ok_or_else(|| missing("infill"))?;
            contextual_insert(&tokens, client, config, rng)?.join(" ")
        }
    };
    let mut out = s.derive(technique.origin(target), 0);
    match target {
        Target::Question => out.question = rewritten,
        Target::Description => out.description = rewritten,
    }
    Ok(Some(out))
}
