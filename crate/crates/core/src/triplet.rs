//! Training triplets `(question, description, answers)`, description
//! variants, model input assembly and the description truncation protocol.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{AnswerType, RawSample};
use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::seed::{fnv1a, mix, rng_from_seed, sample_seed};
use crate::text::{normalize_ws, split_affixes};

pub const CLS_TOKEN: &str = "<s>";
pub const SEP_TOKEN: &str = "</s>";
pub const MASK_TOKEN: &str = "<mask>";

/// Captions used by the whole description.
pub const WHOLE_CAPTIONS: usize = 5;

/// Where a triplet came from: the corpus itself or one augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Original,
    Hypernym,
    Hyponym,
    ColorInversion,
    Adversarial,
    CssQuestion,
    CssDescription,
    EdaQuestion,
    EdaDescription,
    BackTranslationQuestion,
    BackTranslationDescription,
    ContextualReplaceQuestion,
    ContextualReplaceDescription,
    ContextualInsertQuestion,
    ContextualInsertDescription,
}

impl Origin {
    pub const ALL: [Origin; 15] = [
        Origin::Original,
        Origin::Hypernym,
        Origin::Hyponym,
        Origin::ColorInversion,
        Origin::Adversarial,
        Origin::CssQuestion,
        Origin::CssDescription,
        Origin::EdaQuestion,
        Origin::EdaDescription,
        Origin::BackTranslationQuestion,
        Origin::BackTranslationDescription,
        Origin::ContextualReplaceQuestion,
        Origin::ContextualReplaceDescription,
        Origin::ContextualInsertQuestion,
        Origin::ContextualInsertDescription,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Original => "original",
            Origin::Hypernym => "hypernym",
            Origin::Hyponym => "hyponym",
            Origin::ColorInversion => "color_inversion",
            Origin::Adversarial => "adversarial",
            Origin::CssQuestion => "css_question",
            Origin::CssDescription => "css_description",
            Origin::EdaQuestion => "eda_q",
            Origin::EdaDescription => "eda_d",
            Origin::BackTranslationQuestion => "bt_q",
            Origin::BackTranslationDescription => "bt_d",
            Origin::ContextualReplaceQuestion => "cwr_q",
            Origin::ContextualReplaceDescription => "cwr_d",
            Origin::ContextualInsertQuestion => "cwi_q",
            Origin::ContextualInsertDescription => "cwi_d",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Origin::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown origin `{s}`")))
    }
}

impl Serialize for Origin {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Origin {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One sample `(q, d, A)` with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub question_id: u64,
    pub parent_question_id: u64,
    pub question: String,
    pub description: String,
    pub answers: Vec<String>,
    pub question_type: String,
    pub answer_type: AnswerType,
    pub origin: Origin,
}

/// On-disk form: the triplet plus its assembled model input.
#[derive(Serialize, Deserialize)]
struct TripletRecord {
    question_id: u64,
    parent_question_id: u64,
    question: String,
    description: String,
    answers: Vec<String>,
    question_type: String,
    answer_type: AnswerType,
    origin: Origin,
    #[serde(default)]
    sequence: String,
}

impl Serialize for Triplet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TripletRecord {
            question_id: self.question_id,
            parent_question_id: self.parent_question_id,
            question: self.question.clone(),
            description: self.description.clone(),
            answers: self.answers.clone(),
            question_type: self.question_type.clone(),
            answer_type: self.answer_type,
            origin: self.origin,
            sequence: self.sequence().into_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Triplet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = TripletRecord::deserialize(d)?;
        Ok(Triplet {
            question_id: r.question_id,
            parent_question_id: r.parent_question_id,
            question: r.question,
            description: r.description,
            answers: r.answers,
            question_type: r.question_type,
            answer_type: r.answer_type,
            origin: r.origin,
        })
    }
}

impl Triplet {
    pub fn original(sample: &RawSample, description: String) -> Self {
        Triplet {
            question_id: sample.question_id,
            parent_question_id: sample.question_id,
            question: normalize_ws(&sample.question),
            description,
            answers: sample.answers.clone(),
            question_type: sample.question_type.clone(),
            answer_type: sample.answer_type,
            origin: Origin::Original,
        }
    }

    /// A child of `self` produced by `origin`; the `ordinal`-th such child.
    pub fn derive(&self, origin: Origin, ordinal: u32) -> Self {
        Triplet {
            question_id: synthetic_question_id(self.question_id, origin, ordinal),
            parent_question_id: self.question_id,
            origin,
            ..self.clone()
        }
    }

    pub fn question_tokens(&self) -> Vec<&str> {
        self.question.split_whitespace().collect()
    }

    pub fn description_tokens(&self) -> Vec<&str> {
        self.description.split_whitespace().collect()
    }

    pub fn sequence(&self) -> Sequence {
        assemble_sequence(&self.question, &self.description)
    }

    /// Same content as `other`, ignoring ids and provenance.
    pub fn same_content(&self, other: &Triplet) -> bool {
        self.question == other.question
            && self.description == other.description
            && self.answers == other.answers
    }
}

/// Stable id for a synthetic sample. Bit 62 is set so it cannot collide with
/// corpus question ids.
pub fn synthetic_question_id(parent: u64, origin: Origin, ordinal: u32) -> u64 {
    let h = mix(mix(parent, fnv1a(origin.as_str())), u64::from(ordinal));
    (1 << 62) | (h & ((1 << 62) - 1))
}

/// Which textual description accompanies the question.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptionMode {
    /// `k` captions drawn at random, `1 <= k <= 5`.
    Captions(u8),
    Narrative,
    /// The narrative followed by five captions.
    Whole,
    None,
}

impl DescriptionMode {
    pub fn captions(k: u8) -> Result<Self> {
        if (1..=WHOLE_CAPTIONS as u8).contains(&k) {
            Ok(DescriptionMode::Captions(k))
        } else {
            Err(Error::Usage(format!("caption count {k} outside 1..=5")))
        }
    }

    /// Every mode in report order.
    pub fn all() -> Vec<DescriptionMode> {
        let mut modes = vec![DescriptionMode::None];
        modes.extend((1..=WHOLE_CAPTIONS as u8).map(DescriptionMode::Captions));
        modes.push(DescriptionMode::Narrative);
        modes.push(DescriptionMode::Whole);
        modes
    }
}

impl fmt::Display for DescriptionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DescriptionMode::Captions(k) => write!(f, "captions:{k}"),
            DescriptionMode::Narrative => f.write_str("narrative"),
            DescriptionMode::Whole => f.write_str("whole"),
            DescriptionMode::None => f.write_str("none"),
        }
    }
}

impl FromStr for DescriptionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(DescriptionMode::None),
            "narrative" => Ok(DescriptionMode::Narrative),
            "whole" => Ok(DescriptionMode::Whole),
            other => match other.strip_prefix("captions:") {
                Some(k) => {
                    let k: u8 = k
                        .parse()
                        .map_err(|_| Error::Usage(format!("bad caption count in `{other}`")))?;
                    DescriptionMode::captions(k)
                }
                None => Err(Error::Usage(format!(
                    "unknown description mode `{other}` (none, narrative, whole, captions:k)"
                ))),
            },
        }
    }
}

/// Builds the description text for `sample`. `seed` is the per-sample seed.
///
/// Returns a diagnostic message when fewer captions were available than the
/// mode asks for; all available captions are used in that case.
pub fn build_description(
    sample: &RawSample,
    mode: DescriptionMode,
    seed: u64,
) -> (String, Option<String>) {
    let caps = &sample.captions;
    match mode {
        DescriptionMode::None => (String::new(), None),
        DescriptionMode::Narrative => (normalize_ws(&sample.narrative), None),
        DescriptionMode::Whole => {
            let short = (caps.len() < WHOLE_CAPTIONS).then(|| {
                format!(
                    "question {}: {} captions available, wanted {WHOLE_CAPTIONS}",
                    sample.question_id,
                    caps.len()
                )
            });
            let parts = std::iter::once(sample.narrative.as_str())
                .chain(caps.iter().take(WHOLE_CAPTIONS).map(String::as_str));
            (normalize_ws(&parts.collect::<Vec<_>>().join(" ")), short)
        }
        DescriptionMode::Captions(k) => {
            let k = usize::from(k);
            if caps.len() <= k {
                let short = (caps.len() < k).then(|| {
                    format!(
                        "question {}: {} captions available, wanted {k}",
                        sample.question_id,
                        caps.len()
                    )
                });
                return (normalize_ws(&caps.join(" ")), short);
            }
            let mut rng = rng_from_seed(mix(seed, fnv1a("captions")));
            let mut picked = rand::seq::index::sample(&mut rng, caps.len(), k).into_vec();
            picked.sort_unstable();
            let text = picked
                .iter()
                .map(|&i| caps[i].as_str())
                .collect::<Vec<_>>()
                .join(" ");
            (normalize_ws(&text), None)
        }
    }
}

/// The flattened model input `<s> q </s> </s> d </s>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sequence(String);

impl Sequence {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn token_count(&self) -> usize {
        self.0.split_whitespace().count()
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn assemble_sequence(question: &str, description: &str) -> Sequence {
    let mut parts: Vec<&str> = vec![CLS_TOKEN];
    parts.extend(question.split_whitespace());
    parts.extend([SEP_TOKEN, SEP_TOKEN]);
    parts.extend(description.split_whitespace());
    parts.push(SEP_TOKEN);
    Sequence(parts.join(" "))
}

fn ends_sentence(token: &str) -> bool {
    let (_, core, suffix) = split_affixes(token);
    let tail = if core.is_empty() { token } else { suffix };
    tail.contains(['.', '!', '?'])
}

/// Token ranges of the sentences in `tokens`. A sentence ends at a token
/// carrying terminal punctuation; trailing tokens form a final sentence.
pub fn sentence_spans<S: AsRef<str>>(tokens: &[S]) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, tok) in tokens.iter().enumerate() {
        if ends_sentence(tok.as_ref()) {
            spans.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < tokens.len() {
        spans.push(start..tokens.len());
    }
    spans
}

/// `floor(rate * words)`, tolerant of the representation error in decimal
/// rates such as 0.3.
pub fn words_to_remove(rate: f64, words: usize) -> usize {
    let exact = rate * words as f64;
    let n = (exact + 1e-9).floor() as usize;
    n.min(words)
}

/// Removes `floor(rate * D)` description words: sentences are shuffled with
/// `seed`, words are dropped from the end of the shuffled sequence, and the
/// survivors are emitted in their original order.
pub fn truncate_description(description: &str, rate: f64, seed: u64) -> Result<String> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Usage(format!(
            "truncation rate {rate} outside [0, 1]"
        )));
    }
    let tokens: Vec<&str> = description.split_whitespace().collect();
    let mut remove = words_to_remove(rate, tokens.len());
    if remove == 0 {
        return Ok(tokens.join(" "));
    }
    let spans = sentence_spans(&tokens);
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.shuffle(&mut rng_from_seed(mix(seed, fnv1a("truncate"))));

    // Surviving word count per sentence: cut from the last shuffled sentence
    // backwards.
    let mut keep: Vec<usize> = spans.iter().map(|s| s.len()).collect();
    for &sentence in order.iter().rev() {
        if remove == 0 {
            break;
        }
        let cut = remove.min(keep[sentence]);
        keep[sentence] -= cut;
        remove -= cut;
    }
    let survivors: Vec<&str> = spans
        .iter()
        .zip(&keep)
        .flat_map(|(span, &k)| tokens[span.start..span.start + k].iter().copied())
        .collect();
    Ok(survivors.join(" "))
}

/// Builds one original triplet per sample, in question id order.
pub fn make_triplets(
    samples: &[RawSample],
    mode: DescriptionMode,
    global_seed: u64,
) -> (Vec<Triplet>, Diagnostics) {
    let built: Vec<(Triplet, Option<String>)> = samples
        .par_iter()
        .map(|s| {
            let (d, diag) = build_description(s, mode, sample_seed(global_seed, s.question_id));
            (Triplet::original(s, d), diag)
        })
        .collect();
    let mut diagnostics = Diagnostics::new();
    let mut triplets = Vec::with_capacity(built.len());
    for (t, diag) in built {
        if let Some(msg) = diag {
            diagnostics.record("fewer_captions", msg);
        }
        triplets.push(t);
    }
    triplets.sort_by_key(|t| t.question_id);
    (triplets, diagnostics)
}
