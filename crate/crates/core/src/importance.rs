//! Token and answer contribution scores for counterfactual samples.
//!
//! Scores come from one of three backends: a precomputed score file, a
//! scoring service fronting a trained model, or the built-in lexical-overlap
//! heuristic that needs no model at all.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::JsonService;
use crate::records::read_jsonl;
use crate::text::{answer_key, core_lower};
use crate::triplet::{sentence_spans, MASK_TOKEN};

pub const SCORE_ROUTE: &str = "/v1/importance";

/// Function words scored zero by the lexical-overlap backend.
pub const STOP_WORDS: [&str; 50] = [
    "a", "an", "the", "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did",
    "of", "in", "on", "at", "to", "for", "with", "by", "from", "and", "or", "but", "this", "that",
    "these", "those", "it", "its", "there", "here", "what", "which", "who", "whom", "whose", "how",
    "where", "when", "why", "as", "into", "than", "then", "so", "has", "have",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScores {
    pub question_scores: Vec<f64>,
    pub description_scores: Vec<f64>,
    pub answer_scores: BTreeMap<String, f64>,
}

impl ImportanceScores {
    /// Checks lengths against the scored input and that every value is
    /// finite.
    pub fn validate(
        &self,
        question_id: u64,
        question_len: usize,
        description_len: usize,
    ) -> Result<()> {
        let shape = |message: String| Error::ScoreShape {
            question_id,
            message,
        };
        if self.question_scores.len() != question_len {
            return Err(shape(format!(
                "{} question scores for {question_len} tokens",
                self.question_scores.len()
            )));
        }
        if self.description_scores.len() != description_len {
            return Err(shape(format!(
                "{} description scores for {description_len} tokens",
                self.description_scores.len()
            )));
        }
        let all_finite = self
            .question_scores
            .iter()
            .chain(&self.description_scores)
            .chain(self.answer_scores.values())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(shape("non-finite score".into()));
        }
        Ok(())
    }
}

/// One line of a score file, and the scoring service's reply body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub question_id: u64,
    pub question_scores: Vec<f64>,
    pub description_scores: Vec<f64>,
    pub answer_scores: BTreeMap<String, f64>,
}

impl From<ScoreRecord> for ImportanceScores {
    fn from(r: ScoreRecord) -> Self {
        ImportanceScores {
            question_scores: r.question_scores,
            description_scores: r.description_scores,
            answer_scores: r.answer_scores,
        }
    }
}

/// Input to a scorer. Texts are whitespace tokenized; masked positions hold
/// `<mask>`.
#[derive(Debug, Clone, Copy)]
pub struct ScoreInput<'a> {
    pub question_id: u64,
    pub question: &'a [String],
    pub description: &'a [String],
    pub answers: &'a [String],
}

pub trait ImportanceScorer: Send + Sync {
    fn score(&self, input: &ScoreInput<'_>) -> Result<ImportanceScores>;
}

/// Scores `input` and checks the result's shape.
pub fn score(scorer: &dyn ImportanceScorer, input: &ScoreInput<'_>) -> Result<ImportanceScores> {
    let scores = scorer.score(input)?;
    scores.validate(
        input.question_id,
        input.question.len(),
        input.description.len(),
    )?;
    Ok(scores)
}

/// The `j` highest scoring answers, ties broken by lexicographic order.
pub fn top_answers(answer_scores: &BTreeMap<String, f64>, j: usize) -> Vec<String> {
    let mut ranked: Vec<(&String, f64)> = answer_scores.iter().map(|(a, &s)| (a, s)).collect();
    ranked.sort_by(|(a, x), (b, y)| y.total_cmp(x).then_with(|| a.cmp(b)));
    ranked.into_iter().take(j).map(|(a, _)| a.clone()).collect()
}

/// Scores looked up by question id from a line-delimited file.
#[derive(Debug, Clone, Default)]
pub struct FileScorer {
    records: HashMap<u64, ImportanceScores>,
}

impl FileScorer {
    pub fn load(path: &Path) -> Result<Self> {
        let (_, records): (_, Vec<ScoreRecord>) = read_jsonl(path)?;
        Ok(Self::from_records(records))
    }

    pub fn from_records(records: impl IntoIterator<Item = ScoreRecord>) -> Self {
        FileScorer {
            records: records
                .into_iter()
                .map(|r| (r.question_id, r.into()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl ImportanceScorer for FileScorer {
    fn score(&self, input: &ScoreInput<'_>) -> Result<ImportanceScores> {
        self.records
            .get(&input.question_id)
            .cloned()
            .ok_or_else(|| Error::MissingScores(vec![input.question_id]))
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    question_id: u64,
    question: String,
    description: String,
    answers: &'a [String],
}

/// Client for `POST /v1/importance`.
#[derive(Debug, Clone)]
pub struct ServiceScorer {
    service: JsonService,
}

impl ServiceScorer {
    pub fn new(endpoint: &str) -> Self {
        ServiceScorer {
            service: JsonService::new(endpoint, SCORE_ROUTE),
        }
    }

    pub fn with_service(service: JsonService) -> Self {
        ServiceScorer { service }
    }
}

impl ImportanceScorer for ServiceScorer {
    fn score(&self, input: &ScoreInput<'_>) -> Result<ImportanceScores> {
        let request = ScoreRequest {
            question_id: input.question_id,
            question: input.question.join(" "),
            description: input.description.join(" "),
            answers: input.answers,
        };
        let record: ScoreRecord = self.service.post(&request)?;
        if record.question_id != input.question_id {
            return Err(Error::Backend(format!(
                "score reply for question {} answered question {}",
                input.question_id, record.question_id
            )));
        }
        Ok(record.into())
    }
}

/// Model-free heuristic: a token scores 1 if it matches an answer token,
/// plus an inverse-document-frequency weight in (0, 1] computed over the
/// sentences of the input itself. Stop words and masks score 0.
///
/// An answer's score is the number of input tokens matching its words
/// (divided by its word count) plus its share of the human answers.
#[derive(Debug, Clone)]
pub struct LexicalOverlapScorer {
    stop_words: HashSet<String>,
}

impl Default for LexicalOverlapScorer {
    fn default() -> Self {
        LexicalOverlapScorer {
            stop_words: STOP_WORDS.iter().map(|w| w.to_string()).collect(),
        }
    }
}

impl LexicalOverlapScorer {
    fn is_scored(&self, token: &str, core: &str) -> bool {
        token != MASK_TOKEN && !core.is_empty() && !self.stop_words.contains(core)
    }
}

impl ImportanceScorer for LexicalOverlapScorer {
    fn score(&self, input: &ScoreInput<'_>) -> Result<ImportanceScores> {
        let q_cores: Vec<String> = input.question.iter().map(|t| core_lower(t)).collect();
        let d_cores: Vec<String> = input.description.iter().map(|t| core_lower(t)).collect();

        let mut documents: Vec<HashSet<&str>> = Vec::new();
        for (tokens, cores) in [(input.question, &q_cores), (input.description, &d_cores)] {
            for span in sentence_spans(tokens) {
                documents.push(cores[span].iter().map(String::as_str).collect());
            }
        }
        let n_docs = documents.len() as f64;
        let idf = |core: &str| {
            let df = documents.iter().filter(|d| d.contains(core)).count().max(1) as f64;
            (1.0 + n_docs / df).ln() / (1.0 + n_docs).ln()
        };

        let answer_words: HashSet<String> = input
            .answers
            .iter()
            .flat_map(|a| a.split_whitespace().map(core_lower).collect::<Vec<_>>())
            .filter(|w| !w.is_empty())
            .collect();
        let token_scores = |tokens: &[String], cores: &[String]| -> Vec<f64> {
            tokens
                .iter()
                .zip(cores)
                .map(|(tok, core)| {
                    if !self.is_scored(tok, core) {
                        return 0.0;
                    }
                    let hit = if answer_words.contains(core) {
                        1.0
                    } else {
                        0.0
                    };
                    hit + idf(core)
                })
                .collect()
        };
        let question_scores = token_scores(input.question, &q_cores);
        let description_scores = token_scores(input.description, &d_cores);

        let mut multiplicity: BTreeMap<String, usize> = BTreeMap::new();
        for a in input.answers {
            *multiplicity.entry(answer_key(a)).or_default() += 1;
        }
        let live: Vec<&str> = input
            .question
            .iter()
            .zip(&q_cores)
            .chain(input.description.iter().zip(&d_cores))
            .filter(|(tok, core)| self.is_scored(tok, core))
            .map(|(_, core)| core.as_str())
            .collect();
        let total = input.answers.len() as f64;
        let answer_scores = multiplicity
            .into_iter()
            .map(|(answer, count)| {
                let words: HashSet<String> = answer.split_whitespace().map(core_lower).collect();
                let overlap = live.iter().filter(|c| words.contains(**c)).count() as f64;
                let score = overlap / words.len().max(1) as f64 + count as f64 / (total + 1.0);
                (answer, score)
            })
            .collect();
        Ok(ImportanceScores {
            question_scores,
            description_scores,
            answer_scores,
        })
    }
}

/// Which scorer a run uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScorerBackend {
    File(PathBuf),
    Service(String),
    LexicalOverlap,
}

impl ScorerBackend {
    pub fn open(&self) -> Result<Box<dyn ImportanceScorer>> {
        Ok(match self {
            ScorerBackend::File(path) => Box::new(FileScorer::load(path)?),
            ScorerBackend::Service(endpoint) => Box::new(ServiceScorer::new(endpoint)),
            ScorerBackend::LexicalOverlap => Box::new(LexicalOverlapScorer::default()),
        })
    }
}

impl fmt::Display for ScorerBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerBackend::File(p) => write!(f, "file:{}", p.display()),
            ScorerBackend::Service(url) => write!(f, "service:{url}"),
            ScorerBackend::LexicalOverlap => f.write_str("lexical_overlap"),
        }
    }
}

impl FromStr for ScorerBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "lexical_overlap" {
            Ok(ScorerBackend::LexicalOverlap)
        } else if let Some(p) = s.strip_prefix("file:") {
            Ok(ScorerBackend::File(PathBuf::from(p)))
        } else if let Some(url) = s.strip_prefix("service:") {
            Ok(ScorerBackend::Service(url.to_owned()))
        } else {
            Err(Error::Usage(format!(
                "unknown scorer `{s}` (lexical_overlap, file:PATH, service:URL)"
            )))
        }
    }
}
