//! VQA accuracy, per-answer-type breakdowns and two-system overlap buckets.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotationRecord, AnswerType, HUMAN_ANSWERS};
use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::text::answer_key;
use crate::triplet::Triplet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub question_id: u64,
    pub answer: String,
}

pub type Predictions = BTreeMap<u64, String>;

/// Reads predictions as JSON lines or as one JSON array. Duplicate ids are
/// a schema error.
pub fn load_predictions(path: &Path) -> Result<Predictions> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<PredictionRecord> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_owned(),
            message: e.to_string(),
        })?
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Schema {
                    path: path.to_owned(),
                    index: i,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?
    };
    let mut out = Predictions::new();
    for (index, r) in records.into_iter().enumerate() {
        let qid = r.question_id;
        if out.insert(qid, r.answer).is_some() {
            return Err(Error::Schema {
                path: path.to_owned(),
                index,
                message: format!("duplicate prediction for question {qid}"),
            });
        }
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, predictions: &Predictions) -> Result<()> {
    let records: Vec<PredictionRecord> = predictions
        .iter()
        .map(|(&question_id, answer)| PredictionRecord {
            question_id,
            answer: answer.clone(),
        })
        .collect();
    crate::records::write_jsonl(path, None, &records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldEntry {
    pub answer_type: AnswerType,
    pub answers: Vec<String>,
}

/// Reference answers keyed by question id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gold(pub BTreeMap<u64, GoldEntry>);

impl Gold {
    pub fn from_annotations(records: &[AnnotationRecord]) -> Self {
        Gold(
            records
                .iter()
                .map(|r| {
                    (
                        r.question_id,
                        GoldEntry {
                            answer_type: r.answer_type,
                            answers: r.answer_strings(),
                        },
                    )
                })
                .collect(),
        )
    }

    pub fn from_triplets(triplets: &[Triplet]) -> Self {
        Gold(
            triplets
                .iter()
                .map(|t| {
                    (
                        t.question_id,
                        GoldEntry {
                            answer_type: t.answer_type,
                            answers: t.answers.clone(),
                        },
                    )
                })
                .collect(),
        )
    }

    /// Annotation JSON, or a triplet file when the extension is `.jsonl`.
    pub fn load(path: &Path) -> Result<(Self, Diagnostics)> {
        if path.extension().is_some_and(|e| e == "jsonl") {
            let (_, triplets) = crate::records::read_jsonl::<Triplet>(path)?;
            Ok((Self::from_triplets(&triplets), Diagnostics::new()))
        } else {
            let loaded = crate::corpus::load_annotations(path)?;
            Ok((Self::from_annotations(&loaded.records), loaded.diagnostics))
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Answer string normalization applied before matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Lowercase, trim, collapse whitespace.
    #[default]
    Simple,
    /// Simple plus the VQA evaluation script's punctuation, number-word,
    /// article and contraction handling.
    Official,
}

impl Normalization {
    pub fn apply(self, answer: &str) -> String {
        match self {
            Normalization::Simple => answer_key(answer),
            Normalization::Official => official_normalize(answer),
        }
    }
}

const PUNCTUATION: [char; 21] = [
    ';', '/', '[', ']', '"', '{', '}', '(', ')', '=', '+', '\\', '_', '-', '>', '<', '@', '`', ',',
    '?', '!',
];

const ARTICLES: [&str; 3] = ["a", "an", "the"];

const NUMBER_WORDS: [(&str, &str); 12] = [
    ("none", "0"),
    ("zero", "0"),
    ("one", "1"),
    ("two", "2"),
    ("three", "3"),
    ("four", "4"),
    ("five", "5"),
    ("six", "6"),
    ("seven", "7"),
    ("eight", "8"),
    ("nine", "9"),
    ("ten", "10"),
];

const CONTRACTIONS: &[(&str, &str)] = &[
    ("aint", "ain't"),
    ("arent", "aren't"),
    ("cant", "can't"),
    ("couldve", "could've"),
    ("couldnt", "couldn't"),
    ("couldn'tve", "couldn't've"),
    ("couldnt've", "couldn't've"),
    ("didnt", "didn't"),
    ("doesnt", "doesn't"),
    ("dont", "don't"),
    ("hadnt", "hadn't"),
    ("hasnt", "hasn't"),
    ("havent", "haven't"),
    ("hed", "he'd"),
    ("hes", "he's"),
    ("howd", "how'd"),
    ("howll", "how'll"),
    ("hows", "how's"),
    ("Im", "I'm"),
    ("Ive", "I've"),
    ("isnt", "isn't"),
    ("itd", "it'd"),
    ("itll", "it'll"),
    ("let's", "let's"),
    ("maam", "ma'am"),
    ("mightnt", "mightn't"),
    ("mightve", "might've"),
    ("mustnt", "mustn't"),
    ("mustve", "must've"),
    ("neednt", "needn't"),
    ("notve", "not've"),
    ("oclock", "o'clock"),
    ("oughtnt", "oughtn't"),
    ("shant", "shan't"),
    ("shed", "she'd"),
    ("shes", "she's"),
    ("shouldve", "should've"),
    ("shouldnt", "shouldn't"),
    ("somebodys", "somebody's"),
    ("someones", "someone's"),
    ("somethings", "something's"),
    ("thats", "that's"),
    ("thered", "there'd"),
    ("therere", "there're"),
    ("theres", "there's"),
    ("theyd", "they'd"),
    ("theyll", "they'll"),
    ("theyre", "they're"),
    ("theyve", "they've"),
    ("twas", "'twas"),
    ("wasnt", "wasn't"),
    ("weve", "we've"),
    ("werent", "weren't"),
    ("whatll", "what'll"),
    ("whatre", "what're"),
    ("whats", "what's"),
    ("whatve", "what've"),
    ("whens", "when's"),
    ("whered", "where'd"),
    ("wheres", "where's"),
    ("whereve", "where've"),
    ("whod", "who'd"),
    ("wholl", "who'll"),
    ("whos", "who's"),
    ("whove", "who've"),
    ("whyll", "why'll"),
    ("whyre", "why're"),
    ("whys", "why's"),
    ("wont", "won't"),
    ("wouldve", "would've"),
    ("wouldnt", "wouldn't"),
    ("yall", "y'all"),
    ("youd", "you'd"),
    ("youll", "you'll"),
    ("youre", "you're"),
    ("youve", "you've"),
];

fn contractions() -> &'static HashMap<&'static str, &'static str> {
    static MAP: OnceLock<HashMap<&str, &str>> = OnceLock::new();
    MAP.get_or_init(|| CONTRACTIONS.iter().copied().collect())
}

fn has_digit_comma_digit(chars: &[char]) -> bool {
    chars
        .windows(3)
        .any(|w| w[0].is_ascii_digit() && w[1] == ',' && w[2].is_ascii_digit())
}

fn process_punctuation(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let numeric_comma = has_digit_comma_digit(&chars);
    let mut out = text.to_owned();
    for p in PUNCTUATION {
        if !text.contains(p) {
            continue;
        }
        let spaced = text.contains(&format!("{p} ")) || text.contains(&format!(" {p}"));
        let with = if spaced || numeric_comma { "" } else { " " };
        out = out.replace(p, with);
    }
    // Periods go unless a digit follows.
    let chars: Vec<char> = out.chars().collect();
    chars
        .iter()
        .enumerate()
        .filter(|&(i, &c)| c != '.' || chars.get(i + 1).is_some_and(|n| n.is_ascii_digit()))
        .map(|(_, &c)| c)
        .collect()
}

fn process_digits_articles(text: &str) -> String {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower
        .split_whitespace()
        .filter_map(|w| {
            let w = NUMBER_WORDS
                .iter()
                .find(|(word, _)| *word == w)
                .map_or(w, |(_, digit)| *digit);
            (!ARTICLES.contains(&w)).then_some(w)
        })
        .map(|w| contractions().get(w).copied().unwrap_or(w))
        .collect();
    words.join(" ")
}

pub fn official_normalize(answer: &str) -> String {
    let simple = answer_key(answer);
    process_digits_articles(&process_punctuation(&simple))
}

/// Accuracy for `k` matching human answers out of ten.
pub fn closed_form_accuracy(k: usize) -> f64 {
    let k = k.min(HUMAN_ANSWERS) as f64;
    let n = HUMAN_ANSWERS as f64;
    (k * ((k - 1.0) / 3.0).min(1.0) + (n - k) * (k / 3.0).min(1.0)) / n
}

/// Mean over the ten leave-one-out subsets of `min(matches / 3, 1)`.
pub fn vqa_accuracy(prediction: &str, answers: &[String], norm: Normalization) -> Result<f64> {
    if answers.len() != HUMAN_ANSWERS {
        return Err(Error::AnswerCount(answers.len()));
    }
    let pred = norm.apply(prediction);
    let hits: Vec<bool> = answers.iter().map(|a| norm.apply(a) == pred).collect();
    let total: f64 = (0..HUMAN_ANSWERS)
        .map(|left_out| {
            let matches = hits
                .iter()
                .enumerate()
                .filter(|&(i, &h)| i != left_out && h)
                .count();
            (matches as f64 / 3.0).min(1.0)
        })
        .sum();
    Ok(total / HUMAN_ANSWERS as f64)
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Percentages by answer type plus the question-weighted overall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub yes_no: Option<f64>,
    pub number: Option<f64>,
    pub other: Option<f64>,
    pub overall: f64,
    pub counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_question: BTreeMap<u64, f64>,
}

impl AccuracyReport {
    pub fn category(&self, t: AnswerType) -> Option<f64> {
        match t {
            AnswerType::YesNo => self.yes_no,
            AnswerType::Number => self.number,
            AnswerType::Other => self.other,
        }
    }

    /// Sets `gap` to this overall minus the baseline's.
    pub fn with_baseline(mut self, baseline: &AccuracyReport) -> Self {
        self.gap = Some(round2(self.overall - baseline.overall));
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Format {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }
}

/// `+7.52`, `-1.00`, `0.00`.
pub fn format_gap(gap: f64) -> String {
    let g = round2(gap);
    if g == 0.0 {
        "0.00".into()
    } else {
        format!("{g:+.2}")
    }
}

impl fmt::Display for AccuracyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        write!(
            f,
            "{:>8} {:>8} {:>8} {:>8}",
            "Yes/No", "Number", "Other", "Overall"
        )?;
        if self.gap.is_some() {
            write!(f, " {:>8}", "Gap")?;
        }
        writeln!(f)?;
        write!(
            f,
            "{:>8} {:>8} {:>8} {:>8.2}",
            cell(self.yes_no),
            cell(self.number),
            cell(self.other),
            self.overall
        )?;
        if let Some(g) = self.gap {
            write!(f, " {:>8}", format_gap(g))?;
        }
        writeln!(f)
    }
}

/// Scores every gold question; questions without a prediction score 0.
pub fn evaluate(
    predictions: &Predictions,
    gold: &Gold,
    norm: Normalization,
) -> Result<(AccuracyReport, Diagnostics)> {
    let unknown: Vec<u64> = predictions
        .keys()
        .filter(|q| !gold.0.contains_key(q))
        .copied()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::MissingAnnotations(unknown));
    }
    let scored: Vec<(u64, AnswerType, Option<f64>)> = gold
        .0
        .par_iter()
        .map(|(&qid, g)| {
            let acc = match predictions.get(&qid) {
                Some(p) => Some(vqa_accuracy(p, &g.answers, norm)?),
                None => None,
            };
            Ok((qid, g.answer_type, acc))
        })
        .collect::<Result<_>>()?;

    let mut diag = Diagnostics::new();
    let mut sums: BTreeMap<AnswerType, (f64, usize)> = BTreeMap::new();
    let mut per_question = BTreeMap::new();
    let mut total = 0.0;
    for (qid, t, acc) in scored {
        let acc = acc.unwrap_or_else(|| {
            diag.record(
                "missing_prediction",
                format!("{qid}: no prediction, scored 0"),
            );
            0.0
        });
        let e = sums.entry(t).or_default();
        e.0 += acc;
        e.1 += 1;
        total += acc;
        per_question.insert(qid, acc);
    }
    if gold.is_empty() {
        diag.record("empty_gold", "no questions to score");
    }
    let pct = |t: AnswerType| sums.get(&t).map(|&(s, n)| round2(100.0 * s / n as f64));
    let report = AccuracyReport {
        yes_no: pct(AnswerType::YesNo),
        number: pct(AnswerType::Number),
        other: pct(AnswerType::Other),
        overall: if gold.is_empty() {
            0.0
        } else {
            round2(100.0 * total / gold.len() as f64)
        },
        counts: AnswerType::ALL
            .into_iter()
            .map(|t| (t.as_str().to_owned(), sums.get(&t).map_or(0, |s| s.1)))
            .collect(),
        gap: None,
        per_question,
    };
    Ok((report, diag))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub count: usize,
    pub ratio: f64,
}

/// 2x2 binary-correctness outcomes on the shared questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub shared: usize,
    pub both_correct: Bucket,
    pub only_a_correct: Bucket,
    pub only_b_correct: Bucket,
    pub both_wrong: Bucket,
}

impl OverlapReport {
    fn from_counts(both: usize, only_a: usize, only_b: usize, neither: usize) -> Self {
        let shared = both + only_a + only_b + neither;
        let bucket = |count| Bucket {
            count,
            ratio: count as f64 / shared as f64,
        };
        OverlapReport {
            shared,
            both_correct: bucket(both),
            only_a_correct: bucket(only_a),
            only_b_correct: bucket(only_b),
            both_wrong: bucket(neither),
        }
    }

    /// The report with systems A and B exchanged.
    pub fn swapped(&self) -> Self {
        OverlapReport {
            only_a_correct: self.only_b_correct,
            only_b_correct: self.only_a_correct,
            ..self.clone()
        }
    }
}

impl fmt::Display for OverlapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16} {:>8} {:>8}", "bucket", "count", "ratio")?;
        for (name, b) in [
            ("both_correct", self.both_correct),
            ("only_a_correct", self.only_a_correct),
            ("only_b_correct", self.only_b_correct),
            ("both_wrong", self.both_wrong),
        ] {
            writeln!(f, "{name:<16} {:>8} {:>8.4}", b.count, b.ratio)?;
        }
        writeln!(f, "{:<16} {:>8}", "shared", self.shared)
    }
}

/// Buckets the questions both systems answered by whether each prediction
/// is among the human answers.
pub fn overlap(
    a: &Predictions,
    b: &Predictions,
    gold: &Gold,
    norm: Normalization,
) -> Result<OverlapReport> {
    let shared: Vec<u64> = a.keys().filter(|q| b.contains_key(q)).copied().collect();
    if shared.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let unknown: Vec<u64> = shared
        .iter()
        .filter(|q| !gold.0.contains_key(q))
        .copied()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::MissingAnnotations(unknown));
    }
    let correct = |pred: &str, answers: &[String]| {
        let p = norm.apply(pred);
        answers.iter().any(|x| norm.apply(x) == p)
    };
    let mut counts = [0usize; 4];
    for q in &shared {
        let answers = &gold.0[q].answers;
        let idx = match (correct(&a[q], answers), correct(&b[q], answers)) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        counts[idx] += 1;
    }
    Ok(OverlapReport::from_counts(
        counts[0], counts[1], counts[2], counts[3],
    ))
}
