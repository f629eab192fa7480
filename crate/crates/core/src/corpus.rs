//! Loaders for the four source corpora and the join that turns them into
//! raw samples keyed by question id.
//!
//! Supported inputs:
//!
//! * VQA v2 questions: `{"questions": [{question_id, image_id, question}]}`
//! * VQA v2 annotations: `{"annotations": [{question_id, image_id,
//!   question_type, answer_type, multiple_choice_answer, answers: [..10]}]}`
//! * COCO captions: `{"annotations": [{image_id, id, caption}]}`
//! * Localized Narratives: one JSON object per line with `image_id` and
//!   `caption`; other fields are ignored.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::diag::Diagnostics;
use crate::error::{Error, Result};

/// Number of human answers per VQA question.
pub const HUMAN_ANSWERS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub question_id: u64,
    pub image_id: u64,
    #[serde(rename = "question")]
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnswerType {
    #[serde(rename = "yes/no")]
    YesNo,
    #[serde(rename = "number")]
    Number,
    #[serde(rename = "other")]
    Other,
}

impl AnswerType {
    pub const ALL: [AnswerType; 3] = [AnswerType::YesNo, AnswerType::Number, AnswerType::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            AnswerType::YesNo => "yes/no",
            AnswerType::Number => "number",
            AnswerType::Other => "other",
        }
    }
}

impl fmt::Display for AnswerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanAnswer {
    pub answer: String,
    pub answer_confidence: String,
    pub answer_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub question_id: u64,
    pub image_id: u64,
    pub question_type: String,
    pub answer_type: AnswerType,
    pub multiple_choice_answer: String,
    pub answers: Vec<HumanAnswer>,
}

impl AnnotationRecord {
    /// Answer strings in `answer_id` order.
    pub fn answer_strings(&self) -> Vec<String> {
        let mut answers: Vec<&HumanAnswer> = self.answers.iter().collect();
        answers.sort_by_key(|a| a.answer_id);
        answers.into_iter().map(|a| a.answer.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub image_id: u64,
    #[serde(rename = "id")]
    pub caption_id: u64,
    #[serde(rename = "caption")]
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrativeRecord {
    #[serde(deserialize_with = "int_or_string")]
    pub image_id: u64,
    #[serde(rename = "caption")]
    pub text: String,
}

fn int_or_string<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Int(u64),
        Str(String),
    }
    match Id::deserialize(de)? {
        Id::Int(n) => Ok(n),
        Id::Str(s) => s.trim().parse().map_err(serde::de::Error::custom),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionsFile {
    pub questions: Vec<QuestionRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationsFile {
    pub annotations: Vec<AnnotationRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionsFile {
    pub annotations: Vec<CaptionRecord>,
}

/// A joined question with everything needed to build a triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub question_id: u64,
    pub image_id: u64,
    pub question: String,
    pub question_type: String,
    pub answer_type: AnswerType,
    pub answers: Vec<String>,
    /// Ordered by caption id.
    pub captions: Vec<String>,
    pub narrative: String,
}

/// Parsed records plus the non-fatal problems found while reading them.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub records: T,
    pub diagnostics: Diagnostics,
}

fn read_json(path: &Path) -> Result<Value> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

/// Pulls `key` out of a top-level object as an array of raw records.
fn top_level_array(path: &Path, mut doc: Value, key: &str) -> Result<Vec<Value>> {
    match doc.get_mut(key).map(Value::take) {
        Some(Value::Array(items)) => Ok(items),
        Some(_) => Err(Error::Format {
            path: path.to_owned(),
            message: format!("`{key}` is not an array"),
        }),
        None => Err(Error::Format {
            path: path.to_owned(),
            message: format!("missing top-level `{key}` array"),
        }),
    }
}

fn parse_record<T: DeserializeOwned>(path: &Path, index: usize, value: Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::Schema {
        path: path.to_owned(),
        index,
        message: e.to_string(),
    })
}

pub fn load_questions(path: &Path) -> Result<Loaded<Vec<QuestionRecord>>> {
    let items = top_level_array(path, read_json(path)?, "questions")?;
    let mut diagnostics = Diagnostics::new();
    let mut seen = HashSet::with_capacity(items.len());
    let mut records = Vec::with_capacity(items.len());
    for (index, item) in items.into_iter().enumerate() {
        let record: QuestionRecord = parse_record(path, index, item)?;
        if record.text.trim().is_empty() {
            diagnostics.record(
                "empty_question",
                format!(
                    "record {index}: question {} has empty text",
                    record.question_id
                ),
            );
            continue;
        }
        if !seen.insert(record.question_id) {
            diagnostics.record(
                "duplicate_question_id",
                format!("record {index}: question {} repeated", record.question_id),
            );
            continue;
        }
        records.push(record);
    }
    log::info!("{}: {} questions", path.display(), records.len());
    Ok(Loaded {
        records,
        diagnostics,
    })
}

/// Records whose answer list does not hold exactly ten entries are rejected
/// with a diagnostic; missing fields are hard errors.
pub fn load_annotations(path: &Path) -> Result<Loaded<Vec<AnnotationRecord>>> {
    let items = top_level_array(path, read_json(path)?, "annotations")?;
    let mut diagnostics = Diagnostics::new();
    let mut seen = HashSet::with_capacity(items.len());
    let mut records = Vec::with_capacity(items.len());
    for (index, item) in items.into_iter().enumerate() {
        let record: AnnotationRecord = parse_record(path, index, item)?;
        if record.answers.len() != HUMAN_ANSWERS {
            diagnostics.record(
                "answer_count",
                format!(
                    "record {index}: question {} has {} answers",
                    record.question_id,
                    record.answers.len()
                ),
            );
            continue;
        }
        if !seen.insert(record.question_id) {
            diagnostics.record(
                "duplicate_question_id",
                format!("record {index}: question {} repeated", record.question_id),
            );
            continue;
        }
        records.push(record);
    }
    log::info!("{}: {} annotations", path.display(), records.len());
    Ok(Loaded {
        records,
        diagnostics,
    })
}

pub type CaptionMap = BTreeMap<u64, Vec<String>>;
pub type NarrativeMap = BTreeMap<u64, String>;

/// Groups captions by image, each group ordered by ascending caption id.
pub fn load_captions(path: &Path) -> Result<Loaded<CaptionMap>> {
    load_captions_from(&[path.to_owned()])
}

/// Like [`load_captions`] over several files (e.g. train2014 + val2014).
pub fn load_captions_from(paths: &[PathBuf]) -> Result<Loaded<CaptionMap>> {
    let mut diagnostics = Diagnostics::new();
    let mut grouped: BTreeMap<u64, Vec<(u64, String)>> = BTreeMap::new();
    for path in paths {
        let items = top_level_array(path, read_json(path)?, "annotations")?;
        for (index, item) in items.into_iter().enumerate() {
            let record: CaptionRecord = parse_record(path, index, item)?;
            let text = record.text.trim();
            if text.is_empty() {
                diagnostics.record(
                    "empty_caption",
                    format!("{}: caption {} is empty", path.display(), record.caption_id),
                );
                continue;
            }
            grouped
                .entry(record.image_id)
                .or_default()
                .push((record.caption_id, text.to_owned()));
        }
    }
    let records = grouped
        .into_iter()
        .map(|(image_id, mut caps)| {
            caps.sort_by_key(|(id, _)| *id);
            (image_id, caps.into_iter().map(|(_, text)| text).collect())
        })
        .collect();
    Ok(Loaded {
        records,
        diagnostics,
    })
}

pub fn load_narratives(path: &Path) -> Result<Loaded<NarrativeMap>> {
    load_narratives_from(&[path.to_owned()])
}

/// Reads line-delimited narrative files in order; the first narrative seen
/// for an image wins.
pub fn load_narratives_from(paths: &[PathBuf]) -> Result<Loaded<NarrativeMap>> {
    let mut diagnostics = Diagnostics::new();
    let mut records = NarrativeMap::new();
    for path in paths {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: NarrativeRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    diagnostics.record(
                        "malformed_narrative",
                        format!("{}:{}: {e}", path.display(), lineno + 1),
                    );
                    continue;
                }
            };
            let text = record.text.trim();
            if text.is_empty() {
                diagnostics.record(
                    "malformed_narrative",
                    format!("{}:{}: empty caption", path.display(), lineno + 1),
                );
                continue;
            }
            if records.contains_key(&record.image_id) {
                diagnostics.record(
                    "duplicate_narrative",
                    format!(
                        "{}:{}: image {}",
                        path.display(),
                        lineno + 1,
                        record.image_id
                    ),
                );
                continue;
            }
            records.insert(record.image_id, text.to_owned());
        }
    }
    Ok(Loaded {
        records,
        diagnostics,
    })
}

/// Why a question did not make it into the joined output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinGap {
    MissingAnnotation,
    MissingCaptions,
    MissingNarrative,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinReport {
    pub joined: usize,
    pub missing_annotation: Vec<u64>,
    pub missing_captions: Vec<u64>,
    pub missing_narrative: Vec<u64>,
}

impl JoinReport {
    pub fn excluded(&self) -> usize {
        self.missing_annotation.len() + self.missing_captions.len() + self.missing_narrative.len()
    }

    fn push(&mut self, gap: JoinGap, question_id: u64) {
        match gap {
            JoinGap::MissingAnnotation => self.missing_annotation.push(question_id),
            JoinGap::MissingCaptions => self.missing_captions.push(question_id),
            JoinGap::MissingNarrative => self.missing_narrative.push(question_id),
        }
    }
}

/// Joins the corpora into raw samples ordered by question id.
///
/// Each question lands either in the output or in exactly one gap category
/// of the report (checked in the order annotation, captions, narrative).
pub fn join(
    questions: &[QuestionRecord],
    annotations: &[AnnotationRecord],
    captions: &CaptionMap,
    narratives: &NarrativeMap,
) -> (Vec<RawSample>, JoinReport) {
    let by_id: HashMap<u64, &AnnotationRecord> =
        annotations.iter().map(|a| (a.question_id, a)).collect();
    let mut ordered: Vec<&QuestionRecord> = questions.iter().collect();
    ordered.sort_by_key(|q| q.question_id);

    let mut report = JoinReport::default();
    let mut samples = Vec::with_capacity(ordered.len());
    for q in ordered {
        let Some(ann) = by_id.get(&q.question_id) else {
            report.push(JoinGap::MissingAnnotation, q.question_id);
            continue;
        };
        let caps = match captions.get(&q.image_id) {
            Some(c) if !c.is_empty() => c,
            _ => {
                report.push(JoinGap::MissingCaptions, q.question_id);
                continue;
            }
        };
        let Some(narrative) = narratives.get(&q.image_id) else {
            report.push(JoinGap::MissingNarrative, q.question_id);
            continue;
        };
        samples.push(RawSample {
            question_id: q.question_id,
            image_id: q.image_id,
            question: q.text.clone(),
            question_type: ann.question_type.clone(),
            answer_type: ann.answer_type,
            answers: ann.answer_strings(),
            captions: caps.clone(),
            narrative: narrative.clone(),
        });
    }
    report.joined = samples.len();
    (samples, report)
}
