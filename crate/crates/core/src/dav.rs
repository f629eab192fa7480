//! VQA-specific augmentations: hypernym/hyponym replacement, color
//! inversion, adversarial object replacement and counterfactual samples.
//!
//! Each technique maps one triplet to zero or more synthetic triplets. Word
//! matching compares the lowercase core of description tokens (see
//! [`crate::text`]) with whole answers; replacements keep the token's
//! surrounding punctuation.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::Rng;

use crate::diag::Diagnostics;
use crate::error::Result;
use crate::importance::{score, top_answers, ImportanceScorer, ScoreInput};
use crate::lexicon::{
    is_color_question, AdversarialIndex, ColorSet, LexicalGraph, ObjectClassSet, QuestionTypeSet,
    Relation,
};
use crate::text::{answer_key, core_lower, is_single_token, owned_tokens, replace_core};
use crate::triplet::{Origin, Triplet, MASK_TOKEN};

#[derive(Debug, Clone)]
pub struct DavConfig {
    /// Critical words masked by counterfactual samples.
    pub top_d: usize,
    /// Answers removed by counterfactual samples.
    pub top_j: usize,
    pub colors: ColorSet,
    pub color_question_types: QuestionTypeSet,
    pub objects: ObjectClassSet,
    /// Skip adversarial samples that would relabel an answer that is
    /// already mostly "no".
    pub skip_no_majority: bool,
}

impl Default for DavConfig {
    fn default() -> Self {
        DavConfig {
            top_d: 10,
            top_j: 5,
            colors: ColorSet::default(),
            color_question_types: QuestionTypeSet::default(),
            objects: ObjectClassSet::default(),
            skip_no_majority: false,
        }
    }
}

fn replace_tokens(text: &str, map: &HashMap<String, String>) -> String {
    text.split_whitespace()
        .map(|tok| match map.get(&core_lower(tok)) {
            Some(new) => replace_core(tok, new),
            None => tok.to_owned(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn replace_answers(answers: &[String], map: &HashMap<String, String>) -> Vec<String> {
    answers
        .iter()
        .map(|a| {
            map.get(&answer_key(a))
                .cloned()
                .unwrap_or_else(|| a.clone())
        })
        .collect()
}

fn core_set(text: &str) -> HashSet<String> {
    text.split_whitespace().map(core_lower).collect()
}

/// Distinct single-token answers (lowercased) that occur in the description,
/// in answer order.
pub fn answers_in_description(s: &Triplet) -> Vec<String> {
    let cores = core_set(&s.description);
    let mut out: Vec<String> = Vec::new();
    for a in &s.answers {
        let key = answer_key(a);
        if is_single_token(&key) && cores.contains(&key) && !out.contains(&key) {
            out.push(key);
        }
    }
    out
}

fn relation_replace(
    s: &Triplet,
    graph: &LexicalGraph,
    relation: Relation,
    origin: Origin,
) -> Option<Triplet> {
    let in_d = answers_in_description(s);
    let mut map = HashMap::new();
    for a in &in_d {
        let Some(target) = graph.related(a, relation).first() else {
            continue;
        };
        // A replacement containing the word itself would leave it in d.
        if target.split_whitespace().any(|w| w == a) {
            continue;
        }
        map.insert(a.clone(), target.clone());
    }
    if map.is_empty() {
        return None;
    }
    let answer_keys: HashSet<String> = s.answers.iter().map(|a| answer_key(a)).collect();
    if map.values().any(|h| answer_keys.contains(h)) {
        return None;
    }
    let mut out = s.derive(origin, 0);
    out.description = replace_tokens(&s.description, &map);
    out.answers = replace_answers(&s.answers, &map);
    Some(out)
}

/// Replaces every answer word found in the description with its first
/// hypernym, in both the description and the answers.
pub fn hypernym_replace(s: &Triplet, graph: &LexicalGraph) -> Option<Triplet> {
    relation_replace(s, graph, Relation::Hypernym, Origin::Hypernym)
}

pub fn hyponym_replace(s: &Triplet, graph: &LexicalGraph) -> Option<Triplet> {
    relation_replace(s, graph, Relation::Hyponym, Origin::Hyponym)
}

/// Swaps the first color answer that appears in the description for a
/// different color drawn uniformly from the color set.
pub fn color_invert<R: Rng + ?Sized>(
    s: &Triplet,
    config: &DavConfig,
    rng: &mut R,
) -> Option<Triplet> {
    if !is_color_question(&s.question_type, &config.color_question_types) {
        return None;
    }
    let cores = core_set(&s.description);
    let color = s
        .answers
        .iter()
        .map(|a| answer_key(a))
        .find(|a| config.colors.contains(a) && cores.contains(a))?;
    let candidates: Vec<&String> = config
        .colors
        .colors()
        .iter()
        .filter(|c| **c != color)
        .collect();
    let replacement = candidates[rng.random_range(0..candidates.len())].clone();
    let map = HashMap::from([(color, replacement)]);
    let mut out = s.derive(Origin::ColorInversion, 0);
    out.description = replace_tokens(&s.description, &map);
    out.answers = replace_answers(&s.answers, &map);
    Some(out)
}

pub fn is_yes_no_sample(s: &Triplet) -> bool {
    s.answers.iter().any(|a| {
        let k = answer_key(a);
        k == "yes" || k == "no"
    })
}

fn contains_phrase(cores: &[String], phrase: &str) -> bool {
    let words: Vec<&str> = phrase.split_whitespace().collect();
    !words.is_empty()
        && cores
            .windows(words.len())
            .any(|w| w.iter().zip(&words).all(|(a, b)| a == b))
}

fn majority_is_no(answers: &[String]) -> bool {
    let no = answers.iter().filter(|a| answer_key(a) == "no").count();
    2 * no > answers.len()
}

/// Object classes of `config` occurring in the description, by first
/// appearance.
pub fn objects_in_description(s: &Triplet, config: &DavConfig) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for tok in s.description.split_whitespace() {
        let core = core_lower(tok);
        if config.objects.contains(&core) && !out.contains(&core) {
            out.push(core);
        }
    }
    out
}

/// One sample per object class found in the description of a yes/no
/// sample: the object is swapped for its adversarial word, and the answers
/// become `["no"]` when the question mentions the object or a synonym.
pub fn adversarial_replace(
    s: &Triplet,
    config: &DavConfig,
    adversarial: &AdversarialIndex,
    graph: &LexicalGraph,
    diagnostics: &mut Diagnostics,
) -> Vec<Triplet> {
    if !is_yes_no_sample(s) {
        return Vec::new();
    }
    let q_cores: Vec<String> = s.question.split_whitespace().map(core_lower).collect();
    let mut out = Vec::new();
    for (ordinal, object) in objects_in_description(s, config).into_iter().enumerate() {
        let Some(adv) = adversarial.get(&object) else {
            diagnostics.record(
                "adversarial_no_embedding",
                format!(
                    "question {}: no adversarial word for `{object}`",
                    s.question_id
                ),
            );
            continue;
        };
        let mentioned = q_cores.contains(&object)
            || config
                .objects
                .synonyms(&object, graph)
                .iter()
                .any(|syn| contains_phrase(&q_cores, syn));
        if mentioned && config.skip_no_majority && majority_is_no(&s.answers) {
            continue;
        }
        let map = HashMap::from([(object, adv.to_owned())]);
        let mut sample = s.derive(Origin::Adversarial, ordinal as u32);
        sample.description = replace_tokens(&s.description, &map);
        if mentioned {
            sample.answers = vec!["no".to_owned()];
        }
        out.push(sample);
    }
    out
}

/// Number of leading question tokens spelled by `question_type`; zero when
/// the question does not start with it.
pub fn question_type_prefix_len(question: &[String], question_type: &str) -> usize {
    let words: Vec<String> = question_type
        .split_whitespace()
        .map(str::to_lowercase)
        .collect();
    let matches = !words.is_empty()
        && words.len() <= question.len()
        && question
            .iter()
            .zip(&words)
            .all(|(tok, w)| core_lower(tok) == *w);
    if matches {
        words.len()
    } else {
        0
    }
}

/// Critical positions and the two complementary masked inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CssMasks {
    /// Positions of the top-D critical words, ascending.
    pub critical: Vec<usize>,
    /// Everything except the prefix and the critical words masked.
    pub plus: Vec<String>,
    /// Only the critical words masked.
    pub minus: Vec<String>,
}

/// Picks the `top_d` highest scoring positions at or after `prefix_len`
/// (earlier position wins ties) and builds both masked sequences.
pub fn css_masks(tokens: &[String], scores: &[f64], prefix_len: usize, top_d: usize) -> CssMasks {
    let mut ranked: Vec<usize> = (prefix_len.min(tokens.len())..tokens.len()).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let critical: BTreeSet<usize> = ranked.into_iter().take(top_d).collect();
    let mask = |keep: &dyn Fn(usize) -> bool| -> Vec<String> {
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if keep(i) {
                    t.clone()
                } else {
                    MASK_TOKEN.to_owned()
                }
            })
            .collect()
    };
    let plus = mask(&|i| i < prefix_len || critical.contains(&i));
    let minus = mask(&|i| !critical.contains(&i));
    CssMasks {
        critical: critical.into_iter().collect(),
        plus,
        minus,
    }
}

fn remove_answers(answers: &[String], removed: &[String]) -> Vec<String> {
    let removed: HashSet<String> = removed.iter().map(|a| answer_key(a)).collect();
    answers
        .iter()
        .filter(|a| !removed.contains(&answer_key(a)))
        .cloned()
        .collect()
}

/// Counterfactual sample built by masking the question's critical words.
///
/// Returns `Ok(None)` when nothing qualifies: no maskable words, or every
/// answer removed.
pub fn css_question(
    s: &Triplet,
    scorer: &dyn ImportanceScorer,
    config: &DavConfig,
) -> Result<Option<Triplet>> {
    let q = owned_tokens(&s.question);
    let d = owned_tokens(&s.description);
    let prefix = question_type_prefix_len(&q, &s.question_type);
    let scores = score(
        scorer,
        &ScoreInput {
            question_id: s.question_id,
            question: &q,
            description: &d,
            answers: &s.answers,
        },
    )?;
    let masks = css_masks(&q, &scores.question_scores, prefix, config.top_d);
    if masks.critical.is_empty() {
        return Ok(None);
    }
    let plus = score(
        scorer,
        &ScoreInput {
            question_id: s.question_id,
            question: &masks.plus,
            description: &d,
            answers: &s.answers,
        },
    )?;
    let answers = remove_answers(&s.answers, &top_answers(&plus.answer_scores, config.top_j));
    if answers.is_empty() {
        return Ok(None);
    }
    let mut out = s.derive(Origin::CssQuestion, 0);
    out.question = masks.minus.join(" ");
    out.answers = answers;
    Ok(Some(out))
}

/// Counterfactual sample built by masking the description's critical words.
pub fn css_description(
    s: &Triplet,
    scorer: &dyn ImportanceScorer,
    config: &DavConfig,
) -> Result<Option<Triplet>> {
    let q = owned_tokens(&s.question);
    let d = owned_tokens(&s.description);
    let scores = score(
        scorer,
        &ScoreInput {
            question_id: s.question_id,
            question: &q,
            description: &d,
            answers: &s.answers,
        },
    )?;
    let masks = css_masks(&d, &scores.description_scores, 0, config.top_d);
    if masks.critical.is_empty() {
        return Ok(None);
    }
    let plus = score(
        scorer,
        &ScoreInput {
            question_id: s.question_id,
            question: &q,
            description: &masks.plus,
            answers: &s.answers,
        },
    )?;
    let answers = remove_answers(&s.answers, &top_answers(&plus.answer_scores, config.top_j));
    if answers.is_empty() {
        return Ok(None);
    }
    let mut out = s.derive(Origin::CssDescription, 0);
    out.description = masks.minus.join(" ");
    out.answers = answers;
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AnswerType;
    use crate::importance::{FileScorer, ScoreRecord};
    use crate::lexicon::EmbeddingTable;
    use crate::seed::rng_from_seed;
    use std::collections::BTreeMap;

    fn triplet(q: &str, d: &str, answers: &[&str], t: &str) -> Triplet {
        Triplet {
            question_id: 7,
            parent_question_id: 7,
            question: q.into(),
            description: d.into(),
            answers: answers.iter().map(|a| a.to_string()).collect(),
            question_type: t.into(),
            answer_type: AnswerType::Other,
            origin: Origin::Original,
        }
    }

    fn graph(tsv: &str) -> LexicalGraph {
        LexicalGraph::parse(tsv).0
    }

    #[test]
    fn hypernym_replaces_in_both_places() {
        let g = graph("fruit\thypernym\tfood\n");
        let s = triplet(
            "What is on the plate?",
            "A plate of fruit. Fresh fruit!",
            &["fruit"; 10],
            "what is on the",
        );
        let h = hypernym_replace(&s, &g).unwrap();
        assert_eq!(h.description, "A plate of food. Fresh food!");
        assert_eq!(h.answers, vec!["food"; 10]);
        assert_eq!(h.origin, Origin::Hypernym);
        assert_eq!(h.parent_question_id, 7);
        assert_eq!(h.question, s.question);
    }

    #[test]
    fn hypernym_duplicate_avoidance() {
        let g = graph("fruit\thypernym\tfood\n");
        let mut answers = vec!["fruit"; 9];
        answers.push("food");
        let s = triplet("What is this?", "some fruit", &answers, "what is this");
        assert!(hypernym_replace(&s, &g).is_none());
    }

    #[test]
    fn hypernym_needs_answer_in_description() {
        let g = graph("fruit\thypernym\tfood\n");
        let s = triplet(
            "What is this?",
            "a bowl on a table",
            &["fruit"; 10],
            "what is this",
        );
        assert!(hypernym_replace(&s, &g).is_none());
        let s = triplet(
            "What is this?",
            "a bowl of fruit",
            &["fruit"; 10],
            "what is this",
        );
        assert!(hyponym_replace(&s, &g).is_none());
    }

    #[test]
    fn color_inversion_fixture() {
        let config = DavConfig::default();
        let mut answers = vec!["red"; 6];
        answers.extend(["maroon"; 4]);
        let s = triplet(
            "What color is the car?",
            "A red car next to a Red sign.",
            &answers,
            "what color is the",
        );
        let mut rng = rng_from_seed(11);
        let c = color_invert(&s, &config, &mut rng).unwrap();
        let new = answer_key(&c.answers[0]);
        assert_ne!(new, "red");
        assert!(config.colors.contains(&new));
        assert_eq!(c.answers.iter().filter(|a| **a == new).count(), 6);
        assert_eq!(c.answers.iter().filter(|a| *a == "maroon").count(), 4);
        assert!(!c
            .description
            .to_lowercase()
            .split_whitespace()
            .any(|t| t == "red"));
        assert_eq!(
            c.description.split_whitespace().count(),
            s.description.split_whitespace().count()
        );
        // Fixed by the seed.
        let again = color_invert(&s, &config, &mut rng_from_seed(11)).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn color_inversion_preconditions() {
        let config = DavConfig::default();
        let mut rng = rng_from_seed(0);
        let s = triplet(
            "How many red cars?",
            "two red cars",
            &["red"; 10],
            "how many",
        );
        assert!(color_invert(&s, &config, &mut rng).is_none());
        let s = triplet(
            "What color is the car?",
            "a car",
            &["red"; 10],
            "what color is the",
        );
        assert!(color_invert(&s, &config, &mut rng).is_none());
    }

    fn adv_index(pairs: &[(&str, Option<&str>)]) -> AdversarialIndex {
        AdversarialIndex::from_map(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.map(str::to_owned)))
                .collect::<BTreeMap<_, _>>(),
        )
    }

    #[test]
    fn adversarial_object_in_question_flips_to_no() {
        let (table, _) = EmbeddingTable::from_pairs(
            [
                ("dog", [1.0f32, 0.0]),
                ("cat", [0.9, 0.1]),
                ("car", [-1.0, 0.0]),
            ]
            .map(|(w, v)| (w.to_owned(), v.to_vec())),
        )
        .unwrap();
        let config = DavConfig::default();
        let g = LexicalGraph::new();
        let idx = AdversarialIndex::build(&ObjectClassSet::new(["dog"]), &g, &table);
        let s = triplet(
            "Is there a dog?",
            "A dog on the grass.",
            &["yes"; 10],
            "is there a",
        );
        let mut diag = Diagnostics::new();
        let out = adversarial_replace(&s, &config, &idx, &g, &mut diag);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].description, "A cat on the grass.");
        assert_eq!(out[0].answers, vec!["no"]);
    }

    #[test]
    fn adversarial_object_not_in_question_keeps_answers() {
        let config = DavConfig::default();
        let idx = adv_index(&[("pizza", Some("pasta"))]);
        let s = triplet(
            "Is it daytime?",
            "A pizza on a table.",
            &["yes"; 10],
            "is it",
        );
        let out = adversarial_replace(
            &s,
            &config,
            &idx,
            &LexicalGraph::new(),
            &mut Diagnostics::new(),
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].description, "A pasta on a table.");
        assert_eq!(out[0].answers, s.answers);
    }

    #[test]
    fn adversarial_synonym_in_question_counts() {
        let config = DavConfig::default();
        let idx = adv_index(&[("couch", Some("chair"))]);
        let s = triplet(
            "Is there a sofa?",
            "a couch by the window",
            &["yes"; 10],
            "is there a",
        );
        let out = adversarial_replace(
            &s,
            &config,
            &idx,
            &LexicalGraph::new(),
            &mut Diagnostics::new(),
        );
        assert_eq!(out[0].answers, vec!["no"]);
    }

    #[test]
    fn adversarial_requires_yes_no_and_embedding() {
        let config = DavConfig::default();
        let idx = adv_index(&[("dog", None)]);
        let s = triplet("How many dogs?", "a dog", &["2"; 10], "how many");
        assert!(adversarial_replace(
            &s,
            &config,
            &idx,
            &LexicalGraph::new(),
            &mut Diagnostics::new()
        )
        .is_empty());
        let s = triplet("Is there a dog?", "a dog", &["yes"; 10], "is there a");
        let mut diag = Diagnostics::new();
        assert!(adversarial_replace(&s, &config, &idx, &LexicalGraph::new(), &mut diag).is_empty());
        assert_eq!(diag.count("adversarial_no_embedding"), 1);
    }

    #[test]
    fn adversarial_skip_no_majority_flag() {
        let config = DavConfig {
            skip_no_majority: true,
            ..DavConfig::default()
        };
        let idx = adv_index(&[("dog", Some("cat"))]);
        let s = triplet("Is there a dog?", "a dog", &["no"; 10], "is there a");
        assert!(adversarial_replace(
            &s,
            &config,
            &idx,
            &LexicalGraph::new(),
            &mut Diagnostics::new()
        )
        .is_empty());
        let lenient = DavConfig::default();
        let out = adversarial_replace(
            &s,
            &lenient,
            &idx,
            &LexicalGraph::new(),
            &mut Diagnostics::new(),
        );
        assert_eq!(out[0].answers, vec!["no"]);
    }

    #[test]
    fn prefix_detection() {
        let q = owned_tokens("What color is the car?");
        assert_eq!(question_type_prefix_len(&q, "what color is the"), 4);
        assert_eq!(question_type_prefix_len(&q, "what is"), 0);
        assert_eq!(question_type_prefix_len(&q, "none of the above"), 0);
    }

    fn file_scorer(q: Vec<f64>, d: Vec<f64>, answers: &[(&str, f64)]) -> FileScorer {
        FileScorer::from_records([ScoreRecord {
            question_id: 7,
            question_scores: q,
            description_scores: d,
            answer_scores: answers.iter().map(|(a, s)| (a.to_string(), *s)).collect(),
        }])
    }

    #[test]
    fn css_question_hand_trace() {
        let s = triplet(
            "what color is the car",
            "a red car",
            &["red"; 10],
            "what color is the",
        );
        let scorer = file_scorer(
            vec![0.1, 0.2, 0.1, 0.1, 0.9],
            vec![0.0; 3],
            &[("blue", 0.8), ("green", 0.1)],
        );
        let config = DavConfig {
            top_j: 1,
            ..DavConfig::default()
        };
        let q = owned_tokens(&s.question);
        let masks = css_masks(&q, &[0.1, 0.2, 0.1, 0.1, 0.9], 4, config.top_d);
        assert_eq!(masks.plus, q);
        assert_eq!(masks.minus.join(" "), "what color is the <mask>");
        let out = css_question(&s, &scorer, &config).unwrap().unwrap();
        assert_eq!(out.question, "what color is the <mask>");
        assert_eq!(out.answers, s.answers);
        assert_eq!(out.description, s.description);
    }

    #[test]
    fn css_empty_answer_set_is_skipped() {
        let s = triplet(
            "what color is the car",
            "a red car",
            &["red"; 10],
            "what color is the",
        );
        let scorer = file_scorer(vec![0.0; 5], vec![0.0; 3], &[("red", 0.8)]);
        assert!(css_question(&s, &scorer, &DavConfig::default())
            .unwrap()
            .is_none());
        assert!(css_description(&s, &scorer, &DavConfig::default())
            .unwrap()
            .is_none());
    }

    #[test]
    fn css_budget_larger_than_tokens() {
        let q = owned_tokens("is the man happy");
        let masks = css_masks(&q, &[0.0, 0.5, 0.2, 0.1], 2, 10);
        assert_eq!(masks.critical, vec![2, 3]);
        assert_eq!(masks.minus.join(" "), "is the <mask> <mask>");
        assert_eq!(masks.plus, q);
    }

    #[test]
    fn css_description_top_two_and_ties() {
        let d = owned_tokens("red car street");
        let masks = css_masks(&d, &[0.9, 0.1, 0.5], 0, 2);
        assert_eq!(masks.minus.join(" "), "<mask> car <mask>");
        assert_eq!(masks.plus.join(" "), "red <mask> street");
        let tied = css_masks(&d, &[0.3, 0.3, 0.3], 0, 2);
        assert_eq!(tied.critical, vec![0, 1]);

        let s = triplet("what is it", "red car street", &["car"; 10], "what is");
        let scorer = file_scorer(vec![0.0; 3], vec![0.9, 0.1, 0.5], &[("bus", 1.0)]);
        let config = DavConfig {
            top_d: 2,
            top_j: 1,
            ..DavConfig::default()
        };
        let out = css_description(&s, &scorer, &config).unwrap().unwrap();
        assert_eq!(out.description, "<mask> car <mask>");
        assert_eq!(out.question, s.question);
    }

    #[test]
    fn css_scorer_failure_propagates() {
        let s = triplet("what is it", "a car", &["car"; 10], "what is");
        let scorer = FileScorer::default();
        assert!(css_question(&s, &scorer, &DavConfig::default()).is_err());
    }
}
