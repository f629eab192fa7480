//! Subcommand bodies: corpus build, augmentation, truncation, statistics,
//! evaluation and lexicon import.
//!
//! Work is split into shards by a hash of the question id and shards run on
//! a thread pool. Every random draw comes from a per-sample generator, and
//! outputs are merged in question id order, so results do not depend on the
//! shard count or on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::corpus::{self, JoinReport, RawSample};
use crate::dal::{apply_dal, DalClients, DalConfig, DalTechnique, Infiller, Target, Translator};
use crate::dav::{self, DavConfig};
use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::eval::{self, AccuracyReport, Gold, Normalization, OverlapReport};
use crate::importance::ImportanceScorer;
use crate::lexicon::{
    import_wordnet, read_word_list, AdversarialIndex, ColorSet, EmbeddingTable, LexicalGraph,
    ObjectClassSet, QuestionTypeSet,
};
use crate::records::{read_jsonl, write_jsonl, Header, TOOL_NAME, TOOL_VERSION};
use crate::seed::{sample_rng, sample_seed, splitmix64};
use crate::text::word_count;
use crate::triplet::{build_description, truncate_description, DescriptionMode, Origin, Triplet};

pub const TRIPLETS_FILE: &str = "triplets.jsonl";

/// One augmentation, named by the origin tag its samples carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Technique(Origin);

impl Technique {
    pub fn origin(self) -> Origin {
        self.0
    }

    pub fn all() -> Vec<Technique> {
        Origin::ALL[1..].iter().map(|&o| Technique(o)).collect()
    }

    fn dal(self) -> Option<(DalTechnique, Target)> {
        use Origin::*;
        let q = Target::Question;
        let d = Target::Description;
        Some(match self.0 {
            EdaQuestion => (DalTechnique::Eda, q),
            EdaDescription => (DalTechnique::Eda, d),
            BackTranslationQuestion => (DalTechnique::BackTranslation, q),
            BackTranslationDescription => (DalTechnique::BackTranslation, d),
            ContextualReplaceQuestion => (DalTechnique::ContextualReplace, q),
            ContextualReplaceDescription => (DalTechnique::ContextualReplace, d),
            ContextualInsertQuestion => (DalTechnique::ContextualInsert, q),
            ContextualInsertDescription => (DalTechnique::ContextualInsert, d),
            _ => return None,
        })
    }

    fn needs_graph(self) -> bool {
        matches!(
            self.0,
            Origin::Hypernym
                | Origin::Hyponym
                | Origin::Adversarial
                | Origin::EdaQuestion
                | Origin::EdaDescription
        )
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0.as_str())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<Origin>() {
            Ok(Origin::Original) | Err(_) => Err(Error::Usage(format!(
                "unknown technique `{s}`; expected one of: {}",
                Technique::all()
                    .iter()
                    .map(|t| t.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))),
            Ok(o) => Ok(Technique(o)),
        }
    }
}

/// Shared, read-only inputs for augmentation.
pub struct Resources {
    pub graph: LexicalGraph,
    pub dav: DavConfig,
    pub dal: DalConfig,
    pub adversarial: Option<AdversarialIndex>,
    pub scorer: Option<Box<dyn ImportanceScorer>>,
    pub translator: Option<Box<dyn Translator>>,
    pub infiller: Option<Box<dyn Infiller>>,
}

impl Default for Resources {
    fn default() -> Self {
        Resources {
            graph: LexicalGraph::new(),
            dav: DavConfig::default(),
            dal: DalConfig::default(),
            adversarial: None,
            scorer: None,
            translator: None,
            infiller: None,
        }
    }
}

impl Resources {
    /// Loads only what `techniques` need.
    pub fn load(config: &PipelineConfig, techniques: &[Technique]) -> Result<(Self, Diagnostics)> {
        let mut diag = Diagnostics::new();
        let needs = |f: &dyn Fn(Origin) -> bool| techniques.iter().any(|t| f(t.origin()));
        let p = &config.paths;

        let graph = if techniques.iter().any(|t| t.needs_graph()) {
            let path = config.required(&p.lexicon, "lexicon")?;
            let (g, d) = LexicalGraph::load(path)?;
            diag.merge(d);
            g
        } else {
            LexicalGraph::new()
        };

        let mut dav = DavConfig {
            top_d: config.dav.top_d,
            top_j: config.dav.top_j,
            skip_no_majority: config.dav.skip_no_majority,
            ..DavConfig::default()
        };
        if let Some(path) = &p.colors {
            dav.colors = ColorSet::load(path)?;
        }
        if let Some(path) = &p.color_question_types {
            dav.color_question_types = QuestionTypeSet::new(read_word_list(path)?);
        }
        if let Some(path) = &p.objects {
            dav.objects = ObjectClassSet::new(read_word_list(path)?);
        }
        if let Some(path) = &p.object_aliases {
            diag.merge(dav.objects.load_aliases(path)?);
        }

        let adversarial = if needs(&|o| o == Origin::Adversarial) {
            let path = config.required(&p.embeddings, "embeddings")?;
            let (table, d) = EmbeddingTable::load(path)?;
            diag.merge(d);
            Some(AdversarialIndex::build(&dav.objects, &graph, &table))
        } else {
            None
        };
        let scorer = if needs(&|o| matches!(o, Origin::CssQuestion | Origin::CssDescription)) {
            Some(config.scorer_backend()?.open()?)
        } else {
            None
        };
        let dal_kinds: Vec<DalTechnique> = techniques
            .iter()
            .filter_map(|t| t.dal())
            .map(|d| d.0)
            .collect();
        let translator = if dal_kinds.contains(&DalTechnique::BackTranslation) {
            Some(config.translator()?)
        } else {
            None
        };
        let infiller = if dal_kinds.iter().any(|k| {
            matches!(
                k,
                DalTechnique::ContextualReplace | DalTechnique::ContextualInsert
            )
        }) {
            Some(config.infiller()?)
        } else {
            None
        };
        Ok((
            Resources {
                graph,
                dav,
                dal: config.dal.dal_config(),
                adversarial,
                scorer,
                translator,
                infiller,
            },
            diag,
        ))
    }
}

/// Synthetic samples `technique` derives from `s`.
pub fn augment_one(
    s: &Triplet,
    technique: Technique,
    res: &Resources,
    seed: u64,
    diag: &mut Diagnostics,
) -> Result<Vec<Triplet>> {
    let missing = |what: &str| Error::Usage(format!("technique {technique} needs {what}"));
    let mut rng = sample_rng(seed, s.question_id, technique.origin().as_str());
    let out = match technique.origin() {
        Origin::Original => Vec::new(),
        Origin::Hypernym => dav::hypernym_replace(s, &res.graph).into_iter().collect(),
        Origin::Hyponym => dav::hyponym_replace(s, &res.graph).into_iter().collect(),
        Origin::ColorInversion => dav::color_invert(s, &res.dav, &mut rng)
            .into_iter()
            .collect(),
        Origin::Adversarial => {
            let index = res
                .adversarial
                .as_ref()
                .ok_or_else(|| missing("an embedding table"))?;
            dav::adversarial_replace(s, &res.dav, index, &res.graph, diag)
        }
        Origin::CssQuestion => {
            let scorer = res.scorer.as_deref().ok_or_else(|| missing("a scorer"))?;
            dav::css_question(s, scorer, &res.dav)?
                .into_iter()
                .collect()
        }
        Origin::CssDescription => {
            let scorer = res.scorer.as_deref().ok_or_else(|| missing("a scorer"))?;
            dav::css_description(s, scorer, &res.dav)?
                .into_iter()
                .collect()
        }
        _ => {
            let (kind, target) = technique
                .dal()
                .expect("remaining origins are language techniques");
            let clients = DalClients {
                graph: &res.graph,
                translator: res.translator.as_deref(),
                infiller: res.infiller.as_deref(),
            };
            apply_dal(s, kind, target, &res.dal, clients, &mut rng, diag)?
                .into_iter()
                .collect()
        }
    };
    Ok(out)
}

pub fn shard_of(question_id: u64, shards: usize) -> usize {
    (splitmix64(question_id) % shards.max(1) as u64) as usize
}

/// Per-sample outcome before merging.
type Outcome = (u64, Result<Vec<Triplet>>, Diagnostics);

/// Runs `technique` over `inputs`, shard by shard, and merges the results
/// in question id order. Backend failures on single samples become
/// diagnostics; if every sample fails, the run fails.
pub fn run_technique(
    inputs: &[Triplet],
    technique: Technique,
    res: &Resources,
    seed: u64,
    shards: usize,
) -> Result<(Vec<Triplet>, Diagnostics)> {
    let shards = shards.max(1);
    let mut outcomes: Vec<Outcome> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|k| {
            inputs
                .iter()
                .filter(|t| shard_of(t.question_id, shards) == k)
                .map(|t| {
                    let mut d = Diagnostics::new();
                    let r = augment_one(t, technique, res, seed, &mut d);
                    (t.question_id, r, d)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    outcomes.sort_by_key(|o| o.0);

    let mut diag = Diagnostics::new();
    let mut out = Vec::new();
    let mut failures = 0usize;
    let mut last_failure = String::new();
    for (qid, result, d) in outcomes {
        diag.merge(d);
        match result {
            Ok(v) => out.extend(v),
            Err(Error::Backend(msg)) => {
                failures += 1;
                diag.record("backend_error", format!("{technique} on {qid}: {msg}"));
                last_failure = msg;
            }
            Err(e) => return Err(e),
        }
    }
    if failures > 0 && failures == inputs.len() {
        return Err(Error::Backend(format!(
            "{technique}: all {failures} samples failed; last error: {last_failure}"
        )));
    }
    out.sort_by_key(|t| t.question_id);
    Ok((out, diag))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub shards: usize,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description_mode: Option<String>,
    pub num_original: usize,
    pub num_synthetic: BTreeMap<String, usize>,
    pub num_total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub join: Option<JoinReport>,
    pub outputs: Vec<String>,
    pub diagnostics: Diagnostics,
    pub wall_clock_ms: u64,
}

impl RunManifest {
    fn new(command: &str, config: &PipelineConfig) -> Self {
        RunManifest {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            seed: config.seed,
            shards: config.shards,
            config_hash: config.hash(),
            description_mode: None,
            num_original: 0,
            num_synthetic: BTreeMap::new(),
            num_total: 0,
            join: None,
            outputs: Vec::new(),
            diagnostics: Diagnostics::new(),
            wall_clock_ms: 0,
        }
    }

    pub fn synthetic_total(&self) -> usize {
        self.num_synthetic.values().sum()
    }

    /// `num_total == num_original + sum of num_synthetic`.
    pub fn is_consistent(&self) -> bool {
        self.num_total == self.num_original + self.synthetic_total()
    }

    fn finish(mut self, started: Instant) -> Self {
        self.num_total = self.num_original + self.synthetic_total();
        self.wall_clock_ms = started.elapsed().as_millis() as u64;
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Format {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    /// Num. Synthetic / Num. Total table.
    pub fn table(&self) -> String {
        let mut s = format!("{:<28} {:>12}\n", "technique", "num_synthetic");
        for (k, v) in &self.num_synthetic {
            s += &format!("{k:<28} {v:>12}\n");
        }
        s += &format!("{:<28} {:>12}\n", "original", self.num_original);
        s += &format!("{:<28} {:>12}\n", "total", self.num_total);
        s
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        serde_json::to_writer_pretty(&mut w, value)?;
        std::io::Write::write_all(&mut w, b"\n").map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Runs `f` on a pool of `threads` workers (0 for the default size).
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Loads and joins every corpus named in the config.
pub fn load_samples(config: &PipelineConfig) -> Result<(Vec<RawSample>, JoinReport, Diagnostics)> {
    let p = &config.paths;
    let questions = corpus::load_questions(config.required(&p.questions, "questions")?)?;
    let annotations = corpus::load_annotations(config.required(&p.annotations, "annotations")?)?;
    if p.captions.is_empty() {
        return Err(Error::Usage(
            "config key `paths.captions` is required".into(),
        ));
    }
    if p.narratives.is_empty() {
        return Err(Error::Usage(
            "config key `paths.narratives` is required".into(),
        ));
    }
    let captions = corpus::load_captions_from(&p.captions)?;
    let narratives = corpus::load_narratives_from(&p.narratives)?;
    let (samples, report) = corpus::join(
        &questions.records,
        &annotations.records,
        &captions.records,
        &narratives.records,
    );
    let diag = questions
        .diagnostics
        .merged(annotations.diagnostics)
        .merged(captions.diagnostics)
        .merged(narratives.diagnostics);
    Ok((samples, report, diag))
}

fn build_shards(
    samples: &[RawSample],
    mode: DescriptionMode,
    seed: u64,
    shards: usize,
) -> (Vec<Triplet>, Diagnostics) {
    let shards = shards.max(1);
    let mut built: Vec<(Triplet, Option<String>)> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|k| {
            samples
                .iter()
                .filter(|s| shard_of(s.question_id, shards) == k)
                .map(|s| {
                    let (d, msg) = build_description(s, mode, sample_seed(seed, s.question_id));
                    (Triplet::original(s, d), msg)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    built.sort_by_key(|b| b.0.question_id);
    let mut diag = Diagnostics::new();
    let triplets = built
        .into_iter()
        .map(|(t, msg)| {
            if let Some(msg) = msg {
                diag.record("fewer_captions", msg);
            }
            t
        })
        .collect();
    (triplets, diag)
}

pub fn cmd_build(config: &PipelineConfig) -> Result<RunManifest> {
    let started = Instant::now();
    config.validate()?;
    let mode = config.description_mode()?;
    let (samples, report, load_diag) = load_samples(config)?;
    let (triplets, diag) = with_pool(config.threads, || {
        build_shards(&samples, mode, config.seed, config.shards)
    })?;

    let out = config.out.join(TRIPLETS_FILE);
    let header = Header::new(&format!("triplets mode={mode}"), config.seed);
    write_jsonl(&out, Some(&header), &triplets)?;

    let mut m = RunManifest::new("build", config);
    m.description_mode = Some(mode.to_string());
    m.num_original = triplets.len();
    m.join = Some(report);
    m.outputs = vec![TRIPLETS_FILE.into()];
    m.diagnostics = load_diag.merged(diag);
    let m = m.finish(started);
    m.write(&config.out.join("build.manifest.json"))?;
    Ok(m)
}

fn read_originals(path: &Path) -> Result<Vec<Triplet>> {
    let (_, mut triplets) = read_jsonl::<Triplet>(path)?;
    triplets.retain(|t| t.origin == Origin::Original);
    triplets.sort_by_key(|t| t.question_id);
    Ok(triplets)
}

/// Applies each technique to the original triplets in `input`; one output
/// file per technique plus `augmented.jsonl` holding originals and all
/// synthetic samples.
pub fn cmd_augment(
    config: &PipelineConfig,
    input: &Path,
    techniques: &[Technique],
) -> Result<RunManifest> {
    let started = Instant::now();
    config.validate()?;
    if techniques.is_empty() {
        return Err(Error::Usage("no techniques selected".into()));
    }
    let originals = read_originals(input)?;
    let (res, res_diag) = Resources::load(config, techniques)?;
    let dir = config.out.join("augment");

    let mut m = RunManifest::new("augment", config);
    m.num_original = originals.len();
    m.diagnostics = res_diag;
    let mut combined = originals.clone();
    for &t in techniques {
        let (synthetic, diag) = with_pool(config.threads, || {
            run_technique(&originals, t, &res, config.seed, config.shards)
        })??;
        let name = format!("{t}.jsonl");
        write_jsonl(
            &dir.join(&name),
            Some(&Header::new(
                &format!("synthetic technique={t}"),
                config.seed,
            )),
            &synthetic,
        )?;
        log::info!("{t}: {} synthetic samples", synthetic.len());
        m.num_synthetic.insert(t.to_string(), synthetic.len());
        m.outputs.push(format!("augment/{name}"));
        m.diagnostics.merge(diag);
        combined.extend(synthetic);
    }
    combined.sort_by_key(|t| t.question_id);
    let techniques_label = techniques
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(",");
    write_jsonl(
        &dir.join("augmented.jsonl"),
        Some(&Header::new(
            &format!("augmented techniques={techniques_label}"),
            config.seed,
        )),
        &combined,
    )?;
    m.outputs.push("augment/augmented.jsonl".into());
    let m = m.finish(started);
    debug_assert_eq!(m.num_total, combined.len());
    m.write(&config.out.join("augment.manifest.json"))?;
    Ok(m)
}

pub fn truncate_file_name(rate: f64) -> String {
    format!("rate_{rate}.jsonl")
}

/// Writes one truncated copy of `input` per rate. The input header is kept
/// as is, so rate 0 reproduces the input byte for byte.
pub fn cmd_truncate(config: &PipelineConfig, input: &Path, rates: &[f64]) -> Result<Vec<PathBuf>> {
    if let Some(bad) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Usage(format!(
            "truncation rate {bad} outside [0, 1]"
        )));
    }
    let (header, triplets) = read_jsonl::<Triplet>(input)?;
    let dir = config.out.join("truncate");
    let mut written = Vec::new();
    for &rate in rates {
        let truncated: Vec<Triplet> = with_pool(config.threads, || {
            triplets
                .par_iter()
                .map(|t| {
                    let mut t = t.clone();
                    t.description = truncate_description(
                        &t.description,
                        rate,
                        sample_seed(config.seed, t.question_id),
                    )?;
                    Ok(t)
                })
                .collect::<Result<Vec<_>>>()
        })??;
        let path = dir.join(truncate_file_name(rate));
        write_jsonl(&path, header.as_ref(), &truncated)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub mode: String,
    pub mean_length: f64,
}

/// Mean description word count for every mode.
pub fn length_stats(samples: &[RawSample], seed: u64) -> Vec<LengthRow> {
    DescriptionMode::all()
        .into_iter()
        .map(|mode| {
            let total: usize = samples
                .par_iter()
                .map(|s| {
                    word_count(&build_description(s, mode, sample_seed(seed, s.question_id)).0)
                })
                .sum();
            LengthRow {
                mode: mode.to_string(),
                mean_length: if samples.is_empty() {
                    0.0
                } else {
                    total as f64 / samples.len() as f64
                },
            }
        })
        .collect()
}

pub fn format_length_table(rows: &[LengthRow]) -> String {
    let mut s = format!("{:<12} {:>8}\n", "description", "length");
    for r in rows {
        s += &format!("{:<12} {:>8.1}\n", r.mode, r.mean_length);
    }
    s
}

pub fn cmd_stats(config: &PipelineConfig) -> Result<Vec<LengthRow>> {
    let (samples, _, _) = load_samples(config)?;
    let rows = with_pool(config.threads, || length_stats(&samples, config.seed))?;
    write_json(&config.out.join("stats.json"), &rows)?;
    Ok(rows)
}

pub fn cmd_eval(
    predictions: &Path,
    annotations: &Path,
    baseline: Option<&Path>,
    norm: Normalization,
) -> Result<(AccuracyReport, Diagnostics)> {
    let preds = eval::load_predictions(predictions)?;
    let (gold, load_diag) = Gold::load(annotations)?;
    let (mut report, diag) = eval::evaluate(&preds, &gold, norm)?;
    if let Some(b) = baseline {
        report = report.with_baseline(&AccuracyReport::load(b)?);
    }
    Ok((report, load_diag.merged(diag)))
}

pub fn cmd_overlap(
    a: &Path,
    b: &Path,
    annotations: &Path,
    norm: Normalization,
) -> Result<OverlapReport> {
    let pa = eval::load_predictions(a)?;
    let pb = eval::load_predictions(b)?;
    let (gold, _) = Gold::load(annotations)?;
    eval::overlap(&pa, &pb, &gold, norm)
}

/// Converts a WordNet database directory into the lexical graph TSV.
pub fn cmd_import_lexicon(wordnet_dir: &Path, output: &Path) -> Result<(usize, Diagnostics)> {
    let (graph, diag) = import_wordnet(wordnet_dir)?;
    let dir = output
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    graph
        .write_tsv(BufWriter::new(tmp.as_file()))
        .map_err(|e| Error::io(output, e))?;
    tmp.persist(output)
        .map_err(|e| Error::io(output, e.error))?;
    Ok((graph.len(), diag))
}
