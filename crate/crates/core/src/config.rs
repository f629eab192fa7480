//! Pipeline configuration: one TOML file, every key overridable from the
//! command line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dal::{
    CachedInfiller, CachedTranslator, DalConfig, DictionaryInfiller, DictionaryTranslator,
    IdentityInfiller, IdentityTranslator, Infiller, ResponseCache, ServiceInfiller,
    ServiceTranslator, Translator,
};
use crate::error::{Error, Result};
use crate::importance::ScorerBackend;
use crate::triplet::DescriptionMode;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub questions: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub captions: Vec<PathBuf>,
    pub narratives: Vec<PathBuf>,
    /// Lexical graph TSV (`word<TAB>relation<TAB>word`).
    pub lexicon: Option<PathBuf>,
    /// Whitespace-separated `word v1 .. vd` embedding table.
    pub embeddings: Option<PathBuf>,
    /// One color per line; the built-in list when absent.
    pub colors: Option<PathBuf>,
    pub color_question_types: Option<PathBuf>,
    /// One object class per line; the COCO classes when absent.
    pub objects: Option<PathBuf>,
    /// `class<TAB>alias` lines added to the object classes.
    pub object_aliases: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DavSection {
    pub top_d: usize,
    pub top_j: usize,
    pub skip_no_majority: bool,
    /// `lexical_overlap`, `file:PATH` or `service:URL`.
    pub scorer: String,
}

impl Default for DavSection {
    fn default() -> Self {
        DavSection {
            top_d: 10,
            top_j: 5,
            skip_no_majority: false,
            scorer: "lexical_overlap".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DalSection {
    pub eda_rate: f64,
    pub eda_deletion_p: f64,
    pub contextual_k: Option<usize>,
    pub source_lang: String,
    pub pivot_lang: String,
    /// `identity`, `dictionary:PATH` or `service:URL`.
    pub translator: String,
    /// `identity`, `dictionary:PATH` or `service:URL`.
    pub infiller: String,
}

impl Default for DalSection {
    fn default() -> Self {
        let d = DalConfig::default();
        DalSection {
            eda_rate: d.eda_rate,
            eda_deletion_p: d.eda_deletion_p,
            contextual_k: d.contextual_k,
            source_lang: d.source_lang,
            pivot_lang: d.pivot_lang,
            translator: "identity".into(),
            infiller: "identity".into(),
        }
    }
}

impl DalSection {
    pub fn dal_config(&self) -> DalConfig {
        DalConfig {
            eda_rate: self.eda_rate,
            eda_deletion_p: self.eda_deletion_p,
            contextual_k: self.contextual_k,
            source_lang: self.source_lang.clone(),
            pivot_lang: self.pivot_lang.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncateSection {
    pub rates: Vec<f64>,
}

impl Default for TruncateSection {
    fn default() -> Self {
        TruncateSection {
            rates: (0..=10).map(|i| f64::from(i) / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub shards: usize,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub out: PathBuf,
    /// `none`, `narrative`, `whole` or `captions:k`.
    pub mode: String,
    pub techniques: Vec<String>,
    pub cache_dir: Option<PathBuf>,
    pub paths: Paths,
    pub dav: DavSection,
    pub dal: DalSection,
    pub truncate: TruncateSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            shards: 1,
            threads: 0,
            out: PathBuf::from("out"),
            mode: "whole".into(),
            techniques: Vec::new(),
            cache_dir: None,
            paths: Paths::default(),
            dav: DavSection::default(),
            dal: DalSection::default(),
            truncate: TruncateSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("config: {e}")))
    }

    /// Reads `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        if let Some(base) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            config.rebase(base);
        }
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for path in [
            &mut p.questions,
            &mut p.annotations,
            &mut p.lexicon,
            &mut p.embeddings,
            &mut p.colors,
            &mut p.color_question_types,
            &mut p.objects,
            &mut p.object_aliases,
            &mut self.cache_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(path);
        }
        p.captions.iter_mut().for_each(fix);
        p.narratives.iter_mut().for_each(fix);
        fix(&mut self.out);
        for (spec, prefix) in [
            (&mut self.dal.translator, "dictionary:"),
            (&mut self.dal.infiller, "dictionary:"),
            (&mut self.dav.scorer, "file:"),
        ] {
            if let Some(rest) = spec.strip_prefix(prefix) {
                let mut path = PathBuf::from(rest);
                fix(&mut path);
                *spec = format!("{prefix}{}", path.display());
            }
        }
    }

    pub fn description_mode(&self) -> Result<DescriptionMode> {
        self.mode.parse()
    }

    pub fn scorer_backend(&self) -> Result<ScorerBackend> {
        self.dav.scorer.parse()
    }

    pub fn validate(&self) -> Result<()> {
        if self.shards == 0 {
            return Err(Error::Usage("shards must be at least 1".into()));
        }
        self.description_mode()?;
        self.scorer_backend()?;
        if !(0.0..=1.0).contains(&self.dal.eda_rate)
            || !(0.0..=1.0).contains(&self.dal.eda_deletion_p)
        {
            return Err(Error::Usage("EDA rates must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn required<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::Usage(format!("config key `paths.{key}` is required")))
    }

    fn cache(&self) -> Option<ResponseCache> {
        self.cache_dir.as_ref().map(ResponseCache::new)
    }

    pub fn translator(&self) -> Result<Box<dyn Translator>> {
        let inner: Box<dyn Translator> = match backend_spec(&self.dal.translator)? {
            Backend::Identity => Box::new(IdentityTranslator),
            Backend::Dictionary(p) => Box::new(DictionaryTranslator::load(&p)?),
            Backend::Service(url) => Box::new(ServiceTranslator::new(
                &url,
                &self.dal.source_lang,
                &self.dal.pivot_lang,
            )),
        };
        Ok(match self.cache() {
            Some(c) => Box::new(CachedTranslator::new(inner, c)),
            None => inner,
        })
    }

    pub fn infiller(&self) -> Result<Box<dyn Infiller>> {
        let inner: Box<dyn Infiller> = match backend_spec(&self.dal.infiller)? {
            Backend::Identity => Box::new(IdentityInfiller),
            Backend::Dictionary(p) => Box::new(DictionaryInfiller::load(&p)?),
            Backend::Service(url) => Box::new(ServiceInfiller::new(&url)),
        };
        Ok(match self.cache() {
            Some(c) => Box::new(CachedInfiller::new(inner, c)),
            None => inner,
        })
    }
}

enum Backend {
    Identity,
    Dictionary(PathBuf),
    Service(String),
}

fn backend_spec(s: &str) -> Result<Backend> {
    if s == "identity" {
        Ok(Backend::Identity)
    } else if let Some(p) = s.strip_prefix("dictionary:") {
        Ok(Backend::Dictionary(PathBuf::from(p)))
    } else if let Some(url) = s.strip_prefix("service:") {
        Ok(Backend::Service(url.to_owned()))
    } else {
        Err(Error::Usage(format!(
            "unknown backend `{s}` (identity, dictionary:PATH, service:URL)"
        )))
    }
}
