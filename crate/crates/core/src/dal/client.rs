//! Translation and infill clients: HTTP services plus offline stubs, and a
//! content-addressed response cache that wraps either.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::http::JsonService;
use crate::text::{core_lower, normalize_ws};

pub const TRANSLATE_ROUTE: &str = "/v1/translate";
pub const INFILL_ROUTE: &str = "/v1/infill";

/// Round-trip paraphraser: source language to pivot and back.
pub trait Translator: Send + Sync {
    fn round_trip(&self, text: &str) -> Result<String>;

    /// Cache namespace; must change whenever outputs could.
    fn cache_namespace(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfillMode {
    Replace,
    Insert,
}

impl fmt::Display for InfillMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InfillMode::Replace => "replace",
            InfillMode::Insert => "insert",
        })
    }
}

/// Contextual word supplier: the word to put at (replace) or after (insert)
/// `position`.
pub trait Infiller: Send + Sync {
    fn infill(&self, tokens: &[String], position: usize, mode: InfillMode) -> Result<String>;

    fn cache_namespace(&self) -> String;
}

#[derive(Serialize)]
struct TranslateRequest<'a> {
    text: &'a str,
    source_lang: &'a str,
    pivot_lang: &'a str,
}

#[derive(Deserialize)]
struct TranslateReply {
    text: String,
}

/// Client for `POST /v1/translate`; one request performs the full round
/// trip.
#[derive(Debug, Clone)]
pub struct ServiceTranslator {
    service: JsonService,
    source_lang: String,
    pivot_lang: String,
}

impl ServiceTranslator {
    pub fn new(endpoint: &str, source_lang: &str, pivot_lang: &str) -> Self {
        ServiceTranslator {
            service: JsonService::new(endpoint, TRANSLATE_ROUTE),
            source_lang: source_lang.into(),
            pivot_lang: pivot_lang.into(),
        }
    }

    pub fn with_service(mut self, service: JsonService) -> Self {
        self.service = service;
        self
    }
}

impl Translator for ServiceTranslator {
    fn round_trip(&self, text: &str) -> Result<String> {
        let reply: TranslateReply = self.service.post(&TranslateRequest {
            text,
            source_lang: &self.source_lang,
            pivot_lang: &self.pivot_lang,
        })?;
        Ok(reply.text)
    }

    fn cache_namespace(&self) -> String {
        format!(
            "bt-{}-{}-{}",
            self.source_lang,
            self.pivot_lang,
            short_hash(self.service.url())
        )
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn round_trip(&self, text: &str) -> Result<String> {
        Ok(text.to_owned())
    }

    fn cache_namespace(&self) -> String {
        "bt-identity".into()
    }
}

/// Looks rewrites up in a fixed table; unknown inputs come back unchanged.
#[derive(Debug, Clone, Default)]
pub struct DictionaryTranslator {
    table: HashMap<String, String>,
}

impl DictionaryTranslator {
    pub fn new<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        DictionaryTranslator {
            table: pairs
                .into_iter()
                .map(|(k, v)| (normalize_ws(k.as_ref()), v.into()))
                .collect(),
        }
    }

    /// Reads `source<TAB>paraphrase` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let pairs = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split_once('\t').ok_or_else(|| Error::Format {
                    path: path.to_owned(),
                    message: format!("expected `source<TAB>paraphrase`, got `{l}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(
            pairs.into_iter().map(|(k, v)| (k, v.trim().to_owned())),
        ))
    }
}

impl Translator for DictionaryTranslator {
    fn round_trip(&self, text: &str) -> Result<String> {
        Ok(self
            .table
            .get(&normalize_ws(text))
            .cloned()
            .unwrap_or_else(|| text.to_owned()))
    }

    fn cache_namespace(&self) -> String {
        "bt-dictionary".into()
    }
}

#[derive(Serialize)]
struct InfillRequest<'a> {
    tokens: &'a [String],
    position: usize,
    mode: InfillMode,
}

#[derive(Deserialize)]
struct InfillReply {
    word: String,
}

/// Client for `POST /v1/infill`.
#[derive(Debug, Clone)]
pub struct ServiceInfiller {
    service: JsonService,
}

impl ServiceInfiller {
    pub fn new(endpoint: &str) -> Self {
        ServiceInfiller {
            service: JsonService::new(endpoint, INFILL_ROUTE),
        }
    }

    pub fn with_service(service: JsonService) -> Self {
        ServiceInfiller { service }
    }
}

impl Infiller for ServiceInfiller {
    fn infill(&self, tokens: &[String], position: usize, mode: InfillMode) -> Result<String> {
        let reply: InfillReply = self.service.post(&InfillRequest {
            tokens,
            position,
            mode,
        })?;
        let word = reply.word.trim();
        if word.is_empty() || word.contains(char::is_whitespace) {
            return Err(Error::Backend(format!(
                "infill returned `{}`, not a single word",
                reply.word
            )));
        }
        Ok(word.to_owned())
    }

    fn cache_namespace(&self) -> String {
        format!("infill-{}", short_hash(self.service.url()))
    }
}

/// Echoes the word at `position`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityInfiller;

impl Infiller for IdentityInfiller {
    fn infill(&self, tokens: &[String], position: usize, _mode: InfillMode) -> Result<String> {
        tokens
            .get(position)
            .map(|t| core_lower(t))
            .ok_or_else(|| Error::Backend(format!("position {position} out of range")))
    }

    fn cache_namespace(&self) -> String {
        "infill-identity".into()
    }
}

/// Per-mode lookup keyed by the lowercase word at `position`; misses echo
/// that word.
#[derive(Debug, Clone, Default)]
pub struct DictionaryInfiller {
    replace: HashMap<String, String>,
    insert: HashMap<String, String>,
}

impl DictionaryInfiller {
    pub fn add(&mut self, mode: InfillMode, word: &str, substitute: &str) {
        let table = match mode {
            InfillMode::Replace => &mut self.replace,
            InfillMode::Insert => &mut self.insert,
        };
        table.insert(word.trim().to_lowercase(), substitute.trim().to_owned());
    }

    /// Reads `mode<TAB>word<TAB>substitute` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut out = Self::default();
        for line in text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        {
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Format {
                path: path.to_owned(),
                message: format!("expected `mode<TAB>word<TAB>substitute`, got `{line}`"),
            };
            let [mode, word, substitute] = fields[..] else {
                return Err(bad());
            };
            let mode = match mode.trim() {
                "replace" => InfillMode::Replace,
                "insert" => InfillMode::Insert,
                _ => return Err(bad()),
            };
            out.add(mode, word, substitute);
        }
        Ok(out)
    }
}

impl Infiller for DictionaryInfiller {
    fn infill(&self, tokens: &[String], position: usize, mode: InfillMode) -> Result<String> {
        let word = IdentityInfiller.infill(tokens, position, mode)?;
        let table = match mode {
            InfillMode::Replace => &self.replace,
            InfillMode::Insert => &self.insert,
        };
        Ok(table.get(&word).cloned().unwrap_or(word))
    }

    fn cache_namespace(&self) -> String {
        "infill-dictionary".into()
    }
}

fn short_hash(s: &str) -> String {
    hex::encode(&Sha256::digest(s.as_bytes())[..6])
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    input: String,
    output: String,
}

/// Content-addressed response store: one JSON file per (namespace, input),
/// written by atomic rename.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    fn path(&self, namespace: &str, input: &str) -> PathBuf {
        let digest = hex::encode(Sha256::digest(input.as_bytes()));
        self.dir
            .join(namespace)
            .join(&digest[..2])
            .join(format!("{digest}.json"))
    }

    pub fn get(&self, namespace: &str, input: &str) -> Option<String> {
        let bytes = fs::read(self.path(namespace, input)).ok()?;
        let entry: CacheEntry = serde_json::from_slice(&bytes).ok()?;
        (entry.input == input).then_some(entry.output)
    }

    pub fn put(&self, namespace: &str, input: &str, output: &str) -> Result<()> {
        let path = self.path(namespace, input);
        let dir = path.parent().expect("cache paths have a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        let entry = CacheEntry {
            input: input.to_owned(),
            output: output.to_owned(),
        };
        serde_json::to_writer(&mut tmp, &entry)?;
        tmp.flush().map_err(|e| Error::io(&path, e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }

    fn through(
        &self,
        namespace: &str,
        input: &str,
        call: impl FnOnce() -> Result<String>,
    ) -> Result<String> {
        if let Some(hit) = self.get(namespace, input) {
            return Ok(hit);
        }
        let output = call()?;
        self.put(namespace, input, &output)?;
        Ok(output)
    }
}

pub struct CachedTranslator<T> {
    inner: T,
    cache: ResponseCache,
}

impl<T: Translator> CachedTranslator<T> {
    pub fn new(inner: T, cache: ResponseCache) -> Self {
        CachedTranslator { inner, cache }
    }
}

impl<T: Translator> Translator for CachedTranslator<T> {
    fn round_trip(&self, text: &str) -> Result<String> {
        let ns = self.inner.cache_namespace();
        self.cache
            .through(&ns, text, || self.inner.round_trip(text))
    }

    fn cache_namespace(&self) -> String {
        self.inner.cache_namespace()
    }
}

pub struct CachedInfiller<T> {
    inner: T,
    cache: ResponseCache,
}

impl<T: Infiller> CachedInfiller<T> {
    pub fn new(inner: T, cache: ResponseCache) -> Self {
        CachedInfiller { inner, cache }
    }
}

impl<T: Infiller> Infiller for CachedInfiller<T> {
    fn infill(&self, tokens: &[String], position: usize, mode: InfillMode) -> Result<String> {
        let ns = format!("{}-{mode}", self.inner.cache_namespace());
        let key = format!("{position}\t{}", tokens.join(" "));
        self.cache
            .through(&ns, &key, || self.inner.infill(tokens, position, mode))
    }

    fn cache_namespace(&self) -> String {
        self.inner.cache_namespace()
    }
}

impl Translator for Box<dyn Translator> {
    fn round_trip(&self, text: &str) -> Result<String> {
        (**self).round_trip(text)
    }

    fn cache_namespace(&self) -> String {
        (**self).cache_namespace()
    }
}

impl Infiller for Box<dyn Infiller> {
    fn infill(&self, tokens: &[String], position: usize, mode: InfillMode) -> Result<String> {
        (**self).infill(tokens, position, mode)
    }

    fn cache_namespace(&self) -> String {
        (**self).cache_namespace()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting<'a>(&'a AtomicUsize);

    impl Translator for Counting<'_> {
        fn round_trip(&self, text: &str) -> Result<String> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(format!("{text}!"))
        }

        fn cache_namespace(&self) -> String {
            "counting".into()
        }
    }

    #[test]
    fn cache_serves_repeat_requests() {
        let dir = tempfile::tempdir().unwrap();
        let calls = AtomicUsize::new(0);
        let t = CachedTranslator::new(Counting(&calls), ResponseCache::new(dir.path()));
        assert_eq!(t.round_trip("hi").unwrap(), "hi!");
        assert_eq!(t.round_trip("hi").unwrap(), "hi!");
        assert_eq!(t.round_trip("yo").unwrap(), "yo!");
        assert_eq!(calls.load(Ordering::SeqCst), 2);

        // A fresh wrapper over the same directory starts warm.
        let t = CachedTranslator::new(Counting(&calls), ResponseCache::new(dir.path()));
        t.round_trip("hi").unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn dictionary_stubs() {
        let t = DictionaryTranslator::new([(
            "What is the giraffe standing behind?",
            "What's behind the giraffe?",
        )]);
        assert_eq!(
            t.round_trip("What is the  giraffe standing behind?")
                .unwrap(),
            "What's behind the giraffe?"
        );
        assert_eq!(t.round_trip("unknown").unwrap(), "unknown");

        let mut i = DictionaryInfiller::default();
        i.add(InfillMode::Replace, "standing", "tree");
        let toks: Vec<String> = ["the", "giraffe", "standing"].map(String::from).to_vec();
        assert_eq!(i.infill(&toks, 2, InfillMode::Replace).unwrap(), "tree");
        assert_eq!(i.infill(&toks, 2, InfillMode::Insert).unwrap(), "standing");
        assert!(i.infill(&toks, 9, InfillMode::Insert).is_err());
    }

    #[test]
    fn dictionary_files() {
        let dir = tempfile::tempdir().unwrap();
        let bt = dir.path().join("bt.tsv");
        fs::write(&bt, "a b\tb a\n").unwrap();
        assert_eq!(
            DictionaryTranslator::load(&bt)
                .unwrap()
                .round_trip("a b")
                .unwrap(),
            "b a"
        );
        let inf = dir.path().join("infill.tsv");
        fs::write(&inf, "insert\tstanding\tsilently\n").unwrap();
        let i = DictionaryInfiller::load(&inf).unwrap();
        assert_eq!(
            i.infill(&["standing".into()], 0, InfillMode::Insert)
                .unwrap(),
            "silently"
        );
        fs::write(&inf, "sideways\tstanding\tsilently\n").unwrap();
        assert!(DictionaryInfiller::load(&inf).is_err());
    }
}
