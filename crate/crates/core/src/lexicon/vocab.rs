use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::lexicon::{EmbeddingTable, LexicalGraph};
use crate::text::answer_key;

pub const DEFAULT_COLORS: [&str; 15] = [
    "black", "white", "red", "green", "blue", "yellow", "orange", "purple", "pink", "brown",
    "gray", "gold", "silver", "beige", "tan",
];

pub const COLOR_QUESTION_TYPES: [&str; 4] = [
    "what color",
    "what color are the",
    "what color is",
    "what color is the",
];

pub const COCO_CLASSES: [&str; 80] = [
    "person",
    "bicycle",
    "car",
    "motorcycle",
    "airplane",
    "bus",
    "train",
    "truck",
    "boat",
    "traffic light",
    "fire hydrant",
    "stop sign",
    "parking meter",
    "bench",
    "bird",
    "cat",
    "dog",
    "horse",
    "sheep",
    "cow",
    "elephant",
    "bear",
    "zebra",
    "giraffe",
    "backpack",
    "umbrella",
    "handbag",
    "tie",
    "suitcase",
    "frisbee",
    "skis",
    "snowboard",
    "sports ball",
    "kite",
    "baseball bat",
    "baseball glove",
    "skateboard",
    "surfboard",
    "tennis racket",
    "bottle",
    "wine glass",
    "cup",
    "fork",
    "knife",
    "spoon",
    "bowl",
    "banana",
    "apple",
    "sandwich",
    "orange",
    "broccoli",
    "carrot",
    "hot dog",
    "pizza",
    "donut",
    "cake",
    "chair",
    "couch",
    "potted plant",
    "bed",
    "dining table",
    "toilet",
    "tv",
    "laptop",
    "mouse",
    "remote",
    "keyboard",
    "cell phone",
    "microwave",
    "oven",
    "toaster",
    "sink",
    "refrigerator",
    "book",
    "clock",
    "vase",
    "scissors",
    "teddy bear",
    "hair drier",
    "toothbrush",
];

const DEFAULT_ALIASES: &[(&str, &[&str])] = &[
    (
        "person",
        &[
            "people", "man", "woman", "men", "women", "boy", "girl", "child", "kid",
        ],
    ),
    ("bicycle", &["bike"]),
    ("motorcycle", &["motorbike"]),
    ("airplane", &["plane", "aeroplane", "jet"]),
    ("tv", &["television"]),
    ("couch", &["sofa"]),
    ("cell phone", &["phone", "cellphone"]),
    ("dining table", &["table"]),
    ("laptop", &["computer"]),
    ("donut", &["doughnut"]),
    ("refrigerator", &["fridge"]),
    ("hair drier", &["hairdryer", "hair dryer"]),
    ("sports ball", &["ball"]),
    ("potted plant", &["plant"]),
    ("hot dog", &["hotdog"]),
    ("teddy bear", &["teddy"]),
    ("remote", &["controller"]),
];

/// Reads a one-entry-per-line word list, lowercased, skipping blanks and `#`
/// comments.
pub fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

/// The color vocabulary used by color inversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorSet {
    colors: Vec<String>,
}

impl ColorSet {
    pub fn new<I, S>(colors: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for c in colors {
            let c = c.as_ref().trim().to_lowercase();
            if c.is_empty() || c.split_whitespace().count() != 1 {
                return Err(Error::Usage(format!("color `{c}` is not a single token")));
            }
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
        if out.len() < 2 {
            return Err(Error::Usage("a color set needs at least two colors".into()));
        }
        Ok(Self { colors: out })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(read_word_list(path)?)
    }

    pub fn colors(&self) -> &[String] {
        &self.colors
    }

    pub fn contains(&self, word: &str) -> bool {
        self.colors.iter().any(|c| c == word)
    }
}

impl Default for ColorSet {
    fn default() -> Self {
        Self::new(DEFAULT_COLORS).expect("default colors are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionTypeSet {
    types: HashSet<String>,
}

impl QuestionTypeSet {
    pub fn new<I, S>(types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            types: types.into_iter().map(|t| answer_key(t.as_ref())).collect(),
        }
    }

    pub fn contains(&self, question_type: &str) -> bool {
        self.types.contains(&question_type.trim().to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

impl Default for QuestionTypeSet {
    fn default() -> Self {
        Self::new(COLOR_QUESTION_TYPES)
    }
}

pub fn is_color_question(question_type: &str, types: &QuestionTypeSet) -> bool {
    types.contains(question_type)
}

/// Object classes with their hand-maintained aliases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectClassSet {
    classes: Vec<String>,
    aliases: BTreeMap<String, Vec<String>>,
}

impl ObjectClassSet {
    pub fn new<I, S>(classes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            classes: classes
                .into_iter()
                .map(|c| answer_key(c.as_ref()))
                .collect(),
            aliases: BTreeMap::new(),
        }
    }

    pub fn add_alias(&mut self, class: &str, alias: &str) {
        let (class, alias) = (answer_key(class), answer_key(alias));
        if class == alias || alias.is_empty() {
            return;
        }
        let list = self.aliases.entry(class).or_default();
        if !list.contains(&alias) {
            list.push(alias);
        }
    }

    /// Reads `class<TAB>alias` lines on top of the current aliases.
    pub fn load_aliases(&mut self, path: &Path) -> Result<Diagnostics> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut diagnostics = Diagnostics::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('\t') {
                Some((class, alias)) if !class.trim().is_empty() => self.add_alias(class, alias),
                _ => diagnostics.record(
                    "malformed_alias",
                    format!("{}:{}", path.display(), lineno + 1),
                ),
            }
        }
        Ok(diagnostics)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn contains(&self, word: &str) -> bool {
        self.classes.iter().any(|c| c == word)
    }

    pub fn aliases(&self, class: &str) -> &[String] {
        self.aliases.get(class).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Lexical-graph synonyms followed by aliases, deduplicated.
    pub fn synonyms(&self, class: &str, graph: &LexicalGraph) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in graph.synonyms_of(class).iter().chain(self.aliases(class)) {
            if s != class && !out.contains(s) {
                out.push(s.clone());
            }
        }
        out
    }
}

impl Default for ObjectClassSet {
    fn default() -> Self {
        let mut set = Self::new(COCO_CLASSES);
        for (class, aliases) in DEFAULT_ALIASES {
            for alias in *aliases {
                set.add_alias(class, alias);
            }
        }
        set
    }
}

/// Precomputed adversarial word per object class.
///
/// The nearest-neighbour scan is linear in the vocabulary, so it runs once
/// per class rather than once per sample.
#[derive(Debug, Clone, Default)]
pub struct AdversarialIndex {
    words: BTreeMap<String, Option<String>>,
}

impl AdversarialIndex {
    pub fn build(objects: &ObjectClassSet, graph: &LexicalGraph, table: &EmbeddingTable) -> Self {
        let words = objects
            .classes()
            .par_iter()
            .map(|class| {
                let mut exclusions: HashSet<String> =
                    objects.synonyms(class, graph).into_iter().collect();
                exclusions.insert(class.clone());
                let adv = table
                    .nearest_adversarial(class, &exclusions)
                    .map(str::to_owned);
                (class.clone(), adv)
            })
            .collect();
        Self { words }
    }

    /// `None` when the class is unknown to the embedding table.
    pub fn get(&self, class: &str) -> Option<&str> {
        self.words.get(class).and_then(|w| w.as_deref())
    }

    pub fn from_map(words: BTreeMap<String, Option<String>>) -> Self {
        Self { words }
    }
}
