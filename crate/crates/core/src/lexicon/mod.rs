//! Static lexical resources consumed by the augmenters.

mod embeddings;
mod graph;
mod vocab;
mod wordnet;

pub use embeddings::EmbeddingTable;
pub use graph::{LexicalGraph, Relation, Relations};
pub use vocab::{
    is_color_question, read_word_list, AdversarialIndex, ColorSet, ObjectClassSet, QuestionTypeSet,
    COCO_CLASSES, COLOR_QUESTION_TYPES, DEFAULT_COLORS,
};
pub use wordnet::import_wordnet;
