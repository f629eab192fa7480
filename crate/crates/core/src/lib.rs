//! Building blocks for language-only visual question answering corpora:
//! corpus loading, triplet construction, augmentation and evaluation.

pub mod config;
pub mod corpus;
pub mod dal;
pub mod dav;
pub mod diag;
pub mod error;
pub mod eval;
pub mod http;
pub mod importance;
pub mod lexicon;
pub mod pipeline;
pub mod records;
pub mod seed;
pub mod text;
pub mod triplet;

pub use diag::Diagnostics;
pub use error::{Error, Result};
