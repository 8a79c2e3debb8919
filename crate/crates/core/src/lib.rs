//! Domain-corpus data selection for continual pretraining.
//!
//! Documents are scored along three axes (task similarity, surrogate
//! perplexity, part-of-speech entropy), each score is mapped to a percentile
//! interval, and a token-budgeted subset is chosen by hard ranking or by
//! weighted sampling without replacement.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod harness;
mod hash;
pub mod ingestion;
pub mod jsonl;
pub mod pipeline;
pub mod scorers;
pub mod selection;

pub use corpus::{read_corpus, tokenize, write_corpus, Corpus, Document, Source, TokenBudget};
pub use error::{Error, ErrorClass, Result};
