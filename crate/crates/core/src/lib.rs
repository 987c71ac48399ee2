//! Corpus curation for pretraining text.
//!
//! The crate is split along the two halves of the curation loop:
//!
//! * processing: [`corpus`] (JSONL records, reformatting, HTML extraction),
//!   [`cleaners`], [`filters`], [`dedup`] and the config-driven [`pipeline`]
//!   that chains them;
//! * analysis: [`analyzer`] (statistics, sampling, parameter sweeps, cleaner
//!   previews) and [`retriever`] (sharded BM25 search).
//!
//! [`ngram`] provides the character language model behind perplexity and
//! language-id filtering.

pub mod analyzer;
pub mod api;
pub mod cleaners;
pub mod corpus;
pub mod dedup;
pub mod filters;
pub mod hash;
pub mod ngram;
pub mod pipeline;
pub mod retriever;

pub use corpus::{Document, RecordError, RecordErrorKind};
pub use retriever::tokenize;
