//! Sharded BM25 search over a corpus.
//!
//! Documents are routed to shards by a stable hash of their id. Scoring
//! always uses corpus-wide N, df and avgdl from the manifest, so the number
//! of shards changes layout but never scores.

mod format;
mod index;
mod snippet;
mod tokenize;

pub use index::{bm25_score, build_index, idf, Bm25Params, Index, IndexError, IndexManifest, Posting, SearchHit, ShardIndex, StoredDoc, DEFAULT_SHARDS};
pub use snippet::{snippet, MARK_CLOSE, MARK_OPEN, SNIPPET_WINDOW};
pub use tokenize::{is_han, token_spans, tokenize};
