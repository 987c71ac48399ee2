use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::format;
use super::snippet::snippet;
use super::tokenize::tokenize;
use crate::corpus::Document;
use crate::hash::fnv1a64;

pub const DEFAULT_SHARDS: usize = 20;
pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("invalid index parameters: {0}")]
    InvalidParams(String),
    #[error("shard file: bad magic")]
    BadMagic,
    #[error("shard file: unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("shard file: truncated")]
    Truncated,
    #[error("index is inconsistent: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub ordinal: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredDoc {
    pub id: String,
    pub len: u32,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShardIndex {
    pub shard_id: u32,
    /// Term → postings sorted by ordinal.
    pub terms: BTreeMap<String, Vec<Posting>>,
    pub docs: Vec<StoredDoc>,
}

impl ShardIndex {
    fn new(shard_id: u32) -> Self {
        ShardIndex { shard_id, ..Default::default() }
    }

    fn add(&mut self, doc: &Document) {
        let ordinal = self.docs.len() as u32;
        let tokens = tokenize(&doc.text);
        let mut tfs: BTreeMap<String, u32> = BTreeMap::new();
        for t in &tokens {
            *tfs.entry(t.clone()).or_default() += 1;
        }
        for (term, tf) in tfs {
            self.terms.entry(term).or_default().push(Posting { ordinal, tf });
        }
        self.docs.push(StoredDoc { id: doc.id.clone(), len: tokens.len() as u32, text: doc.text.clone() });
    }

    pub fn total_tokens(&self) -> u64 {
        self.docs.iter().map(|d| u64::from(d.len)).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        format::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        format::decode(bytes)
    }

    /// Scores of every doc matching at least one term. `terms` must be the
    /// sorted distinct query terms so that summation order is fixed.
    fn score_terms(&self, manifest: &IndexManifest, terms: &[String]) -> BTreeMap<u32, f64> {
        let mut scores: BTreeMap<u32, f64> = BTreeMap::new();
        for term in terms {
            let (Some(postings), Some(&df)) = (self.terms.get(term), manifest.df.get(term)) else {
                continue;
            };
            let w = idf(manifest.num_docs, df);
            for p in postings {
                let dl = self.docs[p.ordinal as usize].len;
                *scores.entry(p.ordinal).or_insert(0.0) += term_weight(w, p.tf, dl, manifest);
            }
        }
        scores
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub version: u32,
    pub num_shards: usize,
    pub routing: String,
    pub num_docs: u64,
    pub total_tokens: u64,
    pub avgdl: f64,
    pub k1: f64,
    pub b: f64,
    pub shard_docs: Vec<u64>,
    pub df: BTreeMap<String, u64>,
}

impl IndexManifest {
    pub fn params(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }

    pub fn shard_for(&self, id: &str) -> usize {
        route(id, self.num_shards)
    }
}

fn route(id: &str, num_shards: usize) -> usize {
    (fnv1a64(id.as_bytes()) % num_shards as u64) as usize
}

/// ln(1 + (N − df + 0.5) / (df + 0.5)).
pub fn idf(num_docs: u64, df: u64) -> f64 {
    let (n, df) = (num_docs as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

fn term_weight(idf: f64, tf: u32, dl: u32, m: &IndexManifest) -> f64 {
    let tf = f64::from(tf);
    let norm = if m.avgdl > 0.0 { f64::from(dl) / m.avgdl } else { 1.0 };
    idf * (tf * (m.k1 + 1.0)) / (tf + m.k1 * (1.0 - m.b + m.b * norm))
}

/// BM25 of one document given its length and term frequencies. Query terms
/// are deduplicated; absent terms contribute 0.
pub fn bm25_score(manifest: &IndexManifest, doc_len: u32, tfs: &BTreeMap<String, u32>, query_terms: &[String]) -> f64 {
    let mut terms: Vec<&String> = query_terms.iter().collect();
    terms.sort();
    terms.dedup();
    let mut score = 0.0;
    for t in terms {
        if let (Some(&tf), Some(&df)) = (tfs.get(t), manifest.df.get(t)) {
            score += term_weight(idf(manifest.num_docs, df), tf, doc_len, manifest);
        }
    }
    score
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub id: String,
    pub score: f64,
    pub snippet: String,
}

#[derive(Debug, Clone)]
pub struct Index {
    pub manifest: IndexManifest,
    pub shards: Vec<ShardIndex>,
}

/// Build an index with `num_shards` shards. Shards are built in parallel;
/// within a shard, ordinals follow input order.
pub fn build_index(docs: &[Document], num_shards: usize, params: Bm25Params) -> Result<Index, IndexError> {
    if docs.is_empty() {
        return Err(IndexError::EmptyCorpus);
    }
    if num_shards == 0 || num_shards > u32::MAX as usize {
        return Err(IndexError::InvalidParams("num_shards must be >= 1".into()));
    }
    if !(params.k1 >= 0.0 && (0.0..=1.0).contains(&params.b)) {
        return Err(IndexError::InvalidParams("need k1 >= 0 and b in [0, 1]".into()));
    }
    let mut routed: Vec<Vec<&Document>> = vec![Vec::new(); num_shards];
    for d in docs {
        routed[route(&d.id, num_shards)].push(d);
    }
    let shards: Vec<ShardIndex> = routed
        .into_par_iter()
        .enumerate()
        .map(|(sid, docs)| {
            let mut shard = ShardIndex::new(sid as u32);
            for d in docs {
                shard.add(d);
            }
            shard
        })
        .collect();
    Ok(Index { manifest: manifest_for(&shards, params), shards })
}

fn manifest_for(shards: &[ShardIndex], params: Bm25Params) -> IndexManifest {
    let mut df: BTreeMap<String, u64> = BTreeMap::new();
    for s in shards {
        for (t, postings) in &s.terms {
            *df.entry(t.clone()).or_default() += postings.len() as u64;
        }
    }
    let shard_docs: Vec<u64> = shards.iter().map(|s| s.docs.len() as u64).collect();
    let num_docs: u64 = shard_docs.iter().sum();
    let total_tokens: u64 = shards.iter().map(ShardIndex::total_tokens).sum();
    IndexManifest {
        version: MANIFEST_VERSION,
        num_shards: shards.len(),
        routing: "fnv1a64(id) mod num_shards".into(),
        num_docs,
        total_tokens,
        avgdl: if num_docs == 0 { 0.0 } else { total_tokens as f64 / num_docs as f64 },
        k1: params.k1,
        b: params.b,
        shard_docs,
        df,
    }
}

pub fn shard_file_name(shard: usize) -> String {
    format!("shard-{shard:02}.idx")
}

impl Index {
    pub fn write(&self, dir: &Path) -> Result<(), IndexError> {
        fs::create_dir_all(dir)?;
        for s in &self.shards {
            fs::write(dir.join(shard_file_name(s.shard_id as usize)), s.to_bytes())?;
        }
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&self.manifest)?)?;
        Ok(())
    }

    pub fn open(dir: &Path) -> Result<Self, IndexError> {
        let manifest: IndexManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(IndexError::Corrupt(format!("manifest version {}", manifest.version)));
        }
        let shards = (0..manifest.num_shards)
            .into_par_iter()
            .map(|i| ShardIndex::from_bytes(&fs::read(dir.join(shard_file_name(i)))?))
            .collect::<Result<Vec<_>, _>>()?;
        let index = Index { manifest, shards };
        index.check()?;
        Ok(index)
    }

    fn check(&self) -> Result<(), IndexError> {
        for (i, s) in self.shards.iter().enumerate() {
            if s.shard_id as usize != i || self.manifest.shard_docs.get(i) != Some(&(s.docs.len() as u64)) {
                return Err(IndexError::Corrupt(format!("shard {i} does not match manifest")));
            }
        }
        Ok(())
    }

    /// Top-`k` hits by (score desc, id asc). Docs scoring 0 are not hits.
    pub fn search(&self, query: &str, k: usize) -> Vec<SearchHit> {
        let mut terms = tokenize(query);
        terms.sort();
        terms.dedup();
        if terms.is_empty() || k == 0 {
            return Vec::new();
        }
        let per_shard: Vec<Vec<(f64, &StoredDoc)>> = self
            .shards
            .par_iter()
            .map(|s| {
                let mut hits: Vec<(f64, &StoredDoc)> = s
                    .score_terms(&self.manifest, &terms)
                    .into_iter()
                    .filter(|(_, sc)| *sc > 0.0)
                    .map(|(ord, sc)| (sc, &s.docs[ord as usize]))
                    .collect();
                hits.sort_by(rank_order);
                hits.truncate(k);
                hits
            })
            .collect();
        let mut merged: Vec<(f64, &StoredDoc)> = per_shard.into_iter().flatten().collect();
        merged.sort_by(rank_order);
        merged.truncate(k);
        merged
            .into_iter()
            .map(|(score, d)| SearchHit { id: d.id.clone(), score, snippet: snippet(&d.text, &terms) })
            .collect()
    }
}

fn rank_order(a: &(f64, &StoredDoc), b: &(f64, &StoredDoc)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(texts: &[&str]) -> Vec<Document> {
        texts.iter().enumerate().map(|(i, t)| Document::new(format!("doc-{i}"), *t, "t")).collect()
    }

    #[test]
    fn single_doc_idf() {
        let idx = build_index(&corpus(&["renmin university"]), DEFAULT_SHARDS, Bm25Params::default()).unwrap();
        assert_eq!(idx.manifest.num_docs, 1);
        assert_eq!(idx.shards.iter().filter(|s| !s.docs.is_empty()).count(), 1);
        let hits = idx.search("Renmin", 5);
        assert_eq!(hits.len(), 1);
        // tf = 1 and dl = avgdl, so the tf factor is exactly 1.
        assert!((hits[0].score - (4.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn unique_term_ranks_first_and_misses_are_empty() {
        let idx = build_index(
            &corpus(&["the cat sat", "the dog ran", "a zebra and the cat"]),
            DEFAULT_SHARDS,
            Bm25Params::default(),
        )
        .unwrap();
        assert_eq!(idx.search("zebra", 3)[0].id, "doc-2");
        assert!(idx.search("unicorn", 3).is_empty());
        assert!(idx.search("  !! ", 3).is_empty());
        assert_eq!(idx.manifest.df["the"], 3);
        assert_eq!(idx.manifest.df["cat"], 2);
    }

    #[test]
    fn ties_break_by_id() {
        let idx = build_index(&corpus(&["same text", "same text", "same text"]), 4, Bm25Params::default()).unwrap();
        let ids: Vec<_> = idx.search("same", 10).into_iter().map(|h| h.id).collect();
        assert_eq!(ids, ["doc-0", "doc-1", "doc-2"]);
    }

    #[test]
    fn disk_roundtrip() {
        let docs = corpus(&["alpha beta", "beta gamma 数据", "gamma delta"]);
        let idx = build_index(&docs, DEFAULT_SHARDS, Bm25Params::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        idx.write(dir.path()).unwrap();
        assert!(dir.path().join("shard-19.idx").exists());
        let back = Index::open(dir.path()).unwrap();
        assert_eq!(back.manifest, idx.manifest);
        assert_eq!(back.shards, idx.shards);
        assert_eq!(back.search("gamma 数", 5), idx.search("gamma 数", 5));
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(build_index(&[], 20, Bm25Params::default()), Err(IndexError::EmptyCorpus)));
    }

    #[test]
    fn score_saturates_in_tf() {
        let idx = build_index(&corpus(&["x y z w"]), 1, Bm25Params::default()).unwrap();
        let q = vec!["x".to_string()];
        let mut prev = 0.0;
        for tf in 1..50 {
            let tfs = BTreeMap::from([("x".to_string(), tf)]);
            let s = bm25_score(&idx.manifest, 4, &tfs, &q);
            assert!(s > prev);
            assert!(s < idf(1, 1) * (1.2 + 1.0));
            prev = s;
        }
    }
}
