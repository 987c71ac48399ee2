//! Near-duplicate removal with MinHash signatures and banded LSH.
//!
//! Pass one turns every document into word n-gram shingles, a MinHash
//! signature, and LSH band buckets. Pass two checks every pair that shares a
//! bucket with the signature estimate; pairs at or above the threshold are
//! joined with union-find, and each resulting cluster keeps only its
//! earliest document.

mod minhash;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::hash::hash_words;

pub use minhash::{estimate_jaccard, exact_jaccard, shingles, MinHashSignature, MinHasher, ShingleSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DedupError {
    #[error("no_shingles: document has no tokens")]
    NoShingles,
    #[error("signature mismatch: num_perm {0} vs {1} or different seeds")]
    SignatureMismatch(usize, usize),
    #[error("invalid dedup parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupParams {
    pub ngram: usize,
    pub num_perm: usize,
    pub bands: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for DedupParams {
    fn default() -> Self {
        DedupParams { ngram: 10, num_perm: 128, bands: 16, threshold: 0.7, seed: 0 }
    }
}

impl DedupParams {
    pub fn rows(&self) -> usize {
        self.num_perm / self.bands
    }

    /// Similarity at which a pair becomes a candidate with probability ~1/2.
    pub fn implied_threshold(&self) -> f64 {
        (1.0 / self.bands as f64).powf(1.0 / self.rows() as f64)
    }

    pub fn validate(&self) -> Result<(), DedupError> {
        let bad = |m: &str| Err(DedupError::InvalidParams(m.to_string()));
        if self.ngram == 0 {
            return bad("ngram must be >= 1");
        }
        if self.num_perm == 0 || self.bands == 0 || !self.num_perm.is_multiple_of(self.bands) {
            return bad("num_perm must be a positive multiple of bands");
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad("threshold must be in (0, 1]");
        }
        Ok(())
    }
}

/// Band buckets over signatures. Documents are referred to by ordinal.
#[derive(Debug, Clone)]
pub struct LshIndex {
    rows: usize,
    seed: u64,
    buckets: Vec<FxHashMap<u64, Vec<usize>>>,
}

impl LshIndex {
    pub fn new(bands: usize, rows: usize, seed: u64) -> Self {
        LshIndex { rows, seed, buckets: vec![FxHashMap::default(); bands] }
    }

    pub fn bands(&self) -> usize {
        self.buckets.len()
    }

    /// Digest of each band's row slice.
    pub fn band_digests(&self, sig: &MinHashSignature) -> Vec<u64> {
        assert_eq!(sig.values().len(), self.bands() * self.rows, "signature length must be bands * rows");
        sig.values()
            .chunks(self.rows)
            .enumerate()
            .map(|(band, rows)| hash_words(rows, self.seed ^ band as u64))
            .collect()
    }

    pub fn insert(&mut self, ordinal: usize, sig: &MinHashSignature) {
        let digests = self.band_digests(sig);
        self.insert_digests(ordinal, &digests);
    }

    fn insert_digests(&mut self, ordinal: usize, digests: &[u64]) {
        for (band, d) in digests.iter().enumerate() {
            self.buckets[band].entry(*d).or_default().push(ordinal);
        }
    }

    /// Buckets holding more than one document.
    pub fn shared_buckets(&self) -> impl Iterator<Item = &[usize]> {
        self.buckets.iter().flat_map(|b| b.values()).filter(|v| v.len() > 1).map(Vec::as_slice)
    }

    /// Whether two documents collide in at least one band.
    pub fn collide(&self, a: &MinHashSignature, b: &MinHashSignature) -> bool {
        self.band_digests(a).iter().zip(self.band_digests(b)).any(|(x, y)| *x == y)
    }
}

/// A group of near-duplicates. `members` are in input order and the first
/// is the representative; `similarities[i]` is the estimated Jaccard
/// similarity of `members[i]` to the representative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DupCluster {
    pub representative: String,
    pub members: Vec<String>,
    pub size: usize,
    pub similarities: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub input: usize,
    pub kept: usize,
    pub dropped: usize,
    pub clusters: usize,
    /// Documents without tokens; always kept, never compared.
    pub exempt: usize,
    pub candidate_pairs: usize,
    pub verified_pairs: usize,
}

#[derive(Debug, Clone)]
pub struct DedupOutcome {
    /// Ordinals of surviving documents, ascending.
    pub kept: Vec<usize>,
    pub clusters: Vec<DupCluster>,
    pub report: DedupReport,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Union keeping the smaller ordinal as root.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Deduplicate a corpus. Survivors keep their input order.
pub fn dedup_corpus(docs: &[Document], params: &DedupParams) -> Result<DedupOutcome, DedupError> {
    params.validate()?;
    let hasher = MinHasher::new(params.num_perm, params.seed);
    let signatures: Vec<Option<MinHashSignature>> = docs
        .par_iter()
        .map(|d| {
            let s = shingles(&d.text, params.ngram, params.seed);
            hasher.signature(&s).ok()
        })
        .collect();

    let mut index = LshIndex::new(params.bands, params.rows(), params.seed);
    let digests: Vec<Option<Vec<u64>>> =
        signatures.par_iter().map(|s| s.as_ref().map(|s| index.band_digests(s))).collect();
    for (ord, d) in digests.iter().enumerate() {
        if let Some(d) = d {
            index.insert_digests(ord, d);
        }
    }

    let mut uf = UnionFind::new(docs.len());
    let mut report = DedupReport { input: docs.len(), ..Default::default() };
    report.exempt = signatures.iter().filter(|s| s.is_none()).count();
    for bucket in index.shared_buckets() {
        for (i, &a) in bucket.iter().enumerate() {
            for &b in &bucket[i + 1..] {
                report.candidate_pairs += 1;
                if uf.find(a) == uf.find(b) {
                    continue;
                }
                let (sa, sb) = (signatures[a].as_ref().unwrap(), signatures[b].as_ref().unwrap());
                if estimate_jaccard(sa, sb)? >= params.threshold {
                    report.verified_pairs += 1;
                    uf.union(a, b);
                }
            }
        }
    }

    let mut groups: FxHashMap<usize, Vec<usize>> = FxHashMap::default();
    for ord in 0..docs.len() {
        let root = uf.find(ord);
        if root != ord {
            groups.entry(root).or_default().push(ord);
        }
    }
    let mut roots: Vec<usize> = groups.keys().copied().collect();
    roots.sort_unstable();
    let mut clusters = Vec::with_capacity(roots.len());
    for root in roots {
        let mut members = vec![root];
        members.extend(&groups[&root]);
        let rep_sig = signatures[root].as_ref().unwrap();
        let similarities = members
            .iter()
            .map(|&m| estimate_jaccard(signatures[m].as_ref().unwrap(), rep_sig))
            .collect::<Result<Vec<_>, _>>()?;
        clusters.push(DupCluster {
            representative: docs[root].id.clone(),
            size: members.len(),
            members: members.iter().map(|&m| docs[m].id.clone()).collect(),
            similarities,
        });
    }

    let kept: Vec<usize> = (0..docs.len()).filter(|&ord| uf.find(ord) == ord).collect();
    report.kept = kept.len();
    report.dropped = docs.len() - kept.len();
    report.clusters = clusters.len();
    Ok(DedupOutcome { kept, clusters, report })
}
