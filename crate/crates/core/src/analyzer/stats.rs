use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sample_indices;
use crate::corpus::Document;
use crate::ngram::{classify_language, NgramModel};

pub const DEFAULT_BINS: usize = 50;
/// max/min ratio above which a positive feature gets log-spaced bins.
pub const LOG_SCALE_RATIO: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` strictly ascending edges. Bins are half-open except
    /// the last, which includes its upper edge.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    pub log_scale: bool,
}

impl Histogram {
    /// Bins spanning the observed range of `values`.
    pub fn auto(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let finite = values.iter().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        if lo > hi {
            return Self::with_edges(values, (0..=bins).map(|i| i as f64).collect(), false);
        }
        let log_scale = lo > 0.0 && hi / lo > LOG_SCALE_RATIO;
        let edges = if log_scale {
            let (a, b) = (lo.ln(), hi.ln());
            let mut e: Vec<f64> = (0..=bins).map(|i| (a + (b - a) * i as f64 / bins as f64).exp()).collect();
            e[0] = lo;
            e[bins] = hi;
            e
        } else if lo == hi {
            (0..=bins).map(|i| lo - 0.5 + i as f64 / bins as f64).collect()
        } else {
            let mut e: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
            e[bins] = hi;
            e
        };
        Self::with_edges(values, edges, log_scale)
    }

    /// Count `values` into fixed edges. Values outside go to under/overflow;
    /// non-finite values count as overflow.
    pub fn with_edges(values: &[f64], edges: Vec<f64>, log_scale: bool) -> Self {
        assert!(edges.len() >= 2 && edges.windows(2).all(|w| w[0] < w[1]), "edges must be strictly ascending");
        let bins = edges.len() - 1;
        let mut h = Histogram { counts: vec![0; bins], underflow: 0, overflow: 0, log_scale, edges };
        for &v in values {
            h.add(v);
        }
        h
    }

    fn add(&mut self, v: f64) {
        let last = *self.edges.last().unwrap();
        if !v.is_finite() || v > last {
            self.overflow += 1;
        } else if v < self.edges[0] {
            self.underflow += 1;
        } else {
            let i = self.edges.partition_point(|&e| e <= v).saturating_sub(1).min(self.counts.len() - 1);
            self.counts[i] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub count: u64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

impl FeatureStats {
    pub fn from_values(values: &[f64], bins: usize, edges: Option<&Histogram>) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let n = finite.len() as f64;
        let (mean, std, min, max) = if finite.is_empty() {
            (0.0, 0.0, 0.0, 0.0)
        } else {
            let mean = finite.iter().sum::<f64>() / n;
            let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
            let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (mean, var.sqrt(), min, max)
        };
        let histogram = match edges {
            Some(h) => Histogram::with_edges(values, h.edges.clone(), h.log_scale),
            None => Histogram::auto(values, bins),
        };
        FeatureStats {
            count: values.len() as u64,
            mean,
            std,
            min,
            max,
            histogram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: u64,
    pub total_chars: u64,
    /// Documents the features were computed over (all of them unless sampled).
    pub population: u64,
    pub seed: u64,
    pub length: Option<FeatureStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<FeatureStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<BTreeMap<String, u64>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StatsModels<'a> {
    pub lm: Option<&'a NgramModel>,
    pub languages: Option<&'a BTreeMap<String, NgramModel>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsOptions {
    pub bins: usize,
    /// Reservoir-sample this many documents for the features.
    pub sample: Option<usize>,
    pub seed: u64,
    /// Bin with these histograms' edges instead of the observed range.
    pub length_edges: Option<Histogram>,
    pub perplexity_edges: Option<Histogram>,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions { bins: DEFAULT_BINS, sample: None, seed: 0, length_edges: None, perplexity_edges: None }
    }
}

impl StatsOptions {
    /// Options that bin like `stats` did, for comparing two corpora.
    pub fn aligned_with(stats: &CorpusStats) -> Self {
        StatsOptions {
            seed: stats.seed,
            length_edges: stats.length.as_ref().map(|f| f.histogram.clone()),
            perplexity_edges: stats.perplexity.as_ref().map(|f| f.histogram.clone()),
            ..Default::default()
        }
    }
}

/// Lengths are in Unicode scalar values. Perplexity covers documents the
/// model can score; language covers non-blank documents.
pub fn compute_stats(corpus: &[Document], models: StatsModels<'_>, opts: &StatsOptions) -> CorpusStats {
    let picked: Vec<&Document> = match opts.sample {
        Some(k) => sample_indices(corpus.len(), k, opts.seed).into_iter().map(|i| &corpus[i]).collect(),
        None => corpus.iter().collect(),
    };
    let lengths: Vec<f64> = picked.par_iter().map(|d| d.char_len() as f64).collect();
    let total_chars = corpus.par_iter().map(|d| d.char_len() as u64).sum();
    let length = (!corpus.is_empty()).then(|| FeatureStats::from_values(&lengths, opts.bins, opts.length_edges.as_ref()));
    let perplexity = models.lm.map(|lm| {
        let ppl: Vec<f64> = picked
            .par_iter()
            .filter(|d| !d.text.trim().is_empty())
            .filter_map(|d| lm.perplexity(&d.text).ok())
            .collect();
        FeatureStats::from_values(&ppl, opts.bins, opts.perplexity_edges.as_ref())
    });
    let language = models.languages.map(|langs| {
        let tags: Vec<Option<String>> = picked
            .par_iter()
            .map(|d| if d.text.trim().is_empty() { None } else { classify_language(langs, &d.text).ok().map(|(t, _)| t) })
            .collect();
        let mut dist = BTreeMap::new();
        for t in tags.into_iter().flatten() {
            *dist.entry(t).or_default() += 1;
        }
        dist
    });
    CorpusStats {
        doc_count: corpus.len() as u64,
        total_chars,
        population: picked.len() as u64,
        seed: opts.seed,
        length,
        perplexity,
        language,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDiff {
    pub count_delta: i64,
    pub mean_delta: f64,
    pub std_delta: f64,
    /// Per-bin `refined - raw`; absent when the binnings differ.
    pub bin_deltas: Option<Vec<i64>>,
    pub underflow_delta: Option<i64>,
    pub overflow_delta: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDiff {
    pub doc_count_delta: i64,
    pub total_chars_delta: i64,
    pub features: BTreeMap<String, FeatureDiff>,
    pub language_deltas: BTreeMap<String, i64>,
    /// Features that could not be compared, with the reason.
    pub incompatible: BTreeMap<String, String>,
}

fn delta(a: u64, b: u64) -> i64 {
    b as i64 - a as i64
}

fn diff_feature(raw: &FeatureStats, refined: &FeatureStats) -> (FeatureDiff, Option<String>) {
    let same_bins = raw.histogram.edges == refined.histogram.edges;
    let d = FeatureDiff {
        count_delta: delta(raw.count, refined.count),
        mean_delta: refined.mean - raw.mean,
        std_delta: refined.std - raw.std,
        bin_deltas: same_bins
            .then(|| raw.histogram.counts.iter().zip(&refined.histogram.counts).map(|(a, b)| delta(*a, *b)).collect()),
        underflow_delta: same_bins.then(|| delta(raw.histogram.underflow, refined.histogram.underflow)),
        overflow_delta: same_bins.then(|| delta(raw.histogram.overflow, refined.histogram.overflow)),
    };
    (d, (!same_bins).then(|| "histogram edges differ".to_string()))
}

/// `refined - raw` for every feature present in both. Mismatches are
/// reported in `incompatible`, never as errors.
pub fn diff_stats(raw: &CorpusStats, refined: &CorpusStats) -> StatsDiff {
    let mut out = StatsDiff {
        doc_count_delta: delta(raw.doc_count, refined.doc_count),
        total_chars_delta: delta(raw.total_chars, refined.total_chars),
        features: BTreeMap::new(),
        language_deltas: BTreeMap::new(),
        incompatible: BTreeMap::new(),
    };
    for (name, a, b) in [
        ("length", &raw.length, &refined.length),
        ("perplexity", &raw.perplexity, &refined.perplexity),
    ] {
        match (a, b) {
            (Some(a), Some(b)) => {
                let (d, problem) = diff_feature(a, b);
                out.features.insert(name.into(), d);
                if let Some(p) = problem {
                    out.incompatible.insert(name.into(), p);
                }
            }
            (None, None) => {}
            _ => {
                out.incompatible.insert(name.into(), "present in only one of the two".into());
            }
        }
    }
    match (&raw.language, &refined.language) {
        (Some(a), Some(b)) => {
            for tag in a.keys().chain(b.keys()) {
                let d = delta(a.get(tag).copied().unwrap_or(0), b.get(tag).copied().unwrap_or(0));
                out.language_deltas.insert(tag.clone(), d);
            }
        }
        (None, None) => {}
        _ => {
            out.incompatible.insert("language".into(), "present in only one of the two".into());
        }
    }
    out
}

/// Stats of both corpora binned identically, and their difference.
pub fn compare_corpora(
    raw: &[Document],
    refined: &[Document],
    models: StatsModels<'_>,
    opts: &StatsOptions,
) -> (CorpusStats, CorpusStats, StatsDiff) {
    let a = compute_stats(raw, models, opts);
    let b = compute_stats(refined, models, &StatsOptions { bins: opts.bins, sample: opts.sample, ..StatsOptions::aligned_with(&a) });
    let d = diff_stats(&a, &b);
    (a, b, d)
}
