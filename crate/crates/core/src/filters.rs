//! Document-level keep/drop decisions.
//!
//! Two families: labels from trained models (perplexity, language) and
//! handcrafted features (length, script ratio, short lines, dirty words,
//! entity-like tokens). Every filter is a pure function of the document and
//! its parameters, and reports the measured feature so parameter sweeps can
//! reuse it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::ngram::{classify_language, NgramModel};
use crate::retriever::{is_han, tokenize};

pub const NO_CONTENT: &str = "no_content";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub keep: bool,
    /// Empty iff `keep`.
    pub reason: String,
    pub feature_value: f64,
}

impl FilterDecision {
    pub fn keep(feature_value: f64) -> Self {
        FilterDecision { keep: true, reason: String::new(), feature_value }
    }

    pub fn drop(reason: &str, feature_value: f64) -> Self {
        FilterDecision { keep: false, reason: reason.to_string(), feature_value }
    }

    fn threshold(keep: bool, reason: &str, feature_value: f64) -> Self {
        if keep {
            Self::keep(feature_value)
        } else {
            Self::drop(reason, feature_value)
        }
    }
}

fn is_blank(text: &str) -> bool {
    text.chars().all(char::is_whitespace)
}

/// Keep iff `min_chars <= len <= max_chars`, counting Unicode scalars.
///
/// Empty text is an ordinary length-0 document here, so it drops as
/// `too_short` whenever `min_chars > 0`.
pub fn filter_by_length(doc: &Document, min_chars: usize, max_chars: usize) -> FilterDecision {
    let len = doc.text.chars().count();
    if len < min_chars {
        FilterDecision::drop("too_short", len as f64)
    } else if len > max_chars {
        FilterDecision::drop("too_long", len as f64)
    } else {
        FilterDecision::keep(len as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Script {
    LatinAlphabetic,
    Han,
}

impl std::str::FromStr for Script {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "latin-alphabetic" | "latin" => Ok(Script::LatinAlphabetic),
            "han" => Ok(Script::Han),
            other => Err(format!("unknown script '{other}' (expected latin-alphabetic or han)")),
        }
    }
}

/// Letters of the Latin script (basic, Latin-1, extended blocks, fullwidth).
pub fn is_latin_letter(c: char) -> bool {
    c.is_alphabetic()
        && matches!(c as u32,
            0x41..=0x5A | 0x61..=0x7A | 0xAA | 0xBA
            | 0xC0..=0x24F
            | 0x1E00..=0x1EFF
            | 0x2C60..=0x2C7F
            | 0xA720..=0xA7FF
            | 0xAB30..=0xAB6F
            | 0xFF21..=0xFF3A | 0xFF41..=0xFF5A)
}

impl Script {
    pub fn contains(self, c: char) -> bool {
        match self {
            Script::LatinAlphabetic => is_latin_letter(c),
            Script::Han => is_han(c),
        }
    }
}

/// Fraction of non-whitespace characters that belong to `script`.
pub fn filter_by_alpha_ratio(doc: &Document, min_ratio: f64, script: Script) -> FilterDecision {
    let (mut total, mut hits) = (0usize, 0usize);
    for c in doc.text.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        hits += usize::from(script.contains(c));
    }
    if total == 0 {
        return FilterDecision::drop(NO_CONTENT, 0.0);
    }
    let ratio = hits as f64 / total as f64;
    FilterDecision::threshold(ratio >= min_ratio, "alpha_ratio_below_threshold", ratio)
}

/// Fraction of non-blank lines at most `short_line_max_chars` long.
pub fn filter_by_short_lines(doc: &Document, short_line_max_chars: usize, max_fraction: f64) -> FilterDecision {
    let (mut lines, mut short) = (0usize, 0usize);
    for line in doc.text.split('\n').filter(|l| !is_blank(l)) {
        lines += 1;
        short += usize::from(line.trim_end_matches('\r').chars().count() <= short_line_max_chars);
    }
    if lines == 0 {
        return FilterDecision::drop(NO_CONTENT, 0.0);
    }
    let fraction = short as f64 / lines as f64;
    FilterDecision::threshold(fraction <= max_fraction, "short_line_fraction_above_threshold", fraction)
}

/// A set of phrases to count, stored in tokenized (NFC, lowercased) form so
/// that matching respects word boundaries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    by_first: HashMap<String, Vec<Vec<String>>>,
    len: usize,
}

impl Lexicon {
    pub fn from_phrases<I, S>(phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = Lexicon::default();
        let mut seen = BTreeSet::new();
        for p in phrases {
            let toks = tokenize(p.as_ref());
            if toks.is_empty() || !seen.insert(toks.clone()) {
                continue;
            }
            lex.by_first.entry(toks[0].clone()).or_default().push(toks);
            lex.len += 1;
        }
        lex
    }

    /// One phrase per line; `#` starts a comment line.
    pub fn parse(contents: &str) -> Self {
        Self::from_phrases(contents.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Phrases in token form, space-joined and sorted.
    pub fn phrases(&self) -> Vec<String> {
        let mut out: Vec<String> = self.by_first.values().flatten().map(|t| t.join(" ")).collect();
        out.sort();
        out
    }

    /// Occurrences of all phrases in `text`.
    pub fn count_hits(&self, text: &str) -> usize {
        let toks = tokenize(text);
        let mut hits = 0;
        for i in 0..toks.len() {
            if let Some(cands) = self.by_first.get(&toks[i]) {
                hits += cands.iter().filter(|p| toks[i..].starts_with(p)).count();
            }
        }
        hits
    }
}

pub fn filter_by_dirty_words(doc: &Document, lexicon: &Lexicon, max_hits: usize) -> FilterDecision {
    if is_blank(&doc.text) {
        return FilterDecision::drop(NO_CONTENT, 0.0);
    }
    let hits = lexicon.count_hits(&doc.text);
    FilterDecision::threshold(hits <= max_hits, "dirty_words_above_threshold", hits as f64)
}

/// `mean + s·std` perplexity cutoff, with mean and std measured on a
/// reference sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerplexityThreshold {
    pub mean: f64,
    pub std: f64,
    pub s: f64,
}

impl PerplexityThreshold {
    pub fn value(&self) -> f64 {
        self.mean + self.s * self.std
    }

    /// Mean and population std of perplexity over the non-empty documents
    /// of `reference`. `None` if there are none.
    pub fn from_reference<'a>(
        model: &NgramModel,
        reference: impl IntoIterator<Item = &'a Document>,
        s: f64,
    ) -> Option<Self> {
        let ppl: Vec<f64> = reference
            .into_iter()
            .filter_map(|d| model.perplexity(&d.text).ok())
            .collect();
        if ppl.is_empty() {
            return None;
        }
        let n = ppl.len() as f64;
        let mean = ppl.iter().sum::<f64>() / n;
        let var = ppl.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
        Some(PerplexityThreshold { mean, std: var.sqrt(), s })
    }
}

pub fn filter_by_perplexity(doc: &Document, model: &NgramModel, threshold: &PerplexityThreshold) -> FilterDecision {
    let Ok(ppl) = model.perplexity(&doc.text) else {
        return FilterDecision::drop(NO_CONTENT, 0.0);
    };
    if is_blank(&doc.text) {
        return FilterDecision::drop(NO_CONTENT, ppl);
    }
    FilterDecision::threshold(ppl <= threshold.value(), "perplexity_above_threshold", ppl)
}

/// Keep iff the best-scoring language is `target` by at least `min_margin`
/// nats per character. The feature is the margin.
pub fn filter_by_language(
    doc: &Document,
    models: &BTreeMap<String, NgramModel>,
    target: &str,
    min_margin: f64,
) -> FilterDecision {
    if is_blank(&doc.text) {
        return FilterDecision::drop(NO_CONTENT, 0.0);
    }
    match classify_language(models, &doc.text) {
        Err(_) => FilterDecision::drop(NO_CONTENT, 0.0),
        Ok((tag, margin)) if tag != target => FilterDecision::drop("language_mismatch", margin),
        Ok((_, margin)) => FilterDecision::threshold(margin >= min_margin, "language_margin_below_threshold", margin),
    }
}

/// Number of distinct entity-like tokens: tokens containing a digit, or
/// starting with an uppercase letter anywhere except right after a sentence
/// terminator. A proxy for named entities, not NER.
pub fn entity_like_count(text: &str) -> usize {
    let mut entities: BTreeSet<&str> = BTreeSet::new();
    let mut after_terminator = false;
    let mut start: Option<usize> = None;
    let mut flush = |s: usize, end: usize, after_terminator: bool| {
        let tok = &text[s..end];
        let has_digit = tok.chars().any(char::is_numeric);
        let capitalized = tok.chars().next().is_some_and(char::is_uppercase);
        if has_digit || (capitalized && !after_terminator) {
            entities.insert(tok);
        }
    };
    for (pos, c) in text.char_indices() {
        if c.is_alphanumeric() {
            start.get_or_insert(pos);
            continue;
        }
        if let Some(s) = start.take() {
            flush(s, pos, after_terminator);
            after_terminator = false;
        }
        if matches!(c, '.' | '!' | '?' | '。' | '！' | '？') {
            after_terminator = true;
        }
    }
    if let Some(s) = start {
        flush(s, text.len(), after_terminator);
    }
    entities.len()
}

pub fn filter_by_entity_count(doc: &Document, min_entities: usize, max_entities: usize) -> FilterDecision {
    if is_blank(&doc.text) {
        return FilterDecision::drop(NO_CONTENT, 0.0);
    }
    let n = entity_like_count(&doc.text);
    FilterDecision::threshold((min_entities..=max_entities).contains(&n), "entity_count_out_of_range", n as f64)
}
