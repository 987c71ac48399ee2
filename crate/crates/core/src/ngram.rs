//! Character n-gram language model with add-k smoothing.
//!
//! Texts are padded with `order - 1` BOS symbols and one EOS symbol. For a
//! context `c` and symbol `w`:
//!
//! ```text
//! P(w | c) = (count(c, w) + k) / (count(c, ·) + k · |V|)
//! ```
//!
//! where `V` holds the retained characters plus BOS, EOS and UNK. Contexts
//! never seen in training fall into the `count(c, ·) = 0` branch, which is
//! the uniform distribution. Characters seen fewer than `min_count` times in
//! training are not in `V` and score as UNK.

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

pub const MAX_ORDER: usize = 8;

/// A model symbol: a Unicode scalar value, or one of the reserved values
/// above the scalar range.
pub type Symbol = u32;
pub const BOS: Symbol = 0x11_0000;
pub const EOS: Symbol = 0x11_0001;
pub const UNK: Symbol = 0x11_0002;
const EMPTY_SLOT: Symbol = u32::MAX;

type ContextKey = [Symbol; MAX_ORDER - 1];

const MAGIC: &[u8; 4] = b"GNLM";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LmError {
    #[error("no_training_data: corpus is empty")]
    NoTrainingData,
    #[error("empty_text: perplexity is undefined for empty text")]
    EmptyText,
    #[error("invalid order {0}: must be in 1..=8")]
    InvalidOrder(usize),
    #[error("invalid smoothing constant {0}: must be finite and > 0")]
    InvalidK(f64),
    #[error("language identification needs at least two models, got {0}")]
    TooFewModels(usize),
    #[error("bad_magic: not a model file")]
    BadMagic,
    #[error("unsupported_version: file version {0}, reader supports {FORMAT_VERSION}")]
    UnsupportedVersion(u16),
    #[error("truncated: model file ends early")]
    Truncated,
    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

impl LmError {
    pub fn code(&self) -> &'static str {
        match self {
            LmError::NoTrainingData => "no_training_data",
            LmError::EmptyText => "empty_text",
            LmError::InvalidOrder(_) => "invalid_order",
            LmError::InvalidK(_) => "invalid_k",
            LmError::TooFewModels(_) => "too_few_models",
            LmError::BadMagic => "bad_magic",
            LmError::UnsupportedVersion(_) => "unsupported_version",
            LmError::Truncated => "truncated",
            LmError::Corrupt(_) => "corrupt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub order: usize,
    pub k: f64,
    /// Characters seen fewer times than this map to UNK.
    pub min_count: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { order: 5, k: 0.1, min_count: 2 }
    }
}

impl TrainOptions {
    fn validate(&self) -> Result<(), LmError> {
        if !(1..=MAX_ORDER).contains(&self.order) {
            return Err(LmError::InvalidOrder(self.order));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(LmError::InvalidK(self.k));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    next: FxHashMap<Symbol, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    k: f64,
    min_count: u64,
    vocab: FxHashSet<Symbol>,
    counts: FxHashMap<ContextKey, ContextCounts>,
    total_chars_trained: u64,
}

/// Summary used in CLI output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub order: usize,
    pub k: f64,
    pub min_count: u64,
    pub vocab_size: usize,
    pub contexts: usize,
    pub total_chars_trained: u64,
}

impl NgramModel {
    /// Train on a set of texts.
    pub fn train<S: AsRef<str>>(texts: &[S], opts: TrainOptions) -> Result<Self, LmError> {
        opts.validate()?;
        if texts.is_empty() {
            return Err(LmError::NoTrainingData);
        }
        let mut char_counts: FxHashMap<char, u64> = FxHashMap::default();
        let mut total_chars = 0u64;
        for t in texts {
            for c in t.as_ref().chars() {
                *char_counts.entry(c).or_default() += 1;
                total_chars += 1;
            }
        }
        let mut vocab: FxHashSet<Symbol> = char_counts
            .into_iter()
            .filter(|&(_, n)| n >= opts.min_count)
            .map(|(c, _)| c as Symbol)
            .collect();
        vocab.extend([BOS, EOS, UNK]);

        let mut model = NgramModel {
            order: opts.order,
            k: opts.k,
            min_count: opts.min_count,
            vocab,
            counts: FxHashMap::default(),
            total_chars_trained: total_chars,
        };
        for t in texts {
            let seq = model.padded(t.as_ref());
            for j in (model.order - 1)..seq.len() {
                let key = model.key(&seq[j + 1 - model.order..j]);
                let entry = model.counts.entry(key).or_default();
                entry.total += 1;
                *entry.next.entry(seq[j]).or_default() += 1;
            }
        }
        Ok(model)
    }

    /// A model with the given vocabulary (plus specials) and no counts: every
    /// conditional distribution is uniform.
    pub fn uniform(order: usize, k: f64, chars: impl IntoIterator<Item = char>) -> Result<Self, LmError> {
        let opts = TrainOptions { order, k, min_count: 1 };
        opts.validate()?;
        let mut vocab: FxHashSet<Symbol> = chars.into_iter().map(|c| c as Symbol).collect();
        vocab.extend([BOS, EOS, UNK]);
        Ok(NgramModel {
            order,
            k,
            min_count: 1,
            vocab,
            counts: FxHashMap::default(),
            total_chars_trained: 0,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Vocabulary in ascending symbol order.
    pub fn vocab(&self) -> Vec<Symbol> {
        let mut v: Vec<_> = self.vocab.iter().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn info(&self) -> ModelInfo {
        ModelInfo {
            order: self.order,
            k: self.k,
            min_count: self.min_count,
            vocab_size: self.vocab.len(),
            contexts: self.counts.len(),
            total_chars_trained: self.total_chars_trained,
        }
    }

    /// Observed contexts and their symbol counts, sorted.
    pub fn observed(&self) -> BTreeMap<Vec<Symbol>, BTreeMap<Symbol, u64>> {
        self.counts
            .iter()
            .map(|(key, cc)| {
                (key[..self.order - 1].to_vec(), cc.next.iter().map(|(&s, &n)| (s, n)).collect())
            })
            .collect()
    }

    /// Map a character to its model symbol.
    pub fn symbol(&self, c: char) -> Symbol {
        let s = c as Symbol;
        if self.vocab.contains(&s) {
            s
        } else {
            UNK
        }
    }

    fn padded(&self, text: &str) -> Vec<Symbol> {
        let mut seq = Vec::with_capacity(text.len() + self.order);
        seq.resize(self.order - 1, BOS);
        seq.extend(text.chars().map(|c| self.symbol(c)));
        seq.push(EOS);
        seq
    }

    fn key(&self, context: &[Symbol]) -> ContextKey {
        let mut key = [EMPTY_SLOT; MAX_ORDER - 1];
        key[..context.len()].copy_from_slice(context);
        key
    }

    /// P(symbol | context). `context` must hold exactly `order - 1` symbols.
    pub fn prob(&self, context: &[Symbol], symbol: Symbol) -> f64 {
        assert_eq!(context.len(), self.order - 1, "context length must be order - 1");
        let v = self.vocab.len() as f64;
        let (n_cw, n_c) = self.counts_at(context, symbol);
        (n_cw as f64 + self.k) / (n_c as f64 + self.k * v)
    }

    fn counts_at(&self, context: &[Symbol], symbol: Symbol) -> (u64, u64) {
        match self.counts.get(&self.key(context)) {
            Some(cc) => (cc.next.get(&symbol).copied().unwrap_or(0), cc.total),
            None => (0, 0),
        }
    }

    /// Natural-log probability of `text` followed by EOS.
    pub fn log_prob(&self, text: &str) -> f64 {
        let seq = self.padded(text);
        let mut total = 0.0;
        for j in (self.order - 1)..seq.len() {
            total += self.prob(&seq[j + 1 - self.order..j], seq[j]).ln();
        }
        total
    }

    /// `log_prob / (chars + 1)`, the per-symbol average including EOS.
    pub fn mean_log_prob(&self, text: &str) -> f64 {
        self.log_prob(text) / (text.chars().count() + 1) as f64
    }

    /// `exp(-log_prob / N)` with `N = chars + 1`.
    ///
    /// Evaluated as the weighted geometric mean `Π q^(n_q / N)` over the
    /// distinct inverse probabilities `q` of the text's symbols, which is the
    /// same quantity but reproduces `|V|` exactly for a uniform model.
    pub fn perplexity(&self, text: &str) -> Result<f64, LmError> {
        if text.is_empty() {
            return Err(LmError::EmptyText);
        }
        let seq = self.padded(text);
        let n = (seq.len() + 1 - self.order) as f64;
        let v = self.vocab.len() as f64;
        let mut inverse: Vec<u64> = (self.order - 1..seq.len())
            .map(|j| {
                let (n_cw, n_c) = self.counts_at(&seq[j + 1 - self.order..j], seq[j]);
                ((n_c as f64 + self.k * v) / (n_cw as f64 + self.k)).to_bits()
            })
            .collect();
        inverse.sort_unstable();
        let mut ppl = 1.0;
        for group in inverse.chunk_by(|a, b| a == b) {
            ppl *= f64::from_bits(group[0]).powf(group.len() as f64 / n);
        }
        Ok(ppl)
    }

    /// Versioned little-endian binary encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.order as u8);
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.min_count.to_le_bytes());
        out.extend_from_slice(&self.total_chars_trained.to_le_bytes());
        let vocab = self.vocab();
        out.extend_from_slice(&(vocab.len() as u32).to_le_bytes());
        for s in vocab {
            out.extend_from_slice(&s.to_le_bytes());
        }
        let mut triples: Vec<(&[Symbol], Symbol, u64)> = self
            .counts
            .iter()
            .flat_map(|(key, cc)| cc.next.iter().map(move |(&s, &n)| (&key[..self.order - 1], s, n)))
            .collect();
        triples.sort_unstable();
        out.extend_from_slice(&(triples.len() as u64).to_le_bytes());
        for (ctx, s, n) in triples {
            for c in ctx {
                out.extend_from_slice(&c.to_le_bytes());
            }
            out.extend_from_slice(&s.to_le_bytes());
            out.extend_from_slice(&n.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LmError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(LmError::BadMagic);
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != FORMAT_VERSION {
            return Err(LmError::UnsupportedVersion(version));
        }
        let order = r.take(1)?[0] as usize;
        let k = f64::from_le_bytes(r.array()?);
        TrainOptions { order, k, min_count: 0 }.validate().map_err(|e| LmError::Corrupt(e.to_string()))?;
        let min_count = u64::from_le_bytes(r.array()?);
        let total_chars_trained = u64::from_le_bytes(r.array()?);
        let vocab_len = u32::from_le_bytes(r.array()?) as usize;
        let mut vocab = FxHashSet::default();
        for _ in 0..vocab_len {
            vocab.insert(u32::from_le_bytes(r.array()?));
        }
        for special in [BOS, EOS, UNK] {
            if !vocab.contains(&special) {
                return Err(LmError::Corrupt("reserved symbol missing from vocabulary".into()));
            }
        }
        let n_triples = u64::from_le_bytes(r.array()?);
        let mut model = NgramModel {
            order,
            k,
            min_count,
            vocab,
            counts: FxHashMap::default(),
            total_chars_trained,
        };
        let mut ctx = vec![0; order - 1];
        for _ in 0..n_triples {
            for c in ctx.iter_mut() {
                *c = u32::from_le_bytes(r.array()?);
            }
            let s = u32::from_le_bytes(r.array()?);
            let n = u64::from_le_bytes(r.array()?);
            let entry = model.counts.entry(model.key(&ctx)).or_default();
            entry.total += n;
            entry.next.insert(s, n);
        }
        if r.pos != bytes.len() {
            return Err(LmError::Corrupt("trailing bytes".into()));
        }
        Ok(model)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LmError> {
        let end = self.pos.checked_add(n).ok_or(LmError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(LmError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], LmError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

/// Pick the language whose model gives the highest mean log-probability.
/// Returns the tag and the margin over the runner-up. Ties go to the
/// lexicographically smallest tag.
pub fn classify_language(models: &BTreeMap<String, NgramModel>, text: &str) -> Result<(String, f64), LmError> {
    if models.len() < 2 {
        return Err(LmError::TooFewModels(models.len()));
    }
    if text.is_empty() {
        return Err(LmError::EmptyText);
    }
    let mut best: Option<(&str, f64)> = None;
    let mut second = f64::NEG_INFINITY;
    for (tag, model) in models {
        let score = model.mean_log_prob(text);
        match best {
            Some((_, b)) if score <= b => second = second.max(score),
            Some((_, b)) => {
                second = b;
                best = Some((tag, score));
            }
            None => best = Some((tag, score)),
        }
    }
    let (tag, score) = best.expect("at least two models");
    Ok((tag.to_string(), score - second))
}

/// Vocabulary as a sorted set of display strings (specials in angle brackets).
pub fn describe_vocab(model: &NgramModel) -> BTreeSet<String> {
    model
        .vocab()
        .into_iter()
        .map(|s| match s {
            BOS => "<bos>".to_string(),
            EOS => "<eos>".to_string(),
            UNK => "<unk>".to_string(),
            c => char::from_u32(c).map(String::from).unwrap_or_default(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn opts(order: usize, k: f64, min_count: u64) -> TrainOptions {
        TrainOptions { order, k, min_count }
    }

    /// Brute-force reference: strings for symbols, a plain HashMap of
    /// (context string, symbol string) counts, formula evaluated directly.
    struct BruteLm {
        order: usize,
        k: f64,
        vocab: Vec<String>,
        pair: HashMap<(Vec<String>, String), f64>,
        ctx: HashMap<Vec<String>, f64>,
    }

    impl BruteLm {
        fn train(texts: &[&str], order: usize, k: f64, min_count: usize) -> Self {
            let mut freq: HashMap<char, usize> = HashMap::new();
            for t in texts {
                for c in t.chars() {
                    *freq.entry(c).or_default() += 1;
                }
            }
            let mut vocab: Vec<String> =
                freq.iter().filter(|(_, &n)| n >= min_count).map(|(c, _)| c.to_string()).collect();
            vocab.extend(["<s>".into(), "</s>".into(), "<unk>".into()]);
            let mut lm = BruteLm { order, k, vocab, pair: HashMap::new(), ctx: HashMap::new() };
            for t in texts {
                let seq = lm.seq(t);
                for j in order - 1..seq.len() {
                    let c = seq[j + 1 - order..j].to_vec();
                    *lm.pair.entry((c.clone(), seq[j].clone())).or_default() += 1.0;
                    *lm.ctx.entry(c).or_default() += 1.0;
                }
            }
            lm
        }

        fn seq(&self, t: &str) -> Vec<String> {
            let mut s = vec!["<s>".to_string(); self.order - 1];
            for c in t.chars() {
                let c = c.to_string();
                s.push(if self.vocab.contains(&c) { c } else { "<unk>".into() });
            }
            s.push("</s>".into());
            s
        }

        fn log_prob(&self, t: &str) -> f64 {
            let seq = self.seq(t);
            let v = self.vocab.len() as f64;
            (self.order - 1..seq.len())
                .map(|j| {
                    let c = seq[j + 1 - self.order..j].to_vec();
                    let n_cw = self.pair.get(&(c.clone(), seq[j].clone())).copied().unwrap_or(0.0);
                    let n_c = self.ctx.get(&c).copied().unwrap_or(0.0);
                    ((n_cw + self.k) / (n_c + self.k * v)).ln()
                })
                .sum()
        }
    }

    #[test]
    fn counts_for_ab_bigram() {
        let m = NgramModel::train(&["ab"], opts(2, 1.0, 1)).unwrap();
        let obs = m.observed();
        let a = 'a' as Symbol;
        let b = 'b' as Symbol;
        assert_eq!(obs.len(), 3);
        assert_eq!(obs[&vec![BOS]], BTreeMap::from([(a, 1)]));
        assert_eq!(obs[&vec![a]], BTreeMap::from([(b, 1)]));
        assert_eq!(obs[&vec![b]], BTreeMap::from([(EOS, 1)]));
        assert_eq!(
            describe_vocab(&m),
            ["a", "b", "<unk>", "<bos>", "<eos>"].iter().map(|s| s.to_string()).collect()
        );
    }

    #[test]
    fn duplicated_corpus_doubles_counts() {
        let one = NgramModel::train(&["abca"], opts(3, 0.1, 1)).unwrap();
        let two = NgramModel::train(&["abca", "abca"], opts(3, 0.1, 1)).unwrap();
        let doubled: BTreeMap<_, BTreeMap<_, _>> = one
            .observed()
            .into_iter()
            .map(|(c, m)| (c, m.into_iter().map(|(s, n)| (s, 2 * n)).collect()))
            .collect();
        assert_eq!(two.observed(), doubled);
    }

    #[test]
    fn min_count_maps_rare_chars_to_unk() {
        let m = NgramModel::train(&["aab"], opts(2, 0.1, 2)).unwrap();
        assert_eq!(m.symbol('a'), 'a' as Symbol);
        assert_eq!(m.symbol('b'), UNK);
        assert_eq!(m.vocab_size(), 4);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let empty: [&str; 0] = [];
        assert_eq!(NgramModel::train(&empty, TrainOptions::default()), Err(LmError::NoTrainingData));
        assert!(matches!(NgramModel::train(&["a"], opts(0, 0.1, 1)), Err(LmError::InvalidOrder(0))));
        assert!(matches!(NgramModel::train(&["a"], opts(2, 0.0, 1)), Err(LmError::InvalidK(_))));
    }

    #[test]
    fn ab_log_prob_by_hand() {
        let m = NgramModel::train(&["ab"], opts(2, 1.0, 1)).unwrap();
        let expected = 3.0 * (2.0f64 / 6.0).ln();
        assert!((m.log_prob("ab") - expected).abs() < 1e-12);
        let ppl = m.perplexity("ab").unwrap();
        assert!((ppl - 3.0).abs() < 1e-12, "{ppl}");
    }

    #[test]
    fn empty_text_scores_only_eos() {
        let m = NgramModel::train(&["ab"], opts(2, 1.0, 1)).unwrap();
        assert_eq!(m.log_prob(""), m.prob(&[BOS], EOS).ln());
        assert_eq!(m.perplexity(""), Err(LmError::EmptyText));
    }

    #[test]
    fn uniform_model_perplexity_is_vocab_size() {
        let m = NgramModel::uniform(3, 0.1, ['a', 'b']).unwrap();
        assert_eq!(m.vocab_size(), 5);
        for text in ["a", "ab", "abba", "zzz", "ababababababababab"] {
            assert_eq!(m.perplexity(text).unwrap(), 5.0, "{text}");
        }
    }

    #[test]
    fn separates_disjoint_alphabets() {
        let mut models = BTreeMap::new();
        models.insert("A".to_string(), NgramModel::train(&["aaaa"], opts(2, 0.1, 1)).unwrap());
        models.insert("B".to_string(), NgramModel::train(&["bbbb"], opts(2, 0.1, 1)).unwrap());
        let (tag, margin) = classify_language(&models, "aaa").unwrap();
        let a = models["A"].log_prob("aaa") / 4.0;
        let b = models["B"].log_prob("aaa") / 4.0;
        assert!(a > b);
        assert_eq!(tag, "A");
        assert!((margin - (a - b)).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_the_first_tag() {
        let m = NgramModel::train(&["hello"], opts(2, 0.1, 1)).unwrap();
        let models = BTreeMap::from([("zz".to_string(), m.clone()), ("en".to_string(), m)]);
        assert_eq!(classify_language(&models, "hello").unwrap(), ("en".to_string(), 0.0));
    }

    #[test]
    fn classify_preconditions() {
        let m = NgramModel::train(&["x"], opts(1, 0.1, 1)).unwrap();
        let one = BTreeMap::from([("x".to_string(), m.clone())]);
        assert_eq!(classify_language(&one, "x"), Err(LmError::TooFewModels(1)));
        let two = BTreeMap::from([("x".to_string(), m.clone()), ("y".to_string(), m)]);
        assert_eq!(classify_language(&two, ""), Err(LmError::EmptyText));
    }

    #[test]
    fn training_text_prefers_its_own_model() {
        let text = "the quick brown fox jumps over the lazy dog";
        let own = NgramModel::train(&[text], opts(3, 0.1, 1)).unwrap();
        let other = NgramModel::train(&["0123456789 9876543210"], opts(3, 0.1, 1)).unwrap();
        assert!(own.mean_log_prob(text) > other.mean_log_prob(text));
    }

    #[test]
    fn save_load_roundtrip() {
        let m = NgramModel::train(&["hello world", "hold the door", "wörld"], opts(4, 0.25, 1)).unwrap();
        let bytes = m.to_bytes();
        let back = NgramModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        let mut rng_state = 7u64;
        for _ in 0..100 {
            let s: String = (0..12)
                .map(|_| {
                    rng_state = crate::hash::mix64(rng_state);
                    ['h', 'e', 'l', 'o', ' ', 'w', 'r', 'd', 'ö', 'z'][(rng_state % 10) as usize]
                })
                .collect();
            assert_eq!(back.log_prob(&s).to_bits(), m.log_prob(&s).to_bits());
        }
    }

    #[test]
    fn load_errors() {
        let m = NgramModel::train(&["abc"], opts(2, 0.1, 1)).unwrap();
        let bytes = m.to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(NgramModel::from_bytes(&bad), Err(LmError::BadMagic));
        let mut newer = bytes.clone();
        newer[4..6].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        assert_eq!(NgramModel::from_bytes(&newer), Err(LmError::UnsupportedVersion(FORMAT_VERSION + 1)));
        assert_eq!(NgramModel::from_bytes(&bytes[..bytes.len() - 3]), Err(LmError::Truncated));
    }

    #[test]
    fn matches_brute_force() {
        let corpus = ["abracadabra", "cadabra abra", "bar"];
        for order in 1..=4 {
            for k in [0.1, 1.0] {
                for min_count in [1, 2] {
                    let m = NgramModel::train(&corpus, opts(order, k, min_count as u64)).unwrap();
                    let o = BruteLm::train(&corpus, order, k, min_count);
                    for t in ["abra", "", "zzz", "cadabra", "barbarian"] {
                        let lp = o.log_prob(t);
                        assert!((m.log_prob(t) - lp).abs() < 1e-9, "{order} {k} {t}");
                        if !t.is_empty() {
                            let ppl = (-lp / (t.chars().count() + 1) as f64).exp();
                            assert!((m.perplexity(t).unwrap() - ppl).abs() < 1e-9 * ppl);
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn observed_contexts_are_normalized(
            texts in proptest::collection::vec("[abc d]{0,12}", 1..5),
            order in 1usize..5,
            k in 0.01f64..2.0,
        ) {
            let m = NgramModel::train(&texts, opts(order, k, 1)).unwrap();
            let vocab = m.vocab();
            for ctx in m.observed().keys() {
                let total: f64 = vocab.iter().map(|&s| m.prob(ctx, s)).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
            let unseen = vec![UNK; order - 1];
            let total: f64 = vocab.iter().map(|&s| m.prob(&unseen, s)).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }

        #[test]
        fn log_prob_nonpositive_and_ppl_at_least_one(
            texts in proptest::collection::vec("[ab]{1,8}", 1..4),
            probe in "[abc]{1,10}",
        ) {
            let m = NgramModel::train(&texts, opts(3, 0.1, 1)).unwrap();
            prop_assert!(m.log_prob(&probe) <= 0.0);
            prop_assert!(m.perplexity(&probe).unwrap() >= 1.0);
        }

        #[test]
        fn larger_k_moves_toward_uniform(texts in proptest::collection::vec("[abc]{1,8}", 1..4)) {
            let lo = NgramModel::train(&texts, opts(2, 0.1, 1)).unwrap();
            let hi = NgramModel::train(&texts, opts(2, 1.0, 1)).unwrap();
            let u = 1.0 / lo.vocab_size() as f64;
            for ctx in lo.observed().keys() {
                for s in lo.vocab() {
                    prop_assert!((hi.prob(ctx, s) - u).abs() <= (lo.prob(ctx, s) - u).abs() + 1e-15);
                }
            }
        }
    }
}
