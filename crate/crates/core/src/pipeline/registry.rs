//! The operator registry: names, kinds and parameter schemas.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Reformat,
    Clean,
    Filter,
    Dedup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Int,
    Float,
    Bool,
    String,
    /// A list of strings; a single comma-separated string is also accepted.
    StringList,
}

impl ParamType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ParamType::Int | ParamType::Float)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    /// `None` for required params and for optional params without a default.
    pub default: Option<Value>,
    pub doc: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub name: String,
    pub kind: OperatorKind,
    pub params: Vec<ParamSpec>,
    pub doc: String,
}

impl OperatorSpec {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }
}

fn req(name: &str, ty: ParamType, doc: &str) -> ParamSpec {
    ParamSpec { name: name.into(), ty, required: true, default: None, doc: doc.into() }
}

fn opt(name: &str, ty: ParamType, default: Option<Value>, doc: &str) -> ParamSpec {
    ParamSpec { name: name.into(), ty, required: false, default, doc: doc.into() }
}

fn op(name: &str, kind: OperatorKind, params: Vec<ParamSpec>, doc: &str) -> OperatorSpec {
    OperatorSpec { name: name.into(), kind, params, doc: doc.into() }
}

/// Every registered operator, sorted by name.
pub fn list_operators() -> Vec<OperatorSpec> {
    use OperatorKind::*;
    use ParamType::*;
    let mut ops = vec![
        op(
            "reformat",
            Reformat,
            vec![opt("format", String, Some(json!("jsonl")), "input format: jsonl, plain-text or html")],
            "Read raw input into JSONL documents. Malformed records are counted as drops.",
        ),
        op(
            "clean_text",
            Clean,
            vec![
                req("scope", String, "string, line or paragraph"),
                opt("matcher", String, Some(json!("exact")), "exact or regex"),
                req("pattern", String, "literal text or regular expression"),
                opt("action", String, Some(json!("remove")), "remove or replace"),
                opt("replace_with", String, None, "replacement, required when action is replace"),
                opt("fixpoint", Bool, Some(json!(false)), "repeat until no match remains"),
            ],
            "Remove or replace matches of one rule.",
        ),
        op("extract_html", Clean, vec![], "Strip markup and decode entities."),
        op(
            "filter_by_length",
            Filter,
            vec![
                opt("min_chars", Int, Some(json!(0)), "minimum length in characters"),
                opt("max_chars", Int, None, "maximum length in characters (unbounded if absent)"),
            ],
            "Keep documents whose character length is within bounds.",
        ),
        op(
            "filter_by_alpha_ratio",
            Filter,
            vec![
                opt("min_ratio", Float, Some(json!(0.5)), "minimum fraction of script letters among non-space chars"),
                opt("script", String, Some(json!("latin-alphabetic")), "latin-alphabetic or han"),
            ],
            "Drop documents with too few letters of the expected script.",
        ),
        op(
            "filter_by_short_lines",
            Filter,
            vec![
                opt("short_line_max_chars", Int, Some(json!(10)), "lines at most this long count as short"),
                opt("max_fraction", Float, Some(json!(0.5)), "maximum fraction of short lines"),
            ],
            "Drop documents dominated by short lines.",
        ),
        op(
            "filter_by_dirty_words",
            Filter,
            vec![
                opt("lexicon_path", String, None, "file with one phrase per line, # comments"),
                opt("words", StringList, None, "inline phrases"),
                opt("max_hits", Int, Some(json!(0)), "maximum number of phrase occurrences"),
            ],
            "Drop documents containing too many lexicon phrases.",
        ),
        op(
            "filter_by_perplexity",
            Filter,
            vec![
                opt("fil_ppl", Float, Some(json!(3.0)), "drop above mean + fil_ppl * std"),
                opt("model_path", String, None, "n-gram model file (defaults to the run's reference model)"),
                opt("reference_sample", Int, Some(json!(1000)), "documents sampled for mean and std"),
            ],
            "Drop documents whose perplexity is far above the corpus mean.",
        ),
        op(
            "filter_by_language",
            Filter,
            vec![
                req("models", StringList, "tag=path pairs, at least two"),
                req("target", String, "language tag to keep"),
                opt("min_margin", Float, Some(json!(0.0)), "minimum lead in mean log-prob per char"),
            ],
            "Keep documents classified as the target language.",
        ),
        op(
            "filter_by_entity_count",
            Filter,
            vec![
                opt("min_entities", Int, Some(json!(0)), "minimum entity-like tokens"),
                opt("max_entities", Int, None, "maximum entity-like tokens (unbounded if absent)"),
            ],
            "Keep documents whose count of capitalized or numeric tokens is within bounds.",
        ),
        op(
            "dedup_minhash",
            Dedup,
            vec![
                opt("ngram", Int, Some(json!(10)), "shingle width in tokens"),
                opt("num_perm", Int, Some(json!(128)), "signature length"),
                opt("threshold", Float, Some(json!(0.7)), "estimated Jaccard at which docs merge"),
                opt("bands", Int, Some(json!(16)), "LSH bands; must divide num_perm"),
            ],
            "Remove near-duplicates, keeping the first document of each cluster. Must be the last stage.",
        ),
    ];
    ops.sort_by(|a, b| a.name.cmp(&b.name));
    ops
}

pub fn find_operator(name: &str) -> Option<OperatorSpec> {
    list_operators().into_iter().find(|o| o.name == name)
}
