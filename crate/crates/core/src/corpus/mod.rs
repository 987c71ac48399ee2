//! The canonical corpus record, its JSONL encoding, and reformatting of raw
//! sources (JSONL, plain text, HTML) into that shape.

mod files;
mod html;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use unicode_normalization::{is_nfc, UnicodeNormalization};

pub use files::{list_input_files, read_corpus, read_documents, write_jsonl_file};
pub use html::extract_html_text;

/// Keys that live on [`Document`] itself rather than in `meta`.
pub const RESERVED_KEYS: [&str; 3] = ["text", "id", "source"];

/// One corpus record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub source: String,
    #[serde(default)]
    pub meta: BTreeMap<String, Value>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, source: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: nfc(text.into()),
            source: source.into(),
            meta: BTreeMap::new(),
        }
    }

    /// Length of the text in Unicode scalar values.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// NFC-normalize, skipping the allocation when the input already is.
pub fn nfc(s: String) -> String {
    if is_nfc(&s) {
        s
    } else {
        s.nfc().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordErrorKind {
    MalformedJson,
    MissingTextField,
    InvalidEncoding,
}

impl RecordErrorKind {
    /// snake_case tag used as a drop reason in pipeline reports.
    pub fn reason(self) -> &'static str {
        match self {
            RecordErrorKind::MalformedJson => "malformed_json",
            RecordErrorKind::MissingTextField => "missing_text_field",
            RecordErrorKind::InvalidEncoding => "invalid_encoding",
        }
    }
}

impl fmt::Display for RecordErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordErrorKind::MalformedJson => "malformed-json",
            RecordErrorKind::MissingTextField => "missing-text-field",
            RecordErrorKind::InvalidEncoding => "invalid-encoding",
        })
    }
}

/// A single bad input record. Never fatal unless the caller runs strict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("line {line_number}: {kind}: {detail}")]
pub struct RecordError {
    pub line_number: usize,
    pub kind: RecordErrorKind,
    pub detail: String,
}

impl RecordError {
    fn new(line_number: usize, kind: RecordErrorKind, detail: impl Into<String>) -> Self {
        RecordError { line_number, kind, detail: detail.into() }
    }
}

/// Stream-level failures (as opposed to per-record [`RecordError`]s).
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("strict mode: {0}")]
    Strict(RecordError),
}

/// Parse one JSONL line. `source` is the default source tag, used when the
/// record has no `"source"` key and to synthesize a missing id.
pub fn parse_jsonl_line(line: &str, line_number: usize, source: &str) -> Result<Document, RecordError> {
    use RecordErrorKind::*;
    let value: Value = serde_json::from_str(line)
        .map_err(|e| RecordError::new(line_number, MalformedJson, e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(RecordError::new(line_number, MalformedJson, "not a JSON object"));
    };
    let text = match obj.remove("text") {
        None => return Err(RecordError::new(line_number, MissingTextField, "no \"text\" key")),
        Some(Value::String(s)) => s,
        Some(other) => {
            return Err(RecordError::new(
                line_number,
                MalformedJson,
                format!("\"text\" must be a string, found {}", json_type(&other)),
            ))
        }
    };
    let source = match obj.remove("source") {
        None | Some(Value::Null) => source.to_string(),
        Some(Value::String(s)) => s,
        Some(other) => scalar_to_string(&other)
            .ok_or_else(|| RecordError::new(line_number, MalformedJson, "\"source\" must be a scalar"))?,
    };
    let id = match obj.remove("id") {
        None | Some(Value::Null) => format!("{source}#{line_number}"),
        Some(Value::String(s)) if !s.is_empty() => s,
        Some(Value::String(_)) => format!("{source}#{line_number}"),
        Some(other) => scalar_to_string(&other)
            .ok_or_else(|| RecordError::new(line_number, MalformedJson, "\"id\" must be a scalar"))?,
    };
    Ok(Document { id, text: nfc(text), source, meta: obj.into_iter().collect() })
}

/// Byte-level entry point: checks UTF-8 before JSON.
pub fn parse_jsonl_bytes(line: &[u8], line_number: usize, source: &str) -> Result<Document, RecordError> {
    let line = std::str::from_utf8(line).map_err(|e| {
        RecordError::new(line_number, RecordErrorKind::InvalidEncoding, e.to_string())
    })?;
    parse_jsonl_line(line, line_number, source)
}

fn scalar_to_string(v: &Value) -> Option<String> {
    match v {
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn json_type(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Canonical single-line JSON: `text`, `id`, `source`, then metadata keys in
/// sorted order. No trailing newline.
pub fn serialize_document(doc: &Document) -> String {
    // Built by hand: the fixed keys lead, which a sorted map would not give.
    let mut out = String::with_capacity(doc.text.len() + 64);
    out.push_str("{\"text\":");
    out.push_str(&Value::String(doc.text.clone()).to_string());
    out.push_str(",\"id\":");
    out.push_str(&Value::String(doc.id.clone()).to_string());
    out.push_str(",\"source\":");
    out.push_str(&Value::String(doc.source.clone()).to_string());
    for (k, v) in &doc.meta {
        if RESERVED_KEYS.contains(&k.as_str()) {
            continue;
        }
        out.push(',');
        out.push_str(&Value::String(k.clone()).to_string());
        out.push(':');
        out.push_str(&v.to_string());
    }
    out.push('}');
    out
}

/// Write documents as JSONL, one `\n`-terminated line each.
pub fn write_jsonl<'a, W: Write>(mut w: W, docs: impl IntoIterator<Item = &'a Document>) -> io::Result<()> {
    for d in docs {
        w.write_all(serialize_document(d).as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Declared layout of a raw input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    #[default]
    Jsonl,
    PlainText,
    Html,
}

impl FromStr for InputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" | "json" => Ok(InputFormat::Jsonl),
            "plain-text" | "text" | "txt" => Ok(InputFormat::PlainText),
            "html" => Ok(InputFormat::Html),
            other => Err(format!("unknown input format '{other}' (expected jsonl, plain-text or html)")),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::Jsonl => "jsonl",
            InputFormat::PlainText => "plain-text",
            InputFormat::Html => "html",
        })
    }
}

/// Result of reformatting one input: documents in input order plus the
/// records that could not be turned into documents.
#[derive(Debug, Default, Clone)]
pub struct Reformatted {
    pub documents: Vec<Document>,
    pub errors: Vec<RecordError>,
}

impl Reformatted {
    pub fn record_count(&self) -> usize {
        self.documents.len() + self.errors.len()
    }
}

/// Reformat a raw byte stream into documents.
///
/// * `jsonl`: one record per non-blank line;
/// * `plain-text`: blank-line-separated blocks, id uses the block's first line;
/// * `html`: the whole stream is one file and becomes one document.
///
/// With `strict`, the first record error aborts with [`CorpusError::Strict`].
pub fn reformat_stream<R: Read>(
    mut input: R,
    format: InputFormat,
    source: &str,
    strict: bool,
) -> Result<Reformatted, CorpusError> {
    let mut out = Reformatted::default();
    let push = |r: Result<Document, RecordError>, out: &mut Reformatted| -> Result<(), CorpusError> {
        match r {
            Ok(d) => out.documents.push(d),
            Err(e) if strict => return Err(CorpusError::Strict(e)),
            Err(e) => out.errors.push(e),
        }
        Ok(())
    };
    match format {
        InputFormat::Jsonl => {
            for item in JsonlReader::new(io::BufReader::new(input), source) {
                push(item?, &mut out)?;
            }
        }
        InputFormat::PlainText => {
            let mut bytes = Vec::new();
            input.read_to_end(&mut bytes)?;
            for (line_number, block) in plain_text_blocks(&bytes) {
                let r = String::from_utf8(block)
                    .map(|text| Document::new(format!("{source}#{line_number}"), text, source))
                    .map_err(|e| RecordError::new(line_number, RecordErrorKind::InvalidEncoding, e.to_string()));
                push(r, &mut out)?;
            }
        }
        InputFormat::Html => {
            let mut bytes = Vec::new();
            input.read_to_end(&mut bytes)?;
            let r = String::from_utf8(bytes)
                .map(|html| Document::new(format!("{source}#1"), extract_html_text(&html), source))
                .map_err(|e| RecordError::new(1, RecordErrorKind::InvalidEncoding, e.to_string()));
            push(r, &mut out)?;
        }
    }
    Ok(out)
}

/// Split raw bytes into blank-line-separated blocks, returning each block
/// with the 1-based line number it starts on.
fn plain_text_blocks(bytes: &[u8]) -> Vec<(usize, Vec<u8>)> {
    let mut blocks = Vec::new();
    let mut current: Vec<u8> = Vec::new();
    let mut start = 0;
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = raw.strip_suffix(b"\r").unwrap_or(raw);
        if line.iter().all(|b| b.is_ascii_whitespace()) {
            if !current.is_empty() {
                blocks.push((start, std::mem::take(&mut current)));
            }
            continue;
        }
        if current.is_empty() {
            start = i + 1;
        } else {
            current.push(b'\n');
        }
        current.extend_from_slice(line);
    }
    if !current.is_empty() {
        blocks.push((start, current));
    }
    blocks
}

/// Line-by-line JSONL reader. Blank lines are skipped and are not records.
pub struct JsonlReader<R> {
    inner: R,
    source: String,
    line_number: usize,
    buf: Vec<u8>,
}

impl<R: BufRead> JsonlReader<R> {
    pub fn new(inner: R, source: &str) -> Self {
        JsonlReader { inner, source: source.to_string(), line_number: 0, buf: Vec::new() }
    }
}

impl<R: BufRead> Iterator for JsonlReader<R> {
    type Item = io::Result<Result<Document, RecordError>>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e)),
            }
            self.line_number += 1;
            let mut line = self.buf.as_slice();
            line = line.strip_suffix(b"\n").unwrap_or(line);
            line = line.strip_suffix(b"\r").unwrap_or(line);
            if line.iter().all(|b| b.is_ascii_whitespace()) {
                continue;
            }
            return Some(Ok(parse_jsonl_bytes(line, self.line_number, &self.source)));
        }
    }
}

/// Helper for building metadata maps in tests and callers.
pub fn meta_from_pairs<I, K, V>(pairs: I) -> BTreeMap<String, Value>
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<Value>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}
