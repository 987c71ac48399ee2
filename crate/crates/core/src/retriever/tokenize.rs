//! The term convention shared by search and dedup shingling.

use std::ops::Range;

use unicode_normalization::UnicodeNormalization;

/// True for CJK ideographs (the Han script blocks).
pub fn is_han(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x2F800..=0x2FA1F
        | 0x30000..=0x323AF)
}

/// NFC-normalize, lowercase, split on any non-alphanumeric scalar. Han
/// characters are emitted as one-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect();
    token_spans(&normalized).into_iter().map(|(t, _)| t).collect()
}

/// Tokens of `text` together with their byte ranges in `text`. The input is
/// taken as already normalized; offsets refer to it unchanged.
pub fn token_spans(text: &str) -> Vec<(String, Range<usize>)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let flush = |out: &mut Vec<(String, Range<usize>)>, start: &mut Option<usize>, end: usize| {
        if let Some(s) = start.take() {
            out.push((fold(&text[s..end]), s..end));
        }
    };
    for (i, c) in text.char_indices() {
        if is_han(c) {
            flush(&mut out, &mut start, i);
            let end = i + c.len_utf8();
            out.push((c.to_string(), i..end));
        } else if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else {
            flush(&mut out, &mut start, i);
        }
    }
    flush(&mut out, &mut start, text.len());
    out
}

fn fold(s: &str) -> String {
    s.chars().flat_map(char::to_lowercase).collect()
}
