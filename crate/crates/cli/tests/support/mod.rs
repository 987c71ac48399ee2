//! Shared fixtures for the CLI test targets: a seeded text generator and a
//! thin wrapper around the `garden` binary.

#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use garden_core::corpus::write_jsonl_file;
use garden_core::Document;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

pub const WORDS: &[&str] = &[
    "the", "of", "and", "to", "in", "is", "was", "that", "for", "on", "with", "as", "by", "at", "from", "this",
    "which", "or", "an", "be", "are", "were", "has", "had", "have", "not", "but", "their", "its", "they", "been",
    "more", "other", "into", "than", "after", "first", "most", "also", "between", "during", "under", "about",
    "many", "some", "these", "such", "through", "while", "both", "each", "where", "when", "over", "only",
    "university", "students", "research", "language", "model", "models", "data", "corpus", "text", "training",
    "quality", "library", "city", "river", "history", "school", "science", "system", "process", "method",
    "results", "study", "public", "program", "museum", "garden", "station", "market", "village", "festival",
    "government", "company", "network", "century", "region", "building", "project", "teacher",
    "family", "music", "water", "mountain", "island", "field", "record", "season", "team", "game", "song",
    "book", "paper", "report", "article", "journal", "editor", "reader", "writer", "author",
    "large", "small", "early", "late", "new", "old", "local", "national", "several", "important", "major",
    "common", "different", "popular", "known", "based", "built", "used", "found", "made", "called", "named",
    "located", "founded", "published", "developed", "released", "designed", "opened", "moved", "became",
    "received", "included", "described", "studied", "collected", "measured", "compared", "improved",
];

pub const BOILERPLATE: [&str; 2] =
    ["Copyright 2024 Example Media. All rights reserved.", "Click here to subscribe to our newsletter!"];

pub struct TextGen {
    pub rng: ChaCha8Rng,
}

impl TextGen {
    pub fn new(seed: u64) -> Self {
        TextGen { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn word(&mut self) -> &'static str {
        WORDS.choose(&mut self.rng).unwrap()
    }

    pub fn sentence(&mut self) -> String {
        let n = self.rng.random_range(6..=16);
        let words: Vec<&str> = (0..n).map(|_| self.word()).collect();
        let mut s = words.join(" ");
        s[..1].make_ascii_uppercase();
        s.push('.');
        s
    }

    /// English-like prose of roughly `words` words.
    pub fn prose(&mut self, words: usize) -> String {
        let mut out = String::new();
        let mut count = 0;
        while count < words {
            let s = self.sentence();
            count += s.split_whitespace().count();
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&s);
        }
        out
    }

    pub fn gibberish_word(&mut self) -> String {
        let n = self.rng.random_range(3..=9);
        (0..n).map(|_| self.rng.random_range(b'a'..=b'z') as char).collect()
    }

    pub fn gibberish(&mut self, words: usize) -> String {
        (0..words).map(|_| self.gibberish_word()).collect::<Vec<_>>().join(" ")
    }

    /// Mostly digits and punctuation.
    pub fn symbols(&mut self, chars: usize) -> String {
        const SET: &[u8] = b"0123456789-+=*/#%$@!?.,;:()[]  ";
        (0..chars).map(|_| *SET.choose(&mut self.rng).unwrap() as char).collect()
    }

    /// Copy of `text` with its last word replaced.
    pub fn near_copy(&mut self, text: &str) -> String {
        let cut = text.trim_end().rfind(' ').unwrap_or(0);
        format!("{} {}", &text[..cut], self.word())
    }
}

pub fn docs_from(texts: impl IntoIterator<Item = String>) -> Vec<Document> {
    texts.into_iter().enumerate().map(|(i, t)| Document::new(format!("doc-{i:05}"), t, "synthetic")).collect()
}

pub fn write_docs(path: &Path, docs: &[Document]) {
    write_jsonl_file(path, docs).unwrap();
}

pub fn garden() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_garden"));
    cmd.env_remove("GARDEN_SERVER").env_remove("GARDEN_PORT").env_remove("RUST_LOG");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    garden().args(args).output().expect("garden binary runs")
}

/// Run and parse stdout as JSON, panicking with stderr on failure.
pub fn run_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "garden {args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("garden {args:?}: stdout is not JSON: {e}"))
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
