//! Sub-document repair: remove or replace content at string, line or
//! paragraph scope using exact or regular-expression matching.
//!
//! Exact matching scans leftmost, non-overlapping. Regexes use the `regex`
//! crate syntax, which has no backreferences or lookaround and runs in
//! linear time. Line and paragraph rules act on whole units: a unit matches
//! if the matcher finds anything inside it, a removed unit takes its trailing
//! delimiter with it, and a replaced unit becomes the replacement literal.

use std::ops::Range;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;

/// Upper bound on passes for `fixpoint` rules.
pub const MAX_FIXPOINT_PASSES: usize = 100;
/// Spans kept per [`CleanResult`].
pub const MAX_SPANS: usize = 10;
/// Characters of context kept on each side of a span.
pub const CONTEXT_CHARS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    String,
    Line,
    Paragraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatcherKind {
    Exact,
    Regex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Remove,
    Replace,
}

/// The declarative form of a rule, as it appears in configs and API bodies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub scope: Scope,
    pub matcher: MatcherKind,
    pub pattern: String,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replace_with: Option<String>,
    #[serde(default)]
    pub fixpoint: bool,
}

impl RuleSpec {
    pub fn remove_exact(scope: Scope, pattern: impl Into<String>) -> Self {
        RuleSpec {
            scope,
            matcher: MatcherKind::Exact,
            pattern: pattern.into(),
            action: Action::Remove,
            replace_with: None,
            fixpoint: false,
        }
    }

    pub fn remove_regex(scope: Scope, pattern: impl Into<String>) -> Self {
        RuleSpec { matcher: MatcherKind::Regex, ..Self::remove_exact(scope, pattern) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CleanError {
    #[error("invalid regex: {0}")]
    InvalidRegex(String),
    #[error("empty exact pattern")]
    EmptyPattern,
    #[error("action 'replace' requires replace_with")]
    MissingReplacement,
    #[error("fixpoint_divergence: still matching after {MAX_FIXPOINT_PASSES} passes")]
    FixpointDivergence,
}

#[derive(Debug, Clone)]
enum Matcher {
    Exact(String),
    Regex(Regex),
}

impl Matcher {
    /// All leftmost non-overlapping, non-empty matches.
    fn find_all(&self, text: &str) -> Vec<Range<usize>> {
        match self {
            Matcher::Exact(p) => text.match_indices(p.as_str()).map(|(i, m)| i..i + m.len()).collect(),
            Matcher::Regex(re) => re.find_iter(text).filter(|m| !m.is_empty()).map(|m| m.range()).collect(),
        }
    }

    /// First match, empty matches included (so `^$` can select blank units).
    fn find_first(&self, text: &str) -> Option<Range<usize>> {
        match self {
            Matcher::Exact(p) => text.find(p.as_str()).map(|i| i..i + p.len()),
            Matcher::Regex(re) => re.find(text).map(|m| m.range()),
        }
    }
}

/// A compiled, validated rule.
#[derive(Debug, Clone)]
pub struct CleanRule {
    spec: RuleSpec,
    matcher: Matcher,
}

impl CleanRule {
    pub fn compile(spec: RuleSpec) -> Result<Self, CleanError> {
        let matcher = match spec.matcher {
            MatcherKind::Exact if spec.pattern.is_empty() => return Err(CleanError::EmptyPattern),
            MatcherKind::Exact => Matcher::Exact(spec.pattern.clone()),
            MatcherKind::Regex => {
                Matcher::Regex(Regex::new(&spec.pattern).map_err(|e| CleanError::InvalidRegex(e.to_string()))?)
            }
        };
        if spec.action == Action::Replace && spec.replace_with.is_none() {
            return Err(CleanError::MissingReplacement);
        }
        Ok(CleanRule { spec, matcher })
    }

    pub fn spec(&self) -> &RuleSpec {
        &self.spec
    }

    fn replacement(&self) -> &str {
        match self.spec.action {
            Action::Remove => "",
            Action::Replace => self.spec.replace_with.as_deref().unwrap_or(""),
        }
    }
}

/// One match location, in byte offsets of the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSpan {
    pub start: usize,
    pub end: usize,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanResult {
    pub text: String,
    pub matches: usize,
    pub spans: Vec<MatchSpan>,
}

/// Apply one rule to a text.
pub fn apply_rule(text: &str, rule: &CleanRule) -> Result<CleanResult, CleanError> {
    let (mut current, mut matches, ranges) = single_pass(text, rule);
    let spans = ranges.into_iter().take(MAX_SPANS).map(|r| span_with_context(text, r)).collect();
    if matches > 0 && rule.spec.fixpoint {
        let mut passes = 1;
        loop {
            let (next, n, _) = single_pass(&current, rule);
            if n == 0 {
                break;
            }
            passes += 1;
            // Replacements that re-create their own pattern can grow the
            // text geometrically; stop before the pass bound would.
            if passes > MAX_FIXPOINT_PASSES || next.len() > growth_limit(text.len()) {
                return Err(CleanError::FixpointDivergence);
            }
            matches += n;
            current = next;
        }
    }
    if matches == 0 {
        current = text.to_string();
    }
    Ok(CleanResult { text: current, matches, spans })
}

/// Apply rules in order to a document. Returns the cleaned document and the
/// match count of each rule. An emptied document is returned as is.
pub fn clean_document(doc: &Document, rules: &[CleanRule]) -> Result<(Document, Vec<usize>), CleanError> {
    let mut text = doc.text.clone();
    let mut counts = Vec::with_capacity(rules.len());
    for rule in rules {
        let r = apply_rule(&text, rule)?;
        counts.push(r.matches);
        text = r.text;
    }
    Ok((Document { text, ..doc.clone() }, counts))
}

fn growth_limit(original: usize) -> usize {
    original.saturating_mul(8).max(1 << 16)
}

fn single_pass(text: &str, rule: &CleanRule) -> (String, usize, Vec<Range<usize>>) {
    match rule.spec.scope {
        Scope::String => {
            let found = rule.matcher.find_all(text);
            if found.is_empty() {
                return (text.to_string(), 0, found);
            }
            let mut out = String::with_capacity(text.len());
            let mut last = 0;
            for r in &found {
                out.push_str(&text[last..r.start]);
                out.push_str(rule.replacement());
                last = r.end;
            }
            out.push_str(&text[last..]);
            let n = found.len();
            (out, n, found)
        }
        Scope::Line | Scope::Paragraph => {
            let units = match rule.spec.scope {
                Scope::Line => line_units(text),
                _ => paragraph_units(text),
            };
            let mut out = String::with_capacity(text.len());
            let mut found = Vec::new();
            for u in units {
                let hit = u
                    .content
                    .as_ref()
                    .and_then(|c| rule.matcher.find_first(&text[c.clone()]).map(|m| (c.clone(), m)));
                match hit {
                    None => out.push_str(&text[u.full]),
                    Some((content, m)) => {
                        found.push(content.start + m.start..content.start + m.end);
                        if rule.spec.action == Action::Replace {
                            out.push_str(rule.replacement());
                            out.push_str(&text[content.end..u.full.end]);
                        }
                    }
                }
            }
            let n = found.len();
            (out, n, found)
        }
    }
}

/// A segment of the text. `content` is the matchable part (absent for
/// separator-only segments); `full` also covers the owned delimiter.
struct Unit {
    content: Option<Range<usize>>,
    full: Range<usize>,
}

fn line_units(text: &str) -> Vec<Unit> {
    let mut units = Vec::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let end = pos + line.len();
        let content_end = if line.ends_with('\n') { end - 1 } else { end };
        units.push(Unit { content: Some(pos..content_end), full: pos..end });
        pos = end;
    }
    units
}

fn paragraph_units(text: &str) -> Vec<Unit> {
    let mut units: Vec<Unit> = Vec::new();
    let mut pos = 0;
    // (content range, full start) of the paragraph being built
    let mut open: Option<(Range<usize>, usize)> = None;
    let mut leading: Option<Range<usize>> = None;
    for line in text.split_inclusive('\n') {
        let end = pos + line.len();
        let blank = line.trim().is_empty();
        if blank {
            match (&mut open, units.last_mut()) {
                (Some((content, start)), _) => {
                    units.push(Unit { content: Some(content.clone()), full: *start..end });
                    open = None;
                }
                (None, Some(last)) if last.content.is_some() => last.full.end = end,
                _ => {
                    leading = Some(leading.map_or(pos..end, |r| r.start..end));
                }
            }
        } else {
            let content_end = if line.ends_with('\n') { end - 1 } else { end };
            match &mut open {
                Some((content, _)) => content.end = content_end,
                None => {
                    if let Some(r) = leading.take() {
                        units.push(Unit { content: None, full: r });
                    }
                    open = Some((pos..content_end, pos));
                }
            }
        }
        pos = end;
    }
    if let Some((content, start)) = open {
        units.push(Unit { content: Some(content), full: start..text.len() });
    }
    if let Some(r) = leading {
        units.push(Unit { content: None, full: r });
    }
    // A paragraph's full range must reach the start of the next unit.
    for i in 1..units.len() {
        let next_start = units[i].full.start;
        units[i - 1].full.end = next_start;
    }
    if let Some(last) = units.last_mut() {
        last.full.end = text.len();
    }
    units
}

/// Span plus up to [`CONTEXT_CHARS`] characters on each side.
pub fn span_with_context(text: &str, r: Range<usize>) -> MatchSpan {
    let before = text[..r.start].char_indices().rev().nth(CONTEXT_CHARS - 1).map_or(0, |(i, _)| i);
    let after = text[r.end..].char_indices().nth(CONTEXT_CHARS).map_or(text.len(), |(i, _)| r.end + i);
    MatchSpan { start: r.start, end: r.end, context: text[before..after].to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rule(spec: RuleSpec) -> CleanRule {
        CleanRule::compile(spec).unwrap()
    }

    #[test]
    fn removes_boilerplate_string() {
        let text = "Body text here. Read more on other websites";
        let r = apply_rule(text, &rule(RuleSpec::remove_exact(Scope::String, "Read more on other websites"))).unwrap();
        assert_eq!(r.matches, 1);
        assert!(!r.text.contains("Read more on other websites"));
        assert_eq!(r.text, "Body text here. ");
        assert_eq!(&text[r.spans[0].start..r.spans[0].end], "Read more on other websites");
    }

    #[test]
    fn line_regex_removes_references_heading() {
        let text = "Intro line\nReferences\n[1] Some book\n";
        let r = apply_rule(text, &rule(RuleSpec::remove_regex(Scope::Line, "^References$"))).unwrap();
        assert_eq!(r.matches, 1);
        assert_eq!(r.text, "Intro line\n[1] Some book\n");
    }

    #[test]
    fn single_pass_versus_fixpoint() {
        let single = apply_rule("aabb", &rule(RuleSpec::remove_exact(Scope::String, "ab"))).unwrap();
        assert_eq!((single.text.as_str(), single.matches), ("ab", 1));
        let mut spec = RuleSpec::remove_exact(Scope::String, "ab");
        spec.fixpoint = true;
        let fixed = apply_rule("aabb", &rule(spec)).unwrap();
        assert_eq!((fixed.text.as_str(), fixed.matches), ("", 2));
        assert_eq!(fixed.spans.len(), 1);
        assert_eq!((fixed.spans[0].start, fixed.spans[0].end), (1, 3));
    }

    #[test]
    fn divergent_fixpoint_is_an_error() {
        let spec = RuleSpec {
            action: Action::Replace,
            replace_with: Some("aa".into()),
            fixpoint: true,
            ..RuleSpec::remove_exact(Scope::String, "a")
        };
        assert_eq!(apply_rule("a", &rule(spec)), Err(CleanError::FixpointDivergence));
    }

    #[test]
    fn compile_errors() {
        assert!(matches!(
            CleanRule::compile(RuleSpec::remove_regex(Scope::String, "(unclosed")),
            Err(CleanError::InvalidRegex(_))
        ));
        assert!(matches!(
            CleanRule::compile(RuleSpec::remove_regex(Scope::String, r"(a)\1")),
            Err(CleanError::InvalidRegex(_))
        ));
        assert_eq!(
            CleanRule::compile(RuleSpec::remove_exact(Scope::String, "")).unwrap_err(),
            CleanError::EmptyPattern
        );
        let spec = RuleSpec { action: Action::Replace, ..RuleSpec::remove_exact(Scope::Line, "x") };
        assert_eq!(CleanRule::compile(spec).unwrap_err(), CleanError::MissingReplacement);
    }

    #[test]
    fn replacement_is_literal() {
        let spec = RuleSpec {
            action: Action::Replace,
            replace_with: Some("$1".into()),
            ..RuleSpec::remove_regex(Scope::String, "(b+)")
        };
        assert_eq!(apply_rule("abbc", &rule(spec)).unwrap().text, "a$1c");
    }

    #[test]
    fn line_replace_keeps_delimiter() {
        let spec = RuleSpec {
            action: Action::Replace,
            replace_with: Some("[redacted]".into()),
            ..RuleSpec::remove_exact(Scope::Line, "By John")
        };
        assert_eq!(apply_rule("By John Smith\nnews\n", &rule(spec)).unwrap().text, "[redacted]\nnews\n");
    }

    #[test]
    fn last_line_without_newline() {
        let r = apply_rule("a\nReferences", &rule(RuleSpec::remove_exact(Scope::Line, "References"))).unwrap();
        assert_eq!(r.text, "a\n");
    }

    #[test]
    fn paragraph_removal() {
        let text = "First para\nstill first\n\nAdvertisement: buy now\nmore ad\n\n\nLast para";
        let r = apply_rule(text, &rule(RuleSpec::remove_exact(Scope::Paragraph, "Advertisement"))).unwrap();
        assert_eq!(r.matches, 1);
        assert_eq!(r.text, "First para\nstill first\n\nLast para");
        let last = apply_rule(text, &rule(RuleSpec::remove_exact(Scope::Paragraph, "Last para"))).unwrap();
        assert_eq!(last.text, "First para\nstill first\n\nAdvertisement: buy now\nmore ad\n\n\n");
    }

    #[test]
    fn paragraph_units_cover_text() {
        for text in ["", "\n\n", "\n\na\n\nb\n", "a", "a\n\n", "  \na\nb\n \n\nc"] {
            let units = paragraph_units(text);
            let mut pos = 0;
            for u in &units {
                assert_eq!(u.full.start, pos, "{text:?}");
                pos = u.full.end;
            }
            assert_eq!(pos, text.len(), "{text:?}");
        }
    }

    #[test]
    fn blank_line_regex() {
        let r = apply_rule("a\n\n\nb\n", &rule(RuleSpec::remove_regex(Scope::Line, "^$"))).unwrap();
        assert_eq!((r.text.as_str(), r.matches), ("a\nb\n", 2));
    }

    #[test]
    fn empty_rule_list_is_identity() {
        let doc = Document::new("d", "unchanged text", "s");
        let (out, counts) = clean_document(&doc, &[]).unwrap();
        assert_eq!(out, doc);
        assert!(counts.is_empty());
    }

    #[test]
    fn disjoint_removals_commute() {
        let doc = Document::new("d", "keep ALPHA keep BETA keep", "s");
        let a = rule(RuleSpec::remove_exact(Scope::String, "ALPHA"));
        let b = rule(RuleSpec::remove_exact(Scope::String, "BETA"));
        let (ab, _) = clean_document(&doc, &[a.clone(), b.clone()]).unwrap();
        let (ba, _) = clean_document(&doc, &[b, a]).unwrap();
        assert_eq!(ab.text, ba.text);
        assert_eq!(ab.text, "keep  keep  keep");
    }

    #[test]
    fn no_match_is_identity() {
        let doc = Document::new("d", "nothing to see", "s");
        let (out, counts) = clean_document(&doc, &[rule(RuleSpec::remove_exact(Scope::String, "zzz"))]).unwrap();
        assert_eq!(counts, [0]);
        assert_eq!(out.text, doc.text);
    }

    #[test]
    fn context_is_bounded_and_contains_the_match() {
        let text = format!("{}MATCH{}", "x".repeat(100), "é".repeat(100));
        let r = apply_rule(&text, &rule(RuleSpec::remove_exact(Scope::String, "MATCH"))).unwrap();
        let ctx = &r.spans[0].context;
        assert_eq!(ctx.chars().count(), 40 + 5 + 40);
        assert!(ctx.contains("MATCH"));
    }

    fn scope() -> impl Strategy<Value = Scope> {
        prop_oneof![Just(Scope::String), Just(Scope::Line), Just(Scope::Paragraph)]
    }

    proptest! {
        #[test]
        fn remove_never_grows(text in "[ab\n ]{0,40}", pat in "[ab]{1,3}", scope in scope(), fixpoint: bool) {
            let spec = RuleSpec { fixpoint, ..RuleSpec::remove_exact(scope, pat) };
            let r = apply_rule(&text, &rule(spec)).unwrap();
            prop_assert!(r.text.len() <= text.len());
            if r.matches == 0 {
                prop_assert_eq!(&r.text, &text);
            }
        }

        #[test]
        fn fixpoint_leaves_no_match(text in "[abc]{0,40}", pat in "[ab]{1,3}") {
            let spec = RuleSpec { fixpoint: true, ..RuleSpec::remove_exact(Scope::String, pat.clone()) };
            let r = apply_rule(&text, &rule(spec)).unwrap();
            prop_assert!(!r.text.contains(&pat));
        }

        #[test]
        fn line_removal_keeps_other_lines_verbatim(lines in proptest::collection::vec("[abx ]{0,6}", 0..8)) {
            let text = lines.iter().map(|l| format!("{l}\n")).collect::<String>();
            let r = apply_rule(&text, &rule(RuleSpec::remove_exact(Scope::Line, "x"))).unwrap();
            let expected: String = lines.iter().filter(|l| !l.contains('x')).map(|l| format!("{l}\n")).collect();
            prop_assert_eq!(r.text, expected);
        }

        #[test]
        fn spans_are_real_matches(text in "[abc]{0,60}", pat in "[ab]{1,2}") {
            let r = apply_rule(&text, &rule(RuleSpec::remove_exact(Scope::String, pat.clone()))).unwrap();
            for s in &r.spans {
                prop_assert_eq!(&text[s.start..s.end], pat.as_str());
            }
        }
    }
}
