use std::collections::BTreeSet;

use super::tokenize::token_spans;

pub const SNIPPET_WINDOW: usize = 160;
pub const MARK_OPEN: &str = "[[";
pub const MARK_CLOSE: &str = "]]";

/// A window of `SNIPPET_WINDOW` chars around the first query-term
/// occurrence, with every whole occurrence inside it wrapped in markers.
/// Without a match this is the text prefix.
pub fn snippet(text: &str, terms: &[String]) -> String {
    let wanted: BTreeSet<&str> = terms.iter().map(String::as_str).collect();
    let hits: Vec<_> = token_spans(text).into_iter().filter(|(t, _)| wanted.contains(t.as_str())).map(|(_, r)| r).collect();

    // Byte offset of every char boundary, plus the end.
    let bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len())).collect();
    let nchars = bounds.len() - 1;
    let start_char = match hits.first() {
        None => 0,
        Some(r) => {
            let first = bounds.partition_point(|&b| b < r.start);
            let ideal = first.saturating_sub(SNIPPET_WINDOW / 2);
            ideal.min(nchars.saturating_sub(SNIPPET_WINDOW))
        }
    };
    let end_char = (start_char + SNIPPET_WINDOW).min(nchars);
    let (lo, hi) = (bounds[start_char], bounds[end_char]);

    let mut out = String::with_capacity(hi - lo + 8);
    let mut pos = lo;
    for r in hits.iter().filter(|r| r.start >= lo && r.end <= hi) {
        out.push_str(&text[pos..r.start]);
        out.push_str(MARK_OPEN);
        out.push_str(&text[r.clone()]);
        out.push_str(MARK_CLOSE);
        pos = r.end;
    }
    out.push_str(&text[pos..hi]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(t: &[&str]) -> Vec<String> {
        t.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn marks_terms_case_insensitively() {
        assert_eq!(snippet("Renmin University of China", &q(&["renmin"])), "[[Renmin]] University of China");
    }

    #[test]
    fn no_match_is_prefix() {
        let text = "x".repeat(500);
        assert_eq!(snippet(&text, &q(&["zzz"])), "x".repeat(160));
    }

    #[test]
    fn window_centres_on_first_hit() {
        let text = format!("{} needle {}", "a ".repeat(200), "b ".repeat(200));
        let s = snippet(&text, &q(&["needle"]));
        assert!(s.contains("[[needle]]"));
        assert_eq!(s.chars().count(), 160 + 4);
        let at = s.find("[[needle]]").unwrap();
        assert!((70..=90).contains(&at), "{at}");
    }

    #[test]
    fn marker_count_matches_occurrences() {
        let text = "cat dog cat bird cat";
        let s = snippet(text, &q(&["cat"]));
        assert_eq!(s.matches(MARK_OPEN).count(), 3);
        assert_eq!(s.replace(MARK_OPEN, "").replace(MARK_CLOSE, ""), text);
    }

    #[test]
    fn han_and_multibyte() {
        let s = snippet("人民大学 is 人民", &q(&["民"]));
        assert_eq!(s, "人[[民]]大学 is 人[[民]]");
    }
}
