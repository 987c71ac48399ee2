//! Rule-based HTML to text extraction (no DOM).

const BLOCK_TAGS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "caption", "dd", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6",
    "head", "header", "hr", "html", "li", "main", "nav", "ol", "p", "pre", "section", "table",
    "tbody", "td", "tfoot", "th", "thead", "title", "tr", "ul",
];

const SKIP_CONTENT_TAGS: &[&str] = &["script", "style"];

/// Extract readable text from (possibly malformed) HTML.
///
/// Script and style contents and comments are dropped, tags are removed,
/// block-level tags become line boundaries, the common entities and numeric
/// character references are decoded, and runs of more than two newlines
/// collapse to two. The result is a fixed point: extracting it again returns
/// it unchanged, so decoded `&lt;tag&gt;` text never survives as markup.
pub fn extract_html_text(html: &str) -> String {
    let mut current = extract_once(html);
    loop {
        let next = extract_once(&current);
        if next == current {
            return current;
        }
        // Every effective rewrite shortens the string, so this terminates.
        debug_assert!(next.len() < current.len());
        current = next;
    }
}

struct Builder {
    out: String,
    pending_break: bool,
}

impl Builder {
    fn push(&mut self, c: char) {
        if self.pending_break {
            if c.is_whitespace() {
                return;
            }
            if !self.out.is_empty() && !self.out.ends_with('\n') {
                self.out.push('\n');
            }
            self.pending_break = false;
        }
        self.out.push(c);
    }
}

fn extract_once(html: &str) -> String {
    let bytes = html.as_bytes();
    let mut b = Builder { out: String::with_capacity(html.len()), pending_break: false };
    let mut i = 0;
    while i < html.len() {
        let rest = &html[i..];
        if let Some(comment) = rest.strip_prefix("<!--") {
            i = match comment.find("-->") {
                Some(p) => i + 4 + p + 3,
                None => html.len(),
            };
            continue;
        }
        if opens_tag(rest) {
            let Some(end) = tag_end(bytes, i) else {
                break;
            };
            let (name, closing) = tag_name(&html[i + 1..end]);
            i = end + 1;
            if !closing && SKIP_CONTENT_TAGS.contains(&name.as_str()) {
                i = skip_past_close(bytes, i, &name);
                b.pending_break = true;
                continue;
            }
            if BLOCK_TAGS.contains(&name.as_str()) {
                b.pending_break = true;
            }
            continue;
        }
        if rest.starts_with('&') {
            if let Some((decoded, len)) = decode_entity(rest) {
                b.push(decoded);
                i += len;
                continue;
            }
        }
        let c = rest.chars().next().expect("non-empty");
        b.push(c);
        i += c.len_utf8();
    }
    normalize_lines(&b.out)
}

/// `<` followed by a letter, `/letter`, `!` or `?` starts markup.
fn opens_tag(rest: &str) -> bool {
    let mut it = rest.bytes();
    if it.next() != Some(b'<') {
        return false;
    }
    match it.next() {
        Some(c) if c.is_ascii_alphabetic() || c == b'!' || c == b'?' => true,
        Some(b'/') => matches!(it.next(), Some(c) if c.is_ascii_alphabetic()),
        _ => false,
    }
}

/// Index of the `>` closing the tag opened at `start`, honoring quoted
/// attribute values. Falls back to the first `>` if a quote never closes.
fn tag_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut quote = None;
    for (j, &c) in bytes.iter().enumerate().skip(start + 1) {
        match (quote, c) {
            (None, b'"' | b'\'') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, b'>') => return Some(j),
            _ => {}
        }
    }
    bytes[start + 1..].iter().position(|&c| c == b'>').map(|p| start + 1 + p)
}

fn tag_name(inner: &str) -> (String, bool) {
    let (closing, body) = match inner.strip_prefix('/') {
        Some(b) => (true, b),
        None => (false, inner),
    };
    let name = body
        .bytes()
        .take_while(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase() as char)
        .collect();
    (name, closing)
}

fn skip_past_close(bytes: &[u8], from: usize, name: &str) -> usize {
    let needle: Vec<u8> = format!("</{name}").into_bytes();
    let found = bytes[from..]
        .windows(needle.len())
        .position(|w| w.eq_ignore_ascii_case(&needle));
    match found {
        Some(p) => {
            let close = from + p;
            match bytes[close..].iter().position(|&c| c == b'>') {
                Some(q) => close + q + 1,
                None => bytes.len(),
            }
        }
        None => bytes.len(),
    }
}

/// Decode an entity at the start of `rest`; returns the char and the number
/// of bytes consumed. Unknown or invalid references are left alone.
fn decode_entity(rest: &str) -> Option<(char, usize)> {
    let semi = rest.as_bytes().iter().take(12).position(|&c| c == b';')?;
    let body = &rest[1..semi];
    let c = match body {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        _ => {
            let num = body.strip_prefix('#')?;
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse::<u32>().ok()?,
            };
            if code == 0 {
                return None;
            }
            char::from_u32(code)?
        }
    };
    Some((c, semi + 1))
}

fn normalize_lines(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut newlines = 0usize;
    for line in raw.split('\n') {
        let line = line.trim();
        if line.is_empty() {
            newlines += 1;
            continue;
        }
        if !out.is_empty() {
            for _ in 0..newlines.clamp(1, 2) {
                out.push('\n');
            }
        }
        newlines = 1;
        out.push_str(line);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_a_single_tag() {
        assert_eq!(extract_html_text("<p>Hi</p>"), "Hi");
    }

    #[test]
    fn drops_script_content() {
        assert_eq!(extract_html_text("<script>x=1</script>Hello"), "Hello");
        assert_eq!(extract_html_text("<STYLE type=\"text/css\">p{}</Style>ok"), "ok");
    }

    #[test]
    fn block_tags_and_entities() {
        assert_eq!(extract_html_text("<div>a</div><div>b &amp; c</div>"), "a\nb & c");
    }

    #[test]
    fn numeric_references() {
        assert_eq!(extract_html_text("&#72;&#x69;!"), "Hi!");
        assert_eq!(extract_html_text("&#0; &bogus;"), "&#0; &bogus;");
    }

    #[test]
    fn newline_runs_collapse_to_two() {
        assert_eq!(extract_html_text("<pre>a\n\n\n\n\nb</pre>"), "a\n\nb");
    }

    #[test]
    fn inline_tags_do_not_break_lines() {
        assert_eq!(extract_html_text("<p>one <b>two</b> <a href=\"x>y\">three</a></p>"), "one two three");
    }

    #[test]
    fn comments_and_unterminated_markup() {
        assert_eq!(extract_html_text("a<!-- hidden -->b"), "ab");
        assert_eq!(extract_html_text("keep <p unterminated"), "keep");
        assert_eq!(extract_html_text("1 < 2 and 3 > 2"), "1 < 2 and 3 > 2");
    }

    #[test]
    fn escaped_markup_is_stable() {
        let once = extract_html_text("&lt;p&gt;x&lt;/p&gt;");
        assert_eq!(extract_html_text(&once), once);
        assert!(!once.contains("<p>"));
    }

    proptest! {
        #[test]
        fn idempotent(s in "(<p>|</p>|<div>|<br>|<script>|</script>|&amp;|&lt;|&gt;|&#60;|<!--|-->|[a-z ]|\n|<|>|&){0,40}") {
            let once = extract_html_text(&s);
            prop_assert_eq!(extract_html_text(&once), once);
        }

        #[test]
        fn idempotent_any_text(s in "\\PC{0,60}") {
            let once = extract_html_text(&s);
            prop_assert_eq!(extract_html_text(&once), once);
        }
    }
}
