//! Small natural-language helpers shared by the detectors: SSML stripping,
//! sentence segmentation, word tokenization and fuzzy sentence comparison.

use std::sync::OnceLock;

use regex::Regex;

/// Opening and closing marks used for interpolation holes in output text.
pub const HOLE_OPEN: char = '⟨';
pub const HOLE_CLOSE: char = '⟩';

fn break_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)<\s*break\b[^>]*>").unwrap())
}

fn any_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<[/!?]?[A-Za-z][^<>]*>").unwrap())
}

/// Removes SSML markup. `<break>` tags become sentence boundaries.
pub fn strip_ssml(text: &str) -> String {
    let with_breaks = break_tag().replace_all(text, "\n");
    any_tag().replace_all(&with_breaks, " ").into_owned()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    /// Terminating punctuation, if the sentence had one.
    pub terminator: Option<char>,
}

impl Sentence {
    pub fn is_question(&self) -> bool {
        self.terminator == Some('?') || self.text.contains('?')
    }
}

/// Splits on `.`, `?`, `!` (when followed by whitespace or end of text) and on
/// line breaks. Empty pieces are dropped.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let mut out = Vec::new();
    let mut current = String::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let flush = |current: &mut String, terminator: Option<char>, out: &mut Vec<Sentence>| {
        let trimmed = current.trim();
        if trimmed.chars().any(|c| c.is_alphanumeric() || c == HOLE_OPEN) {
            out.push(Sentence {
                text: trimmed.to_string(),
                terminator,
            });
        }
        current.clear();
    };
    while i < chars.len() {
        let c = chars[i];
        match c {
            '.' | '?' | '!' => {
                current.push(c);
                // absorb runs like "?!" or "..."
                while i + 1 < chars.len() && matches!(chars[i + 1], '.' | '?' | '!') {
                    i += 1;
                    current.push(chars[i]);
                }
                let at_end = i + 1 >= chars.len();
                let next_ws = !at_end && (chars[i + 1].is_whitespace() || chars[i + 1] == '"' || chars[i + 1] == '\'');
                if at_end || next_ws {
                    let term = if current.contains('?') { '?' } else { c };
                    flush(&mut current, Some(term), &mut out);
                }
            }
            '\n' | '\r' => flush(&mut current, None, &mut out),
            _ => current.push(c),
        }
        i += 1;
    }
    flush(&mut current, None, &mut out);
    out
}

/// Lower-cased word tokens. Letters, digits, apostrophes, `*` and `_` form
/// words; interpolation holes are kept whole as a single opaque token.
pub fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == HOLE_OPEN {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            let mut hole = String::from(HOLE_OPEN);
            for h in chars.by_ref() {
                hole.push(h);
                if h == HOLE_CLOSE {
                    break;
                }
            }
            out.push(hole);
            continue;
        }
        let c = if c == '\u{2019}' { '\'' } else { c };
        if c.is_alphanumeric() || c == '\'' || c == '*' || c == '_' {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out.into_iter()
        .map(|w| {
            if w.starts_with(HOLE_OPEN) {
                w
            } else {
                w.trim_matches('\'').to_string()
            }
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Splits an identifier at camelCase, snake_case, dots and digits:
/// `userName` -> [user, name], `AMAZON.US_City` -> [amazon, us, city].
pub fn split_identifier(ident: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = ident.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                parts.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if c.is_uppercase() && !cur.is_empty() {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if prev.is_lowercase() || prev.is_ascii_digit() || (prev.is_uppercase() && next_lower) {
                parts.push(std::mem::take(&mut cur));
            }
        }
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        parts.push(cur);
    }
    parts
}

/// Lower-cases, drops punctuation (apostrophes kept) and collapses spaces.
pub fn normalize_sentence(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        let c = if c == '\u{2019}' { '\'' } else { c };
        if c.is_alphanumeric() || c == '\'' {
            out.extend(c.to_lowercase());
        } else if c.is_whitespace() || c == '-' || c == '_' {
            out.push(' ');
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalized edit similarity in [0, 1] after [`normalize_sentence`].
pub fn sentence_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(&normalize_sentence(a), &normalize_sentence(b))
}

/// Positions where `phrase` occurs as a contiguous token run in `tokens`.
pub fn find_phrase(tokens: &[String], phrase: &[String]) -> Vec<usize> {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return Vec::new();
    }
    (0..=tokens.len() - phrase.len())
        .filter(|&i| tokens[i..i + phrase.len()] == *phrase)
        .collect()
}

/// Whole-word, case-insensitive phrase containment.
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    !find_phrase(&words(text), &words(phrase)).is_empty()
}

/// True when `token` is `verb` or a regular inflection of it
/// (`tell`, `tells`, `telling`, `told` is not covered).
pub fn is_inflection_of(token: &str, verb: &str) -> bool {
    if token == verb {
        return true;
    }
    let Some(rest) = token.strip_prefix(verb) else {
        // handle e-dropping: "provide" -> "providing", "share" -> "shared"
        if let Some(stem) = verb.strip_suffix('e') {
            if let Some(rest) = token.strip_prefix(stem) {
                return matches!(rest, "ing" | "ed" | "es");
            }
        }
        return false;
    };
    match rest {
        "s" | "es" | "ed" | "ing" | "d" => true,
        // doubled final consonant: "get" -> "getting"
        _ => {
            let last = verb.chars().last();
            last.is_some_and(|l| rest.len() >= 2 && rest.starts_with(l) && matches!(&rest[l.len_utf8()..], "ing" | "ed"))
        }
    }
}

/// Visible text of an HTML document: tags removed, script/style dropped,
/// common entities decoded, block boundaries turned into line breaks.
pub fn html_visible_text(html: &str) -> String {
    static DROP: OnceLock<Regex> = OnceLock::new();
    static BLOCK: OnceLock<Regex> = OnceLock::new();
    static TAG: OnceLock<Regex> = OnceLock::new();
    let drop = DROP.get_or_init(|| {
        Regex::new(r"(?is)<(script|style|noscript|template)\b[^>]*>.*?</(script|style|noscript|template)\s*>|<!--.*?-->").unwrap()
    });
    let block = BLOCK.get_or_init(|| {
        Regex::new(r"(?i)</?(p|div|br|li|ul|ol|h[1-6]|tr|td|th|section|article|header|footer|title|table|blockquote)\b[^>]*>").unwrap()
    });
    let tag = TAG.get_or_init(|| Regex::new(r"(?s)<[^>]*>").unwrap());
    let text = drop.replace_all(html, " ");
    let text = block.replace_all(&text, "\n");
    let text = tag.replace_all(&text, " ");
    let text = text
        .replace("&nbsp;", " ")
        .replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&apos;", "'");
    text.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Truncates to at most `max` characters on a char boundary.
pub fn truncate_chars(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ssml_breaks_split_sentences() {
        let s = strip_ssml("<speak>Welcome<break time=\"1s\"/>what is your <emphasis>name</emphasis>?</speak>");
        let sentences = split_sentences(&s);
        assert_eq!(sentences.len(), 2);
        assert_eq!(sentences[0].text, "Welcome");
        assert!(sentences[1].is_question());
    }

    #[test]
    fn sentence_split_keeps_decimals() {
        let s = split_sentences("It costs 3.5 dollars. Okay?");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].text, "It costs 3.5 dollars.");
        assert_eq!(s[1].terminator, Some('?'));
    }

    #[test]
    fn words_keep_holes_and_masks() {
        assert_eq!(
            words("Thanks ⟨userName⟩, you f*cked up!"),
            vec!["thanks", "⟨userName⟩", "you", "f*cked", "up"]
        );
        assert_eq!(words("Ryan’s note"), vec!["ryan's", "note"]);
    }

    #[test]
    fn identifier_splitting() {
        assert_eq!(split_identifier("userName"), vec!["user", "name"]);
        assert_eq!(split_identifier("AMAZON.US_City"), vec!["amazon", "us", "city"]);
        assert_eq!(split_identifier("FirstName"), vec!["first", "name"]);
        assert_eq!(split_identifier("LIST_OF_NAMES"), vec!["list", "of", "names"]);
        assert_eq!(split_identifier("HTMLParser"), vec!["html", "parser"]);
    }

    #[test]
    fn similarity_ignores_case_and_punctuation() {
        assert!((sentence_similarity("How old are you?", "how old are you") - 1.0).abs() < 1e-12);
        assert!(sentence_similarity("How should I call you", "What can I call you") < 0.9);
    }

    #[test]
    fn inflections() {
        assert!(is_inflection_of("telling", "tell"));
        assert!(is_inflection_of("provides", "provide"));
        assert!(is_inflection_of("providing", "provide"));
        assert!(is_inflection_of("collected", "collect"));
        assert!(is_inflection_of("stored", "store"));
        assert!(is_inflection_of("rating", "rate"));
        assert!(!is_inflection_of("telephone", "tell"));
    }

    #[test]
    fn html_text_drops_scripts() {
        let t = html_visible_text("<html><head><style>p{}</style><script>var a='privacy';</script></head><body><p>We collect data.</p><p>Hi&amp;bye</p></body></html>");
        assert_eq!(t, "We collect data.\nHi&bye");
    }
}
