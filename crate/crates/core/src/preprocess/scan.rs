//! Hand-rolled scanners for the cleaning rules. Each matched span is replaced
//! by a single space.

use alloc::string::String;

const URL_PREFIXES: [&str; 3] = ["https://", "http://", "t.co/"];

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn starts_with_ignore_ascii_case(haystack: &str, prefix: &str) -> bool {
    haystack.len() >= prefix.len()
        && haystack.as_bytes()[..prefix.len()].eq_ignore_ascii_case(prefix.as_bytes())
}

/// Scheme-prefixed URLs and `t.co/` shortlinks, up to the next whitespace.
pub(super) fn remove_urls(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if URL_PREFIXES
            .iter()
            .any(|p| starts_with_ignore_ascii_case(rest, p))
        {
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            out.push(' ');
            rest = &rest[end..];
        } else {
            out.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    out
}

/// Length in bytes of an HTML tag or character entity at the start of `s`.
fn markup_len(s: &str) -> Option<usize> {
    let mut chars = s.chars();
    match chars.next()? {
        '<' => {
            let next = chars.next()?;
            if !(next.is_ascii_alphabetic() || next == '/' || next == '!') {
                return None;
            }
            let close = s.find('>')?;
            if s[1..close].contains('<') {
                return None;
            }
            Some(close + 1)
        }
        '&' => {
            let body = &s[1..];
            let (digits, name_len) = match body.strip_prefix('#') {
                Some(num) => (true, num.bytes().take_while(u8::is_ascii_digit).count()),
                None => (false, body.bytes().take_while(u8::is_ascii_alphabetic).count()),
            };
            let offset = 1 + usize::from(digits) + name_len;
            (name_len > 0 && s.as_bytes().get(offset) == Some(&b';')).then_some(offset + 1)
        }
        _ => None,
    }
}

/// HTML tags and entities. Runs to a fixpoint because removing an inner tag
/// can expose an outer one (`<a<b>>`).
pub(super) fn remove_html(text: &str) -> String {
    let mut current = String::from(text);
    loop {
        let mut out = String::with_capacity(current.len());
        let mut changed = false;
        let mut rest = current.as_str();
        while let Some(c) = rest.chars().next() {
            if let Some(len) = markup_len(rest) {
                out.push(' ');
                rest = &rest[len..];
                changed = true;
            } else {
                out.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
        if !changed {
            return out;
        }
        current = out;
    }
}

/// `@name` / `#tag` style tokens: the marker followed by one or more word
/// characters.
pub(super) fn remove_prefixed_words(text: &str, marker: char) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if c == marker {
            let after = &rest[c.len_utf8()..];
            let word_len: usize = after
                .chars()
                .take_while(|&w| is_word(w))
                .map(char::len_utf8)
                .sum();
            if word_len > 0 {
                out.push(' ');
                rest = &after[word_len..];
                continue;
            }
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}

pub(super) fn replace_chars(text: &str, pred: impl Fn(char) -> bool) -> String {
    text.chars().map(|c| if pred(c) { ' ' } else { c }).collect()
}

/// Char-wise lowercase that never lengthens the text: multi-char lowercase
/// expansions keep only their first char.
pub(super) fn lowercase(text: &str) -> String {
    text.chars()
        .map(|c| c.to_lowercase().next().unwrap_or(c))
        .collect()
}
