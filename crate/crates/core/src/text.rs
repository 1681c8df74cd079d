//! Language-neutral sentence splitting and tokenization.
//!
//! Sentences end after a run of `.`, `!`, `?` or `。`, or at a newline. The
//! terminator stays attached to its sentence so that templates such as
//! `I support {A}.` keep their punctuation.
//!
//! Tokens are maximal runs of word characters (alphanumerics, `_`, `#`, `@`,
//! plus `'`, `’` and `-` when they sit between alphanumerics) or single
//! punctuation characters. Token text is case-folded.

use std::ops::Range;

const TERMINATORS: [char; 4] = ['.', '!', '?', '。'];

/// A token with its byte span in the source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Range<usize>,
}

fn is_terminator(c: char) -> bool {
    TERMINATORS.contains(&c)
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '#' || c == '@'
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '’' | '-')
}

/// Splits `text` into trimmed, non-empty sentences.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '\n' || c == '\r' {
            push_trimmed(&mut out, &text[start..i]);
            start = i + c.len_utf8();
        } else if is_terminator(c) {
            let mut end = i + c.len_utf8();
            while let Some(&(j, d)) = chars.peek() {
                if !is_terminator(d) {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
            push_trimmed(&mut out, &text[start..end]);
            start = end;
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, s: &'a str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s);
    }
}

/// Tokenizes `text`, case-folding each token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |idx: usize| chars.get(idx).map_or(text.len(), |&(b, _)| b);
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        if is_word(c) {
            while j < chars.len() {
                let d = chars[j].1;
                let joined = is_joiner(d)
                    && chars[j - 1].1.is_alphanumeric()
                    && chars.get(j + 1).is_some_and(|&(_, e)| e.is_alphanumeric());
                if is_word(d) || joined {
                    j += 1;
                } else {
                    break;
                }
            }
        }
        let span = chars[i].0..end_of(j);
        tokens.push(Token {
            text: text[span.clone()].to_lowercase(),
            span,
        });
        i = j;
    }
    tokens
}

/// Case-folded token texts of `text`.
pub fn token_texts(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}

/// Collapses whitespace runs to single spaces and trims.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Start positions where `needle` occurs as a contiguous token run in `haystack`.
pub fn find_token_runs<S: AsRef<str>>(haystack: &[Token], needle: &[S]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return Vec::new();
    }
    (0..=haystack.len() - needle.len())
        .filter(|&i| {
            needle
                .iter()
                .zip(&haystack[i..])
                .all(|(n, h)| n.as_ref() == h.text)
        })
        .collect()
}
