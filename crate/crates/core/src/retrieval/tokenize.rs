//! Code-aware tokenization for lexical retrieval.
//!
//! Identifiers split on underscores and camel-case boundaries and are
//! lower-cased; language keywords and punctuation drop out; numeric literals
//! are kept verbatim. Lemmatization is the identity transform for code
//! identifiers, stated here so scores stay reproducible.

use crate::lang::Language;

/// Splits source text into retrieval tokens for the given language.
pub fn tokenize_code(text: &str, language: Language) -> Vec<String> {
    subtokens(text)
        .into_iter()
        .filter(|t| !is_keyword(language, t))
        .collect()
}

/// Language-independent splitting: identifier subtokens plus verbatim
/// numeric literals. Used directly by the hashed fallback embedder.
pub fn subtokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in words(text) {
        if word.starts_with(|c: char| c.is_ascii_digit()) {
            out.push(word.to_string());
            continue;
        }
        for part in split_identifier(word) {
            out.push(part.to_ascii_lowercase());
        }
    }
    out
}

fn is_keyword(language: Language, token: &str) -> bool {
    language
        .keywords()
        .iter()
        .any(|k| k.eq_ignore_ascii_case(token))
}

fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_ascii_alphanumeric() && c != '_')
        .filter(|w| !w.is_empty())
}

/// `copyHashState` -> [copy, Hash, State]; `HTTPServer` -> [HTTP, Server];
/// `update_state` -> [update, state].
fn split_identifier(word: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    for chunk in word.split('_').filter(|c| !c.is_empty()) {
        let bytes: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        for i in 1..bytes.len() {
            let prev = bytes[i - 1];
            let cur = bytes[i];
            let next_lower = bytes.get(i + 1).map(|c| c.is_lowercase()).unwrap_or(false);
            let boundary = (cur.is_uppercase() && (prev.is_lowercase() || prev.is_ascii_digit()))
                || (cur.is_uppercase() && prev.is_uppercase() && next_lower);
            if boundary {
                parts.push(slice_chars(chunk, start, i));
                start = i;
            }
        }
        parts.push(slice_chars(chunk, start, bytes.len()));
    }
    parts
}

fn slice_chars(s: &str, start: usize, end: usize) -> &str {
    let b0 = s.char_indices().nth(start).map(|(i, _)| i).unwrap_or(0);
    let b1 = s.char_indices().nth(end).map(|(i, _)| i).unwrap_or(s.len());
    &s[b0..b1]
}
