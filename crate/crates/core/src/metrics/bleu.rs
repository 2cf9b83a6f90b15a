//! Smoothed BLEU over code tokens, plus the keyword-weighted variant.
//!
//! Tokens are surface code tokens: identifier/number runs stay whole and
//! each punctuation character stands alone. Smoothing is add-one on the
//! higher-order n-gram counts so short functions do not zero out.

use crate::lang::Language;
use std::collections::HashMap;

const MAX_ORDER: usize = 4;
const KEYWORD_WEIGHT: f64 = 5.0;

/// Surface token stream: `fn add(a, b)` -> [fn, add, (, a, `,`, b, )].
pub fn code_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() || ch == '_' {
            word.push(ch);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

/// Smoothed 4-gram BLEU with brevity penalty. Unigram precision is exact;
/// orders 2..4 use add-one smoothing.
pub fn bleu(candidate: &[String], reference: &[String]) -> f64 {
    bleu_impl(candidate, reference, None)
}

/// BLEU with target-language keywords up-weighted by a factor of 5 in the
/// unigram precision.
pub fn weighted_bleu(candidate: &[String], reference: &[String], language: Language) -> f64 {
    bleu_impl(candidate, reference, Some(language))
}

fn token_weight(token: &str, language: Option<Language>) -> f64 {
    match language {
        Some(lang) if lang.is_keyword(token) => KEYWORD_WEIGHT,
        _ => 1.0,
    }
}

fn bleu_impl(candidate: &[String], reference: &[String], weighting: Option<Language>) -> f64 {
    if candidate.is_empty() && reference.is_empty() {
        return 1.0;
    }
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }

    let mut log_sum = 0.0;
    for n in 1..=MAX_ORDER {
        let cand_grams = ngram_counts(candidate, n);
        let ref_grams = ngram_counts(reference, n);
        let (mut matched, mut total) = (0.0f64, 0.0f64);
        for (gram, count) in &cand_grams {
            let clipped = (*count).min(ref_grams.get(gram).copied().unwrap_or(0));
            let weight = if n == 1 {
                token_weight(&gram[0], weighting)
            } else {
                1.0
            };
            matched += weight * clipped as f64;
            total += weight * *count as f64;
        }
        let precision = if n == 1 {
            if total == 0.0 {
                return 0.0;
            }
            matched / total
        } else {
            (matched + 1.0) / (total + 1.0)
        };
        if precision == 0.0 {
            return 0.0;
        }
        log_sum += precision.ln();
    }
    brevity_penalty(candidate.len(), reference.len()) * (log_sum / MAX_ORDER as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_stream_matches_hand_count() {
        let tokens = code_tokens("fn add(a, b) { a + b }");
        let expected: Vec<&str> = "fn add ( a , b ) { a + b }".split(' ').collect();
        assert_eq!(tokens, expected);
        assert_eq!(tokens.len(), 12);
    }

    #[test]
    fn identity_scores_one() {
        let toks = code_tokens("fn mix(a: u32) -> u32 { a.rotate_left(5) }");
        assert_eq!(bleu(&toks, &toks), 1.0);
        assert_eq!(weighted_bleu(&toks, &toks, Language::Rust), 1.0);
    }

    #[test]
    fn hand_counted_pair() {
        // Clipped matches by hand: p1 = 10/12, p2 = (7+1)/(11+1),
        // p3 = (5+1)/(10+1), p4 = (3+1)/(9+1); BP = 1.
        let cand = code_tokens("fn add(a, b) { a + b }");
        let refr = code_tokens("fn add(a, c) { a + c }");
        let got = bleu(&cand, &refr);
        assert!((got - 0.5900468726392808).abs() < 1e-12, "{got}");
    }

    #[test]
    fn empty_inputs() {
        let some = code_tokens("fn f() {}");
        assert_eq!(bleu(&[], &[]), 1.0);
        assert_eq!(bleu(&[], &some), 0.0);
        assert_eq!(bleu(&some, &[]), 0.0);
    }

    #[test]
    fn brevity_penalty_applies_to_short_candidates() {
        let refr = code_tokens("fn f() { a; b; c; d; e; }");
        let cand = code_tokens("fn f()");
        let long_score = bleu(&refr, &refr);
        let short_score = bleu(&cand, &refr);
        assert!(short_score < long_score);
    }

    #[test]
    fn keyword_weighting_is_live() {
        // The candidate's spurious `while` keyword weighs 5x, so the
        // weighted unigram precision drops below the plain one.
        let refr = code_tokens("fn mix(a) { if b }");
        let cand = code_tokens("fn mix(a) { while b }");
        let plain = bleu(&cand, &refr);
        let weighted = weighted_bleu(&cand, &refr, Language::Rust);
        assert!(weighted < plain, "weighted {weighted} plain {plain}");
        // Matched keywords keep the score at parity with plain BLEU.
        let same = code_tokens("fn mix(a) { if b }");
        assert_eq!(
            weighted_bleu(&same, &refr, Language::Rust),
            bleu(&same, &refr)
        );
    }
}
