//! Text normalization and token segmentation shared by every stage.

use std::ops::Range;

use unicode_normalization::UnicodeNormalization;

/// Maximum number of characters kept after normalization.
pub const MAX_TEXT_CHARS: usize = 60_000;

/// NFC-compose, lowercase, collapse whitespace runs and cap at
/// [`MAX_TEXT_CHARS`] characters.
pub fn normalize_text(raw: &str) -> String {
    let lowered: String = raw.nfc().collect::<String>().to_lowercase();
    // Lowercasing can decompose (e.g. U+0130), so compose again.
    let composed: String = lowered.nfc().collect();

    let mut out = String::with_capacity(composed.len());
    let mut chars = 0usize;
    for word in composed.split_whitespace() {
        if chars >= MAX_TEXT_CHARS {
            break;
        }
        if !out.is_empty() {
            out.push(' ');
            chars += 1;
            if chars >= MAX_TEXT_CHARS {
                break;
            }
        }
        for c in word.chars() {
            if chars >= MAX_TEXT_CHARS {
                break;
            }
            out.push(c);
            chars += 1;
        }
    }
    // A cut right after a separator would leave a trailing space.
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Byte range of one token inside the text it was segmented from.
pub type TokenSpan = Range<usize>;

/// Length function used for chunking and prompt budgets.
///
/// Implementations must satisfy `count(s) == segment(s).len()`, and every
/// span must be a non-empty, strictly increasing, non-overlapping byte range
/// on char boundaries.
pub trait TokenCounter: Send + Sync {
    fn segment(&self, text: &str) -> Vec<TokenSpan>;

    fn count(&self, text: &str) -> usize {
        self.segment(text).len()
    }
}

/// Maximal runs of word characters, plus every other non-whitespace
/// character as a token of its own.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordPunctCounter;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

impl TokenCounter for WordPunctCounter {
    fn segment(&self, text: &str) -> Vec<TokenSpan> {
        let mut spans = Vec::new();
        let mut word_start: Option<usize> = None;
        for (i, c) in text.char_indices() {
            if is_word_char(c) {
                if word_start.is_none() {
                    word_start = Some(i);
                }
                continue;
            }
            if let Some(start) = word_start.take() {
                spans.push(start..i);
            }
            if !c.is_whitespace() {
                spans.push(i..i + c.len_utf8());
            }
        }
        if let Some(start) = word_start {
            spans.push(start..text.len());
        }
        spans
    }

    fn count(&self, text: &str) -> usize {
        let mut n = 0;
        let mut in_word = false;
        for c in text.chars() {
            if is_word_char(c) {
                if !in_word {
                    n += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !c.is_whitespace() {
                    n += 1;
                }
            }
        }
        n
    }
}

/// Token strings for a text under a counter.
pub fn tokens<'a>(counter: &dyn TokenCounter, text: &'a str) -> Vec<&'a str> {
    counter
        .segment(text)
        .into_iter()
        .map(|span| &text[span])
        .collect()
}

/// Lowercased alphanumeric runs. Shared by the lexical index and the metrics.
pub fn alnum_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_collapses_and_lowercases() {
        assert_eq!(
            normalize_text("  The\tAPPEAL\n is   allowed "),
            "the appeal is allowed"
        );
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text(" \n\t "), "");
    }

    #[test]
    fn normalize_composes_unicode() {
        // "e" + combining acute accent composes to U+00E9
        assert_eq!(normalize_text("Cafe\u{301}"), "caf\u{e9}");
    }

    #[test]
    fn normalize_caps_length_in_chars() {
        let raw: String = "é".repeat(70_000);
        let out = normalize_text(&raw);
        assert_eq!(out.chars().count(), MAX_TEXT_CHARS);
        assert_eq!(out, "é".repeat(60_000));

        let words = "ab ".repeat(30_000);
        let out = normalize_text(&words);
        assert!(out.chars().count() <= MAX_TEXT_CHARS);
        assert!(!out.ends_with(' '));
    }

    #[test]
    fn segmentation_splits_words_and_punctuation() {
        let c = WordPunctCounter;
        assert_eq!(
            tokens(&c, "section 302, ipc."),
            vec!["section", "302", ",", "ipc", "."]
        );
        assert_eq!(c.count(""), 0);
        assert_eq!(c.count("a-b"), 3);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,200}") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once.clone());
        }

        #[test]
        fn count_matches_segment(s in "\\PC{0,200}") {
            let c = WordPunctCounter;
            prop_assert_eq!(c.count(&s), c.segment(&s).len());
        }

        #[test]
        fn count_is_additive_over_whitespace(a in "[a-z.,]{0,30}", b in "[a-z.,]{0,30}") {
            let c = WordPunctCounter;
            let joined = format!("{a} {b}");
            prop_assert_eq!(c.count(&joined), c.count(&a) + c.count(&b));
        }
    }
}
