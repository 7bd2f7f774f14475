//! The engine's one tokenizer, shared by BM25 indexing, query analysis,
//! length truncation and the toy embedder.
//!
//! Text is NFC-normalized, split on Unicode (UAX #29) word boundaries and
//! lowercased. Scripts that are written without spaces (Han, Hiragana,
//! Katakana, Hangul, Thai) are emitted one character per token.

use std::borrow::Cow;

use unicode_normalization::{is_nfc, UnicodeNormalization};
use unicode_segmentation::UnicodeSegmentation;

fn is_unigram_script(ch: char) -> bool {
    matches!(ch as u32,
        // Thai
        0x0E00..=0x0E7F
        // Hangul jamo, compatibility jamo, syllables
        | 0x1100..=0x11FF | 0x3130..=0x318F | 0xA960..=0xA97F | 0xAC00..=0xD7AF | 0xD7B0..=0xD7FF
        // Hiragana, Katakana, Katakana phonetic extensions, halfwidth Katakana
        | 0x3040..=0x309F | 0x30A0..=0x30FF | 0x31F0..=0x31FF | 0xFF66..=0xFF9F
        // CJK ideographs: unified, extension A, compatibility, supplementary planes
        | 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x323AF
    )
}

fn has_alphanumeric(s: &str) -> bool {
    s.chars().any(char::is_alphanumeric)
}

/// Byte spans of the tokens of `text`, which must already be NFC.
pub(crate) fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    for (word_start, word) in text.unicode_word_indices() {
        let mut run_start: Option<usize> = None;
        for (off, ch) in word.char_indices() {
            if is_unigram_script(ch) {
                if let Some(s) = run_start.take() {
                    if has_alphanumeric(&word[s..off]) {
                        spans.push((word_start + s, word_start + off));
                    }
                }
                spans.push((word_start + off, word_start + off + ch.len_utf8()));
            } else if run_start.is_none() {
                run_start = Some(off);
            }
        }
        if let Some(s) = run_start {
            if has_alphanumeric(&word[s..]) {
                spans.push((word_start + s, word_start + word.len()));
            }
        }
    }
    spans
}

fn to_nfc(text: &str) -> Cow<'_, str> {
    if is_nfc(text) {
        Cow::Borrowed(text)
    } else {
        Cow::Owned(text.nfc().collect())
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    let text = to_nfc(text);
    token_spans(&text)
        .into_iter()
        .map(|(s, e)| text[s..e].to_lowercase())
        .collect()
}

/// Number of tokens [`tokenize`] would produce.
pub fn token_count(text: &str) -> usize {
    token_spans(&to_nfc(text)).len()
}

/// Cuts `text` after its `budget`-th token.
///
/// Text within budget is returned unchanged. Otherwise the result is the
/// prefix of the NFC form of `text` that ends with the last kept token, so
/// separators between kept tokens survive and trailing ones are dropped.
pub fn truncate_text(text: &str, budget: usize) -> String {
    let nfc = to_nfc(text);
    let spans = token_spans(&nfc);
    if spans.len() <= budget {
        return text.to_owned();
    }
    match budget {
        0 => String::new(),
        _ => nfc[..spans[budget - 1].1].to_owned(),
    }
}
