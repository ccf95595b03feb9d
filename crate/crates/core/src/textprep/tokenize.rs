//! Simplified PTB-style tokenizer.
//!
//! Rules, applied after NFC normalization and lowercasing:
//!
//! * whitespace separates tokens and is never part of one;
//! * a word is a run of alphanumeric characters, optionally joined by
//!   `-` between alphanumerics, `'` between letters, or `.` between digits
//!   (`t-shirt`, `o'clock`, `3.5`);
//! * clitics are split off a word: `n't`, `'s`, `'re`, `'ve`, `'ll`, `'d`, `'m`;
//! * any other character is punctuation; a run of the same punctuation
//!   character is one token (`...`, `--`).

use unicode_normalization::UnicodeNormalization;

use super::{RawCaption, TokenizedCaption};

const CLITICS: [&str; 6] = ["s", "re", "ve", "ll", "d", "m"];

/// Lowercases and splits `raw` into tokens.
///
/// The result may be empty (e.g. whitespace-only input); callers decide
/// whether that is a degenerate caption.
pub fn tokenize(raw: &RawCaption) -> TokenizedCaption {
    tokenize_str(raw.text())
}

/// Tokenizes an arbitrary string without the non-empty check of [`RawCaption`].
pub fn tokenize_str(text: &str) -> TokenizedCaption {
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    let normalized: Vec<char> = lowered.nfc().map(|c| if c == '\u{2019}' { '\'' } else { c }).collect();

    let mut tokens = Vec::new();
    let mut i = 0;
    while i < normalized.len() {
        let c = normalized[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() {
            let end = scan_word(&normalized, i);
            let word: String = normalized[i..end].iter().collect();
            push_word(&word, &mut tokens);
            i = end;
        } else if c == '\'' {
            if let Some(len) = leading_clitic(&normalized, i) {
                tokens.push(normalized[i..i + len].iter().collect());
                i += len;
            } else {
                i = push_punct_run(&normalized, i, &mut tokens);
            }
        } else {
            i = push_punct_run(&normalized, i, &mut tokens);
        }
    }
    TokenizedCaption::from_tokens_unchecked(tokens)
}

fn scan_word(chars: &[char], start: usize) -> usize {
    let mut end = start + 1;
    while end < chars.len() {
        let c = chars[end];
        if c.is_alphanumeric() {
            end += 1;
            continue;
        }
        let prev = chars[end - 1];
        let next = chars.get(end + 1).copied();
        let joins = match (c, next) {
            ('-', Some(n)) => prev.is_alphanumeric() && n.is_alphanumeric(),
            ('\'', Some(n)) => prev.is_alphabetic() && n.is_alphabetic(),
            ('.', Some(n)) => prev.is_numeric() && n.is_numeric(),
            _ => false,
        };
        if joins {
            end += 2;
        } else {
            break;
        }
    }
    end
}

fn push_word(word: &str, tokens: &mut Vec<String>) {
    if let Some(stem) = word.strip_suffix("n't") {
        if !stem.is_empty() {
            push_word(stem, tokens);
            tokens.push("n't".to_string());
            return;
        }
    }
    if let Some(pos) = word.rfind('\'') {
        if pos > 0 && CLITICS.contains(&&word[pos + 1..]) {
            push_word(&word[..pos], tokens);
            tokens.push(word[pos..].to_string());
            return;
        }
    }
    tokens.push(word.to_string());
}

/// Length of a stand-alone clitic such as `'s` starting at `start`.
fn leading_clitic(chars: &[char], start: usize) -> Option<usize> {
    let mut end = start + 1;
    while end < chars.len() && chars[end].is_alphanumeric() {
        end += 1;
    }
    if end == start + 1 {
        return None;
    }
    // A joiner after the letters would make this part of a longer word.
    if let Some(&c) = chars.get(end) {
        if matches!(c, '\'' | '-' | '.') && chars.get(end + 1).is_some_and(|n| n.is_alphanumeric()) {
            return None;
        }
    }
    let suffix: String = chars[start + 1..end].iter().collect();
    CLITICS.contains(&suffix.as_str()).then_some(end - start)
}

fn push_punct_run(chars: &[char], start: usize, tokens: &mut Vec<String>) -> usize {
    let c = chars[start];
    let mut end = start + 1;
    while end < chars.len() && chars[end] == c {
        end += 1;
    }
    tokens.push(chars[start..end].iter().collect());
    end
}
