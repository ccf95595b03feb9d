//! Text normalization shared by every metric: tokenization, stemming and
//! stopword filtering.

mod porter;
mod tokenize;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use porter::stem;
pub use tokenize::{tokenize, tokenize_str};

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

#[derive(Debug, Error)]
pub enum TextError {
    #[error("caption is empty after trimming whitespace")]
    EmptyCaption,
    #[error("failed to read stopword file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Raw caption text, guaranteed non-empty after trimming.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RawCaption(String);

impl RawCaption {
    pub fn new(text: impl Into<String>) -> Result<Self, TextError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(TextError::EmptyCaption);
        }
        Ok(Self(text))
    }

    pub fn text(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for RawCaption {
    type Error = TextError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<RawCaption> for String {
    fn from(value: RawCaption) -> Self {
        value.0
    }
}

impl fmt::Display for RawCaption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered sequence of lowercase tokens, none empty or containing whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenizedCaption {
    tokens: Vec<String>,
}

impl TokenizedCaption {
    /// Builds a caption from pre-split tokens, lowercasing them and dropping
    /// anything empty. Tokens containing whitespace are split on it.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokens = tokens
            .into_iter()
            .flat_map(|t| t.as_ref().to_lowercase().split_whitespace().map(str::to_string).collect::<Vec<_>>())
            .collect();
        Self { tokens }
    }

    /// Whitespace-splits already normalized text (test fixtures, benches).
    pub fn from_words(text: &str) -> Self {
        Self::from_tokens(text.split_whitespace())
    }

    pub(crate) fn from_tokens_unchecked(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| !t.is_empty() && !t.contains(char::is_whitespace)));
        Self { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Porter-stems every token.
    pub fn stemmed(&self) -> Self {
        Self { tokens: self.tokens.iter().map(|t| stem(t)).collect() }
    }
}

impl fmt::Display for TokenizedCaption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

/// A set of lowercase stopwords.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self { words: words.into_iter().map(|w| w.as_ref().trim().to_lowercase()).filter(|w| !w.is_empty()).collect() }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    /// Parses the one-token-per-line format; `#` lines are comments.
    pub fn parse(text: &str) -> Self {
        Self::new(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| TextError::Io { path: path.display().to_string(), source })?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// Order-preserving filter; the result may be empty.
pub fn remove_stopwords(caption: &TokenizedCaption, stop: &StopwordList) -> TokenizedCaption {
    TokenizedCaption { tokens: caption.tokens.iter().filter(|t| !stop.contains(t)).cloned().collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_caption_rejects_blank() {
        assert!(RawCaption::new("   ").is_err());
        assert!(RawCaption::new(" a ").is_ok());
    }

    #[test]
    fn stopword_filter_examples() {
        let stop = StopwordList::new(["a", "on"]);
        let got = remove_stopwords(&TokenizedCaption::from_words("a man on a lake"), &stop);
        assert_eq!(got.tokens(), ["man", "lake"]);

        let stop = StopwordList::new(["the", "of"]);
        assert!(remove_stopwords(&TokenizedCaption::from_words("the of"), &stop).is_empty());

        let got = remove_stopwords(&TokenizedCaption::from_words("dog"), &StopwordList::empty());
        assert_eq!(got.tokens(), ["dog"]);
    }

    #[test]
    fn stopword_file_format() {
        let list = StopwordList::parse("# comment\nThe\n\n  of \n#a\n");
        assert_eq!(list.iter().collect::<Vec<_>>(), ["of", "the"]);
    }

    #[test]
    fn bundled_list_is_lowercase() {
        let list = StopwordList::english();
        assert!(list.len() > 100);
        assert!(list.iter().all(|w| w == w.to_lowercase()));
        assert!(list.contains("the") && !list.contains("man"));
    }
}
