//! Character-offset spans and word tokenization shared by the extractor and
//! the embedding provider. All offsets count Unicode scalar values, not bytes.

use serde::{Deserialize, Serialize};

/// Half-open `[start, end)` range of character offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        CharSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Twice the midpoint, kept integral.
    pub fn midpoint2(&self) -> usize {
        self.start + self.end
    }

    pub fn overlaps(&self, other: &CharSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Byte offset of every char boundary, plus the final length.
pub fn char_boundaries(text: &str) -> Vec<usize> {
    text.char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .collect()
}

/// Substring by character offsets; out-of-range ends are clamped.
pub fn char_slice(text: &str, span: CharSpan) -> &str {
    let bounds = char_boundaries(text);
    let n = bounds.len() - 1;
    let start = span.start.min(n);
    let end = span.end.clamp(start, n);
    &text[bounds[start]..bounds[end]]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub span: CharSpan,
}

/// Word tokens: maximal runs of alphanumeric characters, allowing a single
/// apostrophe, hyphen or period between alphanumerics ("Saint-Denis",
/// "O'Fallon", "U.S").
pub fn word_tokens(text: &str) -> Vec<Token<'_>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        let mut end = i + 1;
        while end < chars.len() {
            let c = chars[end].1;
            if c.is_alphanumeric() {
                end += 1;
            } else if matches!(c, '\'' | '-' | '’' | '.')
                && end + 1 < chars.len()
                && chars[end + 1].1.is_alphanumeric()
            {
                end += 2;
            } else {
                break;
            }
        }
        let byte_start = chars[start].0;
        let byte_end = chars.get(end).map_or(text.len(), |(b, _)| *b);
        tokens.push(Token {
            text: &text[byte_start..byte_end],
            span: CharSpan::new(start, end),
        });
        i = end;
    }
    tokens
}
