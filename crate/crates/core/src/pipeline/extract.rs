use crate::index::GazetteerIndex;
use crate::text::{word_tokens, CharSpan};

/// Finds toponym spans in raw text.
pub trait ToponymExtractor: Send + Sync {
    /// Sorted, non-overlapping, non-empty spans within `text`.
    fn extract(&self, text: &str) -> Vec<CharSpan>;
}

/// Gazetteer dictionary matcher over capitalized token sequences.
///
/// Scanning left to right, each capitalized token starts a window of up to
/// `max_tokens` consecutive capitalized tokens; the longest window whose text
/// is an indexed name (exactly, after normalization) becomes a span and the
/// scan resumes after it. Tokens shorter than `min_token_len` characters
/// never start a match.
pub struct DictionaryExtractor<'a> {
    index: &'a GazetteerIndex,
    min_token_len: usize,
    max_tokens: usize,
}

impl<'a> DictionaryExtractor<'a> {
    pub fn new(index: &'a GazetteerIndex, min_token_len: usize) -> Self {
        DictionaryExtractor {
            index,
            min_token_len,
            max_tokens: 6,
        }
    }

    pub fn with_max_tokens(mut self, max_tokens: usize) -> Self {
        self.max_tokens = max_tokens.max(1);
        self
    }
}

fn is_capitalized(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_uppercase)
}

/// Tokens separated only by spaces belong to the same sequence.
fn adjacent(text_between: &str) -> bool {
    !text_between.is_empty() && text_between.chars().all(|c| c == ' ')
}

impl ToponymExtractor for DictionaryExtractor<'_> {
    fn extract(&self, text: &str) -> Vec<CharSpan> {
        let tokens = word_tokens(text);
        let bounds = crate::text::char_boundaries(text);
        let between = |a: usize, b: usize| &text[bounds[tokens[a].span.end]..bounds[tokens[b].span.start]];
        let mut spans = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            if !is_capitalized(tokens[i].text) || tokens[i].span.len() < self.min_token_len {
                i += 1;
                continue;
            }
            let mut last = i;
            while last + 1 < tokens.len()
                && last + 1 - i < self.max_tokens
                && is_capitalized(tokens[last + 1].text)
                && adjacent(between(last, last + 1))
            {
                last += 1;
            }
            let found = (i..=last).rev().find(|&j| {
                let span = CharSpan::new(tokens[i].span.start, tokens[j].span.end);
                self.index
                    .contains_name(&text[bounds[span.start]..bounds[span.end]])
            });
            match found {
                Some(j) => {
                    spans.push(CharSpan::new(tokens[i].span.start, tokens[j].span.end));
                    i = j + 1;
                }
                None => i += 1,
            }
        }
        spans
    }
}
