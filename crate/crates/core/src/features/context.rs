use serde::{Deserialize, Serialize};

use super::EmbeddingProvider;
use crate::text::{char_boundaries, CharSpan};

/// Context vectors for one mention, all of the provider's dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVectors {
    pub mention: Vec<f64>,
    /// Mean of the other mentions' span vectors; zero when there are none.
    pub other_mentions: Vec<f64>,
    pub document: Vec<f64>,
}

impl ContextVectors {
    pub fn zeros(dimension: usize) -> Self {
        ContextVectors {
            mention: vec![0.0; dimension],
            other_mentions: vec![0.0; dimension],
            document: vec![0.0; dimension],
        }
    }

    /// Common dimension, or `None` when the three vectors disagree.
    pub fn dimension(&self) -> Option<usize> {
        let d = self.mention.len();
        (self.other_mentions.len() == d && self.document.len() == d).then_some(d)
    }

    pub fn is_finite(&self) -> bool {
        self.mention
            .iter()
            .chain(&self.other_mentions)
            .chain(&self.document)
            .all(|x| x.is_finite())
    }
}

/// Context vectors for mention `target` of `spans`. Documents longer than
/// `char_budget` characters contribute only a `char_budget`-wide window
/// centred on the mention to the document vector.
pub fn build_context(
    provider: &dyn EmbeddingProvider,
    text: &str,
    spans: &[CharSpan],
    target: usize,
    char_budget: usize,
) -> ContextVectors {
    let dim = provider.dimension();
    let span = spans[target];
    let mention = provider.embed_span(text, span);

    let mut other_mentions = vec![0.0; dim];
    let others = spans.len() - 1;
    if others > 0 {
        for (i, s) in spans.iter().enumerate() {
            if i == target {
                continue;
            }
            for (acc, x) in other_mentions.iter_mut().zip(provider.embed_span(text, *s)) {
                *acc += x;
            }
        }
        other_mentions.iter_mut().for_each(|x| *x /= others as f64);
    }

    let bounds = char_boundaries(text);
    let n_chars = bounds.len() - 1;
    let document = if n_chars > char_budget {
        let mid = span.midpoint2() / 2;
        let start = mid.saturating_sub(char_budget / 2).min(n_chars - char_budget);
        let end = start + char_budget;
        provider.embed_document(&text[bounds[start]..bounds[end]])
    } else {
        provider.embed_document(text)
    };

    ContextVectors {
        mention,
        other_mentions,
        document,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::HashedBowProvider;

    #[test]
    fn single_mention_has_zero_other_vector() {
        let p = HashedBowProvider::new(32, 1).unwrap();
        let text = "Protests in Paris";
        let ctx = build_context(&p, text, &[CharSpan::new(12, 17)], 0, 10_000);
        assert!(ctx.other_mentions.iter().all(|x| *x == 0.0));
        assert_eq!(ctx.dimension(), Some(32));
        assert_eq!(ctx.document, p.embed_document(text));
    }

    #[test]
    fn other_mentions_are_averaged() {
        let p = HashedBowProvider::new(32, 1).unwrap();
        let text = "Austin, Texas and Dallas";
        let spans = [CharSpan::new(0, 6), CharSpan::new(8, 13), CharSpan::new(18, 24)];
        let ctx = build_context(&p, text, &spans, 0, 10_000);
        let a = p.embed_span(text, spans[1]);
        let b = p.embed_span(text, spans[2]);
        for i in 0..32 {
            assert!((ctx.other_mentions[i] - (a[i] + b[i]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn long_documents_are_windowed() {
        let p = HashedBowProvider::new(32, 1).unwrap();
        let text = format!("{} Kyiv {}", "alpha ".repeat(50), "omega ".repeat(50));
        let start = 301;
        let span = CharSpan::new(start, start + 4);
        let ctx = build_context(&p, &text, &[span], 0, 20);
        assert_ne!(ctx.document, p.embed_document(&text));
        let window = &text[start + 2 - 10..start + 2 + 10];
        assert_eq!(ctx.document, p.embed_document(window));
    }
}
