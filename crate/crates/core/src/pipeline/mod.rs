//! Document processing: spans → candidate retrieval → features → ranking.
//!
//! A document is handled in two phases. First every toponym is queried
//! against the index (and, for annotated corpora, impossible cases lose their
//! gold entry). Then each toponym's candidates are described using the raw
//! candidate sets of all *other* toponyms and scored by the model.

mod corpus;
mod event;
mod extract;

use serde::{Deserialize, Serialize};

use crate::features::{assemble_features, build_context, CandidateFeatures, ContextVectors, EmbeddingProvider};
use crate::gazetteer::{AdminTables, FeatureClass, GazetteerEntry, GeonameId};
use crate::index::{CandidateSet, GazetteerIndex, IndexError};
use crate::ranker::{RankerError, RankerModel, TrainingExample};
use crate::text::{char_boundaries, char_slice, CharSpan};

pub use corpus::{parse_corpus, read_corpus, write_corpus, write_corpus_file, Annotation, CorpusDocument};
pub use event::{locate_event, EventLocation, EventLocator, ProximityLocator};
pub use extract::{DictionaryExtractor, ToponymExtractor};

/// Default character budget for document context windows.
pub const DEFAULT_CHAR_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub toponym_spans: Vec<CharSpan>,
    pub event_trigger: Option<CharSpan>,
}

impl Document {
    /// Document whose toponyms are found by `extractor`.
    pub fn extracted(doc_id: impl Into<String>, text: impl Into<String>, extractor: &dyn ToponymExtractor) -> Self {
        let text = text.into();
        let toponym_spans = extractor.extract(&text);
        Document {
            doc_id: doc_id.into(),
            text,
            toponym_spans,
            event_trigger: None,
        }
    }

    /// Spans (and the trigger) must be non-empty, inside the text, and the
    /// toponym spans must not overlap.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let n = char_boundaries(&self.text).len() - 1;
        let bad = |span: CharSpan, reason: &str| PipelineError::InvalidSpan {
            doc_id: self.doc_id.clone(),
            start: span.start,
            end: span.end,
            reason: reason.to_string(),
        };
        for &span in self.toponym_spans.iter().chain(&self.event_trigger) {
            if span.is_empty() {
                return Err(bad(span, "end must be greater than start"));
            }
            if span.end > n {
                return Err(bad(span, "span extends past the end of the text"));
            }
        }
        let mut sorted = self.toponym_spans.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0].overlaps(&w[1])) {
            return Err(bad(w[1], "toponym spans overlap"));
        }
        Ok(())
    }

    pub fn surface(&self, span: CharSpan) -> &str {
        char_slice(&self.text, span)
    }
}

/// The entry a toponym was resolved to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedPlace {
    pub geoname_id: GeonameId,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub country_code: String,
    pub admin1_code: String,
    pub feature_class: FeatureClass,
}

impl From<&GazetteerEntry> for PredictedPlace {
    fn from(e: &GazetteerEntry) -> Self {
        PredictedPlace {
            geoname_id: e.geoname_id,
            name: e.name.clone(),
            latitude: e.latitude,
            longitude: e.longitude,
            country_code: e.country_code.clone(),
            admin1_code: e.admin1_code.clone(),
            feature_class: e.feature_class,
        }
    }
}

/// Gold annotation attached to a record for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub geoname_id: Option<GeonameId>,
    pub latitude: f64,
    pub longitude: f64,
    pub country_code: String,
    pub admin1_code: String,
    pub feature_class: Option<FeatureClass>,
    /// The gold entry was deliberately removed from the candidates.
    pub impossible: bool,
    /// The gold entry is among the (post-removal) candidates.
    pub retrieved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRecord {
    pub span: CharSpan,
    pub query_text: String,
    /// `None` when the model abstained.
    pub predicted: Option<PredictedPlace>,
    /// Probability of the chosen slot.
    pub score: f64,
    pub candidate_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<GoldLabel>,
}

impl ResolutionRecord {
    pub fn is_abstention(&self) -> bool {
        self.predicted.is_none()
    }
}

/// One toponym after retrieval and feature assembly.
#[derive(Debug, Clone)]
pub struct PreparedMention {
    pub span: CharSpan,
    pub candidates: CandidateSet,
    pub features: Vec<CandidateFeatures>,
    pub context: ContextVectors,
}

/// Read-only resources for resolving documents.
pub struct Resolver<'a> {
    pub index: &'a GazetteerIndex,
    pub admin: &'a AdminTables,
    pub provider: &'a dyn EmbeddingProvider,
    pub k: usize,
    pub char_budget: usize,
}

impl<'a> Resolver<'a> {
    pub fn new(index: &'a GazetteerIndex, admin: &'a AdminTables, provider: &'a dyn EmbeddingProvider, k: usize) -> Self {
        Resolver {
            index,
            admin,
            provider,
            k,
            char_budget: DEFAULT_CHAR_BUDGET,
        }
    }

    /// Retrieval and features for every span. `exclude[i]`, when given,
    /// removes that entry from span `i`'s candidates before any features are
    /// computed.
    pub fn prepare(&self, doc: &Document, exclude: &[Option<GeonameId>]) -> Result<Vec<PreparedMention>, PipelineError> {
        doc.validate()?;
        let mut sets = Vec::with_capacity(doc.toponym_spans.len());
        for (i, &span) in doc.toponym_spans.iter().enumerate() {
            let mut set = self.index.query(doc.surface(span), self.k)?;
            if let Some(Some(id)) = exclude.get(i) {
                set.remove(*id);
            }
            sets.push(set);
        }
        let mut prepared = Vec::with_capacity(sets.len());
        for (i, set) in sets.iter().enumerate() {
            let others: Vec<&CandidateSet> = sets
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, s)| s)
                .collect();
            prepared.push(PreparedMention {
                span: doc.toponym_spans[i],
                features: assemble_features(set, &others, self.admin),
                context: build_context(self.provider, &doc.text, &doc.toponym_spans, i, self.char_budget),
                candidates: set.clone(),
            });
        }
        Ok(prepared)
    }

    fn check_model(&self, model: &RankerModel) -> Result<(), PipelineError> {
        if model.context_dim() != self.provider.dimension() {
            return Err(PipelineError::Config(format!(
                "model expects {}-dimensional context vectors, provider produces {}",
                model.context_dim(),
                self.provider.dimension()
            )));
        }
        Ok(())
    }

    /// One record per toponym span, without gold labels.
    pub fn resolve_document(&self, doc: &Document, model: &RankerModel) -> Result<Vec<ResolutionRecord>, PipelineError> {
        self.check_model(model)?;
        let prepared = self.prepare(doc, &[])?;
        prepared
            .iter()
            .map(|m| score_mention(doc, m, model))
            .collect()
    }

    /// Resolves an annotated document: impossible cases lose their gold entry
    /// before retrieval results are used, and each record carries its gold
    /// label. Gold labels are attached only after scoring.
    pub fn resolve_annotated(&self, cd: &CorpusDocument, ranker: Ranker<'_>) -> Result<Vec<ResolutionRecord>, PipelineError> {
        if let Ranker::Model(model) = ranker {
            self.check_model(model)?;
        }
        let doc = cd.document()?;
        let prepared = self.prepare(&doc, &exclusions(cd))?;
        prepared
            .iter()
            .zip(&cd.annotations)
            .map(|(m, a)| {
                let mut record = match ranker {
                    Ranker::Model(model) => score_mention(&doc, m, model)?,
                    Ranker::PopulationBaseline => population_baseline(&doc, m),
                };
                record.gold = Some(GoldLabel {
                    geoname_id: a.gold_geoname_id,
                    latitude: a.gold_lat,
                    longitude: a.gold_lon,
                    country_code: a.gold_country.clone(),
                    admin1_code: a.gold_admin1.clone(),
                    feature_class: a.gold_feature_class,
                    impossible: a.is_impossible(),
                    retrieved: a.gold_geoname_id.is_some_and(|id| m.candidates.contains(id)),
                });
                Ok(record)
            })
            .collect()
    }

    /// Training examples for every annotation with a gold id. The gold slot
    /// is the gold entry's candidate position, or the null slot when it was
    /// not retrieved or was removed as an impossible case.
    pub fn training_examples(&self, cd: &CorpusDocument) -> Result<Vec<TrainingExample>, PipelineError> {
        let doc = cd.document()?;
        let prepared = self.prepare(&doc, &exclusions(cd))?;
        Ok(prepared
            .into_iter()
            .zip(&cd.annotations)
            .filter_map(|(m, a)| {
                let gold_id = a.gold_geoname_id?;
                let gold = m.candidates.position(gold_id).unwrap_or(m.features.len());
                Some(TrainingExample {
                    features: m.features,
                    context: m.context,
                    gold,
                    gold_country: (!a.gold_country.is_empty()).then(|| a.gold_country.clone()),
                })
            })
            .collect())
    }
}

/// How records are chosen from the candidates.
#[derive(Clone, Copy)]
pub enum Ranker<'a> {
    Model(&'a RankerModel),
    /// Most populous candidate (earliest retrieved on ties); never abstains.
    PopulationBaseline,
}

fn exclusions(cd: &CorpusDocument) -> Vec<Option<GeonameId>> {
    cd.annotations
        .iter()
        .map(|a| if a.exclude_gold { a.gold_geoname_id } else { None })
        .collect()
}

fn score_mention(doc: &Document, m: &PreparedMention, model: &RankerModel) -> Result<ResolutionRecord, PipelineError> {
    let scored = model.score_candidates(&m.features, &m.context)?;
    Ok(ResolutionRecord {
        span: m.span,
        query_text: doc.surface(m.span).to_string(),
        predicted: scored
            .predicted_candidate()
            .map(|i| PredictedPlace::from(&m.candidates.candidates[i].entry)),
        score: scored.predicted_probability(),
        candidate_count: m.candidates.len(),
        gold: None,
    })
}

fn population_baseline(doc: &Document, m: &PreparedMention) -> ResolutionRecord {
    let mut best: Option<&GazetteerEntry> = None;
    for c in &m.candidates.candidates {
        if best.map_or(true, |b| c.entry.population > b.population) {
            best = Some(&c.entry);
        }
    }
    ResolutionRecord {
        span: m.span,
        query_text: doc.surface(m.span).to_string(),
        predicted: best.map(PredictedPlace::from),
        score: 1.0,
        candidate_count: m.candidates.len(),
        gold: None,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("document {doc_id}: invalid span [{start}, {end}): {reason}")]
    InvalidSpan {
        doc_id: String,
        start: usize,
        end: usize,
        reason: String,
    },
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Ranker(#[from] RankerError),
    #[error("corpus I/O failed: {0}")]
    Io(#[from] std::io::Error),
}
