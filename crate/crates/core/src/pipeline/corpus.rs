//! Annotated corpus: one JSON document per line.
//!
//! ```json
//! {"doc_id": "d1", "text": "Protests in Austin, Texas.",
//!  "annotations": [{"start": 12, "end": 18, "surface": "Austin", "gold_geoname_id": 4671654,
//!                   "gold_lat": 30.27, "gold_lon": -97.74, "gold_country": "US",
//!                   "gold_admin1": "TX", "gold_feature_class": "P"}],
//!  "event_trigger": {"start": 0, "end": 8}}
//! ```
//!
//! `exclude_gold: true` on an annotation marks an impossible case: loaders
//! delete the gold entry from the retrieved candidates.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Document, PipelineError};
use crate::gazetteer::{FeatureClass, GeonameId};
use crate::text::CharSpan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_geoname_id: Option<GeonameId>,
    pub gold_lat: f64,
    pub gold_lon: f64,
    #[serde(default)]
    pub gold_country: String,
    #[serde(default)]
    pub gold_admin1: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_feature_class: Option<FeatureClass>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exclude_gold: bool,
}

impl Annotation {
    pub fn span(&self) -> CharSpan {
        CharSpan::new(self.start, self.end)
    }

    /// The gold entry was removed from the candidates on purpose.
    pub fn is_impossible(&self) -> bool {
        self.exclude_gold && self.gold_geoname_id.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_trigger: Option<CharSpan>,
}

impl CorpusDocument {
    /// The document with the annotated spans as its toponyms; validated.
    pub fn document(&self) -> Result<Document, PipelineError> {
        let doc = Document {
            doc_id: self.doc_id.clone(),
            text: self.text.clone(),
            toponym_spans: self.annotations.iter().map(Annotation::span).collect(),
            event_trigger: self.event_trigger,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn annotation_count(&self) -> usize {
        self.annotations.len()
    }
}

pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<CorpusDocument>, PipelineError> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: CorpusDocument = serde_json::from_str(&line).map_err(|e| PipelineError::Corpus {
            line: i + 1,
            message: e.to_string(),
        })?;
        doc.document().map_err(|e| PipelineError::Corpus {
            line: i + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusDocument>, PipelineError> {
    let file = File::open(path)?;
    parse_corpus(BufReader::new(file))
}

pub fn write_corpus<W: Write>(docs: &[CorpusDocument], out: W) -> Result<(), PipelineError> {
    let mut out = BufWriter::new(out);
    for doc in docs {
        serde_json::to_writer(&mut out, doc).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_corpus_file(docs: &[CorpusDocument], path: &Path) -> Result<(), PipelineError> {
    write_corpus(docs, File::create(path)?)
}
