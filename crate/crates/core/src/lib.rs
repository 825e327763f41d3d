//! Toponym resolution engine.
//!
//! Place names found in text are looked up in a Geonames gazetteer through an
//! in-process fuzzy index, each candidate is described by string, coherence
//! and context features, and a small neural ranker picks the best candidate
//! or abstains through a null slot. The [`evaluation`] module scores the
//! output with the usual geoparsing metrics (exact match, distance error,
//! accuracy within 161 km, country/ADM1/type accuracy, retrieval recall and
//! abstention quality).

pub mod evaluation;
pub mod features;
pub mod gazetteer;
pub mod index;
pub mod pipeline;
pub mod ranker;
pub mod synthgen;
pub mod text;
