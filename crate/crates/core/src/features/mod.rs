//! Per-candidate features for the ranker.
//!
//! Three groups feed the model:
//! - query/gazetteer string comparisons (edit distances, exact flag, name and
//!   population counts),
//! - coherence with the other toponyms of the document (ADM1 containment in
//!   either direction, shared country),
//! - context vectors for the mention, the other mentions and the document,
//!   which the ranker compares against its learned country and feature-class
//!   embeddings.

mod context;
mod edit_distance;
mod embedding;

use serde::{Deserialize, Serialize};

use crate::gazetteer::{normalize_name, AdminTables, FeatureClass, GazetteerEntry};
use crate::index::CandidateSet;

pub use context::{build_context, ContextVectors};
pub use edit_distance::{bounded_edit_distance, edit_distance, normalized_edit_distance};
pub use embedding::{cosine, EmbeddingProvider, HashedBowProvider, MIN_PROVIDER_DIMENSION};

/// Number of entries in [`CandidateFeatures::numeric`].
pub const NUMERIC_FEATURES: usize = 9;

/// Feature row for one candidate of one toponym.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFeatures {
    pub min_edit_distance: f64,
    pub avg_edit_distance: f64,
    pub exact_match: bool,
    pub alt_name_count_log: f64,
    pub population_log: f64,
    pub is_adm1_of_other: bool,
    pub has_adm1_parent: bool,
    pub shared_country_fraction: f64,
    /// The document has toponyms besides this one, so the coherence
    /// features above are informative rather than zero by default.
    pub has_other_toponyms: bool,
    pub candidate_country: String,
    pub candidate_feature_class: FeatureClass,
}

impl CandidateFeatures {
    /// Fixed-order numeric view consumed by the dense layers.
    pub fn numeric(&self) -> [f64; NUMERIC_FEATURES] {
        [
            self.min_edit_distance,
            self.avg_edit_distance,
            f64::from(u8::from(self.exact_match)),
            self.alt_name_count_log,
            self.population_log,
            f64::from(u8::from(self.is_adm1_of_other)),
            f64::from(u8::from(self.has_adm1_parent)),
            self.shared_country_fraction,
            f64::from(u8::from(self.has_other_toponyms)),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.numeric().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringFeatures {
    pub min_edit_distance: f64,
    pub avg_edit_distance: f64,
    pub exact_match: bool,
}

/// Length-normalized edit distances between a normalized query and the
/// candidate's distinct normalized names (primary, ascii, alternatives).
pub fn string_features(query: &str, candidate: &GazetteerEntry) -> StringFeatures {
    let mut names: Vec<String> = Vec::new();
    for raw in candidate.all_names() {
        let n = normalize_name(raw);
        if !n.is_empty() && !names.contains(&n) {
            names.push(n);
        }
    }
    if names.is_empty() {
        return StringFeatures {
            min_edit_distance: 1.0,
            avg_edit_distance: 1.0,
            exact_match: false,
        };
    }
    let dists: Vec<f64> = names.iter().map(|n| normalized_edit_distance(query, n)).collect();
    StringFeatures {
        min_edit_distance: dists.iter().copied().fold(f64::INFINITY, f64::min),
        avg_edit_distance: dists.iter().sum::<f64>() / dists.len() as f64,
        exact_match: names.iter().any(|n| n == query),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceFeatures {
    pub is_adm1_of_other: bool,
    pub has_adm1_parent: bool,
    pub shared_country_fraction: f64,
}

/// Features from the candidate sets of the document's *other* toponyms.
///
/// `has_adm1_parent`: another toponym has, among its candidates, the ADM1
/// entry containing this candidate. `is_adm1_of_other`: this candidate is an
/// ADM1 entry and another toponym has a candidate inside it. An entry never
/// counts as its own parent or child. `shared_country_fraction`: share of other
/// toponyms with at least one candidate in this candidate's country.
pub fn coherence_features(
    candidate: &GazetteerEntry,
    others: &[&CandidateSet],
    admin: &AdminTables,
) -> CoherenceFeatures {
    if others.is_empty() {
        return CoherenceFeatures {
            is_adm1_of_other: false,
            has_adm1_parent: false,
            shared_country_fraction: 0.0,
        };
    }
    let own = candidate.geoname_id;
    let has_adm1_parent = admin
        .admin1_of(&candidate.country_code, &candidate.admin1_code)
        .filter(|parent| *parent != own)
        .is_some_and(|parent| others.iter().any(|set| set.contains(parent)));

    let is_adm1_of_other = candidate.is_adm1()
        && !candidate.country_code.is_empty()
        && !candidate.admin1_code.is_empty()
        && others.iter().any(|set| {
            set.candidates.iter().any(|c| {
                c.entry.geoname_id != own
                    && c.entry.country_code == candidate.country_code
                    && c.entry.admin1_code == candidate.admin1_code
            })
        });

    let sharing = if candidate.country_code.is_empty() {
        0
    } else {
        others
            .iter()
            .filter(|set| {
                set.candidates
                    .iter()
                    .any(|c| c.entry.country_code == candidate.country_code)
            })
            .count()
    };

    CoherenceFeatures {
        is_adm1_of_other,
        has_adm1_parent,
        shared_country_fraction: sharing as f64 / others.len() as f64,
    }
}

/// Full feature rows for every candidate of `set`.
pub fn assemble_features(set: &CandidateSet, others: &[&CandidateSet], admin: &AdminTables) -> Vec<CandidateFeatures> {
    set.candidates
        .iter()
        .map(|c| {
            let s = string_features(&set.normalized_query, &c.entry);
            let coh = coherence_features(&c.entry, others, admin);
            CandidateFeatures {
                min_edit_distance: s.min_edit_distance,
                avg_edit_distance: s.avg_edit_distance,
                exact_match: s.exact_match,
                alt_name_count_log: (c.entry.alternative_names.len() as f64 + 1.0).log10(),
                population_log: c.entry.population_log(),
                is_adm1_of_other: coh.is_adm1_of_other,
                has_adm1_parent: coh.has_adm1_parent,
                shared_country_fraction: coh.shared_country_fraction,
                has_other_toponyms: !others.is_empty(),
                candidate_country: c.entry.country_code.clone(),
                candidate_feature_class: c.entry.feature_class,
            }
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("embedding dimension must be at least {MIN_PROVIDER_DIMENSION}, got {0}")]
    InvalidDimension(usize),
}
