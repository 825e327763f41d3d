//! In-process fuzzy candidate retrieval over gazetteer names.
//!
//! Every entry contributes its primary, ascii and alternative names, each in a
//! normalized and a diacritic-folded form. Lookup is two-phase: an exact hash
//! lookup on the normalized query, then trigram blocking (names sharing at
//! least `fuzzy_min_shared_ngrams` distinct n-grams with the query) verified
//! by a bounded edit distance.
//!
//! Candidates are ordered by `(exact match, -min edit distance,
//! log10(population + 1))` descending, ties broken by ascending geoname id.

mod storage;

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::features::bounded_edit_distance;
use crate::gazetteer::{fold_diacritics, name_variants, normalize_name, GazetteerEntry, GeonameId};

pub use storage::{load_index, save_index, INDEX_FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub ngram_size: usize,
    /// Default `k` for queries.
    pub max_candidates: usize,
    pub max_edit_distance: usize,
    pub fuzzy_min_shared_ngrams: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            ngram_size: 3,
            max_candidates: 50,
            max_edit_distance: 2,
            fuzzy_min_shared_ngrams: 2,
        }
    }
}

impl IndexConfig {
    pub fn validate(&self) -> Result<(), IndexError> {
        if self.ngram_size < 2 {
            return Err(IndexError::InvalidConfig("ngram_size must be at least 2".into()));
        }
        if self.max_candidates < 1 {
            return Err(IndexError::InvalidConfig("max_candidates must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sort key of a retrieved candidate. Larger is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalScore {
    pub exact: bool,
    pub edit_distance: u32,
    pub population_log: f64,
}

impl RetrievalScore {
    /// Scalar form for display: exact hits score 1e6, each edit costs 1e3,
    /// population adds its log10. Ordering agrees with [`Ord`] while the edit
    /// distance stays below 1000.
    pub fn value(&self) -> f64 {
        f64::from(u8::from(self.exact)) * 1e6 - f64::from(self.edit_distance) * 1e3 + self.population_log
    }
}

impl Eq for RetrievalScore {}

impl PartialOrd for RetrievalScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RetrievalScore {
    fn cmp(&self, other: &Self) -> Ordering {
        self.exact
            .cmp(&other.exact)
            .then_with(|| other.edit_distance.cmp(&self.edit_distance))
            .then_with(|| self.population_log.total_cmp(&other.population_log))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub entry: GazetteerEntry,
    pub score: RetrievalScore,
}

/// Candidates retrieved for one toponym.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CandidateSet {
    pub query_text: String,
    pub normalized_query: String,
    pub candidates: Vec<Candidate>,
    pub gold_id: Option<GeonameId>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = GeonameId> + '_ {
        self.candidates.iter().map(|c| c.entry.geoname_id)
    }

    pub fn position(&self, id: GeonameId) -> Option<usize> {
        self.candidates.iter().position(|c| c.entry.geoname_id == id)
    }

    pub fn contains(&self, id: GeonameId) -> bool {
        self.position(id).is_some()
    }

    /// Drops `id` from the candidates; returns whether it was present.
    pub fn remove(&mut self, id: GeonameId) -> bool {
        match self.position(id) {
            Some(i) => {
                self.candidates.remove(i);
                true
            }
            None => false,
        }
    }
}

/// Immutable name index over a gazetteer; safe to share across threads.
#[derive(Debug, Clone)]
pub struct GazetteerIndex {
    config: IndexConfig,
    entries: Vec<GazetteerEntry>,
    positions: HashMap<GeonameId, u32>,
    /// Distinct indexed name strings; a name's id is its position here.
    names: Vec<String>,
    name_lookup: HashMap<String, u32>,
    /// Entry positions carrying each name, ascending.
    name_entries: Vec<Vec<u32>>,
    /// n-gram -> ascending name ids.
    postings: HashMap<String, Vec<u32>>,
}

/// Distinct character n-grams of `s` in first-occurrence order. Strings
/// shorter than `n` have none.
pub fn char_ngrams(s: &str, n: usize) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out: Vec<String> = Vec::new();
    if chars.len() < n {
        return out;
    }
    for w in chars.windows(n) {
        let g: String = w.iter().collect();
        if !out.contains(&g) {
            out.push(g);
        }
    }
    out
}

/// Query forms: the normalized string and, when different, its folded form.
fn query_forms(normalized: &str) -> Vec<String> {
    let folded = fold_diacritics(normalized);
    if folded != normalized && !folded.is_empty() {
        vec![normalized.to_string(), folded]
    } else {
        vec![normalized.to_string()]
    }
}

pub fn build_index(entries: Vec<GazetteerEntry>, config: IndexConfig) -> Result<GazetteerIndex, IndexError> {
    config.validate()?;
    if entries.is_empty() {
        return Err(IndexError::Empty);
    }
    let mut index = GazetteerIndex {
        config,
        entries: Vec::new(),
        positions: HashMap::with_capacity(entries.len()),
        names: Vec::new(),
        name_lookup: HashMap::new(),
        name_entries: Vec::new(),
        postings: HashMap::new(),
    };
    for entry in entries {
        let pos = u32::try_from(index.entries.len()).map_err(|_| IndexError::TooLarge)?;
        if index.positions.insert(entry.geoname_id, pos).is_some() {
            return Err(IndexError::DuplicateId(entry.geoname_id));
        }
        for variant in name_variants(entry.all_names()) {
            let nid = index.intern_name(variant)?;
            let list = &mut index.name_entries[nid as usize];
            if list.last() != Some(&pos) {
                list.push(pos);
            }
        }
        index.entries.push(entry);
    }
    Ok(index)
}

impl GazetteerIndex {
    fn intern_name(&mut self, name: String) -> Result<u32, IndexError> {
        if let Some(&nid) = self.name_lookup.get(&name) {
            return Ok(nid);
        }
        let nid = u32::try_from(self.names.len()).map_err(|_| IndexError::TooLarge)?;
        for gram in char_ngrams(&name, self.config.ngram_size) {
            self.postings.entry(gram).or_default().push(nid);
        }
        self.name_lookup.insert(name.clone(), nid);
        self.names.push(name);
        self.name_entries.push(Vec::new());
        Ok(nid)
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct indexed name strings.
    pub fn name_count(&self) -> usize {
        self.names.len()
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn entry(&self, id: GeonameId) -> Option<&GazetteerEntry> {
        self.positions.get(&id).map(|&p| &self.entries[p as usize])
    }

    /// Ids stored under an exact (already normalized) key.
    pub fn exact_ids(&self, normalized: &str) -> Vec<GeonameId> {
        self.name_lookup
            .get(normalized)
            .map(|&nid| self.ids_of_name(nid).collect())
            .unwrap_or_default()
    }

    /// Ids reachable through one n-gram's postings.
    pub fn ngram_ids(&self, gram: &str) -> Vec<GeonameId> {
        let mut ids: Vec<GeonameId> = self
            .postings
            .get(gram)
            .into_iter()
            .flatten()
            .flat_map(|&nid| self.ids_of_name(nid))
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    fn ids_of_name(&self, nid: u32) -> impl Iterator<Item = GeonameId> + '_ {
        self.name_entries[nid as usize]
            .iter()
            .map(|&p| self.entries[p as usize].geoname_id)
    }

    /// True when the raw string (after normalization, or its folded form) is
    /// an indexed name.
    pub fn contains_name(&self, raw: &str) -> bool {
        let norm = normalize_name(raw);
        !norm.is_empty()
            && query_forms(&norm)
                .iter()
                .any(|f| self.name_lookup.contains_key(f))
    }

    /// Retrieves up to `k` candidates for a toponym.
    pub fn query(&self, name: &str, k: usize) -> Result<CandidateSet, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        let normalized = normalize_name(name);
        let mut set = CandidateSet {
            query_text: name.to_string(),
            normalized_query: normalized.clone(),
            candidates: Vec::new(),
            gold_id: None,
        };
        if normalized.is_empty() {
            return Ok(set);
        }

        // entry position -> (exact, min edit distance)
        let mut hits: HashMap<u32, (bool, u32)> = HashMap::new();
        let forms = query_forms(&normalized);
        for form in &forms {
            if let Some(&nid) = self.name_lookup.get(form) {
                for &pos in &self.name_entries[nid as usize] {
                    hits.insert(pos, (true, 0));
                }
            }
        }

        let min_shared = self.config.fuzzy_min_shared_ngrams;
        let max_ed = self.config.max_edit_distance;
        let mut shared: HashMap<u32, usize> = HashMap::new();
        for form in &forms {
            shared.clear();
            for gram in char_ngrams(form, self.config.ngram_size) {
                for &nid in self.postings.get(&gram).into_iter().flatten() {
                    *shared.entry(nid).or_default() += 1;
                }
            }
            for (&nid, &count) in &shared {
                if count < min_shared {
                    continue;
                }
                let Some(d) = bounded_edit_distance(form, &self.names[nid as usize], max_ed) else {
                    continue;
                };
                let d = d as u32;
                for &pos in &self.name_entries[nid as usize] {
                    hits.entry(pos)
                        .and_modify(|(exact, best)| {
                            if !*exact {
                                *best = (*best).min(d);
                            }
                        })
                        .or_insert((false, d));
                }
            }
        }

        let mut candidates: Vec<Candidate> = hits
            .into_iter()
            .map(|(pos, (exact, edit_distance))| {
                let entry = &self.entries[pos as usize];
                Candidate {
                    score: RetrievalScore {
                        exact,
                        edit_distance,
                        population_log: entry.population_log(),
                    },
                    entry: entry.clone(),
                }
            })
            .collect();
        candidates.sort_by(|a, b| {
            b.score
                .cmp(&a.score)
                .then_with(|| a.entry.geoname_id.cmp(&b.entry.geoname_id))
        });
        candidates.truncate(k);
        set.candidates = candidates;
        Ok(set)
    }

    /// Query with the configured default `k`.
    pub fn query_default(&self, name: &str) -> Result<CandidateSet, IndexError> {
        self.query(name, self.config.max_candidates)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("cannot build an index from an empty gazetteer")]
    Empty,
    #[error("invalid index configuration: {0}")]
    InvalidConfig(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("duplicate geoname id {0}")]
    DuplicateId(GeonameId),
    #[error("gazetteer too large for a single index")]
    TooLarge,
    #[error("index file I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("index file has format version {found}, this build reads version {expected}")]
    Incompatible { found: u32, expected: u32 },
    #[error("index file is corrupt: {0}")]
    Corrupt(String),
}
