//! Rule-based synthetic corpora built from hierarchical place relations
//! ("{PLACE}, {PARENT}", "{PLACE}, the capital of {COUNTRY}", ...), plus
//! impossible-case augmentation.

mod world;

use std::collections::HashMap;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gazetteer::{AdminTables, FeatureClass, GazetteerEntry, GeonameId};
use crate::pipeline::{Annotation, CorpusDocument};
use crate::ranker::TrainRng;

pub use world::{fixture_world, WorldConfig};

pub const DEFAULT_IMPOSSIBLE_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// A populated place and the ADM1 containing it.
    CityInState,
    /// A `PPLC` place and its country.
    CapitalOfCountry,
    /// A populated place and its country.
    CityInCountry,
    /// A place on its own.
    Standalone,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::CityInState,
        Relation::CapitalOfCountry,
        Relation::CityInCountry,
        Relation::Standalone,
    ];

    pub fn required_slots(self) -> &'static [Slot] {
        match self {
            Relation::CityInState => &[Slot::Place, Slot::Parent],
            Relation::CapitalOfCountry | Relation::CityInCountry => &[Slot::Place, Slot::Country],
            Relation::Standalone => &[Slot::Place],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Place,
    Parent,
    Country,
}

impl Slot {
    fn token(self) -> &'static str {
        match self {
            Slot::Place => "{PLACE}",
            Slot::Parent => "{PARENT}",
            Slot::Country => "{COUNTRY}",
        }
    }
}

enum Piece {
    Text(String),
    Slot(Slot),
}

/// A sentence pattern. Each slot the relation needs appears exactly once and
/// no other slot appears.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pattern: String,
    relation: Relation,
}

impl Template {
    pub fn new(pattern: impl Into<String>, relation: Relation) -> Result<Self, SynthError> {
        let t = Template {
            pattern: pattern.into(),
            relation,
        };
        let pieces = t.pieces()?;
        let slots: Vec<Slot> = pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(*s),
                Piece::Text(_) => None,
            })
            .collect();
        let required = relation.required_slots();
        let ok = slots.len() == required.len() && required.iter().all(|r| slots.contains(r));
        if !ok {
            return Err(SynthError::InvalidTemplate {
                pattern: t.pattern,
                reason: format!("relation {relation:?} needs each of {required:?} exactly once"),
            });
        }
        Ok(t)
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn relation(&self) -> Relation {
        self.relation
    }

    fn pieces(&self) -> Result<Vec<Piece>, SynthError> {
        let mut pieces = Vec::new();
        let mut rest = self.pattern.as_str();
        while let Some(open) = rest.find('{') {
            if open > 0 {
                pieces.push(Piece::Text(rest[..open].to_string()));
            }
            let close = rest[open..].find('}').map(|c| open + c + 1);
            let slot = close.and_then(|c| [Slot::Place, Slot::Parent, Slot::Country].into_iter().find(|s| s.token() == &rest[open..c]));
            let (Some(close), Some(slot)) = (close, slot) else {
                return Err(SynthError::InvalidTemplate {
                    pattern: self.pattern.clone(),
                    reason: format!("unknown slot at byte {}", self.pattern.len() - rest.len() + open),
                });
            };
            pieces.push(Piece::Slot(slot));
            rest = &rest[close..];
        }
        if !rest.is_empty() {
            pieces.push(Piece::Text(rest.to_string()));
        }
        Ok(pieces)
    }
}

/// The built-in template library.
pub fn default_templates() -> Vec<Template> {
    use Relation::*;
    [
        ("Protests erupted in {PLACE}, {PARENT}.", CityInState),
        ("Officials in {PLACE}, {PARENT} confirmed the closure on Tuesday.", CityInState),
        ("Flooding forced hundreds from their homes near {PLACE} in {PARENT}.", CityInState),
        ("The mayor of {PLACE}, {PARENT}, announced new curfews.", CityInState),
        ("Thousands marched through {PLACE}, the capital of {COUNTRY}.", CapitalOfCountry),
        ("Delegates met in {PLACE}, {COUNTRY}'s capital, for talks.", CapitalOfCountry),
        ("{COUNTRY} said its government in {PLACE} would respond.", CapitalOfCountry),
        ("A strike shut down the port of {PLACE}, {COUNTRY}.", CityInCountry),
        ("Police clashed with demonstrators in {PLACE} ({COUNTRY}) overnight.", CityInCountry),
        ("Aid convoys reached {PLACE} in northern {COUNTRY}.", CityInCountry),
        ("Residents of {PLACE} reported a power outage.", Standalone),
        ("An explosion was heard across {PLACE} early on Sunday.", Standalone),
    ]
    .into_iter()
    .map(|(p, r)| Template::new(p, r).expect("built-in template is valid"))
    .collect()
}

/// Entries eligible for each relation, with their sampling weights.
struct Pools<'a> {
    by_relation: HashMap<Relation, (Vec<&'a GazetteerEntry>, Option<WeightedIndex<f64>>)>,
    by_id: HashMap<GeonameId, &'a GazetteerEntry>,
}

/// Sampling weight `1 + log10(population + 1)`.
fn weight(e: &GazetteerEntry) -> f64 {
    1.0 + e.population_log()
}

impl<'a> Pools<'a> {
    fn new(gazetteer: &'a [GazetteerEntry], admin: &AdminTables) -> Self {
        let by_id: HashMap<GeonameId, &GazetteerEntry> = gazetteer.iter().map(|e| (e.geoname_id, e)).collect();
        let has_country = |e: &GazetteerEntry| {
            admin
                .country_entity(&e.country_code)
                .is_some_and(|c| c != e.geoname_id && by_id.contains_key(&c))
        };
        let has_parent = |e: &GazetteerEntry| {
            admin
                .admin1_of(&e.country_code, &e.admin1_code)
                .is_some_and(|p| p != e.geoname_id && by_id.contains_key(&p))
        };
        let populated = |e: &GazetteerEntry| e.feature_class == FeatureClass::Populated;
        let mut by_relation = HashMap::new();
        for relation in Relation::ALL {
            let pool: Vec<&GazetteerEntry> = gazetteer
                .iter()
                .filter(|e| match relation {
                    Relation::CityInState => populated(e) && has_parent(e),
                    Relation::CapitalOfCountry => e.feature_code == "PPLC" && has_country(e),
                    Relation::CityInCountry => populated(e) && has_country(e),
                    Relation::Standalone => matches!(e.feature_class, FeatureClass::Populated | FeatureClass::Admin),
                })
                .collect();
            let dist = WeightedIndex::new(pool.iter().map(|e| weight(e))).ok();
            by_relation.insert(relation, (pool, dist));
        }
        Pools { by_relation, by_id }
    }

    fn satisfiable(&self, relation: Relation) -> bool {
        self.by_relation[&relation].1.is_some()
    }

    fn sample(&self, relation: Relation, rng: &mut TrainRng) -> &'a GazetteerEntry {
        let (pool, dist) = &self.by_relation[&relation];
        pool[dist.as_ref().expect("relation is satisfiable").sample(rng)]
    }
}

/// Surface form for an entry: usually its primary name, sometimes another
/// of its names.
fn surface(e: &GazetteerEntry, rng: &mut TrainRng) -> String {
    if e.alternative_names.is_empty() || rng.gen_bool(0.8) {
        e.name.clone()
    } else {
        e.alternative_names.choose(rng).expect("non-empty").clone()
    }
}

fn annotation(e: &GazetteerEntry, start: usize, surface: &str) -> Annotation {
    Annotation {
        start,
        end: start + surface.chars().count(),
        surface: surface.to_string(),
        gold_geoname_id: Some(e.geoname_id),
        gold_lat: e.latitude,
        gold_lon: e.longitude,
        gold_country: e.country_code.clone(),
        gold_admin1: e.admin1_code.clone(),
        gold_feature_class: Some(e.feature_class),
        exclude_gold: false,
    }
}

/// `n` single-sentence documents. Each picks a template uniformly among those
/// whose relation has eligible entries, samples the place with weight
/// `1 + log10(population + 1)`, and fills the other slots from the place's
/// ADM1 or country entry. Every filled slot is a gold annotation.
pub fn generate_corpus(
    gazetteer: &[GazetteerEntry],
    admin: &AdminTables,
    n: usize,
    seed: u64,
    templates: &[Template],
) -> Result<Vec<CorpusDocument>, SynthError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let pools = Pools::new(gazetteer, admin);
    let usable: Vec<&Template> = templates.iter().filter(|t| pools.satisfiable(t.relation)).collect();
    if usable.is_empty() {
        let relations: Vec<Relation> = templates.iter().map(|t| t.relation).collect();
        return Err(SynthError::Unsatisfiable(relations));
    }

    let mut rng = TrainRng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(n);
    for i in 0..n {
        let template = usable[rng.gen_range(0..usable.len())];
        let place = pools.sample(template.relation, &mut rng);
        let parent = admin
            .admin1_of(&place.country_code, &place.admin1_code)
            .and_then(|id| pools.by_id.get(&id).copied());
        let country = admin
            .country_entity(&place.country_code)
            .and_then(|id| pools.by_id.get(&id).copied());

        let mut text = String::new();
        let mut chars = 0;
        let mut annotations = Vec::new();
        for piece in template.pieces()? {
            let s = match piece {
                Piece::Text(s) => s,
                Piece::Slot(slot) => {
                    let entry = match slot {
                        Slot::Place => place,
                        Slot::Parent => parent.expect("pool guarantees an ADM1 parent"),
                        Slot::Country => country.expect("pool guarantees a country entity"),
                    };
                    let name = surface(entry, &mut rng);
                    annotations.push(annotation(entry, chars, &name));
                    name
                }
            };
            chars += s.chars().count();
            text.push_str(&s);
        }
        annotations.sort_by_key(|a| a.start);
        docs.push(CorpusDocument {
            doc_id: format!("synth-{i:06}"),
            text,
            annotations,
            event_trigger: None,
        });
    }
    Ok(docs)
}

/// Flags a seeded random `fraction` of gold-id annotations as impossible
/// cases (one Bernoulli draw per such annotation, in corpus order). Text,
/// offsets and existing flags are left alone.
pub fn augment_impossible(
    mut corpus: Vec<CorpusDocument>,
    fraction: f64,
    seed: u64,
) -> Result<Vec<CorpusDocument>, SynthError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(SynthError::InvalidFraction(fraction));
    }
    let mut rng = TrainRng::seed_from_u64(seed);
    for a in corpus.iter_mut().flat_map(|d| d.annotations.iter_mut()) {
        if a.gold_geoname_id.is_some() && rng.gen_bool(fraction) {
            a.exclude_gold = true;
        }
    }
    Ok(corpus)
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid template {pattern:?}: {reason}")]
    InvalidTemplate { pattern: String, reason: String },
    #[error("no template can be filled from this gazetteer (relations tried: {0:?})")]
    Unsatisfiable(Vec<Relation>),
    #[error("impossible fraction must be in [0, 1], got {0}")]
    InvalidFraction(f64),
}
