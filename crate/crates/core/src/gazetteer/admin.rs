use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{GazetteerEntry, GeonameId};

/// Administrative lookups over a loaded gazetteer.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AdminTables {
    admin1_index: HashMap<(String, String), GeonameId>,
    country_index: BTreeMap<String, Vec<GeonameId>>,
    country_entities: BTreeMap<String, GeonameId>,
}

impl AdminTables {
    /// ADM1 entry for `(country, admin1)`.
    pub fn admin1_of(&self, country: &str, admin1: &str) -> Option<GeonameId> {
        if country.is_empty() || admin1.is_empty() {
            return None;
        }
        self.admin1_index
            .get(&(country.to_string(), admin1.to_string()))
            .copied()
    }

    /// All entries of a country, in gazetteer order.
    pub fn country_members(&self, country: &str) -> &[GeonameId] {
        self.country_index.get(country).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The country-level political entity (`PCLI` etc.) for a country code.
    pub fn country_entity(&self, country: &str) -> Option<GeonameId> {
        self.country_entities.get(country).copied()
    }

    pub fn admin1_len(&self) -> usize {
        self.admin1_index.len()
    }

    pub fn admin1_ids(&self) -> impl Iterator<Item = GeonameId> + '_ {
        self.admin1_index.values().copied()
    }

    pub fn countries(&self) -> impl Iterator<Item = &str> {
        self.country_index.keys().map(String::as_str)
    }
}

/// Builds the ADM1 and country indexes. When two ADM1 entries claim the same
/// `(country, admin1)` key the more populous one wins (lower id on a tie) and a
/// warning is logged. Country entities follow the same rule.
pub fn build_admin_tables(entries: &[GazetteerEntry]) -> AdminTables {
    let mut tables = AdminTables::default();
    let mut admin1_best: HashMap<(String, String), &GazetteerEntry> = HashMap::new();
    let mut country_best: BTreeMap<String, &GazetteerEntry> = BTreeMap::new();

    for e in entries {
        if !e.country_code.is_empty() {
            tables
                .country_index
                .entry(e.country_code.clone())
                .or_default()
                .push(e.geoname_id);
        }
        if e.is_adm1() && !e.country_code.is_empty() && !e.admin1_code.is_empty() {
            let key = (e.country_code.clone(), e.admin1_code.clone());
            match admin1_best.get(&key) {
                Some(prev) => {
                    log::warn!(
                        "duplicate ADM1 entries for {}.{}: {} and {}",
                        key.0,
                        key.1,
                        prev.geoname_id,
                        e.geoname_id
                    );
                    if outranks(e, prev) {
                        admin1_best.insert(key, e);
                    }
                }
                None => {
                    admin1_best.insert(key, e);
                }
            }
        }
        if e.is_country() && !e.country_code.is_empty() {
            let replace = country_best
                .get(&e.country_code)
                .map_or(true, |prev| outranks(e, prev));
            if replace {
                country_best.insert(e.country_code.clone(), e);
            }
        }
    }

    tables.admin1_index = admin1_best
        .into_iter()
        .map(|(k, e)| (k, e.geoname_id))
        .collect();
    tables.country_entities = country_best
        .into_iter()
        .map(|(k, e)| (k, e.geoname_id))
        .collect();
    tables
}

fn outranks(a: &GazetteerEntry, b: &GazetteerEntry) -> bool {
    (a.population, std::cmp::Reverse(a.geoname_id)) > (b.population, std::cmp::Reverse(b.geoname_id))
}
