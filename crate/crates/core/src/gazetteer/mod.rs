//! Geonames gazetteer ingestion.
//!
//! Reads the 19-column Geonames dump layout (the full `allCountries.txt` or any
//! subset of it), normalizes place names, and builds the administrative lookup
//! tables used by the coherence features and the ADM1 accuracy metric.

mod admin;
mod normalize;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use admin::{build_admin_tables, AdminTables};
pub use normalize::{fold_diacritics, name_variants, normalize_name};
pub use parse::{parse_gazetteer, read_gazetteer_file, write_gazetteer, ParsedGazetteer};

/// Unique Geonames identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeonameId(pub u64);

impl fmt::Display for GeonameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Coarse Geonames feature class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "char", try_from = "char")]
pub enum FeatureClass {
    /// Country, state, region.
    Admin,
    /// Stream, lake.
    Hydro,
    /// Parks, areas.
    Area,
    /// City, village.
    Populated,
    /// Road, railroad.
    Road,
    /// Spot, building, farm.
    Spot,
    /// Mountain, hill, rock.
    Terrain,
    /// Undersea.
    Undersea,
    /// Forest, heath.
    Vegetation,
}

impl FeatureClass {
    pub const ALL: [FeatureClass; 9] = [
        FeatureClass::Admin,
        FeatureClass::Hydro,
        FeatureClass::Area,
        FeatureClass::Populated,
        FeatureClass::Road,
        FeatureClass::Spot,
        FeatureClass::Terrain,
        FeatureClass::Undersea,
        FeatureClass::Vegetation,
    ];

    pub fn from_char(c: char) -> Option<Self> {
        Some(match c {
            'A' => FeatureClass::Admin,
            'H' => FeatureClass::Hydro,
            'L' => FeatureClass::Area,
            'P' => FeatureClass::Populated,
            'R' => FeatureClass::Road,
            'S' => FeatureClass::Spot,
            'T' => FeatureClass::Terrain,
            'U' => FeatureClass::Undersea,
            'V' => FeatureClass::Vegetation,
            _ => return None,
        })
    }

    pub fn as_char(self) -> char {
        match self {
            FeatureClass::Admin => 'A',
            FeatureClass::Hydro => 'H',
            FeatureClass::Area => 'L',
            FeatureClass::Populated => 'P',
            FeatureClass::Road => 'R',
            FeatureClass::Spot => 'S',
            FeatureClass::Terrain => 'T',
            FeatureClass::Undersea => 'U',
            FeatureClass::Vegetation => 'V',
        }
    }

    /// Position in [`FeatureClass::ALL`].
    pub fn ordinal(self) -> usize {
        FeatureClass::ALL.iter().position(|c| *c == self).unwrap()
    }

    /// Parses a comma-separated list such as `"A,P"`.
    pub fn parse_list(s: &str) -> Result<Vec<FeatureClass>, GazetteerError> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                let mut chars = t.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => FeatureClass::from_char(c),
                    _ => None,
                }
                .ok_or_else(|| GazetteerError::UnknownFeatureClass(t.to_string()))
            })
            .collect()
    }
}

impl From<FeatureClass> for char {
    fn from(c: FeatureClass) -> char {
        c.as_char()
    }
}

impl TryFrom<char> for FeatureClass {
    type Error = GazetteerError;

    fn try_from(c: char) -> Result<Self, Self::Error> {
        FeatureClass::from_char(c).ok_or_else(|| GazetteerError::UnknownFeatureClass(c.to_string()))
    }
}

impl fmt::Display for FeatureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// One row of the gazetteer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub geoname_id: GeonameId,
    pub name: String,
    pub ascii_name: String,
    pub alternative_names: Vec<String>,
    pub latitude: f64,
    pub longitude: f64,
    pub feature_class: FeatureClass,
    pub feature_code: String,
    pub country_code: String,
    pub admin1_code: String,
    pub admin2_code: String,
    pub population: u64,
}

impl GazetteerEntry {
    pub fn is_adm1(&self) -> bool {
        self.feature_code == "ADM1"
    }

    /// Country-level political entity (`PCLI` and friends).
    pub fn is_country(&self) -> bool {
        matches!(
            self.feature_code.as_str(),
            "PCL" | "PCLI" | "PCLD" | "PCLF" | "PCLS" | "PCLIX"
        )
    }

    /// Primary, ascii and alternative names in file order.
    pub fn all_names(&self) -> impl Iterator<Item = &str> {
        [self.name.as_str(), self.ascii_name.as_str()]
            .into_iter()
            .chain(self.alternative_names.iter().map(String::as_str))
    }

    /// `log10(population + 1)`.
    pub fn population_log(&self) -> f64 {
        (self.population as f64 + 1.0).log10()
    }
}

/// Keeps only entries whose feature class is in `classes`.
pub fn retain_classes(entries: &mut Vec<GazetteerEntry>, classes: &[FeatureClass]) {
    entries.retain(|e| classes.contains(&e.feature_class));
}

#[derive(Debug, thiserror::Error)]
pub enum GazetteerError {
    #[error("failed to read gazetteer: {0}")]
    Ingestion(#[from] std::io::Error),
    #[error("gazetteer looks corrupt: {malformed} of {total} lines malformed")]
    Corrupt { malformed: usize, total: usize },
    #[error("unknown feature class {0:?}")]
    UnknownFeatureClass(String),
}
