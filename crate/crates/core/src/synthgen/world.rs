//! Seeded fictional gazetteer for tests and demos: countries with ADM1
//! divisions, capitals and towns, deliberate homonyms across and within
//! countries, accented names with ASCII forms, alternative names, and a few
//! real anchor places (Paris FR / Paris TX, London GB / London ON, ...).

use std::collections::HashSet;

use rand::prelude::*;

use crate::gazetteer::{fold_diacritics, normalize_name, FeatureClass, GazetteerEntry, GeonameId};
use crate::ranker::TrainRng;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub seed: u64,
    pub countries: usize,
    pub admin1_per_country: usize,
    pub places_per_admin1: usize,
    /// Share of towns named from a small pool of shared names.
    pub homonym_rate: f64,
    pub diacritic_rate: f64,
    pub alt_name_rate: f64,
    pub include_anchors: bool,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            seed: 7,
            countries: 22,
            admin1_per_country: 5,
            places_per_admin1: 18,
            homonym_rate: 0.15,
            diacritic_rate: 0.1,
            alt_name_rate: 0.3,
            include_anchors: true,
        }
    }
}

const SYLLABLES: &[&str] = &[
    "ka", "ro", "vin", "ta", "mel", "dor", "sa", "li", "ber", "gan", "to", "mi", "ra", "vel", "shi", "no", "pa",
    "zan", "ku", "le", "bra", "os", "te", "mar", "qu", "il", "den", "fa", "go", "ri", "sel", "wen", "ha", "ly",
];
const SUFFIXES: &[&str] = &["ville", "burg", "ton", "ford", "polis", "stad", "dorf", "mouth", "field"];
const PREFIXES: &[&str] = &["New", "Port", "San", "Saint", "Fort", "North", "East"];
const ACCENTS: &[(char, char)] = &[('a', 'á'), ('e', 'é'), ('o', 'ö'), ('u', 'ü'), ('n', 'ñ'), ('c', 'ç'), ('i', 'í')];

struct Namer {
    rng: TrainRng,
    used: HashSet<String>,
}

impl Namer {
    fn key(name: &str) -> String {
        fold_diacritics(&normalize_name(name))
    }

    fn raw(&mut self) -> String {
        let n = self.rng.gen_range(2..=3);
        let mut s: String = (0..n).map(|_| *SYLLABLES.choose(&mut self.rng).unwrap()).collect();
        if self.rng.gen_bool(0.25) {
            s.push_str(SUFFIXES.choose(&mut self.rng).unwrap());
        }
        let mut c = s.chars();
        let mut name: String = c.next().unwrap().to_uppercase().chain(c).collect();
        if self.rng.gen_bool(0.1) {
            name = format!("{} {name}", PREFIXES.choose(&mut self.rng).unwrap());
        }
        name
    }

    /// A name not used before (after normalization and accent folding).
    fn fresh(&mut self) -> String {
        loop {
            let name = self.raw();
            if self.used.insert(Self::key(&name)) {
                return name;
            }
        }
    }

    fn accent(&mut self, name: &str, rate: f64) -> String {
        if !self.rng.gen_bool(rate) {
            return name.to_string();
        }
        let chars: Vec<char> = name.chars().collect();
        let spots: Vec<usize> = (1..chars.len())
            .filter(|&i| ACCENTS.iter().any(|(p, _)| *p == chars[i]))
            .collect();
        let Some(&i) = spots.choose(&mut self.rng) else {
            return name.to_string();
        };
        let accented = ACCENTS.iter().find(|(p, _)| *p == chars[i]).unwrap().1;
        chars
            .iter()
            .enumerate()
            .map(|(j, c)| if j == i { accented } else { *c })
            .collect()
    }

    /// Plausible variant spellings of `name`.
    fn variants(&mut self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        let swapped: String = name
            .chars()
            .map(|c| match c {
                'c' => 'k',
                'k' => 'c',
                'v' => 'w',
                'i' => 'y',
                _ => c,
            })
            .collect();
        if swapped != name {
            out.push(swapped);
        }
        if self.rng.gen_bool(0.5) {
            out.push(format!("Old {name}"));
        }
        out
    }
}

fn entry(
    id: u64,
    name: &str,
    class: FeatureClass,
    code: &str,
    cc: &str,
    admin1: &str,
    (lat, lon): (f64, f64),
    population: u64,
) -> GazetteerEntry {
    GazetteerEntry {
        geoname_id: GeonameId(id),
        name: name.to_string(),
        ascii_name: fold_diacritics(name),
        alternative_names: Vec::new(),
        latitude: lat,
        longitude: lon,
        feature_class: class,
        feature_code: code.to_string(),
        country_code: cc.to_string(),
        admin1_code: admin1.to_string(),
        admin2_code: String::new(),
        population,
    }
}

fn anchors() -> Vec<GazetteerEntry> {
    use FeatureClass::{Admin as A, Populated as P};
    let rows: &[(u64, &str, FeatureClass, &str, &str, &str, (f64, f64), u64, &[&str])] = &[
        (3017382, "France", A, "PCLI", "FR", "00", (46.0, 2.0), 66_987_244, &["République française", "Frankreich"]),
        (3012874, "Île-de-France", A, "ADM1", "FR", "11", (48.5, 2.5), 12_174_880, &["Ile de France"]),
        (2988507, "Paris", P, "PPLC", "FR", "11", (48.85341, 2.3488), 2_138_551, &["Paname", "Parigi", "Lutetia"]),
        (6252001, "United States", A, "PCLI", "US", "00", (39.76, -98.5), 327_167_434, &["United States of America", "USA", "America"]),
        (4736286, "Texas", A, "ADM1", "US", "TX", (31.25044, -99.25061), 22_875_689, &["TX", "Tejas"]),
        (4717560, "Paris", P, "PPL", "US", "TX", (33.66094, -95.55551), 24_782, &[]),
        (4671654, "Austin", P, "PPLA", "US", "TX", (30.26715, -97.74306), 961_855, &[]),
        (4684888, "Dallas", P, "PPL", "US", "TX", (32.78306, -96.80667), 1_300_092, &[]),
        (2635167, "United Kingdom", A, "PCLI", "GB", "00", (54.75844, -2.69531), 66_488_991, &["UK", "Britain"]),
        (6269131, "England", A, "ADM1", "GB", "ENG", (52.16045, -0.70312), 55_268_100, &[]),
        (2643743, "London", P, "PPLC", "GB", "ENG", (51.50853, -0.12574), 8_961_989, &["Londres", "Londra"]),
        (6251999, "Canada", A, "PCLI", "CA", "00", (60.10867, -113.64258), 37_058_856, &[]),
        (6093943, "Ontario", A, "ADM1", "CA", "08", (49.25014, -84.49983), 12_861_940, &["ON"]),
        (6058560, "London", P, "PPL", "CA", "08", (42.98339, -81.23304), 383_822, &[]),
        (6094817, "Ottawa", P, "PPLC", "CA", "08", (45.41117, -75.69812), 812_129, &[]),
    ];
    rows.iter()
        .map(|&(id, name, class, code, cc, a1, pos, pop, alts)| {
            let mut e = entry(id, name, class, code, cc, a1, pos, pop);
            e.alternative_names = alts.iter().map(|s| s.to_string()).collect();
            e
        })
        .collect()
}

fn country_code(i: usize) -> String {
    let first = [b'X', b'Y', b'Z'][i / 26 % 3] as char;
    let second = (b'A' + (i % 26) as u8) as char;
    format!("{first}{second}")
}

fn log_uniform(rng: &mut TrainRng, lo: f64, hi: f64) -> u64 {
    10f64.powf(rng.gen_range(lo..hi)).round() as u64
}

fn jitter(rng: &mut TrainRng, (lat, lon): (f64, f64), spread: f64) -> (f64, f64) {
    (
        (lat + rng.gen_range(-spread..spread)).clamp(-89.0, 89.0),
        (lon + rng.gen_range(-spread..spread)).clamp(-179.5, 179.5),
    )
}

/// Builds the fixture gazetteer. Deterministic per configuration; ids are
/// unique.
pub fn fixture_world(config: &WorldConfig) -> Vec<GazetteerEntry> {
    let mut entries = if config.include_anchors { anchors() } else { Vec::new() };
    let mut namer = Namer {
        rng: TrainRng::seed_from_u64(config.seed),
        used: entries.iter().flat_map(|e| e.all_names()).map(Namer::key).collect(),
    };
    let shared: Vec<String> = (0..40).map(|_| namer.fresh()).collect();
    let mut next_id = 1_000_001u64;
    let mut push = |entries: &mut Vec<GazetteerEntry>, mut e: GazetteerEntry| {
        e.geoname_id = GeonameId(next_id);
        next_id += 1;
        entries.push(e);
    };

    for c in 0..config.countries {
        let cc = country_code(c);
        let rng = &mut namer.rng;
        let center = (rng.gen_range(-45.0..60.0), rng.gen_range(-170.0..170.0));
        let country_pop = log_uniform(rng, 6.0, 8.0);
        let country_name = namer.fresh();
        let mut country = entry(0, &country_name, FeatureClass::Admin, "PCLI", &cc, "00", center, country_pop);
        if namer.rng.gen_bool(0.5) {
            country.alternative_names.push(format!("Republic of {country_name}"));
        }
        push(&mut entries, country);

        for a in 0..config.admin1_per_country {
            let code = format!("{:02}", a + 1);
            let rng = &mut namer.rng;
            let a_center = jitter(rng, center, 4.0);
            let a_pop = log_uniform(rng, 5.0, 7.0);
            let a_name = namer.fresh();
            let mut adm1 = entry(0, &a_name, FeatureClass::Admin, "ADM1", &cc, &code, a_center, a_pop);
            let abbreviation: String = a_name.chars().take(2).collect::<String>().to_uppercase();
            if namer.used.insert(Namer::key(&abbreviation)) {
                adm1.alternative_names.push(abbreviation);
            }
            push(&mut entries, adm1);

            if a == 0 {
                let rng = &mut namer.rng;
                let pos = jitter(rng, a_center, 1.0);
                let pop = log_uniform(rng, 5.5, 6.8);
                let name = namer.fresh();
                let name = namer.accent(&name, config.diacritic_rate);
                push(&mut entries, entry(0, &name, FeatureClass::Populated, "PPLC", &cc, &code, pos, pop));
            }

            for p in 0..config.places_per_admin1 {
                let rng = &mut namer.rng;
                let pos = jitter(rng, a_center, 1.5);
                let pop = log_uniform(rng, 2.0, 6.0);
                let name = if rng.gen_bool(0.005) {
                    a_name.clone()
                } else if rng.gen_bool(config.homonym_rate) {
                    shared.choose(rng).unwrap().clone()
                } else {
                    namer.fresh()
                };
                let name = namer.accent(&name, config.diacritic_rate);
                let code_p = if p == 0 { "PPLA" } else { "PPL" };
                let mut town = entry(0, &name, FeatureClass::Populated, code_p, &cc, &code, pos, pop);
                if namer.rng.gen_bool(config.alt_name_rate) {
                    town.alternative_names = namer.variants(&name);
                }
                push(&mut entries, town);
            }
        }

        for (class, code, prefix) in [
            (FeatureClass::Hydro, "LK", "Lake"),
            (FeatureClass::Hydro, "STM", "River"),
            (FeatureClass::Terrain, "MT", "Mount"),
            (FeatureClass::Terrain, "MTS", "Mount"),
        ] {
            let rng = &mut namer.rng;
            let pos = jitter(rng, center, 4.0);
            let name = format!("{prefix} {}", namer.fresh());
            push(&mut entries, entry(0, &name, class, code, &cc, "", pos, 0));
        }
    }
    entries
}
