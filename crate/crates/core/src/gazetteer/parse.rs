use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{normalize_name, FeatureClass, GazetteerEntry, GazetteerError, GeonameId};

const COLUMNS: usize = 19;

/// Result of reading a dump: the well-formed entries plus line accounting.
#[derive(Debug, Clone, Default)]
pub struct ParsedGazetteer {
    pub entries: Vec<GazetteerEntry>,
    pub malformed_lines: usize,
    pub total_lines: usize,
}

/// Parses Geonames tab-separated rows.
///
/// Blank lines are ignored. A line is malformed when it does not have exactly 19
/// columns, a numeric field does not parse, coordinates are out of range, the
/// feature class is unknown, the name is empty, or the id repeats an earlier
/// row. Malformed lines are skipped and counted; more than half malformed is
/// reported as a corrupt file.
pub fn parse_gazetteer<R: BufRead>(reader: R) -> Result<ParsedGazetteer, GazetteerError> {
    let mut out = ParsedGazetteer::default();
    let mut seen = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        out.total_lines += 1;
        match parse_line(line) {
            Some(entry) if seen.insert(entry.geoname_id) => out.entries.push(entry),
            _ => {
                out.malformed_lines += 1;
                log::debug!("skipping malformed gazetteer line {}", out.total_lines);
            }
        }
    }
    if out.malformed_lines * 2 > out.total_lines {
        return Err(GazetteerError::Corrupt {
            malformed: out.malformed_lines,
            total: out.total_lines,
        });
    }
    if out.malformed_lines > 0 {
        log::warn!(
            "skipped {} malformed gazetteer lines of {}",
            out.malformed_lines,
            out.total_lines
        );
    }
    Ok(out)
}

pub fn read_gazetteer_file(path: &Path) -> Result<ParsedGazetteer, GazetteerError> {
    let file = File::open(path)?;
    parse_gazetteer(BufReader::new(file))
}

fn parse_line(line: &str) -> Option<GazetteerEntry> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != COLUMNS {
        return None;
    }
    let geoname_id: u64 = cols[0].trim().parse().ok().filter(|id| *id > 0)?;
    let name = cols[1].to_string();
    if normalize_name(&name).is_empty() {
        return None;
    }
    let latitude: f64 = cols[4].trim().parse().ok()?;
    let longitude: f64 = cols[5].trim().parse().ok()?;
    if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
        return None;
    }
    let mut class_chars = cols[6].trim().chars();
    let feature_class = match (class_chars.next(), class_chars.next()) {
        (Some(c), None) => FeatureClass::from_char(c)?,
        _ => return None,
    };
    let population = match cols[14].trim() {
        "" => 0,
        p => p.parse().ok()?,
    };
    Some(GazetteerEntry {
        geoname_id: GeonameId(geoname_id),
        name,
        ascii_name: cols[2].to_string(),
        alternative_names: cols[3]
            .split(',')
            .map(str::trim)
            .filter(|n| !n.is_empty())
            .map(str::to_string)
            .collect(),
        latitude,
        longitude,
        feature_class,
        feature_code: cols[7].trim().to_string(),
        country_code: cols[8].trim().to_string(),
        admin1_code: cols[10].trim().to_string(),
        admin2_code: cols[11].trim().to_string(),
        population,
    })
}

/// Writes entries back in the 19-column layout. Columns the gazetteer does not
/// keep (cc2, admin3/4, elevation, dem, timezone, modification date) are empty.
pub fn write_gazetteer<W: Write>(entries: &[GazetteerEntry], mut out: W) -> std::io::Result<()> {
    for e in entries {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t\t{}\t{}\t\t\t{}\t\t\t\t",
            e.geoname_id,
            e.name,
            e.ascii_name,
            e.alternative_names.join(","),
            e.latitude,
            e.longitude,
            e.feature_class,
            e.feature_code,
            e.country_code,
            e.admin1_code,
            e.admin2_code,
            e.population,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIXTURE: &str = "2988507\tParis\tParis\tLutetia,Paname,Parigi\t48.85341\t2.3488\tP\tPPLC\tFR\t\t11\t75\t751\t75056\t2138551\t\t42\tEurope/Paris\t2023-01-01\n\
4717560\tParis\tParis\t\t33.66094\t-95.55551\tP\tPPLA2\tUS\t\tTX\t277\t\t\t24171\t\t180\tAmerica/Chicago\t2017-05-23\n\
4736286\tTexas\tTexas\tTejas,Texas State\t31.25044\t-99.25061\tA\tADM1\tUS\t\tTX\t\t\t\t22875689\t\t149\tAmerica/Chicago\t2022-04-28\n";

    #[test]
    fn parses_fixture_fields() {
        let parsed = parse_gazetteer(FIXTURE.as_bytes()).unwrap();
        assert_eq!(parsed.entries.len(), 3);
        assert_eq!(parsed.malformed_lines, 0);
        let paris = &parsed.entries[0];
        assert_eq!(paris.geoname_id, GeonameId(2988507));
        assert_eq!(paris.name, "Paris");
        assert_eq!(paris.ascii_name, "Paris");
        assert_eq!(paris.alternative_names, vec!["Lutetia", "Paname", "Parigi"]);
        assert_eq!(paris.latitude, 48.85341);
        assert_eq!(paris.longitude, 2.3488);
        assert_eq!(paris.feature_class, FeatureClass::Populated);
        assert_eq!(paris.feature_code, "PPLC");
        assert_eq!(paris.country_code, "FR");
        assert_eq!(paris.admin1_code, "11");
        assert_eq!(paris.admin2_code, "75");
        assert_eq!(paris.population, 2138551);

        let paris_tx = &parsed.entries[1];
        assert!(paris_tx.alternative_names.is_empty());
        assert_eq!(paris_tx.longitude, -95.55551);
        assert_eq!(parsed.entries[2].feature_class, FeatureClass::Admin);
        assert!(parsed.entries[2].is_adm1());
    }

    #[test]
    fn out_of_range_latitude_is_skipped() {
        let bad = FIXTURE.replace("33.66094", "91.0");
        let parsed = parse_gazetteer(bad.as_bytes()).unwrap();
        assert_eq!(parsed.entries.len(), 2);
        assert_eq!(parsed.malformed_lines, 1);
    }

    #[test]
    fn wrong_column_count_and_duplicate_ids_are_skipped() {
        let mut text = FIXTURE.to_string();
        text.push_str("1\tshort line\n");
        text.push_str(FIXTURE.lines().next().unwrap());
        text.push('\n');
        let parsed = parse_gazetteer(text.as_bytes()).unwrap();
        assert_eq!(parsed.entries.len(), 3);
        assert_eq!(parsed.malformed_lines, 2);
        assert_eq!(parsed.total_lines, 5);
    }

    #[test]
    fn mostly_malformed_is_corrupt() {
        let text = "garbage\nmore garbage\n".to_string() + FIXTURE.lines().next().unwrap();
        match parse_gazetteer(text.as_bytes()) {
            Err(GazetteerError::Corrupt { malformed: 2, total: 3 }) => {}
            other => panic!("expected corrupt error, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_empty_gazetteer() {
        let parsed = parse_gazetteer("".as_bytes()).unwrap();
        assert!(parsed.entries.is_empty());
    }

    #[test]
    fn read_failure_is_ingestion_error() {
        let bytes: &[u8] = &[0xff, 0xfe, b'\n'];
        assert!(matches!(parse_gazetteer(bytes), Err(GazetteerError::Ingestion(_))));
    }

    fn arb_entry() -> impl Strategy<Value = GazetteerEntry> {
        (
            1u64..10_000_000,
            "[A-Za-zÀ-ÿ][A-Za-zÀ-ÿ '-]{0,15}",
            proptest::collection::vec("[A-Za-z][a-z ]{0,8}[a-z]", 0..4),
            -90.0f64..=90.0,
            -180.0f64..=180.0,
            proptest::sample::select(FeatureClass::ALL.to_vec()),
            "[A-Z]{0,2}",
            "[0-9A-Z]{0,3}",
            0u64..50_000_000,
        )
            .prop_map(|(id, name, alts, lat, lon, class, cc, a1, pop)| GazetteerEntry {
                geoname_id: GeonameId(id),
                ascii_name: name.clone(),
                name,
                alternative_names: alts,
                latitude: lat,
                longitude: lon,
                feature_class: class,
                feature_code: "PPL".into(),
                country_code: cc,
                admin1_code: a1,
                admin2_code: String::new(),
                population: pop,
            })
    }

    proptest! {
        #[test]
        fn write_then_parse_round_trips(entries in proptest::collection::vec(arb_entry(), 1..20)) {
            let mut uniq = HashSet::new();
            let entries: Vec<_> = entries.into_iter().filter(|e| uniq.insert(e.geoname_id)).collect();
            let mut buf = Vec::new();
            write_gazetteer(&entries, &mut buf).unwrap();
            let parsed = parse_gazetteer(buf.as_slice()).unwrap();
            prop_assert_eq!(parsed.malformed_lines, 0);
            prop_assert_eq!(parsed.entries, entries);
        }
    }
}
