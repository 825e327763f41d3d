use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Canonical lookup form of a place name: NFC, Unicode default case folding,
/// whitespace runs collapsed to a single space, no leading/trailing space.
/// Diacritics are kept; see [`fold_diacritics`] for the folded variant.
pub fn normalize_name(raw: &str) -> String {
    let composed: String = raw.nfc().collect();
    let folded = caseless::default_case_fold_str(&composed);
    let recomposed: String = folded.nfc().collect();
    collapse_whitespace(&recomposed)
}

/// Strips combining marks from an already-normalized name ("são paulo" ->
/// "sao paulo"). Non-Latin scripts keep their base characters.
pub fn fold_diacritics(normalized: &str) -> String {
    let stripped: String = normalized.nfd().filter(|c| !is_combining_mark(*c)).collect();
    let recomposed: String = stripped.nfc().collect();
    collapse_whitespace(&recomposed)
}

/// Normalized and diacritic-folded forms of every name, deduplicated in first
/// occurrence order, empties dropped.
pub fn name_variants<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for raw in names {
        let norm = normalize_name(raw);
        let folded = fold_diacritics(&norm);
        for v in [norm, folded] {
            if !v.is_empty() && !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
