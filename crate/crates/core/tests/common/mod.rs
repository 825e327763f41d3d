#![allow(dead_code)]

use std::collections::HashSet;

use rand::Rng;
use toporank::gazetteer::{fold_diacritics, name_variants, normalize_name, GazetteerEntry, GeonameId};
use toporank::index::{CandidateSet, IndexConfig};

/// Plain two-row Levenshtein distance over chars.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

pub fn trigram_set(s: &str, n: usize) -> HashSet<String> {
    let chars: Vec<char> = s.chars().collect();
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// One gazetteer entry with its indexed name strings, prepared once.
pub struct ScanEntry {
    pub id: GeonameId,
    pub population_log: f64,
    pub names: Vec<(String, HashSet<String>)>,
}

pub fn prepare_scan(entries: &[GazetteerEntry], n: usize) -> Vec<ScanEntry> {
    entries
        .iter()
        .map(|e| ScanEntry {
            id: e.geoname_id,
            population_log: (e.population as f64 + 1.0).log10(),
            names: name_variants(e.all_names())
                .into_iter()
                .map(|v| {
                    let grams = trigram_set(&v, n);
                    (v, grams)
                })
                .collect(),
        })
        .collect()
}

/// `(id, exact, edit distance)` of every entry, scanned linearly: exact when
/// some indexed name equals a query form, otherwise the smallest distance to
/// a name sharing enough n-grams with the form. Sorted and cut to `k`.
pub fn brute_force(scan: &[ScanEntry], query: &str, k: usize, cfg: &IndexConfig) -> Vec<(GeonameId, bool, u32)> {
    let norm = normalize_name(query);
    if norm.is_empty() {
        return Vec::new();
    }
    let mut forms = vec![norm.clone()];
    let folded = fold_diacritics(&norm);
    if folded != norm && !folded.is_empty() {
        forms.push(folded);
    }
    let form_grams: Vec<HashSet<String>> = forms.iter().map(|f| trigram_set(f, cfg.ngram_size)).collect();

    let mut hits: Vec<(GeonameId, bool, u32, f64)> = Vec::new();
    for e in scan {
        let exact = e.names.iter().any(|(v, _)| forms.contains(v));
        let mut best: Option<usize> = None;
        for (f, fg) in forms.iter().zip(&form_grams) {
            for (v, vg) in &e.names {
                if fg.intersection(vg).count() < cfg.fuzzy_min_shared_ngrams {
                    continue;
                }
                let d = levenshtein(f, v);
                if d <= cfg.max_edit_distance {
                    best = Some(best.map_or(d, |b| b.min(d)));
                }
            }
        }
        match (exact, best) {
            (true, _) => hits.push((e.id, true, 0, e.population_log)),
            (false, Some(d)) => hits.push((e.id, false, d as u32, e.population_log)),
            (false, None) => {}
        }
    }
    hits.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(a.2.cmp(&b.2))
            .then(b.3.total_cmp(&a.3))
            .then(a.0.cmp(&b.0))
    });
    hits.truncate(k);
    hits.into_iter().map(|(id, exact, d, _)| (id, exact, d)).collect()
}

pub fn observed(set: &CandidateSet) -> Vec<(GeonameId, bool, u32)> {
    set.candidates
        .iter()
        .map(|c| (c.entry.geoname_id, c.score.exact, c.score.edit_distance))
        .collect()
}

/// One random substitution, insertion or deletion of a lowercase letter.
pub fn typo<R: Rng>(name: &str, rng: &mut R) -> String {
    let mut chars: Vec<char> = name.chars().collect();
    let letter = |rng: &mut R| (b'a' + rng.gen_range(0..26u8)) as char;
    match rng.gen_range(0..3) {
        0 if !chars.is_empty() => {
            let i = rng.gen_range(0..chars.len());
            let mut c = letter(rng);
            while c == chars[i] {
                c = letter(rng);
            }
            chars[i] = c;
        }
        1 if chars.len() > 1 => {
            chars.remove(rng.gen_range(0..chars.len()));
        }
        _ => {
            let i = rng.gen_range(0..=chars.len());
            chars.insert(i, letter(rng));
        }
    }
    chars.into_iter().collect()
}
