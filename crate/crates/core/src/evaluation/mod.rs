//! Resolution metrics: exact match, distance error, accuracy within 161 km,
//! country / feature-class / ADM1 agreement, retrieval recall and abstention
//! quality.
//!
//! Denominators:
//! - `exact_match`: records with a gold id that are not impossible cases;
//! - distance and agreement metrics: records with a prediction;
//! - `abstention_recall`: impossible cases;
//! - `abstention_false_rate`: records whose gold entry was retrieved.
//!
//! A fraction whose denominator is empty is reported as `None`.

mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::index::{GazetteerIndex, IndexError};
use crate::pipeline::{CorpusDocument, ResolutionRecord};

pub use report::{format_table, TABLE_COLUMNS};

/// Mean radius of the Earth.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;
pub const ACCURACY_THRESHOLD_KM: f64 = 161.0;

/// Great-circle distance on the mean-radius sphere.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> Result<f64, EvalError> {
    for (lat, lon) in [(lat1, lon1), (lat2, lon2)] {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(EvalError::InvalidCoordinate { lat, lon });
        }
    }
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_eval: usize,
    pub n_predicted: usize,
    pub n_abstained: usize,
    pub n_impossible: usize,
    pub exact_match: Option<f64>,
    pub mean_error_km: Option<f64>,
    pub median_error_km: Option<f64>,
    pub correct_country: Option<f64>,
    pub correct_feature_class: Option<f64>,
    pub correct_adm1: Option<f64>,
    pub acc_at_161km: Option<f64>,
    pub abstention_recall: Option<f64>,
    pub abstention_false_rate: Option<f64>,
    /// `k` → fraction of queries whose gold entry is missing from the top `k`.
    #[serde(default)]
    pub recall_at_k: BTreeMap<usize, f64>,
}

fn fraction(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0),
    }
}

/// Metrics over records that all carry gold labels.
pub fn evaluate(records: &[ResolutionRecord]) -> Result<MetricsReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut exact = (0, 0);
    let mut country = 0;
    let mut class = 0;
    let mut adm1 = 0;
    let mut within = 0;
    let mut errors = Vec::new();
    let mut abstained = 0;
    let mut impossible = (0, 0);
    let mut false_abstain = (0, 0);

    for (i, r) in records.iter().enumerate() {
        let gold = r.gold.as_ref().ok_or(EvalError::MissingGold(i))?;
        if gold.impossible {
            impossible.1 += 1;
            impossible.0 += usize::from(r.is_abstention());
        } else if let Some(id) = gold.geoname_id {
            exact.1 += 1;
            exact.0 += usize::from(r.predicted.as_ref().is_some_and(|p| p.geoname_id == id));
        }
        if gold.retrieved && !gold.impossible {
            false_abstain.1 += 1;
            false_abstain.0 += usize::from(r.is_abstention());
        }
        let Some(p) = &r.predicted else {
            abstained += 1;
            continue;
        };
        let d = haversine_km(p.latitude, p.longitude, gold.latitude, gold.longitude)?;
        within += usize::from(d <= ACCURACY_THRESHOLD_KM);
        errors.push(d);
        country += usize::from(p.country_code == gold.country_code);
        adm1 += usize::from(p.country_code == gold.country_code && p.admin1_code == gold.admin1_code);
        class += usize::from(Some(p.feature_class) == gold.feature_class);
    }

    let n_predicted = errors.len();
    let mean_error_km = (n_predicted > 0).then(|| errors.iter().sum::<f64>() / n_predicted as f64);
    errors.sort_by(f64::total_cmp);
    Ok(MetricsReport {
        n_eval: records.len(),
        n_predicted,
        n_abstained: abstained,
        n_impossible: impossible.1,
        exact_match: fraction(exact.0, exact.1),
        mean_error_km,
        median_error_km: median(&errors),
        correct_country: fraction(country, n_predicted),
        correct_feature_class: fraction(class, n_predicted),
        correct_adm1: fraction(adm1, n_predicted),
        acc_at_161km: fraction(within, n_predicted),
        abstention_recall: fraction(impossible.0, impossible.1),
        abstention_false_rate: fraction(false_abstain.0, false_abstain.1),
        recall_at_k: BTreeMap::new(),
    })
}

/// For each `k`, the fraction of annotations whose gold id is not among the
/// top `k` candidates for the annotation's surface form. Impossible cases and
/// annotations without a gold id are skipped.
///
/// Retrieval order is total, so the top `k` are a prefix of the top
/// `max(k_values)`; each surface is queried once.
pub fn query_recall(
    index: &GazetteerIndex,
    corpus: &[CorpusDocument],
    k_values: &[usize],
) -> Result<BTreeMap<usize, f64>, EvalError> {
    let max_k = k_values.iter().copied().max().ok_or(EvalError::NoK)?;
    if k_values.contains(&0) {
        return Err(EvalError::Index(IndexError::InvalidK));
    }
    let mut missing = vec![0usize; k_values.len()];
    let mut total = 0usize;
    for doc in corpus {
        for a in &doc.annotations {
            let Some(gold) = a.gold_geoname_id else { continue };
            if a.is_impossible() {
                continue;
            }
            total += 1;
            let set = index.query(&a.surface, max_k)?;
            let rank = set.position(gold);
            for (m, &k) in missing.iter_mut().zip(k_values) {
                *m += usize::from(rank.map_or(true, |r| r >= k));
            }
        }
    }
    if total == 0 {
        return Err(EvalError::Empty);
    }
    Ok(k_values
        .iter()
        .zip(missing)
        .map(|(&k, m)| (k, m as f64 / total as f64))
        .collect())
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    Empty,
    #[error("record {0} has no gold label")]
    MissingGold(usize),
    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("no k values given")]
    NoK,
    #[error(transparent)]
    Index(#[from] IndexError),
}
