//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force, observed, prepare_scan, typo};
use toporank::evaluation::{evaluate, haversine_km, query_recall, MetricsReport, ACCURACY_THRESHOLD_KM};
use toporank::features::{CandidateFeatures, ContextVectors, HashedBowProvider};
use toporank::gazetteer::{build_admin_tables, normalize_name, FeatureClass, GazetteerEntry, GeonameId};
use toporank::index::{build_index, GazetteerIndex, IndexConfig};
use toporank::pipeline::{CorpusDocument, GoldLabel, PredictedPlace, Ranker, ResolutionRecord, Resolver};
use toporank::ranker::{
    argmax, gradient_check, save_model, softmax, train, RankerConfig, RankerModel, ScoreMode, TrainingExample,
};
use toporank::synthgen::{
    augment_impossible, default_templates, fixture_world, generate_corpus, WorldConfig, DEFAULT_IMPOSSIBLE_FRACTION,
};
use toporank::text::CharSpan;

const WORLD_SEED: u64 = 7;
const CORPUS_SEED: u64 = 1;
const AUGMENT_SEED: u64 = 2;
const RANKER_SEED: u64 = 1;
const SYNTH_DOCS: usize = 2000;
const TRAIN_DOCS: usize = 1600;
const CONTEXT_DIM: usize = 64;
const K: usize = 50;

const GRADIENT_TOLERANCE: f64 = 1e-4;
const SOFTMAX_SUM_TOLERANCE: f64 = 1e-9;
const MIN_EXACT_MATCH: f64 = 0.90;
const MIN_ABSTENTION_RECALL: f64 = 0.80;

type Verdict = (bool, String);

fn large_world() -> Vec<GazetteerEntry> {
    fixture_world(&WorldConfig {
        seed: 11,
        countries: 40,
        admin1_per_country: 6,
        places_per_admin1: 20,
        ..WorldConfig::default()
    })
}

fn index_oracle(world: &[GazetteerEntry], index: &GazetteerIndex) -> Verdict {
    let start = Instant::now();
    let cfg = index.config().clone();
    let scan = prepare_scan(world, cfg.ngram_size);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut queries = Vec::new();
    for i in 0..200 {
        let e = world.choose(&mut rng).unwrap();
        let name = e.all_names().collect::<Vec<_>>().choose(&mut rng).unwrap().to_string();
        queries.push(if i < 100 { name } else { typo(&name, &mut rng) });
    }
    let mismatched: Vec<&String> = queries
        .iter()
        .filter(|q| observed(&index.query(q, K).unwrap()) != brute_force(&scan, q, K, &cfg))
        .collect();
    let secs = start.elapsed().as_secs_f64();
    (
        mismatched.is_empty() && secs < 60.0,
        format!(
            "{} entries, {}/200 queries identical to a linear scan (membership and order, k = {K}), {secs:.1}s; tolerance: exact, < 60s{}",
            world.len(),
            200 - mismatched.len(),
            mismatched.first().map_or(String::new(), |q| format!("; first mismatch {q:?}"))
        ),
    )
}

fn exact_name_recall(
    world: &[GazetteerEntry],
    index: &GazetteerIndex,
    corpus_index: &GazetteerIndex,
    corpus: &[CorpusDocument],
) -> Verdict {
    let missing = world
        .iter()
        .filter(|e| !index.query(&e.name, K).unwrap().contains(e.geoname_id))
        .count();
    let corpus_missing = query_recall(corpus_index, corpus, &[K]).unwrap()[&K];
    (
        missing == 0 && corpus_missing == 0.0,
        format!(
            "primary-name queries missing@{K}: {missing}/{} entries; synthetic corpus missing@{K}: {:.2}%; tolerance: exactly 0",
            world.len(),
            100.0 * corpus_missing
        ),
    )
}

fn random_features<R: Rng>(rng: &mut R, countries: &[&str]) -> CandidateFeatures {
    let min_ed = rng.gen_range(0.0..1.0);
    CandidateFeatures {
        min_edit_distance: min_ed,
        avg_edit_distance: min_ed + rng.gen_range(0.0..0.5),
        exact_match: rng.gen_bool(0.4),
        alt_name_count_log: rng.gen_range(0.0..2.0),
        population_log: rng.gen_range(0.0..7.0),
        is_adm1_of_other: rng.gen_bool(0.2),
        has_adm1_parent: rng.gen_bool(0.5),
        shared_country_fraction: rng.gen_range(0.0..1.0),
        has_other_toponyms: rng.gen_bool(0.6),
        candidate_country: countries.choose(rng).unwrap().to_string(),
        candidate_feature_class: *FeatureClass::ALL.choose(rng).unwrap(),
    }
}

fn random_context<R: Rng>(rng: &mut R, dim: usize) -> ContextVectors {
    let mut v = || (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    ContextVectors {
        mention: v(),
        other_mentions: v(),
        document: v(),
    }
}

const COUNTRIES: [&str; 6] = ["US", "FR", "GB", "XA", "XB", "ZZ"];

fn random_model<R: Rng>(rng: &mut R, mode: ScoreMode, dim: usize) -> RankerModel {
    let config = RankerConfig {
        embedding_dim: rng.gen_range(2..=8),
        hidden_dim: rng.gen_range(2..=10),
        score_mode: mode,
        multitask_country_weight: if rng.gen_bool(0.5) { rng.gen_range(0.1..1.0) } else { 0.0 },
        seed: rng.gen(),
        ..RankerConfig::default()
    };
    // "ZZ" stays out of the vocabulary so the OOV row is exercised
    let mut model = RankerModel::new(config, dim, COUNTRIES[..5].iter().map(|c| c.to_string())).unwrap();
    model.set_null_bias(rng.gen_range(-2.0..2.0));
    model
}

fn gradients() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let mode = if i % 2 == 0 { ScoreMode::SigmoidSoftmax } else { ScoreMode::LogitSoftmax };
        let dim = rng.gen_range(4..=12);
        let model = random_model(&mut rng, mode, dim);
        let n = rng.gen_range(0..=6);
        let example = TrainingExample {
            features: (0..n).map(|_| random_features(&mut rng, &COUNTRIES)).collect(),
            context: random_context(&mut rng, dim),
            gold: rng.gen_range(0..=n),
            gold_country: Some(COUNTRIES.choose(&mut rng).unwrap().to_string()),
        };
        worst = worst.max(gradient_check(&model, &example, 1e-5));
    }
    (
        worst < GRADIENT_TOLERANCE,
        format!("max relative error {worst:.2e} over 20 random models/examples, central differences eps 1e-5; tolerance < {GRADIENT_TOLERANCE:e}"),
    )
}

fn softmax_invariants() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_sum: f64 = 0.0;
    let mut worst_recon: f64 = 0.0;
    let mut argmax_breaks = 0;
    let mut shift_breaks = 0;
    let mut model = random_model(&mut rng, ScoreMode::SigmoidSoftmax, 16);
    for call in 0..1000 {
        if call % 50 == 0 {
            model = random_model(&mut rng, ScoreMode::SigmoidSoftmax, 16);
        }
        let n = rng.gen_range(0..=12);
        let features: Vec<_> = (0..n).map(|_| random_features(&mut rng, &COUNTRIES)).collect();
        let scored = model.score_candidates(&features, &random_context(&mut rng, 16)).unwrap();
        worst_sum = worst_sum.max((scored.probabilities.iter().sum::<f64>() - 1.0).abs());
        argmax_breaks += usize::from(scored.predicted != argmax(&scored.probabilities));

        let mut slots = scored.raw_scores.clone();
        slots.push(scored.null_score);
        for (p, q) in softmax(&slots).iter().zip(&scored.probabilities) {
            worst_recon = worst_recon.max((p - q).abs());
        }
        let shift = rng.gen_range(-500.0..500.0);
        let shifted: Vec<f64> = slots.iter().map(|z| z + shift).collect();
        shift_breaks += usize::from(argmax(&softmax(&shifted)) != scored.predicted);
    }
    (
        worst_sum <= SOFTMAX_SUM_TOLERANCE && worst_recon <= 1e-12 && argmax_breaks == 0 && shift_breaks == 0,
        format!(
            "1000 scoring calls: max |sum - 1| {worst_sum:.1e}, predicted != argmax {argmax_breaks}, shifted-score argmax changes {shift_breaks}; tolerance: sum within {SOFTMAX_SUM_TOLERANCE:e}, zero changes"
        ),
    )
}

struct PipelineRun {
    world_entries: usize,
    world_countries: usize,
    cross_country_homonyms: usize,
    corpus: Vec<CorpusDocument>,
    heldout_impossible: usize,
    model_bytes: Vec<u8>,
    report: MetricsReport,
    baseline: MetricsReport,
    index: GazetteerIndex,
    seconds: f64,
}

fn pipeline(dir: &Path, tag: &str) -> PipelineRun {
    let start = Instant::now();
    let world = fixture_world(&WorldConfig {
        seed: WORLD_SEED,
        ..WorldConfig::default()
    });
    let world_countries = world.iter().map(|e| e.country_code.as_str()).collect::<HashSet<_>>().len();
    let mut countries_by_name: HashMap<String, HashSet<&str>> = HashMap::new();
    for e in &world {
        countries_by_name.entry(normalize_name(&e.name)).or_default().insert(&e.country_code);
    }
    let cross_country_homonyms = countries_by_name.values().filter(|c| c.len() > 1).count();

    let admin = build_admin_tables(&world);
    let corpus = generate_corpus(&world, &admin, SYNTH_DOCS, CORPUS_SEED, &default_templates()).unwrap();
    let corpus = augment_impossible(corpus, DEFAULT_IMPOSSIBLE_FRACTION, AUGMENT_SEED).unwrap();
    let countries: Vec<String> = world.iter().map(|e| e.country_code.clone()).collect();
    let world_entries = world.len();
    let index = build_index(world, IndexConfig::default()).unwrap();

    let provider = HashedBowProvider::new(CONTEXT_DIM, 0).unwrap();
    let resolver = Resolver::new(&index, &admin, &provider, K);
    let (train_docs, test_docs) = corpus.split_at(TRAIN_DOCS);
    let examples: Vec<TrainingExample> = train_docs
        .iter()
        .flat_map(|d| resolver.training_examples(d).unwrap())
        .collect();
    let config = RankerConfig {
        seed: RANKER_SEED,
        ..RankerConfig::default()
    };
    let mut model = RankerModel::new(config.clone(), CONTEXT_DIM, countries).unwrap();
    train(&mut model, &examples, &[], &config).unwrap();
    let path = dir.join(format!("{tag}.model"));
    save_model(&model, &path).unwrap();

    let records = |ranker: Ranker<'_>| -> Vec<ResolutionRecord> {
        test_docs
            .iter()
            .flat_map(|d| resolver.resolve_annotated(d, ranker).unwrap())
            .collect()
    };
    let mut report = evaluate(&records(Ranker::Model(&model))).unwrap();
    report.recall_at_k = query_recall(&index, test_docs, &[50, 500]).unwrap();
    let baseline = evaluate(&records(Ranker::PopulationBaseline)).unwrap();
    let heldout_impossible = test_docs
        .iter()
        .flat_map(|d| &d.annotations)
        .filter(|a| a.is_impossible())
        .count();
    PipelineRun {
        world_entries,
        world_countries,
        cross_country_homonyms,
        heldout_impossible,
        model_bytes: std::fs::read(&path).unwrap(),
        report,
        baseline,
        corpus,
        index,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn pct(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{:.1}%", 100.0 * v))
}

fn synthetic_reproduction(run: &PipelineRun) -> Verdict {
    let em = run.report.exact_match.unwrap_or(0.0);
    let base = run.baseline.exact_match.unwrap_or(0.0);
    let fixture_ok = run.world_entries >= 2000 && run.world_countries >= 20 && run.cross_country_homonyms > 0;
    let impossible = run.corpus.iter().flat_map(|d| &d.annotations).filter(|a| a.is_impossible()).count();
    let total: usize = run.corpus.iter().map(|d| d.annotations.len()).sum();
    (
        fixture_ok && em >= MIN_EXACT_MATCH && em >= base && run.seconds < 600.0,
        format!(
            "fixture {} entries / {} countries / {} cross-country homonym names; {SYNTH_DOCS} docs, {impossible}/{total} impossible; held-out exact match {} vs population baseline {} ({:.0}s); tolerance: >= {:.0}% and >= baseline",
            run.world_entries,
            run.world_countries,
            run.cross_country_homonyms,
            pct(Some(em)),
            pct(Some(base)),
            run.seconds,
            100.0 * MIN_EXACT_MATCH
        ),
    )
}

fn abstention(run: &PipelineRun) -> Verdict {
    let recall = run.report.abstention_recall.unwrap_or(0.0);
    (
        recall >= MIN_ABSTENTION_RECALL,
        format!(
            "held-out abstention recall {} over {} impossible cases (false abstention {}); tolerance: >= {:.0}%",
            pct(Some(recall)),
            run.heldout_impossible,
            pct(run.report.abstention_false_rate),
            100.0 * MIN_ABSTENTION_RECALL
        ),
    )
}

fn haversine() -> Verdict {
    let london_paris = haversine_km(51.5074, -0.1278, 48.8566, 2.3522).unwrap();
    let antipodal = haversine_km(0.0, 0.0, 0.0, 180.0).unwrap();
    let rel = |x: f64, target: f64| (x - target).abs() / target;
    (
        rel(london_paris, 343.6) <= 0.005 && rel(antipodal, 20015.1) <= 0.001,
        format!(
            "London-Paris {london_paris:.4} km (target 343.6 km, tolerance 0.5%), antipodal {antipodal:.4} km (target 20015.1 km, tolerance 0.1%)"
        ),
    )
}

fn determinism(a: &PipelineRun, b: &PipelineRun) -> Verdict {
    let same_model = a.model_bytes == b.model_bytes;
    let same_report = a.report == b.report && a.baseline == b.baseline;
    (
        same_model && same_report,
        format!(
            "two full runs with identical seeds: model files {} ({} bytes), metrics reports {}; tolerance: byte-identical",
            if same_model { "identical" } else { "differ" },
            a.model_bytes.len(),
            if same_report { "identical" } else { "differ" }
        ),
    )
}

fn place(id: u64, lat: f64, lon: f64, country: &str, admin1: &str, class: FeatureClass) -> PredictedPlace {
    PredictedPlace {
        geoname_id: GeonameId(id),
        name: format!("place {id}"),
        latitude: lat,
        longitude: lon,
        country_code: country.into(),
        admin1_code: admin1.into(),
        feature_class: class,
    }
}

/// 100 records in five kinds: exact hits, ~100 km misses in the right ADM1,
/// ~1000 km misses in the right country only, abstentions, and impossible
/// cases (half abstained).
fn evaluation_fixture() -> Vec<ResolutionRecord> {
    (0..100u64)
        .map(|i| {
            let (lat, lon) = (-60.0 + i as f64, -170.0 + 3.0 * i as f64);
            let country = format!("C{}", i % 7);
            let admin1 = format!("A{}", i % 3);
            let other_admin1 = format!("A{}", (i + 1) % 3);
            let impossible = i % 5 == 4;
            let gold_id = (i % 20 != 6).then_some(GeonameId(i));
            let predicted = match i % 5 {
                0 => Some(place(i, lat, lon, &country, &admin1, FeatureClass::Populated)),
                1 => Some(place(1000 + i, lat + 0.9, lon, &country, &admin1, FeatureClass::Populated)),
                2 => Some(place(2000 + i, lat + 9.0, lon, &country, &other_admin1, FeatureClass::Admin)),
                3 => None,
                _ if i % 10 == 4 => None,
                _ => Some(place(3000 + i, -lat, lon - 20.0, "ZZ", "01", FeatureClass::Populated)),
            };
            ResolutionRecord {
                span: CharSpan::new(0, 5),
                query_text: format!("q{i}"),
                score: 0.5,
                candidate_count: 3,
                gold: Some(GoldLabel {
                    geoname_id: gold_id,
                    latitude: lat,
                    longitude: lon,
                    country_code: country,
                    admin1_code: admin1,
                    feature_class: Some(FeatureClass::Populated),
                    impossible,
                    retrieved: !impossible && i % 15 != 3,
                }),
                predicted,
            }
        })
        .collect()
}

fn share(hits: usize, total: usize) -> Option<f64> {
    if total == 0 {
        None
    } else {
        Some(hits as f64 / total as f64)
    }
}

fn recompute(records: &[ResolutionRecord]) -> MetricsReport {
    let gold = |r: &ResolutionRecord| r.gold.clone().unwrap();
    let possible: Vec<&ResolutionRecord> = records
        .iter()
        .filter(|r| !gold(r).impossible && gold(r).geoname_id.is_some())
        .collect();
    let exact_hits = possible
        .iter()
        .filter(|r| r.predicted.as_ref().map(|p| Some(p.geoname_id)) == Some(gold(r).geoname_id))
        .count();
    let answered: Vec<(&PredictedPlace, GoldLabel)> = records
        .iter()
        .filter_map(|r| r.predicted.as_ref().map(|p| (p, gold(r))))
        .collect();
    let mut distances: Vec<f64> = answered
        .iter()
        .map(|(p, g)| haversine_km(p.latitude, p.longitude, g.latitude, g.longitude).unwrap())
        .collect();
    let mean = if distances.is_empty() {
        None
    } else {
        Some(distances.iter().sum::<f64>() / distances.len() as f64)
    };
    distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = match distances.len() {
        0 => None,
        n if n % 2 == 1 => Some(distances[n / 2]),
        n => Some((distances[n / 2 - 1] + distances[n / 2]) / 2.0),
    };
    let count = |f: &dyn Fn(&PredictedPlace, &GoldLabel) -> bool| answered.iter().filter(|(p, g)| f(p, g)).count();
    let impossible: Vec<&ResolutionRecord> = records.iter().filter(|r| gold(r).impossible).collect();
    let answerable: Vec<&ResolutionRecord> = records
        .iter()
        .filter(|r| gold(r).retrieved && !gold(r).impossible)
        .collect();
    MetricsReport {
        n_eval: records.len(),
        n_predicted: answered.len(),
        n_abstained: records.len() - answered.len(),
        n_impossible: impossible.len(),
        exact_match: share(exact_hits, possible.len()),
        mean_error_km: mean,
        median_error_km: median,
        correct_country: share(count(&|p, g| p.country_code == g.country_code), answered.len()),
        correct_feature_class: share(count(&|p, g| Some(p.feature_class) == g.feature_class), answered.len()),
        correct_adm1: share(
            count(&|p, g| p.country_code == g.country_code && p.admin1_code == g.admin1_code),
            answered.len(),
        ),
        acc_at_161km: share(distances.iter().filter(|d| **d <= ACCURACY_THRESHOLD_KM).count(), answered.len()),
        abstention_recall: share(impossible.iter().filter(|r| r.predicted.is_none()).count(), impossible.len()),
        abstention_false_rate: share(answerable.iter().filter(|r| r.predicted.is_none()).count(), answerable.len()),
        recall_at_k: BTreeMap::new(),
    }
}

fn evaluation_oracle() -> Verdict {
    let records = evaluation_fixture();
    let got = evaluate(&records).unwrap();
    let want = recompute(&records);
    (
        got == want,
        format!(
            "100 hand-built records ({} answered, {} abstained, {} impossible): exact match {}, Acc@161km {}, abstention recall {}; tolerance: every field exactly equal",
            got.n_predicted,
            got.n_abstained,
            got.n_impossible,
            pct(got.exact_match),
            pct(got.acc_at_161km),
            pct(got.abstention_recall)
        ),
    )
}

fn monotonicity(run: &PipelineRun, large: &GazetteerIndex, large_world: &[GazetteerEntry]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut noisy = run.corpus.clone();
    for a in noisy.iter_mut().flat_map(|d| d.annotations.iter_mut()) {
        a.surface = typo(&a.surface, &mut rng);
    }
    let admin = build_admin_tables(large_world);
    let large_corpus = generate_corpus(large_world, &admin, 500, 9, &default_templates()).unwrap();
    let corpora: [(&str, &GazetteerIndex, &[CorpusDocument]); 4] = [
        ("synthetic", &run.index, &run.corpus),
        ("held-out", &run.index, &run.corpus[TRAIN_DOCS..]),
        ("typo-noised", &run.index, &noisy),
        ("5k-entry world", large, &large_corpus),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, index, corpus) in corpora {
        let m = query_recall(index, corpus, &[50, 500]).unwrap();
        ok &= m[&500] <= m[&50];
        parts.push(format!("{name} {:.2}% -> {:.2}%", 100.0 * m[&50], 100.0 * m[&500]));
    }
    (
        ok,
        format!("missing@50 -> missing@500: {}; tolerance: missing@500 <= missing@50", parts.join(", ")),
    )
}

fn check(results: &mut Vec<bool>, id: usize, title: &str, f: impl FnOnce() -> Verdict) {
    let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    println!("{} [{id:>2}] {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    results.push(pass);
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let world = large_world();
    let index = build_index(world.clone(), IndexConfig::default()).unwrap();
    let first = pipeline(dir.path(), "first");
    let mut results = Vec::new();

    check(&mut results, 1, "index oracle equivalence", || index_oracle(&world, &index));
    check(&mut results, 2, "exact-name recall", || exact_name_recall(&world, &index, &first.index, &first.corpus));
    check(&mut results, 3, "gradient correctness", gradients);
    check(&mut results, 4, "softmax normalization and argmax invariance", softmax_invariants);
    check(&mut results, 5, "synthetic reproduction", || synthetic_reproduction(&first));
    check(&mut results, 6, "abstention quality", || abstention(&first));
    check(&mut results, 7, "haversine", haversine);
    check(&mut results, 8, "determinism", || determinism(&first, &pipeline(dir.path(), "second")));
    check(&mut results, 9, "evaluation oracle equivalence", evaluation_oracle);
    check(&mut results, 10, "retrieval depth monotonicity", || monotonicity(&first, &index, &world));

    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
