use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;
use toporank::evaluation::{evaluate as evaluate_records, format_table, query_recall};
use toporank::features::HashedBowProvider;
use toporank::gazetteer::{build_admin_tables, read_gazetteer_file, retain_classes, write_gazetteer, FeatureClass};
use toporank::index::{build_index as build, load_index, save_index, GazetteerIndex, IndexConfig};
use toporank::pipeline::{
    locate_event, read_corpus, write_corpus_file, CorpusDocument, DictionaryExtractor, Document, ProximityLocator,
    Ranker, Resolver,
};
use toporank::ranker::{load_model, save_model, train as train_ranker, RankerModel, TrainingExample};
use toporank::synthgen::{augment_impossible, default_templates, fixture_world, generate_corpus, WorldConfig};

use crate::config::{override_with, parse_score_mode, required, RunConfig};
use crate::{BuildIndexArgs, EvaluateArgs, OutputFormat, ParseArgs, QueryArgs, SynthArgs, TrainArgs};

/// Hash seed of the bag-of-words context provider. Fixed so that a model and
/// the documents it later scores always hash words the same way.
const PROVIDER_SEED: u64 = 0;
const MIN_EXTRACT_TOKEN_LEN: usize = 3;

fn open_index(path: &Path) -> Result<GazetteerIndex> {
    load_index(path).with_context(|| format!("cannot load index {}", path.display()))
}

fn open_corpus(path: &Path) -> Result<Vec<CorpusDocument>> {
    read_corpus(path).with_context(|| format!("cannot read corpus {}", path.display()))
}

fn open_model(path: &Path) -> Result<RankerModel> {
    load_model(path).with_context(|| format!("cannot load model {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn build_index(mut cfg: RunConfig, args: BuildIndexArgs) -> Result<()> {
    cfg.k = args.k.or(cfg.k);
    if let Some(list) = &args.classes {
        cfg.classes = Some(FeatureClass::parse_list(list)?);
    }
    cfg.validate()?;
    let path = required(&args.gazetteer, &cfg.gazetteer_path, "gazetteer")?;
    let parsed = read_gazetteer_file(path).with_context(|| format!("cannot load gazetteer {}", path.display()))?;
    let mut entries = parsed.entries;
    if let Some(classes) = &cfg.classes {
        retain_classes(&mut entries, classes);
    }
    let config = IndexConfig {
        max_candidates: cfg.k(),
        ..IndexConfig::default()
    };
    let index = build(entries, config)?;
    save_index(&index, &args.out).with_context(|| format!("cannot write index {}", args.out.display()))?;
    println!(
        "indexed {} entries under {} names ({} malformed lines skipped) -> {}",
        index.len(),
        index.name_count(),
        parsed.malformed_lines,
        args.out.display()
    );
    Ok(())
}

pub fn query(mut cfg: RunConfig, args: QueryArgs) -> Result<()> {
    let index = open_index(required(&args.index, &cfg.index_path, "index")?)?;
    cfg.k = args.k.or(cfg.k);
    cfg.validate()?;
    let set = index.query(&args.name, cfg.k.unwrap_or(index.config().max_candidates))?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if let OutputFormat::Table = args.format {
        writeln!(
            out,
            "{:>4}  {:>10}  {:<28} {:<3} {:<6} {:>9} {:>10} {:>10}  {:>12}",
            "rank", "id", "name", "cc", "admin1", "lat", "lon", "population", "score"
        )?;
    }
    for (rank, c) in set.candidates.iter().enumerate() {
        let e = &c.entry;
        match args.format {
            OutputFormat::Jsonl => writeln!(
                out,
                "{}",
                json!({
                    "rank": rank + 1,
                    "geoname_id": e.geoname_id,
                    "name": e.name,
                    "country_code": e.country_code,
                    "admin1_code": e.admin1_code,
                    "latitude": e.latitude,
                    "longitude": e.longitude,
                    "population": e.population,
                    "retrieval_score": c.score.value(),
                    "exact": c.score.exact,
                    "edit_distance": c.score.edit_distance,
                })
            )?,
            OutputFormat::Table => writeln!(
                out,
                "{:>4}  {:>10}  {:<28} {:<3} {:<6} {:>9.4} {:>10.4} {:>10}  {:>12.3}",
                rank + 1,
                e.geoname_id.0,
                e.name,
                e.country_code,
                e.admin1_code,
                e.latitude,
                e.longitude,
                e.population,
                c.score.value()
            )?,
        }
    }
    if set.is_empty() {
        log::info!("no candidates for {:?}", args.name);
    }
    Ok(())
}

pub fn synth(mut cfg: RunConfig, args: SynthArgs) -> Result<()> {
    override_with(&mut cfg.n, &args.n);
    override_with(&mut cfg.impossible_fraction, &args.impossible_fraction);
    cfg.validate()?;
    let gazetteer = args.gazetteer.as_ref().or(cfg.gazetteer_path.as_ref());
    let index = args.index.as_ref().or(cfg.index_path.as_ref());
    let entries = match (gazetteer, index) {
        (Some(path), _) => {
            read_gazetteer_file(path)
                .with_context(|| format!("cannot load gazetteer {}", path.display()))?
                .entries
        }
        (None, Some(path)) => open_index(path)?.entries().to_vec(),
        (None, None) => {
            let world = fixture_world(&WorldConfig {
                seed: cfg.seed,
                ..WorldConfig::default()
            });
            if let Some(path) = &args.world_out {
                write_gazetteer(&world, create(path)?).with_context(|| format!("cannot write {}", path.display()))?;
            }
            world
        }
    };
    let admin = build_admin_tables(&entries);
    let corpus = generate_corpus(&entries, &admin, cfg.n, cfg.seed.wrapping_add(1), &default_templates())?;
    let corpus = augment_impossible(corpus, cfg.impossible_fraction, cfg.seed.wrapping_add(2))?;
    write_corpus_file(&corpus, &args.out).with_context(|| format!("cannot write corpus {}", args.out.display()))?;
    let annotations: usize = corpus.iter().map(CorpusDocument::annotation_count).sum();
    let impossible = corpus
        .iter()
        .flat_map(|d| &d.annotations)
        .filter(|a| a.is_impossible())
        .count();
    println!(
        "wrote {} documents, {} annotations ({} impossible) -> {}",
        corpus.len(),
        annotations,
        impossible,
        args.out.display()
    );
    Ok(())
}

fn examples(resolver: &Resolver<'_>, corpus: &[CorpusDocument]) -> Result<Vec<TrainingExample>> {
    let mut out = Vec::new();
    for doc in corpus {
        out.extend(
            resolver
                .training_examples(doc)
                .with_context(|| format!("document {}", doc.doc_id))?,
        );
    }
    Ok(out)
}

pub fn train(mut cfg: RunConfig, args: TrainArgs) -> Result<()> {
    cfg.k = args.k.or(cfg.k);
    override_with(&mut cfg.dimension, &args.dimension);
    let r = &mut cfg.ranker;
    override_with(&mut r.epochs, &args.epochs);
    override_with(&mut r.batch_size, &args.batch_size);
    override_with(&mut r.dropout, &args.dropout);
    override_with(&mut r.learning_rate, &args.learning_rate);
    override_with(&mut r.embedding_dim, &args.embedding_dim);
    override_with(&mut r.hidden_dim, &args.hidden_dim);
    override_with(&mut r.gradient_accumulation_steps, &args.gradient_accumulation_steps);
    override_with(&mut r.multitask_country_weight, &args.multitask_country_weight);
    if let Some(mode) = &args.score_mode {
        r.score_mode = parse_score_mode(mode)?;
    }
    if args.no_population {
        r.use_population = false;
    }
    cfg.validate()?;
    let config = cfg.ranker_config()?;
    let out = required(&args.out, &cfg.model_path, "out")?;

    let index = open_index(required(&args.index, &cfg.index_path, "index")?)?;
    let corpus = open_corpus(required(&args.corpus, &cfg.corpus_path, "corpus")?)?;
    let heldout = match &args.heldout {
        Some(path) => open_corpus(path)?,
        None => Vec::new(),
    };
    let admin = build_admin_tables(index.entries());
    let provider = HashedBowProvider::new(cfg.dimension, PROVIDER_SEED)?;
    let resolver = Resolver::new(&index, &admin, &provider, cfg.k());
    let train_set = examples(&resolver, &corpus)?;
    let heldout_set = examples(&resolver, &heldout)?;
    if train_set.is_empty() {
        bail!("corpus has no annotations with a gold geoname id");
    }
    let countries = index.entries().iter().map(|e| e.country_code.clone());
    let mut model = RankerModel::new(config.clone(), cfg.dimension, countries)?;
    println!(
        "training on {} toponyms ({} held out), {} parameters",
        train_set.len(),
        heldout_set.len(),
        model.parameters().len()
    );
    let history = train_ranker(&mut model, &train_set, &heldout_set, &config)?;
    for e in &history.epochs {
        let heldout = e.heldout_accuracy.map_or(String::new(), |a| format!("  heldout_acc {a:.4}"));
        println!(
            "epoch {:>3}  loss {:.6}  running_loss {:.6}  train_acc {:.4}{}",
            e.epoch, e.train_loss, e.running_loss, e.train_accuracy, heldout
        );
    }
    save_model(&model, out).with_context(|| format!("cannot write model {}", out.display()))?;
    if let Some(path) = &args.history {
        serde_json::to_writer_pretty(create(path)?, &history)?;
    }
    println!("model -> {}", out.display());
    Ok(())
}

pub fn parse(mut cfg: RunConfig, args: ParseArgs) -> Result<()> {
    cfg.k = args.k.or(cfg.k);
    cfg.validate()?;
    if args.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let index = open_index(required(&args.index, &cfg.index_path, "index")?)?;
    let model = open_model(required(&args.model, &cfg.model_path, "model")?)?;
    let corpus = open_corpus(required(&args.input, &cfg.corpus_path, "input")?)?;
    let admin = build_admin_tables(index.entries());
    let provider = HashedBowProvider::new(model.context_dim(), PROVIDER_SEED)?;
    let resolver = Resolver::new(&index, &admin, &provider, cfg.k());
    let extractor = DictionaryExtractor::new(&index, MIN_EXTRACT_TOKEN_LEN);

    let resolve = |cd: &CorpusDocument| -> Result<String> {
        let doc = if args.extract || cd.annotations.is_empty() {
            Document {
                event_trigger: cd.event_trigger,
                ..Document::extracted(cd.doc_id.clone(), cd.text.clone(), &extractor)
            }
        } else {
            cd.document()?
        };
        let records = resolver
            .resolve_document(&doc, &model)
            .with_context(|| format!("document {}", cd.doc_id))?;
        let event = locate_event(&doc, &records, &ProximityLocator);
        Ok(json!({ "doc_id": doc.doc_id, "records": records, "event": event }).to_string())
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build()?;
    let lines: Vec<String> = pool.install(|| corpus.par_iter().map(resolve).collect::<Result<_>>())?;

    let mut out = create(&args.out)?;
    for line in &lines {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    println!("resolved {} documents -> {}", lines.len(), args.out.display());
    Ok(())
}

pub fn evaluate(mut cfg: RunConfig, args: EvaluateArgs) -> Result<()> {
    cfg.k = args.k.or(cfg.k);
    cfg.validate()?;
    let index = open_index(required(&args.index, &cfg.index_path, "index")?)?;
    let corpus = open_corpus(required(&args.corpus, &cfg.corpus_path, "corpus")?)?;
    let model = match args.baseline {
        true => None,
        false => Some(open_model(required(&args.model, &cfg.model_path, "model")?)?),
    };
    let admin = build_admin_tables(index.entries());
    let dimension = model.as_ref().map_or(cfg.dimension, RankerModel::context_dim);
    let provider = HashedBowProvider::new(dimension, PROVIDER_SEED)?;
    let resolver = Resolver::new(&index, &admin, &provider, cfg.k());
    let ranker = model.as_ref().map_or(Ranker::PopulationBaseline, Ranker::Model);

    let mut records = Vec::new();
    for doc in &corpus {
        records.extend(
            resolver
                .resolve_annotated(doc, ranker)
                .with_context(|| format!("document {}", doc.doc_id))?,
        );
    }
    let mut report = evaluate_records(&records)?;
    if !args.k_values.is_empty() {
        report.recall_at_k = query_recall(&index, &corpus, &args.k_values)?;
    }
    print!("{}", format_table(&report));
    if let Some(path) = &args.out {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &report)?;
        writeln!(out)?;
        out.flush()?;
    }
    Ok(())
}
