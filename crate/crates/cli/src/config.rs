//! `key = value` run configuration shared by all subcommands.
//!
//! ```text
//! # experiment.conf
//! index = out/world.idx
//! seed = 3
//! epochs = 20
//! score_mode = logit_softmax
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Command-line flags
//! override values read from the file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use toporank::gazetteer::FeatureClass;
use toporank::ranker::{RankerConfig, ScoreMode};
use toporank::synthgen::DEFAULT_IMPOSSIBLE_FRACTION;

pub const DEFAULT_K: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gazetteer_path: Option<PathBuf>,
    pub index_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub corpus_path: Option<PathBuf>,
    /// Candidates per toponym; commands fall back to [`DEFAULT_K`] or the
    /// index's own default.
    pub k: Option<usize>,
    pub seed: u64,
    pub ranker: RankerConfig,
    /// Dimension of the hashed bag-of-words context vectors.
    pub dimension: usize,
    pub impossible_fraction: f64,
    pub n: usize,
    pub classes: Option<Vec<FeatureClass>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gazetteer_path: None,
            index_path: None,
            model_path: None,
            corpus_path: None,
            k: None,
            seed: 0,
            ranker: RankerConfig::default(),
            dimension: 64,
            impossible_fraction: DEFAULT_IMPOSSIBLE_FRACTION,
            n: 2000,
            classes: None,
        }
    }
}

fn value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| anyhow!("invalid value {raw:?} for {key}: {e}"))
}

pub fn parse_score_mode(raw: &str) -> Result<ScoreMode> {
    match raw {
        "sigmoid_softmax" | "sigmoid" => Ok(ScoreMode::SigmoidSoftmax),
        "logit_softmax" | "logit" => Ok(ScoreMode::LogitSoftmax),
        _ => bail!("unknown score mode {raw:?} (expected sigmoid_softmax or logit_softmax)"),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("bad config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            cfg.set(key.trim(), raw.trim())
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let r = &mut self.ranker;
        match key {
            "gazetteer" => self.gazetteer_path = Some(raw.into()),
            "index" => self.index_path = Some(raw.into()),
            "model" => self.model_path = Some(raw.into()),
            "corpus" => self.corpus_path = Some(raw.into()),
            "k" => self.k = Some(value(key, raw)?),
            "seed" => self.seed = value(key, raw)?,
            "dimension" => self.dimension = value(key, raw)?,
            "impossible_fraction" => self.impossible_fraction = value(key, raw)?,
            "n" => self.n = value(key, raw)?,
            "classes" => self.classes = Some(FeatureClass::parse_list(raw)?),
            "epochs" => r.epochs = value(key, raw)?,
            "batch_size" => r.batch_size = value(key, raw)?,
            "dropout" => r.dropout = value(key, raw)?,
            "learning_rate" => r.learning_rate = value(key, raw)?,
            "embedding_dim" => r.embedding_dim = value(key, raw)?,
            "hidden_dim" => r.hidden_dim = value(key, raw)?,
            "gradient_accumulation_steps" => r.gradient_accumulation_steps = value(key, raw)?,
            "multitask_country_weight" => r.multitask_country_weight = value(key, raw)?,
            "score_mode" => r.score_mode = parse_score_mode(raw)?,
            "use_population" => r.use_population = value(key, raw)?,
            _ => bail!("unknown key {key:?}"),
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(DEFAULT_K)
    }

    /// The ranker configuration with the run seed applied.
    pub fn ranker_config(&self) -> Result<RankerConfig> {
        let config = RankerConfig {
            seed: self.seed,
            ..self.ranker.clone()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == Some(0) {
            bail!("k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.impossible_fraction) {
            bail!("impossible_fraction must be in [0, 1], got {}", self.impossible_fraction);
        }
        Ok(())
    }
}

/// Flag value if given, else the config value, else an error naming both.
pub fn required<'a>(flag: &'a Option<PathBuf>, config: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    flag.as_deref()
        .or(config.as_deref())
        .ok_or_else(|| anyhow!("missing --{name} (or `{name} = ...` in the config file)"))
}

pub fn override_with<T: Clone>(target: &mut T, flag: &Option<T>) {
    if let Some(v) = flag {
        *target = v.clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let cfg = RunConfig::parse("# run\nindex = a.idx\n\nk=10\nlearning_rate = 0.1\nscore_mode = logit\nclasses = A, P\n")
            .unwrap();
        assert_eq!(cfg.index_path, Some(PathBuf::from("a.idx")));
        assert_eq!(cfg.k, Some(10));
        assert_eq!(cfg.ranker.learning_rate, 0.1);
        assert_eq!(cfg.ranker.score_mode, ScoreMode::LogitSoftmax);
        assert_eq!(cfg.classes, Some(vec![FeatureClass::Admin, FeatureClass::Populated]));
        assert_eq!(cfg.ranker.epochs, 15);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let err = RunConfig::parse("k = 5\nfoo = 1\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 2"));
        assert!(RunConfig::parse("k = many").is_err());
        assert!(RunConfig::parse("just text").is_err());
    }

    #[test]
    fn flags_win() {
        let mut cfg = RunConfig::parse("k = 5").unwrap();
        override_with(&mut cfg.k, &Some(Some(7)));
        override_with(&mut cfg.seed, &None);
        assert_eq!((cfg.k(), cfg.seed), (7, 0));
        let flag = Some(PathBuf::from("flag.idx"));
        let file = Some(PathBuf::from("file.idx"));
        assert_eq!(required(&flag, &file, "index").unwrap(), Path::new("flag.idx"));
        assert_eq!(required(&None, &file, "index").unwrap(), Path::new("file.idx"));
        assert!(required(&None, &None, "index").is_err());
    }
}
