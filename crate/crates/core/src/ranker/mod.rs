//! Neural candidate ranker with a null (abstain) slot.
//!
//! For each candidate the model looks up a learned embedding for the
//! candidate's country and one for its feature class, and compares each with
//! linear projections of the mention, other-mention and document context
//! vectors (six cosine similarities). Those are concatenated with the numeric
//! candidate features and passed through `tanh` dense layers to a scalar; a
//! sigmoid maps it to a `[0, 1]` score. The null slot scores
//! `sigmoid(null_bias)`. A softmax over all slots gives the final
//! distribution.
//!
//! All parameters live in one flat buffer so that SGD, serialization and the
//! finite-difference gradient check walk the same memory.

mod backprop;
mod gradcheck;
mod storage;
mod train;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{CandidateFeatures, ContextVectors, NUMERIC_FEATURES};
use crate::gazetteer::FeatureClass;

pub use gradcheck::{gradient_check, loss_gradient};
pub use storage::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use train::{train, EpochStats, TrainingExample, TrainingHistory};

/// RNG used for initialization, shuffling and dropout masks.
pub type TrainRng = ChaCha8Rng;

/// Six context similarities followed by the numeric features.
pub const INPUT_DIM: usize = 6 + NUMERIC_FEATURES;
const POPULATION_INPUT: usize = 6 + 4;

/// How slot scores enter the softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Softmax over sigmoid scores in `[0, 1]`.
    SigmoidSoftmax,
    /// Softmax over the pre-sigmoid logits.
    LogitSoftmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub gradient_accumulation_steps: usize,
    pub multitask_country_weight: f64,
    pub seed: u64,
    pub score_mode: ScoreMode,
    /// When false the population input is held at zero.
    pub use_population: bool,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            epochs: 15,
            batch_size: 60,
            dropout: 0.3,
            learning_rate: 0.4,
            embedding_dim: 32,
            hidden_dim: 64,
            gradient_accumulation_steps: 1,
            multitask_country_weight: 0.0,
            seed: 0,
            score_mode: ScoreMode::SigmoidSoftmax,
            use_population: true,
        }
    }
}

impl RankerConfig {
    pub fn validate(&self) -> Result<(), RankerError> {
        let bad = |msg: &str| Err(RankerError::InvalidConfig(msg.to_string()));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size < 1 || self.gradient_accumulation_steps < 1 {
            return bad("batch_size and gradient_accumulation_steps must be at least 1");
        }
        if self.embedding_dim < 1 || self.hidden_dim < 1 {
            return bad("embedding_dim and hidden_dim must be at least 1");
        }
        if !(self.multitask_country_weight >= 0.0 && self.multitask_country_weight.is_finite()) {
            return bad("multitask_country_weight must be finite and non-negative");
        }
        Ok(())
    }
}

/// Offsets of each parameter block inside the flat buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub country_rows: usize,
    pub class_rows: usize,
    pub embed: usize,
    pub context: usize,
    pub hidden: usize,
    pub country: usize,
    pub class: usize,
    /// `embed x context`, row-major.
    pub proj: usize,
    /// `hidden x INPUT_DIM`, row-major.
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub null_bias: usize,
    pub total: usize,
}

impl Layout {
    fn new(country_rows: usize, embed: usize, context: usize, hidden: usize) -> Self {
        let class_rows = FeatureClass::ALL.len() + 1;
        let country = 0;
        let class = country + country_rows * embed;
        let proj = class + class_rows * embed;
        let w1 = proj + embed * context;
        let b1 = w1 + hidden * INPUT_DIM;
        let w2 = b1 + hidden;
        let b2 = w2 + hidden;
        let null_bias = b2 + 1;
        Layout {
            country_rows,
            class_rows,
            embed,
            context,
            hidden,
            country,
            class,
            proj,
            w1,
            b1,
            w2,
            b2,
            null_bias,
            total: null_bias + 1,
        }
    }

    pub fn country_row(&self, row: usize) -> std::ops::Range<usize> {
        let s = self.country + row * self.embed;
        s..s + self.embed
    }

    pub fn class_row(&self, row: usize) -> std::ops::Range<usize> {
        let s = self.class + row * self.embed;
        s..s + self.embed
    }
}

/// Softmax output over candidates plus the trailing null slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidateSet {
    /// One entry per candidate, then the null slot; sums to 1.
    pub probabilities: Vec<f64>,
    /// Per-candidate sigmoid scores.
    pub raw_scores: Vec<f64>,
    pub null_score: f64,
    /// Argmax slot, lowest index on ties. Equal to the candidate count when
    /// the null slot wins.
    pub predicted: usize,
}

impl ScoredCandidateSet {
    pub fn null_slot(&self) -> usize {
        self.raw_scores.len()
    }

    pub fn is_abstention(&self) -> bool {
        self.predicted == self.null_slot()
    }

    pub fn predicted_candidate(&self) -> Option<usize> {
        (!self.is_abstention()).then_some(self.predicted)
    }

    pub fn predicted_probability(&self) -> f64 {
        self.probabilities[self.predicted]
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankerModel {
    config: RankerConfig,
    context_dim: usize,
    /// Known country codes; country `i` uses embedding row `i + 1`, row 0 is
    /// the out-of-vocabulary row.
    countries: Vec<String>,
    country_rows: HashMap<String, usize>,
    layout: Layout,
    params: Vec<f64>,
}

impl RankerModel {
    /// Freshly initialized model. Weights are uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` from `config.seed`; the null bias
    /// starts at zero.
    pub fn new(
        config: RankerConfig,
        context_dim: usize,
        countries: impl IntoIterator<Item = String>,
    ) -> Result<Self, RankerError> {
        config.validate()?;
        if context_dim == 0 {
            return Err(RankerError::InvalidConfig("context dimension must be positive".into()));
        }
        let mut countries: Vec<String> = countries.into_iter().filter(|c| !c.is_empty()).collect();
        countries.sort();
        countries.dedup();
        let layout = Layout::new(countries.len() + 1, config.embedding_dim, context_dim, config.hidden_dim);
        let mut rng = TrainRng::seed_from_u64(config.seed);
        let mut params = vec![0.0; layout.total];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, rng: &mut TrainRng| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.gen_range(-bound..=bound);
            }
        };
        let l = layout;
        fill(l.country..l.class, l.embed, &mut rng);
        fill(l.class..l.proj, l.embed, &mut rng);
        fill(l.proj..l.w1, l.context, &mut rng);
        fill(l.w1..l.w2, INPUT_DIM, &mut rng);
        fill(l.w2..l.null_bias, l.hidden, &mut rng);
        Self::from_parts(config, context_dim, countries, params)
    }

    pub(crate) fn from_parts(
        config: RankerConfig,
        context_dim: usize,
        countries: Vec<String>,
        params: Vec<f64>,
    ) -> Result<Self, RankerError> {
        let layout = Layout::new(countries.len() + 1, config.embedding_dim, context_dim, config.hidden_dim);
        if params.len() != layout.total {
            return Err(RankerError::InvalidConfig(format!(
                "expected {} parameters, found {}",
                layout.total,
                params.len()
            )));
        }
        let country_rows = countries
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i + 1))
            .collect();
        Ok(RankerModel {
            config,
            context_dim,
            countries,
            country_rows,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &RankerConfig {
        &self.config
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn null_bias(&self) -> f64 {
        self.params[self.layout.null_bias]
    }

    pub fn set_null_bias(&mut self, value: f64) {
        self.params[self.layout.null_bias] = value;
    }

    /// Embedding row for a country code; unknown codes map to the OOV row 0.
    pub fn country_row(&self, code: &str) -> usize {
        self.country_rows.get(code).copied().unwrap_or(0)
    }

    pub fn class_row(&self, class: FeatureClass) -> usize {
        class.ordinal() + 1
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout
    }

    fn check_inputs(&self, features: &[CandidateFeatures], context: &ContextVectors) -> Result<(), RankerError> {
        match context.dimension() {
            Some(d) if d == self.context_dim => {}
            found => {
                return Err(RankerError::DimensionMismatch {
                    expected: self.context_dim,
                    found: found.unwrap_or(0),
                })
            }
        }
        if !context.is_finite() || !features.iter().all(CandidateFeatures::is_finite) {
            return Err(RankerError::NonFiniteInput);
        }
        Ok(())
    }

    /// Scores candidates in inference mode (no dropout).
    pub fn score_candidates(
        &self,
        features: &[CandidateFeatures],
        context: &ContextVectors,
    ) -> Result<ScoredCandidateSet, RankerError> {
        self.check_inputs(features, context)?;
        Ok(self.forward(features, context, None).scored())
    }

    /// Scores candidates in training mode: dropout masks are drawn from `rng`.
    pub fn score_candidates_training(
        &self,
        features: &[CandidateFeatures],
        context: &ContextVectors,
        rng: &mut TrainRng,
    ) -> Result<ScoredCandidateSet, RankerError> {
        self.check_inputs(features, context)?;
        Ok(self.forward(features, context, Some(rng)).scored())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RankerError {
    #[error("invalid ranker configuration: {0}")]
    InvalidConfig(String),
    #[error("context dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in candidate features or context vectors")]
    NonFiniteInput,
    #[error("training produced a non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("gold slot {gold} out of range for {slots} slots")]
    InvalidGold { gold: usize, slots: usize },
    #[error("model file I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file has format version {found}, this build reads version {expected}")]
    Incompatible { found: u32, expected: u32 },
    #[error("model file is corrupt: {0}")]
    Corrupt(String),
}
