use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{RankerConfig, RankerError, RankerModel, TrainRng};
use crate::features::{CandidateFeatures, ContextVectors};

/// Stream offset so shuffling/dropout never replay the initialization draws.
const TRAIN_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// One toponym: its candidate feature rows, context, and the gold slot
/// (`features.len()` for the null slot).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub features: Vec<CandidateFeatures>,
    pub context: ContextVectors,
    pub gold: usize,
    /// Country of the gold entry, used by the auxiliary country head; set
    /// even when the gold entry was removed from the candidates.
    pub gold_country: Option<String>,
}

impl TrainingExample {
    pub fn null_slot(&self) -> usize {
        self.features.len()
    }

    pub fn gold_is_null(&self) -> bool {
        self.gold == self.null_slot()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean mini-batch loss seen during the epoch (dropout on).
    pub running_loss: f64,
    /// Mean loss over the training set after the epoch (dropout off).
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub heldout_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
}

impl RankerModel {
    fn gold_country_row(&self, ex: &TrainingExample) -> Option<usize> {
        ex.gold_country.as_deref().map(|c| self.country_row(c))
    }

    /// Mean loss and accuracy in inference mode.
    pub fn evaluate_examples(&self, data: &[TrainingExample]) -> (f64, f64) {
        if data.is_empty() {
            return (0.0, 0.0);
        }
        let mut loss = 0.0;
        let mut correct = 0usize;
        for ex in data {
            let pass = self.forward(&ex.features, &ex.context, None);
            loss += self.loss(&pass, ex.gold, self.gold_country_row(ex));
            correct += usize::from(pass.predicted() == ex.gold);
        }
        (loss / data.len() as f64, correct as f64 / data.len() as f64)
    }
}

/// Mini-batch SGD on softmax cross-entropy.
///
/// Each epoch shuffles the training set with an RNG derived from
/// `config.seed`; the same RNG draws dropout masks, so a run is fully
/// determined by the seed and the data. Batch gradients are averaged over the
/// batch, and with gradient accumulation over the accumulated batches, before
/// the `param -= learning_rate * grad` step.
pub fn train(
    model: &mut RankerModel,
    train_set: &[TrainingExample],
    heldout: &[TrainingExample],
    config: &RankerConfig,
) -> Result<TrainingHistory, RankerError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(RankerError::EmptyDataset);
    }
    if config.embedding_dim != model.config().embedding_dim || config.hidden_dim != model.config().hidden_dim {
        return Err(RankerError::InvalidConfig(
            "training config does not match the model's embedding/hidden dimensions".into(),
        ));
    }
    for ex in train_set.iter().chain(heldout) {
        if ex.gold > ex.null_slot() {
            return Err(RankerError::InvalidGold {
                gold: ex.gold,
                slots: ex.null_slot() + 1,
            });
        }
        model.check_inputs(&ex.features, &ex.context)?;
    }
    model.config = config.clone();

    let mut rng = TrainRng::seed_from_u64(config.seed ^ TRAIN_STREAM);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let n_params = model.parameters().len();
    let mut batch_grad = vec![0.0; n_params];
    let mut step_grad = vec![0.0; n_params];
    let mut history = TrainingHistory::default();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut running = 0.0;
        let mut accumulated = 0usize;
        let batches: Vec<&[usize]> = order.chunks(config.batch_size).collect();
        for (b, batch) in batches.iter().enumerate() {
            batch_grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch.iter() {
                let ex = &train_set[i];
                let pass = model.forward(&ex.features, &ex.context, Some(&mut rng));
                batch_loss += model.backward(&pass, ex.gold, model.gold_country_row(ex), &mut batch_grad);
            }
            if !batch_loss.is_finite() || batch_grad.iter().any(|g| !g.is_finite()) {
                return Err(RankerError::NonFiniteLoss { epoch, batch: b });
            }
            running += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            for (s, g) in step_grad.iter_mut().zip(&batch_grad) {
                *s += g * scale;
            }
            accumulated += 1;
            if accumulated == config.gradient_accumulation_steps || b + 1 == batches.len() {
                let lr = config.learning_rate / accumulated as f64;
                for (p, g) in model.parameters_mut().iter_mut().zip(step_grad.iter_mut()) {
                    *p -= lr * *g;
                    *g = 0.0;
                }
                accumulated = 0;
            }
        }
        let (train_loss, train_accuracy) = model.evaluate_examples(train_set);
        let heldout_accuracy = (!heldout.is_empty()).then(|| model.evaluate_examples(heldout).1);
        let stats = EpochStats {
            epoch,
            running_loss: running / train_set.len() as f64,
            train_loss,
            train_accuracy,
            heldout_accuracy,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} (running {:.4}), train acc {:.3}{}",
            stats.train_loss,
            stats.running_loss,
            stats.train_accuracy,
            heldout_accuracy.map_or(String::new(), |a| format!(", held-out acc {a:.3}"))
        );
        history.epochs.push(stats);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::tests::{context, features, small_model};
    use rand::Rng;

    /// Gold is always the single exact-match candidate among 2-5 candidates.
    fn separable_set(n: usize, seed: u64) -> Vec<TrainingExample> {
        let mut rng = TrainRng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let k = rng.gen_range(2..=5);
                let gold = rng.gen_range(0..k);
                let feats = (0..k)
                    .map(|j| features(j == gold, rng.gen_range(0.0..6.0), ["US", "FR", "DE"][j % 3]))
                    .collect();
                TrainingExample {
                    features: feats,
                    context: context(16, seed * 1000 + i as u64),
                    gold,
                    gold_country: None,
                }
            })
            .collect()
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let data = separable_set(50, 11);
        let mut model = small_model(11);
        let config = model.config().clone();
        let history = train(&mut model, &data, &[], &config).unwrap();
        assert_eq!(history.epochs.len(), 15);
        assert_eq!(history.epochs.last().unwrap().train_accuracy, 1.0);
        for w in history.epochs[2..].windows(2) {
            assert!(w[1].train_loss <= w[0].train_loss, "{:?}", history.epochs);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let data = separable_set(20, 3);
        let mut model = small_model(3);
        let before = model.parameters().to_vec();
        let config = RankerConfig { learning_rate: 0.0, ..model.config().clone() };
        let history = train(&mut model, &data, &data, &config).unwrap();
        assert_eq!(model.parameters(), before.as_slice());
        let first = &history.epochs[0];
        assert!(history.epochs.iter().all(|e| e.train_loss == first.train_loss));
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let data = separable_set(40, 5);
        let run = || {
            let mut model = small_model(5);
            let config = RankerConfig { epochs: 4, batch_size: 7, ..model.config().clone() };
            train(&mut model, &data, &[], &config).unwrap();
            model.parameters().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn accumulation_and_multitask_train() {
        let mut data = separable_set(30, 8);
        for ex in &mut data {
            ex.gold_country = ex.features.get(ex.gold).map(|f| f.candidate_country.clone());
        }
        let mut model = small_model(8);
        let config = RankerConfig {
            epochs: 3,
            batch_size: 5,
            gradient_accumulation_steps: 3,
            multitask_country_weight: 0.5,
            ..model.config().clone()
        };
        let history = train(&mut model, &data, &[], &config).unwrap();
        assert!(history.epochs.iter().all(|e| e.train_loss.is_finite()));
    }

    #[test]
    fn rejects_bad_datasets() {
        let mut model = small_model(1);
        let config = model.config().clone();
        assert!(matches!(train(&mut model, &[], &[], &config), Err(RankerError::EmptyDataset)));
        let mut data = separable_set(2, 1);
        data[0].gold = 99;
        assert!(matches!(train(&mut model, &data, &[], &config), Err(RankerError::InvalidGold { .. })));
    }

    #[test]
    fn diverging_training_is_reported() {
        let data = separable_set(10, 2);
        let mut model = small_model(2);
        model.set_null_bias(f64::NAN);
        let config = model.config().clone();
        assert!(matches!(
            train(&mut model, &data, &[], &config),
            Err(RankerError::NonFiniteLoss { epoch: 1, .. })
        ));
    }
}
