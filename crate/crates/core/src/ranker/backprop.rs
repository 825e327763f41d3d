//! Forward pass with cached activations and the matching hand-written
//! backward pass.

use rand::Rng;

use super::{argmax, sigmoid, softmax, RankerModel, ScoreMode, ScoredCandidateSet, TrainRng, INPUT_DIM, POPULATION_INPUT};
use crate::features::{CandidateFeatures, ContextVectors};

/// Keeps the cosine smooth (and zero) at zero-length vectors.
const COS_EPS: f64 = 1e-8;

struct CandidatePass {
    country_row: usize,
    class_row: usize,
    /// Similarities (country x {mention, others, document}, then class x the
    /// same) and numeric features, after dropout.
    input: [f64; INPUT_DIM],
    mask: Option<[f64; INPUT_DIM]>,
    hidden: Vec<f64>,
    raw: f64,
}

pub(crate) struct ForwardPass<'a> {
    context: [&'a [f64]; 3],
    /// Projected context vectors, each of the embedding dimension.
    projected: [Vec<f64>; 3],
    candidates: Vec<CandidatePass>,
    null_raw: f64,
    probabilities: Vec<f64>,
    mode: ScoreMode,
}

impl ForwardPass<'_> {
    pub fn scored(&self) -> ScoredCandidateSet {
        ScoredCandidateSet {
            probabilities: self.probabilities.clone(),
            raw_scores: self.candidates.iter().map(|c| c.raw).collect(),
            null_score: self.null_raw,
            predicted: argmax(&self.probabilities),
        }
    }

    pub fn predicted(&self) -> usize {
        argmax(&self.probabilities)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smoothed cosine `a.b / sqrt((|a|^2 + eps)(|b|^2 + eps))` and its gradients.
fn smooth_cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / ((dot(a, a) + COS_EPS) * (dot(b, b) + COS_EPS)).sqrt()
}

fn smooth_cosine_backward(a: &[f64], b: &[f64], upstream: f64, grad_a: &mut [f64], grad_b: &mut [f64]) {
    let na = dot(a, a) + COS_EPS;
    let nb = dot(b, b) + COS_EPS;
    let den = (na * nb).sqrt();
    let c = dot(a, b) / den;
    for i in 0..a.len() {
        grad_a[i] += upstream * (b[i] / den - c * a[i] / na);
        grad_b[i] += upstream * (a[i] / den - c * b[i] / nb);
    }
}

impl RankerModel {
    pub(crate) fn forward<'a>(
        &self,
        features: &[CandidateFeatures],
        context: &'a ContextVectors,
        mut dropout_rng: Option<&mut TrainRng>,
    ) -> ForwardPass<'a> {
        let l = self.layout();
        let p = self.parameters();
        let ctx: [&[f64]; 3] = [&context.mention, &context.other_mentions, &context.document];
        let proj = &p[l.proj..l.w1];
        let projected: [Vec<f64>; 3] = ctx.map(|v| (0..l.embed).map(|r| dot(&proj[r * l.context..(r + 1) * l.context], v)).collect());

        let keep = 1.0 - self.config().dropout;
        let mut candidates = Vec::with_capacity(features.len());
        for f in features {
            let country_row = self.country_row(&f.candidate_country);
            let class_row = self.class_row(f.candidate_feature_class);
            let country = &p[l.country_row(country_row)];
            let class = &p[l.class_row(class_row)];
            let mut cos = [0.0; 6];
            for k in 0..3 {
                cos[k] = smooth_cosine(country, &projected[k]);
                cos[3 + k] = smooth_cosine(class, &projected[k]);
            }
            let mut input = [0.0; INPUT_DIM];
            input[..6].copy_from_slice(&cos);
            input[6..].copy_from_slice(&f.numeric());
            if !self.config().use_population {
                input[POPULATION_INPUT] = 0.0;
            }
            let mask = match dropout_rng.as_deref_mut() {
                Some(rng) if self.config().dropout > 0.0 => {
                    let mut m = [0.0; INPUT_DIM];
                    for (mi, xi) in m.iter_mut().zip(input.iter_mut()) {
                        *mi = if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 };
                        *xi *= *mi;
                    }
                    Some(m)
                }
                _ => None,
            };
            let w1 = &p[l.w1..l.b1];
            let b1 = &p[l.b1..l.w2];
            let hidden: Vec<f64> = (0..l.hidden)
                .map(|j| (dot(&w1[j * INPUT_DIM..(j + 1) * INPUT_DIM], &input) + b1[j]).tanh())
                .collect();
            let logit = dot(&p[l.w2..l.b2], &hidden) + p[l.b2];
            candidates.push(CandidatePass {
                country_row,
                class_row,
                input,
                mask,
                hidden,
                raw: logit,
            });
        }

        let mode = self.config().score_mode;
        let null_logit = p[l.null_bias];
        let mut slots: Vec<f64> = Vec::with_capacity(candidates.len() + 1);
        for c in &mut candidates {
            let logit = c.raw;
            c.raw = sigmoid(logit);
            slots.push(match mode {
                ScoreMode::SigmoidSoftmax => c.raw,
                ScoreMode::LogitSoftmax => logit,
            });
        }
        let null_raw = sigmoid(null_logit);
        slots.push(match mode {
            ScoreMode::SigmoidSoftmax => null_raw,
            ScoreMode::LogitSoftmax => null_logit,
        });
        let probabilities = softmax(&slots);
        ForwardPass {
            context: ctx,
            projected,
            candidates,
            null_raw,
            probabilities,
            mode,
        }
    }

    /// Loss of `pass` against `gold`, plus the optional auxiliary country loss.
    pub(crate) fn loss(&self, pass: &ForwardPass<'_>, gold: usize, gold_country: Option<usize>) -> f64 {
        let mut loss = -pass.probabilities[gold].max(f64::MIN_POSITIVE).ln();
        let weight = self.config().multitask_country_weight;
        if let (Some(row), true) = (gold_country, weight > 0.0) {
            let logits = self.country_logits(&pass.projected[2]);
            let q = softmax(&logits);
            loss += weight * -q[row].max(f64::MIN_POSITIVE).ln();
        }
        loss
    }

    fn country_logits(&self, document: &[f64]) -> Vec<f64> {
        let l = self.layout();
        let p = self.parameters();
        (0..l.country_rows).map(|r| dot(&p[l.country_row(r)], document)).collect()
    }

    /// Adds d(loss)/d(params) for one example into `grad` and returns the
    /// loss.
    pub(crate) fn backward(
        &self,
        pass: &ForwardPass<'_>,
        gold: usize,
        gold_country: Option<usize>,
        grad: &mut [f64],
    ) -> f64 {
        let l = *self.layout();
        let p = self.parameters();
        let loss = self.loss(pass, gold, gold_country);
        let mut grad_projected = [vec![0.0; l.embed], vec![0.0; l.embed], vec![0.0; l.embed]];

        // d loss / d softmax input
        let dslots: Vec<f64> = pass
            .probabilities
            .iter()
            .enumerate()
            .map(|(j, q)| q - f64::from(u8::from(j == gold)))
            .collect();

        let null_slot = pass.candidates.len();
        grad[l.null_bias] += match pass.mode {
            ScoreMode::SigmoidSoftmax => dslots[null_slot] * pass.null_raw * (1.0 - pass.null_raw),
            ScoreMode::LogitSoftmax => dslots[null_slot],
        };

        let mut dhidden = vec![0.0; l.hidden];
        for (j, c) in pass.candidates.iter().enumerate() {
            let dlogit = match pass.mode {
                ScoreMode::SigmoidSoftmax => dslots[j] * c.raw * (1.0 - c.raw),
                ScoreMode::LogitSoftmax => dslots[j],
            };
            grad[l.b2] += dlogit;
            for h in 0..l.hidden {
                grad[l.w2 + h] += dlogit * c.hidden[h];
                dhidden[h] = dlogit * p[l.w2 + h] * (1.0 - c.hidden[h] * c.hidden[h]);
            }
            let mut dinput = [0.0; INPUT_DIM];
            for (h, dh) in dhidden.iter().enumerate() {
                grad[l.b1 + h] += dh;
                let row = l.w1 + h * INPUT_DIM;
                for i in 0..INPUT_DIM {
                    grad[row + i] += dh * c.input[i];
                    dinput[i] += dh * p[row + i];
                }
            }
            if let Some(mask) = &c.mask {
                for (d, m) in dinput.iter_mut().zip(mask) {
                    *d *= m;
                }
            }
            let mut gcountry = vec![0.0; l.embed];
            let mut gclass = vec![0.0; l.embed];
            let country = &p[l.country_row(c.country_row)];
            let class = &p[l.class_row(c.class_row)];
            for k in 0..3 {
                smooth_cosine_backward(country, &pass.projected[k], dinput[k], &mut gcountry, &mut grad_projected[k]);
                smooth_cosine_backward(class, &pass.projected[k], dinput[3 + k], &mut gclass, &mut grad_projected[k]);
            }
            for (g, d) in grad[l.country_row(c.country_row)].iter_mut().zip(&gcountry) {
                *g += d;
            }
            for (g, d) in grad[l.class_row(c.class_row)].iter_mut().zip(&gclass) {
                *g += d;
            }
        }

        let weight = self.config().multitask_country_weight;
        if let (Some(gold_row), true) = (gold_country, weight > 0.0) {
            let q = softmax(&self.country_logits(&pass.projected[2]));
            for (r, qr) in q.iter().enumerate() {
                let dl = weight * (qr - f64::from(u8::from(r == gold_row)));
                let emb = l.country_row(r);
                for e in 0..l.embed {
                    grad[emb.start + e] += dl * pass.projected[2][e];
                    grad_projected[2][e] += dl * p[emb.start + e];
                }
            }
        }

        for k in 0..3 {
            let v = pass.context[k];
            for r in 0..l.embed {
                let g = grad_projected[k][r];
                if g == 0.0 {
                    continue;
                }
                let row = l.proj + r * l.context;
                for (c, vc) in v.iter().enumerate() {
                    grad[row + c] += g * vc;
                }
            }
        }
        loss
    }
}
