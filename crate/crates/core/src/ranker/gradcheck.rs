use super::{RankerModel, TrainingExample};

/// Gradients smaller than this are compared in absolute rather than relative
/// terms.
const GRAD_FLOOR: f64 = 1e-6;

/// Largest relative error between the analytic gradient and central finite
/// differences `(L(p + eps) - L(p - eps)) / 2 eps`, over every parameter.
/// Dropout is off; the auxiliary country loss is included when configured.
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(model: &RankerModel, example: &TrainingExample, epsilon: f64) -> f64 {
    let gold_country = example.gold_country.as_deref().map(|c| model.country_row(c));
    let mut analytic = vec![0.0; model.parameters().len()];
    let pass = model.forward(&example.features, &example.context, None);
    model.backward(&pass, example.gold, gold_country, &mut analytic);

    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let original = probe.params[i];
        probe.params[i] = original + epsilon;
        let plus = probe.loss(&probe.forward(&example.features, &example.context, None), example.gold, gold_country);
        probe.params[i] = original - epsilon;
        let minus = probe.loss(&probe.forward(&example.features, &example.context, None), example.gold, gold_country);
        probe.params[i] = original;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
        worst = worst.max(rel);
    }
    worst
}

/// Analytic gradient of one example's loss (dropout off).
pub fn loss_gradient(model: &RankerModel, example: &TrainingExample) -> (f64, Vec<f64>) {
    let gold_country = example.gold_country.as_deref().map(|c| model.country_row(c));
    let mut grad = vec![0.0; model.parameters().len()];
    let pass = model.forward(&example.features, &example.context, None);
    let loss = model.backward(&pass, example.gold, gold_country, &mut grad);
    (loss, grad)
}
