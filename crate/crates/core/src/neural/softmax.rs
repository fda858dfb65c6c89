/// Below this temperature sampling collapses to argmax.
pub const TEMPERATURE_EPSILON: f64 = 1e-3;

/// `q_i = exp(z_i / T) / Σ_j exp(z_j / T)`, evaluated with max subtraction.
///
/// For `T < TEMPERATURE_EPSILON` the result is one-hot at the first maximal
/// logit.
pub fn temperature_softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    if logits.is_empty() {
        return Vec::new();
    }
    if temperature < TEMPERATURE_EPSILON {
        let mut q = vec![0.0; logits.len()];
        q[argmax(logits)] = 1.0;
        return q;
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut q: Vec<f64> = logits.iter().map(|z| ((z - max) / temperature).exp()).collect();
    let sum: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= sum);
    q
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `ln Σ exp(z)` without overflow.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}
