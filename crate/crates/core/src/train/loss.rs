use std::f64::consts::LN_2;

/// Cross-entropy of `softmax(logits)` against `target`, in nats, and its
/// gradient `softmax(logits) - onehot(target)`.
pub fn softmax_cross_entropy(logits: &[f32], target: u8) -> (f64, Vec<f32>) {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = logits.iter().map(|&l| (l as f64 - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let t = target as usize;
    let loss = total.ln() - (logits[t] as f64 - max);
    let mut grad: Vec<f32> = exps.iter().map(|e| (e / total) as f32).collect();
    grad[t] -= 1.0;
    (loss, grad)
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}
