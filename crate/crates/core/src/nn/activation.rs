/// Logistic sigmoid, stable for large `|z|`.
#[inline]
pub fn sigmoid_scalar(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| sigmoid_scalar(v)).collect()
}

pub fn tanh_vec(z: &[f64]) -> Vec<f64> {
    z.iter().map(|v| v.tanh()).collect()
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Probability floor applied inside [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

/// `−ln(max(p[label], 1e-12))`. Caller guarantees `label < probs.len()`.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}
