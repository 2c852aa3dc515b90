//! Numeric primitives shared by the engine and the attribution scorers.

use ndarray::{Array1, ArrayView1};

use crate::model::{Activation, NormFamily, NormWeights};

pub const NORM_EPS: f32 = 1e-5;
pub const ROTARY_BASE: f32 = 10_000.0;

pub fn activate(kind: Activation, x: f32) -> f32 {
    match kind {
        Activation::Relu => x.max(0.0),
        Activation::Silu => x / (1.0 + (-x).exp()),
        Activation::Gelu => {
            // tanh approximation
            let c = (2.0_f32 / std::f32::consts::PI).sqrt();
            0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
        }
    }
}

pub fn apply_norm(family: NormFamily, norm: &NormWeights, x: &ArrayView1<f32>) -> Array1<f32> {
    let d = x.len() as f32;
    let mut out = match family {
        NormFamily::PreRmsnorm => {
            let ms = x.iter().map(|v| v * v).sum::<f32>() / d;
            let inv = 1.0 / (ms + NORM_EPS).sqrt();
            x.mapv(|v| v * inv)
        }
        NormFamily::PreLayernorm => {
            let mean = x.sum() / d;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / d;
            let inv = 1.0 / (var + NORM_EPS).sqrt();
            x.mapv(|v| (v - mean) * inv)
        }
    };
    out *= &norm.scale;
    if let Some(bias) = &norm.bias {
        out += bias;
    }
    out
}

/// In-place stable softmax over a mutable slice.
pub fn softmax_inplace(xs: &mut [f32]) {
    let max = xs.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for v in xs.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in xs.iter_mut() {
        *v /= sum;
    }
}

/// log(sum(exp(x))) accumulated in f64 for stable log-probabilities.
pub fn logsumexp_f64(xs: &[f32]) -> f64 {
    let max = xs.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let sum: f64 = xs.iter().map(|&v| ((v as f64) - max).exp()).sum();
    max + sum.ln()
}

/// log p(target) under softmax(logits).
pub fn log_softmax_pick(logits: &[f32], target: usize) -> f64 {
    logits[target] as f64 - logsumexp_f64(logits)
}

/// Rotate query/key pairs in place for one position (standard rotary scheme:
/// dimension pairs (2i, 2i+1) at frequency base^(-2i/d)).
pub fn apply_rotary(vec: &mut [f32], position: usize) {
    let d = vec.len();
    let half = d / 2;
    for i in 0..half {
        let theta = (position as f32) * ROTARY_BASE.powf(-2.0 * (i as f32) / (d as f32));
        let (sin, cos) = theta.sin_cos();
        let a = vec[2 * i];
        let b = vec[2 * i + 1];
        vec[2 * i] = a * cos - b * sin;
        vec[2 * i + 1] = a * sin + b * cos;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_sums_to_one() {
        let mut xs = vec![0.5, -1.0, 3.0, 0.0];
        softmax_inplace(&mut xs);
        let sum: f32 = xs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn activations_at_zero() {
        assert_eq!(activate(Activation::Relu, 0.0), 0.0);
        assert_eq!(activate(Activation::Silu, 0.0), 0.0);
        assert_eq!(activate(Activation::Gelu, 0.0), 0.0);
        assert!(activate(Activation::Gelu, -0.5) < 0.0);
    }

    #[test]
    fn rmsnorm_is_scale_invariant() {
        let norm = NormWeights::ones(4);
        let x = array![1.0f32, 2.0, -1.0, 0.5];
        let y = x.mapv(|v| v * 37.0);
        let nx = apply_norm(NormFamily::PreRmsnorm, &norm, &x.view());
        let ny = apply_norm(NormFamily::PreRmsnorm, &norm, &y.view());
        for (a, b) in nx.iter().zip(ny.iter()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn rotary_preserves_norm_and_is_identity_at_zero() {
        let mut v = vec![0.3f32, -0.7, 1.1, 0.2];
        let before = v.clone();
        apply_rotary(&mut v, 0);
        assert_eq!(v, before);
        apply_rotary(&mut v, 5);
        let n0: f32 = before.iter().map(|x| x * x).sum();
        let n1: f32 = v.iter().map(|x| x * x).sum();
        assert!((n0 - n1).abs() < 1e-5);
    }

    #[test]
    fn log_softmax_pick_matches_direct() {
        let logits = vec![0.1f32, 2.0, -0.5];
        let mut probs = logits.clone();
        softmax_inplace(&mut probs);
        let lp = log_softmax_pick(&logits, 1);
        assert!((lp - (probs[1] as f64).ln()).abs() < 1e-6);
    }
}
