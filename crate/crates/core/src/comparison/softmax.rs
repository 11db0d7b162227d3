//! Soft-max (log-sum-exp) and the interpolation weights derived from it.

/// `(1/β)·log Σ e^{β v_i}`, computed with the maximum factored out.
pub fn softmax_sup(beta: f64, v: &[f64]) -> f64 {
    assert!(beta > 0.0, "beta must be positive");
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if v.is_empty() || !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|x| (beta * (x - m)).exp()).sum();
    // s ≥ 1 because the maximal term contributes exactly 1
    m + s.ln() / beta
}

/// Upper end of the sandwich `max v ≤ softmax_sup ≤ max v + log(d)/β`.
pub fn sandwich_gap(beta: f64, d: usize) -> f64 {
    (d as f64).ln() / beta
}

/// Normalized weights `e^{β z_i} / Σ_j e^{β z_j}` with `z = √(1−t)·y + √t·x`.
pub fn h_weights(t: f64, beta: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    h_weights_into(t, beta, x, y, &mut out);
    out
}

pub fn h_weights_into(t: f64, beta: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
    assert_eq!(x.len(), y.len(), "x and y must have the same length");
    let (a, b) = ((1.0 - t).sqrt(), t.sqrt());
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = a * yi + b * xi;
    }
    softmax_weights_into(beta, out);
}

/// Replaces `z` by its Gibbs weights `e^{β z_i}/Σ e^{β z_j}`.
pub fn softmax_weights_into(beta: f64, z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (beta * (*v - m)).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::stream_rng;
    use rand::Rng;

    #[test]
    fn two_equal_entries() {
        assert!((softmax_sup(1.0, &[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn dominant_entry() {
        let s = softmax_sup(100.0, &[5.0, 0.0]);
        assert!((s - 5.0).abs() < 1e-15);
    }

    #[test]
    fn sandwich_on_random_vectors() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..1000 {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let s = softmax_sup(2.0, &v);
            let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(m <= s && s <= m + sandwich_gap(2.0, 3));
        }
    }

    #[test]
    fn weights_uniform_at_origin() {
        let h = h_weights(0.3, 2.0, &[0.0; 4], &[0.0; 4]);
        assert!(h.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn weights_concentrate_with_beta() {
        let mut prev = 0.0;
        for beta in [1.0, 4.0, 16.0, 64.0] {
            let h = h_weights(0.5, beta, &[1.0, 0.0], &[1.0, 0.0]);
            assert!(h[0] > prev);
            prev = h[0];
        }
        assert!(prev > 1.0 - 1e-12);
    }
}
