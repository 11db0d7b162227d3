//! Gauss–Legendre rules.

/// Nodes and weights of the `k`-point Gauss–Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre_unit(k: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(k);
    (
        x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|&v| 0.5 * v).collect(),
    )
}

/// Nodes (ascending) and weights of the `k`-point rule on `[-1, 1]`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(k, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(k, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one_on_unit_interval() {
        for k in [2, 5, 32, 64] {
            let (_, w) = gauss_legendre_unit(k);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn integrates_polynomials_exactly() {
        // k-point rule is exact to degree 2k-1
        let (x, w) = gauss_legendre_unit(4);
        for deg in 0..8 {
            let q: f64 = x.iter().zip(&w).map(|(u, v)| v * u.powi(deg)).sum();
            assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "deg={deg}");
        }
    }

    #[test]
    fn two_point_nodes() {
        let (x, _) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }
}
