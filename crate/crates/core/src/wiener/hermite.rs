//! Probabilists' Hermite polynomials: `H_0 = 1`, `H_1 = x`,
//! `H_{q+1} = x H_q - q H_{q-1}`.

pub fn hermite(q: u32, x: f64) -> f64 {
    hermite_pair(q, x).0
}

/// `(H_q(x), H_q'(x))`, using `H_q' = q H_{q-1}`.
pub fn hermite_pair(q: u32, x: f64) -> (f64, f64) {
    match q {
        0 => (1.0, 0.0),
        1 => (x, 1.0),
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            for k in 1..q {
                let next = x * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            (cur, q as f64 * prev)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_orders() {
        assert_eq!(hermite(2, 2.0), 3.0);
        assert_eq!(hermite(3, 1.0), -2.0);
        assert_eq!(hermite(4, 0.0), 3.0);
        assert_eq!(hermite(0, 17.0), 1.0);
    }

    #[test]
    fn closed_forms() {
        for &x in &[-2.5, -0.3, 0.0, 0.7, 1.9] {
            let x2: f64 = x * x;
            assert!((hermite(3, x) - (x2 * x - 3.0 * x)).abs() < 1e-12);
            assert!((hermite(4, x) - (x2 * x2 - 6.0 * x2 + 3.0)).abs() < 1e-12);
            let (_, d) = hermite_pair(4, x);
            assert!((d - (4.0 * x2 * x - 12.0 * x)).abs() < 1e-12);
        }
    }
}
