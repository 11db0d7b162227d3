//! Fractional Brownian motion on a finite time grid, sampled through the
//! Cholesky factor of its increment covariance.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix};
use crate::wiener::WienerSpace;
use rand::Rng;
use std::sync::Arc;

/// `½(s^{2H} + t^{2H} − |t−s|^{2H})`.
pub fn fbm_cov(h: f64, s: f64, t: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * (s.powf(e) + t.powf(e) - (t - s).abs().powf(e))
}

/// Grid `0 = t₀ < … < t_m` with the increment-basis Wiener space attached.
#[derive(Debug, Clone)]
pub struct FbmGrid {
    hurst: f64,
    times: Vec<f64>,
    space: Arc<WienerSpace>,
}

impl FbmGrid {
    pub fn new(hurst: f64, times: Vec<f64>) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(Error::InvalidArgument(format!("Hurst index must lie in (1/2, 1), got {hurst}")));
        }
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::InvalidArgument("time grid must start at 0 and have at least one step".into()));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!("time grid not strictly increasing at index {}", k + 1)));
        }
        let m = times.len() - 1;
        let cov = Matrix::from_fn(m, |i, j| increment_cov(hurst, &times, i, j));
        let l = cholesky(&cov, 0.0)?;
        if let Some(k) = (0..m).find(|&k| !(l[(k, k)] > 1e-12 * cov[(k, k)].sqrt())) {
            return Err(Error::Cholesky {
                index: k,
                pivot: l[(k, k)] * l[(k, k)],
            });
        }
        let space = Arc::new(WienerSpace::with_gram(cov)?);
        Ok(Self { hurst, times, space })
    }

    /// `m` equal steps on `[0, T]`.
    pub fn uniform(hurst: f64, horizon: f64, m: usize) -> Result<Self> {
        if m == 0 || !(horizon > 0.0) {
            return Err(Error::InvalidArgument("need a positive horizon and at least one step".into()));
        }
        Self::new(hurst, (0..=m).map(|k| horizon * k as f64 / m as f64).collect())
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn step(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    /// Wiener space whose coordinate `k` is the increment over `(t_k, t_{k+1}]`.
    pub fn space(&self) -> &Arc<WienerSpace> {
        &self.space
    }

    /// Increments `X = Lξ` from whitened coordinates.
    pub fn increments_into(&self, xi: &[f64], out: &mut [f64]) {
        self.space.coordinates_into(xi, out);
    }
}

fn increment_cov(h: f64, t: &[f64], i: usize, j: usize) -> f64 {
    let c = |a: f64, b: f64| fbm_cov(h, a, b);
    c(t[i + 1], t[j + 1]) - c(t[i + 1], t[j]) - c(t[i], t[j + 1]) + c(t[i], t[j])
}

/// One fBm path on the grid together with its whitened coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub xi: Vec<f64>,
    pub increments: Vec<f64>,
    /// `B^H(t_k)` for `k = 0..=m`, starting at 0.
    pub values: Vec<f64>,
}

impl FbmPath {
    pub fn from_coordinates(grid: &FbmGrid, xi: Vec<f64>) -> Self {
        let mut increments = vec![0.0; grid.steps()];
        grid.increments_into(&xi, &mut increments);
        let mut values = Vec::with_capacity(increments.len() + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for x in &increments {
            acc += x;
            values.push(acc);
        }
        Self { xi, increments, values }
    }
}

pub fn fbm_sample<R: Rng + ?Sized>(grid: &FbmGrid, rng: &mut R) -> FbmPath {
    FbmPath::from_coordinates(grid, grid.space().sample(rng).coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::stream_rng;
    use crate::stats::RunningStats;

    #[test]
    fn covariance_examples() {
        assert!((fbm_cov(0.7, 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((fbm_cov(0.7, 1.0, 2.0) - 2f64.powf(0.4)).abs() < 1e-14);
        assert!((fbm_cov(0.5, 0.3, 0.8) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(FbmGrid::uniform(0.5, 1.0, 8).is_err());
        assert!(FbmGrid::new(0.7, vec![0.0, 0.5, 0.5]).is_err());
        assert!(FbmGrid::new(0.7, vec![0.1, 0.5]).is_err());
    }

    #[test]
    fn increments_sum_to_path_covariance() {
        let g = FbmGrid::uniform(0.7, 1.0, 16).unwrap();
        let cov = g.space().gram();
        let total: f64 = cov.as_slice().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_has_right_variance() {
        let g = FbmGrid::uniform(0.7, 2.0, 32).unwrap();
        let a = fbm_sample(&g, &mut stream_rng(4, 0));
        let b = fbm_sample(&g, &mut stream_rng(4, 0));
        assert_eq!(a, b);
        let mut rng = stream_rng(5, 0);
        let mut end = RunningStats::new();
        let mut cross = RunningStats::new();
        for _ in 0..100_000 {
            let p = fbm_sample(&g, &mut rng);
            end.push(p.values[32] * p.values[32]);
            cross.push(p.values[16] * p.values[32]);
        }
        assert!((end.mean() - 2f64.powf(1.4)).abs() < 3.0 * end.std_error());
        assert!((cross.mean() - fbm_cov(0.7, 1.0, 2.0)).abs() < 3.0 * cross.std_error());
    }
}
