//! Random media `J` for the spin system, built from Gaussian coordinates so
//! that their Γ data is known in closed form.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::statistics::Distribution;
use std::fmt;

/// Pairs `(i, j)` with `i > j` in row-major order; position `n` in this list
/// is the half-index of the pair.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (1..n).flat_map(|i| (0..i).map(move |j| (i, j))).collect()
}

pub fn n_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Half-index of the pair `{i, j}`, `i ≠ j`.
pub fn pair_index(i: usize, j: usize) -> usize {
    let (a, b) = if i > j { (i, j) } else { (j, i) };
    a * (a - 1) / 2 + b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MediumFamily {
    /// Independent standard normal entries; Γ ≡ 1.
    IidGaussian,
    /// Gaussian entries with `Cov(J_ij, J_kl) = (1 + |i−k| + |j−l|)^{−r}`.
    CorrelatedGaussian { r: f64 },
    /// `J_ij = Σ_{k≤m} (ξ_{ijk}² − 1)/√(2m)`; `m = None` means `m = N`.
    CltChaos2 {
        #[serde(default)]
        m: Option<usize>,
    },
}

impl fmt::Display for MediumFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IidGaussian => write!(f, "iid-gaussian"),
            Self::CorrelatedGaussian { r } => write!(f, "correlated-gaussian(r={r})"),
            Self::CltChaos2 { m: Some(m) } => write!(f, "clt-chaos2(m={m})"),
            Self::CltChaos2 { m: None } => write!(f, "clt-chaos2(m=N)"),
        }
    }
}

impl MediumFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::CorrelatedGaussian { r } if !(r > 2.0) => {
                Err(Error::InvalidArgument(format!("correlation exponent must exceed 2, got {r}")))
            }
            Self::CltChaos2 { m: Some(0) } => Err(Error::InvalidArgument("chaos depth m must be at least 1".into())),
            _ => Ok(()),
        }
    }

    /// Chaos depth for system size `n`.
    pub fn depth(&self, n: usize) -> usize {
        match *self {
            Self::CltChaos2 { m } => m.unwrap_or(n),
            _ => 1,
        }
    }

    /// Exact Γ_{J_a, J_b} between distinct half-indices `a ≠ b`.
    pub fn gamma_cross(&self, n: usize, a: usize, b: usize) -> f64 {
        match *self {
            Self::CorrelatedGaussian { r } => {
                let p = pairs(n);
                correlation(r, p[a], p[b])
            }
            _ => 0.0,
        }
    }
}

fn correlation(r: f64, (i, j): (usize, usize), (k, l): (usize, usize)) -> f64 {
    (1.0 + i.abs_diff(k) as f64 + j.abs_diff(l) as f64).powf(-r)
}

/// One realization of the medium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Medium {
    pub n: usize,
    pub family: MediumFamily,
    /// Entries `J_n` in half-index order.
    pub couplings: Vec<f64>,
    /// Γ_{J_n, J_n} in half-index order.
    pub gamma_diag: Vec<f64>,
}

impl Medium {
    /// A fixed medium with the Γ data of an independent Gaussian family.
    pub fn fixed(n: usize, couplings: Vec<f64>) -> Result<Self> {
        if couplings.len() != n_pairs(n) {
            return Err(Error::DimensionMismatch {
                expected: n_pairs(n),
                got: couplings.len(),
            });
        }
        Ok(Self {
            n,
            family: MediumFamily::IidGaussian,
            gamma_diag: vec![1.0; couplings.len()],
            couplings,
        })
    }

    /// Symmetric matrix view with a zero diagonal.
    pub fn matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n);
        for (k, (i, j)) in pairs(self.n).into_iter().enumerate() {
            m[(i, j)] = self.couplings[k];
            m[(j, i)] = self.couplings[k];
        }
        m
    }

    pub fn gamma_cross(&self, a: usize, b: usize) -> f64 {
        if a == b {
            self.gamma_diag[a]
        } else {
            self.family.gamma_cross(self.n, a, b)
        }
    }
}

/// Maps Gaussian coordinates to media for one family and size.
#[derive(Debug, Clone)]
pub struct MediumSampler {
    n: usize,
    family: MediumFamily,
    whitener: Option<Matrix>,
}

impl MediumSampler {
    pub fn new(family: MediumFamily, n: usize) -> Result<Self> {
        family.validate()?;
        if n < 2 {
            return Err(Error::InvalidArgument("system size must be at least 2".into()));
        }
        let whitener = match family {
            MediumFamily::CorrelatedGaussian { r } => {
                let p = pairs(n);
                let cov = Matrix::from_fn(p.len(), |a, b| correlation(r, p[a], p[b]));
                Some(cholesky(&cov, 1e-13)?)
            }
            _ => None,
        };
        Ok(Self { n, family, whitener })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> MediumFamily {
        self.family
    }

    /// Number of Gaussian coordinates behind one medium.
    pub fn coordinate_dim(&self) -> usize {
        n_pairs(self.n) * self.family.depth(self.n)
    }

    /// Couplings (half-index order) from coordinates.
    pub fn couplings_into(&self, xi: &[f64], out: &mut [f64]) {
        match self.family {
            MediumFamily::IidGaussian => out.copy_from_slice(xi),
            MediumFamily::CorrelatedGaussian { .. } => self.whitener.as_ref().unwrap().mul_vec_into(xi, out),
            MediumFamily::CltChaos2 { .. } => {
                let m = self.family.depth(self.n);
                let scale = (2.0 * m as f64).sqrt().recip();
                for (k, o) in out.iter_mut().enumerate() {
                    *o = xi[k * m..(k + 1) * m].iter().map(|x| x * x - 1.0).sum::<f64>() * scale;
                }
            }
        }
    }

    /// Chain rule: coordinate gradient from a coupling gradient.
    pub fn pull_back_into(&self, xi: &[f64], d_couplings: &[f64], out: &mut [f64]) {
        match self.family {
            MediumFamily::IidGaussian => out.copy_from_slice(d_couplings),
            MediumFamily::CorrelatedGaussian { .. } => self.whitener.as_ref().unwrap().mul_t_vec_into(d_couplings, out),
            MediumFamily::CltChaos2 { .. } => {
                let m = self.family.depth(self.n);
                let scale = (2.0 / m as f64).sqrt();
                for (k, g) in d_couplings.iter().enumerate() {
                    for l in k * m..(k + 1) * m {
                        out[l] = g * scale * xi[l];
                    }
                }
            }
        }
    }

    /// Builds the medium with exact Γ data from coordinates.
    pub fn from_coordinates(&self, xi: &[f64]) -> Medium {
        let np = n_pairs(self.n);
        let mut couplings = vec![0.0; np];
        self.couplings_into(xi, &mut couplings);
        let gamma_diag = match self.family {
            MediumFamily::CltChaos2 { .. } => {
                let m = self.family.depth(self.n);
                (0..np)
                    .map(|k| xi[k * m..(k + 1) * m].iter().map(|x| x * x).sum::<f64>() / m as f64)
                    .collect()
            }
            _ => vec![1.0; np],
        };
        Medium {
            n: self.n,
            family: self.family,
            couplings,
            gamma_diag,
        }
    }

    /// Medium built from one standard normal per entry so that different
    /// families can share randomness: Gaussian families use it directly
    /// (through the covariance factor), chaos-2 entries are obtained by the
    /// χ²_m quantile transform, which preserves each entry's law.
    pub fn from_base_gaussians(&self, z: &[f64]) -> Medium {
        let np = n_pairs(self.n);
        assert_eq!(z.len(), np, "one base normal per entry");
        match self.family {
            MediumFamily::CltChaos2 { .. } => {
                let m = self.family.depth(self.n);
                let chi = ChiSquared::new(m as f64).expect("positive degrees of freedom");
                let std_normal = Normal::standard();
                let (scale, slope) = ((2.0 * m as f64).sqrt().recip(), (2.0 / m as f64).sqrt());
                let couplings: Vec<f64> = z
                    .iter()
                    .map(|&x| {
                        // invert through the smaller tail to keep precision
                        let q = if x <= 0.0 {
                            chi.inverse_cdf(std_normal.cdf(x))
                        } else {
                            chi_upper_quantile(&chi, std_normal.sf(x))
                        };
                        (q - m as f64) * scale
                    })
                    .collect();
                let gamma_diag = couplings.iter().map(|j| 1.0 + slope * j).collect();
                Medium {
                    n: self.n,
                    family: self.family,
                    couplings,
                    gamma_diag,
                }
            }
            _ => self.from_coordinates(z),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Medium {
        let xi: Vec<f64> = (0..self.coordinate_dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.from_coordinates(&xi)
    }
}

/// Upper quantile: the `x` with `P(X > x) = tail`, by bisection on the
/// survival function.
fn chi_upper_quantile(chi: &ChiSquared, tail: f64) -> f64 {
    let mut hi = chi.mean().unwrap_or(1.0).max(1.0);
    while chi.sf(hi) > tail {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi.sf(mid) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn medium_sample<R: Rng + ?Sized>(family: MediumFamily, n: usize, rng: &mut R) -> Result<Medium> {
    Ok(MediumSampler::new(family, n)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::stream_rng;
    use crate::stats::RunningStats;

    #[test]
    fn half_index_bijection() {
        for (k, (i, j)) in pairs(7).into_iter().enumerate() {
            assert_eq!(pair_index(i, j), k);
            assert_eq!(pair_index(j, i), k);
        }
        assert_eq!(pairs(7).len(), n_pairs(7));
    }

    #[test]
    fn iid_gamma_is_one() {
        let m = medium_sample(MediumFamily::IidGaussian, 5, &mut stream_rng(1, 0)).unwrap();
        assert!(m.gamma_diag.iter().all(|&g| g == 1.0));
        assert_eq!(m.gamma_cross(0, 3), 0.0);
        let j = m.matrix();
        assert_eq!(j[(3, 1)], j[(1, 3)]);
        assert_eq!(j[(2, 2)], 0.0);
    }

    #[test]
    fn chaos_gamma_has_unit_mean() {
        let s = MediumSampler::new(MediumFamily::CltChaos2 { m: Some(3) }, 4).unwrap();
        let mut rng = stream_rng(2, 0);
        let (mut g, mut j2) = (RunningStats::new(), RunningStats::new());
        for _ in 0..20_000 {
            let m = s.sample(&mut rng);
            g.push(m.gamma_diag[0]);
            j2.push(m.couplings[0] * m.couplings[0]);
            // Γ = 1 + J·√(2/m) for this family
            assert!((m.gamma_diag[2] - 1.0 - m.couplings[2] * (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        }
        assert!((g.mean() - 1.0).abs() < 3.0 * g.std_error());
        assert!((j2.mean() - 1.0).abs() < 3.0 * j2.std_error());
    }

    #[test]
    fn quantile_coupling_preserves_chaos_law() {
        let s = MediumSampler::new(MediumFamily::CltChaos2 { m: Some(2) }, 3).unwrap();
        let mut rng = stream_rng(5, 0);
        let (mut j, mut j2, mut j3) = (RunningStats::new(), RunningStats::new(), RunningStats::new());
        for _ in 0..40_000 {
            let z: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let m = s.from_base_gaussians(&z);
            let x = m.couplings[1];
            j.push(x);
            j2.push(x * x);
            j3.push(x * x * x);
            assert!((m.gamma_diag[1] - 1.0 - x).abs() < 1e-12);
        }
        // (χ²_2 − 2)/2 has mean 0, variance 1, third moment 2
        assert!(j.mean().abs() < 3.0 * j.std_error());
        assert!((j2.mean() - 1.0).abs() < 3.0 * j2.std_error());
        assert!((j3.mean() - 2.0).abs() < 3.0 * j3.std_error());
        // exponential with rate 1/2: quantile is -2 ln(1-p)
        let z = [1.3, -0.4, 0.0];
        let m = s.from_base_gaussians(&z);
        let p = Normal::standard().sf(1.3);
        assert!((m.couplings[0] - (-2.0 * p.ln() - 2.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn correlated_cross_gamma() {
        let f = MediumFamily::CorrelatedGaussian { r: 3.0 };
        let a = pair_index(2, 0);
        let b = pair_index(3, 1);
        assert!((f.gamma_cross(4, a, b) - 3f64.powi(-3)).abs() < 1e-15);
        assert!(MediumFamily::CorrelatedGaussian { r: 2.0 }.validate().is_err());
    }

    #[test]
    fn correlated_sample_covariance() {
        let f = MediumFamily::CorrelatedGaussian { r: 3.0 };
        let s = MediumSampler::new(f, 4).unwrap();
        let mut rng = stream_rng(3, 0);
        let (a, b) = (pair_index(1, 0), pair_index(2, 0));
        let mut st = RunningStats::new();
        for _ in 0..50_000 {
            let m = s.sample(&mut rng);
            st.push(m.couplings[a] * m.couplings[b]);
        }
        assert!((st.mean() - f.gamma_cross(4, a, b)).abs() < 3.0 * st.std_error());
    }
}
