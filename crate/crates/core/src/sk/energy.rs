//! Hamiltonian, exact partition functions and Gibbs averages by enumeration.
//!
//! Couplings are rounded to a common binary fixed point and energies are kept
//! as `i128`, so every configuration's energy is an exact integer regardless
//! of how it was reached. Gray-code updates and direct evaluation therefore
//! produce identical exponents, and with a fixed block partition and
//! accumulation order identical log-partition values.

use super::media::{n_pairs, pairs, Medium};
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

pub const MAX_EXACT_N: usize = 24;
pub const MAX_GIBBS_N: usize = 20;
pub const MAX_PAIR_GIBBS_N: usize = 16;

/// Bits of fixed-point headroom for the largest coupling; the energy sum
/// over at most 276 pairs stays far below `i128::MAX`.
const FIXED_BITS: i32 = 100;
const BLOCK_LOG2: usize = 12;

/// `(2N)^{-1/2} Σ_{i≠j} σ_i σ_j J_ij` for a symmetric `J`, computed as
/// `(2/√(2N)) Σ_{i>j}`.
pub fn hamiltonian(sigma: &[i8], medium: &Medium) -> f64 {
    let n = medium.n;
    assert_eq!(sigma.len(), n, "spin vector length");
    let mut s = 0.0;
    for (k, (i, j)) in pairs(n).into_iter().enumerate() {
        s += (sigma[i] * sigma[j]) as f64 * medium.couplings[k];
    }
    s * prefactor(n)
}

fn prefactor(n: usize) -> f64 {
    2.0 / (2.0 * n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreeEnergyMethod {
    GrayCode,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEnergyResult {
    pub n: usize,
    pub beta: f64,
    /// `N^{-1} log Z` with `Z = 2^{-N} Σ_σ exp(-βH(σ))`.
    pub value: f64,
    pub method: FreeEnergyMethod,
}

/// Couplings on a common binary fixed point, as a dense symmetric matrix.
struct FixedCouplings {
    n: usize,
    q: Vec<i128>,
    /// exponent multiplier turning an integer energy into `-βH`
    slope: f64,
}

impl FixedCouplings {
    fn new(medium: &Medium, beta: f64) -> Result<Self> {
        let n = medium.n;
        if !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be finite, got {beta}")));
        }
        if let Some(bad) = medium.couplings.iter().find(|c| !c.is_finite()) {
            return Err(Error::Overflow(format!("non-finite coupling {bad}")));
        }
        let max_abs = medium.couplings.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let shift = if max_abs > 0.0 {
            FIXED_BITS - max_abs.log2().ceil() as i32
        } else {
            0
        };
        let up = 2f64.powi(shift);
        let mut q = vec![0i128; n * n];
        for (k, (i, j)) in pairs(n).into_iter().enumerate() {
            let v = (medium.couplings[k] * up).round() as i128;
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
        Ok(Self {
            n,
            q,
            slope: -beta * prefactor(n) * 2f64.powi(-shift),
        })
    }

    fn row(&self, i: usize) -> &[i128] {
        &self.q[i * self.n..(i + 1) * self.n]
    }

    /// Integer energy `Σ_{i>j} σ_i σ_j q_ij` from scratch.
    fn energy(&self, sigma: &[i8]) -> i128 {
        let mut e = 0i128;
        for i in 1..self.n {
            let row = self.row(i);
            for j in 0..i {
                let t = row[j];
                e += if sigma[i] == sigma[j] { t } else { -t };
            }
        }
        e
    }

    fn fields(&self, sigma: &[i8], h: &mut [i128]) {
        for (i, hi) in h.iter_mut().enumerate() {
            *hi = self
                .row(i)
                .iter()
                .zip(sigma)
                .map(|(&q, &s)| if s > 0 { q } else { -q })
                .sum();
        }
    }
}

#[inline]
fn gray(g: u64) -> u64 {
    g ^ (g >> 1)
}

fn spins_from_mask(mask: u64, sigma: &mut [i8]) {
    for (k, s) in sigma.iter_mut().enumerate() {
        *s = if (mask >> k) & 1 == 1 { -1 } else { 1 };
    }
}

/// Streaming log-sum-exp.
#[derive(Debug, Clone, Copy)]
struct Lse {
    max: f64,
    sum: f64,
}

impl Lse {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    fn push(&mut self, x: f64) {
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn merge(&mut self, o: Lse) {
        if o.max > self.max {
            self.sum = self.sum * (self.max - o.max).exp() + o.sum;
            self.max = o.max;
        } else if o.sum > 0.0 {
            self.sum += o.sum * (o.max - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// The last spin is pinned to +1 (global flip symmetry); the remaining
/// `2^{N-1}` configurations are visited in Gray order, split into
/// contiguous blocks.
fn enumerate(medium: &Medium, beta: f64, gray_updates: bool) -> Result<f64> {
    let n = medium.n;
    if n == 0 || n > MAX_EXACT_N {
        return Err(Error::TooLarge { n, limit: MAX_EXACT_N });
    }
    let fc = FixedCouplings::new(medium, beta)?;
    let free = n - 1;
    let total = 1u64 << free;
    let block_len = 1u64 << free.min(BLOCK_LOG2);
    let n_blocks = total / block_len;
    let blocks: Vec<Lse> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * block_len;
            let mut sigma = vec![1i8; n];
            spins_from_mask(gray(start), &mut sigma[..free]);
            let mut e = fc.energy(&sigma);
            let mut h = vec![0i128; n];
            if gray_updates {
                fc.fields(&sigma, &mut h);
            }
            let mut acc = Lse::new();
            acc.push(fc.slope * e as f64);
            for g in start + 1..start + block_len {
                if gray_updates {
                    let k = g.trailing_zeros() as usize;
                    let s = sigma[k];
                    // h excludes the diagonal, so flipping k changes E by -2σ_k h_k
                    e += if s > 0 { -2 * h[k] } else { 2 * h[k] };
                    let row = fc.row(k);
                    for (hj, &q) in h.iter_mut().zip(row) {
                        *hj += if s > 0 { -2 * q } else { 2 * q };
                    }
                    sigma[k] = -s;
                } else {
                    spins_from_mask(gray(g), &mut sigma[..free]);
                    e = fc.energy(&sigma);
                }
                acc.push(fc.slope * e as f64);
            }
            acc
        })
        .collect();
    let mut acc = Lse::new();
    for b in blocks {
        acc.merge(b);
    }
    // Z = 2^{-N} · 2 · Σ_{half}
    Ok((acc.value() - free as f64 * std::f64::consts::LN_2) / n as f64)
}

/// Exact `N^{-1} log Z` by Gray-code enumeration, `O(N 2^N)`.
pub fn free_energy_exact(medium: &Medium, beta: f64) -> Result<FreeEnergyResult> {
    Ok(FreeEnergyResult {
        n: medium.n,
        beta,
        value: enumerate(medium, beta, true)?,
        method: FreeEnergyMethod::GrayCode,
    })
}

/// Same visiting order and accumulation, energies recomputed from scratch.
pub fn free_energy_naive(medium: &Medium, beta: f64) -> Result<FreeEnergyResult> {
    Ok(FreeEnergyResult {
        n: medium.n,
        beta,
        value: enumerate(medium, beta, false)?,
        method: FreeEnergyMethod::Naive,
    })
}

/// Normalized Gibbs probabilities of all `2^N` configurations, indexed by
/// the bitmask of negative spins.
#[derive(Debug, Clone)]
pub struct GibbsTable {
    n: usize,
    probs: Vec<f64>,
}

impl GibbsTable {
    pub fn new(medium: &Medium, beta: f64) -> Result<Self> {
        let n = medium.n;
        if n == 0 || n > MAX_GIBBS_N {
            return Err(Error::TooLarge { n, limit: MAX_GIBBS_N });
        }
        let fc = FixedCouplings::new(medium, beta)?;
        let mut sigma = vec![1i8; n];
        let mut x: Vec<f64> = (0..1u64 << n)
            .map(|mask| {
                spins_from_mask(mask, &mut sigma);
                fc.slope * fc.energy(&sigma) as f64
            })
            .collect();
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in x.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        x.iter_mut().for_each(|v| *v /= z);
        Ok(Self { n, probs: x })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// `E_N[obs(σ)]`.
    pub fn expectation(&self, obs: impl Fn(&[i8]) -> f64) -> f64 {
        let mut sigma = vec![1i8; self.n];
        let mut s = 0.0;
        for (mask, &p) in self.probs.iter().enumerate() {
            spins_from_mask(mask as u64, &mut sigma);
            s += p * obs(&sigma);
        }
        s
    }

    /// `E_N ⊗ Ẽ_N[obs(σ, σ̃)]` over two independent copies.
    pub fn pair_expectation(&self, obs: impl Fn(&[i8], &[i8]) -> f64) -> Result<f64> {
        if self.n > MAX_PAIR_GIBBS_N {
            return Err(Error::TooLarge {
                n: self.n,
                limit: MAX_PAIR_GIBBS_N,
            });
        }
        let mut a = vec![1i8; self.n];
        let mut b = vec![1i8; self.n];
        let mut s = 0.0;
        for (ma, &pa) in self.probs.iter().enumerate() {
            spins_from_mask(ma as u64, &mut a);
            let mut inner = 0.0;
            for (mb, &pb) in self.probs.iter().enumerate() {
                spins_from_mask(mb as u64, &mut b);
                inner += pb * obs(&a, &b);
            }
            s += pa * inner;
        }
        Ok(s)
    }

    /// `⟨σ_i σ_j⟩` for every pair in half-index order.
    pub fn pair_correlations(&self) -> Vec<f64> {
        let p = pairs(self.n);
        let mut out = vec![0.0; p.len()];
        let mut sigma = vec![1i8; self.n];
        for (mask, &pr) in self.probs.iter().enumerate() {
            spins_from_mask(mask as u64, &mut sigma);
            for (o, &(i, j)) in out.iter_mut().zip(&p) {
                *o += pr * (sigma[i] * sigma[j]) as f64;
            }
        }
        out
    }
}

/// Exact Gibbs average of a pair observable.
pub fn gibbs_expectation(medium: &Medium, beta: f64, obs: impl Fn(&[i8], &[i8]) -> f64) -> Result<f64> {
    if medium.n > MAX_PAIR_GIBBS_N {
        return Err(Error::TooLarge {
            n: medium.n,
            limit: MAX_PAIR_GIBBS_N,
        });
    }
    GibbsTable::new(medium, beta)?.pair_expectation(obs)
}

/// `N^{-1} log Z` and its gradient in the couplings, in floating point;
/// the gradient is `-(β/N)(2/√(2N))⟨σ_iσ_j⟩`.
pub(crate) fn free_energy_and_gradient(n: usize, couplings: &[f64], beta: f64, grad: &mut [f64]) -> f64 {
    debug_assert_eq!(couplings.len(), n_pairs(n));
    let p = pairs(n);
    let free = n - 1;
    let c = -beta * prefactor(n);
    let mut sigma = vec![1i8; n];
    let mut xs = Vec::with_capacity(1 << free);
    for mask in 0..1u64 << free {
        spins_from_mask(mask, &mut sigma[..free]);
        let e: f64 = p
            .iter()
            .zip(couplings)
            .map(|(&(i, j), &q)| (sigma[i] * sigma[j]) as f64 * q)
            .sum();
        xs.push(c * e);
    }
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut z = 0.0;
    for (mask, x) in xs.iter().enumerate() {
        let w = (x - max).exp();
        z += w;
        spins_from_mask(mask as u64, &mut sigma[..free]);
        for (g, &(i, j)) in grad.iter_mut().zip(&p) {
            *g += w * (sigma[i] * sigma[j]) as f64;
        }
    }
    let scale = c / (z * n as f64);
    grad.iter_mut().for_each(|g| *g *= scale);
    (max + z.ln() - free as f64 * std::f64::consts::LN_2) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::stream_rng;
    use crate::sk::media::{medium_sample, MediumFamily};

    fn two_spin(j: f64) -> Medium {
        Medium::fixed(2, vec![j]).unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let m = two_spin(0.7);
        assert_eq!(hamiltonian(&[1, -1], &m), -0.7);
        let n = 5;
        let ones = Medium::fixed(n, vec![1.0; n_pairs(n)]).unwrap();
        let h = hamiltonian(&[1; 5], &ones);
        assert!((h - (n * (n - 1)) as f64 / (2.0 * n as f64).sqrt()).abs() < 1e-12);
        let m = medium_sample(MediumFamily::IidGaussian, 6, &mut stream_rng(4, 0)).unwrap();
        let s = [1, -1, -1, 1, 1, -1];
        let flipped: Vec<i8> = s.iter().map(|x| -x).collect();
        assert_eq!(hamiltonian(&s, &m), hamiltonian(&flipped, &m));
    }

    #[test]
    fn two_spin_closed_form() {
        for &(j, beta) in &[(0.7, 1.0), (-1.3, 2.5), (0.01, 0.3)] {
            let f = free_energy_exact(&two_spin(j), beta).unwrap();
            assert!((f.value - 0.5 * (beta * j as f64).cosh().ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_cases() {
        let m = medium_sample(MediumFamily::IidGaussian, 7, &mut stream_rng(5, 0)).unwrap();
        assert_eq!(free_energy_exact(&m, 0.0).unwrap().value, 0.0);
        let zero = Medium::fixed(7, vec![0.0; n_pairs(7)]).unwrap();
        assert_eq!(free_energy_exact(&zero, 3.0).unwrap().value, 0.0);
        let big = Medium::fixed(25, vec![0.0; n_pairs(25)]).unwrap();
        assert!(matches!(free_energy_exact(&big, 1.0), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn gray_matches_naive_bitwise() {
        for n in 2..=10 {
            let m = medium_sample(MediumFamily::IidGaussian, n, &mut stream_rng(6, n as u64)).unwrap();
            let a = free_energy_exact(&m, 1.3).unwrap().value;
            let b = free_energy_naive(&m, 1.3).unwrap().value;
            assert_eq!(a.to_bits(), b.to_bits(), "n = {n}");
        }
    }

    #[test]
    fn gray_matches_direct_sum() {
        let n = 6;
        let m = medium_sample(MediumFamily::IidGaussian, n, &mut stream_rng(7, 0)).unwrap();
        let beta = 0.8;
        let mut sigma = vec![0i8; n];
        let mut z = 0.0;
        for mask in 0..1u64 << n {
            spins_from_mask(mask, &mut sigma);
            z += (-beta * hamiltonian(&sigma, &m)).exp();
        }
        let direct = (z / 64.0).ln() / n as f64;
        assert!((free_energy_exact(&m, beta).unwrap().value - direct).abs() < 1e-12);
    }

    #[test]
    fn gibbs_two_spin() {
        let (j, beta) = (0.4, 1.5);
        let m = two_spin(j);
        let e = gibbs_expectation(&m, beta, |s, _| (s[0] * s[1]) as f64).unwrap();
        assert!((e - (-beta * j).tanh()).abs() < 1e-12);
        let t = GibbsTable::new(&m, 0.0).unwrap();
        assert_eq!(t.expectation(|s| (s[0] * s[1]) as f64), 0.0);
        assert_eq!(t.expectation(|s| (s[1] * s[1]) as f64), 1.0);
    }

    #[test]
    fn pair_expectation_factorizes() {
        let m = medium_sample(MediumFamily::IidGaussian, 5, &mut stream_rng(8, 0)).unwrap();
        let t = GibbsTable::new(&m, 1.0).unwrap();
        let corr = t.pair_correlations();
        let e = t.pair_expectation(|a, b| (a[3] * b[3] * a[1] * b[1]) as f64).unwrap();
        let k = crate::sk::media::pair_index(3, 1);
        assert!((e - corr[k] * corr[k]).abs() < 1e-12);
    }

    #[test]
    fn float_gradient_matches_differences() {
        let n = 5;
        let m = medium_sample(MediumFamily::IidGaussian, n, &mut stream_rng(9, 0)).unwrap();
        let mut g = vec![0.0; n_pairs(n)];
        let v = free_energy_and_gradient(n, &m.couplings, 0.9, &mut g);
        assert!((v - free_energy_exact(&m, 0.9).unwrap().value).abs() < 1e-12);
        let mut scratch = vec![0.0; g.len()];
        for k in [0, 4, 9] {
            let h = 1e-5;
            let mut c = m.couplings.clone();
            c[k] += h;
            let up = free_energy_and_gradient(n, &c, 0.9, &mut scratch);
            c[k] -= 2.0 * h;
            let dn = free_energy_and_gradient(n, &c, 0.9, &mut scratch);
            assert!(((up - dn) / (2.0 * h) - g[k]).abs() < 1e-8);
        }
    }
}
