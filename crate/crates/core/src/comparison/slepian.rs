//! Second-order interpolation `φ(t) = E[f(√(1−t)G + √t F)]` and the
//! expectation comparisons built on it.

use super::sudakov::{check_disjoint, check_field_centered, merge_chunks, PairSample, PairSampler};
use crate::error::{Error, Result};
use crate::gamma::MehlerConfig;
use crate::linalg::Matrix;
use crate::parallel::{derive_seed, map_chunks};
use crate::stats::{Estimate, RunningStats};
use crate::wiener::RandomField;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

const OUTER_CHUNK: usize = 64;

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type HessFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A C² map with an exact Hessian.
#[derive(Clone)]
pub enum HessianFunction {
    /// `½ xᵀ A x`
    Quadratic(Matrix),
    /// `(1/β) log Σ e^{β x_i}`
    LogSumExp(f64),
    /// `exp(⟨θ, x⟩)`
    ExpLinear(Vec<f64>),
    /// User-supplied value and row-major Hessian.
    Custom { value: Arc<ValueFn>, hessian: Arc<HessFn> },
}

impl fmt::Debug for HessianFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Quadratic(a) => write!(f, "Quadratic({:?})", a.to_rows()),
            Self::LogSumExp(b) => write!(f, "LogSumExp({b})"),
            Self::ExpLinear(t) => write!(f, "ExpLinear({t:?})"),
            Self::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl HessianFunction {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Quadratic(a) => 0.5 * crate::linalg::dot(x, &a.mul_vec(x)),
            Self::LogSumExp(b) => super::softmax::softmax_sup(*b, x),
            Self::ExpLinear(t) => crate::linalg::dot(t, x).exp(),
            Self::Custom { value, .. } => value(x),
        }
    }

    /// Row-major Hessian at `x`.
    pub fn hessian_into(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        match self {
            Self::Quadratic(a) => out.copy_from_slice(a.as_slice()),
            Self::LogSumExp(b) => {
                let mut p = x.to_vec();
                super::softmax::softmax_weights_into(*b, &mut p);
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = b * (if i == j { p[i] } else { 0.0 } - p[i] * p[j]);
                    }
                }
            }
            Self::ExpLinear(t) => {
                let v = crate::linalg::dot(t, x).exp();
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = t[i] * t[j] * v;
                    }
                }
            }
            Self::Custom { hessian, .. } => hessian(x, out),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = x.len();
        let mut h = vec![0.0; d * d];
        self.hessian_into(x, &mut h);
        check_symmetric(&h, d)?;
        Ok(h)
    }

    /// Validates sizes against a field dimension.
    pub fn check_dim(&self, d: usize) -> Result<()> {
        let got = match self {
            Self::Quadratic(a) => a.dim(),
            Self::ExpLinear(t) => t.len(),
            _ => d,
        };
        if got != d {
            return Err(Error::DimensionMismatch { expected: d, got });
        }
        if let Self::Quadratic(a) = self {
            a.check_symmetric(1e-10)?;
        }
        Ok(())
    }
}

fn check_symmetric(h: &[f64], d: usize) -> Result<()> {
    for i in 0..d {
        for j in 0..i {
            let diff = (h[i * d + j] - h[j * d + i]).abs();
            if diff > 1e-10 {
                return Err(Error::NotSymmetric { row: i, col: j, diff });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlepianPoint {
    pub t: f64,
    pub phi_prime: Estimate,
    /// Largest relative standard error among the E|∂²f| estimates.
    pub hessian_rel_error: f64,
    /// Set when an E|∂ᵢⱼf| estimate looks heavy-tailed.
    pub heavy_tailed: bool,
}

/// φ′(t) = ½ Σ E[∂ᵢⱼf(√(1−t)G + √t F)(Γᶠᵢⱼ − Γᴳᵢⱼ)] over a t-grid.
pub fn slepian_phi_prime_profile(
    f_field: &RandomField,
    g_field: &RandomField,
    func: &HessianFunction,
    ts: &[f64],
    cfg: &MehlerConfig,
    n_outer: usize,
) -> Result<Vec<SlepianPoint>> {
    if f_field.len() != g_field.len() {
        return Err(Error::DimensionMismatch {
            expected: f_field.len(),
            got: g_field.len(),
        });
    }
    check_disjoint(f_field, g_field)?;
    let d = f_field.len();
    func.check_dim(d)?;
    if let Some(&t) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidArgument(format!("t={t} outside [0,1]")));
    }
    let sampler = PairSampler::new(f_field, g_field, cfg)?;
    let per_t = 1 + d * d;
    let cells = ts.len() * per_t;
    let chunks = map_chunks(n_outer, OUTER_CHUNK, derive_seed(cfg.seed, 0x51e), |range, rng| {
        let mut s = PairSample::default();
        let mut stats = vec![RunningStats::new(); cells];
        let (mut z, mut h) = (vec![0.0; d], vec![0.0; d * d]);
        for _ in range {
            sampler.sample(rng, &mut s, true)?;
            for (ti, &t) in ts.iter().enumerate() {
                let (a, b) = ((1.0 - t).sqrt(), t.sqrt());
                for k in 0..d {
                    z[k] = a * s.y[k] + b * s.x[k];
                }
                func.hessian_into(&z, &mut h);
                check_symmetric(&h, d)?;
                let mut acc = 0.0;
                for k in 0..d * d {
                    acc += h[k] * (s.gamma_f[k] - s.gamma_g[k]);
                    stats[ti * per_t + 1 + k].push(h[k].abs());
                }
                stats[ti * per_t].push(0.5 * acc);
            }
        }
        Ok(stats)
    });
    let stats = merge_chunks(chunks, cells)?;
    Ok(ts
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let rel = stats[ti * per_t + 1..(ti + 1) * per_t]
                .iter()
                .filter(|s| s.mean() > 0.0)
                .map(|s| s.std_error() / s.mean())
                .fold(0.0, f64::max);
            SlepianPoint {
                t,
                phi_prime: stats[ti * per_t].estimate(),
                hessian_rel_error: rel,
                heavy_tailed: !rel.is_finite() || rel > 0.1,
            }
        })
        .collect())
}

pub fn slepian_phi_prime(
    f_field: &RandomField,
    g_field: &RandomField,
    func: &HessianFunction,
    t: f64,
    cfg: &MehlerConfig,
    n_outer: usize,
) -> Result<Estimate> {
    Ok(slepian_phi_prime_profile(f_field, g_field, func, &[t], cfg, n_outer)?[0].phi_prime)
}

/// E[f(F)] and E[f(G)] from the same outer samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationPair {
    pub f_of_f: Estimate,
    pub f_of_g: Estimate,
    /// E[f(F)] − E[f(G)] with its paired standard error.
    pub difference: Estimate,
}

impl ExpectationPair {
    /// E[f(F)] ≥ E[f(G)] − 3 standard errors.
    pub fn f_dominates(&self) -> bool {
        self.difference.value >= -3.0 * self.difference.std_error - 1e-12
    }
}

pub fn expectation_pair(
    f_field: &RandomField,
    g_field: &RandomField,
    func: &HessianFunction,
    n: usize,
    seed: u64,
) -> Result<ExpectationPair> {
    if f_field.len() != g_field.len() {
        return Err(Error::DimensionMismatch {
            expected: f_field.len(),
            got: g_field.len(),
        });
    }
    if f_field.space() != g_field.space() {
        return Err(Error::InvalidArgument("fields live on different spaces".into()));
    }
    func.check_dim(f_field.len())?;
    let sampler = PairSampler::new(f_field, g_field, &MehlerConfig::default())?;
    let chunks = map_chunks(n, 4096, seed, |range, rng| {
        let mut s = PairSample::default();
        let mut st = vec![RunningStats::new(); 3];
        for _ in range {
            sampler.sample(rng, &mut s, false)?;
            let (a, b) = (func.value(&s.x), func.value(&s.y));
            st[0].push(a);
            st[1].push(b);
            st[2].push(a - b);
        }
        Ok(st)
    });
    let st = merge_chunks(chunks, 3)?;
    Ok(ExpectationPair {
        f_of_f: st[0].estimate(),
        f_of_g: st[1].estimate(),
        difference: st[2].estimate(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SlepianReport {
    pub profile: Vec<SlepianPoint>,
    /// Every φ′(t) ≥ −3 standard errors.
    pub condition_holds: bool,
    pub expectations: ExpectationPair,
}

impl SlepianReport {
    /// When the integrand is nonnegative along the grid, E[f(F)] ≥ E[f(G)]
    /// must hold within error; otherwise the check is vacuous.
    pub fn pass(&self) -> bool {
        !self.condition_holds || self.expectations.f_dominates()
    }
}

pub fn slepian_experiment(
    f_field: &RandomField,
    g_field: &RandomField,
    func: &HessianFunction,
    ts: &[f64],
    cfg: &MehlerConfig,
    n_outer: usize,
    n_direct: usize,
) -> Result<SlepianReport> {
    check_field_centered(f_field, 0x5e1, 4.0)?;
    check_field_centered(g_field, 0x5e2, 4.0)?;
    let profile = slepian_phi_prime_profile(f_field, g_field, func, ts, cfg, n_outer)?;
    let condition_holds = profile
        .iter()
        .all(|p| p.phi_prime.value >= -3.0 * p.phi_prime.std_error - 1e-12);
    let expectations = expectation_pair(f_field, g_field, func, n_direct, derive_seed(cfg.seed, 0x5e3))?;
    Ok(SlepianReport {
        profile,
        condition_holds,
        expectations,
    })
}
