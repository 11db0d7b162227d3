//! Soft-max interpolation between two fields on disjoint coordinate blocks,
//! its derivative expressed through Δ, and the expected-supremum comparison.

use super::softmax::{h_weights_into, sandwich_gap, softmax_sup};
use crate::error::{Error, Result};
use crate::gamma::{delta_from_gamma, inner_units, KernelScratch, MehlerConfig, MehlerKernel};
use crate::parallel::{derive_seed, map_chunks, StreamRng};
use crate::stats::{Estimate, RunningStats};
use crate::wiener::{Differentiable, RandomField, Workspace};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

const OUTER_CHUNK: usize = 64;
const CENTERING_SAMPLES: usize = 20_000;

/// Default interpolation grid: 21 equispaced points in [0.025, 0.975].
pub fn default_t_grid() -> Vec<f64> {
    (0..21).map(|k| 0.025 + 0.0475 * k as f64).collect()
}

pub fn default_betas() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0, 16.0]
}

/// Rejects fields whose coordinates overlap or are correlated.
pub fn check_disjoint(f: &RandomField, g: &RandomField) -> Result<()> {
    if f.space() != g.space() {
        return Err(Error::InvalidArgument("fields live on different spaces".into()));
    }
    let (cf, cg) = (f.coordinates(), g.coordinates());
    if let Some(&i) = cf.intersection(&cg).next() {
        return Err(Error::SharedCoordinates { index: i });
    }
    let gram = f.space().gram();
    for &i in &cf {
        for &j in &cg {
            if gram[(i, j)].abs() > 1e-12 {
                return Err(Error::ConditionViolated(format!(
                    "coordinates w{i} and w{j} of the two blocks are correlated (gram entry {})",
                    gram[(i, j)]
                )));
            }
        }
    }
    Ok(())
}

/// Draws outer samples and nested Γ matrices for two fields.
pub(crate) struct PairSampler<'a> {
    pub f: Vec<&'a dyn Differentiable>,
    pub g: Vec<&'a dyn Differentiable>,
    kernel: MehlerKernel,
    units: usize,
    n: usize,
}

#[derive(Debug, Default)]
pub(crate) struct PairSample {
    pub xi: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub gamma_f: Vec<f64>,
    pub gamma_g: Vec<f64>,
    pub sc: KernelScratch,
}

impl<'a> PairSampler<'a> {
    pub fn new(f: &'a RandomField, g: &'a RandomField, cfg: &MehlerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            f: f.as_dyn(),
            g: g.as_dyn(),
            kernel: MehlerKernel::new(cfg),
            units: inner_units(cfg),
            n: f.space().dim(),
        })
    }

    pub fn sample(&self, rng: &mut StreamRng, s: &mut PairSample, with_gamma: bool) -> Result<()> {
        let d = self.f.len();
        s.xi.resize(self.n, 0.0);
        s.xi.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        s.x.resize(d, 0.0);
        s.y.resize(d, 0.0);
        for k in 0..d {
            s.x[k] = self.f[k].eval(&s.xi, &mut s.sc.ws)?;
            s.y[k] = self.g[k].eval(&s.xi, &mut s.sc.ws)?;
        }
        if with_gamma {
            s.gamma_f.resize(d * d, 0.0);
            s.gamma_g.resize(d * d, 0.0);
            self.kernel
                .average(&self.f, &self.f, &s.xi, self.units, rng, &mut s.sc, &mut s.gamma_f)?;
            self.kernel
                .average(&self.g, &self.g, &s.xi, self.units, rng, &mut s.sc, &mut s.gamma_g)?;
        }
        Ok(())
    }
}

/// Merges per-chunk accumulators in chunk order.
pub(crate) fn merge_chunks(chunks: Vec<Result<Vec<RunningStats>>>, k: usize) -> Result<Vec<RunningStats>> {
    let mut total = vec![RunningStats::new(); k];
    for c in chunks {
        total.iter_mut().zip(&c?).for_each(|(a, b)| a.merge(b));
    }
    Ok(total)
}

/// Checks each component mean is within `z` standard errors of zero.
pub(crate) fn check_field_centered(field: &RandomField, seed: u64, z: f64) -> Result<()> {
    field.check_centered(CENTERING_SAMPLES, seed, z)
}

/// The interpolation `φ(t) = (1/β)E[log Σ exp(β(√(1−t)G_i + √t F_i))]`.
#[derive(Debug, Clone)]
pub struct SoftmaxPath {
    pub beta: f64,
    pub f: RandomField,
    pub g: RandomField,
}

impl SoftmaxPath {
    /// Validates β, sizes, the disjoint-block embedding and centering.
    pub fn new(beta: f64, f: RandomField, g: RandomField) -> Result<Self> {
        let path = Self::unchecked(beta, f, g)?;
        check_field_centered(&path.f, 0xce17, 4.0)?;
        check_field_centered(&path.g, 0xce18, 4.0)?;
        Ok(path)
    }

    /// As [`SoftmaxPath::new`] but without the Monte Carlo centering check.
    pub fn unchecked(beta: f64, f: RandomField, g: RandomField) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        if f.len() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: f.len(),
                got: g.len(),
            });
        }
        check_disjoint(&f, &g)?;
        Ok(Self { beta, f, g })
    }

    pub fn d(&self) -> usize {
        self.f.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiPrimePoint {
    pub beta: f64,
    pub t: f64,
    pub estimate: Estimate,
}

/// φ′(t) = (β/4)Σ E[h_i h_j (Δ_F(i,j) − Δ_G(i,j))] on a grid of (β, t),
/// sharing outer samples and nested Γ draws across the grid.
pub fn sf_phi_prime_profile(
    f: &RandomField,
    g: &RandomField,
    betas: &[f64],
    ts: &[f64],
    cfg: &MehlerConfig,
    n_outer: usize,
) -> Result<Vec<PhiPrimePoint>> {
    if let Some(&t) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidArgument(format!("t={t} outside [0,1]")));
    }
    if let Some(&b) = betas.iter().find(|b| !(**b > 0.0)) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {b}")));
    }
    let d = f.len();
    let sampler = PairSampler::new(f, g, cfg)?;
    let cells = betas.len() * ts.len();
    let chunks = map_chunks(n_outer, OUTER_CHUNK, derive_seed(cfg.seed, 0x5f), |range, rng| {
        let mut s = PairSample::default();
        let mut stats = vec![RunningStats::new(); cells];
        let (mut df, mut dg, mut h) = (vec![0.0; d * d], vec![0.0; d * d], vec![0.0; d]);
        for _ in range {
            sampler.sample(rng, &mut s, true)?;
            delta_from_gamma(d, &s.gamma_f, &mut df);
            delta_from_gamma(d, &s.gamma_g, &mut dg);
            df.iter_mut().zip(&dg).for_each(|(a, b)| *a -= b);
            for (bi, &beta) in betas.iter().enumerate() {
                for (ti, &t) in ts.iter().enumerate() {
                    h_weights_into(t, beta, &s.x, &s.y, &mut h);
                    let mut acc = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            acc += h[i] * h[j] * df[i * d + j];
                        }
                    }
                    stats[bi * ts.len() + ti].push(0.25 * beta * acc);
                }
            }
        }
        Ok(stats)
    });
    let stats = merge_chunks(chunks, cells)?;
    let mut out = Vec::with_capacity(cells);
    for (bi, &beta) in betas.iter().enumerate() {
        for (ti, &t) in ts.iter().enumerate() {
            out.push(PhiPrimePoint {
                beta,
                t,
                estimate: stats[bi * ts.len() + ti].estimate(),
            });
        }
    }
    Ok(out)
}

/// φ′(t) at a single point of the path.
pub fn sf_phi_prime(path: &SoftmaxPath, t: f64, cfg: &MehlerConfig, n_outer: usize) -> Result<Estimate> {
    Ok(sf_phi_prime_profile(&path.f, &path.g, &[path.beta], &[t], cfg, n_outer)?[0].estimate)
}

/// Direct Monte Carlo estimate of φ(t).
pub fn phi_value(path: &SoftmaxPath, t: f64, n: usize, seed: u64) -> Result<Estimate> {
    let sampler = PairSampler::new(&path.f, &path.g, &MehlerConfig::default())?;
    let (a, b) = ((1.0 - t).sqrt(), t.sqrt());
    let chunks = map_chunks(n, 4096, seed, |range, rng| {
        let mut s = PairSample::default();
        let mut st = RunningStats::new();
        let mut z = vec![0.0; path.d()];
        for _ in range {
            sampler.sample(rng, &mut s, false)?;
            for k in 0..z.len() {
                z[k] = a * s.y[k] + b * s.x[k];
            }
            st.push(softmax_sup(path.beta, &z));
        }
        Ok(vec![st])
    });
    Ok(merge_chunks(chunks, 1)?[0].estimate())
}

/// φ(1) − φ(0) from paired samples.
pub fn phi_increment(path: &SoftmaxPath, n: usize, seed: u64) -> Result<Estimate> {
    let sampler = PairSampler::new(&path.f, &path.g, &MehlerConfig::default())?;
    let chunks = map_chunks(n, 4096, seed, |range, rng| {
        let mut s = PairSample::default();
        let mut st = RunningStats::new();
        for _ in range {
            sampler.sample(rng, &mut s, false)?;
            st.push(softmax_sup(path.beta, &s.x) - softmax_sup(path.beta, &s.y));
        }
        Ok(vec![st])
    });
    Ok(merge_chunks(chunks, 1)?[0].estimate())
}

/// Expected maxima of two fields from the same outer samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxComparison {
    pub max_f: Estimate,
    pub max_g: Estimate,
    /// E[max F] − E[max G] with its paired standard error.
    pub difference: Estimate,
}

pub fn expected_max_pair(f: &RandomField, g: &RandomField, n: usize, seed: u64) -> Result<MaxComparison> {
    if f.space() != g.space() {
        return Err(Error::InvalidArgument("fields live on different spaces".into()));
    }
    let (ff, gg) = (f.as_dyn(), g.as_dyn());
    let dim = f.space().dim();
    let chunks = map_chunks(n, 4096, seed, |range, rng| {
        let mut ws = Workspace::default();
        let mut st = vec![RunningStats::new(); 3];
        let mut xi = vec![0.0; dim];
        for _ in range {
            xi.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let mut mf = f64::NEG_INFINITY;
            for c in &ff {
                mf = mf.max(c.eval(&xi, &mut ws)?);
            }
            let mut mg = f64::NEG_INFINITY;
            for c in &gg {
                mg = mg.max(c.eval(&xi, &mut ws)?);
            }
            st[0].push(mf);
            st[1].push(mg);
            st[2].push(mf - mg);
        }
        Ok(st)
    });
    let st = merge_chunks(chunks, 3)?;
    Ok(MaxComparison {
        max_f: st[0].estimate(),
        max_g: st[1].estimate(),
        difference: st[2].estimate(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaProfile {
    pub beta: f64,
    pub sandwich_gap: f64,
    pub phi_prime: Vec<PhiPrimePoint>,
    /// Every φ′(t) ≤ 3 standard errors.
    pub nonpositive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SudakovReport {
    pub maxima: MaxComparison,
    pub profiles: Vec<BetaProfile>,
    /// E[max F] ≤ E[max G] + 3 standard errors.
    pub sup_ordered: bool,
}

impl SudakovReport {
    pub fn pass(&self) -> bool {
        self.sup_ordered && self.profiles.iter().all(|p| p.nonpositive)
    }
}

/// Sign profile of φ′ per β and the expected-maximum comparison.
pub fn sudakov_fernique_experiment(
    f: &RandomField,
    g: &RandomField,
    betas: &[f64],
    ts: &[f64],
    cfg: &MehlerConfig,
    n_outer: usize,
    n_max: usize,
) -> Result<SudakovReport> {
    let path = SoftmaxPath::new(betas.first().copied().unwrap_or(1.0), f.clone(), g.clone())?;
    let profile = sf_phi_prime_profile(&path.f, &path.g, betas, ts, cfg, n_outer)?;
    let profiles = betas
        .iter()
        .enumerate()
        .map(|(bi, &beta)| {
            let pts = profile[bi * ts.len()..(bi + 1) * ts.len()].to_vec();
            let nonpositive = pts.iter().all(|p| p.estimate.value <= 3.0 * p.estimate.std_error + 1e-12);
            BetaProfile {
                beta,
                sandwich_gap: sandwich_gap(beta, f.len()),
                phi_prime: pts,
                nonpositive,
            }
        })
        .collect();
    let maxima = expected_max_pair(f, g, n_max, derive_seed(cfg.seed, 0x3a))?;
    let sup_ordered = maxima.difference.value <= 3.0 * maxima.difference.std_error;
    Ok(SudakovReport {
        maxima,
        profiles,
        sup_ordered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wiener::{w, Expression, Functional, WienerSpace};
    use std::sync::Arc;

    fn cfg() -> MehlerConfig {
        MehlerConfig {
            quad_nodes: 8,
            mc_samples: 2,
            antithetic: true,
            seed: 9,
        }
    }

    fn field(space: &Arc<WienerSpace>, exprs: Vec<Expression>) -> RandomField {
        RandomField::new(exprs.into_iter().map(|e| Functional::new(space.clone(), e).unwrap()).collect()).unwrap()
    }

    #[test]
    fn shared_coordinates_rejected() {
        let s = Arc::new(WienerSpace::new(3).unwrap());
        let f = field(&s, vec![w(0), w(1)]);
        let g = field(&s, vec![w(1), w(2)]);
        assert!(matches!(
            SoftmaxPath::unchecked(1.0, f, g),
            Err(Error::SharedCoordinates { index: 1 })
        ));
    }

    #[test]
    fn single_point_field_has_zero_derivative() {
        let s = Arc::new(WienerSpace::new(2).unwrap());
        let path = SoftmaxPath::new(2.0, field(&s, vec![w(0).hermite(2)]), field(&s, vec![w(1)])).unwrap();
        let e = sf_phi_prime(&path, 0.5, &cfg(), 500).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn identical_laws_give_zero() {
        let s = Arc::new(WienerSpace::new(4).unwrap());
        let f = field(&s, vec![w(0), w(0) * constant_half() + w(1) * constant_half()]);
        let g = field(&s, vec![w(2), w(2) * constant_half() + w(3) * constant_half()]);
        let path = SoftmaxPath::new(1.0, f, g).unwrap();
        let e = sf_phi_prime(&path, 0.4, &cfg(), 2000).unwrap();
        assert!(e.value.abs() <= 3.0 * e.std_error + 1e-12, "{e:?}");
    }

    fn constant_half() -> Expression {
        crate::wiener::constant(0.5)
    }

    #[test]
    fn common_shift_leaves_derivative_unchanged() {
        let s = Arc::new(WienerSpace::new(4).unwrap());
        let f = field(&s, vec![w(0).hermite(2), w(1).tanh()]);
        let shifted = RandomField::new(f.components().iter().map(|c| c.clone().with_mean_shift(-3.0)).collect()).unwrap();
        let g = field(&s, vec![w(2), w(3)]);
        let a = sf_phi_prime(&SoftmaxPath::unchecked(2.0, f, g.clone()).unwrap(), 0.3, &cfg(), 300).unwrap();
        let b = sf_phi_prime(&SoftmaxPath::unchecked(2.0, shifted, g).unwrap(), 0.3, &cfg(), 300).unwrap();
        assert!((a.value - b.value).abs() <= 1e-12 * a.value.abs().max(1.0));
    }
}
