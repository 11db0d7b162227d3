//! Γ_{F,G}(ω) = ∫₀¹ Ê⟨DF(ω), DG(uω + √(1−u²)ω̂)⟩ du by Gauss–Legendre
//! quadrature in u and Monte Carlo over the independent copy ω̂.

use crate::error::{Error, Result};
use crate::parallel::{map_chunks, StreamRng};
use crate::quadrature::gauss_legendre_unit;
use crate::stats::{Estimate, RunningStats};
use crate::wiener::{Differentiable, SamplePoint, Workspace};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub type GammaEstimate = Estimate;

const INNER_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MehlerConfig {
    pub quad_nodes: usize,
    pub mc_samples: usize,
    pub antithetic: bool,
    pub seed: u64,
}

impl Default for MehlerConfig {
    fn default() -> Self {
        Self {
            quad_nodes: 32,
            mc_samples: 4096,
            antithetic: true,
            seed: 0,
        }
    }
}

impl MehlerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quad_nodes < 2 {
            return Err(Error::InvalidArgument(format!(
                "quad_nodes must be at least 2, got {}",
                self.quad_nodes
            )));
        }
        if self.mc_samples < 2 {
            return Err(Error::InvalidArgument(format!(
                "mc_samples must be at least 2, got {}",
                self.mc_samples
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, m: usize) -> Self {
        self.mc_samples = m;
        self
    }

    /// Independent sampling units: antithetic pairs count once.
    fn units(&self) -> usize {
        if self.antithetic {
            self.mc_samples.div_ceil(2)
        } else {
            self.mc_samples
        }
    }
}

/// `u·ω + √(1−u²)·ω̂`.
pub fn mehler_shift(omega: &SamplePoint, omega_hat: &SamplePoint, u: f64) -> Result<SamplePoint> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidArgument(format!("mehler parameter u={u} outside [0,1]")));
    }
    if omega.dim() != omega_hat.dim() {
        return Err(Error::DimensionMismatch {
            expected: omega.dim(),
            got: omega_hat.dim(),
        });
    }
    let s = (1.0 - u * u).sqrt();
    Ok(omega
        .coords
        .iter()
        .zip(&omega_hat.coords)
        .map(|(a, b)| u * a + s * b)
        .collect::<Vec<_>>()
        .into())
}

/// Quadrature rule and the per-sample evaluation of the Γ integrand for a
/// set of left and right functionals.
#[derive(Debug, Clone)]
pub struct MehlerKernel {
    nodes: Vec<f64>,
    scales: Vec<f64>,
    weights: Vec<f64>,
    antithetic: bool,
}

/// Scratch owned by one worker.
#[derive(Debug, Default)]
pub struct KernelScratch {
    pub(crate) ws: Workspace,
    hat: Vec<f64>,
    shifted: Vec<f64>,
    grad: Vec<f64>,
    left_grads: Vec<f64>,
}

impl MehlerKernel {
    pub fn new(cfg: &MehlerConfig) -> Self {
        let (nodes, weights) = gauss_legendre_unit(cfg.quad_nodes);
        let scales = nodes.iter().map(|u| (1.0 - u * u).sqrt()).collect();
        Self {
            nodes,
            scales,
            weights,
            antithetic: cfg.antithetic,
        }
    }

    /// Stores DL_a(ξ) for every left functional, row-major in `sc.left_grads`.
    pub fn prepare(&self, left: &[&dyn Differentiable], xi: &[f64], sc: &mut KernelScratch) -> Result<()> {
        let n = xi.len();
        sc.left_grads.resize(left.len() * n, 0.0);
        for (a, f) in left.iter().enumerate() {
            f.eval_grad(xi, &mut sc.left_grads[a * n..(a + 1) * n], &mut sc.ws)?;
        }
        Ok(())
    }

    /// One Monte Carlo unit of the integrand for every (a, b) pair, added to
    /// `out` (row-major, left × right). Draws ω̂ from `rng`.
    pub fn unit<R: Rng + ?Sized>(
        &self,
        right: &[&dyn Differentiable],
        xi: &[f64],
        rng: &mut R,
        sc: &mut KernelScratch,
        out: &mut [f64],
    ) -> Result<()> {
        let n = xi.len();
        let n_left = sc.left_grads.len() / n.max(1);
        sc.hat.clear();
        sc.hat.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        sc.shifted.resize(n, 0.0);
        sc.grad.resize(n, 0.0);
        out.iter_mut().for_each(|o| *o = 0.0);
        let signs: &[f64] = if self.antithetic { &[1.0, -1.0] } else { &[1.0] };
        let unit_weight = 1.0 / signs.len() as f64;
        for &sign in signs {
            for k in 0..self.nodes.len() {
                let (u, s, wk) = (self.nodes[k], sign * self.scales[k], self.weights[k] * unit_weight);
                for i in 0..n {
                    sc.shifted[i] = u * xi[i] + s * sc.hat[i];
                }
                for (b, g) in right.iter().enumerate() {
                    g.eval_grad(&sc.shifted, &mut sc.grad, &mut sc.ws)?;
                    for a in 0..n_left {
                        let df = &sc.left_grads[a * n..(a + 1) * n];
                        let dot: f64 = df.iter().zip(&sc.grad).map(|(x, y)| x * y).sum();
                        out[a * right.len() + b] += wk * dot;
                    }
                }
            }
        }
        Ok(())
    }

    /// Serial average of `units` Monte Carlo units, for use inside outer loops.
    pub fn average<R: Rng + ?Sized>(
        &self,
        left: &[&dyn Differentiable],
        right: &[&dyn Differentiable],
        xi: &[f64],
        units: usize,
        rng: &mut R,
        sc: &mut KernelScratch,
        out: &mut [f64],
    ) -> Result<()> {
        self.prepare(left, xi, sc)?;
        let mut tmp = vec![0.0; out.len()];
        out.iter_mut().for_each(|o| *o = 0.0);
        for _ in 0..units {
            self.unit(right, xi, rng, sc, &mut tmp)?;
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
        }
        let inv = 1.0 / units as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        Ok(())
    }
}

/// Number of Monte Carlo units an outer loop should average for `cfg`.
pub fn inner_units(cfg: &MehlerConfig) -> usize {
    cfg.units()
}

/// Γ and Δ estimates for a field evaluated at one point.
#[derive(Debug, Clone, Serialize)]
pub struct GammaMatrix {
    pub dim: usize,
    /// `gamma[i*dim + j]` estimates Γ_{F_i,F_j}.
    pub gamma: Vec<GammaEstimate>,
    /// `delta[i*dim + j]` estimates Δ_F(i,j) = Γ_{F_j−F_i, F_j−F_i}.
    pub delta: Vec<GammaEstimate>,
}

impl GammaMatrix {
    pub fn gamma(&self, i: usize, j: usize) -> GammaEstimate {
        self.gamma[i * self.dim + j]
    }

    pub fn delta(&self, i: usize, j: usize) -> GammaEstimate {
        self.delta[i * self.dim + j]
    }

    pub fn gamma_values(&self) -> Vec<f64> {
        self.gamma.iter().map(|e| e.value).collect()
    }
}

/// Δ from a Γ matrix by bilinearity: Γ_tt + Γ_ss − Γ_ts − Γ_st.
pub fn delta_from_gamma(d: usize, gamma: &[f64], out: &mut [f64]) {
    for s in 0..d {
        for t in 0..d {
            out[s * d + t] = gamma[t * d + t] + gamma[s * d + s] - gamma[t * d + s] - gamma[s * d + t];
        }
    }
}

fn check_dims(fs: &[&dyn Differentiable], n: usize) -> Result<()> {
    for f in fs {
        if f.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: f.dim(),
            });
        }
    }
    Ok(())
}

fn run_units(
    left: &[&dyn Differentiable],
    right: &[&dyn Differentiable],
    xi: &[f64],
    cfg: &MehlerConfig,
    with_delta: bool,
) -> Result<(Vec<RunningStats>, Vec<RunningStats>)> {
    cfg.validate()?;
    check_dims(left, xi.len())?;
    check_dims(right, xi.len())?;
    let kernel = MehlerKernel::new(cfg);
    let cells = left.len() * right.len();
    let d = right.len();
    let chunks = map_chunks(cfg.units(), INNER_CHUNK, cfg.seed, |range, rng: &mut StreamRng| {
        let mut sc = KernelScratch::default();
        kernel.prepare(left, xi, &mut sc)?;
        let mut g = vec![RunningStats::new(); cells];
        let mut dl = vec![RunningStats::new(); if with_delta { cells } else { 0 }];
        let mut y = vec![0.0; cells];
        let mut dy = vec![0.0; if with_delta { cells } else { 0 }];
        for _ in range {
            kernel.unit(right, xi, rng, &mut sc, &mut y)?;
            g.iter_mut().zip(&y).for_each(|(s, v)| s.push(*v));
            if with_delta {
                delta_from_gamma(d, &y, &mut dy);
                dl.iter_mut().zip(&dy).for_each(|(s, v)| s.push(*v));
            }
        }
        Ok::<_, Error>((g, dl))
    });
    let mut g = vec![RunningStats::new(); cells];
    let mut dl = vec![RunningStats::new(); if with_delta { cells } else { 0 }];
    for c in chunks {
        let (cg, cd) = c?;
        g.iter_mut().zip(&cg).for_each(|(a, b)| a.merge(b));
        dl.iter_mut().zip(&cd).for_each(|(a, b)| a.merge(b));
    }
    Ok((g, dl))
}

fn to_estimates(stats: &[RunningStats], cfg: &MehlerConfig) -> Vec<GammaEstimate> {
    let draws = if cfg.antithetic { 2 } else { 1 };
    stats
        .iter()
        .map(|s| {
            let mut e = s.estimate();
            e.n_samples *= draws;
            e
        })
        .collect()
}

/// Γ_{F,G}(ω) estimated by the Mehler representation.
pub fn gamma_pointwise(
    f: &dyn Differentiable,
    g: &dyn Differentiable,
    omega: &SamplePoint,
    cfg: &MehlerConfig,
) -> Result<GammaEstimate> {
    let (stats, _) = run_units(&[f], &[g], &omega.coords, cfg, false)?;
    Ok(to_estimates(&stats, cfg)[0])
}

/// All Γ_{F_i,F_j}(ω) and Δ_F(i,j)(ω) of a field, from shared inner draws.
pub fn gamma_matrix(field: &[&dyn Differentiable], omega: &SamplePoint, cfg: &MehlerConfig) -> Result<GammaMatrix> {
    let (g, d) = run_units(field, field, &omega.coords, cfg, true)?;
    Ok(GammaMatrix {
        dim: field.len(),
        gamma: to_estimates(&g, cfg),
        delta: to_estimates(&d, cfg),
    })
}

/// Δ_F(s,t)(ω) = Γ_{F_t−F_s, F_t−F_s}(ω).
pub fn capital_delta(
    f_s: &dyn Differentiable,
    f_t: &dyn Differentiable,
    omega: &SamplePoint,
    cfg: &MehlerConfig,
) -> Result<GammaEstimate> {
    let diff = crate::wiener::Difference { a: f_t, b: f_s };
    gamma_pointwise(&diff, &diff, omega, cfg)
}
