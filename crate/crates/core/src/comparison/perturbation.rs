//! Gaussian vectors perturbed by increasing functions of nonnegatively
//! correlated Gaussian variables: `F_i = G_i + Φ_i(I₁(f_{i,1}), …)`.

use super::slepian::{expectation_pair, ExpectationPair, HessianFunction};
use crate::error::{Error, Result};
use crate::gamma::{gamma_matrix, GammaMatrix, MehlerConfig};
use crate::linalg::{dot, Matrix};
use crate::parallel::{derive_seed, stream_rng};
use crate::stats::Estimate;
use crate::wiener::{Expression, Functional, RandomField, SamplePoint, WienerSpace};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::sync::Arc;

const MONOTONE_PROBES: usize = 256;
const CENTERING_SAMPLES: usize = 200_000;

/// One perturbed component: `g` and the directions `f_k` are vectors in the
/// whitened coordinates; `phi` is an expression in slot variables `w0, w1, …`
/// standing for `I₁(f_0), I₁(f_1), …`.
#[derive(Debug, Clone)]
pub struct PerturbedComponent {
    pub g: Vec<f64>,
    pub f: Vec<Vec<f64>>,
    pub phi: Option<Expression>,
}

#[derive(Debug, Clone)]
pub struct PerturbationModel {
    space: Arc<WienerSpace>,
    components: Vec<PerturbedComponent>,
    perturbed: RandomField,
    gaussian: RandomField,
}

impl PerturbationModel {
    /// Validates the sign conditions and builds both fields on an identity
    /// space of dimension `n`.
    pub fn new(n: usize, components: Vec<PerturbedComponent>, seed: u64) -> Result<Self> {
        let space = Arc::new(WienerSpace::new(n)?);
        for c in &components {
            if c.g.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.g.len() });
            }
            if let Some(v) = c.f.iter().find(|v| v.len() != n) {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        for (i, ci) in components.iter().enumerate() {
            for (k, fik) in ci.f.iter().enumerate() {
                for (j, cj) in components.iter().enumerate() {
                    let ip = dot(fik, &cj.g);
                    if ip < 0.0 {
                        return Err(Error::ConditionViolated(format!("<f[{i}][{k}], g[{j}]> = {ip} is negative")));
                    }
                    for (l, fjl) in cj.f.iter().enumerate() {
                        let ip = dot(fik, fjl);
                        if ip < 0.0 {
                            return Err(Error::ConditionViolated(format!(
                                "<f[{i}][{k}], f[{j}][{l}]> = {ip} is negative"
                            )));
                        }
                    }
                }
            }
        }
        let mut rng = stream_rng(seed, 0);
        let mut perturbed = Vec::new();
        let mut gaussian = Vec::new();
        for (i, c) in components.iter().enumerate() {
            let gi = Expression::linear(&c.g);
            gaussian.push(Functional::new(space.clone(), gi.clone())?);
            let Some(phi) = &c.phi else {
                perturbed.push(Functional::new(space.clone(), gi)?);
                continue;
            };
            check_monotone(i, phi, c.f.len(), &mut rng)?;
            let f = c.f.clone();
            let inner = phi.substitute(&|k| Expression::linear(&f[k]));
            let part = Functional::new(space.clone(), inner.clone())?;
            let shift = if is_odd(phi, c.f.len(), &mut rng) {
                0.0
            } else {
                part.mean_mc(CENTERING_SAMPLES, derive_seed(seed, i as u64 + 1))?.value
            };
            perturbed.push(Functional::new(space.clone(), gi + inner)?.with_mean_shift(shift));
        }
        Ok(Self {
            space,
            components,
            perturbed: RandomField::new(perturbed)?,
            gaussian: RandomField::new(gaussian)?,
        })
    }

    pub fn space(&self) -> &Arc<WienerSpace> {
        &self.space
    }

    pub fn perturbed(&self) -> &RandomField {
        &self.perturbed
    }

    pub fn gaussian(&self) -> &RandomField {
        &self.gaussian
    }

    /// `C_ij = ⟨g_i, g_j⟩`.
    pub fn covariance(&self) -> Matrix {
        let d = self.components.len();
        Matrix::from_fn(d, |i, j| dot(&self.components[i].g, &self.components[j].g))
    }
}

fn slot_point(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn check_monotone(i: usize, phi: &Expression, slots: usize, rng: &mut impl Rng) -> Result<()> {
    if let Some(m) = phi.max_coordinate() {
        if m >= slots {
            return Err(Error::CoordinateOutOfRange { index: m, dim: slots });
        }
    }
    let tape = phi.compile(slots);
    let mut grad = vec![0.0; slots];
    let mut scratch = Default::default();
    for _ in 0..MONOTONE_PROBES {
        let p = slot_point(rng, slots);
        tape.eval_grad(&p, &mut grad, &mut scratch);
        if let Some(k) = grad.iter().position(|g| *g < 0.0) {
            return Err(Error::ConditionViolated(format!(
                "Φ[{i}] decreases in slot {k} at {p:?} (derivative {})",
                grad[k]
            )));
        }
    }
    Ok(())
}

fn is_odd(phi: &Expression, slots: usize, rng: &mut impl Rng) -> bool {
    (0..32).all(|_| {
        let p = slot_point(rng, slots);
        let q: Vec<f64> = p.iter().map(|v| -v).collect();
        phi.eval(&p) == -phi.eval(&q)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationGamma {
    pub gamma: GammaMatrix,
    pub baseline: Vec<Vec<f64>>,
    /// Γ_ij − ⟨g_i, g_j⟩, row-major.
    pub excess: Vec<Estimate>,
    /// Every excess ≥ −3 standard errors.
    pub dominates: bool,
}

/// Samples the Γ matrix of the perturbed vector at `omega`.
pub fn perturbation_gamma(model: &PerturbationModel, omega: &SamplePoint, cfg: &MehlerConfig) -> Result<PerturbationGamma> {
    let comps = model.perturbed.as_dyn();
    let gamma = gamma_matrix(&comps, omega, cfg)?;
    let c = model.covariance();
    let excess: Vec<Estimate> = gamma
        .gamma
        .iter()
        .zip(c.as_slice())
        .map(|(e, cij)| Estimate {
            value: e.value - cij,
            ..*e
        })
        .collect();
    let dominates = excess.iter().all(|e| e.value >= -3.0 * e.std_error - 1e-12);
    Ok(PerturbationGamma {
        gamma,
        baseline: c.to_rows(),
        excess,
        dominates,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub points: Vec<PerturbationGamma>,
    pub expectations: ExpectationPair,
}

impl PerturbationReport {
    pub fn gamma_dominates(&self) -> bool {
        self.points.iter().all(|p| p.dominates)
    }

    pub fn pass(&self) -> bool {
        self.gamma_dominates() && self.expectations.f_dominates()
    }
}

/// Γ ⪰ C entrywise at `n_points` sampled points, and E[Ψ(F)] against E[Ψ(G)].
pub fn perturbation_experiment(
    model: &PerturbationModel,
    psi: &HessianFunction,
    n_points: usize,
    n_direct: usize,
    cfg: &MehlerConfig,
) -> Result<PerturbationReport> {
    let mut rng = stream_rng(derive_seed(cfg.seed, 0x9e), 0);
    let mut points = Vec::with_capacity(n_points);
    for k in 0..n_points {
        let omega = model.space.sample(&mut rng);
        points.push(perturbation_gamma(model, &omega, &cfg.with_seed(derive_seed(cfg.seed, 0x9f00 + k as u64)))?);
    }
    let expectations = expectation_pair(&model.perturbed, &model.gaussian, psi, n_direct, derive_seed(cfg.seed, 0x9d))?;
    Ok(PerturbationReport { points, expectations })
}
