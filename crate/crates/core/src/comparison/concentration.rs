//! Joint upper-tail bound `P[F ≥ x] ≤ exp(−‖x‖²/(2‖C‖_op))` under `Γ ⪯ C`.

use super::sudakov::{check_field_centered, merge_chunks};
use crate::error::{Error, Result};
use crate::gamma::{gamma_matrix, MehlerConfig};
use crate::linalg::{min_eigenvalue, operator_norm, Matrix};
use crate::parallel::{derive_seed, map_chunks, stream_rng};
use crate::stats::{Estimate, RunningStats};
use crate::wiener::{RandomField, Workspace};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdAudit {
    pub n_points: usize,
    /// Smallest eigenvalue of C − Γ̂ over the sampled points.
    pub min_eigenvalue: f64,
    /// Smallest value of λ_min(C − Γ̂) + 3‖se(Γ̂)‖_F over the sampled points,
    /// with a round-off allowance of 1e-12·(1 + ‖C‖_max).
    pub worst_margin: f64,
}

impl PsdAudit {
    pub fn ok(&self) -> bool {
        self.worst_margin >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationResult {
    pub tail: Estimate,
    pub bound: f64,
    pub operator_norm: f64,
    pub psd: PsdAudit,
    pub pass: bool,
}

/// Samples Γ at `n_psd` points and tests `C − Γ ⪰ 0` up to 3 standard errors.
pub fn audit_psd(field: &RandomField, c: &Matrix, n_psd: usize, cfg: &MehlerConfig) -> Result<PsdAudit> {
    let d = field.len();
    let comps = field.as_dyn();
    let mut rng = stream_rng(derive_seed(cfg.seed, 0xc0), 0);
    let mut min_eig = f64::INFINITY;
    let mut worst = f64::INFINITY;
    let roundoff = 1e-12 * (1.0 + c.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    for k in 0..n_psd {
        let omega = field.space().sample(&mut rng);
        let local = cfg.with_seed(derive_seed(cfg.seed, 0x1000 + k as u64));
        let gm = gamma_matrix(&comps, &omega, &local)?;
        let diff = Matrix::from_fn(d, |i, j| c[(i, j)] - 0.5 * (gm.gamma(i, j).value + gm.gamma(j, i).value));
        let se: f64 = gm.gamma.iter().map(|e| e.std_error * e.std_error).sum::<f64>().sqrt();
        let lam = min_eigenvalue(&diff);
        min_eig = min_eig.min(lam);
        worst = worst.min(lam + 3.0 * se + roundoff);
    }
    Ok(PsdAudit {
        n_points: n_psd,
        min_eigenvalue: min_eig,
        worst_margin: worst,
    })
}

/// Empirical `P[F_1 ≥ x_1, …, F_d ≥ x_d]` against the Gaussian-type bound.
pub fn concentration_check(
    field: &RandomField,
    c: &Matrix,
    x: &[f64],
    n_outer: usize,
    n_psd: usize,
    cfg: &MehlerConfig,
) -> Result<ConcentrationResult> {
    let d = field.len();
    if c.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: c.dim() });
    }
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    if let Some(v) = x.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("thresholds must be nonnegative, got {v}")));
    }
    c.check_symmetric(1e-12)?;
    let lam = min_eigenvalue(c);
    if lam < -1e-10 {
        return Err(Error::NotPsd { eigenvalue: lam });
    }
    check_field_centered(field, derive_seed(cfg.seed, 0xc1), 4.0)?;
    let psd = audit_psd(field, c, n_psd, cfg)?;
    if !psd.ok() {
        return Err(Error::ConditionViolated(format!(
            "C − Γ is not positive semidefinite at a sampled point (eigenvalue {:.3e})",
            psd.min_eigenvalue
        )));
    }
    let norm = operator_norm(c)?;
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let bound = if x2 == 0.0 { 1.0 } else { (-x2 / (2.0 * norm)).exp() };
    let comps = field.as_dyn();
    let dim = field.space().dim();
    let chunks = map_chunks(n_outer, 8192, derive_seed(cfg.seed, 0xc2), |range, rng| {
        let mut ws = Workspace::default();
        let mut xi = vec![0.0; dim];
        let mut st = RunningStats::new();
        for _ in range {
            xi.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let mut hit = true;
            for (comp, &xk) in comps.iter().zip(x) {
                if comp.eval(&xi, &mut ws)? < xk {
                    hit = false;
                    break;
                }
            }
            st.push(if hit { 1.0 } else { 0.0 });
        }
        Ok(vec![st])
    });
    let tail = merge_chunks(chunks, 1)?[0].estimate();
    Ok(ConcentrationResult {
        tail,
        bound,
        operator_norm: norm,
        psd,
        pass: tail.value <= bound + 3.0 * tail.std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wiener::{w, Functional, WienerSpace};
    use std::sync::Arc;

    fn cfg() -> MehlerConfig {
        MehlerConfig { quad_nodes: 8, mc_samples: 4, antithetic: true, seed: 1 }
    }

    #[test]
    fn gaussian_tail_at_two() {
        let s = Arc::new(WienerSpace::new(1).unwrap());
        let f = RandomField::new(vec![Functional::new(s, w(0)).unwrap()]).unwrap();
        let r = concentration_check(&f, &Matrix::identity(1), &[2.0], 200_000, 8, &cfg()).unwrap();
        assert!((r.bound - (-2.0f64).exp()).abs() < 1e-15);
        let exact = 0.5 * statrs::function::erf::erfc(2.0 / 2f64.sqrt());
        assert!((r.tail.value - exact).abs() < 4.0 * r.tail.std_error);
        assert!(r.pass);
        assert!(r.psd.min_eigenvalue.abs() < 1e-12);
    }

    #[test]
    fn zero_threshold_gives_unit_bound() {
        let s = Arc::new(WienerSpace::new(1).unwrap());
        let f = RandomField::new(vec![Functional::new(s, w(0)).unwrap()]).unwrap();
        let r = concentration_check(&f, &Matrix::identity(1), &[0.0], 10_000, 4, &cfg()).unwrap();
        assert_eq!(r.bound, 1.0);
        assert!(r.pass);
    }

    #[test]
    fn too_small_c_is_refused() {
        let s = Arc::new(WienerSpace::new(1).unwrap());
        let f = RandomField::new(vec![Functional::new(s, w(0) * crate::wiener::constant(2.0)).unwrap()]).unwrap();
        let r = concentration_check(&f, &Matrix::identity(1), &[1.0], 1000, 4, &cfg());
        assert!(matches!(r, Err(Error::ConditionViolated(_))));
    }
}
