//! Integration by parts and the Γ-Poincaré moment bound, both estimated over
//! fresh outer samples with a nested Mehler estimate of Γ at each sample.

use super::mehler::{inner_units, KernelScratch, MehlerConfig, MehlerKernel};
use crate::error::{Error, Result};
use crate::parallel::{derive_seed, map_chunks};
use crate::stats::{Estimate, RunningStats};
use crate::wiener::Differentiable;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

const OUTER_CHUNK: usize = 64;

/// A smooth scalar map together with its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarMap {
    Identity,
    Square,
    Cube,
    Tanh,
    Exp,
}

impl ScalarMap {
    pub fn value(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Square => x * x,
            Self::Cube => x * x * x,
            Self::Tanh => x.tanh(),
            Self::Exp => x.exp(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Square => 2.0 * x,
            Self::Cube => 3.0 * x * x,
            Self::Tanh => 1.0 - x.tanh().powi(2),
            Self::Exp => x.exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "id",
            Self::Square => "x^2",
            Self::Cube => "x^3",
            Self::Tanh => "tanh",
            Self::Exp => "exp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IbpResult {
    /// E[Φ(F)G]
    pub lhs: Estimate,
    /// E[Φ′(F)Γ_{F,G}]
    pub rhs: Estimate,
    pub residual: f64,
    /// Standard error of the paired difference lhs − rhs.
    pub std_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareResult {
    pub p: f64,
    /// E|F|^p
    pub lhs: Estimate,
    /// (p−1)^{p/2} E|Γ_{F,F}|^{p/2}
    pub rhs: Estimate,
    /// Standard error of the paired difference lhs − rhs.
    pub std_error: f64,
    pub pass: bool,
}

/// Slack added to 3-standard-error rules so that exactly deterministic
/// quantities are compared up to rounding.
pub(crate) fn rounding_slack(scale: f64) -> f64 {
    1e-12 * scale.abs().max(1.0)
}

fn centered_or_err(stats: &RunningStats) -> Result<()> {
    let (m, se) = (stats.mean(), stats.std_error());
    if m.abs() > 3.0 * se + rounding_slack(0.0) {
        return Err(Error::NotCentered { mean: m, std_error: se });
    }
    Ok(())
}

/// Runs `n_outer` outer samples; `visit` receives ξ, F(ξ), G(ξ) and the
/// nested Γ_{F,G}(ξ) estimate.
fn outer_loop<const K: usize>(
    f: &dyn Differentiable,
    g: &dyn Differentiable,
    n_outer: usize,
    cfg: &MehlerConfig,
    visit: impl Fn(f64, f64, f64, &mut [RunningStats; K]) + Sync,
) -> Result<[RunningStats; K]> {
    cfg.validate()?;
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: g.dim(),
        });
    }
    if n_outer < 2 {
        return Err(Error::InvalidArgument("n_outer must be at least 2".into()));
    }
    let n = f.dim();
    let kernel = MehlerKernel::new(cfg);
    let units = inner_units(cfg);
    let chunks = map_chunks(n_outer, OUTER_CHUNK, derive_seed(cfg.seed, 0x07e), |range, rng| {
        let mut sc = KernelScratch::default();
        let mut stats = [RunningStats::new(); K];
        let mut xi = vec![0.0; n];
        let mut gamma = [0.0];
        for _ in range {
            xi.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            kernel.average(&[f], &[g], &xi, units, rng, &mut sc, &mut gamma)?;
            let fv = f.eval(&xi, &mut sc.ws)?;
            let gv = g.eval(&xi, &mut sc.ws)?;
            visit(fv, gv, gamma[0], &mut stats);
        }
        Ok::<_, Error>(stats)
    });
    let mut total = [RunningStats::new(); K];
    for c in chunks {
        let c = c?;
        total.iter_mut().zip(&c).for_each(|(a, b)| a.merge(b));
    }
    Ok(total)
}

/// Compares E[Φ(F)G] with E[Φ′(F)Γ_{F,G}]. `cfg.mc_samples` is the inner
/// sample count used at each outer point.
pub fn ibp_residual(
    phi: ScalarMap,
    f: &dyn Differentiable,
    g: &dyn Differentiable,
    n_outer: usize,
    cfg: &MehlerConfig,
) -> Result<IbpResult> {
    let [lhs, rhs, diff, gmean] = outer_loop::<4>(f, g, n_outer, cfg, |fv, gv, gamma, st| {
        let l = phi.value(fv) * gv;
        let r = phi.derivative(fv) * gamma;
        st[0].push(l);
        st[1].push(r);
        st[2].push(l - r);
        st[3].push(gv);
    })?;
    centered_or_err(&gmean)?;
    let residual = (lhs.mean() - rhs.mean()).abs();
    let se = diff.std_error();
    Ok(IbpResult {
        lhs: lhs.estimate(),
        rhs: rhs.estimate(),
        residual,
        std_error: se,
        pass: residual <= 3.0 * se + rounding_slack(lhs.mean()),
    })
}

/// E|F|^p against (p−1)^{p/2} E|Γ_{F,F}|^{p/2} for several exponents,
/// sharing the outer samples.
pub fn poincare_profile(f: &dyn Differentiable, ps: &[f64], n_outer: usize, cfg: &MehlerConfig) -> Result<Vec<PoincareResult>> {
    if let Some(&p) = ps.iter().find(|&&p| !(p >= 2.0)) {
        return Err(Error::InvalidArgument(format!("Poincaré exponent must be at least 2, got {p}")));
    }
    let mut results = Vec::with_capacity(ps.len());
    // three accumulators per exponent plus one for the mean of F
    const MAX_P: usize = 8;
    if ps.len() > MAX_P {
        return Err(Error::InvalidArgument(format!("at most {MAX_P} exponents per run")));
    }
    let ps_fixed: Vec<f64> = ps.to_vec();
    let stats = outer_loop::<{ 3 * MAX_P + 1 }>(f, f, n_outer, cfg, |fv, _, gamma, st| {
        for (k, &p) in ps_fixed.iter().enumerate() {
            let l = fv.abs().powf(p);
            let r = (p - 1.0).powf(p / 2.0) * gamma.abs().powf(p / 2.0);
            st[3 * k].push(l);
            st[3 * k + 1].push(r);
            st[3 * k + 2].push(l - r);
        }
        st[3 * MAX_P].push(fv);
    })?;
    centered_or_err(&stats[3 * MAX_P])?;
    for (k, &p) in ps.iter().enumerate() {
        let (l, r, d) = (&stats[3 * k], &stats[3 * k + 1], &stats[3 * k + 2]);
        let se = d.std_error();
        results.push(PoincareResult {
            p,
            lhs: l.estimate(),
            rhs: r.estimate(),
            std_error: se,
            pass: d.mean() <= 3.0 * se + rounding_slack(l.mean()),
        });
    }
    Ok(results)
}

pub fn poincare_check(f: &dyn Differentiable, p: f64, n_outer: usize, cfg: &MehlerConfig) -> Result<PoincareResult> {
    Ok(poincare_profile(f, &[p], n_outer, cfg)?.remove(0))
}
