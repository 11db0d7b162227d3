//! Euler scheme for `F_t = x₀ + B^H_t + ∫₀ᵗ b(F_s) ds`, its Malliavin
//! derivative and the Δ_F estimator.

use super::grid::{FbmGrid, FbmPath};
use crate::error::{Error, Result};
use crate::gamma::{inner_units, KernelScratch, MehlerConfig, MehlerKernel};
use crate::linalg::Matrix;
use crate::parallel::{derive_seed, map_chunks};
use crate::stats::{Estimate, RunningStats};
use crate::wiener::{Differentiable, Workspace};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monotone {
    Increasing,
    Decreasing,
    Constant,
    None,
}

/// Built-in Lipschitz drifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriftSpec {
    Zero,
    Constant { c: f64 },
    /// `b(x) = a·x`
    Linear { a: f64 },
    /// `b(x) = a·tanh(x)`
    Tanh { a: f64 },
    /// `b(x) = a·sin(x)`, not monotone
    Sine { a: f64 },
}

impl DriftSpec {
    pub fn tanh() -> Self {
        Self::Tanh { a: 1.0 }
    }

    pub fn neg_tanh() -> Self {
        Self::Tanh { a: -1.0 }
    }

    pub fn b(&self, x: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Constant { c } => c,
            Self::Linear { a } => a * x,
            Self::Tanh { a } => a * x.tanh(),
            Self::Sine { a } => a * x.sin(),
        }
    }

    pub fn b_prime(&self, x: f64) -> f64 {
        match *self {
            Self::Zero | Self::Constant { .. } => 0.0,
            Self::Linear { a } => a,
            Self::Tanh { a } => {
                let t = x.tanh();
                a * (1.0 - t * t)
            }
            Self::Sine { a } => a * x.cos(),
        }
    }

    pub fn lipschitz_bound(&self) -> f64 {
        match *self {
            Self::Zero | Self::Constant { .. } => 0.0,
            Self::Linear { a } | Self::Tanh { a } | Self::Sine { a } => a.abs(),
        }
    }

    pub fn monotone(&self) -> Monotone {
        match *self {
            Self::Zero | Self::Constant { .. } => Monotone::Constant,
            Self::Linear { a } | Self::Tanh { a } if a > 0.0 => Monotone::Increasing,
            Self::Linear { a } | Self::Tanh { a } if a < 0.0 => Monotone::Decreasing,
            Self::Linear { .. } | Self::Tanh { .. } => Monotone::Constant,
            Self::Sine { a } if a == 0.0 => Monotone::Constant,
            Self::Sine { .. } => Monotone::None,
        }
    }
}

/// A solved path on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SdePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub increments: Vec<f64>,
    pub xi: Vec<f64>,
}

fn euler_into(x0: f64, drift: &DriftSpec, times: &[f64], increments: &[f64], out: &mut [f64]) {
    out[0] = x0;
    for k in 0..increments.len() {
        let f = out[k];
        out[k + 1] = f + increments[k] + drift.b(f) * (times[k + 1] - times[k]);
    }
}

/// `F_{k+1} = F_k + (B_{k+1} − B_k) + b(F_k)(t_{k+1} − t_k)`.
pub fn euler_solve(x0: f64, drift: &DriftSpec, grid: &FbmGrid, path: &FbmPath) -> SdePath {
    let mut values = vec![0.0; grid.steps() + 1];
    euler_into(x0, drift, grid.times(), &path.increments, &mut values);
    SdePath {
        times: grid.times().to_vec(),
        values,
        increments: path.increments.clone(),
        xi: path.xi.clone(),
    }
}

/// Cumulative trapezoid integral of `b′(F)` along the grid.
fn exponent_into(drift: &DriftSpec, times: &[f64], values: &[f64], out: &mut [f64]) {
    out[0] = 0.0;
    let mut prev = drift.b_prime(values[0]);
    for k in 1..values.len() {
        let cur = drift.b_prime(values[k]);
        out[k] = out[k - 1] + 0.5 * (prev + cur) * (times[k] - times[k - 1]);
        prev = cur;
    }
}

/// `D_{t_j} F_{t_k} = exp(∫_{t_j}^{t_k} b′(F_w) dw)` for `j ≤ k`, zero above
/// the diagonal; the exponent uses the trapezoid rule.
pub fn sde_malliavin(path: &SdePath, drift: &DriftSpec) -> Matrix {
    let n = path.values.len();
    let mut e = vec![0.0; n];
    exponent_into(drift, &path.times, &path.values, &mut e);
    Matrix::from_fn(n, |k, j| if j <= k { (e[k] - e[j]).exp() } else { 0.0 })
}

/// `F_{t_t} − F_{t_s}` as a differentiable functional of the whitened
/// coordinates; the derivative comes from the trapezoid formula, with the
/// increment over `(t_l, t_{l+1}]` carrying `D_{t_{l+1}}`.
pub struct SdeIncrement<'a> {
    grid: &'a FbmGrid,
    drift: DriftSpec,
    x0: f64,
    s: usize,
    t: usize,
}

#[derive(Default)]
struct IncrementScratch {
    x: Vec<f64>,
    f: Vec<f64>,
    e: Vec<f64>,
    c: Vec<f64>,
}

thread_local! {
    static SCRATCH: RefCell<IncrementScratch> = RefCell::new(IncrementScratch::default());
}

impl<'a> SdeIncrement<'a> {
    pub fn new(grid: &'a FbmGrid, drift: DriftSpec, x0: f64, s: usize, t: usize) -> Result<Self> {
        let m = grid.steps();
        if s > m || t > m {
            return Err(Error::InvalidArgument(format!("grid index out of range (m = {m})")));
        }
        Ok(Self { grid, drift, x0, s, t })
    }
}

impl Differentiable for SdeIncrement<'_> {
    fn dim(&self) -> usize {
        self.grid.steps()
    }

    fn eval_grad(&self, xi: &[f64], grad: &mut [f64], _ws: &mut Workspace) -> Result<f64> {
        let m = self.grid.steps();
        SCRATCH.with(|cell| {
            let sc = &mut *cell.borrow_mut();
            sc.x.resize(m, 0.0);
            sc.f.resize(m + 1, 0.0);
            sc.e.resize(m + 1, 0.0);
            sc.c.resize(m, 0.0);
            self.grid.increments_into(xi, &mut sc.x);
            let times = self.grid.times();
            euler_into(self.x0, &self.drift, times, &sc.x, &mut sc.f);
            exponent_into(&self.drift, times, &sc.f, &mut sc.e);
            for l in 0..m {
                let u = l + 1;
                let dt = if u <= self.t { (sc.e[self.t] - sc.e[u]).exp() } else { 0.0 };
                let ds = if u <= self.s { (sc.e[self.s] - sc.e[u]).exp() } else { 0.0 };
                sc.c[l] = dt - ds;
            }
            self.grid.space().pull_back_into(&sc.c, grad);
            let v = sc.f[self.t] - sc.f[self.s];
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Overflow("SDE path".into()))
            }
        })
    }
}

/// Outer-averaged Δ_F(s,t) from nested Mehler estimates on the increment space.
pub fn delta_fbm(
    grid: &FbmGrid,
    drift: DriftSpec,
    x0: f64,
    s_idx: usize,
    t_idx: usize,
    cfg: &MehlerConfig,
    n_outer: usize,
) -> Result<Estimate> {
    if s_idx > t_idx {
        return Err(Error::InvalidArgument(format!("need s ≤ t, got s={s_idx}, t={t_idx}")));
    }
    cfg.validate()?;
    let f = SdeIncrement::new(grid, drift, x0, s_idx, t_idx)?;
    let kernel = MehlerKernel::new(cfg);
    let units = inner_units(cfg);
    let m = grid.steps();
    let chunks = map_chunks(n_outer, 16, derive_seed(cfg.seed, 0xfb), |range, rng| {
        let mut sc = KernelScratch::default();
        let mut st = RunningStats::new();
        let mut xi = vec![0.0; m];
        let mut out = [0.0];
        for _ in range {
            xi.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            kernel.average(&[&f], &[&f], &xi, units, rng, &mut sc, &mut out)?;
            st.push(out[0]);
        }
        Ok::<_, Error>(st)
    });
    let mut total = RunningStats::new();
    for c in chunks {
        total.merge(&c?);
    }
    Ok(total.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::grid::fbm_sample;
    use crate::parallel::stream_rng;

    #[test]
    fn zero_and_constant_drift() {
        let g = FbmGrid::uniform(0.7, 1.0, 32).unwrap();
        let p = fbm_sample(&g, &mut stream_rng(1, 0));
        let z = euler_solve(0.5, &DriftSpec::Zero, &g, &p);
        for (f, b) in z.values.iter().zip(&p.values) {
            assert!((f - 0.5 - b).abs() < 1e-12);
        }
        let c = euler_solve(0.5, &DriftSpec::Constant { c: 2.0 }, &g, &p);
        for ((f, b), t) in c.values.iter().zip(&p.values).zip(g.times()) {
            assert!((f - 0.5 - b - 2.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_closed_forms() {
        let g = FbmGrid::uniform(0.7, 1.0, 8).unwrap();
        let p = fbm_sample(&g, &mut stream_rng(2, 0));
        let m0 = sde_malliavin(&euler_solve(0.0, &DriftSpec::Zero, &g, &p), &DriftSpec::Zero);
        let lin = DriftSpec::Linear { a: 0.3 };
        let m1 = sde_malliavin(&euler_solve(0.0, &lin, &g, &p), &lin);
        let t = g.times();
        for k in 0..=8 {
            for j in 0..=8 {
                let ind = if j <= k { 1.0 } else { 0.0 };
                assert_eq!(m0[(k, j)], ind);
                assert!((m1[(k, j)] - ind * (0.3 * (t[k] - t[j])).exp()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ou_variance() {
        let g = FbmGrid::uniform(0.501, 1.0, 256).unwrap();
        let drift = DriftSpec::Linear { a: -1.0 };
        let mut rng = stream_rng(3, 0);
        let mut st = RunningStats::new();
        for _ in 0..20_000 {
            let p = fbm_sample(&g, &mut rng);
            let f = euler_solve(0.0, &drift, &g, &p).values[256];
            st.push(f * f);
        }
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((st.mean() - exact).abs() < 3.0 * st.std_error() + 0.01, "{} vs {exact}", st.mean());
    }

    #[test]
    fn monotone_flags() {
        assert_eq!(DriftSpec::tanh().monotone(), Monotone::Increasing);
        assert_eq!(DriftSpec::neg_tanh().monotone(), Monotone::Decreasing);
        assert_eq!(DriftSpec::Zero.monotone(), Monotone::Constant);
        assert_eq!(DriftSpec::Sine { a: 1.0 }.monotone(), Monotone::None);
    }

    #[test]
    fn delta_without_drift_is_fbm_metric() {
        let g = FbmGrid::uniform(0.7, 1.0, 16).unwrap();
        let cfg = MehlerConfig { quad_nodes: 4, mc_samples: 2, antithetic: true, seed: 1 };
        let e = delta_fbm(&g, DriftSpec::Zero, 0.0, 4, 12, &cfg, 8).unwrap();
        assert!((e.value - 0.5f64.powf(1.4)).abs() < 1e-12, "{e:?}");
        assert_eq!(delta_fbm(&g, DriftSpec::tanh(), 0.0, 5, 5, &cfg, 8).unwrap().value, 0.0);
    }
}
