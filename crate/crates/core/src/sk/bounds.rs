//! Comparison bounds between media families and finite-size experiments on
//! the free energy.

use super::audit::audit_row;
use super::energy::{free_energy_and_gradient, free_energy_exact, GibbsTable, MAX_EXACT_N};
use super::media::{n_pairs, Medium, MediumFamily, MediumSampler};
use crate::error::{Error, Result};
use crate::parallel::{derive_seed, map_chunks};
use crate::stats::{Estimate, RunningStats};
use crate::wiener::{Differentiable, Workspace};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const MAX_GENERIC_N: usize = 20;
pub const MAX_GAMMA_BOUND_N: usize = 12;
const MEDIA_CHUNK: usize = 8;

/// Test maps with `‖f′‖∞ ≤ 1` and `‖f″‖∞ ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestMap {
    Tanh,
    /// `s·sin(x/s)`; needs `s ≥ 1` for the second-derivative bound.
    Sine { scale: f64 },
}

impl TestMap {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Sine { scale } if !(scale >= 1.0 && scale.is_finite()) => Err(Error::InvalidArgument(format!(
                "sine test map needs scale >= 1 for |f''| <= 1, got {scale}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Self::Tanh => x.tanh(),
            Self::Sine { scale } => scale * (x / scale).sin(),
        }
    }
}

fn media_stats(
    family: MediumFamily,
    n: usize,
    beta: f64,
    n_media: usize,
    seed: u64,
    f: impl Fn(f64) -> f64 + Sync,
) -> Result<RunningStats> {
    let sampler = MediumSampler::new(family, n)?;
    let chunks = map_chunks(n_media, MEDIA_CHUNK, seed, |range, rng| -> Result<RunningStats> {
        let mut st = RunningStats::new();
        for _ in range {
            let m = sampler.sample(rng);
            st.push(f(free_energy_exact(&m, beta)?.value));
        }
        Ok(st)
    });
    let mut total = RunningStats::new();
    for c in chunks {
        total.merge(&c?);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenericBoundResult {
    pub family: MediumFamily,
    pub n: usize,
    pub beta: f64,
    pub test_map: TestMap,
    pub mean_reference: Estimate,
    pub mean_family: Estimate,
    /// `|E f(F*) − E f(F)|` with `F = N^{-1} log Z`.
    pub lhs: f64,
    pub std_error: f64,
    /// `(3cγ²/2)[Σ E|Γ*−Γ| + Σ_{a≠b} E|Γ_ab|]`, `c = 1/N`, `γ = β/√N`.
    pub rhs: f64,
    /// The same bracket with `γ² = 2β²/N`, the coupling scale of `H_N`.
    pub rhs_hamiltonian_scale: f64,
    pub diag_sum: f64,
    pub cross_sum: f64,
    pub pass: bool,
}

/// Compares the free energy under `family` with the IID Gaussian reference.
pub fn generic_bound_check(
    family: MediumFamily,
    f: TestMap,
    beta: f64,
    n: usize,
    n_media: usize,
    seed: u64,
) -> Result<GenericBoundResult> {
    f.validate()?;
    if n > MAX_GENERIC_N {
        return Err(Error::TooLarge { n, limit: MAX_GENERIC_N });
    }
    if n_media < 2 {
        return Err(Error::InvalidArgument("need at least two media per family".into()));
    }
    let audit = audit_row(family, n, 1.0)?;
    let star = media_stats(MediumFamily::IidGaussian, n, beta, n_media, derive_seed(seed, 0x5c1), |x| f.value(x))?;
    let other = media_stats(family, n, beta, n_media, derive_seed(seed, 0x5c2), |x| f.value(x))?;
    let lhs = (star.mean() - other.mean()).abs();
    let std_error = star.std_error().hypot(other.std_error());
    let bracket = audit.diag_sum + audit.cross_sum;
    let nf = n as f64;
    let c = 1.0 / nf;
    let rhs = 1.5 * c * (beta * beta / nf) * bracket;
    Ok(GenericBoundResult {
        family,
        n,
        beta,
        test_map: f,
        mean_reference: star.estimate(),
        mean_family: other.estimate(),
        lhs,
        std_error,
        rhs,
        rhs_hamiltonian_scale: 2.0 * rhs,
        diag_sum: audit.diag_sum,
        cross_sum: audit.cross_sum,
        pass: lhs <= rhs + 3.0 * std_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaBoundResult {
    pub n: usize,
    pub beta: f64,
    /// `|Γ_{F_N,F_N}| = (2β²/N³)|Σ_{i>j} Γ_{J_ij,J_ij} E⊗Ẽ[σ_iσ̃_iσ_jσ̃_j]|`
    pub lhs: f64,
    /// `(2β²/N³) Σ_{i>j} |Γ_{J_ij,J_ij}|`
    pub rhs: f64,
    pub pass: bool,
}

/// Exact two-replica evaluation for one medium with uncorrelated entries.
pub fn gamma_f_bound_check(medium: &Medium, beta: f64) -> Result<GammaBoundResult> {
    let n = medium.n;
    if n > MAX_GAMMA_BOUND_N {
        return Err(Error::TooLarge {
            n,
            limit: MAX_GAMMA_BOUND_N,
        });
    }
    if matches!(medium.family, MediumFamily::CorrelatedGaussian { .. }) {
        return Err(Error::ConditionViolated(
            "the Γ bound needs media with vanishing cross-Γ".into(),
        ));
    }
    // the replicas are independent, so E⊗Ẽ[τ_n τ̃_n] = ⟨τ_n⟩²
    let corr = GibbsTable::new(medium, beta)?.pair_correlations();
    let mut s = 0.0;
    let mut s_abs = 0.0;
    for (g, c) in medium.gamma_diag.iter().zip(&corr) {
        s += g * (c * c);
        s_abs += g.abs();
    }
    let k = 2.0 * beta * beta / (n as f64).powi(3);
    let lhs = k * s.abs();
    let rhs = k * s_abs;
    Ok(GammaBoundResult {
        n,
        beta,
        lhs,
        rhs,
        pass: lhs <= rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub family: MediumFamily,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub std_error: f64,
    /// `|mean − mean of the first family|` at the same `N`.
    pub gap: f64,
    pub gap_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub beta: f64,
    pub n_media: usize,
    pub coupling: Coupling,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn rows_for(&self, family_index: usize) -> impl Iterator<Item = &ConvergenceRow> {
        let k = self.rows.len() / self.n_families().max(1);
        self.rows.iter().skip(family_index * k).take(k)
    }

    fn n_families(&self) -> usize {
        let n0 = self.rows.first().map(|r| r.n);
        self.rows.iter().filter(|r| Some(r.n) == n0).count()
    }

    /// Gaps of one family strictly decreasing along the ladder.
    pub fn gap_decreasing(&self, family_index: usize) -> bool {
        let g: Vec<f64> = self.rows_for(family_index).map(|r| r.gap).collect();
        g.windows(2).all(|w| w[1] < w[0])
    }
}

/// How media of different families are drawn relative to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Independent media per family.
    #[default]
    Independent,
    /// All families built from the same base normals per entry; each
    /// family keeps its own law, and gaps become paired differences.
    Quantile,
}

/// Mean and spread of `N^{-1} log Z` per family and size; gaps are taken
/// against the first family.
pub fn convergence_experiment(
    families: &[MediumFamily],
    beta: f64,
    ladder: &[usize],
    n_media: usize,
    coupling: Coupling,
    seed: u64,
) -> Result<ConvergenceTable> {
    if families.is_empty() {
        return Err(Error::InvalidArgument("need at least one family".into()));
    }
    if let Some(&n) = ladder.iter().find(|&&n| n > MAX_EXACT_N) {
        return Err(Error::TooLarge { n, limit: MAX_EXACT_N });
    }
    let nf = families.len();
    let k = ladder.len();
    // per (family, N): stats of F, and of F − F_first (paired under coupling)
    let mut stats = vec![RunningStats::new(); nf * k];
    let mut diffs = vec![RunningStats::new(); nf * k];
    for (li, &n) in ladder.iter().enumerate() {
        match coupling {
            Coupling::Independent => {
                for (fi, &family) in families.iter().enumerate() {
                    let s = derive_seed(seed, ((fi as u64) << 32) | n as u64);
                    stats[fi * k + li] = media_stats(family, n, beta, n_media, s, |x| x)?;
                }
            }
            Coupling::Quantile => {
                let samplers = families
                    .iter()
                    .map(|&f| MediumSampler::new(f, n))
                    .collect::<Result<Vec<_>>>()?;
                let np = n_pairs(n);
                let chunks = map_chunks(n_media, MEDIA_CHUNK, derive_seed(seed, n as u64), |range, rng| {
                    let mut st = vec![RunningStats::new(); 2 * nf];
                    for _ in range {
                        let z: Vec<f64> = (0..np).map(|_| rng.sample(StandardNormal)).collect();
                        let mut first = 0.0;
                        for (fi, sampler) in samplers.iter().enumerate() {
                            let v = free_energy_exact(&sampler.from_base_gaussians(&z), beta)?.value;
                            if fi == 0 {
                                first = v;
                            }
                            st[fi].push(v);
                            st[nf + fi].push(v - first);
                        }
                    }
                    Ok(st)
                });
                for c in chunks {
                    let c: Vec<RunningStats> = c?;
                    for fi in 0..nf {
                        stats[fi * k + li].merge(&c[fi]);
                        diffs[fi * k + li].merge(&c[nf + fi]);
                    }
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(nf * k);
    for (fi, &family) in families.iter().enumerate() {
        for (li, &n) in ladder.iter().enumerate() {
            let st = &stats[fi * k + li];
            let base = &stats[li];
            let (gap, gap_std_error) = match coupling {
                _ if fi == 0 => (0.0, 0.0),
                Coupling::Independent => ((st.mean() - base.mean()).abs(), st.std_error().hypot(base.std_error())),
                Coupling::Quantile => {
                    let d = &diffs[fi * k + li];
                    (d.mean().abs(), d.std_error())
                }
            };
            rows.push(ConvergenceRow {
                family,
                n,
                mean: st.mean(),
                sd: st.std_dev(),
                std_error: st.std_error(),
                gap,
                gap_std_error,
            });
        }
    }
    Ok(ConvergenceTable {
        beta,
        n_media,
        coupling,
        rows,
    })
}

/// `N^{-1} log Z − shift` as a functional of the medium's Gaussian
/// coordinates, for Γ estimates through the Mehler engine.
#[derive(Debug, Clone)]
pub struct FreeEnergyFunctional {
    sampler: MediumSampler,
    beta: f64,
    shift: f64,
}

impl FreeEnergyFunctional {
    pub const MAX_N: usize = 12;

    pub fn new(family: MediumFamily, n: usize, beta: f64) -> Result<Self> {
        if n > Self::MAX_N {
            return Err(Error::TooLarge { n, limit: Self::MAX_N });
        }
        Ok(Self {
            sampler: MediumSampler::new(family, n)?,
            beta,
            shift: 0.0,
        })
    }

    /// Subtracts a Monte Carlo estimate of the mean.
    pub fn centered(mut self, n_media: usize, seed: u64) -> Result<Self> {
        let st = media_stats(self.sampler.family(), self.sampler.n(), self.beta, n_media, seed, |x| x)?;
        self.shift = st.mean();
        Ok(self)
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }
}

impl Differentiable for FreeEnergyFunctional {
    fn dim(&self) -> usize {
        self.sampler.coordinate_dim()
    }

    fn eval_grad(&self, xi: &[f64], grad: &mut [f64], ws: &mut Workspace) -> Result<f64> {
        let np = n_pairs(self.sampler.n());
        ws.x.resize(np, 0.0);
        ws.grad_x.resize(np, 0.0);
        self.sampler.couplings_into(xi, &mut ws.x);
        let v = free_energy_and_gradient(self.sampler.n(), &ws.x, self.beta, &mut ws.grad_x);
        self.sampler.pull_back_into(xi, &ws.grad_x, grad);
        Ok(v - self.shift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HamiltonianVariance {
    pub n: usize,
    pub variance: Estimate,
    pub expected: f64,
    pub pass: bool,
}

/// `Var_J H_N(σ)` for a fixed configuration under IID Gaussian media.
pub fn hamiltonian_variance(sigma: &[i8], n_media: usize, seed: u64) -> Result<HamiltonianVariance> {
    let n = sigma.len();
    if sigma.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidArgument("spins must be +1 or -1".into()));
    }
    let sampler = MediumSampler::new(MediumFamily::IidGaussian, n)?;
    let chunks = map_chunks(n_media, 1024, seed, |range, rng| {
        let mut st = RunningStats::new();
        for _ in range {
            // H is centered, so E[H²] is the variance
            let h = super::energy::hamiltonian(sigma, &sampler.sample(rng));
            st.push(h * h);
        }
        st
    });
    let mut st = RunningStats::new();
    chunks.iter().for_each(|c| st.merge(c));
    let expected = (n - 1) as f64;
    Ok(HamiltonianVariance {
        n,
        variance: st.estimate(),
        expected,
        pass: (st.mean() - expected).abs() <= 3.0 * st.std_error(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::stream_rng;
    use crate::sk::audit::chi2_mean_abs_deviation;
    use crate::sk::media::medium_sample;

    #[test]
    fn test_maps() {
        assert!(TestMap::Sine { scale: 0.5 }.validate().is_err());
        assert!(TestMap::Sine { scale: 2.0 }.validate().is_ok());
        assert!((TestMap::Sine { scale: 2.0 }.value(1.0) - 2.0 * 0.5f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn same_law_has_zero_rhs() {
        let r = generic_bound_check(MediumFamily::IidGaussian, TestMap::Tanh, 1.0, 6, 64, 1).unwrap();
        assert_eq!(r.rhs, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn single_chaos_rhs_formula() {
        let n = 8;
        let r = generic_bound_check(MediumFamily::CltChaos2 { m: Some(1) }, TestMap::Tanh, 1.0, n, 16, 2).unwrap();
        let expect = 3.0 / (2.0 * 64.0) * 28.0 * chi2_mean_abs_deviation(1);
        assert!((r.rhs - expect).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn gamma_bound_iid() {
        let n = 8;
        let m = medium_sample(MediumFamily::IidGaussian, n, &mut stream_rng(3, 0)).unwrap();
        let r = gamma_f_bound_check(&m, 1.0).unwrap();
        assert!((r.rhs - 7.0 / 64.0).abs() < 1e-15);
        assert!(r.pass && r.lhs > 0.0);
        let zero = gamma_f_bound_check(&m, 0.0).unwrap();
        assert!(zero.pass);
    }

    #[test]
    fn gamma_bound_matches_pair_enumeration() {
        let n = 5;
        let m = medium_sample(MediumFamily::CltChaos2 { m: Some(4) }, n, &mut stream_rng(4, 0)).unwrap();
        let beta = 1.0;
        let r = gamma_f_bound_check(&m, beta).unwrap();
        let p = crate::sk::media::pairs(n);
        let t = GibbsTable::new(&m, beta).unwrap();
        let e = t
            .pair_expectation(|a, b| {
                p.iter()
                    .zip(&m.gamma_diag)
                    .map(|(&(i, j), g)| g * (a[i] * b[i] * a[j] * b[j]) as f64)
                    .sum()
            })
            .unwrap();
        let direct = 2.0 * beta * beta / (n as f64).powi(3) * e.abs();
        assert!((r.lhs - direct).abs() < 1e-14);
    }

    #[test]
    fn correlated_media_rejected_by_gamma_bound() {
        let m = medium_sample(MediumFamily::CorrelatedGaussian { r: 3.0 }, 4, &mut stream_rng(5, 0)).unwrap();
        assert!(gamma_f_bound_check(&m, 1.0).is_err());
    }

    #[test]
    fn zero_temperature_convergence_table() {
        let fams = [MediumFamily::IidGaussian, MediumFamily::CltChaos2 { m: None }];
        for c in [Coupling::Independent, Coupling::Quantile] {
            let t = convergence_experiment(&fams, 0.0, &[4, 6], 8, c, 1).unwrap();
            assert!(t.rows.iter().all(|r| r.mean == 0.0 && r.gap == 0.0));
            assert_eq!(t.rows_for(1).count(), 2);
        }
    }

    #[test]
    fn coupled_same_family_has_zero_gap() {
        let fams = [MediumFamily::IidGaussian, MediumFamily::IidGaussian];
        let t = convergence_experiment(&fams, 1.0, &[5], 16, Coupling::Quantile, 2).unwrap();
        assert_eq!(t.rows[1].gap, 0.0);
        let t = convergence_experiment(&fams, 1.0, &[5], 64, Coupling::Independent, 2).unwrap();
        assert!(t.rows[1].gap <= 2.0 * t.rows[0].sd);
    }

    #[test]
    fn hamiltonian_variance_small() {
        let r = hamiltonian_variance(&[1, -1, 1, 1, -1], 20_000, 9).unwrap();
        assert_eq!(r.expected, 4.0);
        assert!(r.pass, "{r:?}");
    }
}
