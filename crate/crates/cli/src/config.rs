//! Run configuration: one JSON document naming the experiment, its seed and
//! worker count, Mehler settings and the experiment's own parameters.

use anyhow::{anyhow, bail, Context, Result};
use gammakit::comparison::HessianFunction;
use gammakit::fbm::DriftSpec;
use gammakit::gamma::{ChaosTerm, MehlerConfig, ScalarMap};
use gammakit::linalg::Matrix;
use gammakit::sk::{Coupling, MediumFamily, TestMap};
use gammakit::wiener::{build_space, WienerSpace};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub mehler: MehlerConfig,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| anyhow!("config at `{}`: {}", e.path(), e.inner()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Experiment parameters with path-annotated errors.
    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        let value = if self.params.is_null() {
            serde_json::Value::Object(Default::default())
        } else {
            self.params.clone()
        };
        serde_path_to_error::deserialize(value).map_err(|e| anyhow!("config at `params.{}`: {}", e.path(), e.inner()))
    }
}

/// Space of dimension `dim`, identity covariance unless a Gram matrix is given.
pub fn space(dim: usize, gram: &Option<Vec<Vec<f64>>>) -> Result<Arc<WienerSpace>> {
    let gram = match gram {
        Some(rows) => Some(Matrix::from_rows(rows).context("config at `params.gram`")?),
        None => None,
    };
    Ok(Arc::new(build_space(dim, gram).context("config at `params.gram`")?))
}

fn default_phis() -> Vec<ScalarMap> {
    vec![ScalarMap::Identity, ScalarMap::Square, ScalarMap::Tanh]
}

fn default_ps() -> Vec<f64> {
    vec![2.0, 3.0, 4.0]
}

fn default_rel_tol() -> f64 {
    0.01
}

fn default_n_center() -> usize {
    200_000
}

fn default_slepian_ts() -> Vec<f64> {
    (0..=10).map(|k| 0.05 + 0.09 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosPair {
    pub f: Vec<ChaosTerm>,
    pub g: Vec<ChaosTerm>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaParams {
    pub dim: usize,
    pub pairs: Vec<ChaosPair>,
    pub n_points: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbpParams {
    pub dim: usize,
    #[serde(default)]
    pub gram: Option<Vec<Vec<f64>>>,
    pub f: String,
    pub g: String,
    #[serde(default = "default_phis")]
    pub phi: Vec<ScalarMap>,
    pub n_outer: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareParams {
    pub dim: usize,
    #[serde(default)]
    pub gram: Option<Vec<Vec<f64>>>,
    pub functionals: Vec<String>,
    #[serde(default = "default_ps")]
    pub ps: Vec<f64>,
    pub n_outer: usize,
    /// Samples used to estimate and subtract each functional's mean.
    #[serde(default = "default_n_center")]
    pub n_center: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SudakovParams {
    pub dim: usize,
    #[serde(default)]
    pub gram: Option<Vec<Vec<f64>>>,
    pub f: Vec<String>,
    pub g: Vec<String>,
    #[serde(default = "gammakit::comparison::default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "gammakit::comparison::default_t_grid")]
    pub ts: Vec<f64>,
    pub n_outer: usize,
    pub n_max: usize,
}

/// Built-in functions with exact Hessians.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `½ xᵀAx`
    Quadratic { matrix: Vec<Vec<f64>> },
    LogSumExp { beta: f64 },
    ExpLinear { theta: Vec<f64> },
}

impl FunctionSpec {
    pub fn build(&self) -> Result<HessianFunction> {
        Ok(match self {
            Self::Quadratic { matrix } => HessianFunction::Quadratic(Matrix::from_rows(matrix)?),
            Self::LogSumExp { beta } => HessianFunction::LogSumExp(*beta),
            Self::ExpLinear { theta } => HessianFunction::ExpLinear(theta.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlepianParams {
    pub dim: usize,
    #[serde(default)]
    pub gram: Option<Vec<Vec<f64>>>,
    pub f: Vec<String>,
    pub g: Vec<String>,
    pub function: FunctionSpec,
    #[serde(default = "default_slepian_ts")]
    pub ts: Vec<f64>,
    pub n_outer: usize,
    pub n_direct: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationParams {
    pub dim: usize,
    #[serde(default)]
    pub gram: Option<Vec<Vec<f64>>>,
    pub field: Vec<String>,
    pub c: Vec<Vec<f64>>,
    pub x: Vec<f64>,
    pub n_outer: usize,
    pub n_psd: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub g: Vec<f64>,
    #[serde(default)]
    pub f: Vec<Vec<f64>>,
    /// Expression in slot variables `w0, w1, …` standing for `⟨f_k, ξ⟩`.
    #[serde(default)]
    pub phi: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationParams {
    pub dim: usize,
    pub components: Vec<ComponentSpec>,
    pub psi: FunctionSpec,
    pub n_points: usize,
    pub n_direct: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbmParams {
    pub hurst: f64,
    #[serde(default = "one")]
    pub t_end: f64,
    pub steps: usize,
    pub drift: DriftSpec,
    #[serde(default)]
    pub x0: f64,
    /// Grid index pairs `(s, t)` with `s < t`.
    pub pairs: Vec<(usize, usize)>,
    pub n_outer: usize,
    pub n_paths: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkFreeEnergyParams {
    pub n: usize,
    pub beta: f64,
    /// Fixed couplings in half-index order (pairs `i > j`, row-major).
    #[serde(default)]
    pub couplings: Option<Vec<f64>>,
    #[serde(default)]
    pub family: Option<MediumFamily>,
    #[serde(default = "one_usize")]
    pub n_media: usize,
    /// Media draws for the Var H_N(σ) = N − 1 check; 0 skips it.
    #[serde(default)]
    pub variance_samples: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkGenericParams {
    pub families: Vec<MediumFamily>,
    pub ladder: Vec<usize>,
    pub beta: f64,
    #[serde(default = "tanh_map")]
    pub test_map: TestMap,
    pub n_media: usize,
}

fn tanh_map() -> TestMap {
    TestMap::Tanh
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkGammaParams {
    pub families: Vec<MediumFamily>,
    pub ladder: Vec<usize>,
    pub betas: Vec<f64>,
    pub n_media: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkConvergenceParams {
    /// The first family is the reference for gaps.
    pub families: Vec<MediumFamily>,
    pub beta: f64,
    pub ladder: Vec<usize>,
    pub n_media: usize,
    #[serde(default)]
    pub coupling: Coupling,
    /// Indices of families whose gap must shrink along the ladder.
    #[serde(default)]
    pub decreasing: Vec<usize>,
}

pub fn check_nonempty<T>(v: &[T], field: &str) -> Result<()> {
    if v.is_empty() {
        bail!("config at `params.{field}`: must not be empty");
    }
    Ok(())
}
