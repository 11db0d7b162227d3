//! Expected maximum of the centered SDE solution against that of the
//! driving fBm.

use super::grid::{FbmGrid, FbmPath};
use super::sde::{euler_solve, DriftSpec, Monotone};
use crate::error::{Error, Result};
use crate::parallel::{derive_seed, map_chunks};
use crate::stats::{Estimate, RunningStats};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

const PATH_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupComparison {
    /// E[max_t (F_t − E F_t)]
    pub max_centered_sde: Estimate,
    /// E[max_t B^H_t]
    pub max_fbm: Estimate,
    /// Difference of the two with a standard error that includes the
    /// pilot-mean uncertainty.
    pub difference: Estimate,
    pub direction: Monotone,
    pub pass: bool,
}

fn sample_path(grid: &FbmGrid, rng: &mut impl Rng) -> FbmPath {
    let xi: Vec<f64> = (0..grid.steps()).map(|_| rng.sample(StandardNormal)).collect();
    FbmPath::from_coordinates(grid, xi)
}

/// Mean of `F_t` at every grid time from an independent pilot run.
pub fn pilot_mean(grid: &FbmGrid, drift: &DriftSpec, x0: f64, n_paths: usize, seed: u64) -> Vec<RunningStats> {
    let m = grid.steps();
    let chunks = map_chunks(n_paths, PATH_CHUNK, seed, |range, rng| {
        let mut st = vec![RunningStats::new(); m + 1];
        for _ in range {
            let f = euler_solve(x0, drift, grid, &sample_path(grid, rng));
            st.iter_mut().zip(&f.values).for_each(|(s, v)| s.push(*v));
        }
        st
    });
    let mut total = vec![RunningStats::new(); m + 1];
    for c in chunks {
        total.iter_mut().zip(&c).for_each(|(a, b)| a.merge(b));
    }
    total
}

/// Compares E[max(F − E F)] with E[max B^H] over the grid, in the direction
/// implied by the drift's monotonicity.
pub fn sup_comparison(grid: &FbmGrid, drift: DriftSpec, x0: f64, n_paths: usize, seed: u64) -> Result<SupComparison> {
    let direction = drift.monotone();
    if direction == Monotone::None {
        return Err(Error::InvalidArgument("sup comparison needs a monotone drift".into()));
    }
    if n_paths < 2 {
        return Err(Error::InvalidArgument("need at least two paths".into()));
    }
    let pilot = pilot_mean(grid, &drift, x0, n_paths, derive_seed(seed, 0x9170));
    let mean: Vec<f64> = pilot.iter().map(RunningStats::mean).collect();
    let pilot_se = pilot.iter().map(RunningStats::std_error).fold(0.0, f64::max);
    let chunks = map_chunks(n_paths, PATH_CHUNK, derive_seed(seed, 0x5a9), |range, rng| {
        let mut st = vec![RunningStats::new(); 3];
        for _ in range {
            let b = sample_path(grid, rng);
            let f = euler_solve(x0, &drift, grid, &b);
            let mf = f.values.iter().zip(&mean).map(|(v, m)| v - m).fold(f64::NEG_INFINITY, f64::max);
            let mb = b.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            st[0].push(mf);
            st[1].push(mb);
            st[2].push(mf - mb);
        }
        st
    });
    let mut st = vec![RunningStats::new(); 3];
    for c in chunks {
        st.iter_mut().zip(&c).for_each(|(a, b)| a.merge(b));
    }
    let mut difference = st[2].estimate();
    difference.std_error = difference.std_error.hypot(pilot_se);
    let band = 3.0 * difference.std_error;
    let pass = match direction {
        Monotone::Increasing => difference.value >= -band,
        Monotone::Decreasing => difference.value <= band,
        _ => difference.value.abs() <= band,
    };
    Ok(SupComparison {
        max_centered_sde: st[0].estimate(),
        max_fbm: st[1].estimate(),
        difference,
        direction,
        pass,
    })
}

/// E[max B^H] over the grid.
pub fn expected_fbm_max(grid: &FbmGrid, n_paths: usize, seed: u64) -> Estimate {
    let chunks = map_chunks(n_paths, PATH_CHUNK, seed, |range, rng| {
        let mut st = RunningStats::new();
        for _ in range {
            st.push(sample_path(grid, rng).values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        st
    });
    let mut total = RunningStats::new();
    for c in chunks {
        total.merge(&c);
    }
    total.estimate()
}
