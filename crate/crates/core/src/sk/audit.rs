//! Conditions on the Γ data of a medium family: off-diagonal mass, diagonal
//! deviation from 1, and a uniform `(1+ε)`-moment bound.

use super::media::{n_pairs, pairs, MediumFamily};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_unit;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

const PANELS: usize = 64;
const NODES: usize = 16;

/// `E|χ²_m / m − 1|` by composite Gauss–Legendre quadrature in `y = √x`,
/// split at the kink `y = √m`.
pub fn chi2_mean_abs_deviation(m: usize) -> f64 {
    assert!(m >= 1, "chi-square degrees of freedom must be positive");
    let mf = m as f64;
    let k = mf / 2.0;
    let log_norm = std::f64::consts::LN_2 - k * std::f64::consts::LN_2 - ln_gamma(k);
    // density of y = √X, times |y²/m − 1|
    let integrand = |y: f64| {
        let log_dens = log_norm + (2.0 * k - 1.0) * y.ln() - 0.5 * y * y;
        (y * y / mf - 1.0).abs() * log_dens.exp()
    };
    let kink = mf.sqrt();
    let top = (mf + 40.0 * (2.0 * mf).sqrt() + 200.0).sqrt();
    let (nodes, weights) = gauss_legendre_unit(NODES);
    let mut total = 0.0;
    for (a, b) in [(0.0, kink), (kink, top)] {
        let h = (b - a) / PANELS as f64;
        for p in 0..PANELS {
            let lo = a + p as f64 * h;
            total += h * nodes.iter().zip(&weights).map(|(&x, &w)| w * integrand(lo + h * x)).sum::<f64>();
        }
    }
    total
}

/// `E[(χ²_m/m)^{1+ε}]` in closed form.
pub fn chi2_scaled_moment(m: usize, eps: f64) -> f64 {
    let k = m as f64 / 2.0;
    let p = 1.0 + eps;
    (ln_gamma(k + p) - ln_gamma(k) + p * (2.0 / m as f64).ln()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditRow {
    pub n: usize,
    /// `Σ_{a≠b} E|Γ_{J_a,J_b}|` over ordered pairs of distinct entries.
    pub cross_sum: f64,
    /// `max_b Σ_{a≠b} E|Γ_{J_a,J_b}|`, the off-diagonal mass seen by one entry.
    pub cross_row_max: f64,
    /// `Σ_a E|Γ_{J_a,J_a} − 1|`.
    pub diag_sum: f64,
    /// `sup_{a,b} E|Γ_{J_a,J_b}|^{1+ε}`.
    pub moment_bound: f64,
    pub cross_per_n2: f64,
    pub cross_row_per_n2: f64,
    pub diag_per_n2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionAudit {
    pub family: MediumFamily,
    pub eps: f64,
    pub rows: Vec<AuditRow>,
    /// Normalized sums decreasing along the ladder (or identically zero);
    /// the cross flag uses the per-entry row sum.
    pub cross_decreasing: bool,
    pub diag_decreasing: bool,
}

pub fn audit_row(family: MediumFamily, n: usize, eps: f64) -> Result<AuditRow> {
    family.validate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("moment exponent eps must be positive, got {eps}")));
    }
    let np = n_pairs(n);
    let (cross_sum, cross_row_max, diag_sum, moment_bound) = match family {
        MediumFamily::IidGaussian => (0.0, 0.0, 0.0, 1.0),
        MediumFamily::CorrelatedGaussian { r } => {
            let p = pairs(n);
            let (mut s, mut row_max) = (0.0, 0.0f64);
            for (a, &(i, j)) in p.iter().enumerate() {
                let mut row = 0.0;
                for (b, &(k, l)) in p.iter().enumerate() {
                    if a != b {
                        row += (1.0 + i.abs_diff(k) as f64 + j.abs_diff(l) as f64).powf(-r);
                    }
                }
                s += row;
                row_max = row_max.max(row);
            }
            (s, row_max, 0.0, 1.0)
        }
        MediumFamily::CltChaos2 { .. } => {
            let m = family.depth(n);
            (0.0, 0.0, np as f64 * chi2_mean_abs_deviation(m), chi2_scaled_moment(m, eps))
        }
    };
    let n2 = (n * n) as f64;
    Ok(AuditRow {
        n,
        cross_sum,
        cross_row_max,
        diag_sum,
        moment_bound,
        cross_per_n2: cross_sum / n2,
        cross_row_per_n2: cross_row_max / n2,
        diag_per_n2: diag_sum / n2,
    })
}

pub fn condition_audit(family: MediumFamily, ladder: &[usize], eps: f64) -> Result<ConditionAudit> {
    let rows = ladder.iter().map(|&n| audit_row(family, n, eps)).collect::<Result<Vec<_>>>()?;
    let decreasing = |f: fn(&AuditRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]) || f(&w[1]) == 0.0);
    Ok(ConditionAudit {
        family,
        eps,
        cross_decreasing: decreasing(|r| r.cross_row_per_n2),
        diag_decreasing: decreasing(|r| r.diag_per_n2),
        rows,
    })
}
