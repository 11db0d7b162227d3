//! Finite Hermite-chaos expansions with exact Γ.

use crate::error::{Error, Result};
use crate::wiener::{constant, hermite_pair, w, Expression, SamplePoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// `coefficient · Π H_{q_i}(w_i)`; an empty factor list is a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosTerm {
    pub coefficient: f64,
    pub factors: Vec<(usize, u32)>,
}

impl ChaosTerm {
    pub fn new(coefficient: f64, factors: Vec<(usize, u32)>) -> Self {
        Self { coefficient, factors }
    }

    pub fn order(&self) -> u32 {
        self.factors.iter().map(|f| f.1).sum()
    }
}

/// A sum of chaos terms over an identity-gram space of dimension `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosForm {
    dim: usize,
    terms: Vec<ChaosTerm>,
}

impl ChaosForm {
    pub fn new(dim: usize, terms: Vec<ChaosTerm>) -> Result<Self> {
        for t in &terms {
            let mut seen = BTreeSet::new();
            for &(i, q) in &t.factors {
                if i >= dim {
                    return Err(Error::CoordinateOutOfRange { index: i, dim });
                }
                if q == 0 {
                    return Err(Error::InvalidArgument("chaos factors need order at least 1".into()));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidArgument(format!(
                        "coordinate {i} repeated inside one chaos term"
                    )));
                }
            }
        }
        Ok(Self { dim, terms })
    }

    /// `H_q(w_i)`.
    pub fn hermite(dim: usize, i: usize, q: u32) -> Result<Self> {
        Self::new(dim, vec![ChaosTerm::new(1.0, vec![(i, q)])])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[ChaosTerm] {
        &self.terms
    }

    pub fn max_order(&self) -> u32 {
        self.terms.iter().map(ChaosTerm::order).max().unwrap_or(0)
    }

    /// Value of the constant (order-0) part, which is also the mean.
    pub fn mean(&self) -> f64 {
        self.terms.iter().filter(|t| t.factors.is_empty()).map(|t| t.coefficient).sum()
    }

    /// `E[F G]` from Hermite orthogonality (E[H_p H_q] = q!·1{p=q}).
    pub fn inner_product(&self, other: &ChaosForm) -> f64 {
        let key = |t: &ChaosTerm| {
            let mut f = t.factors.clone();
            f.sort_unstable();
            f
        };
        let mut total = 0.0;
        for a in &self.terms {
            let ka = key(a);
            for b in &other.terms {
                if ka == key(b) {
                    let norm: f64 = ka.iter().map(|&(_, q)| factorial(q)).product();
                    total += a.coefficient * b.coefficient * norm;
                }
            }
        }
        total
    }

    pub fn to_expression(&self) -> Expression {
        let mut sum: Option<Expression> = None;
        for t in &self.terms {
            let mut prod = constant(t.coefficient);
            for &(i, q) in &t.factors {
                prod = prod * w(i).hermite(q);
            }
            sum = Some(match sum {
                None => prod,
                Some(s) => s + prod,
            });
        }
        sum.unwrap_or_else(|| constant(0.0))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * t.factors.iter().map(|&(i, q)| hermite_pair(q, x[i]).0).product::<f64>())
            .sum()
    }

    /// Adds `scale(order) · coefficient · ∇term(x)` for every term to `grad`.
    fn accumulate_grad(&self, x: &[f64], grad: &mut [f64], scale: impl Fn(u32) -> f64) {
        let mut vals = Vec::new();
        let mut ders = Vec::new();
        for t in &self.terms {
            if t.factors.is_empty() {
                continue;
            }
            let c = t.coefficient * scale(t.order());
            vals.clear();
            ders.clear();
            for &(i, q) in &t.factors {
                let (h, dh) = hermite_pair(q, x[i]);
                vals.push(h);
                ders.push(dh);
            }
            for (k, &(i, _)) in t.factors.iter().enumerate() {
                let others: f64 = vals.iter().enumerate().filter(|&(l, _)| l != k).map(|(_, v)| v).product();
                grad[i] += c * ders[k] * others;
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.accumulate_grad(x, &mut g, |_| 1.0);
        g
    }

    /// −DL⁻¹F = Σ_q D(J_q F)/q; constants contribute nothing.
    pub fn minus_d_l_inverse(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.accumulate_grad(x, &mut g, |q| 1.0 / f64::from(q));
        g
    }
}

fn factorial(q: u32) -> f64 {
    (1..=q).map(f64::from).product()
}

/// Exact Γ_{F,G}(ω) = ⟨DF(ω), −DL⁻¹G(ω)⟩.
pub fn gamma_oracle(f: &ChaosForm, g: &ChaosForm, omega: &SamplePoint) -> Result<f64> {
    for form in [f, g] {
        if form.dim() != omega.dim() {
            return Err(Error::DimensionMismatch {
                expected: form.dim(),
                got: omega.dim(),
            });
        }
    }
    let df = f.gradient(&omega.coords);
    let dg = g.minus_d_l_inverse(&omega.coords);
    Ok(df.iter().zip(&dg).map(|(a, b)| a * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_examples() {
        let h2 = ChaosForm::hermite(2, 0, 2).unwrap();
        let p: SamplePoint = vec![1.5, -0.4].into();
        assert!((gamma_oracle(&h2, &h2, &p).unwrap() - 4.5).abs() < 1e-14);

        let prod = ChaosForm::new(2, vec![ChaosTerm::new(1.0, vec![(0, 1), (1, 1)])]).unwrap();
        assert!((gamma_oracle(&prod, &h2, &p).unwrap() - 1.5 * -0.4).abs() < 1e-14);

        let w0 = ChaosForm::hermite(2, 0, 1).unwrap();
        assert_eq!(gamma_oracle(&w0, &w0, &p).unwrap(), 1.0);
    }

    #[test]
    fn constants_contribute_nothing() {
        let f = ChaosForm::hermite(1, 0, 1).unwrap();
        let g = ChaosForm::new(1, vec![ChaosTerm::new(3.0, vec![])]).unwrap();
        assert_eq!(gamma_oracle(&f, &g, &vec![0.9].into()).unwrap(), 0.0);
    }

    #[test]
    fn expression_matches_direct_evaluation() {
        let f = ChaosForm::new(
            3,
            vec![
                ChaosTerm::new(0.5, vec![(0, 2), (2, 1)]),
                ChaosTerm::new(-1.0, vec![(1, 3)]),
                ChaosTerm::new(0.25, vec![]),
            ],
        )
        .unwrap();
        let x = [0.3, -1.2, 2.0];
        assert!((f.to_expression().eval(&x) - f.eval(&x)).abs() < 1e-14);
        let tape = f.to_expression().compile(3);
        let mut g = vec![0.0; 3];
        tape.eval_grad(&x, &mut g, &mut Default::default());
        for (a, b) in g.iter().zip(f.gradient(&x)) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn invalid_terms_rejected() {
        assert!(ChaosForm::new(2, vec![ChaosTerm::new(1.0, vec![(0, 1), (0, 2)])]).is_err());
        assert!(ChaosForm::new(2, vec![ChaosTerm::new(1.0, vec![(2, 1)])]).is_err());
        assert!(ChaosForm::new(2, vec![ChaosTerm::new(1.0, vec![(1, 0)])]).is_err());
    }

    #[test]
    fn orthogonality_norms() {
        let h3 = ChaosForm::hermite(1, 0, 3).unwrap();
        assert_eq!(h3.inner_product(&h3), 6.0);
        let h2 = ChaosForm::hermite(1, 0, 2).unwrap();
        assert_eq!(h3.inner_product(&h2), 0.0);
    }
}
