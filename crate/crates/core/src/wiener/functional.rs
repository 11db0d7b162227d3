use super::expr::{Expression, Tape, TapeScratch};
use super::parse::parse_expression;
use super::space::{SamplePoint, WienerSpace};
use crate::error::{Error, Result};
use crate::parallel::map_chunks;
use crate::stats::{Estimate, RunningStats};
use std::sync::Arc;

/// Reusable buffers for gradient evaluations inside Monte Carlo loops.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    pub(crate) x: Vec<f64>,
    pub(crate) grad_x: Vec<f64>,
    pub(crate) tape: TapeScratch,
    pub(crate) extra: Vec<f64>,
}

/// A random variable on a finite-dimensional Wiener space whose value and
/// Malliavin derivative (in whitened coordinates) can be evaluated at a
/// sample point.
pub trait Differentiable: Sync {
    fn dim(&self) -> usize;

    /// Writes the whitened-coordinate gradient to `grad` and returns the value.
    fn eval_grad(&self, xi: &[f64], grad: &mut [f64], ws: &mut Workspace) -> Result<f64>;

    fn eval(&self, xi: &[f64], ws: &mut Workspace) -> Result<f64> {
        let mut g = std::mem::take(&mut ws.extra);
        g.resize(self.dim(), 0.0);
        let v = self.eval_grad(xi, &mut g, ws);
        ws.extra = g;
        v
    }
}

/// `F(omega) - mean_shift` for an expression over the coordinates `W(h_i)`.
#[derive(Debug, Clone)]
pub struct Functional {
    space: Arc<WienerSpace>,
    expr: Expression,
    tape: Tape,
    mean_shift: f64,
}

impl Functional {
    pub fn new(space: Arc<WienerSpace>, expr: Expression) -> Result<Self> {
        if let Some(i) = expr.max_coordinate() {
            if i >= space.dim() {
                return Err(Error::CoordinateOutOfRange { index: i, dim: space.dim() });
            }
        }
        let tape = expr.compile(space.dim());
        Ok(Self {
            space,
            expr,
            tape,
            mean_shift: 0.0,
        })
    }

    pub fn parse(space: Arc<WienerSpace>, text: &str) -> Result<Self> {
        let expr = parse_expression(text, space.dim())?;
        Self::new(space, expr)
    }

    pub fn with_mean_shift(mut self, shift: f64) -> Self {
        self.mean_shift = shift;
        self
    }

    /// Estimates `E[F]` with `n` samples and subtracts it.
    pub fn centered_mc(self, n: usize, seed: u64) -> Result<Self> {
        let est = self.clone().with_mean_shift(0.0).mean_mc(n, seed)?;
        Ok(self.with_mean_shift(est.value))
    }

    /// Monte Carlo estimate of `E[F]` (including the current shift).
    pub fn mean_mc(&self, n: usize, seed: u64) -> Result<Estimate> {
        let chunks = map_chunks(n, 4096, seed, |range, rng| -> Result<RunningStats> {
            let mut ws = Workspace::default();
            let mut st = RunningStats::new();
            for _ in range {
                let p = self.space.sample(rng);
                st.push(Differentiable::eval(self, &p.coords, &mut ws)?);
            }
            Ok(st)
        });
        let mut total = RunningStats::new();
        for c in chunks {
            total.merge(&c?);
        }
        Ok(total.estimate())
    }

    pub fn space(&self) -> &Arc<WienerSpace> {
        &self.space
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    pub fn mean_shift(&self) -> f64 {
        self.mean_shift
    }

    /// `F(omega)` minus the mean shift.
    pub fn value(&self, omega: &SamplePoint) -> Result<f64> {
        self.space.check_point(omega)?;
        Differentiable::eval(self, &omega.coords, &mut Workspace::default())
    }

    /// The Malliavin derivative `DF(omega)` in whitened coordinates.
    pub fn malliavin_derivative(&self, omega: &SamplePoint) -> Result<Vec<f64>> {
        self.space.check_point(omega)?;
        let mut g = vec![0.0; self.space.dim()];
        self.eval_grad(&omega.coords, &mut g, &mut Workspace::default())?;
        Ok(g)
    }

    /// `self - other` on the same space.
    pub fn difference(&self, other: &Functional) -> Result<Functional> {
        if !Arc::ptr_eq(&self.space, &other.space) && *self.space != *other.space {
            return Err(Error::InvalidArgument("functionals live on different spaces".into()));
        }
        Ok(Functional::new(self.space.clone(), self.expr.clone() - other.expr.clone())?
            .with_mean_shift(self.mean_shift - other.mean_shift))
    }
}

impl Differentiable for Functional {
    fn dim(&self) -> usize {
        self.space.dim()
    }

    fn eval_grad(&self, xi: &[f64], grad: &mut [f64], ws: &mut Workspace) -> Result<f64> {
        let n = self.space.dim();
        let v = if self.space.is_identity() {
            self.tape.eval_grad(xi, grad, &mut ws.tape)
        } else {
            ws.x.resize(n, 0.0);
            ws.grad_x.resize(n, 0.0);
            self.space.coordinates_into(xi, &mut ws.x);
            let v = self.tape.eval_grad(&ws.x, &mut ws.grad_x, &mut ws.tape);
            self.space.pull_back_into(&ws.grad_x, grad);
            v
        };
        let out = v - self.mean_shift;
        if !out.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Overflow(format!("functional {}", self.expr)));
        }
        Ok(out)
    }
}

/// `a - b` for two differentiable variables on the same space.
pub struct Difference<'a> {
    pub a: &'a dyn Differentiable,
    pub b: &'a dyn Differentiable,
}

impl Differentiable for Difference<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn eval_grad(&self, xi: &[f64], grad: &mut [f64], ws: &mut Workspace) -> Result<f64> {
        let va = self.a.eval_grad(xi, grad, ws)?;
        let mut tmp = std::mem::take(&mut ws.extra);
        tmp.resize(self.dim(), 0.0);
        let vb = self.b.eval_grad(xi, &mut tmp, ws);
        grad.iter_mut().zip(&tmp).for_each(|(g, t)| *g -= t);
        ws.extra = tmp;
        Ok(va - vb?)
    }
}

/// Finitely indexed random field `{F_1, ..., F_d}` on one space.
#[derive(Debug, Clone)]
pub struct RandomField {
    space: Arc<WienerSpace>,
    components: Vec<Functional>,
}

impl RandomField {
    pub fn new(components: Vec<Functional>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("a random field needs at least one component".into()))?;
        let space = first.space().clone();
        for c in &components {
            if !Arc::ptr_eq(c.space(), &space) && **c.space() != *space {
                return Err(Error::InvalidArgument("field components live on different spaces".into()));
            }
        }
        Ok(Self { space, components })
    }

    pub fn parse(space: Arc<WienerSpace>, texts: &[&str]) -> Result<Self> {
        let comps = texts
            .iter()
            .map(|t| Functional::parse(space.clone(), t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn space(&self) -> &Arc<WienerSpace> {
        &self.space
    }

    pub fn components(&self) -> &[Functional] {
        &self.components
    }

    pub fn as_dyn(&self) -> Vec<&dyn Differentiable> {
        self.components.iter().map(|c| c as &dyn Differentiable).collect()
    }

    /// Component values at `xi`.
    pub fn values_into(&self, xi: &[f64], out: &mut [f64], ws: &mut Workspace) -> Result<()> {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = Differentiable::eval(c, xi, ws)?;
        }
        Ok(())
    }

    /// Union of the coordinates referenced by all components.
    pub fn coordinates(&self) -> std::collections::BTreeSet<usize> {
        self.components
            .iter()
            .flat_map(|c| c.expression().coordinates())
            .collect()
    }

    /// Checks every component mean is within `z` standard errors of zero.
    pub fn check_centered(&self, n: usize, seed: u64, z: f64) -> Result<()> {
        for (k, c) in self.components.iter().enumerate() {
            let est = c.mean_mc(n, crate::parallel::derive_seed(seed, k as u64))?;
            if est.value.abs() > z * est.std_error {
                return Err(Error::NotCentered {
                    mean: est.value,
                    std_error: est.std_error,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::wiener::expr::{constant, w};

    fn space(n: usize) -> Arc<WienerSpace> {
        Arc::new(WienerSpace::new(n).unwrap())
    }

    #[test]
    fn eval_examples() {
        let s = space(2);
        let f = Functional::new(s.clone(), w(0)).unwrap();
        assert_eq!(f.value(&vec![3.0, 0.0].into()).unwrap(), 3.0);
        let h = Functional::new(s.clone(), w(0).hermite(2)).unwrap();
        assert_eq!(h.value(&vec![2.0, 0.0].into()).unwrap(), 3.0);
        let e = Functional::new(s, w(0).exp()).unwrap().with_mean_shift(0.5f64.exp());
        let v = e.value(&vec![0.0, 0.0].into()).unwrap();
        assert!((v - (1.0 - 0.5f64.exp())).abs() < 1e-15);
    }

    #[test]
    fn overflow_is_signalled() {
        let f = Functional::new(space(1), w(0).exp().exp()).unwrap();
        assert!(matches!(f.value(&vec![800.0].into()), Err(Error::Overflow(_))));
    }

    #[test]
    fn derivative_examples() {
        let s = space(2);
        let f = Functional::new(s.clone(), w(0)).unwrap();
        assert_eq!(f.malliavin_derivative(&vec![0.3, 0.1].into()).unwrap(), vec![1.0, 0.0]);
        let sq = Functional::new(s.clone(), w(0).pow(2)).unwrap();
        assert_eq!(sq.malliavin_derivative(&vec![3.0, 0.0].into()).unwrap(), vec![6.0, 0.0]);
        let h = Functional::new(s, w(0).hermite(2)).unwrap();
        assert_eq!(h.malliavin_derivative(&vec![1.25, -2.0].into()).unwrap(), vec![2.5, 0.0]);
    }

    #[test]
    fn correlated_space_pulls_back_through_whitener() {
        let g = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let s = Arc::new(WienerSpace::with_gram(g).unwrap());
        // F = W(h_1): W(h_1) = 0.5 xi_0 + sqrt(0.75) xi_1
        let f = Functional::new(s, w(1)).unwrap();
        let d = f.malliavin_derivative(&vec![0.0, 0.0].into()).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-15 && (d[1] - 0.75f64.sqrt()).abs() < 1e-15);
        // |DF|^2 = <h_1, h_1> = 1
        assert!((d[0] * d[0] + d[1] * d[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn centering_by_monte_carlo() {
        let f = Functional::new(space(1), w(0).exp()).unwrap().centered_mc(200_000, 3).unwrap();
        assert!((f.mean_shift() - 0.5f64.exp()).abs() < 0.02);
    }

    #[test]
    fn difference_of_functionals() {
        let s = space(2);
        let a = Functional::new(s.clone(), w(0) * w(1)).unwrap();
        let b = Functional::new(s, w(1) + constant(2.0)).unwrap();
        let d = a.difference(&b).unwrap();
        let p: SamplePoint = vec![2.0, 3.0].into();
        assert_eq!(d.value(&p).unwrap(), 6.0 - 5.0);
        assert_eq!(d.malliavin_derivative(&p).unwrap(), vec![3.0, 1.0]);
    }
}
