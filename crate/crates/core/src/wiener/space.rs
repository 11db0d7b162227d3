use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Finite-dimensional isonormal structure: `n` elements `h_i` of a Hilbert
/// space with Gram matrix `gram = L L^T`.
///
/// Samples live in whitened coordinates `xi` (i.i.d. standard normal), and
/// `W(h_i) = (L xi)_i`. In whitened coordinates the Hilbert inner product is
/// the Euclidean dot product.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerSpace {
    gram: Matrix,
    whitener: Matrix,
    identity: bool,
}

impl WienerSpace {
    /// Orthonormal basis (identity Gram matrix).
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("space dimension must be positive".into()));
        }
        Ok(Self {
            gram: Matrix::identity(n),
            whitener: Matrix::identity(n),
            identity: true,
        })
    }

    pub fn with_gram(gram: Matrix) -> Result<Self> {
        let n = gram.dim();
        if n == 0 {
            return Err(Error::InvalidArgument("space dimension must be positive".into()));
        }
        gram.check_symmetric(SYMMETRY_TOL)?;
        let min_ev = linalg::min_eigenvalue(&gram);
        if min_ev < -PSD_TOL {
            return Err(Error::NotPsd { eigenvalue: min_ev });
        }
        let identity = gram.is_identity();
        let whitener = if identity {
            Matrix::identity(n)
        } else {
            linalg::cholesky(&gram, 1e-13)?
        };
        Ok(Self {
            gram,
            whitener,
            identity,
        })
    }

    pub fn dim(&self) -> usize {
        self.gram.dim()
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn whitener(&self) -> &Matrix {
        &self.whitener
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `W(h_i)` values `L xi`.
    pub fn coordinates_into(&self, xi: &[f64], out: &mut [f64]) {
        if self.identity {
            out.copy_from_slice(xi);
        } else {
            self.whitener.mul_vec_into(xi, out);
        }
    }

    /// Pulls a gradient with respect to `W(h_i)` back to whitened coordinates (`L^T g`).
    pub fn pull_back_into(&self, grad_x: &[f64], out: &mut [f64]) {
        if self.identity {
            out.copy_from_slice(grad_x);
        } else {
            self.whitener.mul_t_vec_into(grad_x, out);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SamplePoint {
        SamplePoint {
            coords: (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }

    pub fn check_point(&self, omega: &SamplePoint) -> Result<()> {
        if omega.coords.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: omega.coords.len(),
            });
        }
        Ok(())
    }
}

/// Builds a space; identity Gram when `gram` is `None`.
pub fn build_space(n: usize, gram: Option<Matrix>) -> Result<WienerSpace> {
    match gram {
        None => WienerSpace::new(n),
        Some(g) => {
            if g.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: g.dim(),
                });
            }
            WienerSpace::with_gram(g)
        }
    }
}

/// One realization, in whitened coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub coords: Vec<f64>,
}

impl SamplePoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<f64>> for SamplePoint {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::stream_rng;
    use crate::stats::RunningStats;

    #[test]
    fn identity_default() {
        let s = build_space(3, None).unwrap();
        assert!(s.whitener().is_identity());
    }

    #[test]
    fn diagonal_gram() {
        let s = build_space(2, Some(Matrix::diagonal(&[1.0, 4.0]))).unwrap();
        assert_eq!(s.whitener()[(0, 0)], 1.0);
        assert_eq!(s.whitener()[(1, 1)], 2.0);
        assert_eq!(s.whitener()[(1, 0)], 0.0);
    }

    #[test]
    fn correlated_gram() {
        let g = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let s = build_space(2, Some(g)).unwrap();
        let l = s.whitener();
        assert!((l[(1, 0)] - 0.5).abs() < 1e-15);
        assert!((l[(1, 1)] - 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_gram() {
        let g = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match build_space(2, Some(g)) {
            Err(Error::NotPsd { eigenvalue }) => assert!((eigenvalue + 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let asym = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.1, 1.0]]).unwrap();
        assert!(matches!(build_space(2, Some(asym)), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = WienerSpace::new(4).unwrap();
        let a = s.sample(&mut stream_rng(11, 0));
        let b = s.sample(&mut stream_rng(11, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn standard_normal_moments() {
        let s = WienerSpace::new(1).unwrap();
        let mut rng = stream_rng(2024, 0);
        let n = 100_000;
        let mut st = RunningStats::new();
        for _ in 0..n {
            st.push(s.sample(&mut rng).coords[0]);
        }
        assert!(st.mean().abs() < 4.0 / (n as f64).sqrt());
        assert!((st.variance() - 1.0).abs() < 0.05);
    }

    #[test]
    fn sampled_covariance_matches_gram() {
        let g = Matrix::from_rows(&[
            vec![1.0, 0.6, -0.3],
            vec![0.6, 1.0, 0.2],
            vec![-0.3, 0.2, 0.5],
        ])
        .unwrap();
        let s = WienerSpace::with_gram(g.clone()).unwrap();
        let mut rng = stream_rng(5, 1);
        let n = 100_000;
        let mut acc = Matrix::zeros(3);
        let mut x = vec![0.0; 3];
        for _ in 0..n {
            let p = s.sample(&mut rng);
            s.coordinates_into(&p.coords, &mut x);
            for i in 0..3 {
                for j in 0..3 {
                    acc[(i, j)] += x[i] * x[j] / n as f64;
                }
            }
        }
        let tol = 5.0 / (n as f64).sqrt();
        for i in 0..3 {
            for j in 0..3 {
                assert!((acc[(i, j)] - g[(i, j)]).abs() < tol, "({i},{j})");
            }
        }
    }
}
