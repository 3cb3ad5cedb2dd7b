use nalgebra::{DMatrix, DVector};

use super::{LinearOperator, TikhonovFamily};
use crate::error::{Error, Result};
use crate::hilbert::Grid;

/// An explicit `n×n` matrix acting on nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    grid: Grid,
    matrix: DMatrix<f64>,
    lower_triangular: bool,
}

impl DenseOperator {
    pub fn new(grid: Grid, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != grid.n() || matrix.ncols() != grid.n() {
            return Err(Error::GridMismatch {
                left: grid.to_string(),
                right: format!("{}x{} matrix", matrix.nrows(), matrix.ncols()),
            });
        }
        let lower_triangular = is_lower_triangular(&matrix);
        Ok(DenseOperator { grid, matrix, lower_triangular })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(usize, usize) -> f64) -> Self {
        let n = grid.n();
        let matrix = DMatrix::from_fn(n, n, f);
        let lower_triangular = is_lower_triangular(&matrix);
        DenseOperator { grid, matrix, lower_triangular }
    }

    pub fn identity(grid: Grid) -> Self {
        Self::scaled_identity(grid, 1.0)
    }

    pub fn scaled_identity(grid: Grid, c: f64) -> Self {
        Self::from_fn(grid, |i, j| if i == j { c } else { 0.0 })
    }

    pub fn diagonal(grid: Grid, diag: &[f64]) -> Result<Self> {
        if diag.len() != grid.n() {
            return Err(Error::domain("diagonal length differs from grid size"));
        }
        Ok(Self::from_fn(grid, |i, j| if i == j { diag[i] } else { 0.0 }))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_lower_triangular(&self) -> bool {
        self.lower_triangular
    }

    /// `self·other`.
    pub fn compose(&self, other: &DenseOperator) -> Result<DenseOperator> {
        self.grid.ensure_same(&other.grid)?;
        DenseOperator::new(self.grid, &self.matrix * &other.matrix)
    }
}

fn is_lower_triangular(m: &DMatrix<f64>) -> bool {
    (0..m.ncols()).all(|j| (0..j).all(|i| m[(i, j)] == 0.0))
}

/// The inclusive rectangle-rule integration operator `(Ax)ᵢ = h·Σ_{j≤i} xⱼ`.
pub fn volterra(grid: Grid) -> DenseOperator {
    let h = grid.h();
    DenseOperator::from_fn(grid, |i, j| if j <= i { h } else { 0.0 })
}

/// Adjoint under the uniformly weighted inner product, i.e. the transpose.
pub fn adjoint(a: &DenseOperator) -> DenseOperator {
    DenseOperator::from_fn(a.grid, |i, j| a.matrix[(j, i)])
}

impl LinearOperator for DenseOperator {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply_values(&self, x: &[f64]) -> Vec<f64> {
        let y = &self.matrix * DVector::from_column_slice(x);
        y.as_slice().to_vec()
    }

    fn adjoint_values(&self, z: &[f64]) -> Vec<f64> {
        let y = self.matrix.tr_mul(&DVector::from_column_slice(z));
        y.as_slice().to_vec()
    }

    fn resolvent_values(&self, s: f64, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.n();
        let mut shifted = self.matrix.clone();
        for i in 0..n {
            shifted[(i, i)] += s;
        }
        let rhs = DVector::from_column_slice(b);
        let x = if self.lower_triangular {
            shifted.solve_lower_triangular(&rhs)
        } else {
            shifted.lu().solve(&rhs)
        };
        match x {
            Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x.as_slice().to_vec()),
            _ => Err(Error::Singular(format!("A + {s:e}·I is singular"))),
        }
    }

    fn tikhonov_family<'a>(&'a self, element: &[f64]) -> Result<Box<dyn TikhonovFamily + 'a>> {
        let svd = self.matrix.clone().svd(true, false);
        let u = svd
            .u
            .ok_or_else(|| Error::Singular("singular value decomposition failed".into()))?;
        let coeffs = u.tr_mul(&DVector::from_column_slice(element));
        let sigma2 = svd.singular_values.map(|s| s * s);
        Ok(Box::new(SpectralSplit {
            h: self.grid.h(),
            sigma2: sigma2.as_slice().to_vec(),
            coeff2: coeffs.iter().map(|c| c * c).collect(),
        }))
    }

    fn to_dense(&self) -> DenseOperator {
        self.clone()
    }
}

/// Tikhonov split expressed in the singular system of `A`.
struct SpectralSplit {
    h: f64,
    sigma2: Vec<f64>,
    coeff2: Vec<f64>,
}

impl TikhonovFamily for SpectralSplit {
    fn evaluate(&self, lambda: f64) -> Result<(f64, f64)> {
        let mut theta = 0.0;
        let mut d2 = 0.0;
        for (&s2, &c2) in self.sigma2.iter().zip(&self.coeff2) {
            let den = s2 + lambda;
            if den == 0.0 {
                d2 += c2;
                continue;
            }
            theta += s2 * c2 / (den * den);
            let f = lambda / den;
            d2 += f * f * c2;
        }
        Ok((self.h * theta, (self.h * d2).sqrt()))
    }
}
