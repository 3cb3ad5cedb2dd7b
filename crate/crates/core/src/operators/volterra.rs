use super::{DenseOperator, LinearOperator, TikhonovFamily};
use crate::error::{Error, Result};
use crate::hilbert::Grid;

/// Matrix-free form of [`super::volterra`]: `A = h·L` with `L` the inclusive
/// lower-triangular matrix of ones.
///
/// `L⁻¹` is the first difference, so `(A + sI)x = b` becomes the two-term
/// recurrence `(h+s)xᵢ − s·xᵢ₋₁ = bᵢ − bᵢ₋₁`, and `(LLᵀ)⁻¹` is tridiagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolterraOperator {
    grid: Grid,
}

impl VolterraOperator {
    pub fn new(grid: Grid) -> Self {
        VolterraOperator { grid }
    }

    /// `A⁻¹y`, the scaled first difference `(yᵢ − yᵢ₋₁)/h`.
    pub fn inverse_values(&self, y: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        let mut prev = 0.0;
        y.iter()
            .map(|&v| {
                let d = (v - prev) / h;
                prev = v;
                d
            })
            .collect()
    }
}

impl LinearOperator for VolterraOperator {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply_values(&self, x: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        let mut acc = 0.0;
        x.iter()
            .map(|&v| {
                acc += v;
                h * acc
            })
            .collect()
    }

    fn adjoint_values(&self, z: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        let mut out = vec![0.0; z.len()];
        let mut acc = 0.0;
        for (o, &v) in out.iter_mut().zip(z).rev() {
            acc += v;
            *o = h * acc;
        }
        out
    }

    fn resolvent_values(&self, s: f64, b: &[f64]) -> Result<Vec<f64>> {
        let h = self.grid.h();
        let diag = h + s;
        if diag == 0.0 || !diag.is_finite() {
            return Err(Error::Singular(format!("A + {s:e}·I is singular")));
        }
        let mut x = Vec::with_capacity(b.len());
        let (mut x_prev, mut b_prev) = (0.0, 0.0);
        for &bi in b {
            let xi = (bi - b_prev + s * x_prev) / diag;
            x.push(xi);
            x_prev = xi;
            b_prev = bi;
        }
        Ok(x)
    }

    fn tikhonov_family<'a>(&'a self, element: &[f64]) -> Result<Box<dyn TikhonovFamily + 'a>> {
        Ok(Box::new(BandedSplit { h: self.grid.h(), element: element.to_vec() }))
    }

    fn to_dense(&self) -> DenseOperator {
        super::volterra(self.grid)
    }
}

/// With `T = (LLᵀ)⁻¹` and `(h²I + λT)m = e`: `v_λ = h·L⁻¹m`, `A·v_λ = h²m`.
struct BandedSplit {
    h: f64,
    element: Vec<f64>,
}

impl TikhonovFamily for BandedSplit {
    fn evaluate(&self, lambda: f64) -> Result<(f64, f64)> {
        let n = self.element.len();
        let h2 = self.h * self.h;
        // Thomas elimination on diag h²+2λ (last h²+λ), off-diagonals −λ.
        let mut c = vec![0.0; n];
        let mut m = vec![0.0; n];
        let mut pivot = h2 + if n == 1 { lambda } else { 2.0 * lambda };
        m[0] = self.element[0] / pivot;
        for i in 1..n {
            c[i - 1] = -lambda / pivot;
            let d = h2 + if i + 1 == n { lambda } else { 2.0 * lambda };
            pivot = d + lambda * c[i - 1];
            if !(pivot > 0.0) {
                return Err(Error::Singular(format!("Tikhonov system at λ = {lambda:e}")));
            }
            m[i] = (self.element[i] + lambda * m[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            m[i] -= c[i] * m[i + 1];
        }
        let mut theta = 0.0;
        let mut d2 = 0.0;
        let mut prev = 0.0;
        for (&mi, &ei) in m.iter().zip(&self.element) {
            let v = self.h * (mi - prev);
            theta += v * v;
            let r = ei - h2 * mi;
            d2 += r * r;
            prev = mi;
        }
        Ok((self.h * theta, (self.h * d2).sqrt()))
    }
}
