//! Forward models `F` for `F(x) = y`.

use std::fmt;

use crate::error::{Error, Result};
use crate::hilbert::{DiscreteFunction, Grid};
use crate::operators::{resolvent_apply, LinearOperator};
use crate::tridiag;

/// The contract a monotone forward operator provides to the solvers.
pub trait ForwardModel {
    fn grid(&self) -> &Grid;

    fn apply(&self, x: &DiscreteFunction) -> Result<DiscreteFunction>;

    /// `F′(x)·dir`.
    fn derivative_apply(&self, x: &DiscreteFunction, dir: &DiscreteFunction) -> Result<DiscreteFunction>;

    /// Solves `(F′(x) + α·I)z = r`.
    fn shifted_jacobian_solve(
        &self,
        x: &DiscreteFunction,
        alpha: f64,
        r: &DiscreteFunction,
    ) -> Result<DiscreteFunction>;

    /// A lower bound for `⟨F(x)−F(x̃), x−x̃⟩` known from the model structure.
    fn gap_lower_bound(&self, _x: &DiscreteFunction, _x_tilde: &DiscreteFunction) -> Result<f64> {
        Ok(0.0)
    }

    /// The underlying operator when `F` is linear.
    fn as_linear(&self) -> Option<&dyn LinearOperator> {
        None
    }
}

/// `F(x) = A·x` for an accretive linear operator `A`.
#[derive(Debug, Clone)]
pub struct LinearForward<A> {
    op: A,
}

pub fn linear_forward<A: LinearOperator>(op: A) -> LinearForward<A> {
    LinearForward { op }
}

impl<A: LinearOperator> LinearForward<A> {
    pub fn operator(&self) -> &A {
        &self.op
    }
}

impl<A: LinearOperator> ForwardModel for LinearForward<A> {
    fn grid(&self) -> &Grid {
        self.op.grid()
    }

    fn apply(&self, x: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.op.apply(x)
    }

    fn derivative_apply(&self, x: &DiscreteFunction, dir: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.op.grid().ensure_same(x.grid())?;
        self.op.apply(dir)
    }

    fn shifted_jacobian_solve(
        &self,
        x: &DiscreteFunction,
        alpha: f64,
        r: &DiscreteFunction,
    ) -> Result<DiscreteFunction> {
        self.op.grid().ensure_same(x.grid())?;
        resolvent_apply(&self.op, alpha, r)
    }

    fn as_linear(&self) -> Option<&dyn LinearOperator> {
        Some(&self.op)
    }
}

/// Monotone nonlinearity `ξ` of the semilinear equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum XiKind {
    Linear,
    Cubic,
    Arctan,
}

impl XiKind {
    pub fn value(self, u: f64) -> f64 {
        match self {
            XiKind::Linear => u,
            XiKind::Cubic => u * u * u,
            XiKind::Arctan => u.atan(),
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            XiKind::Linear => 1.0,
            XiKind::Cubic => 3.0 * u * u,
            XiKind::Arctan => 1.0 / (1.0 + u * u),
        }
    }
}

impl fmt::Display for XiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            XiKind::Linear => "linear",
            XiKind::Cubic => "cubic",
            XiKind::Arctan => "arctan",
        })
    }
}

/// `F(q) = u` where `−u″ + ξ(u) = q` on `(0,1)`, `u(0) = u(1) = 0`,
/// discretized by the 3-point stencil on the interior nodes.
#[derive(Debug, Clone)]
pub struct EllipticModel1D {
    grid: Grid,
    xi: XiKind,
    /// Inner Newton stops once a step is below `tol·(1 + ‖u‖)` or the
    /// residual is below `tol`.
    pub inner_tol: f64,
    pub max_inner_iters: usize,
}

impl EllipticModel1D {
    /// Model on `n` interior nodes with the default inner tolerance `1e-12`
    /// and 50 inner iterations.
    pub fn new(n: usize, xi: XiKind) -> Result<Self> {
        Ok(EllipticModel1D { grid: Grid::interior(n)?, xi, inner_tol: 1e-12, max_inner_iters: 50 })
    }

    pub fn xi(&self) -> XiKind {
        self.xi
    }

    fn inv_h2(&self) -> f64 {
        1.0 / (self.grid.h() * self.grid.h())
    }

    /// `−Δ_h u + ξ(u) − q`.
    fn residual(&self, u: &[f64], q: &[f64]) -> Vec<f64> {
        let n = u.len();
        let c = self.inv_h2();
        (0..n)
            .map(|i| {
                let left = if i > 0 { u[i - 1] } else { 0.0 };
                let right = if i + 1 < n { u[i + 1] } else { 0.0 };
                c * (2.0 * u[i] - left - right) + self.xi.value(u[i]) - q[i]
            })
            .collect()
    }

    /// Bands of `K = −Δ_h + diag ξ′(u)` scaled by `a` and shifted by `b·I`.
    fn jacobian_bands(&self, u: &[f64], a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let c = self.inv_h2();
        let diag = u.iter().map(|&ui| b + a * (2.0 * c + self.xi.derivative(ui))).collect();
        let off = vec![-a * c; u.len() - 1];
        (diag, off)
    }

    fn weighted_norm(&self, v: &[f64]) -> f64 {
        (self.grid.h() * v.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }

    /// Solves the discrete boundary value problem for `u`.
    pub fn state(&self, q: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.grid.ensure_same(q.grid())?;
        let q = q.values();
        let mut u = vec![0.0; q.len()];
        let mut res = self.residual(&u, q);
        let mut res_norm = self.weighted_norm(&res);
        for iter in 0..self.max_inner_iters {
            if res_norm <= self.inner_tol {
                return Ok(DiscreteFunction::from_vec_unchecked(self.grid, u));
            }
            let (diag, off) = self.jacobian_bands(&u, 1.0, 0.0);
            let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
            let step = tridiag::solve(&off, &diag, &off, &rhs)?;
            if self.weighted_norm(&step) <= self.inner_tol * (1.0 + self.weighted_norm(&u)) {
                // Near the rounding floor the residual may not decrease any more.
                u.iter_mut().zip(&step).for_each(|(a, b)| *a += b);
                return Ok(DiscreteFunction::from_vec_unchecked(self.grid, u));
            }
            let mut damping = 1.0;
            let (trial, trial_res, trial_norm) = loop {
                let trial: Vec<f64> = u.iter().zip(&step).map(|(a, b)| a + damping * b).collect();
                let trial_res = self.residual(&trial, q);
                let trial_norm = self.weighted_norm(&trial_res);
                if trial_norm < res_norm || damping < 1e-10 {
                    break (trial, trial_res, trial_norm);
                }
                damping *= 0.5;
            };
            u = trial;
            res = trial_res;
            res_norm = trial_norm;
            if iter + 1 == self.max_inner_iters {
                break;
            }
        }
        Err(Error::NoConvergence {
            context: "elliptic forward solve",
            iterations: self.max_inner_iters,
            residual: res_norm,
            last_iterate: Some(u),
        })
    }

    /// Discrete `H¹₀` seminorm squared, `h·Σ ((dᵢ₊₁ − dᵢ)/h)²` with zero
    /// boundary values.
    pub fn h1_seminorm_sq(&self, d: &DiscreteFunction) -> f64 {
        let h = self.grid.h();
        let v = d.values();
        let mut prev = 0.0;
        let mut acc = 0.0;
        for &x in v.iter().chain(std::iter::once(&0.0)) {
            let g = (x - prev) / h;
            acc += g * g;
            prev = x;
        }
        h * acc
    }
}

impl ForwardModel for EllipticModel1D {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply(&self, q: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.state(q)
    }

    /// `F′(q)·dir = K(u)⁻¹dir`.
    fn derivative_apply(&self, q: &DiscreteFunction, dir: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.grid.ensure_same(dir.grid())?;
        let u = self.state(q)?;
        let (diag, off) = self.jacobian_bands(u.values(), 1.0, 0.0);
        let w = tridiag::solve(&off, &diag, &off, dir.values())?;
        Ok(DiscreteFunction::from_vec_unchecked(self.grid, w))
    }

    /// `(K⁻¹ + αI)z = r` is solved as `(I + αK)z = K·r`.
    fn shifted_jacobian_solve(
        &self,
        q: &DiscreteFunction,
        alpha: f64,
        r: &DiscreteFunction,
    ) -> Result<DiscreteFunction> {
        self.grid.ensure_same(r.grid())?;
        let u = self.state(q)?;
        let (k_diag, k_off) = self.jacobian_bands(u.values(), 1.0, 0.0);
        let kr = tridiag::mul(&k_off, &k_diag, &k_off, r.values());
        let (diag, off) = self.jacobian_bands(u.values(), alpha, 1.0);
        let z = tridiag::solve(&off, &diag, &off, &kr)?;
        Ok(DiscreteFunction::from_vec_unchecked(self.grid, z))
    }

    fn gap_lower_bound(&self, q: &DiscreteFunction, q_tilde: &DiscreteFunction) -> Result<f64> {
        let d = self.state(q)?.try_sub(&self.state(q_tilde)?)?;
        Ok(self.h1_seminorm_sq(&d))
    }
}

/// `(⟨F(x)−F(x̃), x−x̃⟩, structural lower bound)`; the elliptic bound is the
/// discrete gradient energy of the state difference, the linear one is 0.
pub fn monotonicity_gap<F>(f: &F, x: &DiscreteFunction, x_tilde: &DiscreteFunction) -> Result<(f64, f64)>
where
    F: ForwardModel + ?Sized,
{
    let dy = f.apply(x)?.try_sub(&f.apply(x_tilde)?)?;
    let gap = dy.inner(&x.try_sub(x_tilde)?)?;
    Ok((gap, f.gap_lower_bound(x, x_tilde)?))
}
