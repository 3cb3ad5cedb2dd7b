//! Bounded linear operators on grid functions.
//!
//! [`DenseOperator`] stores an explicit matrix; [`VolterraOperator`] is the
//! matrix-free integration operator `(Ax)ᵢ = h·Σ_{j≤i} xⱼ`, which allows
//! O(n) resolvents on grids far beyond what a dense factorization handles.

mod dense;
mod fractional;
mod volterra;

pub use dense::{adjoint, volterra, DenseOperator};
pub use fractional::{
    abel_source, fractional_power_apply, riemann_liouville, DunfordSpec, FractionalPower,
};
pub use volterra::VolterraOperator;

use crate::error::Result;
use crate::hilbert::{self, DiscreteFunction, Grid};

/// A bounded linear operator on grid functions of a fixed [`Grid`].
///
/// Adjoints are taken with respect to the weighted inner product `h·Σ uᵢvᵢ`;
/// the weight is uniform, so the adjoint matrix is the transpose.
pub trait LinearOperator {
    fn grid(&self) -> &Grid;

    /// `A·x` on raw nodal values.
    fn apply_values(&self, x: &[f64]) -> Vec<f64>;

    /// `A*·z` on raw nodal values.
    fn adjoint_values(&self, z: &[f64]) -> Vec<f64>;

    /// Solves `(A + s·I)x = b` directly.
    fn resolvent_values(&self, s: f64, b: &[f64]) -> Result<Vec<f64>>;

    /// Prepares repeated evaluation of the Tikhonov split of `element`
    /// for many multipliers `λ`.
    fn tikhonov_family<'a>(&'a self, element: &[f64]) -> Result<Box<dyn TikhonovFamily + 'a>>;

    fn to_dense(&self) -> DenseOperator;

    fn apply(&self, x: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.grid().ensure_same(x.grid())?;
        Ok(DiscreteFunction::from_vec_unchecked(*self.grid(), self.apply_values(x.values())))
    }

    fn apply_adjoint(&self, z: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.grid().ensure_same(z.grid())?;
        Ok(DiscreteFunction::from_vec_unchecked(*self.grid(), self.adjoint_values(z.values())))
    }
}

/// The split `e = A·v_λ + r_λ` with `v_λ = A*(AA* + λI)⁻¹e`.
pub trait TikhonovFamily {
    /// Returns `(θ(λ), ‖r_λ‖)` where `θ(λ) = ‖v_λ‖²`.
    fn evaluate(&self, lambda: f64) -> Result<(f64, f64)>;
}

/// Solves `(A + s·I)x = v`.
pub fn resolvent_apply<A>(a: &A, s: f64, v: &DiscreteFunction) -> Result<DiscreteFunction>
where
    A: LinearOperator + ?Sized,
{
    if !(s > 0.0) || !s.is_finite() {
        return Err(crate::Error::domain(format!("resolvent shift must be positive, got {s}")));
    }
    a.grid().ensure_same(v.grid())?;
    let x = a.resolvent_values(s, v.values())?;
    Ok(DiscreteFunction::from_vec_unchecked(*a.grid(), x))
}

/// Smallest sampled Rayleigh quotient `⟨Ax,x⟩/‖x‖²` over `trials` Gaussian
/// vectors.
pub fn accretivity_margin<A>(a: &A, trials: usize, seed: u64) -> f64
where
    A: LinearOperator + ?Sized,
{
    let n = a.grid().n();
    let mut rng = hilbert::noise_rng(seed, 0.0, n);
    let mut margin = f64::INFINITY;
    for _ in 0..trials.max(1) {
        let x = hilbert::gaussian_vector(&mut rng, n);
        let xx = hilbert::dot(&x, &x);
        if xx == 0.0 {
            continue;
        }
        let ax = a.apply_values(&x);
        margin = margin.min(hilbert::dot(&ax, &x) / xx);
    }
    margin
}
