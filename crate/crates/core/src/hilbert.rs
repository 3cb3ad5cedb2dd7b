//! Uniform grids on (0,1), grid functions with the rectangle-rule inner
//! product, exact-norm noise and log-log slope fitting.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Where the `n` nodes of a grid sit inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridLayout {
    /// `h = 1/n`, `t_i = i·h` for `i = 1..n`; the last node is `t = 1`.
    RightEndpoint,
    /// `h = 1/(n+1)`, `t_i = i·h` for `i = 1..n`; both boundary points excluded.
    Interior,
}

/// A uniform grid with `n ≥ 2` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
    layout: GridLayout,
}

impl Grid {
    /// Right-endpoint grid `t_i = i/n`.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_layout(n, GridLayout::RightEndpoint)
    }

    /// Interior grid of a Dirichlet problem, `t_i = i/(n+1)`.
    pub fn interior(n: usize) -> Result<Self> {
        Self::with_layout(n, GridLayout::Interior)
    }

    pub fn with_layout(n: usize, layout: GridLayout) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("grid needs at least 2 nodes, got {n}")));
        }
        let h = match layout {
            GridLayout::RightEndpoint => 1.0 / n as f64,
            GridLayout::Interior => 1.0 / (n + 1) as f64,
        };
        Ok(Grid { n, h, layout })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh width, also the quadrature weight of every node.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    /// Node `t_i` for zero-based index `i` (i.e. `(i+1)·h`).
    pub fn node(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}(n={})", self.layout, self.n)
    }
}

/// Nodal values of an element of `L²(0,1)` on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch {
                left: grid.to_string(),
                right: format!("vector of length {}", values.len()),
            });
        }
        Ok(DiscreteFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        DiscreteFunction { grid, values: vec![0.0; grid.n()] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        DiscreteFunction { grid, values: vec![c; grid.n()] }
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n()).map(|i| f(grid.node(i))).collect();
        DiscreteFunction { grid, values }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        DiscreteFunction { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `h·Σ uᵢvᵢ`.
    pub fn inner(&self, other: &DiscreteFunction) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.grid.h() * dot(&self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        (self.grid.h() * dot(&self.values, &self.values)).sqrt()
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &DiscreteFunction) -> Result<f64> {
        Ok(self.try_sub(other)?.norm())
    }

    pub fn try_add(&self, other: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.zip_with(other, |x, y| x + a * y)
    }

    pub fn scale(&self, a: f64) -> DiscreteFunction {
        self.map(|v| a * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DiscreteFunction {
        DiscreteFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(
        &self,
        other: &DiscreteFunction,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DiscreteFunction> {
        self.grid.ensure_same(&other.grid)?;
        Ok(DiscreteFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }
}

impl Index<usize> for DiscreteFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for DiscreteFunction {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

// Operator sugar for functions known to share a grid; panics on mismatch.
impl Add for &DiscreteFunction {
    type Output = DiscreteFunction;
    fn add(self, rhs: &DiscreteFunction) -> DiscreteFunction {
        self.try_add(rhs).expect("grid mismatch in addition")
    }
}

impl Sub for &DiscreteFunction {
    type Output = DiscreteFunction;
    fn sub(self, rhs: &DiscreteFunction) -> DiscreteFunction {
        self.try_sub(rhs).expect("grid mismatch in subtraction")
    }
}

impl Mul<&DiscreteFunction> for f64 {
    type Output = DiscreteFunction;
    fn mul(self, rhs: &DiscreteFunction) -> DiscreteFunction {
        rhs.scale(self)
    }
}

impl Neg for &DiscreteFunction {
    type Output = DiscreteFunction;
    fn neg(self) -> DiscreteFunction {
        self.scale(-1.0)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Noise level and seed of a synthetic measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(delta: f64, seed: u64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::domain(format!("noise level must be finite and >= 0, got {delta}")));
        }
        Ok(NoiseSpec { delta, seed })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic RNG for a `(seed, δ, n)` triple.
pub(crate) fn noise_rng(seed: u64, delta: f64, n: usize) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(splitmix64(seed) ^ delta.to_bits()) ^ n as u64);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Standard normal vector of length `n` from `rng`.
pub(crate) fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Returns `yδ` with `‖y − yδ‖ = δ`; the direction is isotropic and fixed by
/// `(seed, δ, n)`.
pub fn add_noise(y: &DiscreteFunction, spec: NoiseSpec) -> Result<DiscreteFunction> {
    let spec = NoiseSpec::new(spec.delta, spec.seed)?;
    if spec.delta == 0.0 {
        return Ok(y.clone());
    }
    let mut rng = noise_rng(spec.seed, spec.delta, y.len());
    let dir = loop {
        let g = DiscreteFunction::from_vec_unchecked(*y.grid(), gaussian_vector(&mut rng, y.len()));
        if g.norm() > 0.0 {
            break g;
        }
    };
    let dir = dir.scale(spec.delta / dir.norm());
    y.try_add(&dir)
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Fits `ln y ≈ intercept + slope·ln x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::domain(format!(
            "slope fit needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::domain("slope fit needs at least 3 points"));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::domain(format!("slope fit needs positive finite data, got {bad}")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("slope fit needs at least two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = lx
            .iter()
            .zip(&ly)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(SlopeFit { slope, intercept, r2 })
}
