use std::f64::consts::PI;

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::hilbert::{DiscreteFunction, Grid};

/// Quadrature parameters for `A^p v = (sin pπ/π)·∫₀^∞ s^{p−1}(A+sI)⁻¹Av ds`.
///
/// After `s = e^u` the integral is truncated to `[log_s_min, log_s_max]` and
/// integrated by composite 8-point Gauss–Legendre; `node_count` is the total
/// number of nodes, so there are `node_count / 8` panels. The two truncated
/// tails are added back from their expansions to second order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DunfordSpec {
    pub p: f64,
    pub node_count: usize,
    pub log_s_min: f64,
    pub log_s_max: f64,
    /// Relative tail estimate above which the result carries a warning.
    pub tolerance: f64,
}

impl Default for DunfordSpec {
    fn default() -> Self {
        DunfordSpec { p: 0.5, node_count: 400, log_s_min: -12.0, log_s_max: 12.0, tolerance: 1e-6 }
    }
}

impl DunfordSpec {
    pub fn new(p: f64) -> Result<Self> {
        let spec = DunfordSpec { p, ..Default::default() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_range(mut self, log_s_min: f64, log_s_max: f64, node_count: usize) -> Self {
        self.log_s_min = log_s_min;
        self.log_s_max = log_s_max;
        self.node_count = node_count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::domain(format!("fractional exponent must lie in (0,1), got {}", self.p)));
        }
        if !(self.log_s_min < self.log_s_max) || !self.log_s_max.is_finite() || !self.log_s_min.is_finite() {
            return Err(Error::domain("log_s_min must be below log_s_max"));
        }
        if self.node_count < 8 {
            return Err(Error::domain("node_count must be at least 8"));
        }
        Ok(())
    }
}

/// Result of [`fractional_power_apply`].
#[derive(Debug, Clone)]
pub struct FractionalPower {
    pub value: DiscreteFunction,
    /// Size of the second-order tail terms relative to the result.
    pub tail_estimate: f64,
    pub warning: Option<String>,
}

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// `A^p v` for accretive `A` by Dunford quadrature.
pub fn fractional_power_apply<A>(
    a: &A,
    spec: DunfordSpec,
    v: &DiscreteFunction,
) -> Result<FractionalPower>
where
    A: LinearOperator + ?Sized,
{
    spec.validate()?;
    a.grid().ensure_same(v.grid())?;
    let p = spec.p;
    let n = v.len();
    let av = a.apply_values(v.values());
    let mut acc = vec![0.0; n];

    let panels = spec.node_count / 8;
    let width = (spec.log_s_max - spec.log_s_min) / panels as f64;
    for k in 0..panels {
        let mid = spec.log_s_min + (k as f64 + 0.5) * width;
        for &(x, w) in &GL8 {
            for u in [mid - 0.5 * width * x, mid + 0.5 * width * x] {
                let r = a.resolvent_values(u.exp(), &av)?;
                let weight = 0.5 * width * w * (p * u).exp();
                for (o, ri) in acc.iter_mut().zip(&r) {
                    *o += weight * ri;
                }
            }
        }
    }

    // Tails: (A+s)⁻¹Av = v − s·A⁻¹v + … near 0 and Av/s − A²v/s² + … near ∞;
    // the second-order terms are read off the resolvents at the cut points.
    let s_min = spec.log_s_min.exp();
    let s_max = spec.log_s_max.exp();
    let r_min: Vec<f64> = a
        .resolvent_values(s_min, &av)?
        .iter()
        .zip(v.values())
        .map(|(r, vi)| r - vi)
        .collect();
    let r_max: Vec<f64> = a
        .resolvent_values(s_max, &av)?
        .iter()
        .zip(&av)
        .map(|(r, ai)| s_max * r - ai)
        .collect();
    let lo0 = s_min.powf(p) / p;
    let lo1 = s_min.powf(p) / (p + 1.0);
    let hi0 = s_max.powf(p - 1.0) / (1.0 - p);
    let hi1 = s_max.powf(p - 1.0) / (2.0 - p);
    let scale = (p * PI).sin() / PI;
    for i in 0..n {
        acc[i] += lo0 * v[i] + hi0 * av[i] + lo1 * r_min[i] + hi1 * r_max[i];
        acc[i] *= scale;
    }

    let value = DiscreteFunction::from_vec_unchecked(*v.grid(), acc);
    let h = v.grid().h();
    let norm = |x: &[f64]| (h * x.iter().map(|y| y * y).sum::<f64>()).sqrt();
    let tail = scale * (lo1 * norm(&r_min) + hi1 * norm(&r_max));
    let tail_estimate = tail / value.norm().max(f64::MIN_POSITIVE);
    let warning = (tail_estimate > spec.tolerance).then(|| {
        format!(
            "Dunford tail estimate {tail_estimate:.3e} exceeds {:.1e}; widen [log_s_min, log_s_max]",
            spec.tolerance
        )
    });
    Ok(FractionalPower { value, tail_estimate, warning })
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("fractional exponent must lie in (0,1), got {p}")))
    }
}

/// Riemann–Liouville integral `(1/Γ(p))∫₀^τ (τ−s)^{p−1} v(s) ds` by product
/// integration.
///
/// `v` is interpolated piecewise linearly through `(0, 0)` and the nodal
/// values; the kernel moments over each cell are exact. Output `i` is taken
/// at `τᵢ = tᵢ + p·h/2`, the point where the continuous integral best matches
/// the `p`-th power of the discrete operator; beyond the last node the final
/// segment is extended linearly.
pub fn riemann_liouville(grid: &Grid, p: f64, v: &DiscreteFunction) -> Result<DiscreteFunction> {
    check_exponent(p)?;
    grid.ensure_same(v.grid())?;
    let n = grid.n();
    let h = grid.h();
    let mut knots = Vec::with_capacity(n + 1);
    knots.push(0.0);
    knots.extend(v.values());
    let inv_gamma = 1.0 / libm::tgamma(p);
    let last_node = grid.node(n - 1);

    let moments = |c0: f64, c1: f64, ua: f64, ub: f64| {
        let m0 = (ua.powf(p) - ub.powf(p)) / p;
        let m1 = ua * m0 - (ua.powf(p + 1.0) - ub.powf(p + 1.0)) / (p + 1.0);
        c0 * m0 + c1 * m1
    };

    let out = (0..n)
        .map(|i| {
            let tau = grid.node(i) + 0.5 * p * h;
            let mut acc = 0.0;
            for k in 0..n {
                let a = k as f64 * h;
                if a >= tau {
                    break;
                }
                let b = ((k + 1) as f64 * h).min(tau);
                let slope = (knots[k + 1] - knots[k]) / h;
                acc += moments(knots[k], slope, tau - a, tau - b);
            }
            if tau > last_node {
                let slope = (knots[n] - knots[n - 1]) / h;
                acc += moments(knots[n], slope, tau - last_node, 0.0);
            }
            acc * inv_gamma
        })
        .collect();
    Ok(DiscreteFunction::from_vec_unchecked(*grid, out))
}

/// Nodal values of `t^{−p}/Γ(1−p)`, the `p`-th fractional derivative of the
/// constant one.
pub fn abel_source(grid: &Grid, p: f64) -> Result<DiscreteFunction> {
    check_exponent(p)?;
    let c = 1.0 / libm::tgamma(1.0 - p);
    Ok(DiscreteFunction::from_fn(*grid, |t| c * t.powf(-p)))
}
