//! Solvers for the Lavrentiev equation `F(x) + α(x − x̄) = yδ`.

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::hilbert::DiscreteFunction;
use crate::operators::LinearOperator;

/// Settings for a single regularized solve.
#[derive(Debug, Clone)]
pub struct LavrentievConfig {
    pub alpha: f64,
    /// Absolute tolerance on `‖F(x) + α(x − x̄) − yδ‖`.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub warm_start: Option<DiscreteFunction>,
}

impl LavrentievConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(LavrentievConfig { alpha, newton_tol: 1e-12, max_newton_iters: 50, warm_start: None })
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(LavrentievConfig { alpha, ..self.clone() })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must be positive and finite, got {alpha}")))
    }
}

/// A solution `x_α^δ` with its diagnostics.
#[derive(Debug, Clone)]
pub struct RegularizedSolution {
    pub x: DiscreteFunction,
    pub alpha: f64,
    /// `‖F(x) + α(x − x̄) − yδ‖`.
    pub residual_norm: f64,
    pub newton_iters: usize,
    /// `‖F(x) − yδ‖`, which equals `α‖x − x̄‖` at an exact solution.
    pub discrepancy: f64,
}

/// Solves `(A + αI)x = yδ + αx̄` directly.
pub fn solve_linear<A>(
    a: &A,
    xbar: &DiscreteFunction,
    ydelta: &DiscreteFunction,
    alpha: f64,
) -> Result<RegularizedSolution>
where
    A: LinearOperator + ?Sized,
{
    check_alpha(alpha)?;
    a.grid().ensure_same(xbar.grid())?;
    a.grid().ensure_same(ydelta.grid())?;
    let rhs = ydelta.axpy(alpha, xbar)?;
    let x = DiscreteFunction::from_vec_unchecked(*a.grid(), a.resolvent_values(alpha, rhs.values())?);
    let ax = a.apply(&x)?;
    let discrepancy = ax.distance(ydelta)?;
    let residual_norm = ax.axpy(alpha, &x)?.distance(&rhs)?;
    Ok(RegularizedSolution { x, alpha, residual_norm, newton_iters: 0, discrepancy })
}

/// Damped Newton on `G(x) = F(x) + α(x − x̄) − yδ` with Jacobian
/// `F′(x) + αI`, started from `cfg.warm_start` or `x̄`. Linear models are
/// solved directly.
pub fn solve_nonlinear<F>(
    f: &F,
    xbar: &DiscreteFunction,
    ydelta: &DiscreteFunction,
    cfg: &LavrentievConfig,
) -> Result<RegularizedSolution>
where
    F: ForwardModel + ?Sized,
{
    check_alpha(cfg.alpha)?;
    if let Some(a) = f.as_linear() {
        return solve_linear(a, xbar, ydelta, cfg.alpha);
    }
    f.grid().ensure_same(xbar.grid())?;
    f.grid().ensure_same(ydelta.grid())?;
    let alpha = cfg.alpha;
    let residual = |x: &DiscreteFunction| -> Result<(DiscreteFunction, DiscreteFunction)> {
        let fx = f.apply(x)?;
        let g = fx.axpy(alpha, &x.try_sub(xbar)?)?.try_sub(ydelta)?;
        Ok((fx, g))
    };

    let mut x = match &cfg.warm_start {
        Some(w) => {
            f.grid().ensure_same(w.grid())?;
            w.clone()
        }
        None => xbar.clone(),
    };
    let (mut fx, mut g) = residual(&x)?;
    let mut g_norm = g.norm();
    let mut iters = 0;
    while g_norm > cfg.newton_tol {
        if iters == cfg.max_newton_iters {
            return Err(Error::NoConvergence {
                context: "Lavrentiev Newton iteration",
                iterations: iters,
                residual: g_norm,
                last_iterate: Some(x.into_values()),
            });
        }
        iters += 1;
        let step = f.shifted_jacobian_solve(&x, alpha, &(-&g))?;
        let mut damping = 1.0;
        loop {
            let trial = x.axpy(damping, &step)?;
            let (trial_fx, trial_g) = residual(&trial)?;
            let trial_norm = trial_g.norm();
            if trial_norm < g_norm || damping < 1e-6 {
                x = trial;
                fx = trial_fx;
                g = trial_g;
                g_norm = trial_norm;
                break;
            }
            damping *= 0.5;
        }
    }
    let discrepancy = fx.distance(ydelta)?;
    Ok(RegularizedSolution { x, alpha, residual_norm: g_norm, newton_iters: iters, discrepancy })
}

/// Solves along strictly decreasing `alphas`, warm-starting each solve from
/// the previous solution. The first failure aborts the path.
pub fn solve_alpha_path<F>(
    f: &F,
    xbar: &DiscreteFunction,
    ydelta: &DiscreteFunction,
    alphas: &[f64],
    cfg: &LavrentievConfig,
) -> Result<Vec<RegularizedSolution>>
where
    F: ForwardModel + ?Sized,
{
    if alphas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::domain("alpha path must be strictly decreasing"));
    }
    let mut out: Vec<RegularizedSolution> = Vec::with_capacity(alphas.len());
    let mut warm = cfg.warm_start.clone();
    for &alpha in alphas {
        let step_cfg = LavrentievConfig { warm_start: warm.take(), ..cfg.with_alpha(alpha)? };
        let sol = solve_nonlinear(f, xbar, ydelta, &step_cfg)
            .map_err(|e| Error::AlphaPath { alpha, source: Box::new(e) })?;
        warm = Some(sol.x.clone());
        out.push(sol);
    }
    Ok(out)
}

/// Slacks in the two a priori bounds
/// `‖x_α^δ − x†‖ ≤ ‖x† − x̄‖ + δ/α` and
/// `‖F(x_α^δ) − F(x†)‖ ≤ α‖x† − x̄‖ + δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasicEstimateReport {
    /// Bound minus observed value for the solution error.
    pub solution_slack: f64,
    /// Bound minus observed value for the image error.
    pub image_slack: f64,
    pub tolerance: f64,
}

impl BasicEstimateReport {
    pub fn holds(&self) -> bool {
        self.solution_slack >= -self.tolerance && self.image_slack >= -self.tolerance
    }
}

pub fn basic_estimate_check<F>(
    f: &F,
    sol: &RegularizedSolution,
    xdag: &DiscreteFunction,
    xbar: &DiscreteFunction,
    delta: f64,
) -> Result<BasicEstimateReport>
where
    F: ForwardModel + ?Sized,
{
    let dist = xdag.distance(xbar)?;
    let x_bound = dist + delta / sol.alpha;
    let fx_bound = sol.alpha * dist + delta;
    let x_err = sol.x.distance(xdag)?;
    let fx_err = f.apply(&sol.x)?.distance(&f.apply(xdag)?)?;
    Ok(BasicEstimateReport {
        solution_slack: x_bound - x_err,
        image_slack: fx_bound - fx_err,
        tolerance: 1e-8 * x_bound.max(fx_bound).max(1.0),
    })
}
