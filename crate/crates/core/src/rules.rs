//! Parameter choice: a priori, sequential discrepancy and Lepskiĭ balancing.

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::hilbert::DiscreteFunction;
use crate::solver::{solve_alpha_path, solve_nonlinear, LavrentievConfig, RegularizedSolution};

/// The function `Ψ` of a variational source condition, with `Θ(α) = α²Ψ(α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiSpec {
    /// `Ψ(α) = (1−μ)μ^{μ/(1−μ)}α^{μ/(1−μ)}` for `μ ∈ (0, ½]`.
    Holder { mu: f64 },
    /// `Ψ(α) = 1/(−ln α)` on `(0, 1)`.
    Logarithmic,
    /// `Ψ(α) = α`.
    Linear,
}

impl PsiSpec {
    pub fn holder(mu: f64) -> Result<Self> {
        if mu > 0.0 && mu <= 0.5 {
            Ok(PsiSpec::Holder { mu })
        } else {
            Err(Error::domain(format!("Hölder exponent must lie in (0, 1/2], got {mu}")))
        }
    }

    pub fn psi(&self, alpha: f64) -> f64 {
        match *self {
            PsiSpec::Holder { mu } => {
                let e = mu / (1.0 - mu);
                (1.0 - mu) * mu.powf(e) * alpha.powf(e)
            }
            PsiSpec::Logarithmic => {
                if alpha > 0.0 && alpha < 1.0 {
                    -1.0 / alpha.ln()
                } else {
                    f64::NAN
                }
            }
            PsiSpec::Linear => alpha,
        }
    }

    pub fn theta(&self, alpha: f64) -> f64 {
        alpha * alpha * self.psi(alpha)
    }

    /// Exponent `e` of the predicted rate `O(δ^e)`, when it is a power.
    pub fn rate_exponent(&self) -> Option<f64> {
        match *self {
            PsiSpec::Holder { mu } => Some(mu / (2.0 - mu)),
            PsiSpec::Linear => Some(1.0 / 3.0),
            PsiSpec::Logarithmic => None,
        }
    }

    fn upper_alpha(&self) -> f64 {
        match self {
            PsiSpec::Logarithmic => 1.0 - 1e-12,
            _ => 1e2,
        }
    }
}

/// `α` as a function of `δ` alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum APrioriRule {
    /// `α = C·δ^θ` with `0 < θ < 1`.
    PowerLaw { c: f64, theta: f64 },
    /// `α = Θ⁻¹(δ²)`.
    ThetaInverse(PsiSpec),
}

const ALPHA_BRACKET: (f64, f64) = (1e-16, 1e2);

pub fn apriori_alpha(delta: f64, rule: &APrioriRule) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!("noise level must be positive, got {delta}")));
    }
    match *rule {
        APrioriRule::PowerLaw { c, theta } => {
            if !(c > 0.0) || !(theta > 0.0 && theta < 1.0) {
                return Err(Error::domain(format!("power law needs C > 0 and theta in (0,1), got C={c}, theta={theta}")));
            }
            Ok(c * delta.powf(theta))
        }
        APrioriRule::ThetaInverse(psi) => {
            let target = delta * delta;
            let mut lo = ALPHA_BRACKET.0.ln();
            let mut hi = ALPHA_BRACKET.1.min(psi.upper_alpha()).ln();
            let f = |la: f64| psi.theta(la.exp());
            if !(f(lo) <= target && target <= f(hi)) {
                return Err(Error::domain(format!(
                    "delta^2 = {target:e} outside the range of Theta on [{:e}, {:e}]",
                    lo.exp(),
                    hi.exp()
                )));
            }
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok((0.5 * (lo + hi)).exp())
        }
    }
}

/// Sequential discrepancy principle on `α_k = q^k·α₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyRule {
    pub tau: f64,
    pub kappa: f64,
    pub q: f64,
    pub alpha0: f64,
    pub max_steps: usize,
}

impl Default for DiscrepancyRule {
    fn default() -> Self {
        DiscrepancyRule { tau: 1.5, kappa: 0.9, q: 0.5, alpha0: 1.0, max_steps: 200 }
    }
}

impl DiscrepancyRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) {
            return Err(Error::Config("tau must exceed 1".into()));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Config("kappa must lie in (0,1)".into()));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Config("q must lie in (0,1)".into()));
        }
        if !(self.alpha0 > 0.0) || !self.alpha0.is_finite() {
            return Err(Error::Config("alpha0 must be positive".into()));
        }
        Ok(())
    }

    pub fn threshold(&self, delta: f64) -> f64 {
        self.tau * delta.powf(self.kappa)
    }
}

#[derive(Debug, Clone)]
pub struct DiscrepancyOutcome {
    pub alpha: f64,
    pub solution: RegularizedSolution,
    /// Every `(α_k, ‖F(x_{α_k}) − yδ‖)` visited, in scan order.
    pub trail: Vec<(f64, f64)>,
    pub threshold: f64,
}

/// Walks `α_k` downward with warm starts and returns the first (hence
/// largest) `α_k` whose discrepancy is at most `τδ^κ`.
pub fn discrepancy_alpha<F>(
    f: &F,
    xbar: &DiscreteFunction,
    ydelta: &DiscreteFunction,
    delta: f64,
    rule: &DiscrepancyRule,
    cfg: &LavrentievConfig,
) -> Result<DiscrepancyOutcome>
where
    F: ForwardModel + ?Sized,
{
    rule.validate()?;
    let threshold = rule.threshold(delta);
    let mut alpha = rule.alpha0;
    let mut warm = cfg.warm_start.clone();
    let mut trail = Vec::new();
    for k in 0..=rule.max_steps {
        let step_cfg = LavrentievConfig { warm_start: warm.take(), ..cfg.with_alpha(alpha)? };
        let sol = solve_nonlinear(f, xbar, ydelta, &step_cfg)
            .map_err(|e| Error::AlphaPath { alpha, source: Box::new(e) })?;
        trail.push((alpha, sol.discrepancy));
        if sol.discrepancy <= threshold {
            if k == 0 {
                return Err(Error::StartCondition { discrepancy: sol.discrepancy, threshold });
            }
            return Ok(DiscrepancyOutcome { alpha, solution: sol, trail, threshold });
        }
        warm = Some(sol.x);
        alpha *= rule.q;
    }
    Err(Error::ThresholdNotReached { threshold, steps: rule.max_steps })
}

/// Lepskiĭ balancing on the ascending grid `α_j = α₀/q^j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LepskiiRule {
    pub beta: f64,
    pub q: f64,
    pub alpha0: f64,
    pub j_max: usize,
    /// Grid points above this value are dropped.
    pub alpha_max: f64,
}

impl Default for LepskiiRule {
    fn default() -> Self {
        LepskiiRule { beta: 0.0, q: 0.5, alpha0: 1.0, j_max: 60, alpha_max: f64::INFINITY }
    }
}

impl LepskiiRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta < 1.0) {
            return Err(Error::Config("beta must lie in [0,1)".into()));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Config("q must lie in (0,1)".into()));
        }
        if !(self.alpha0 > 0.0) || !self.alpha0.is_finite() {
            return Err(Error::Config("alpha0 must be positive".into()));
        }
        Ok(())
    }

    /// `Σ(α, δ) = √(3−2β)/(1−β)·δ/α`.
    pub fn sigma(&self, alpha: f64, delta: f64) -> f64 {
        (3.0 - 2.0 * self.beta).sqrt() / (1.0 - self.beta) * delta / alpha
    }

    /// Ascending grid `α₀/q^j`, `j = 0..=j_max`, capped at `alpha_max`.
    pub fn grid(&self) -> Vec<f64> {
        (0..=self.j_max)
            .map(|j| self.alpha0 / self.q.powi(j as i32))
            .take_while(|&a| a <= self.alpha_max)
            .collect()
    }
}

/// One pairwise comparison `‖x_{α_i} − x_{α_j}‖ ≤ 2Σ(α_i, δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LepskiiTest {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct LepskiiOutcome {
    pub alpha: f64,
    pub index: usize,
    pub solution: RegularizedSolution,
    pub trail: Vec<LepskiiTest>,
}

/// Picks the largest `α_j` such that every smaller grid point `α_i`
/// satisfies the pairwise test; the scan stops at the first index with a
/// failing test.
pub fn lepskii_alpha(path: &[RegularizedSolution], delta: f64, rule: &LepskiiRule) -> Result<LepskiiOutcome> {
    rule.validate()?;
    if path.is_empty() {
        return Err(Error::domain("Lepskii selection needs a nonempty path"));
    }
    if path.windows(2).any(|w| !(w[1].alpha > w[0].alpha)) {
        return Err(Error::domain("Lepskii path must be strictly ascending in alpha"));
    }
    let mut trail = Vec::new();
    let mut selected = 0;
    'outer: for j in 1..path.len() {
        for i in 0..j {
            let distance = path[i].x.distance(&path[j].x)?;
            let bound = 2.0 * rule.sigma(path[i].alpha, delta);
            let passed = distance <= bound;
            trail.push(LepskiiTest { i, j, distance, bound, passed });
            if !passed {
                break 'outer;
            }
        }
        selected = j;
    }
    Ok(LepskiiOutcome {
        alpha: path[selected].alpha,
        index: selected,
        solution: path[selected].clone(),
        trail,
    })
}

/// Solves on the rule's grid (largest α first, warm-started) and selects.
pub fn lepskii_select<F>(
    f: &F,
    xbar: &DiscreteFunction,
    ydelta: &DiscreteFunction,
    delta: f64,
    rule: &LepskiiRule,
    cfg: &LavrentievConfig,
) -> Result<LepskiiOutcome>
where
    F: ForwardModel + ?Sized,
{
    rule.validate()?;
    let mut alphas = rule.grid();
    if alphas.is_empty() {
        return Err(Error::domain("Lepskii grid is empty: alpha0 exceeds alpha_max"));
    }
    alphas.reverse();
    let mut path = solve_alpha_path(f, xbar, ydelta, &alphas, cfg)?;
    path.reverse();
    lepskii_alpha(&path, delta, rule)
}
