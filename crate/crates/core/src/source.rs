//! Source-condition analysis: the distance function `d(R)`, the rates it
//! predicts, and empirical checks of variational source conditions.

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::hilbert::{gaussian_vector, noise_rng, DiscreteFunction};
use crate::operators::LinearOperator;
use crate::rules::PsiSpec;

/// Search interval for the multiplier `λ`.
pub const LAMBDA_BRACKET: (f64, f64) = (1e-14, 1e6);

/// How a profile entry was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryStatus {
    /// `θ(λ_R) = R²` was solved inside the bracket.
    Converged,
    /// `θ(λ_min) < R²`: the norm constraint is inactive and `d` is taken at
    /// `λ_min`, which is (numerically) the unconstrained minimum.
    Saturated,
    /// `θ(λ_max) > R²`: `R` is too small for the bracket; `d` is taken at
    /// `λ_max`.
    BelowRange,
}

/// Tabulated `d(R) = min{‖e − Aw‖ : ‖w‖ ≤ R}` for `e = x† − x̄`.
#[derive(Debug, Clone)]
pub struct DistanceProfile {
    pub radii: Vec<f64>,
    pub d: Vec<f64>,
    pub lambda: Vec<f64>,
    pub status: Vec<EntryStatus>,
    /// `|θ(λ_R)/R² − 1|` per entry (zero unless converged).
    pub theta_residual: Vec<f64>,
    /// `√θ(λ_min)`: the radius beyond which the profile saturates.
    pub saturation_radius: f64,
    pub element_norm: f64,
    /// Whether `θ` was strictly decreasing on the sampled `λ` grid.
    pub theta_monotone: bool,
}

impl DistanceProfile {
    /// A profile from a closed-form `d(R)`, for testing the rate pipeline.
    pub fn analytic(radii: &[f64], d: impl Fn(f64) -> f64) -> Self {
        let n = radii.len();
        let d: Vec<f64> = radii.iter().map(|&r| d(r)).collect();
        let element_norm = d.first().copied().unwrap_or(0.0);
        DistanceProfile {
            radii: radii.to_vec(),
            d,
            lambda: vec![f64::NAN; n],
            status: vec![EntryStatus::Converged; n],
            theta_residual: vec![0.0; n],
            saturation_radius: f64::INFINITY,
            element_norm,
            theta_monotone: true,
        }
    }

    /// Whether the element lies in the range of `A` up to numerical
    /// precision, i.e. the profile drops to zero.
    pub fn collapses(&self) -> bool {
        self.status
            .iter()
            .zip(&self.d)
            .any(|(s, &d)| *s == EntryStatus::Saturated && d <= 1e-8 * self.element_norm.max(1.0))
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::domain("radii must be positive and finite"));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("radii must be strictly ascending"));
    }
    Ok(())
}

/// Computes `d(R)` through the multiplier `λ_R` with
/// `θ(λ_R) = ‖A*(AA* + λ_R I)⁻¹e‖² = R²`.
///
/// The scalar equation is solved by the Illinois variant of regula falsi in
/// `(ln λ, ln θ)`, where `θ` is close to a power law.
pub fn distance_function<A>(a: &A, element: &DiscreteFunction, radii: &[f64]) -> Result<DistanceProfile>
where
    A: LinearOperator + ?Sized,
{
    check_radii(radii)?;
    a.grid().ensure_same(element.grid())?;
    let element_norm = element.norm();
    if element_norm == 0.0 {
        return Err(Error::domain("distance function of the zero element"));
    }
    let family = a.tikhonov_family(element.values())?;
    let eval = |log_lambda: f64| family.evaluate(log_lambda.exp());

    let (lo0, hi0) = (LAMBDA_BRACKET.0.ln(), LAMBDA_BRACKET.1.ln());
    let (theta_lo, d_lo) = eval(lo0)?;
    let (theta_hi, d_hi) = eval(hi0)?;

    let mut theta_monotone = true;
    let mut prev = theta_lo;
    for k in 1..=12 {
        let x = lo0 + (hi0 - lo0) * k as f64 / 12.0;
        let theta = if k == 12 { theta_hi } else { eval(x)?.0 };
        theta_monotone &= theta < prev;
        prev = theta;
    }

    let n = radii.len();
    let mut profile = DistanceProfile {
        radii: radii.to_vec(),
        d: Vec::with_capacity(n),
        lambda: Vec::with_capacity(n),
        status: Vec::with_capacity(n),
        theta_residual: Vec::with_capacity(n),
        saturation_radius: theta_lo.sqrt(),
        element_norm,
        theta_monotone,
    };

    // λ_R decreases in R, so each root bounds the next bracket from above.
    let mut upper = (hi0, theta_hi.ln());
    for &r in radii {
        let target = 2.0 * r.ln();
        if theta_lo < r * r {
            profile.d.push(d_lo);
            profile.lambda.push(LAMBDA_BRACKET.0);
            profile.status.push(EntryStatus::Saturated);
            profile.theta_residual.push(0.0);
            continue;
        }
        if theta_hi > r * r {
            profile.d.push(d_hi);
            profile.lambda.push(LAMBDA_BRACKET.1);
            profile.status.push(EntryStatus::BelowRange);
            profile.theta_residual.push(0.0);
            continue;
        }
        // g(x) = ln θ(e^x) − 2 ln R, positive at `a`, negative at `b`.
        let (mut xa, mut ga) = (lo0, theta_lo.ln() - target);
        let (mut xb, mut gb) = (upper.0, upper.1 - target);
        if gb > 0.0 {
            xb = hi0;
            gb = theta_hi.ln() - target;
        }
        let mut best = if ga.abs() < gb.abs() { (xa, ga) } else { (xb, gb) };
        let mut side = 0i8;
        for _ in 0..200 {
            if best.1.abs() <= 1e-10 || (xb - xa).abs() <= 1e-14 {
                break;
            }
            let mut x = (xa * gb - xb * ga) / (gb - ga);
            if !(x > xa.min(xb) && x < xa.max(xb)) {
                x = 0.5 * (xa + xb);
            }
            let (theta, _) = eval(x)?;
            let g = theta.ln() - target;
            if g.abs() < best.1.abs() {
                best = (x, g);
            }
            if g > 0.0 {
                xa = x;
                ga = g;
                if side == 1 {
                    gb *= 0.5;
                }
                side = 1;
            } else {
                xb = x;
                gb = g;
                if side == -1 {
                    ga *= 0.5;
                }
                side = -1;
            }
        }
        let (theta, d) = eval(best.0)?;
        upper = (best.0, theta.ln());
        profile.d.push(d);
        profile.lambda.push(best.0.exp());
        profile.status.push(EntryStatus::Converged);
        profile.theta_residual.push((theta / (r * r) - 1.0).abs());
    }
    Ok(profile)
}

/// Why a prediction entry has no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionStatus {
    Ok,
    /// `δ` lies outside the range of `φ` covered by the profile.
    OutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedRate {
    pub delta: f64,
    /// Matched a priori parameter `α = φ⁻¹(δ)`.
    pub alpha: f64,
    /// Predicted error `d(χ⁻¹(φ⁻¹(δ)))`.
    pub error: f64,
    pub status: PredictionStatus,
}

#[derive(Debug, Clone)]
pub struct RatePrediction {
    pub entries: Vec<PredictedRate>,
    /// True when the profile collapsed and the `√δ` rate was reported.
    pub benchmark: bool,
}

/// Predicted error `d(χ⁻¹(φ⁻¹(δ)))` with `χ(R) = d(R)/R` and
/// `φ(α) = α·d(χ⁻¹(α))`.
///
/// Parametrized by `R`, `φ(χ(R)) = d(R)²/R`; all three curves are
/// interpolated piecewise linearly in log-log coordinates. A collapsed
/// profile (element in the range of `A`) yields `α = √δ` and the error
/// bound `(1 + R₀)√δ`.
pub fn rate_from_distance(profile: &DistanceProfile, deltas: &[f64]) -> Result<RatePrediction> {
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::domain("noise levels must be positive"));
    }
    if profile.collapses() {
        let r0 = profile.saturation_radius;
        let entries = deltas
            .iter()
            .map(|&delta| PredictedRate {
                delta,
                alpha: delta.sqrt(),
                error: (1.0 + r0) * delta.sqrt(),
                status: PredictionStatus::Ok,
            })
            .collect();
        return Ok(RatePrediction { entries, benchmark: true });
    }

    let pts: Vec<(f64, f64, f64)> = profile
        .radii
        .iter()
        .zip(&profile.d)
        .zip(&profile.status)
        .filter(|((_, &d), s)| **s == EntryStatus::Converged && d > 0.0)
        .map(|((&r, &d), _)| (r.ln(), d.ln(), (d * d / r).ln()))
        .collect();
    let strictly = pts.windows(2).all(|w| w[1].1 < w[0].1 && w[1].2 < w[0].2);
    if pts.len() < 2 || !strictly {
        return Err(Error::domain("profile needs at least two strictly decreasing converged entries"));
    }

    let entries = deltas
        .iter()
        .map(|&delta| {
            let target = delta.ln();
            let (hi, lo) = (pts[0].2, pts[pts.len() - 1].2);
            if target > hi || target < lo {
                return PredictedRate { delta, alpha: f64::NAN, error: f64::NAN, status: PredictionStatus::OutOfRange };
            }
            // Bisection for the segment, then linear inversion inside it.
            let (mut i, mut j) = (0, pts.len() - 1);
            while j - i > 1 {
                let m = (i + j) / 2;
                if pts[m].2 >= target {
                    i = m;
                } else {
                    j = m;
                }
            }
            let s = if pts[j].2 == pts[i].2 { 0.0 } else { (target - pts[i].2) / (pts[j].2 - pts[i].2) };
            let log_r = pts[i].0 + s * (pts[j].0 - pts[i].0);
            let log_d = pts[i].1 + s * (pts[j].1 - pts[i].1);
            PredictedRate {
                delta,
                alpha: (log_d - log_r).exp(),
                error: log_d.exp(),
                status: PredictionStatus::Ok,
            }
        })
        .collect();
    Ok(RatePrediction { entries, benchmark: false })
}

/// Which residual quantity enters the index function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VscVariant {
    /// `G = ⟨F(x) − F(x†), x − x†⟩`, tested against `G^μ`.
    Lavrentiev { mu: f64 },
    /// `G = ‖F(x) − F(x†)‖`, tested against `G^μ`.
    Tikhonov { mu: f64 },
}

impl VscVariant {
    fn mu(&self) -> f64 {
        match *self {
            VscVariant::Lavrentiev { mu } | VscVariant::Tikhonov { mu } => mu,
        }
    }
}

/// Samples `x = x† + r·u` with `r` log-uniform and `u` uniform on the
/// sphere, preceded by up to 16 points `x† + 2^{−k}(x̄ − x†)` on the ray
/// towards the reference element. Sample `k` does not depend on `count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSampler {
    pub count: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    pub seed: u64,
}

const RAY_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VscSample {
    /// `⟨x† − x̄, x† − x⟩ − β‖x − x†‖²`.
    pub numerator: f64,
    /// The residual quantity `G`.
    pub g: f64,
}

#[derive(Debug, Clone)]
pub struct VscReport {
    pub mu: f64,
    pub beta: f64,
    /// Smallest `β₂` with `numerator ≤ β₂·G^μ` on every sample.
    pub fitted_coefficient: f64,
    /// Samples with `G ≈ 0` but positive numerator.
    pub violations: usize,
    pub sample_count: usize,
    pub samples: Vec<VscSample>,
}

impl VscReport {
    /// Samples violating `numerator ≤ β₂·G^μ`.
    pub fn violations_for(&self, beta2: f64) -> usize {
        self.samples
            .iter()
            .filter(|s| s.numerator > 0.0 && s.numerator > beta2 * s.g.powf(self.mu))
            .count()
    }
}

/// Checks `⟨x† − x̄, x† − x⟩ ≤ β‖x − x†‖² + β₂·G^μ` on sampled `x` and fits
/// the smallest admissible `β₂`.
pub fn vsc_verify<F>(
    f: &F,
    xdag: &DiscreteFunction,
    xbar: &DiscreteFunction,
    variant: VscVariant,
    beta: f64,
    sampler: &RadialSampler,
) -> Result<VscReport>
where
    F: ForwardModel + ?Sized,
{
    let mu = variant.mu();
    if let VscVariant::Lavrentiev { mu } = variant {
        if !(mu > 0.0 && mu <= 0.5) {
            return Err(Error::domain(format!("Lavrentiev exponent must lie in (0, 1/2], got {mu}")));
        }
    } else if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::domain(format!("exponent must lie in (0, 1], got {mu}")));
    }
    if !(sampler.radius_min > 0.0 && sampler.radius_min <= sampler.radius_max) {
        return Err(Error::domain("sampler needs 0 < radius_min <= radius_max"));
    }
    let grid = *f.grid();
    grid.ensure_same(xdag.grid())?;
    grid.ensure_same(xbar.grid())?;
    let e = xdag.try_sub(xbar)?;
    let fdag = f.apply(xdag)?;

    let mut samples = Vec::with_capacity(sampler.count);
    let mut evaluate = |x: &DiscreteFunction| -> Result<()> {
        let diff = x.try_sub(xdag)?;
        let lhs = e.inner(&diff.scale(-1.0))?;
        let dy = f.apply(x)?.try_sub(&fdag)?;
        let g = match variant {
            VscVariant::Lavrentiev { .. } => dy.inner(&diff)?,
            VscVariant::Tikhonov { .. } => dy.norm(),
        };
        samples.push(VscSample { numerator: lhs - beta * diff.norm().powi(2), g: g.max(0.0) });
        Ok(())
    };

    let ray = xbar.try_sub(xdag)?;
    let rays = if ray.norm() > 0.0 { RAY_SAMPLES.min(sampler.count) } else { 0 };
    for k in 0..rays {
        evaluate(&xdag.axpy(0.5f64.powi(k as i32), &ray)?)?;
    }
    let mut rng = noise_rng(sampler.seed, sampler.radius_max, grid.n());
    let (lr0, lr1) = (sampler.radius_min.ln(), sampler.radius_max.ln());
    for _ in rays..sampler.count {
        let dir = DiscreteFunction::new(grid, gaussian_vector(&mut rng, grid.n()))?;
        let u: f64 = rand::Rng::random(&mut rng);
        let r = (lr0 + u * (lr1 - lr0)).exp();
        let norm = dir.norm();
        if norm == 0.0 {
            evaluate(xdag)?;
            continue;
        }
        evaluate(&xdag.axpy(r / norm, &dir)?)?;
    }

    let mut fitted = 0.0f64;
    let mut violations = 0;
    for s in &samples {
        if s.numerator > 0.0 {
            if s.g <= 1e-300 {
                violations += 1;
            } else {
                fitted = fitted.max(s.numerator / s.g.powf(mu));
            }
        }
    }
    Ok(VscReport {
        mu,
        beta,
        fitted_coefficient: fitted,
        violations,
        sample_count: samples.len(),
        samples,
    })
}

/// Index function of a variational source condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiKind {
    /// `φ(t) = t^μ`.
    Holder(f64),
    /// `φ(t) = 1/(−ln t)`.
    Logarithmic,
}

/// The `Ψ` (and hence `Θ`) induced by an index function.
pub fn psi_from_phi(phi: PhiKind) -> Result<PsiSpec> {
    match phi {
        PhiKind::Holder(mu) => PsiSpec::holder(mu),
        PhiKind::Logarithmic => Ok(PsiSpec::Logarithmic),
    }
}

#[cfg(test)]
mod tests;
