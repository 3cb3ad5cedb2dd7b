use std::f64::consts::PI;

use super::*;
use crate::forward::linear_forward;
use crate::hilbert::{fit_loglog_slope, Grid};
use crate::operators::{fractional_power_apply, volterra, DenseOperator, DunfordSpec, VolterraOperator};

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

fn check_invariants(p: &DistanceProfile) {
    assert!(p.theta_monotone);
    assert!(p.d.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert!(p.d.iter().all(|&d| d >= 0.0 && d <= p.element_norm * (1.0 + 1e-12)));
    for (s, r) in p.status.iter().zip(&p.theta_residual) {
        if *s == EntryStatus::Converged {
            assert!(*r <= 1e-8, "theta residual {r}");
        }
    }
}

fn smooth_w(g: Grid) -> DiscreteFunction {
    DiscreteFunction::from_fn(g, |t| (PI * t).cos() + 1.0)
}

#[test]
fn benchmark_element_collapses_dense() {
    let g = Grid::new(400).unwrap();
    let a = volterra(g);
    let w = smooth_w(g);
    let e = a.apply(&w).unwrap();
    let r0 = w.norm();
    let radii = log_grid(0.05 * r0, 20.0 * r0, 30);
    let p = distance_function(&a, &e, &radii).unwrap();
    check_invariants(&p);
    assert!((p.saturation_radius / r0 - 1.0).abs() < 1e-6);
    for (r, d) in radii.iter().zip(&p.d) {
        if *r >= r0 * (1.0 + 1e-3) {
            assert!(*d <= 1e-8, "R = {r}: d = {d}");
        } else {
            assert!(*d > 1e-8);
        }
    }
    assert!(p.collapses());
}

#[test]
fn benchmark_element_collapses_structured() {
    let g = Grid::new(1 << 16).unwrap();
    let a = VolterraOperator::new(g);
    let w = smooth_w(g);
    let e = a.apply(&w).unwrap();
    let r0 = w.norm();
    let p = distance_function(&a, &e, &log_grid(0.1 * r0, 10.0 * r0, 15)).unwrap();
    check_invariants(&p);
    for (r, d) in p.radii.iter().zip(&p.d) {
        if *r >= r0 * (1.0 + 1e-3) {
            assert!(*d <= 1e-8, "R = {r}: d = {d}");
        }
    }
}

#[test]
fn constant_one_decays_like_inverse_radius() {
    let n = 1 << 16;
    let g = Grid::new(n).unwrap();
    let a = VolterraOperator::new(g);
    let e = DiscreteFunction::constant(g, 1.0);
    let radii = log_grid(1.0, 30.0, 9);
    let p = distance_function(&a, &e, &radii).unwrap();
    check_invariants(&p);
    let fit = fit_loglog_slope(&radii, &p.d).unwrap();
    assert!((fit.slope + 1.0).abs() < 0.1, "slope {}", fit.slope);
    // Closed-form approximation of the discrete profile for larger radii.
    for (r, d) in radii.iter().zip(&p.d).filter(|(r, _)| **r >= 5.0) {
        let approx = 0.5 / r - r / (2.0 * n as f64);
        assert!((d / approx - 1.0).abs() < 0.05, "R = {r}: {d} vs {approx}");
    }
}

#[test]
fn dense_and_structured_profiles_agree() {
    let g = Grid::new(200).unwrap();
    let e = DiscreteFunction::from_fn(g, |t| 1.0 + t * t);
    let radii = log_grid(0.5, 10.0, 8);
    let p1 = distance_function(&volterra(g), &e, &radii).unwrap();
    let p2 = distance_function(&VolterraOperator::new(g), &e, &radii).unwrap();
    for (a, b) in p1.d.iter().zip(&p2.d) {
        assert!((a - b).abs() <= 1e-7 * a.max(1e-12));
    }
}

#[test]
fn tiny_radius_returns_element_norm() {
    let g = Grid::new(400).unwrap();
    let e = DiscreteFunction::constant(g, 1.0);
    let p = distance_function(&VolterraOperator::new(g), &e, &[1e-8]).unwrap();
    assert!((p.d[0] - e.norm()).abs() <= 1e-6);
    assert_eq!(p.status[0], EntryStatus::BelowRange);
}

#[test]
fn distance_function_input_errors() {
    let g = Grid::new(10).unwrap();
    let a = volterra(g);
    let e = DiscreteFunction::constant(g, 1.0);
    assert!(distance_function(&a, &DiscreteFunction::zeros(g), &[1.0]).is_err());
    assert!(distance_function(&a, &e, &[2.0, 1.0]).is_err());
    assert!(distance_function(&a, &e, &[0.0, 1.0]).is_err());
    assert!(distance_function(&a, &DiscreteFunction::zeros(Grid::new(11).unwrap()), &[1.0]).is_err());
}

#[test]
fn decay_bound_for_fractional_elements() {
    let g = Grid::new(1 << 16).unwrap();
    let a = VolterraOperator::new(g);
    let w = smooth_w(g);
    for p in [0.25, 0.4] {
        let spec = DunfordSpec::new(p).unwrap().with_range(-40.0, 40.0, 800);
        let e = fractional_power_apply(&a, spec, &w).unwrap().value;
        let probe = distance_function(&a, &e, &[1.0]).unwrap();
        let radii = log_grid(1.0, 0.5 * probe.saturation_radius, 12);
        let prof = distance_function(&a, &e, &radii).unwrap();
        check_invariants(&prof);
        let ex = p / (p - 1.0);
        let k = prof.d[0];
        for (r, d) in radii.iter().zip(&prof.d) {
            assert!(*d <= k * r.powf(ex) * 1.2, "p = {p}, R = {r}");
        }
    }
}

#[test]
fn analytic_inverse_profile_gives_cube_root() {
    let k = 0.7;
    let radii = log_grid(0.1, 1e5, 40);
    let profile = DistanceProfile::analytic(&radii, |r| k / r);
    let deltas: Vec<f64> = (0..9).map(|i| 10f64.powi(-i - 1)).collect();
    let pred = rate_from_distance(&profile, &deltas).unwrap();
    assert!(!pred.benchmark);
    for e in &pred.entries {
        assert_eq!(e.status, PredictionStatus::Ok);
        let want = k.powf(1.0 / 3.0) * e.delta.powf(1.0 / 3.0);
        assert!((e.error / want - 1.0).abs() < 1e-6);
        // χ⁻¹(α) = √(K/α), so α = K/R² and the error is K/R.
        let want_alpha = (k * k / e.delta).powf(-2.0 / 3.0) * k;
        assert!((e.alpha / want_alpha - 1.0).abs() < 1e-6);
    }
}

#[test]
fn analytic_fractional_profile_gives_holder_rate() {
    let radii = log_grid(0.1, 1e8, 60);
    for p in [0.25, 0.4] {
        let profile = DistanceProfile::analytic(&radii, |r| 0.5 * r.powf(p / (p - 1.0)));
        let deltas: Vec<f64> = (0..8).map(|i| 1e-2 * 10f64.powf(-0.5 * i as f64)).collect();
        let pred = rate_from_distance(&profile, &deltas).unwrap();
        let errs: Vec<f64> = pred.entries.iter().map(|e| e.error).collect();
        let slope = fit_loglog_slope(&deltas, &errs).unwrap().slope;
        assert!((slope - p / (p + 1.0)).abs() < 1e-9, "p = {p}: {slope}");
    }
}

#[test]
fn out_of_range_deltas_are_flagged() {
    let radii = log_grid(1.0, 10.0, 5);
    let profile = DistanceProfile::analytic(&radii, |r| 1.0 / r);
    let pred = rate_from_distance(&profile, &[1e-12, 1e-2, 10.0]).unwrap();
    assert_eq!(pred.entries[0].status, PredictionStatus::OutOfRange);
    assert_eq!(pred.entries[1].status, PredictionStatus::Ok);
    assert_eq!(pred.entries[2].status, PredictionStatus::OutOfRange);
}

#[test]
fn numeric_volterra_profile_matches_inverse_law() {
    let n = 1 << 16;
    let g = Grid::new(n).unwrap();
    let a = VolterraOperator::new(g);
    let e = DiscreteFunction::constant(g, 1.0);
    let profile = distance_function(&a, &e, &log_grid(0.5, 200.0, 25)).unwrap();
    let deltas = log_grid(1e-6, 1e-2, 9);
    let numeric = rate_from_distance(&profile, &deltas).unwrap();
    let analytic = DistanceProfile::analytic(&log_grid(1e-2, 1e4, 50), |r| 0.5 / r);
    let reference = rate_from_distance(&analytic, &deltas).unwrap();
    for (a, b) in numeric.entries.iter().zip(&reference.entries) {
        assert_eq!(a.status, PredictionStatus::Ok);
        assert!((a.error / b.error - 1.0).abs() < 0.15, "delta {}", a.delta);
    }
    let errs: Vec<f64> = numeric.entries.iter().map(|e| e.error).collect();
    let slope = fit_loglog_slope(&deltas, &errs).unwrap().slope;
    assert!((0.28..=0.38).contains(&slope), "{slope}");
}

#[test]
fn collapsed_profile_uses_square_root_branch() {
    let g = Grid::new(400).unwrap();
    let a = volterra(g);
    let w = smooth_w(g);
    let e = a.apply(&w).unwrap();
    let profile = distance_function(&a, &e, &log_grid(1.0, 100.0, 10)).unwrap();
    let pred = rate_from_distance(&profile, &[1e-4, 1e-6]).unwrap();
    assert!(pred.benchmark);
    let r0 = w.norm();
    for p in &pred.entries {
        assert!((p.alpha - p.delta.sqrt()).abs() < 1e-15);
        assert!((p.error / ((1.0 + r0) * p.delta.sqrt()) - 1.0).abs() < 1e-6);
    }
}

fn volterra_vsc(n: usize, count: usize, seed: u64) -> VscReport {
    let g = Grid::new(n).unwrap();
    let f = linear_forward(VolterraOperator::new(g));
    let xdag = DiscreteFunction::constant(g, 1.0);
    let xbar = DiscreteFunction::zeros(g);
    let sampler = RadialSampler { count, radius_min: 1e-4, radius_max: 10.0, seed };
    vsc_verify(&f, &xdag, &xbar, VscVariant::Lavrentiev { mu: 0.5 }, 0.0, &sampler).unwrap()
}

#[test]
fn volterra_vsc_constant() {
    let n = 400;
    let report = volterra_vsc(n, 10_000, 7);
    assert_eq!(report.sample_count, 10_000);
    assert_eq!(report.violations, 0);
    assert_eq!(report.violations_for(2f64.sqrt()), 0);
    assert!(report.fitted_coefficient <= 2f64.sqrt() * (1.0 + 1e-10));
    // The ray x† − εx† attains √2/√(1+h).
    let h = 1.0 / n as f64;
    let ray = 2f64.sqrt() / (1.0 + h).sqrt();
    assert!((report.fitted_coefficient - ray).abs() < 1e-12);
}

#[test]
fn vsc_nested_samples_are_monotone() {
    let mut last = 0.0;
    let full = volterra_vsc(100, 400, 3);
    for count in [1, 10, 50, 200, 400] {
        let r = volterra_vsc(100, count, 3);
        assert_eq!(r.samples[..], full.samples[..count]);
        assert!(r.fitted_coefficient >= last);
        last = r.fitted_coefficient;
    }
}

#[test]
fn vsc_at_exact_solution_is_not_a_violation() {
    let g = Grid::new(30).unwrap();
    let f = linear_forward(volterra(g));
    let xdag = DiscreteFunction::constant(g, 1.0);
    let sampler = RadialSampler { count: 20, radius_min: 1e-3, radius_max: 1.0, seed: 1 };
    // x̄ = x† makes every left-hand side vanish.
    let r = vsc_verify(&f, &xdag, &xdag, VscVariant::Lavrentiev { mu: 0.5 }, 0.0, &sampler).unwrap();
    assert_eq!(r.violations, 0);
    assert_eq!(r.fitted_coefficient, 0.0);
    assert!(vsc_verify(&f, &xdag, &xdag, VscVariant::Lavrentiev { mu: 0.7 }, 0.0, &sampler).is_err());
}

#[test]
fn self_adjoint_fractional_source_condition() {
    let n = 60;
    let g = Grid::new(n).unwrap();
    let spectrum: Vec<f64> = (0..n).map(|k| 1.0 / ((k + 1) as f64).powi(2)).collect();
    let a = DenseOperator::diagonal(g, &spectrum).unwrap();
    let w = DiscreteFunction::from_fn(g, |t| (3.0 * t).sin() + 0.5);
    let f = linear_forward(a);
    for p in [0.1, 0.25, 0.4] {
        let xdag = DiscreteFunction::new(g, spectrum.iter().zip(w.values()).map(|(s, v)| s.powf(p) * v).collect())
            .unwrap();
        let mu = 2.0 * p / (2.0 * p + 1.0);
        let beta = 0.5 - p;
        let sampler = RadialSampler { count: 3000, radius_min: 1e-4, radius_max: 10.0, seed: 5 };
        let xbar = DiscreteFunction::zeros(g);
        let r = vsc_verify(&f, &xdag, &xbar, VscVariant::Lavrentiev { mu }, beta, &sampler).unwrap();
        let constant = (0.5 + p) * w.norm().powf(2.0 / (2.0 * p + 1.0));
        assert_eq!(r.violations, 0);
        assert_eq!(r.violations_for(constant), 0);
        assert!(r.fitted_coefficient <= constant * (1.0 + 1e-10), "p = {p}");
    }
}

#[test]
fn tikhonov_variant_uses_residual_norm() {
    let g = Grid::new(50).unwrap();
    let f = linear_forward(VolterraOperator::new(g));
    let xdag = DiscreteFunction::constant(g, 1.0);
    let xbar = DiscreteFunction::zeros(g);
    let sampler = RadialSampler { count: 100, radius_min: 1e-3, radius_max: 1.0, seed: 2 };
    let r = vsc_verify(&f, &xdag, &xbar, VscVariant::Tikhonov { mu: 0.5 }, 0.0, &sampler).unwrap();
    let ray = &r.samples[0];
    // x = x† − x†: ⟨x†, x†⟩ = 1 and ‖A·1‖ = ‖t‖.
    let t_norm = DiscreteFunction::from_fn(g, |t| t).norm();
    assert!((ray.numerator - 1.0).abs() < 1e-14);
    assert!((ray.g - t_norm).abs() < 1e-14);
}

#[test]
fn psi_from_index_functions() {
    let half = psi_from_phi(PhiKind::Holder(0.5)).unwrap();
    assert!((half.psi(0.2) - 0.05).abs() < 1e-15);
    assert!((half.theta(0.2) - 0.04 * 0.05).abs() < 1e-15);
    assert!((half.rate_exponent().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let quarter = psi_from_phi(PhiKind::Holder(0.25)).unwrap();
    assert!((quarter.rate_exponent().unwrap() - 1.0 / 7.0).abs() < 1e-15);
    // Θ(t) ∝ t^{(2−μ)/(1−μ)}.
    let ratio = quarter.theta(0.02) / quarter.theta(0.01);
    assert!((ratio.log2() - 1.75 / 0.75).abs() < 1e-12);
    let log = psi_from_phi(PhiKind::Logarithmic).unwrap();
    assert!((log.theta(0.1) - 0.01 / 10f64.ln()).abs() < 1e-15);
    assert!(log.rate_exponent().is_none());
    assert!(psi_from_phi(PhiKind::Holder(0.75)).is_err());
}
