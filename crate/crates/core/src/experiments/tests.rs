use super::*;

fn small(source: VolterraSource) -> ExperimentConfig {
    ExperimentConfig::new(ProblemSpec::volterra(2000, source))
}

fn check_rows(report: &RateReport) {
    assert!(report.failure.is_none(), "{:?}", report.failure);
    for w in report.rows.windows(2) {
        assert!(w[0].delta > w[1].delta || (w[0].delta == w[1].delta && w[0].seed < w[1].seed));
    }
    for row in &report.rows {
        let identity = row.alpha * row.distance_to_reference;
        assert!((row.discrepancy - identity).abs() <= 1e-8 * identity.max(1e-300), "{row:?}");
        assert!(row.estimates.holds(), "{:?}", row.estimates);
    }
}

#[test]
fn median_of_even_and_odd_counts() {
    assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
}

#[test]
fn delta_grid_defaults_span_three_decades() {
    let d = DeltaGrid::default().values();
    assert_eq!(d.len(), 8);
    assert_eq!(d[0], 1e-2);
    assert!((d[7] / 10f64.powf(-5.5) - 1.0).abs() < 1e-12);
    assert!(DeltaGrid { count: 3, ..DeltaGrid::default() }.validate().is_err());
    assert!(DeltaGrid { ratio: 1.0, ..DeltaGrid::default() }.validate().is_err());
}

#[test]
fn matched_rules_and_exponents() {
    let p = ProblemSpec::volterra(10, VolterraSource::Fractional { p: 0.25 });
    assert_eq!(p.default_rule(), APrioriRule::PowerLaw { c: 1.0, theta: 0.8 });
    assert!((p.expected_exponent() - 0.2).abs() < 1e-15);
    let c = ProblemSpec::volterra(10, VolterraSource::ConstantOne);
    assert!((c.expected_exponent() - 1.0 / 3.0).abs() < 1e-15);
    assert!(ProblemSpec::volterra(10, VolterraSource::Fractional { p: 1.0 }).validate().is_err());
}

#[test]
fn constant_one_rate_and_row_invariants() {
    let cfg = ExperimentConfig::new(ProblemSpec::volterra(1 << 16, VolterraSource::ConstantOne));
    let report = run_rate_study(&cfg).unwrap();
    check_rows(&report);
    assert_eq!(report.rows.len(), 40);
    assert!(report.pass(), "slope {:?}", report.slope());
    assert!(report.medians_decreasing());
}

#[test]
fn fitted_slope_is_recomputable_from_rows() {
    let report = run_rate_study(&small(VolterraSource::BenchmarkAw)).unwrap();
    let mut by_delta: Vec<(f64, Vec<f64>)> = Vec::new();
    for row in &report.rows {
        match by_delta.last_mut() {
            Some((d, errs)) if *d == row.delta => errs.push(row.error),
            _ => by_delta.push((row.delta, vec![row.error])),
        }
    }
    let ds: Vec<f64> = by_delta.iter().map(|b| b.0).collect();
    let meds: Vec<f64> = by_delta.iter_mut().map(|b| median(&mut b.1)).collect();
    let fit = fit_loglog_slope(&ds, &meds).unwrap();
    assert_eq!(fit, report.fit.unwrap());
}

#[test]
fn csv_is_deterministic_and_well_formed() {
    let cfg = small(VolterraSource::ConstantOne);
    let a = run_rate_study(&cfg).unwrap().to_csv();
    let b = run_rate_study(&cfg).unwrap().to_csv();
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some(RATE_HEADER));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 6);
    assert_eq!(first[0], "1.0000000000000000e-2");
    assert_eq!(first[1], "0");
    // 17 significant digits round-trip every float exactly.
    let alpha: f64 = first[2].parse().unwrap();
    assert_eq!(alpha, apriori_alpha(1e-2, &ProblemSpec::volterra(2, VolterraSource::ConstantOne).default_rule()).unwrap());
}

#[test]
fn medians_ignore_seed_order() {
    let mut cfg = small(VolterraSource::ConstantOne);
    cfg.seeds = vec![4, 0, 3, 1, 2];
    let shuffled = run_rate_study(&cfg).unwrap();
    cfg.seeds = vec![0, 1, 2, 3, 4];
    let sorted = run_rate_study(&cfg).unwrap();
    assert_eq!(shuffled.medians, sorted.medians);
    assert_eq!(shuffled.to_csv(), sorted.to_csv());
}

#[test]
fn fractional_rates() {
    for p in [0.25, 0.4] {
        let cfg = ExperimentConfig::new(ProblemSpec::volterra(1 << 16, VolterraSource::Fractional { p }));
        let report = run_rate_study(&cfg).unwrap();
        check_rows(&report);
        assert!(report.pass(), "p = {p}: slope {:?}", report.slope());
    }
}

#[test]
fn dense_benchmark_rate() {
    let problem = ProblemSpec::Volterra { n: 400, source: VolterraSource::BenchmarkAw, backend: Backend::Dense };
    let report = run_rate_study(&ExperimentConfig::new(problem)).unwrap();
    check_rows(&report);
    let slope = report.slope().unwrap();
    assert!((0.42..=0.58).contains(&slope), "{slope}");
}

#[test]
fn elliptic_rate() {
    let report = run_rate_study(&ExperimentConfig::new(ProblemSpec::elliptic(200, XiKind::Cubic))).unwrap();
    check_rows(&report);
    assert!(report.rows.iter().all(|r| r.newton_iters > 0));
    let slope = report.slope().unwrap();
    assert!((0.4..=0.6).contains(&slope), "{slope}");
}

#[test]
fn wrong_rule_fails_the_slope_check() {
    let cfg = small(VolterraSource::BenchmarkAw)
        .with_rule(RuleSpec::APriori(APrioriRule::PowerLaw { c: 1.0, theta: 0.05 }));
    let report = run_rate_study(&cfg).unwrap();
    assert!(report.failure.is_none());
    assert!(!report.pass(), "slope {:?}", report.slope());
}

#[test]
fn solver_failure_keeps_partial_rows() {
    // A tiny α₀ already meets the threshold, violating the start condition.
    let rule = DiscrepancyRule { alpha0: 1e-12, ..DiscrepancyRule::default() };
    let report = run_rate_study(&small(VolterraSource::ConstantOne).with_rule(RuleSpec::Discrepancy(rule))).unwrap();
    assert!(matches!(report.failure, Some(Error::StartCondition { .. })));
    assert!(!report.pass());
    assert!(report.to_csv().lines().last().unwrap().starts_with("# error: alpha0 below discrepancy threshold"));
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = small(VolterraSource::ConstantOne)
        .with_rule(RuleSpec::Discrepancy(DiscrepancyRule { tau: 0.9, ..DiscrepancyRule::default() }));
    let err = run_rate_study(&bad).unwrap_err();
    assert!(err.to_string().contains("tau must exceed 1"));
    let mut no_seeds = small(VolterraSource::ConstantOne);
    no_seeds.seeds.clear();
    assert!(matches!(run_rate_study(&no_seeds), Err(Error::Config(_))));
    let elliptic = ExperimentConfig::new(ProblemSpec::elliptic(50, XiKind::Cubic));
    assert!(run_distance_study(&elliptic, &DistanceConfig::default()).is_err());
}

#[test]
fn rule_comparison_on_benchmark() {
    let cfg = small(VolterraSource::BenchmarkAw);
    let rules = comparison_rules(&cfg);
    let report = run_rule_comparison(&cfg, &rules).unwrap();
    assert!(report.failure().is_none());
    let apriori = report.study("apriori").unwrap();
    let lep = report.study("lepskii").unwrap();
    let disc = report.study("discrepancy").unwrap();
    let sigma = |d: f64| LepskiiSpec::default().rule(d).sigma(apriori_alpha(d, &APrioriRule::ThetaInverse(PsiSpec::Linear)).unwrap(), d);
    for row in &lep.rows {
        assert!(row.error <= 3.0 * sigma(row.delta), "{row:?}");
    }
    for row in &disc.rows {
        let RuleAudit::Discrepancy { threshold, trail } = &row.audit else { panic!() };
        let n = trail.len();
        assert!(n >= 2);
        assert!(trail[n - 1].1 <= *threshold && trail[n - 2].1 > *threshold);
    }
    assert!(apriori.medians_decreasing());
    assert!(lep.medians_decreasing());
    for s in &report.studies {
        assert_eq!(s.rows.len(), 40);
    }
    // Identical noisy data across rules: the a priori cell at δ reproduces itself.
    assert_eq!(apriori.to_csv(), run_rate_study(&cfg).unwrap().to_csv());
    let csv = report.to_csv();
    assert!(csv.starts_with("rule,delta,seed,"));
    assert_eq!(csv.lines().count(), 121);
}

#[test]
fn comparison_rules_take_the_configured_rule() {
    let lep = LepskiiSpec { q: 0.7, ..LepskiiSpec::default() };
    let cfg = small(VolterraSource::ConstantOne).with_rule(RuleSpec::Lepskii(lep));
    let rules = comparison_rules(&cfg);
    assert_eq!(rules[2], RuleSpec::Lepskii(lep));
    assert_eq!(rules[0], RuleSpec::APriori(APrioriRule::ThetaInverse(PsiSpec::Linear)));
}

#[test]
fn distance_study_constant_one() {
    let cfg = ExperimentConfig::new(ProblemSpec::volterra(1 << 16, VolterraSource::ConstantOne));
    let study = run_distance_study(&cfg, &DistanceConfig::default()).unwrap();
    let slope = study.predicted_slope.unwrap();
    assert!((0.28..=0.38).contains(&slope), "{slope}");
    assert!(!study.prediction.benchmark);
    let ratios = study.ratios();
    assert_eq!(ratios.len(), 8);
    assert!(ratios.iter().all(|r| (0.2..=5.0).contains(r)), "{ratios:?}");
    assert_eq!(study.profile_csv().lines().count(), 26);
    assert!(study.table_csv().starts_with("delta,alpha_pred,err_pred,err_obs\n"));
}

#[test]
fn distance_study_benchmark_collapses() {
    let cfg = small(VolterraSource::BenchmarkAw);
    let dcfg = DistanceConfig { radii: RadiusGrid { min: 0.1, max: 100.0, count: 20 }, profile_n: None };
    let study = run_distance_study(&cfg, &dcfg).unwrap();
    assert!(study.profile.collapses());
    assert!(study.prediction.benchmark);
    for e in &study.prediction.entries {
        assert!((e.alpha - e.delta.sqrt()).abs() < 1e-15);
    }
    assert!(study.ratios().iter().all(|r| (0.2..=5.0).contains(r)));
}

#[test]
fn discrepancy_on_constant_one() {
    // With q = 1/2 the α grid is coarser than the δ grid and the medians alias.
    let rule = DiscrepancyRule { q: 0.7, ..DiscrepancyRule::default() };
    let cfg = ExperimentConfig::new(ProblemSpec::volterra(1 << 16, VolterraSource::ConstantOne))
        .with_rule(RuleSpec::Discrepancy(rule));
    let report = run_rate_study(&cfg).unwrap();
    check_rows(&report);
    assert!(report.medians_decreasing(), "{:?}", report.medians);
    for row in &report.rows {
        // ‖x† − x̄‖ = 1.
        let bound = rule.q * (rule.tau - 1.0) * row.delta.powf(rule.kappa);
        assert!(row.alpha >= bound);
    }
}
