//! End-to-end studies: convergence rates over a δ grid, side-by-side
//! parameter rules and distance-function predictions, with CSV output.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::forward::{linear_forward, EllipticModel1D, ForwardModel, XiKind};
use crate::hilbert::{add_noise, fit_loglog_slope, DiscreteFunction, Grid, NoiseSpec, SlopeFit};
use crate::operators::{fractional_power_apply, volterra, DunfordSpec, LinearOperator, VolterraOperator};
use crate::rules::{
    apriori_alpha, discrepancy_alpha, lepskii_select, APrioriRule, DiscrepancyRule, LepskiiRule, LepskiiTest, PsiSpec,
};
use crate::solver::{basic_estimate_check, solve_nonlinear, BasicEstimateReport, LavrentievConfig};
use crate::source::{
    distance_function, rate_from_distance, DistanceProfile, PredictedRate, PredictionStatus, RatePrediction,
};

/// Exact solution for the Volterra problems, always with `x̄ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolterraSource {
    /// `x† ≡ 1`.
    ConstantOne,
    /// `x† = A·w` with `w(t) = cos(πt) + 1`.
    BenchmarkAw,
    /// `x† = A^p·w` with the same `w`.
    Fractional { p: f64 },
}

impl fmt::Display for VolterraSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VolterraSource::ConstantOne => write!(f, "constant_one"),
            VolterraSource::BenchmarkAw => write!(f, "benchmark_aw"),
            VolterraSource::Fractional { p } => write!(f, "fractional(p={p})"),
        }
    }
}

/// Exact parameter `q†` for the elliptic problem, with `x̄ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EllipticSource {
    /// `q†(t) = amplitude·sin(πt)`.
    Sine { amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Matrix-free `O(n)` Volterra operator.
    #[default]
    Structured,
    /// Dense lower-triangular matrix.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemSpec {
    Volterra { n: usize, source: VolterraSource, backend: Backend },
    Elliptic { n: usize, xi: XiKind, source: EllipticSource },
}

impl ProblemSpec {
    pub fn volterra(n: usize, source: VolterraSource) -> Self {
        ProblemSpec::Volterra { n, source, backend: Backend::Structured }
    }

    pub fn elliptic(n: usize, xi: XiKind) -> Self {
        ProblemSpec::Elliptic { n, xi, source: EllipticSource::Sine { amplitude: 10.0 } }
    }

    pub fn n(&self) -> usize {
        match *self {
            ProblemSpec::Volterra { n, .. } | ProblemSpec::Elliptic { n, .. } => n,
        }
    }

    pub fn with_n(self, n: usize) -> Self {
        match self {
            ProblemSpec::Volterra { source, backend, .. } => ProblemSpec::Volterra { n, source, backend },
            ProblemSpec::Elliptic { xi, source, .. } => ProblemSpec::Elliptic { n, xi, source },
        }
    }

    /// The a priori rule matched to the smoothness of the exact solution.
    pub fn default_rule(&self) -> APrioriRule {
        match *self {
            ProblemSpec::Volterra { source: VolterraSource::ConstantOne, .. } => {
                APrioriRule::ThetaInverse(PsiSpec::Linear)
            }
            ProblemSpec::Volterra { source: VolterraSource::BenchmarkAw, .. } => {
                APrioriRule::PowerLaw { c: 1.0, theta: 0.5 }
            }
            ProblemSpec::Volterra { source: VolterraSource::Fractional { p }, .. } => {
                APrioriRule::PowerLaw { c: 1.0, theta: 1.0 / (p + 1.0) }
            }
            ProblemSpec::Elliptic { .. } => APrioriRule::PowerLaw { c: 0.1, theta: 0.5 },
        }
    }

    /// Predicted exponent of the error in `δ` under [`default_rule`](Self::default_rule).
    pub fn expected_exponent(&self) -> f64 {
        match *self {
            ProblemSpec::Volterra { source: VolterraSource::ConstantOne, .. } => 1.0 / 3.0,
            ProblemSpec::Volterra { source: VolterraSource::Fractional { p }, .. } => p / (p + 1.0),
            _ => 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProblemSpec::Volterra { n, source, .. } => {
                if n < 2 {
                    return Err(Error::Config("problem.n must be at least 2".into()));
                }
                if let VolterraSource::Fractional { p } = source {
                    if !(p > 0.0 && p < 1.0) {
                        return Err(Error::Config(format!("problem.p must lie in (0,1), got {p}")));
                    }
                }
            }
            ProblemSpec::Elliptic { n, source: EllipticSource::Sine { amplitude }, .. } => {
                if n < 3 {
                    return Err(Error::Config("problem.n must be at least 3".into()));
                }
                if !amplitude.is_finite() {
                    return Err(Error::Config("problem.amplitude must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Problem> {
        self.validate()?;
        match *self {
            ProblemSpec::Volterra { n, source, backend } => {
                let grid = Grid::new(n)?;
                match backend {
                    Backend::Structured => volterra_problem(VolterraOperator::new(grid), source),
                    Backend::Dense => volterra_problem(volterra(grid), source),
                }
            }
            ProblemSpec::Elliptic { n, xi, source: EllipticSource::Sine { amplitude } } => {
                let model = EllipticModel1D::new(n, xi)?;
                let grid = *model.grid();
                Ok(Problem {
                    xdag: DiscreteFunction::from_fn(grid, |t| amplitude * (PI * t).sin()),
                    xbar: DiscreteFunction::zeros(grid),
                    model: Box::new(model),
                })
            }
        }
    }
}

/// `w(t) = cos(πt) + 1`, the smooth generator of the source-wise elements.
pub fn smooth_generator(grid: Grid) -> DiscreteFunction {
    DiscreteFunction::from_fn(grid, |t| (PI * t).cos() + 1.0)
}

/// Quadrature used to build `A^p·w`.
pub fn source_dunford_spec(p: f64) -> Result<DunfordSpec> {
    Ok(DunfordSpec::new(p)?.with_range(-40.0, 40.0, 800))
}

fn volterra_problem<A>(op: A, source: VolterraSource) -> Result<Problem>
where
    A: LinearOperator + 'static,
{
    let grid = *op.grid();
    let xdag = match source {
        VolterraSource::ConstantOne => DiscreteFunction::constant(grid, 1.0),
        VolterraSource::BenchmarkAw => op.apply(&smooth_generator(grid))?,
        VolterraSource::Fractional { p } => {
            fractional_power_apply(&op, source_dunford_spec(p)?, &smooth_generator(grid))?.value
        }
    };
    Ok(Problem { xdag, xbar: DiscreteFunction::zeros(grid), model: Box::new(linear_forward(op)) })
}

/// A constructed forward model with its exact solution and reference element.
pub struct Problem {
    pub model: Box<dyn ForwardModel>,
    pub xdag: DiscreteFunction,
    pub xbar: DiscreteFunction,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem").field("grid", self.model.grid()).finish_non_exhaustive()
    }
}

/// Geometric sequence `δ₀·ratioᵏ`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaGrid {
    pub delta0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for DeltaGrid {
    fn default() -> Self {
        DeltaGrid { delta0: 1e-2, ratio: 10f64.powf(-0.5), count: 8 }
    }
}

impl DeltaGrid {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.delta0 * self.ratio.powi(k as i32)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta0 > 0.0) || !self.delta0.is_finite() {
            return Err(Error::Config(format!("noise.delta0 must be positive, got {}", self.delta0)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config(format!("noise.ratio must lie in (0,1), got {}", self.ratio)));
        }
        if self.count < 4 {
            return Err(Error::Config(format!("noise.count must be at least 4, got {}", self.count)));
        }
        Ok(())
    }
}

/// Lepskiĭ settings; the grid starts at `alpha0`, or at `δ` when unset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LepskiiSpec {
    pub beta: f64,
    pub q: f64,
    pub j_max: usize,
    pub alpha0: Option<f64>,
    pub alpha_max: f64,
}

impl Default for LepskiiSpec {
    fn default() -> Self {
        LepskiiSpec { beta: 0.0, q: 0.5, j_max: 60, alpha0: None, alpha_max: 1.0 }
    }
}

impl LepskiiSpec {
    pub fn rule(&self, delta: f64) -> LepskiiRule {
        LepskiiRule {
            beta: self.beta,
            q: self.q,
            alpha0: self.alpha0.unwrap_or(delta),
            j_max: self.j_max,
            alpha_max: self.alpha_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleSpec {
    APriori(APrioriRule),
    Discrepancy(DiscrepancyRule),
    Lepskii(LepskiiSpec),
}

impl RuleSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RuleSpec::APriori(_) => "apriori",
            RuleSpec::Discrepancy(_) => "discrepancy",
            RuleSpec::Lepskii(_) => "lepskii",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RuleSpec::APriori(APrioriRule::PowerLaw { c, theta }) => {
                if !(*c > 0.0) {
                    return Err(Error::Config("rule.c must be positive".into()));
                }
                if !(*theta > 0.0 && *theta < 1.0) {
                    return Err(Error::Config("rule.theta must lie in (0,1)".into()));
                }
                Ok(())
            }
            RuleSpec::APriori(APrioriRule::ThetaInverse(PsiSpec::Holder { mu })) => {
                PsiSpec::holder(*mu).map(|_| ()).map_err(|e| Error::Config(format!("rule.mu: {e}")))
            }
            RuleSpec::APriori(_) => Ok(()),
            RuleSpec::Discrepancy(r) => r.validate(),
            RuleSpec::Lepskii(s) => s.rule(1.0).validate(),
        }
    }
}

/// A complete rate-study description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub deltas: DeltaGrid,
    pub seeds: Vec<u64>,
    pub rule: RuleSpec,
    pub expected_exponent: Option<f64>,
    /// Allowed absolute deviation of the fitted slope.
    pub tolerance: f64,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
}

impl ExperimentConfig {
    /// Defaults: the default δ grid, seeds `0..5`, the problem's matched a
    /// priori rule and exponent, tolerance `0.08`.
    pub fn new(problem: ProblemSpec) -> Self {
        ExperimentConfig {
            problem,
            deltas: DeltaGrid::default(),
            seeds: (0..5).collect(),
            rule: RuleSpec::APriori(problem.default_rule()),
            expected_exponent: Some(problem.expected_exponent()),
            tolerance: 0.08,
            newton_tol: 1e-12,
            max_newton_iters: 50,
        }
    }

    pub fn with_rule(mut self, rule: RuleSpec) -> Self {
        self.rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.deltas.validate()?;
        self.rule.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("noise.seeds must not be empty".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("rule.tolerance must be positive".into()));
        }
        if !(self.newton_tol > 0.0) || self.max_newton_iters == 0 {
            return Err(Error::Config("solver tolerance and iteration budget must be positive".into()));
        }
        Ok(())
    }

    fn solver_config(&self) -> Result<LavrentievConfig> {
        Ok(LavrentievConfig {
            newton_tol: self.newton_tol,
            max_newton_iters: self.max_newton_iters,
            ..LavrentievConfig::new(1.0)?
        })
    }
}

/// Rule-specific record of how α was selected.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleAudit {
    APriori,
    /// Scan of `(α_k, discrepancy)` pairs ending at the selected `α`.
    Discrepancy { threshold: f64, trail: Vec<(f64, f64)> },
    Lepskii { index: usize, trail: Vec<LepskiiTest> },
}

/// One `(δ, seed)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub delta: f64,
    pub seed: u64,
    pub alpha: f64,
    /// `‖x_α^δ − x†‖`.
    pub error: f64,
    /// `‖F(x_α^δ) − yδ‖`.
    pub discrepancy: f64,
    /// `‖x_α^δ − x̄‖`.
    pub distance_to_reference: f64,
    /// Newton iterations summed over every solve in the cell.
    pub newton_iters: usize,
    pub estimates: BasicEstimateReport,
    pub audit: RuleAudit,
}

pub const RATE_HEADER: &str = "delta,seed,alpha,error,discrepancy,newton_iters";

fn rate_line(out: &mut String, row: &RateRow) {
    let _ = writeln!(
        out,
        "{:.16e},{},{:.16e},{:.16e},{:.16e},{}",
        row.delta, row.seed, row.alpha, row.error, row.discrepancy, row.newton_iters
    );
}

#[derive(Debug)]
pub struct RateReport {
    pub rule: RuleSpec,
    /// Sorted by `δ` descending, then seed ascending.
    pub rows: Vec<RateRow>,
    /// `(δ, median error over seeds)`, `δ` descending.
    pub medians: Vec<(f64, f64)>,
    /// Fit of `log(median error)` against `log δ`.
    pub fit: Option<SlopeFit>,
    pub expected_exponent: Option<f64>,
    pub tolerance: f64,
    /// The error that stopped the study early, if any.
    pub failure: Option<Error>,
}

impl RateReport {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    /// No failure, and the slope matches the expected exponent when one is set.
    pub fn pass(&self) -> bool {
        if self.failure.is_some() {
            return false;
        }
        match (self.expected_exponent, self.fit) {
            (Some(e), Some(fit)) => (fit.slope - e).abs() <= self.tolerance,
            (Some(_), None) => false,
            (None, _) => true,
        }
    }

    /// True when the median error strictly decreases along the δ grid.
    pub fn medians_decreasing(&self) -> bool {
        self.medians.windows(2).all(|w| w[1].1 < w[0].1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{RATE_HEADER}\n");
        for row in &self.rows {
            rate_line(&mut out, row);
        }
        if let Some(e) = &self.failure {
            let _ = writeln!(out, "# error: {e}");
        }
        out
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn medians_of(rows: &[RateRow]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let delta = rows[start].delta;
        let end = start + rows[start..].iter().take_while(|r| r.delta == delta).count();
        let mut errs: Vec<f64> = rows[start..end].iter().map(|r| r.error).collect();
        out.push((delta, median(&mut errs)));
        start = end;
    }
    out
}

#[derive(Clone, Copy)]
enum Selection<'a> {
    Rule(&'a RuleSpec),
    Alpha(f64),
}

fn run_cell(
    problem: &Problem,
    y: &DiscreteFunction,
    delta: f64,
    seed: u64,
    selection: Selection<'_>,
    cfg: &LavrentievConfig,
) -> Result<RateRow> {
    let f = problem.model.as_ref();
    let ydelta = add_noise(y, NoiseSpec::new(delta, seed)?)?;
    let (solution, audit, iters) = match selection {
        Selection::Alpha(alpha) => {
            let sol = solve_nonlinear(f, &problem.xbar, &ydelta, &cfg.with_alpha(alpha)?)?;
            let iters = sol.newton_iters;
            (sol, RuleAudit::APriori, iters)
        }
        Selection::Rule(RuleSpec::APriori(rule)) => {
            let alpha = apriori_alpha(delta, rule)?;
            let sol = solve_nonlinear(f, &problem.xbar, &ydelta, &cfg.with_alpha(alpha)?)?;
            let iters = sol.newton_iters;
            (sol, RuleAudit::APriori, iters)
        }
        Selection::Rule(RuleSpec::Discrepancy(rule)) => {
            let out = discrepancy_alpha(f, &problem.xbar, &ydelta, delta, rule, cfg)?;
            // Warm-started scans report only the final solve's iterations.
            let iters = out.solution.newton_iters;
            (out.solution, RuleAudit::Discrepancy { threshold: out.threshold, trail: out.trail }, iters)
        }
        Selection::Rule(RuleSpec::Lepskii(spec)) => {
            let out = lepskii_select(f, &problem.xbar, &ydelta, delta, &spec.rule(delta), cfg)?;
            let iters = out.solution.newton_iters;
            (out.solution, RuleAudit::Lepskii { index: out.index, trail: out.trail }, iters)
        }
    };
    let estimates = basic_estimate_check(f, &solution, &problem.xdag, &problem.xbar, delta)?;
    Ok(RateRow {
        delta,
        seed,
        alpha: solution.alpha,
        error: solution.x.distance(&problem.xdag)?,
        discrepancy: solution.discrepancy,
        distance_to_reference: solution.x.distance(&problem.xbar)?,
        newton_iters: iters,
        estimates,
        audit,
    })
}

fn run_cells(
    problem: &Problem,
    cfg: &ExperimentConfig,
    rule: RuleSpec,
    alpha_for: Option<&dyn Fn(usize) -> Option<f64>>,
) -> Result<RateReport> {
    let y = problem.model.apply(&problem.xdag)?;
    let solver = cfg.solver_config()?;
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut rows = Vec::new();
    let mut failure = None;
    'cells: for (k, delta) in cfg.deltas.values().into_iter().enumerate() {
        let selection = match alpha_for.map(|f| f(k)) {
            Some(Some(alpha)) => Selection::Alpha(alpha),
            Some(None) => continue,
            None => Selection::Rule(&rule),
        };
        for &seed in &seeds {
            match run_cell(problem, &y, delta, seed, selection, &solver) {
                Ok(row) => rows.push(row),
                Err(e) => {
                    failure = Some(e);
                    break 'cells;
                }
            }
        }
    }
    let medians = medians_of(&rows);
    let fit = if medians.len() >= 2 {
        let (ds, es): (Vec<f64>, Vec<f64>) = medians.iter().copied().unzip();
        fit_loglog_slope(&ds, &es).ok()
    } else {
        None
    };
    Ok(RateReport {
        rule,
        rows,
        medians,
        fit,
        expected_exponent: cfg.expected_exponent,
        tolerance: cfg.tolerance,
        failure,
    })
}

/// Runs every `(δ, seed)` cell with the configured rule and fits the slope
/// of the median errors. Solver failures stop the study and are recorded in
/// [`RateReport::failure`] together with the rows finished so far.
pub fn run_rate_study(cfg: &ExperimentConfig) -> Result<RateReport> {
    cfg.validate()?;
    let problem = cfg.problem.build()?;
    run_cells(&problem, cfg, cfg.rule, None)
}

/// The a priori, discrepancy and Lepskiĭ rules for a comparison, taking the
/// configured rule in place of the default of its kind.
pub fn comparison_rules(cfg: &ExperimentConfig) -> [RuleSpec; 3] {
    let mut rules = [
        RuleSpec::APriori(cfg.problem.default_rule()),
        RuleSpec::Discrepancy(DiscrepancyRule::default()),
        RuleSpec::Lepskii(LepskiiSpec::default()),
    ];
    let slot = match cfg.rule {
        RuleSpec::APriori(_) => 0,
        RuleSpec::Discrepancy(_) => 1,
        RuleSpec::Lepskii(_) => 2,
    };
    rules[slot] = cfg.rule;
    rules
}

#[derive(Debug)]
pub struct ComparisonReport {
    pub studies: Vec<RateReport>,
}

impl ComparisonReport {
    pub fn study(&self, name: &str) -> Option<&RateReport> {
        self.studies.iter().find(|s| s.rule.name() == name)
    }

    pub fn failure(&self) -> Option<&Error> {
        self.studies.iter().find_map(|s| s.failure.as_ref())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("rule,{RATE_HEADER}\n");
        for study in &self.studies {
            for row in &study.rows {
                out.push_str(study.rule.name());
                out.push(',');
                rate_line(&mut out, row);
            }
            if let Some(e) = &study.failure {
                let _ = writeln!(out, "# error ({}): {e}", study.rule.name());
            }
        }
        out
    }
}

/// Runs the same cells, with identical noisy data, under each rule.
pub fn run_rule_comparison(cfg: &ExperimentConfig, rules: &[RuleSpec]) -> Result<ComparisonReport> {
    cfg.validate()?;
    for rule in rules {
        rule.validate()?;
    }
    let problem = cfg.problem.build()?;
    let mut studies = Vec::with_capacity(rules.len());
    for rule in rules {
        let mut study = run_cells(&problem, cfg, *rule, None)?;
        if !matches!(rule, RuleSpec::APriori(_)) {
            study.expected_exponent = None;
        }
        studies.push(study);
    }
    Ok(ComparisonReport { studies })
}

/// Log-spaced radii `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for RadiusGrid {
    fn default() -> Self {
        RadiusGrid { min: 0.5, max: 200.0, count: 25 }
    }
}

impl RadiusGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let (lo, hi) = (self.min.ln(), self.max.ln());
        (0..self.count).map(|k| (lo + (hi - lo) * k as f64 / (self.count - 1) as f64).exp()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max > self.min && self.max.is_finite()) || self.count < 2 {
            return Err(Error::Config("distance radii need 0 < min < max and count >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DistanceConfig {
    pub radii: RadiusGrid,
    /// Grid size for the profile; the study's `n` when unset.
    pub profile_n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub delta: f64,
    pub alpha_pred: f64,
    pub err_pred: f64,
    /// Median observed error at `alpha_pred`; NaN when the prediction is out of range.
    pub err_obs: f64,
}

#[derive(Debug)]
pub struct DistanceStudy {
    pub profile: DistanceProfile,
    pub prediction: RatePrediction,
    /// Slope of the predicted errors over the in-range `δ`.
    pub predicted_slope: Option<f64>,
    /// Rate study run at the predicted `α` per `δ`.
    pub observed: RateReport,
    pub rows: Vec<DistanceRow>,
}

impl DistanceStudy {
    pub fn profile_csv(&self) -> String {
        let mut out = String::from("R,d,lambda\n");
        for ((r, d), l) in self.profile.radii.iter().zip(&self.profile.d).zip(&self.profile.lambda) {
            let _ = writeln!(out, "{r:.16e},{d:.16e},{l:.16e}");
        }
        out
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from("delta,alpha_pred,err_pred,err_obs\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                row.delta, row.alpha_pred, row.err_pred, row.err_obs
            );
        }
        if let Some(e) = &self.observed.failure {
            let _ = writeln!(out, "# error: {e}");
        }
        out
    }

    /// `err_obs / err_pred` over rows where both are available.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| r.err_obs.is_finite()).map(|r| r.err_obs / r.err_pred).collect()
    }
}

/// Profiles `x† − x̄`, predicts errors and `α` per `δ`, and compares with a
/// rate study run at the predicted `α`.
pub fn run_distance_study(cfg: &ExperimentConfig, dcfg: &DistanceConfig) -> Result<DistanceStudy> {
    cfg.validate()?;
    dcfg.radii.validate()?;
    if !matches!(cfg.problem, ProblemSpec::Volterra { .. }) {
        return Err(Error::Config("distance studies need a linear problem".into()));
    }
    let profile_spec = cfg.problem.with_n(dcfg.profile_n.unwrap_or(cfg.problem.n()));
    let profile_problem = profile_spec.build()?;
    let op = profile_problem.model.as_linear().expect("Volterra problems are linear");
    let element = profile_problem.xdag.try_sub(&profile_problem.xbar)?;
    let profile = distance_function(op, &element, &dcfg.radii.values())?;

    let deltas = cfg.deltas.values();
    let prediction = rate_from_distance(&profile, &deltas)?;
    let ok: Vec<&PredictedRate> =
        prediction.entries.iter().filter(|e| e.status == PredictionStatus::Ok).collect();
    let predicted_slope = if ok.len() >= 2 {
        let ds: Vec<f64> = ok.iter().map(|e| e.delta).collect();
        let es: Vec<f64> = ok.iter().map(|e| e.error).collect();
        fit_loglog_slope(&ds, &es).ok().map(|f| f.slope)
    } else {
        None
    };

    let problem = if profile_spec == cfg.problem { profile_problem } else { cfg.problem.build()? };
    let alphas: Vec<Option<f64>> = prediction
        .entries
        .iter()
        .map(|e| (e.status == PredictionStatus::Ok).then_some(e.alpha))
        .collect();
    let mut observed = run_cells(&problem, cfg, cfg.rule, Some(&|k| alphas[k]))?;
    observed.expected_exponent = predicted_slope;

    let rows = prediction
        .entries
        .iter()
        .map(|e| DistanceRow {
            delta: e.delta,
            alpha_pred: e.alpha,
            err_pred: e.error,
            err_obs: observed.medians.iter().find(|m| m.0 == e.delta).map_or(f64::NAN, |m| m.1),
        })
        .collect();
    Ok(DistanceStudy { profile, prediction, predicted_slope, observed, rows })
}

#[cfg(test)]
mod tests;
