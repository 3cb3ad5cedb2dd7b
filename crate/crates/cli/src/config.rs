//! TOML configuration for the command-line studies.

use std::path::{Path, PathBuf};

use lavrentiev::experiments::{
    Backend, DeltaGrid, DistanceConfig, EllipticSource, ExperimentConfig, LepskiiSpec, ProblemSpec, RadiusGrid,
    RuleSpec, VolterraSource,
};
use lavrentiev::forward::XiKind;
use lavrentiev::rules::{APrioriRule, DiscrepancyRule, PsiSpec};
use lavrentiev::Error;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub problem: ProblemTable,
    #[serde(default)]
    pub noise: NoiseTable,
    #[serde(default)]
    pub rule: RuleTable,
    #[serde(default)]
    pub solver: SolverTable,
    #[serde(default)]
    pub output: OutputTable,
    #[serde(default)]
    pub distance: DistanceTable,
    #[serde(default)]
    pub vsc: VscTable,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemTable {
    pub kind: Option<String>,
    pub source: Option<String>,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub backend: Option<String>,
    pub xi: Option<String>,
    pub amplitude: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseTable {
    pub delta0: Option<f64>,
    pub ratio: Option<f64>,
    pub count: Option<usize>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleTable {
    pub kind: Option<String>,
    pub form: Option<String>,
    pub c: Option<f64>,
    pub theta: Option<f64>,
    pub psi: Option<String>,
    pub mu: Option<f64>,
    pub tau: Option<f64>,
    pub kappa: Option<f64>,
    pub q: Option<f64>,
    pub alpha0: Option<f64>,
    pub max_steps: Option<usize>,
    pub beta: Option<f64>,
    pub j_max: Option<usize>,
    pub alpha_max: Option<f64>,
    pub expected_exponent: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverTable {
    pub newton_tol: Option<f64>,
    pub max_newton_iters: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputTable {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceTable {
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub r_count: Option<usize>,
    pub profile_n: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VscTable {
    pub samples: Option<usize>,
    pub mu: Option<f64>,
    pub beta: Option<f64>,
    pub radius_min: Option<f64>,
    pub radius_max: Option<f64>,
    pub seed: Option<u64>,
}

/// Settings for the `vsc` subcommand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VscSettings {
    pub samples: usize,
    pub mu: f64,
    pub beta: f64,
    pub radius_min: f64,
    pub radius_max: f64,
    pub seed: u64,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub delta0: Option<f64>,
    pub out: Option<PathBuf>,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Settings {
    pub experiment: ExperimentConfig,
    pub distance: DistanceConfig,
    pub vsc: VscSettings,
    pub output: Option<PathBuf>,
    /// `problem.p`, used by `fracpow` for every problem kind.
    pub p: f64,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<Settings, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    parse_str(&text, overrides)
}

pub fn parse_str(text: &str, overrides: &Overrides) -> Result<Settings, Error> {
    let file: FileConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
    build(file, overrides)
}

fn reject(table: &str, kind: &str, keys: &[(&str, bool)]) -> Result<(), Error> {
    match keys.iter().find(|(_, present)| *present) {
        Some((key, _)) => Err(config_err(format!("{table}.{key} does not apply to {table}.kind = \"{kind}\""))),
        None => Ok(()),
    }
}

fn problem_spec(t: &ProblemTable, n_override: Option<usize>) -> Result<ProblemSpec, Error> {
    let kind = t.kind.as_deref().unwrap_or("volterra");
    let spec = match kind {
        "volterra" => {
            reject("problem", kind, &[("xi", t.xi.is_some()), ("amplitude", t.amplitude.is_some())])?;
            let source = match t.source.as_deref().unwrap_or("constant_one") {
                "constant_one" => VolterraSource::ConstantOne,
                "benchmark_aw" => VolterraSource::BenchmarkAw,
                "fractional" => VolterraSource::Fractional {
                    p: t.p.ok_or_else(|| config_err("problem.p is required for source = \"fractional\""))?,
                },
                other => return Err(config_err(format!("problem.source: unknown Volterra source \"{other}\""))),
            };
            let backend = match t.backend.as_deref().unwrap_or("structured") {
                "structured" => Backend::Structured,
                "dense" => Backend::Dense,
                other => return Err(config_err(format!("problem.backend: unknown backend \"{other}\""))),
            };
            ProblemSpec::Volterra { n: t.n.unwrap_or(65536), source, backend }
        }
        "elliptic" => {
            reject("problem", kind, &[("backend", t.backend.is_some())])?;
            match t.source.as_deref().unwrap_or("sine") {
                "sine" => {}
                other => return Err(config_err(format!("problem.source: unknown elliptic source \"{other}\""))),
            }
            let xi = match t.xi.as_deref().unwrap_or("cubic") {
                "linear" => XiKind::Linear,
                "cubic" => XiKind::Cubic,
                "arctan" => XiKind::Arctan,
                other => return Err(config_err(format!("problem.xi: unknown nonlinearity \"{other}\""))),
            };
            ProblemSpec::Elliptic {
                n: t.n.unwrap_or(200),
                xi,
                source: EllipticSource::Sine { amplitude: t.amplitude.unwrap_or(10.0) },
            }
        }
        other => return Err(config_err(format!("problem.kind: unknown kind \"{other}\""))),
    };
    let spec = match n_override {
        Some(n) => spec.with_n(n),
        None => spec,
    };
    spec.validate()?;
    Ok(spec)
}

/// Returns the rule and whether it is the problem's matched default.
fn rule_spec(t: &RuleTable, problem: &ProblemSpec) -> Result<(RuleSpec, bool), Error> {
    let kind = t.kind.as_deref().unwrap_or("apriori");
    let discrepancy_keys = [("tau", t.tau.is_some()), ("kappa", t.kappa.is_some()), ("max_steps", t.max_steps.is_some())];
    let lepskii_keys = [("beta", t.beta.is_some()), ("j_max", t.j_max.is_some()), ("alpha_max", t.alpha_max.is_some())];
    let apriori_keys = [
        ("form", t.form.is_some()),
        ("c", t.c.is_some()),
        ("theta", t.theta.is_some()),
        ("psi", t.psi.is_some()),
        ("mu", t.mu.is_some()),
    ];
    let spec = match kind {
        "apriori" => {
            reject("rule", kind, &discrepancy_keys)?;
            reject("rule", kind, &lepskii_keys)?;
            reject("rule", kind, &[("q", t.q.is_some()), ("alpha0", t.alpha0.is_some())])?;
            let rule = match t.form.as_deref() {
                None if t.c.is_none() && t.theta.is_none() && t.psi.is_none() && t.mu.is_none() => {
                    return Ok((RuleSpec::APriori(problem.default_rule()), true));
                }
                None | Some("power_law") => {
                    reject("rule", "apriori\" with form = \"power_law", &[("psi", t.psi.is_some()), ("mu", t.mu.is_some())])?;
                    APrioriRule::PowerLaw {
                        c: t.c.unwrap_or(1.0),
                        theta: t.theta.ok_or_else(|| config_err("rule.theta is required for a power law"))?,
                    }
                }
                Some("theta_inverse") => {
                    reject("rule", "apriori\" with form = \"theta_inverse", &[("c", t.c.is_some()), ("theta", t.theta.is_some())])?;
                    let psi = match t.psi.as_deref().unwrap_or("linear") {
                        "linear" => PsiSpec::Linear,
                        "logarithmic" => PsiSpec::Logarithmic,
                        "holder" => PsiSpec::Holder {
                            mu: t.mu.ok_or_else(|| config_err("rule.mu is required for psi = \"holder\""))?,
                        },
                        other => return Err(config_err(format!("rule.psi: unknown index function \"{other}\""))),
                    };
                    APrioriRule::ThetaInverse(psi)
                }
                Some(other) => return Err(config_err(format!("rule.form: unknown a priori form \"{other}\""))),
            };
            RuleSpec::APriori(rule)
        }
        "discrepancy" => {
            reject("rule", kind, &apriori_keys)?;
            reject("rule", kind, &lepskii_keys)?;
            let d = DiscrepancyRule::default();
            RuleSpec::Discrepancy(DiscrepancyRule {
                tau: t.tau.unwrap_or(d.tau),
                kappa: t.kappa.unwrap_or(d.kappa),
                q: t.q.unwrap_or(d.q),
                alpha0: t.alpha0.unwrap_or(d.alpha0),
                max_steps: t.max_steps.unwrap_or(d.max_steps),
            })
        }
        "lepskii" => {
            reject("rule", kind, &apriori_keys)?;
            reject("rule", kind, &discrepancy_keys)?;
            let d = LepskiiSpec::default();
            RuleSpec::Lepskii(LepskiiSpec {
                beta: t.beta.unwrap_or(d.beta),
                q: t.q.unwrap_or(d.q),
                j_max: t.j_max.unwrap_or(d.j_max),
                alpha0: t.alpha0.or(d.alpha0),
                alpha_max: t.alpha_max.unwrap_or(d.alpha_max),
            })
        }
        other => return Err(config_err(format!("rule.kind: unknown rule \"{other}\""))),
    };
    spec.validate()?;
    Ok((spec, false))
}

fn build(file: FileConfig, ov: &Overrides) -> Result<Settings, Error> {
    let problem = problem_spec(&file.problem, ov.n)?;
    let (rule, matched) = rule_spec(&file.rule, &problem)?;

    let mut experiment = ExperimentConfig::new(problem).with_rule(rule);
    let defaults = DeltaGrid::default();
    experiment.deltas = DeltaGrid {
        delta0: ov.delta0.or(file.noise.delta0).unwrap_or(defaults.delta0),
        ratio: file.noise.ratio.unwrap_or(defaults.ratio),
        count: file.noise.count.unwrap_or(defaults.count),
    };
    if let Some(seeds) = file.noise.seeds {
        experiment.seeds = seeds;
    }
    if let Some(seed) = ov.seed {
        experiment.seeds = vec![seed];
    }
    experiment.expected_exponent = match file.rule.expected_exponent {
        Some(e) => Some(e),
        None if matched => Some(problem.expected_exponent()),
        None => None,
    };
    if let Some(t) = file.rule.tolerance {
        experiment.tolerance = t;
    }
    if let Some(t) = file.solver.newton_tol {
        experiment.newton_tol = t;
    }
    if let Some(m) = file.solver.max_newton_iters {
        experiment.max_newton_iters = m;
    }
    experiment.validate()?;

    let radii = RadiusGrid::default();
    let distance = DistanceConfig {
        radii: RadiusGrid {
            min: file.distance.r_min.unwrap_or(radii.min),
            max: file.distance.r_max.unwrap_or(radii.max),
            count: file.distance.r_count.unwrap_or(radii.count),
        },
        profile_n: file.distance.profile_n,
    };
    distance.radii.validate()?;

    let vsc = VscSettings {
        samples: file.vsc.samples.unwrap_or(10_000),
        mu: file.vsc.mu.unwrap_or(0.5),
        beta: file.vsc.beta.unwrap_or(0.0),
        radius_min: file.vsc.radius_min.unwrap_or(1e-4),
        radius_max: file.vsc.radius_max.unwrap_or(10.0),
        seed: ov.seed.or(file.vsc.seed).unwrap_or(0),
    };
    if vsc.samples == 0 || !(vsc.radius_min > 0.0 && vsc.radius_max > vsc.radius_min) {
        return Err(config_err("vsc needs samples > 0 and 0 < radius_min < radius_max"));
    }

    let p = file.problem.p.unwrap_or(0.5);
    if !(p > 0.0 && p < 1.0) {
        return Err(config_err(format!("problem.p must lie in (0,1), got {p}")));
    }
    Ok(Settings { experiment, distance, vsc, output: ov.out.clone().or(file.output.path), p })
}

/// Settings used when no config file is given.
pub fn defaults(overrides: &Overrides) -> Result<Settings, Error> {
    build(FileConfig::default(), overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Settings, Error> {
        parse_str(text, &Overrides::default())
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let s = parse("[problem]\nkind = \"volterra\"\nsource = \"constant_one\"\n").unwrap();
        let e = &s.experiment;
        assert_eq!(e.problem, ProblemSpec::volterra(65536, VolterraSource::ConstantOne));
        assert_eq!(e.rule, RuleSpec::APriori(APrioriRule::ThetaInverse(PsiSpec::Linear)));
        assert_eq!(e.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(e.deltas, DeltaGrid::default());
        assert!((e.expected_exponent.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.tolerance, 0.08);
        assert!(s.output.is_none());
    }

    #[test]
    fn tau_below_one_is_rejected() {
        let err = parse("[rule]\nkind = \"discrepancy\"\ntau = 0.9\n").unwrap_err();
        assert!(err.to_string().contains("tau must exceed 1"), "{err}");
    }

    #[test]
    fn duplicate_key_is_a_parse_error() {
        let err = parse("[problem]\nn = 10\nn = 20\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(parse("[problem]\nsize = 10\n").is_err());
        assert!(parse("[extra]\na = 1\n").is_err());
        let err = parse("[rule]\nkind = \"apriori\"\ntau = 2.0\n").unwrap_err();
        assert!(err.to_string().contains("rule.tau"), "{err}");
    }

    #[test]
    fn overrides_take_precedence() {
        let ov = Overrides { n: Some(128), seed: Some(9), delta0: Some(1e-3), out: Some("x.csv".into()) };
        let s = parse_str("[noise]\ndelta0 = 1e-2\nseeds = [1, 2]\n[output]\npath = \"y.csv\"\n", &ov).unwrap();
        assert_eq!(s.experiment.problem.n(), 128);
        assert_eq!(s.experiment.seeds, vec![9]);
        assert_eq!(s.experiment.deltas.delta0, 1e-3);
        assert_eq!(s.output, Some(PathBuf::from("x.csv")));
    }

    #[test]
    fn explicit_rules_parse() {
        let s = parse("[problem]\nsource = \"fractional\"\np = 0.25\n[rule]\nform = \"power_law\"\ntheta = 0.8\n").unwrap();
        assert_eq!(s.experiment.rule, RuleSpec::APriori(APrioriRule::PowerLaw { c: 1.0, theta: 0.8 }));
        assert_eq!(s.experiment.expected_exponent, None);
        let s = parse("[rule]\nform = \"theta_inverse\"\npsi = \"holder\"\nmu = 0.25\nexpected_exponent = 0.1428\n").unwrap();
        assert_eq!(s.experiment.rule, RuleSpec::APriori(APrioriRule::ThetaInverse(PsiSpec::Holder { mu: 0.25 })));
        assert_eq!(s.experiment.expected_exponent, Some(0.1428));
        let s = parse("[rule]\nkind = \"lepskii\"\nbeta = 0.2\n").unwrap();
        assert_eq!(s.experiment.rule, RuleSpec::Lepskii(LepskiiSpec { beta: 0.2, ..LepskiiSpec::default() }));
        assert!(parse("[rule]\nkind = \"lepskii\"\nbeta = 1.0\n").is_err());
        assert!(parse("[rule]\nform = \"theta_inverse\"\npsi = \"holder\"\nmu = 0.75\n").is_err());
    }

    #[test]
    fn elliptic_problem() {
        let s = parse("[problem]\nkind = \"elliptic\"\nxi = \"arctan\"\namplitude = 2.0\n").unwrap();
        assert_eq!(
            s.experiment.problem,
            ProblemSpec::Elliptic { n: 200, xi: XiKind::Arctan, source: EllipticSource::Sine { amplitude: 2.0 } }
        );
        assert!(parse("[problem]\nkind = \"elliptic\"\nbackend = \"dense\"\n").is_err());
        assert!(parse("[problem]\nsource = \"fractional\"\n").is_err());
    }
}
