mod config;

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lavrentiev::acceptance::Suite;
use lavrentiev::experiments::{comparison_rules, run_distance_study, run_rate_study, run_rule_comparison, ProblemSpec};
use lavrentiev::operators::{fractional_power_apply, riemann_liouville, DunfordSpec, VolterraOperator};
use lavrentiev::source::{vsc_verify, RadialSampler, VscVariant};
use lavrentiev::{DiscreteFunction, Error, Grid};

use config::{Overrides, Settings};

#[derive(Debug, Parser)]
#[command(name = "lavrentiev", version, about = "Lavrentiev regularization studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Grid size, overriding `problem.n`.
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Single noise seed, overriding `noise.seeds` and `vsc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Largest noise level, overriding `noise.delta0`.
    #[arg(long, global = true)]
    delta0: Option<f64>,

    /// Output CSV path, overriding `output.path`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print per-δ medians and other details.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convergence-rate study with the configured rule.
    Rates,
    /// A priori, discrepancy and Lepskii rules on identical data.
    Rules,
    /// Distance function, predicted rates and observed errors.
    Distance,
    /// Empirical check of the variational source condition.
    Vsc,
    /// Dunford quadrature of `A^p v` against the Riemann–Liouville oracle.
    Fracpow,
    /// Runs the acceptance suite.
    Selftest,
}

/// Process outcome, mapped to the exit code.
enum Outcome {
    Pass,
    Fail,
}

fn exit_code_for(e: &Error) -> u8 {
    if e.is_solver_failure() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn settings(cli: &Cli) -> Result<Settings, Error> {
    let ov = Overrides { n: cli.n, seed: cli.seed, delta0: cli.delta0, out: cli.out.clone() };
    match &cli.config {
        Some(path) => config::parse_config(path, &ov),
        None => config::defaults(&ov),
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn verdict(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    if let Command::Selftest = cli.command {
        return Ok(selftest());
    }
    let s = settings(cli)?;
    let out = s.output.as_deref();
    match cli.command {
        Command::Rates => {
            let report = run_rate_study(&s.experiment)?;
            emit(out, &report.to_csv())?;
            if cli.verbose {
                for (d, e) in &report.medians {
                    eprintln!("delta {d:.3e}: median error {e:.6e}");
                }
            }
            eprintln!(
                "{} / {}: slope {} (expected {}, tolerance {})",
                describe(&s.experiment.problem),
                s.experiment.rule.name(),
                fmt_opt(report.slope()),
                fmt_opt(report.expected_exponent),
                report.tolerance
            );
            if let Some(e) = report.failure {
                return Err(e);
            }
            Ok(verdict(report.pass()))
        }
        Command::Rules => {
            let rules = comparison_rules(&s.experiment);
            let report = run_rule_comparison(&s.experiment, &rules)?;
            emit(out, &report.to_csv())?;
            for study in &report.studies {
                eprintln!("{:<12} slope {}", study.rule.name(), fmt_opt(study.slope()));
                if cli.verbose {
                    for (d, e) in &study.medians {
                        eprintln!("  delta {d:.3e}: median error {e:.6e}");
                    }
                }
            }
            let pass = report.studies.iter().all(|s| s.pass());
            if let Some(e) = report.studies.into_iter().find_map(|s| s.failure) {
                return Err(e);
            }
            Ok(verdict(pass))
        }
        Command::Distance => {
            let study = run_distance_study(&s.experiment, &s.distance)?;
            match out {
                Some(p) => {
                    emit(Some(p), &study.table_csv())?;
                    emit(Some(&sibling(p, "profile")), &study.profile_csv())?;
                }
                None => emit(None, &format!("{}\n{}", study.profile_csv(), study.table_csv()))?,
            }
            let ratios = study.ratios();
            let in_band = ratios.iter().all(|r| (0.2..=5.0).contains(r));
            eprintln!(
                "profile collapses: {}; predicted slope {}; observed/predicted in [{}, {}]",
                study.profile.collapses(),
                fmt_opt(study.predicted_slope),
                fmt_opt(ratios.iter().copied().reduce(f64::min)),
                fmt_opt(ratios.iter().copied().reduce(f64::max))
            );
            if cli.verbose {
                for (r, d) in study.profile.radii.iter().zip(&study.profile.d) {
                    eprintln!("R {r:.4e}: d {d:.6e}");
                }
            }
            if let Some(e) = study.observed.failure {
                return Err(e);
            }
            Ok(verdict(in_band && !ratios.is_empty()))
        }
        Command::Vsc => {
            let problem = s.experiment.problem.build()?;
            let v = s.vsc;
            let sampler =
                RadialSampler { count: v.samples, radius_min: v.radius_min, radius_max: v.radius_max, seed: v.seed };
            let report = vsc_verify(
                problem.model.as_ref(),
                &problem.xdag,
                &problem.xbar,
                VscVariant::Lavrentiev { mu: v.mu },
                v.beta,
                &sampler,
            )?;
            let mut csv = String::from("numerator,g\n");
            for sample in &report.samples {
                csv.push_str(&format!("{:.16e},{:.16e}\n", sample.numerator, sample.g));
            }
            emit(out, &csv)?;
            eprintln!(
                "mu {} beta {}: fitted coefficient {:.12e}, {} violations over {} samples",
                report.mu, report.beta, report.fitted_coefficient, report.violations, report.sample_count
            );
            Ok(verdict(report.violations == 0))
        }
        Command::Fracpow => {
            let n = s.experiment.problem.n();
            if !matches!(s.experiment.problem, ProblemSpec::Volterra { .. }) {
                return Err(Error::Config("fracpow needs a Volterra problem".into()));
            }
            let grid = Grid::new(n)?;
            let v = DiscreteFunction::from_fn(grid, |t| (PI * t).sin());
            let dunford = fractional_power_apply(&VolterraOperator::new(grid), DunfordSpec::new(s.p)?, &v)?;
            let oracle = riemann_liouville(&grid, s.p, &v)?;
            let rel = dunford.value.distance(&oracle)? / oracle.norm();
            let mut csv = String::from("t,dunford,riemann_liouville\n");
            for i in 0..n {
                csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", grid.node(i), dunford.value[i], oracle[i]));
            }
            emit(out, &csv)?;
            if let Some(w) = &dunford.warning {
                eprintln!("warning: {w}");
            }
            eprintln!("p {}: relative L2 difference {rel:.3e}, tail estimate {:.3e}", s.p, dunford.tail_estimate);
            Ok(verdict(rel <= 1e-4 && dunford.warning.is_none()))
        }
        Command::Selftest => unreachable!(),
    }
}

fn selftest() -> Outcome {
    let results = Suite::new().run_all();
    for r in &results {
        println!("{r}");
    }
    let passed = results.iter().filter(|r| r.passed).count();
    eprintln!("{passed}/{} criteria passed", results.len());
    verdict(passed == results.len())
}

fn describe(p: &ProblemSpec) -> String {
    match p {
        ProblemSpec::Volterra { n, source, .. } => format!("volterra {source} (n = {n})"),
        ProblemSpec::Elliptic { n, xi, .. } => format!("elliptic {xi} (n = {n})"),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}
