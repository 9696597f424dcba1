//! Command-line front end.
//!
//! Every command prints JSON to stdout. The process exits with 0 on a
//! passing verdict, 2 on a failing one and 1 on an error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use super::scenario::{self, Scenario, BUILTIN_NAMES};
use super::{run_scenario, sweep_lambda, RunConfig, Verdict};
use crate::error::{Error, Result};
use crate::fixedpoint::{check_w0_membership, difference_vector, fit_rate};
use crate::geometry::Vector;
use crate::parallel::Execution;
use crate::regularity::{
    drlambda_averaging, estimate_epsilon_super_regular, estimate_kappa, estimate_kappa_prime,
    estimate_sigma, predicted_rate_lifted, verify_shift_subtransversality, with_growth_probe,
    Neighborhood, NeighborhoodSpec, Restriction, DEFAULT_RADIUS, DEFAULT_SAMPLES, DEFAULT_SEED,
};

#[derive(Debug, Parser)]
#[command(name = "drlab", version, about = "Relaxed Douglas-Rachford lab")]
pub struct Cli {
    /// Evaluate samples and start points on one thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Iterate from the scenario seeds (or one start point) and report.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        lambda: f64,
        /// Start point as comma-separated coordinates.
        #[arg(long)]
        x0: Option<String>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        /// Directory for trace.csv and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate a regularity constant around the scenario's reference point.
    Estimate {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_enum)]
        quantity: QuantityArg,
        #[arg(long, default_value_t = DEFAULT_RADIUS)]
        radius: f64,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Check one structural property.
    ///
    /// `monotonicity` compares the fixed sets at lambda/2 and lambda.
    Verify {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_enum)]
        check: CheckArg,
    },
    /// Run at several parameters and compare shadows of the fixed sets.
    Sweep {
        #[arg(long)]
        scenario: String,
        /// Comma-separated parameters.
        #[arg(long)]
        lambdas: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scenario catalog.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Debug, Subcommand)]
enum ScenarioAction {
    List,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum QuantityArg {
    Epsilon,
    Alpha,
    Kappa,
    KappaPrime,
    Sigma,
    Rate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CheckArg {
    Fixedpoint,
    W0,
    Monotonicity,
    ShiftSubtransversality,
}

fn parse_csv(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("cannot parse `{t}` as a number: {e}")))
        })
        .collect()
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn exit_for(verdict: Verdict) -> ExitCode {
    match verdict {
        Verdict::Fail => ExitCode::from(2),
        _ => ExitCode::SUCCESS,
    }
}

fn reference(scenario: &Scenario, lambda: f64) -> Result<super::scenario::ReferencePoint> {
    scenario
        .reference_point(lambda)?
        .ok_or_else(|| Error::Config(format!("scenario `{}` has no reference fixed point below lambda = 1", scenario.name)))
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn execute(cli: Cli) -> Result<ExitCode> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Run { scenario, lambda, x0, tol, max_iter, out } => {
            let scenario = scenario::load(&scenario)?;
            let starts = x0.map(|t| parse_csv(&t).and_then(Vector::try_new)).transpose()?.map(|x| vec![x]);
            let config = RunConfig { tol, max_iter, starts, exec, ..RunConfig::default() };
            let outcome = run_scenario(&scenario, lambda, &config)?;
            if let Some(dir) = out {
                outcome.write_artifacts(&dir)?;
            }
            print_json(&outcome.report)?;
            Ok(exit_for(outcome.report.verdict))
        }
        Command::Estimate { scenario, lambda, quantity, radius, samples, seed } => {
            let scenario = scenario::load(&scenario)?;
            estimate(&scenario, lambda, quantity, radius, samples, seed, exec)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { scenario, lambda, check } => {
            let scenario = scenario::load(&scenario)?;
            verify(&scenario, lambda, check, exec)
        }
        Command::Sweep { scenario, lambdas, out } => {
            let scenario = scenario::load(&scenario)?;
            let config = RunConfig { exec, ..RunConfig::default() };
            let report = sweep_lambda(&scenario, &parse_csv(&lambdas)?, &config)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
            }
            print_json(&report)?;
            Ok(exit_for(report.verdict))
        }
        Command::Scenario { action: ScenarioAction::List } => {
            let list: Vec<_> = BUILTIN_NAMES
                .iter()
                .map(|name| scenario::builtin(name).map(|s| json!({"name": s.name, "description": s.description})))
                .collect::<Result<_>>()?;
            print_json(&list)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn estimate(
    scenario: &Scenario,
    lambda: f64,
    quantity: QuantityArg,
    radius: f64,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<()> {
    let problem = scenario.problem(lambda)?;
    let reference = reference(scenario, lambda)?;
    let spec_at = |center: &Vector| -> Result<NeighborhoodSpec> {
        Ok(NeighborhoodSpec::new(Neighborhood::ball(center.clone(), radius)?)
            .with_samples(samples)
            .with_seed(seed))
    };
    let spec = spec_at(&reference.xbar)?;
    let fixed = [reference.xbar.clone()];
    match quantity {
        QuantityArg::Epsilon => {
            let f = problem.set_b().project(&reference.xbar)?.points.first()?.clone();
            let e = problem.set_a().project(&f)?.points.first()?.clone();
            let toward = |base: &Vector, target: &Vector| match (target - base).normalized() {
                Some(direction) => Restriction::Ray { origin: base.clone(), direction },
                None => Restriction::Whole,
            };
            let mirrored = &f.scaled(2.0) - &reference.xbar;
            let on_a = estimate_epsilon_super_regular(problem.set_a(), &toward(&e, &mirrored), &spec_at(&e)?, exec)?;
            let on_b = estimate_epsilon_super_regular(problem.set_b(), &toward(&f, &reference.xbar), &spec_at(&f)?, exec)?;
            print_json(&json!({"setA": on_a, "setB": on_b}))
        }
        QuantityArg::Alpha => print_json(&drlambda_averaging(&problem, &reference.xbar, 0.5, &spec, exec)?),
        QuantityArg::Kappa => print_json(&with_growth_probe(&spec, |s| {
            estimate_kappa(&problem, &reference.gap, &fixed, s, exec)
        })?),
        QuantityArg::KappaPrime => {
            let intersection = scenario
                .intersection
                .as_ref()
                .ok_or_else(|| Error::Config("scenario has no known intersection".into()))?;
            let sets = [scenario.set_a.clone(), scenario.set_b.clone()];
            print_json(&estimate_kappa_prime(&sets, intersection, &spec, exec)?)
        }
        QuantityArg::Sigma => print_json(&estimate_sigma(&problem, &reference.gap, &spec, exec)?),
        QuantityArg::Rate => {
            let kappa = estimate_kappa(&problem, &reference.gap, &fixed, &spec, exec)?;
            let sigma = estimate_sigma(&problem, &reference.gap, &spec, exec)?;
            let predicted = predicted_rate_lifted(0.0, kappa.estimate, sigma.estimate)?;
            let start = reference.xbar.add_scaled(1.0, &Vector::from(vec![radius / 2.0; reference.xbar.dim()]));
            let trace = crate::fixedpoint::iterate(&problem, &start, &Default::default())?;
            let observed = fit_rate(&trace.residuals).ok();
            print_json(&json!({"kappa": kappa, "sigma": sigma, "predicted": predicted, "observed": observed}))
        }
    }
}

fn verify(scenario: &Scenario, lambda: f64, check: CheckArg, exec: Execution) -> Result<ExitCode> {
    let problem = scenario.problem(lambda)?;
    match check {
        CheckArg::Fixedpoint => {
            let config = RunConfig { exec, estimate_regularity: false, ..RunConfig::default() };
            let outcome = run_scenario(scenario, lambda, &config)?;
            let certificates: Vec<_> = outcome.report.runs.iter().filter_map(|r| r.certificate.clone()).collect();
            let pass = !certificates.is_empty()
                && certificates.len()
                    == outcome.report.runs.iter().filter(|r| r.status == crate::fixedpoint::TraceStatus::Converged).count()
                && certificates.iter().all(|c| c.tight && c.reconstruction_residual <= 10.0 * config.tol);
            print_json(&json!({"check": "fixedpoint", "pass": pass, "certificates": certificates}))?;
            Ok(exit_for(if pass { Verdict::Pass } else { Verdict::Fail }))
        }
        CheckArg::W0 => {
            let reference = reference(scenario, lambda)?;
            let zeta = difference_vector(&reference.gap, lambda)?;
            let lifted = zeta.lift(&reference.xbar);
            let result = check_w0_membership(&problem, &reference.gap, &lifted, 1e-10)?;
            print_json(&json!({"check": "w0", "state": lifted, "result": result}))?;
            Ok(exit_for(if result.member { Verdict::Pass } else { Verdict::Fail }))
        }
        CheckArg::Monotonicity => {
            let config = RunConfig { exec, estimate_regularity: false, ..RunConfig::default() };
            let report = sweep_lambda(scenario, &[lambda / 2.0, lambda], &config)?;
            let pass = report.monotonicity.iter().all(|m| m.holds);
            print_json(&json!({"check": "monotonicity", "pass": pass, "sweep": report}))?;
            Ok(exit_for(if pass { Verdict::Pass } else { Verdict::Fail }))
        }
        CheckArg::ShiftSubtransversality => {
            let reference = reference(scenario, lambda)?;
            let spec = NeighborhoodSpec::new(Neighborhood::ball(reference.xbar.clone(), DEFAULT_RADIUS)?);
            let result = verify_shift_subtransversality(
                &problem,
                &reference.gap,
                std::slice::from_ref(&reference.xbar),
                None,
                0.05,
                &spec,
                exec,
            )?;
            print_json(&json!({"check": "shift-subtransversality", "result": result}))?;
            Ok(exit_for(if result.pass { Verdict::Pass } else { Verdict::Fail }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_spec_commands() {
        Cli::try_parse_from(["drlab", "run", "--scenario", "separable-circles", "--lambda", "0.5", "--x0", "1.2,0.3"])
            .unwrap();
        Cli::try_parse_from([
            "drlab", "estimate", "--scenario", "s", "--lambda", "0.5", "--quantity", "kappa-prime", "--samples", "10",
        ])
        .unwrap();
        Cli::try_parse_from(["drlab", "verify", "--scenario", "s", "--lambda", "0.5", "--check", "shift-subtransversality"])
            .unwrap();
        Cli::try_parse_from(["drlab", "sweep", "--scenario", "s", "--lambdas", "0.25,0.75"]).unwrap();
        Cli::try_parse_from(["drlab", "scenario", "list"]).unwrap();
        assert!(Cli::try_parse_from(["drlab", "estimate", "--scenario", "s", "--lambda", "0.5", "--quantity", "nope"]).is_err());
    }

    #[test]
    fn csv_numbers() {
        assert_eq!(parse_csv("0.25, 0.75").unwrap(), vec![0.25, 0.75]);
        assert!(parse_csv("a,1").is_err());
    }
}
