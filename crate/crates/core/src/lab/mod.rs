//! Scenario runs, parameter sweeps and their reports.

pub mod cli;
pub mod scenario;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{
    characterize_fixed_point, check_monotonicity, fit_rate, iterate, FixedPointCertificate,
    IterateOptions, IterationTrace, MonotonicityCheck, RateFit, TraceStatus,
};
use crate::geometry::{SetDescriptor, Vector};
use crate::parallel::{map_items, Execution};
use crate::regularity::{
    estimate_kappa, estimate_kappa_prime, estimate_sigma, kappa_from_kappa_prime,
    predicted_rate_convex_consistent, predicted_rate_lifted, Neighborhood, NeighborhoodSpec,
    PredictedRate, RegularityReport, DEFAULT_RADIUS, DEFAULT_SAMPLES, DEFAULT_SEED,
};
pub use scenario::{KnownFixedSet, Scenario};

/// Slack allowed between an observed rate and a predicted one.
pub const RATE_SLACK: f64 = 0.02;
/// Endpoints closer than this are treated as one fixed point.
pub const CLUSTER_TOL: f64 = 1e-6;

/// Settings for [`run_scenario`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Start points; the scenario seeds when `None`.
    pub starts: Option<Vec<Vector>>,
    pub estimate_regularity: bool,
    pub samples: usize,
    pub seed: u64,
    pub radius: f64,
    pub exec: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            starts: None,
            estimate_regularity: true,
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            radius: DEFAULT_RADIUS,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Recorded for information only.
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self { name: name.into(), verdict: if pass { Verdict::Pass } else { Verdict::Fail }, detail }
    }

    fn info(name: &str, detail: String) -> Self {
        Self { name: name.into(), verdict: Verdict::Info, detail }
    }
}

fn overall(checks: &[Check]) -> Verdict {
    if checks.iter().any(|c| c.verdict == Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Pass
    }
}

/// Summary of one multistart run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary {
    pub start: Vector,
    pub status: TraceStatus,
    pub steps: usize,
    pub final_point: Vector,
    pub final_residual: Option<f64>,
    pub rate: Option<RateFit>,
    pub certificate: Option<FixedPointCertificate>,
    /// Distance from the endpoint to the fixed points known in closed form.
    pub distance_to_known: Option<f64>,
}

/// Regularity estimates around the reference fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegularitySummary {
    pub kappa: Option<RegularityReport>,
    pub sigma: Option<RegularityReport>,
    pub kappa_prime: Option<RegularityReport>,
    pub predicted: Option<PredictedRate>,
    /// Which constants the prediction uses.
    pub predicted_from: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub scenario: String,
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub runs: Vec<RunSummary>,
    pub regularity: Option<RegularitySummary>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
}

/// A report together with the traces it summarises.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub traces: Vec<IterationTrace>,
}

impl RunOutcome {
    /// Writes `report.json`, `trace.csv` for the first start and
    /// `traces/run_<i>.csv` for every start.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("traces"))?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&self.report)?)?;
        if let Some(first) = self.traces.first() {
            first.save_csv(&dir.join("trace.csv"))?;
        }
        for (i, trace) in self.traces.iter().enumerate() {
            trace.save_csv(&dir.join("traces").join(format!("run_{i}.csv")))?;
        }
        Ok(())
    }
}

/// Iterates from every start, certifies the endpoints and checks them
/// against what the scenario predicts.
pub fn run_scenario(scenario: &Scenario, lambda: f64, config: &RunConfig) -> Result<RunOutcome> {
    scenario.validate()?;
    let problem = scenario.problem(lambda)?;
    let known = scenario.known_fixed_set(lambda)?;
    let starts = config.starts.clone().unwrap_or_else(|| scenario.seeds.clone());
    if starts.is_empty() {
        return Err(Error::Config("no start points".into()));
    }
    let mut opts = IterateOptions::default().with_tol(config.tol).with_max_iter(config.max_iter);
    if let KnownFixedSet::Points { set, .. } = &known {
        opts = opts.with_reference(set.clone());
    }
    let traces = map_items(config.exec, &starts, |x0| iterate(&problem, x0, &opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let cert_tol = 10.0 * config.tol;
    let mut runs = Vec::with_capacity(traces.len());
    for (start, trace) in starts.iter().zip(&traces) {
        let certificate = if trace.status == TraceStatus::Converged && lambda < 1.0 {
            match characterize_fixed_point(&problem, trace.last(), cert_tol) {
                Ok(c) => Some(c),
                Err(Error::NotAFixedPoint { .. } | Error::DegenerateProjection) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        runs.push(RunSummary {
            start: start.clone(),
            status: trace.status,
            steps: trace.steps(),
            final_point: trace.last().clone(),
            final_residual: trace.final_residual(),
            rate: fit_rate(&trace.residuals).ok(),
            certificate,
            distance_to_known: trace.reference_distances.as_ref().and_then(|d| d.last().copied()),
        });
    }

    let regularity = if config.estimate_regularity {
        regularity_summary(scenario, lambda, config)?
    } else {
        None
    };
    let checks = run_checks(scenario, lambda, config, &known, &runs, regularity.as_ref());
    let report = RunReport {
        scenario: scenario.name.clone(),
        lambda,
        tol: config.tol,
        max_iter: config.max_iter,
        verdict: overall(&checks),
        runs,
        regularity,
        checks,
    };
    Ok(RunOutcome { report, traces })
}

fn run_checks(
    scenario: &Scenario,
    lambda: f64,
    config: &RunConfig,
    known: &KnownFixedSet,
    runs: &[RunSummary],
    regularity: Option<&RegularitySummary>,
) -> Vec<Check> {
    let converged: Vec<&RunSummary> =
        runs.iter().filter(|r| r.status == TraceStatus::Converged).collect();
    let mut checks = Vec::new();
    match known {
        KnownFixedSet::Empty => checks.push(Check::new(
            "no-convergence",
            converged.is_empty(),
            format!("{} of {} runs converged", converged.len(), runs.len()),
        )),
        KnownFixedSet::Points { .. } if scenario.expect_linear_convergence => {
            let bound = 10.0 * config.tol;
            let worst = converged
                .iter()
                .filter_map(|r| r.distance_to_known)
                .fold(0.0, f64::max);
            checks.push(Check::new(
                "converged-to-known",
                !converged.is_empty() && worst <= bound,
                format!(
                    "{} of {} runs converged, largest distance to known fixed points {worst:e} (bound {bound:e})",
                    converged.len(),
                    runs.len()
                ),
            ));
        }
        _ => {}
    }
    if lambda < 1.0 && !converged.is_empty() {
        let bound = 10.0 * config.tol;
        let bad = converged
            .iter()
            .filter(|r| {
                r.certificate
                    .as_ref()
                    .is_none_or(|c| !(c.reconstruction_residual <= bound && c.tight))
            })
            .count();
        checks.push(Check::new(
            "certificate",
            bad == 0,
            format!("{bad} of {} converged endpoints failed certification", converged.len()),
        ));
    }
    let rates: Vec<f64> = converged.iter().filter_map(|r| r.rate.map(|f| f.q_rate)).collect();
    let worst_rate = rates.iter().copied().fold(0.0, f64::max);
    if scenario.rate_hypotheses_hold {
        if let Some(predicted) = regularity.and_then(|r| r.predicted) {
            checks.push(Check::new(
                "linear-rate",
                worst_rate <= predicted.c + RATE_SLACK,
                format!(
                    "largest fitted rate {worst_rate:.6} against predicted {:.6} over {} fits",
                    predicted.c,
                    rates.len()
                ),
            ));
        }
    } else if !rates.is_empty() {
        checks.push(Check::info("fitted-rate", format!("largest fitted rate {worst_rate:.6}")));
    }
    checks
}

fn regularity_summary(scenario: &Scenario, lambda: f64, config: &RunConfig) -> Result<Option<RegularitySummary>> {
    let Some(reference) = scenario.reference_point(lambda)? else { return Ok(None) };
    let problem = scenario.problem(lambda)?;
    let spec = NeighborhoodSpec::new(Neighborhood::ball(reference.xbar.clone(), config.radius)?)
        .with_samples(config.samples)
        .with_seed(config.seed);
    let optional = |r: Result<RegularityReport>| match r {
        Ok(report) => Ok(Some(report)),
        Err(Error::EmptySample) => Ok(None),
        Err(e) => Err(e),
    };
    let consistent = reference.gap.norm() == 0.0;
    let mut summary = RegularitySummary {
        kappa: None,
        sigma: None,
        kappa_prime: None,
        predicted: None,
        predicted_from: None,
    };
    if consistent {
        if let Some(intersection) = &scenario.intersection {
            let sets = [scenario.set_a.clone(), scenario.set_b.clone()];
            summary.kappa_prime = optional(estimate_kappa_prime(&sets, intersection, &spec, config.exec))?;
        }
        if let Some(kp) = scenario.bounds.kappa_prime {
            summary.predicted = Some(predicted_rate_convex_consistent(lambda, kappa_from_kappa_prime(kp, 2))?);
            summary.predicted_from = Some(format!("closed-form linear regularity constant {kp}"));
        }
    } else {
        summary.kappa = optional(estimate_kappa(&problem, &reference.gap, std::slice::from_ref(&reference.xbar), &spec, config.exec))?;
        summary.sigma = optional(estimate_sigma(&problem, &reference.gap, &spec, config.exec))?;
        if let (Some(k), Some(s)) = (&summary.kappa, &summary.sigma) {
            if k.estimate.is_finite() && s.estimate.is_finite() {
                summary.predicted = Some(predicted_rate_lifted(0.0, k.estimate, s.estimate)?);
                summary.predicted_from = Some("sampled kappa and sigma".into());
            }
        }
    }
    Ok(Some(summary))
}

/// Fixed points used for shadow comparisons: clustered converged endpoints
/// together with the isolated fixed points known in closed form.
pub fn fixed_points_of(scenario: &Scenario, report: &RunReport) -> Result<Vec<Vector>> {
    let mut points: Vec<Vector> = report
        .runs
        .iter()
        .filter(|r| r.status == TraceStatus::Converged)
        .map(|r| r.final_point.clone())
        .collect();
    if let KnownFixedSet::Points { set: SetDescriptor::Union { members }, .. } =
        scenario.known_fixed_set(report.lambda)?
    {
        points.extend(members.into_iter().filter_map(|m| match m {
            SetDescriptor::Point { point } => Some(point),
            _ => None,
        }));
    }
    points.sort_by(Vector::lex_cmp);
    let mut clusters: Vec<Vector> = Vec::new();
    for p in points {
        if clusters.iter().all(|c| c.distance(&p) > CLUSTER_TOL) {
            clusters.push(p);
        }
    }
    Ok(clusters)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepReport {
    pub scenario: String,
    pub lambdas: Vec<f64>,
    pub reports: Vec<RunReport>,
    pub fixed_points: Vec<Vec<Vector>>,
    /// Shadow inclusion between consecutive parameters, in increasing order.
    pub monotonicity: Vec<MonotonicityCheck>,
    pub verdict: Verdict,
}

/// Runs the scenario at each parameter and compares shadows of consecutive fixed sets.
pub fn sweep_lambda(scenario: &Scenario, lambdas: &[f64], config: &RunConfig) -> Result<SweepReport> {
    if lambdas.is_empty() {
        return Err(Error::Config("need at least one parameter".into()));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut reports = Vec::with_capacity(sorted.len());
    let mut fixed_points = Vec::with_capacity(sorted.len());
    for &lambda in &sorted {
        let outcome = run_scenario(scenario, lambda, config)?;
        fixed_points.push(fixed_points_of(scenario, &outcome.report)?);
        reports.push(outcome.report);
    }
    let mut monotonicity = Vec::new();
    for i in 1..sorted.len() {
        monotonicity.push(check_monotonicity(
            &scenario.problem(sorted[i - 1])?,
            &fixed_points[i - 1],
            &scenario.problem(sorted[i])?,
            &fixed_points[i],
            CLUSTER_TOL,
        )?);
    }
    let failed = reports.iter().any(|r| r.verdict == Verdict::Fail) || monotonicity.iter().any(|m| !m.holds);
    Ok(SweepReport {
        scenario: scenario.name.clone(),
        lambdas: sorted,
        reports,
        fixed_points,
        monotonicity,
        verdict: if failed { Verdict::Fail } else { Verdict::Pass },
    })
}
