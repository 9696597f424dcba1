//! Iteration of the relaxed map, rate fitting and fixed-point certificates.
//!
//! A fixed point `x` of the relaxed map with `lambda < 1` is described by
//! its shadow `f = P_B x`, the point `e = P_A f` and the gap `g = f - e`.
//! With `s = lambda / (1 - lambda)` it satisfies `x = f - s g`, and `e` is
//! also a nearest point of `A` to `f + s g`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SetDescriptor, Vector};
use crate::operators::{drlambda_select, drlambda_step, gap_collection, permute, DifferenceVector, LiftedState, TwoSetProblem};
use crate::parallel::{map_items, Execution};

/// Minimum number of residuals in a rate fit.
pub const MIN_FIT_WINDOW: usize = 8;
/// Fraction of the usable residuals that enter a rate fit.
pub const FIT_FRACTION: f64 = 0.2;

/// Stopping rules for [`iterate`].
#[derive(Clone, Debug, PartialEq)]
pub struct IterateOptions {
    /// Stop once a step moves less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// The run counts as diverged once `|x_k| > divergence_factor * (1 + |x_0|)`.
    pub divergence_factor: f64,
    /// Optional set whose distance is recorded at every iterate.
    pub reference: Option<SetDescriptor>,
}

impl Default for IterateOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100_000, divergence_factor: 1e6, reference: None }
    }
}

impl IterateOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_reference(mut self, reference: SetDescriptor) -> Self {
        self.reference = Some(reference);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TraceStatus {
    Converged,
    MaxIterations,
    Diverged,
    DegenerateProjection,
}

/// The orbit `x_0, ..., x_K` of the lexicographically first selection.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace {
    pub iterates: Vec<Vector>,
    /// `residuals[k] = |x_{k+1} - x_k|`.
    pub residuals: Vec<f64>,
    /// First nearest point of `B` to each iterate, `None` where it is not finite.
    pub shadows: Vec<Option<Vector>>,
    pub reference_distances: Option<Vec<f64>>,
    pub status: TraceStatus,
}

impl IterationTrace {
    pub fn last(&self) -> &Vector {
        self.iterates.last().expect("a trace holds at least the start point")
    }

    pub fn steps(&self) -> usize {
        self.residuals.len()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }

    /// Writes one row per iterate. The residual column of the last row and
    /// unavailable shadows or reference distances are left empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let dim = self.iterates[0].dim();
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["k".to_string()];
        header.extend((0..dim).map(|i| format!("x{i}")));
        header.push("residual".into());
        header.extend((0..dim).map(|i| format!("shadow{i}")));
        header.push("refDistance".into());
        out.write_record(&header)?;
        for (k, x) in self.iterates.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(x.as_slice().iter().map(|c| format!("{c:e}")));
            row.push(self.residuals.get(k).map(|r| format!("{r:e}")).unwrap_or_default());
            match self.shadows.get(k).and_then(Option::as_ref) {
                Some(s) => row.extend(s.as_slice().iter().map(|c| format!("{c:e}"))),
                None => row.extend(std::iter::repeat_n(String::new(), dim)),
            }
            row.push(
                self.reference_distances
                    .as_ref()
                    .and_then(|d| d.get(k))
                    .map(|d| format!("{d:e}"))
                    .unwrap_or_default(),
            );
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Runs the relaxed map from `x0` until a stopping rule fires.
pub fn iterate(problem: &TwoSetProblem, x0: &Vector, opts: &IterateOptions) -> Result<IterationTrace> {
    x0.ensure_dim(problem.dim())?;
    if !x0.is_finite() {
        return Err(Error::Config("start point must be finite".into()));
    }
    if opts.tol.is_nan() || opts.tol < 0.0 {
        return Err(Error::Config(format!("tolerance must be nonnegative, got {}", opts.tol)));
    }
    let bound = opts.divergence_factor * (1.0 + x0.norm());
    let mut iterates = vec![x0.clone()];
    let mut residuals = Vec::new();
    let mut status = TraceStatus::MaxIterations;
    for _ in 0..opts.max_iter {
        let x = iterates.last().expect("nonempty");
        let next = match drlambda_select(problem, x) {
            Ok(next) => next,
            Err(Error::DegenerateProjection) => {
                status = TraceStatus::DegenerateProjection;
                break;
            }
            Err(e) => return Err(e),
        };
        let step = next.distance(x);
        residuals.push(step);
        iterates.push(next);
        let x = iterates.last().expect("nonempty");
        if step <= opts.tol {
            status = TraceStatus::Converged;
            break;
        }
        if !x.is_finite() || x.norm() > bound {
            status = TraceStatus::Diverged;
            break;
        }
    }
    let shadows = iterates
        .iter()
        .map(|x| {
            let proj = problem.set_b().project(x)?;
            Ok(proj.points.first().ok().cloned())
        })
        .collect::<Result<Vec<_>>>()?;
    let reference_distances = opts
        .reference
        .as_ref()
        .map(|set| iterates.iter().map(|x| set.distance(x)).collect::<Result<Vec<_>>>())
        .transpose()?;
    Ok(IterationTrace { iterates, residuals, shadows, reference_distances, status })
}

/// Least-squares fit of `log r_k` against `k` over the tail of a residual sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RateFit {
    /// `exp(slope)`, the observed linear rate.
    pub q_rate: f64,
    pub r_squared: f64,
    /// Number of residuals in the fit.
    pub window: usize,
    /// Smallest residual inside the window.
    pub tail_min: f64,
}

/// Fits a linear rate to the last `max(8, 20%)` residuals.
///
/// The sequence is cut at the first residual below `100 * f64::EPSILON`,
/// where rounding dominates.
pub fn fit_rate(residuals: &[f64]) -> Result<RateFit> {
    let cutoff = 100.0 * f64::EPSILON;
    let usable = residuals.iter().position(|&r| r.is_nan() || r <= cutoff).unwrap_or(residuals.len());
    if usable < MIN_FIT_WINDOW {
        return Err(Error::InsufficientData { available: usable, required: MIN_FIT_WINDOW });
    }
    let window = ((usable as f64 * FIT_FRACTION).ceil() as usize).clamp(MIN_FIT_WINDOW, usable);
    let start = usable - window;
    let points: Vec<(f64, f64)> =
        (start..usable).map(|k| (k as f64, residuals[k].ln())).collect();
    let n = window as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - mean_y - slope * (p.0 - mean_x)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let tail_min = residuals[start..usable].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RateFit { q_rate: slope.exp(), r_squared, window, tail_min })
}

/// Shadow, gap and consistency residuals of a fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FixedPointCertificate {
    pub lambda: f64,
    pub xbar: Vector,
    /// The shadow `P_B xbar`.
    pub f: Vector,
    /// `P_A f`.
    pub e: Vector,
    /// The gap `f - e`.
    pub g: Vector,
    /// `|xbar - (f - s g)|`.
    pub reconstruction_residual: f64,
    /// Distance from `e` to `P_A(f + s g)`.
    pub tightness_residual: f64,
    pub tight: bool,
}

/// Certifies that `xbar` is a fixed point and extracts its gap.
///
/// Fails with `NotAFixedPoint` when the step residual at `xbar` exceeds `tol`.
pub fn characterize_fixed_point(
    problem: &TwoSetProblem,
    xbar: &Vector,
    tol: f64,
) -> Result<FixedPointCertificate> {
    let s = problem.lambda().shift_factor()?;
    let residual = drlambda_step(problem, xbar)?
        .iter()
        .map(|p| p.distance(xbar))
        .fold(f64::INFINITY, f64::min);
    if residual.is_nan() || residual > tol {
        return Err(Error::NotAFixedPoint { residual, tol });
    }
    let f = problem.set_b().project(xbar)?.points.first()?.clone();
    let e = problem.set_a().project(&f)?.points.first()?.clone();
    let g = &f - &e;
    let reconstruction_residual = xbar.distance(&f.add_scaled(-s, &g));
    let tightness_residual = problem
        .set_a()
        .project(&f.add_scaled(s, &g))?
        .points
        .distance_from(&e)?;
    Ok(FixedPointCertificate {
        lambda: problem.lambda().value(),
        xbar: xbar.clone(),
        f,
        e,
        g,
        reconstruction_residual,
        tightness_residual,
        tight: tightness_residual <= tol,
    })
}

/// The difference vector attached to a gap.
pub fn difference_vector(gap: &Vector, lambda: f64) -> Result<DifferenceVector> {
    DifferenceVector::from_gap(gap, crate::operators::Relaxation::new(lambda)?)
}

/// Per-block residuals of the four projection cycle conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct W0Check {
    pub member: bool,
    /// `residuals[j]` is the distance from block `j` to the projection of
    /// block `j + 1` onto the `j`-th set of the gap collection.
    pub residuals: Vec<f64>,
}

/// Tests whether `u` is a projection cycle of the gap collection of `g`.
pub fn check_w0_membership(problem: &TwoSetProblem, gap: &Vector, u: &LiftedState, tol: f64) -> Result<W0Check> {
    let sets = gap_collection(problem, gap)?;
    if u.len() != sets.len() {
        return Err(Error::DimensionMismatch { expected: sets.len(), found: u.len() });
    }
    let next = permute(u);
    let residuals = sets
        .iter()
        .zip(next.blocks())
        .zip(u.blocks())
        .map(|((set, source), block)| set.project(source)?.points.distance_from(block))
        .collect::<Result<Vec<f64>>>()?;
    let member = residuals.iter().all(|&r| r <= tol);
    Ok(W0Check { member, residuals })
}

/// Outcome of comparing shadows of fixed sets at two relaxation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonotonicityCheck {
    pub lambda_low: f64,
    pub lambda_high: f64,
    pub holds: bool,
    /// Largest distance from a shadow at `lambda_high` to the shadows at `lambda_low`.
    pub worst_excess: f64,
}

/// Checks that the shadows of the fixed points at the larger parameter are
/// among the shadows at the smaller one.
pub fn check_monotonicity(
    low: &TwoSetProblem,
    fixed_low: &[Vector],
    high: &TwoSetProblem,
    fixed_high: &[Vector],
    tol: f64,
) -> Result<MonotonicityCheck> {
    if low.set_a() != high.set_a() || low.set_b() != high.set_b() {
        return Err(Error::Config("monotonicity compares one pair of sets".into()));
    }
    if low.lambda() > high.lambda() {
        return Err(Error::Config("the first problem must have the smaller parameter".into()));
    }
    let shadows = |fixed: &[Vector]| -> Result<Vec<Vector>> {
        let mut out = Vec::new();
        for x in fixed {
            out.extend_from_slice(low.set_b().project(x)?.points.points()?);
        }
        Ok(out)
    };
    let shadows_low = shadows(fixed_low)?;
    let worst_excess = shadows(fixed_high)?
        .iter()
        .map(|s| shadows_low.iter().map(|t| s.distance(t)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    Ok(MonotonicityCheck {
        lambda_low: low.lambda().value(),
        lambda_high: high.lambda().value(),
        holds: worst_excess <= tol,
        worst_excess,
    })
}

/// Iterates from every seed and clusters the converged endpoints.
///
/// Endpoints closer than `cluster_tol` to an earlier endpoint (in
/// lexicographic order) are merged into it.
pub fn discover_fixed_points(
    problem: &TwoSetProblem,
    seeds: &[Vector],
    opts: &IterateOptions,
    cluster_tol: f64,
    exec: Execution,
) -> Result<Vec<Vector>> {
    let traces = map_items(exec, seeds, |x0| iterate(problem, x0, opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut endpoints: Vec<Vector> = traces
        .iter()
        .filter(|t| t.status == TraceStatus::Converged)
        .map(|t| t.last().clone())
        .collect();
    endpoints.sort_by(Vector::lex_cmp);
    let mut clusters: Vec<Vector> = Vec::new();
    for p in endpoints {
        if clusters.iter().all(|c| c.distance(&p) > cluster_tol) {
            clusters.push(p);
        }
    }
    Ok(clusters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec())
    }

    fn separable(lambda: f64) -> TwoSetProblem {
        TwoSetProblem::new(
            SetDescriptor::sphere(v(&[0.0, 0.0]), 1.0).unwrap(),
            SetDescriptor::sphere(v(&[3.0, 0.0]), 1.0).unwrap(),
            lambda,
        )
        .unwrap()
    }

    #[test]
    fn fit_recovers_geometric_rate() {
        let residuals: Vec<f64> = (0..60).map(|k| 0.5f64.powi(k)).collect();
        let fit = fit_rate(&residuals).unwrap();
        assert_abs_diff_eq!(fit.q_rate, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit.tail_min > 100.0 * f64::EPSILON);
    }

    #[test]
    fn fit_needs_enough_points() {
        assert!(matches!(
            fit_rate(&[1.0, 0.5, 0.25]),
            Err(Error::InsufficientData { available: 3, .. })
        ));
        assert!(matches!(fit_rate(&[0.0; 20]), Err(Error::InsufficientData { available: 0, .. })));
    }

    #[test]
    fn start_at_fixed_point_converges_immediately() {
        let problem = separable(0.5);
        let trace = iterate(&problem, &v(&[1.0, 0.0]), &IterateOptions::default()).unwrap();
        assert_eq!(trace.status, TraceStatus::Converged);
        assert_eq!(trace.residuals, vec![0.0]);
        assert_eq!(trace.iterates.len(), 2);
    }

    #[test]
    fn separable_circles_converge_to_gap_point() {
        let problem = separable(0.3);
        let trace = iterate(&problem, &v(&[1.2, 0.3]), &IterateOptions::default().with_tol(1e-12)).unwrap();
        assert_eq!(trace.status, TraceStatus::Converged);
        let s = 0.3 / 0.7;
        assert!(trace.last().distance(&v(&[2.0 - s, 0.0])) < 1e-10);
        let cert = characterize_fixed_point(&problem, trace.last(), 1e-10).unwrap();
        assert!(cert.reconstruction_residual <= 1e-9);
        assert!(cert.tight);
        assert!(cert.g.distance(&v(&[1.0, 0.0])) <= 1e-9);
    }

    #[test]
    fn certificate_rejects_non_fixed_points() {
        let problem = separable(0.5);
        assert!(matches!(
            characterize_fixed_point(&problem, &v(&[0.0, 1.0]), 1e-10),
            Err(Error::NotAFixedPoint { .. })
        ));
        let unrelaxed = separable(1.0);
        assert!(matches!(
            characterize_fixed_point(&unrelaxed, &v(&[1.0, 0.0]), 1e-10),
            Err(Error::InvalidLambda { .. })
        ));
    }

    #[test]
    fn w0_membership_and_perturbation() {
        let problem = separable(0.5);
        let g = v(&[1.0, 0.0]);
        let z = LiftedState::new(vec![v(&[1.0, 0.0]), v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[2.0, 0.0])]).unwrap();
        assert!(check_w0_membership(&problem, &g, &z, 1e-12).unwrap().member);
        let moved = LiftedState::new(vec![v(&[1.0, 0.0]), v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[1.9, 0.0])]).unwrap();
        let check = check_w0_membership(&problem, &g, &moved, 1e-12).unwrap();
        assert!(!check.member);
        assert_abs_diff_eq!(check.residuals[3], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn csv_columns() {
        let problem = separable(0.5);
        let opts = IterateOptions::default()
            .with_max_iter(3)
            .with_reference(SetDescriptor::point(v(&[1.0, 0.0])).unwrap());
        let trace = iterate(&problem, &v(&[1.2, 0.3]), &opts).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "k,x0,x1,residual,shadow0,shadow1,refDistance");
        assert_eq!(text.lines().count(), 1 + trace.iterates.len());
        assert!(text.lines().last().unwrap().split(',').nth(3).unwrap().is_empty());
    }
}
