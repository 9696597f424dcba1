//! Sampled estimates of regularity constants and the convergence rates they
//! predict.
//!
//! Every estimator evaluates a ratio at seeded random samples of a
//! neighborhood and reports the largest value seen. A finite sample can only
//! see part of the neighborhood, so the result is a lower bound on the true
//! supremum. Sample `i` draws from its own random stream, which makes the
//! estimate identical under sequential and parallel execution and
//! nondecreasing as more samples are requested.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SetDescriptor, Vector};
use crate::operators::{
    drlambda_step, gap_collection, phi_zeta_residual, psi_distance, DifferenceVector, LiftedState,
    TwoSetProblem,
};
use crate::parallel::{map_indexed, sample_rng, Execution};

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_RADIUS: f64 = 0.1;
/// Growth factor per shrink step that marks an estimate as unbounded.
const UNBOUNDED_GROWTH: f64 = 2.0;

/// A bounded region to sample from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Neighborhood {
    Ball { center: Vector, radius: f64 },
    /// Points within `radius` of the segment `anchor + t * direction`, `0 <= t <= length`.
    Tube { anchor: Vector, direction: Vector, length: f64, radius: f64 },
}

impl Neighborhood {
    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(Error::Config(format!("invalid ball neighborhood radius {radius}")));
        }
        Ok(Neighborhood::Ball { center, radius })
    }

    pub fn tube(anchor: Vector, direction: &Vector, length: f64, radius: f64) -> Result<Self> {
        direction.ensure_dim(anchor.dim())?;
        let direction = direction
            .normalized()
            .ok_or_else(|| Error::Config("tube direction must be nonzero".into()))?;
        if !(radius > 0.0 && length >= 0.0 && radius.is_finite() && length.is_finite()) {
            return Err(Error::Config("tube needs a positive radius and finite length".into()));
        }
        Ok(Neighborhood::Tube { anchor, direction, length, radius })
    }

    /// Tube around the normal segment from the nearest point of `set` to `through`.
    pub fn normal_tube(set: &SetDescriptor, through: &Vector, radius: f64) -> Result<Self> {
        let proj = set.project(through)?;
        let base = proj.points.first()?.clone();
        Self::tube(base.clone(), &(through - &base), proj.distance, radius)
    }

    pub fn dim(&self) -> usize {
        match self {
            Neighborhood::Ball { center, .. } => center.dim(),
            Neighborhood::Tube { anchor, .. } => anchor.dim(),
        }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        match self {
            Neighborhood::Ball { center, radius } => x.distance(center) <= *radius,
            Neighborhood::Tube { anchor, direction, length, radius } => {
                let t = (x - anchor).dot(direction).clamp(0.0, *length);
                x.distance(&anchor.add_scaled(t, direction)) <= *radius
            }
        }
    }

    /// The same shape with radius (and tube length) multiplied by `factor`.
    pub fn shrunk(&self, factor: f64) -> Self {
        match self {
            Neighborhood::Ball { center, radius } => {
                Neighborhood::Ball { center: center.clone(), radius: radius * factor }
            }
            Neighborhood::Tube { anchor, direction, length, radius } => Neighborhood::Tube {
                anchor: anchor.clone(),
                direction: direction.clone(),
                length: length * factor,
                radius: radius * factor,
            },
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vector {
        match self {
            Neighborhood::Ball { center, radius } => center + &uniform_in_ball(rng, center.dim(), *radius),
            Neighborhood::Tube { anchor, direction, length, radius } => {
                let t = rng.random::<f64>() * length;
                anchor.add_scaled(t, direction).add_scaled(1.0, &uniform_in_ball(rng, anchor.dim(), *radius))
            }
        }
    }
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vector {
    let gaussian = Vector::new((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    let scale = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    match gaussian.normalized() {
        Some(dir) => dir.scaled(scale),
        None => Vector::zeros(dim),
    }
}

/// A neighborhood together with the sample budget and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub shape: Neighborhood,
    pub samples: usize,
    pub seed: u64,
}

impl NeighborhoodSpec {
    pub fn new(shape: Neighborhood) -> Self {
        Self { shape, samples: DEFAULT_SAMPLES, seed: DEFAULT_SEED }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn shrunk(&self, factor: f64) -> Self {
        Self { shape: self.shape.shrunk(factor), ..self.clone() }
    }
}

/// The subset of a neighborhood that the second point of a pair may come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Restriction {
    Whole,
    /// Points of a set. Samples are projected onto it and kept if they stay in the neighborhood.
    OnSet { set: SetDescriptor },
    /// The ray `origin + t * direction`, `t >= 0`.
    Ray { origin: Vector, direction: Vector },
}

impl Restriction {
    fn restrict(&self, shape: &Neighborhood, y: Vector) -> Result<Option<Vector>> {
        let candidate = match self {
            Restriction::Whole => return Ok(Some(y)),
            Restriction::OnSet { set } => match set.project(&y)?.points.first() {
                Ok(p) => p.clone(),
                Err(Error::DegenerateProjection) => return Ok(None),
                Err(e) => return Err(e),
            },
            Restriction::Ray { origin, direction } => {
                let dir = direction
                    .normalized()
                    .ok_or_else(|| Error::Config("ray direction must be nonzero".into()))?;
                origin.add_scaled((&y - origin).dot(&dir).max(0.0), &dir)
            }
        };
        Ok(shape.contains(&candidate).then_some(candidate))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    #[serde(rename = "epsilon")]
    SuperRegularity,
    #[serde(rename = "alpha")]
    AveragingViolation,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "kappaPrime")]
    KappaPrime,
    #[serde(rename = "sigma")]
    Sigma,
}

/// The sample that attains an estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub index: u64,
    pub points: Vec<Vector>,
}

impl Witness {
    fn lex_cmp(&self, other: &Witness) -> Ordering {
        for (a, b) in self.points.iter().zip(&other.points) {
            match a.lex_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.index.cmp(&other.index)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegularityReport {
    pub quantity: Quantity,
    pub estimate: f64,
    pub is_lower_bound: bool,
    /// Set when the estimate keeps growing as the neighborhood shrinks.
    pub unbounded: bool,
    pub samples: usize,
    /// Samples that produced a ratio.
    pub admissible: usize,
    pub seed: u64,
    pub worst_witness: Option<Witness>,
}

type SampleOutcome = Option<(f64, Vec<Vector>)>;

/// Evaluates `eval` on every sample index and keeps the largest ratio.
///
/// Ties keep the lexicographically smaller witness. A sample whose
/// projections are not finite is skipped.
fn sup_over_samples<F>(quantity: Quantity, spec: &NeighborhoodSpec, exec: Execution, eval: F) -> Result<RegularityReport>
where
    F: Fn(&mut ChaCha8Rng) -> Result<SampleOutcome> + Sync + Send,
{
    let outcomes = map_indexed(exec, spec.samples, |i| {
        let mut rng = sample_rng(spec.seed, i as u64);
        match eval(&mut rng) {
            Err(Error::DegenerateProjection) => Ok(None),
            other => other,
        }
    });
    let mut admissible = 0;
    let mut best: Option<(f64, Witness)> = None;
    for (index, outcome) in outcomes.into_iter().enumerate() {
        let Some((value, points)) = outcome? else { continue };
        admissible += 1;
        let witness = Witness { index: index as u64, points };
        let better = match &best {
            None => true,
            Some((b, w)) => value > *b || (value == *b && witness.lex_cmp(w) == Ordering::Less),
        };
        if better {
            best = Some((value, witness));
        }
    }
    let (estimate, witness) = best.ok_or(Error::EmptySample)?;
    Ok(RegularityReport {
        quantity,
        estimate,
        is_lower_bound: true,
        unbounded: estimate.is_infinite(),
        samples: spec.samples,
        admissible,
        seed: spec.seed,
        worst_witness: Some(witness),
    })
}

/// Reruns `estimate` on neighborhoods shrunk by 4 and 16 and flags the
/// report as unbounded when the estimate at least doubles at each step.
pub fn with_growth_probe<F>(spec: &NeighborhoodSpec, estimate: F) -> Result<RegularityReport>
where
    F: Fn(&NeighborhoodSpec) -> Result<RegularityReport>,
{
    let mut report = estimate(spec)?;
    let mid = estimate(&spec.shrunk(0.25))?.estimate;
    let small = estimate(&spec.shrunk(1.0 / 16.0))?.estimate;
    let grows = mid >= UNBOUNDED_GROWTH * report.estimate && small >= UNBOUNDED_GROWTH * mid;
    report.unbounded |= grows;
    Ok(report)
}

fn normalized_inner(a: &Vector, b: &Vector) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        a.dot(b) / denom
    }
}

/// Smallest `eps >= 0` with `<v - (y' - y), y - x> <= eps |v - (y' - y)| |y - x|`
/// over sampled `x' = x + v` in the neighborhood with `x` a nearest point of
/// `set`, `y'` in the restricted neighborhood and `y` a nearest point to `y'`.
pub fn estimate_epsilon_super_regular(
    set: &SetDescriptor,
    restriction: &Restriction,
    spec: &NeighborhoodSpec,
    exec: Execution,
) -> Result<RegularityReport> {
    let shape = &spec.shape;
    if shape.dim() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), found: shape.dim() });
    }
    sup_over_samples(Quantity::SuperRegularity, spec, exec, |rng| {
        let x_prime = shape.sample(rng);
        let raw = shape.sample(rng);
        let Some(y_prime) = restriction.restrict(shape, raw)? else { return Ok(None) };
        let xs = set.project(&x_prime)?.points.points()?.to_vec();
        let ys = set.project(&y_prime)?.points.points()?.to_vec();
        let mut worst = 0.0f64;
        for x in &xs {
            let v = &x_prime - x;
            for y in &ys {
                let w = &v - &(&y_prime - y);
                worst = worst.max(normalized_inner(&w, &(y - x)));
            }
        }
        Ok(Some((worst, vec![x_prime, y_prime])))
    })
}

/// Worst observed ratios for the three projector inequalities implied by
/// super-regularity with constant `epsilon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProjectorRegularityCheck {
    pub epsilon: f64,
    /// Bound on `|Px' - Py'| / |x' - y'|`.
    pub lipschitz_bound: f64,
    pub worst_lipschitz: f64,
    /// Bound on the excess in the firm nonexpansiveness inequality.
    pub firm_bound: f64,
    pub worst_firm: f64,
    /// Bound on the excess `|Rx' - Ry'|^2 / |x' - y'|^2 - 1`.
    pub reflector_bound: f64,
    pub worst_reflector: f64,
    pub pairs: usize,
    pub pass: bool,
}

/// Tests the projector inequalities on sampled pairs.
pub fn check_projector_regularity(
    set: &SetDescriptor,
    epsilon: f64,
    restriction: &Restriction,
    spec: &NeighborhoodSpec,
    exec: Execution,
) -> Result<ProjectorRegularityCheck> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Config(format!("epsilon must lie in [0, 1), got {epsilon}")));
    }
    let shape = &spec.shape;
    let per_sample = map_indexed(exec, spec.samples, |i| -> Result<Option<[f64; 3]>> {
        let mut rng = sample_rng(spec.seed, i as u64);
        let x_prime = shape.sample(&mut rng);
        let raw = shape.sample(&mut rng);
        let Some(y_prime) = restriction.restrict(shape, raw)? else { return Ok(None) };
        let gap2 = (&x_prime - &y_prime).norm_squared();
        if gap2 == 0.0 {
            return Ok(None);
        }
        let (Ok(xs), Ok(ys)) = (set.project(&x_prime), set.project(&y_prime)) else {
            return Ok(None);
        };
        let (Ok(xs), Ok(ys)) = (xs.points.points(), ys.points.points()) else { return Ok(None) };
        let mut worst = [0.0f64; 3];
        for x in xs {
            for y in ys {
                let dp2 = (x - y).norm_squared();
                let dq2 = (&(&x_prime - x) - &(&y_prime - y)).norm_squared();
                let rx = &x.scaled(2.0) - &x_prime;
                let ry = &y.scaled(2.0) - &y_prime;
                worst[0] = worst[0].max((dp2 / gap2).sqrt());
                worst[1] = worst[1].max((dp2 + dq2) / gap2 - 1.0);
                worst[2] = worst[2].max((&rx - &ry).norm_squared() / gap2 - 1.0);
            }
        }
        Ok(Some(worst))
    });
    let mut worst = [0.0f64; 3];
    let mut pairs = 0;
    for outcome in per_sample {
        if let Some(w) = outcome? {
            pairs += 1;
            for k in 0..3 {
                worst[k] = worst[k].max(w[k]);
            }
        }
    }
    if pairs == 0 {
        return Err(Error::EmptySample);
    }
    let e = epsilon;
    let lipschitz_bound = (1.0 + e) / (1.0 - e);
    let firm_bound = 4.0 * e * (1.0 + e) / (1.0 - e).powi(2);
    let reflector_bound = 8.0 * e * (1.0 + e) / (1.0 - e).powi(2);
    let slack = 1e-10;
    Ok(ProjectorRegularityCheck {
        epsilon,
        lipschitz_bound,
        worst_lipschitz: worst[0],
        firm_bound,
        worst_firm: worst[1],
        reflector_bound,
        worst_reflector: worst[2],
        pairs,
        pass: worst[0] <= lipschitz_bound + slack
            && worst[1] <= firm_bound + slack
            && worst[2] <= reflector_bound + slack,
    })
}

/// Smallest `eps >= 0` with
/// `|x+ - y+|^2 <= (1 + eps)|x - y|^2 - (1 - alpha)/alpha |(x - x+) - (y - y+)|^2`
/// over sampled `x`, every `x+` in `step(x)` and every `y+` in `step(y)`.
pub fn estimate_almost_averaged<F>(
    step: F,
    y: &Vector,
    alpha: f64,
    spec: &NeighborhoodSpec,
    exec: Execution,
) -> Result<RegularityReport>
where
    F: Fn(&Vector) -> Result<Vec<Vector>> + Sync + Send,
{
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let weight = (1.0 - alpha) / alpha;
    let y_next = step(y)?;
    sup_over_samples(Quantity::AveragingViolation, spec, exec, |rng| {
        let x = spec.shape.sample(rng);
        let gap2 = (&x - y).norm_squared();
        if gap2 == 0.0 {
            return Ok(None);
        }
        let mut worst = 0.0f64;
        for xp in step(&x)? {
            for yp in &y_next {
                let moved = (&(&x - &xp) - &(y - yp)).norm_squared();
                worst = worst.max(((&xp - yp).norm_squared() + weight * moved) / gap2 - 1.0);
            }
        }
        Ok(Some((worst, vec![x])))
    })
}

/// Averaging violation of the relaxed map of `problem` at the point `y`.
pub fn drlambda_averaging(
    problem: &TwoSetProblem,
    y: &Vector,
    alpha: f64,
    spec: &NeighborhoodSpec,
    exec: Execution,
) -> Result<RegularityReport> {
    estimate_almost_averaged(|x| drlambda_step(problem, x), y, alpha, spec, exec)
}

fn lifted_reference(zeta: &DifferenceVector, fixed_points: &[Vector]) -> Result<Vec<LiftedState>> {
    if fixed_points.is_empty() {
        return Err(Error::Config("at least one reference fixed point is required".into()));
    }
    Ok(fixed_points.iter().map(|x| zeta.lift(x)).collect())
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    match (num == 0.0, den == 0.0) {
        (true, true) => None,
        (false, true) => Some(f64::INFINITY),
        _ => Some(num / den),
    }
}

/// Lifted metric subregularity ratio
/// `dist(u, S) / dist(zeta, Psi_g(u))` for `u` the lift of a sample `u1`.
///
/// `S` is the set of lifts of `fixed_points`, which should list the fixed
/// points with gap `gap` near the neighborhood.
pub fn estimate_kappa(
    problem: &TwoSetProblem,
    gap: &Vector,
    fixed_points: &[Vector],
    spec: &NeighborhoodSpec,
    exec: Execution,
) -> Result<RegularityReport> {
    let zeta = DifferenceVector::from_gap(gap, problem.lambda())?;
    let sets = gap_collection(problem, gap)?;
    let reference = lifted_reference(&zeta, fixed_points)?;
    sup_over_samples(Quantity::Kappa, spec, exec, |rng| {
        let u1 = spec.shape.sample(rng);
        let u = zeta.lift(&u1);
        let num = reference.iter().map(|r| u.distance(r)).fold(f64::INFINITY, f64::min);
        let den = psi_distance(&sets, &u, zeta.as_lifted())?;
        Ok(ratio(num, den).map(|r| (r, vec![u1])))
    })
}

/// Local linear regularity ratio `dist(u, intersection) / max_j dist(u, sets[j])`.
pub fn estimate_kappa_prime(
    sets: &[SetDescriptor],
    intersection: &SetDescriptor,
    spec: &NeighborhoodSpec,
    exec: Execution,
) -> Result<RegularityReport> {
    if sets.is_empty() {
        return Err(Error::Config("need at least one set".into()));
    }
    sup_over_samples(Quantity::KappaPrime, spec, exec, |rng| {
        let u = spec.shape.sample(rng);
        Ok(linear_regularity_ratio(sets, intersection, &u)?.map(|r| (r, vec![u])))
    })
}

/// `dist(u, intersection) / max_j dist(u, sets[j])`, or `None` at points of the intersection.
pub fn linear_regularity_ratio(sets: &[SetDescriptor], intersection: &SetDescriptor, u: &Vector) -> Result<Option<f64>> {
    let num = intersection.distance(u)?;
    let mut den = 0.0f64;
    for set in sets {
        den = den.max(set.distance(u)?);
    }
    Ok(ratio(num, den))
}

/// Converts a linear regularity constant of `m` sets into the matching
/// subregularity constant of the product formulation.
pub fn kappa_from_kappa_prime(kappa_prime: f64, m: usize) -> f64 {
    (m as f64).sqrt() * kappa_prime
}

/// Ratio `dist(zeta, Psi_g(u)) / dist(0, Phi_zeta(u))` over lifts of samples
/// projected onto `B - s g`.
pub fn estimate_sigma(
    problem: &TwoSetProblem,
    gap: &Vector,
    spec: &NeighborhoodSpec,
    exec: Execution,
) -> Result<RegularityReport> {
    let zeta = DifferenceVector::from_gap(gap, problem.lambda())?;
    let sets = gap_collection(problem, gap)?;
    let shifted_b = &sets[0];
    sup_over_samples(Quantity::Sigma, spec, exec, |rng| {
        let raw = spec.shape.sample(rng);
        let u1 = shifted_b.project(&raw)?.points.first()?.clone();
        if !spec.shape.contains(&u1) {
            return Ok(None);
        }
        let u = zeta.lift(&u1);
        let num = psi_distance(&sets, &u, zeta.as_lifted())?;
        let den = phi_zeta_residual(problem, &zeta, &u)?;
        Ok(ratio(num, den).map(|r| (r, vec![u1])))
    })
}

/// Largest two-set and lifted subregularity ratios on paired samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShiftSubtransversalityCheck {
    pub two_set_max: f64,
    pub lifted_max: f64,
    /// The constant the lifted ratio is compared with.
    pub bound: f64,
    pub slack: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Compares the subregularity ratio of the pair `(A, B)` with the ratio of
/// the lifted gap collection.
///
/// A sample `u1` of the neighborhood gives the pair `(u1 + (s-1) g, u1 + s g)`
/// and the lift of `u1`. The check passes when the lifted maximum stays
/// below `bound + slack`, where `bound` defaults to the two-set maximum.
pub fn verify_shift_subtransversality(
    problem: &TwoSetProblem,
    gap: &Vector,
    fixed_points: &[Vector],
    bound: Option<f64>,
    slack: f64,
    spec: &NeighborhoodSpec,
    exec: Execution,
) -> Result<ShiftSubtransversalityCheck> {
    let s = problem.lambda().shift_factor()?;
    let zeta = DifferenceVector::from_gap(gap, problem.lambda())?;
    let lifted_sets = gap_collection(problem, gap)?;
    let lifted_reference = lifted_reference(&zeta, fixed_points)?;
    let pair_sets = [problem.set_a().clone(), problem.set_b().clone()];
    let pair_of = |x: &Vector| -> LiftedState {
        LiftedState::new(vec![x.add_scaled(s - 1.0, gap), x.add_scaled(s, gap)]).expect("equal blocks")
    };
    let pair_reference: Vec<LiftedState> = fixed_points.iter().map(pair_of).collect();
    let pair_target = LiftedState::new(vec![gap.scaled(-1.0), gap.clone()])?;

    let per_sample = map_indexed(exec, spec.samples, |i| -> Result<Option<(f64, f64)>> {
        let mut rng = sample_rng(spec.seed, i as u64);
        let u1 = spec.shape.sample(&mut rng);
        let pair = pair_of(&u1);
        let lifted = zeta.lift(&u1);
        let nearest = |u: &LiftedState, refs: &[LiftedState]| {
            refs.iter().map(|r| u.distance(r)).fold(f64::INFINITY, f64::min)
        };
        let two = match psi_distance(&pair_sets, &pair, &pair_target) {
            Ok(den) => ratio(nearest(&pair, &pair_reference), den),
            Err(Error::DegenerateProjection) => return Ok(None),
            Err(e) => return Err(e),
        };
        let lifted_ratio = match psi_distance(&lifted_sets, &lifted, zeta.as_lifted()) {
            Ok(den) => ratio(nearest(&lifted, &lifted_reference), den),
            Err(Error::DegenerateProjection) => return Ok(None),
            Err(e) => return Err(e),
        };
        Ok(two.zip(lifted_ratio))
    });
    let mut two_set_max = 0.0f64;
    let mut lifted_max = 0.0f64;
    let mut samples = 0;
    for outcome in per_sample {
        if let Some((a, b)) = outcome? {
            samples += 1;
            two_set_max = two_set_max.max(a);
            lifted_max = lifted_max.max(b);
        }
    }
    if samples == 0 {
        return Err(Error::EmptySample);
    }
    let bound = bound.unwrap_or(two_set_max);
    Ok(ShiftSubtransversalityCheck {
        two_set_max,
        lifted_max,
        bound,
        slack,
        samples,
        pass: lifted_max <= bound + slack,
    })
}

/// Violation and averaging constants of a composite map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Composite {
    pub epsilon: f64,
    pub alpha: f64,
}

fn check_constants(epsilons: &[f64], alphas: &[f64]) -> Result<()> {
    if epsilons.is_empty() || epsilons.len() != alphas.len() {
        return Err(Error::Config("need matching, nonempty lists of constants".into()));
    }
    let valid_alpha = |a: &f64| *a > 0.0 && *a < 1.0;
    if epsilons.iter().any(|e| e.is_nan() || *e < 0.0) || !alphas.iter().all(valid_alpha) {
        return Err(Error::Config("violations must be >= 0 and averaging constants in (0, 1)".into()));
    }
    Ok(())
}

/// Constants of the composition `T_1 ... T_m` of almost averaged maps.
pub fn compose_violations(epsilons: &[f64], alphas: &[f64]) -> Result<Composite> {
    check_constants(epsilons, alphas)?;
    let m = alphas.len() as f64;
    let epsilon = epsilons.iter().map(|e| 1.0 + e).product::<f64>() - 1.0;
    let alpha_max = alphas.iter().copied().fold(0.0, f64::max);
    let alpha = m / (m - 1.0 + 1.0 / alpha_max);
    Ok(Composite { epsilon, alpha })
}

/// Constants of the convex combination `sum_j w_j T_j`.
pub fn compose_convex_combination(epsilons: &[f64], alphas: &[f64], weights: &[f64]) -> Result<Composite> {
    check_constants(epsilons, alphas)?;
    if weights.len() != epsilons.len() || weights.iter().any(|w| w.is_nan() || *w < 0.0) {
        return Err(Error::Config("weights must be nonnegative, one per map".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!("weights must sum to one, got {total}")));
    }
    Ok(Composite {
        epsilon: weights.iter().zip(epsilons).map(|(w, e)| w * e).sum(),
        alpha: alphas.iter().copied().fold(0.0, f64::max),
    })
}

/// Linear rate bound and whether it is below one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictedRate {
    pub c: f64,
    pub condition_ok: bool,
}

/// `c = sqrt(1 + eps - (1 - alpha) / (kappa^2 alpha))`, clamped at zero.
///
/// `condition_ok` holds when `kappa < sqrt((1 - alpha) / (eps alpha))`,
/// which is exactly when `c < 1`.
pub fn predicted_rate(epsilon: f64, alpha: f64, kappa: f64) -> Result<PredictedRate> {
    let valid = epsilon >= 0.0 && alpha > 0.0 && alpha < 1.0 && kappa > 0.0;
    if !valid {
        return Err(Error::Config("need eps >= 0, alpha in (0, 1) and kappa > 0".into()));
    }
    let radicand = 1.0 + epsilon - (1.0 - alpha) / (kappa * kappa * alpha);
    let condition_ok = epsilon == 0.0 || kappa < ((1.0 - alpha) / (epsilon * alpha)).sqrt();
    Ok(PredictedRate { c: radicand.max(0.0).sqrt(), condition_ok })
}

/// Rate for the lifted map from its violation and the product of the
/// subregularity constant `kappa` with the ratio `sigma`.
pub fn predicted_rate_lifted(epsilon: f64, kappa: f64, sigma: f64) -> Result<PredictedRate> {
    predicted_rate(epsilon, 0.5, kappa * sigma)
}

/// Rate for convex sets with nonempty intersection, `sqrt(1 - 2 lambda^2 / kappa^2)`,
/// where `kappa` is the subregularity constant of the product formulation.
pub fn predicted_rate_convex_consistent(lambda: f64, kappa: f64) -> Result<PredictedRate> {
    if !(lambda > 0.0 && lambda <= 1.0 && kappa > 0.0) {
        return Err(Error::Config("need lambda in (0, 1] and kappa > 0".into()));
    }
    let radicand = 1.0 - 2.0 * lambda * lambda / (kappa * kappa);
    Ok(PredictedRate { c: radicand.max(0.0).sqrt(), condition_ok: radicand < 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec())
    }

    #[test]
    fn composition_constants() {
        let c = compose_violations(&[0.1, 0.2], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(c.epsilon, 0.32, epsilon = 1e-15);
        assert_abs_diff_eq!(c.alpha, 2.0 / 3.0, epsilon = 1e-15);
        let w = compose_convex_combination(&[0.1, 0.3], &[0.5, 0.75], &[0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(w.epsilon, 0.25, epsilon = 1e-15);
        assert_eq!(w.alpha, 0.75);
        assert!(compose_violations(&[0.1], &[1.0]).is_err());
    }

    #[test]
    fn rate_formula() {
        let r = predicted_rate(0.0, 0.5, 2.0).unwrap();
        assert_abs_diff_eq!(r.c, 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert!(r.condition_ok);
        let bad = predicted_rate(0.5, 0.5, 2.0).unwrap();
        assert!(!bad.condition_ok);
        assert!(bad.c >= 1.0);
        let convex = predicted_rate_convex_consistent(0.5, kappa_from_kappa_prime(10.0 / 3.0, 2)).unwrap();
        assert_abs_diff_eq!(convex.c, (1.0f64 - 0.25 / (100.0 / 9.0)).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn ball_samples_stay_inside() {
        let shape = Neighborhood::ball(v(&[1.0, 2.0]), 0.3).unwrap();
        let mut rng = sample_rng(1, 0);
        for _ in 0..1000 {
            assert!(shape.contains(&shape.sample(&mut rng)));
        }
        let tube = Neighborhood::tube(v(&[0.0, 0.0]), &v(&[2.0, 0.0]), 1.0, 0.1).unwrap();
        for _ in 0..1000 {
            assert!(tube.contains(&tube.sample(&mut rng)));
        }
        assert!(!tube.contains(&v(&[-0.2, 0.0])));
    }

    #[test]
    fn ray_restriction_projects_onto_ray() {
        let shape = Neighborhood::ball(v(&[1.0, 0.0]), 0.5).unwrap();
        let ray = Restriction::Ray { origin: v(&[1.0, 0.0]), direction: v(&[1.0, 0.0]) };
        assert_eq!(ray.restrict(&shape, v(&[1.2, 0.3])).unwrap(), Some(v(&[1.2, 0.0])));
        assert_eq!(ray.restrict(&shape, v(&[0.8, 0.3])).unwrap(), Some(v(&[1.0, 0.0])));
    }

    #[test]
    fn estimates_do_not_depend_on_execution() {
        let circle = SetDescriptor::sphere(v(&[0.0, 0.0]), 1.0).unwrap();
        let spec = NeighborhoodSpec::new(Neighborhood::ball(v(&[1.0, 0.0]), 0.2).unwrap()).with_samples(500);
        let seq = estimate_epsilon_super_regular(&circle, &Restriction::Whole, &spec, Execution::Sequential).unwrap();
        let par = estimate_epsilon_super_regular(&circle, &Restriction::Whole, &spec, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn orthogonal_lines_linear_regularity() {
        let x_axis = SetDescriptor::affine(v(&[0.0, 0.0]), vec![v(&[1.0, 0.0])]).unwrap();
        let y_axis = SetDescriptor::affine(v(&[0.0, 0.0]), vec![v(&[0.0, 1.0])]).unwrap();
        let origin = SetDescriptor::point(v(&[0.0, 0.0])).unwrap();
        let spec = NeighborhoodSpec::new(Neighborhood::ball(v(&[0.0, 0.0]), 1.0).unwrap());
        let r = estimate_kappa_prime(&[x_axis, y_axis], &origin, &spec, Execution::Sequential).unwrap();
        assert!(r.estimate <= 2f64.sqrt() + 1e-12);
        assert!(r.estimate >= 0.99 * 2f64.sqrt());
    }
}
