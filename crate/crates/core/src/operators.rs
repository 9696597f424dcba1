//! The relaxed Douglas-Rachford map and the product-space objects used to
//! analyse it.
//!
//! For a relaxation parameter `lambda` in (0, 1] the step is
//! `x -> (lambda/2) (R_A R_B x + x) + (1 - lambda) P_B x`, evaluated for every
//! selection of the two projectors. A gap `g` between the sets lifts to a
//! four-block difference vector and a matching four-set collection on which
//! the fixed points become exact cycles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sort_dedup, SetDescriptor, Vector};

const BLOCK_SUM_TOL: f64 = 1e-10;

/// Relaxation parameter in (0, 1].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Relaxation(f64);

impl Relaxation {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidLambda { value, reason: "must lie in (0, 1]" })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `lambda / (1 - lambda)`, the scale between the gap and the fixed point
    /// offset. Undefined for the unrelaxed map.
    pub fn shift_factor(self) -> Result<f64> {
        if self.0 < 1.0 {
            Ok(self.0 / (1.0 - self.0))
        } else {
            Err(Error::InvalidLambda { value: self.0, reason: "gap analysis needs lambda < 1" })
        }
    }
}

impl TryFrom<f64> for Relaxation {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Relaxation> for f64 {
    fn from(r: Relaxation) -> f64 {
        r.0
    }
}

/// Two sets of the same ambient space and a relaxation parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSetProblem {
    set_a: SetDescriptor,
    set_b: SetDescriptor,
    lambda: Relaxation,
}

impl TwoSetProblem {
    pub fn new(set_a: SetDescriptor, set_b: SetDescriptor, lambda: f64) -> Result<Self> {
        set_a.validate()?;
        set_b.validate()?;
        if set_a.dim() != set_b.dim() {
            return Err(Error::DimensionMismatch { expected: set_a.dim(), found: set_b.dim() });
        }
        Ok(Self { set_a, set_b, lambda: Relaxation::new(lambda)? })
    }

    pub fn set_a(&self) -> &SetDescriptor {
        &self.set_a
    }

    pub fn set_b(&self) -> &SetDescriptor {
        &self.set_b
    }

    pub fn lambda(&self) -> Relaxation {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.set_a.dim()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Ok(Self { lambda: Relaxation::new(lambda)?, ..self.clone() })
    }
}

/// Every value of the relaxed Douglas-Rachford map at `x`, sorted.
pub fn drlambda_step(problem: &TwoSetProblem, x: &Vector) -> Result<Vec<Vector>> {
    x.ensure_dim(problem.dim())?;
    let lambda = problem.lambda.value();
    let mut out = Vec::new();
    for b in problem.set_b.project(x)?.points.points()? {
        let mirrored = b.scaled(2.0).add_scaled(-1.0, x);
        for a in problem.set_a.project(&mirrored)?.points.points()? {
            let reflected = a.scaled(2.0).add_scaled(-1.0, &mirrored);
            out.push((&reflected + x).scaled(lambda / 2.0).add_scaled(1.0 - lambda, b));
        }
    }
    sort_dedup(&mut out);
    Ok(out)
}

/// The lexicographically first value of the relaxed Douglas-Rachford map.
pub fn drlambda_select(problem: &TwoSetProblem, x: &Vector) -> Result<Vector> {
    Ok(drlambda_step(problem, x)?.swap_remove(0))
}

/// Alternating projections `P_A P_B`.
pub fn ap_step(problem: &TwoSetProblem, x: &Vector) -> Result<Vec<Vector>> {
    cyclic_step(&[problem.set_b.clone(), problem.set_a.clone()], x)
}

/// Cyclic projections. The first set of `sets` is applied first.
pub fn cyclic_step(sets: &[SetDescriptor], x: &Vector) -> Result<Vec<Vector>> {
    let mut current = vec![x.clone()];
    for set in sets {
        let mut next = Vec::new();
        for point in &current {
            next.extend_from_slice(set.project(point)?.points.points()?);
        }
        sort_dedup(&mut next);
        current = next;
    }
    Ok(current)
}

/// A point of the product space `E^m`, stored as `m` blocks of equal size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LiftedState(Vec<Vector>);

impl LiftedState {
    pub fn new(blocks: Vec<Vector>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::Config("a lifted state needs at least one block".into()));
        };
        let dim = first.dim();
        for b in &blocks {
            b.ensure_dim(dim)?;
        }
        Ok(Self(blocks))
    }

    pub fn blocks(&self) -> &[Vector] {
        &self.0
    }

    pub fn block(&self, i: usize) -> &Vector {
        &self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn block_dim(&self) -> usize {
        self.0[0].dim()
    }

    pub fn to_vector(&self) -> Vector {
        Vector::concat(&self.0)
    }

    pub fn distance(&self, other: &LiftedState) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(Vector::norm_squared).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &LiftedState) -> LiftedState {
        LiftedState(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

/// Cyclic block shift `(x1, ..., xm) -> (x2, ..., xm, x1)`.
pub fn permute(u: &LiftedState) -> LiftedState {
    let mut blocks = u.0.clone();
    blocks.rotate_left(1);
    LiftedState(blocks)
}

/// The four-block difference vector `(g, -s g, -g, s g)` attached to a gap
/// `g`, where `s = lambda / (1 - lambda)`. Its blocks sum to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceVector(LiftedState);

impl DifferenceVector {
    pub fn from_gap(gap: &Vector, lambda: Relaxation) -> Result<Self> {
        let s = lambda.shift_factor()?;
        Ok(Self(LiftedState(vec![
            gap.clone(),
            gap.scaled(-s),
            gap.scaled(-1.0),
            gap.scaled(s),
        ])))
    }

    /// Wraps arbitrary blocks, checking that there are four and they sum to zero.
    pub fn new(blocks: Vec<Vector>) -> Result<Self> {
        if blocks.len() != 4 {
            return Err(Error::Config(format!("difference vector needs 4 blocks, got {}", blocks.len())));
        }
        let state = LiftedState::new(blocks)?;
        let sum = state.0.iter().fold(Vector::zeros(state.block_dim()), |acc, b| &acc + b);
        if sum.norm() > BLOCK_SUM_TOL * (1.0 + state.norm()) {
            return Err(Error::Config(format!("difference vector blocks sum to {sum}, not zero")));
        }
        Ok(Self(state))
    }

    pub fn blocks(&self) -> &[Vector] {
        self.0.blocks()
    }

    pub fn as_lifted(&self) -> &LiftedState {
        &self.0
    }

    /// The gap `g`, which is the first block.
    pub fn gap(&self) -> &Vector {
        self.0.block(0)
    }

    /// The unique point of `{u : u - permute(u) = zeta}` with first block `u1`.
    pub fn lift(&self, u1: &Vector) -> LiftedState {
        let z = self.blocks();
        let u2 = u1 - &z[0];
        let u3 = &u2 - &z[1];
        let u4 = u1 + &z[3];
        LiftedState(vec![u1.clone(), u2, u3, u4])
    }
}

/// The collection `(B - s g, A - s g, A, B)` for a gap `g`.
pub fn gap_collection(problem: &TwoSetProblem, gap: &Vector) -> Result<Vec<SetDescriptor>> {
    gap.ensure_dim(problem.dim())?;
    let shift = gap.scaled(problem.lambda.shift_factor()?);
    Ok(vec![
        SetDescriptor::translate(problem.set_b.clone(), shift.clone())?,
        SetDescriptor::translate(problem.set_a.clone(), shift)?,
        problem.set_a.clone(),
        problem.set_b.clone(),
    ])
}

fn check_collection(sets: &[SetDescriptor], u: &LiftedState) -> Result<()> {
    if sets.len() != u.len() {
        return Err(Error::DimensionMismatch { expected: sets.len(), found: u.len() });
    }
    for (set, block) in sets.iter().zip(u.blocks()) {
        block.ensure_dim(set.dim())?;
    }
    Ok(())
}

/// Every value of `P_Omega(permute(u)) - permute(u)` for the product of `sets`.
pub fn psi(sets: &[SetDescriptor], u: &LiftedState) -> Result<Vec<LiftedState>> {
    check_collection(sets, u)?;
    let shifted = permute(u);
    let mut acc: Vec<Vec<Vector>> = vec![Vec::new()];
    for (set, block) in sets.iter().zip(shifted.blocks()) {
        let candidates: Vec<Vector> =
            set.project(block)?.points.points()?.iter().map(|p| p - block).collect();
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                candidates.iter().map(move |c| {
                    let mut next = prefix.clone();
                    next.push(c.clone());
                    next
                })
            })
            .collect();
    }
    Ok(acc.into_iter().map(LiftedState).collect())
}

/// Distance from `target` to the set of values of `psi(sets, u)`.
///
/// Works blockwise, so a continuum of nearest points in any block is handled exactly.
pub fn psi_distance(sets: &[SetDescriptor], u: &LiftedState, target: &LiftedState) -> Result<f64> {
    check_collection(sets, u)?;
    if target.len() != u.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), found: target.len() });
    }
    let shifted = permute(u);
    let mut total = 0.0;
    for ((set, block), t) in sets.iter().zip(shifted.blocks()).zip(target.blocks()) {
        let d = set.project(block)?.points.distance_from(&(block + t))?;
        total += d * d;
    }
    Ok(total.sqrt())
}

/// `psi` for the gap collection of `problem`.
pub fn psi_g(problem: &TwoSetProblem, gap: &Vector, u: &LiftedState) -> Result<Vec<LiftedState>> {
    psi(&gap_collection(problem, gap)?, u)
}

/// Lifted step: apply the map to the first block and lift the result.
pub fn t_zeta_step(
    problem: &TwoSetProblem,
    zeta: &DifferenceVector,
    u: &LiftedState,
) -> Result<Vec<LiftedState>> {
    Ok(drlambda_step(problem, u.block(0))?.iter().map(|p| zeta.lift(p)).collect())
}

/// `dist(0, T_zeta(u) - u)`.
pub fn phi_zeta_residual(problem: &TwoSetProblem, zeta: &DifferenceVector, u: &LiftedState) -> Result<f64> {
    Ok(t_zeta_step(problem, zeta, u)?
        .iter()
        .map(|t| t.distance(u))
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec())
    }

    fn circle(cx: f64, cy: f64, r: f64) -> SetDescriptor {
        SetDescriptor::sphere(v(&[cx, cy]), r).unwrap()
    }

    fn separable(lambda: f64) -> TwoSetProblem {
        TwoSetProblem::new(circle(0.0, 0.0, 1.0), circle(3.0, 0.0, 1.0), lambda).unwrap()
    }

    fn assert_vec_eq(a: &Vector, b: &Vector, tol: f64) {
        assert!(a.distance(b) <= tol, "{a} != {b}");
    }

    #[test]
    fn relaxation_bounds() {
        assert!(Relaxation::new(0.0).is_err());
        assert!(Relaxation::new(1.5).is_err());
        assert!(Relaxation::new(1.0).unwrap().shift_factor().is_err());
        assert_abs_diff_eq!(Relaxation::new(0.5).unwrap().shift_factor().unwrap(), 1.0);
    }

    #[test]
    fn circle_and_point_step() {
        let problem = TwoSetProblem::new(
            circle(0.0, 0.0, 1.0),
            SetDescriptor::point(v(&[0.0, 0.0])).unwrap(),
            0.8,
        )
        .unwrap();
        let out = drlambda_step(&problem, &v(&[0.0, 2.0])).unwrap();
        assert_eq!(out.len(), 1);
        assert_vec_eq(&out[0], &v(&[0.0, 0.8]), 1e-15);
    }

    #[test]
    fn unrelaxed_step_averages_reflections() {
        let problem = separable(1.0);
        let x = v(&[1.3, 0.4]);
        let b = problem.set_b().project(&x).unwrap().points.first().unwrap().clone();
        let rb = &b.scaled(2.0) - &x;
        let a = problem.set_a().project(&rb).unwrap().points.first().unwrap().clone();
        let ra = &a.scaled(2.0) - &rb;
        let expected = (&ra + &x).scaled(0.5);
        assert_vec_eq(&drlambda_select(&problem, &x).unwrap(), &expected, 1e-15);
    }

    #[test]
    fn continuum_projection_is_an_error() {
        let problem = TwoSetProblem::new(circle(0.0, 0.0, 1.0), circle(0.0, 0.0, 2.0), 0.5).unwrap();
        assert!(matches!(
            drlambda_step(&problem, &v(&[0.0, 0.0])),
            Err(Error::DegenerateProjection)
        ));
    }

    #[test]
    fn alternating_and_cyclic_agree() {
        let problem = separable(0.5);
        let x = v(&[2.0, 0.0]);
        assert_eq!(ap_step(&problem, &x).unwrap(), vec![v(&[1.0, 0.0])]);
        let sets = [problem.set_b().clone(), problem.set_a().clone()];
        assert_eq!(cyclic_step(&sets, &x).unwrap(), vec![v(&[1.0, 0.0])]);
    }

    #[test]
    fn cyclic_projection_returns_to_cycle_start() {
        let problem = separable(0.5);
        let g = v(&[1.0, 0.0]);
        let mut sets = gap_collection(&problem, &g).unwrap();
        sets.reverse();
        let xbar = v(&[1.0, 0.0]);
        assert_eq!(cyclic_step(&sets, &xbar).unwrap(), vec![xbar]);
    }

    #[test]
    fn permutation_cycles() {
        let u = LiftedState::new(vec![v(&[1.0]), v(&[2.0]), v(&[3.0]), v(&[4.0])]).unwrap();
        let p = permute(&u);
        assert_eq!(p.blocks(), &[v(&[2.0]), v(&[3.0]), v(&[4.0]), v(&[1.0])]);
        let mut w = u.clone();
        for _ in 0..4 {
            w = permute(&w);
        }
        assert_eq!(w, u);
    }

    #[test]
    fn difference_vector_blocks() {
        let zeta = DifferenceVector::from_gap(&v(&[0.0, 0.5]), Relaxation::new(0.4).unwrap()).unwrap();
        let expected = [[0.0, 0.5], [0.0, -1.0 / 3.0], [0.0, -0.5], [0.0, 1.0 / 3.0]];
        for (b, e) in zeta.blocks().iter().zip(expected) {
            assert_vec_eq(b, &v(&e), 1e-15);
        }
        assert!(DifferenceVector::new(vec![v(&[1.0]), v(&[1.0]), v(&[0.0]), v(&[0.0])]).is_err());
    }

    #[test]
    fn cycle_maps_to_difference_vector() {
        let problem = separable(0.5);
        let g = v(&[1.0, 0.0]);
        let z = LiftedState::new(vec![v(&[1.0, 0.0]), v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[2.0, 0.0])])
            .unwrap();
        let values = psi_g(&problem, &g, &z).unwrap();
        assert_eq!(values.len(), 1);
        let zeta = DifferenceVector::from_gap(&g, problem.lambda()).unwrap();
        assert!(values[0].distance(zeta.as_lifted()) <= 1e-15);
        assert_abs_diff_eq!(
            psi_distance(&gap_collection(&problem, &g).unwrap(), &z, zeta.as_lifted()).unwrap(),
            0.0
        );
        assert_eq!(zeta.lift(&v(&[1.0, 0.0])), z);
    }

    #[test]
    fn lifted_residual_doubles_step_residual() {
        let problem = separable(0.3);
        let zeta = DifferenceVector::from_gap(&v(&[1.0, 0.0]), problem.lambda()).unwrap();
        let x = v(&[1.4, -0.2]);
        let step = drlambda_select(&problem, &x).unwrap();
        let u = zeta.lift(&x);
        assert_abs_diff_eq!(
            phi_zeta_residual(&problem, &zeta, &u).unwrap(),
            2.0 * x.distance(&step),
            epsilon = 1e-13
        );
    }
}
