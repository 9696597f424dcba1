//! The scenario catalog.
//!
//! Circles are one-dimensional spheres in the plane. In every scenario `A`
//! is the set projected onto second and `B` the set projected onto first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SetDescriptor, Vector};
use crate::operators::{Relaxation, TwoSetProblem};

/// A fixed point of the relaxed map, possibly moving with the parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FixedPointFamily {
    /// A point of `A ∩ B`, fixed for every parameter.
    Point { point: Vector },
    /// The point `f - s (f - e)` for a shadow `f` in `B` and `e = P_A f`.
    Gap { f: Vector, e: Vector },
    /// The circle of radius `outer - s (outer - inner)` about `center`.
    Ring { center: Vector, inner: f64, outer: f64 },
}

impl FixedPointFamily {
    /// The fixed points of the family at `lambda`, as a set.
    pub fn at(&self, lambda: Relaxation) -> Result<SetDescriptor> {
        match self {
            FixedPointFamily::Point { point } => SetDescriptor::point(point.clone()),
            FixedPointFamily::Gap { f, e } => {
                let s = lambda.shift_factor()?;
                SetDescriptor::point(f.add_scaled(-s, &(f - e)))
            }
            FixedPointFamily::Ring { center, inner, outer } => {
                let s = lambda.shift_factor()?;
                SetDescriptor::sphere(center.clone(), outer - s * (outer - inner))
            }
        }
    }
}

/// Parameters for which the closed-form data of a scenario are valid:
/// `min <= lambda < max`, with `lambda = 1` allowed when `max >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaRange {
    pub min: f64,
    pub max: f64,
}

impl Default for LambdaRange {
    fn default() -> Self {
        Self { min: 0.0, max: 1.0 }
    }
}

impl LambdaRange {
    pub fn contains(&self, lambda: f64) -> bool {
        lambda > 0.0 && lambda >= self.min && (lambda < self.max || (self.max >= 1.0 && lambda <= 1.0))
    }
}

/// Closed-form constants known for a scenario.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KnownBounds {
    /// Lower bound on the squared lifted subregularity constant at parameter 1/2.
    #[serde(default)]
    pub kappa_squared: Option<f64>,
    /// Linear regularity constant of the pair at the reference point.
    #[serde(default)]
    pub kappa_prime: Option<f64>,
}

fn default_true() -> bool {
    true
}

/// A named pair of sets with the facts known about it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub set_a: SetDescriptor,
    pub set_b: SetDescriptor,
    /// Fixed points known in closed form.
    #[serde(default)]
    pub fixed_points: Vec<FixedPointFamily>,
    /// Whether `fixed_points` lists every fixed point. An empty complete list
    /// means the map has no fixed points.
    #[serde(default)]
    pub fixed_set_complete: bool,
    /// The fixed point around which regularity is estimated.
    #[serde(default)]
    pub reference: Option<FixedPointFamily>,
    /// `A ∩ B` when it is nonempty and known.
    #[serde(default)]
    pub intersection: Option<SetDescriptor>,
    #[serde(default)]
    pub lambda_range: LambdaRange,
    #[serde(default)]
    pub bounds: KnownBounds,
    /// Start points for multistart runs.
    pub seeds: Vec<Vector>,
    #[serde(default = "default_true")]
    pub expect_linear_convergence: bool,
    /// Whether the assumptions of the linear convergence theorem are known to
    /// hold near the reference point, so that a rate verdict is meaningful.
    #[serde(default)]
    pub rate_hypotheses_hold: bool,
}

/// What is known in closed form about the fixed set at a given parameter.
#[derive(Clone, Debug, PartialEq)]
pub enum KnownFixedSet {
    Unknown,
    Empty,
    /// A subset of the fixed set, or all of it when `complete`.
    Points { set: SetDescriptor, complete: bool },
}

/// A reference fixed point and its gap at a given parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferencePoint {
    pub xbar: Vector,
    pub gap: Vector,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.set_a.validate()?;
        self.set_b.validate()?;
        if self.set_a.dim() != self.set_b.dim() {
            return Err(Error::DimensionMismatch { expected: self.set_a.dim(), found: self.set_b.dim() });
        }
        for seed in &self.seeds {
            seed.ensure_dim(self.set_a.dim())?;
        }
        Ok(())
    }

    pub fn problem(&self, lambda: f64) -> Result<TwoSetProblem> {
        TwoSetProblem::new(self.set_a.clone(), self.set_b.clone(), lambda)
    }

    pub fn check_lambda(&self, lambda: f64) -> Result<Relaxation> {
        let relaxation = Relaxation::new(lambda)?;
        if self.lambda_range.contains(lambda) {
            Ok(relaxation)
        } else {
            Err(Error::InvalidLambda { value: lambda, reason: "outside the scenario's parameter range" })
        }
    }

    pub fn known_fixed_set(&self, lambda: f64) -> Result<KnownFixedSet> {
        let relaxation = self.check_lambda(lambda)?;
        if self.fixed_points.is_empty() {
            return Ok(if self.fixed_set_complete { KnownFixedSet::Empty } else { KnownFixedSet::Unknown });
        }
        if relaxation.value() >= 1.0 && self.fixed_points.iter().any(|f| !matches!(f, FixedPointFamily::Point { .. })) {
            return Ok(KnownFixedSet::Unknown);
        }
        let members = self
            .fixed_points
            .iter()
            .map(|f| f.at(relaxation))
            .collect::<Result<Vec<_>>>()?;
        Ok(KnownFixedSet::Points { set: SetDescriptor::union(members)?, complete: self.fixed_set_complete })
    }

    /// The reference fixed point and its gap, if the scenario has one and
    /// `lambda < 1`.
    pub fn reference_point(&self, lambda: f64) -> Result<Option<ReferencePoint>> {
        let relaxation = self.check_lambda(lambda)?;
        let Some(reference) = &self.reference else { return Ok(None) };
        if relaxation.value() >= 1.0 {
            return Ok(None);
        }
        let s = relaxation.shift_factor()?;
        Ok(Some(match reference {
            FixedPointFamily::Point { point } => {
                ReferencePoint { xbar: point.clone(), gap: Vector::zeros(point.dim()) }
            }
            FixedPointFamily::Gap { f, e } => {
                let gap = f - e;
                ReferencePoint { xbar: f.add_scaled(-s, &gap), gap }
            }
            FixedPointFamily::Ring { .. } => {
                return Err(Error::Config("a reference point must be a single point".into()))
            }
        }))
    }
}

fn v(x: f64, y: f64) -> Vector {
    Vector::from([x, y])
}

fn circle(cx: f64, cy: f64, r: f64) -> Result<SetDescriptor> {
    SetDescriptor::sphere(v(cx, cy), r)
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("radius must be positive, got {r}")))
    }
}

/// Unit circle and the circle of radius `r` about `(0, a)`, which meet in two points.
pub fn two_intersecting_circles(a: f64, r: f64) -> Result<Scenario> {
    check_radius(r)?;
    let d = a.abs();
    if !(d > 0.0 && d < 1.0 + r && d > (r - 1.0).abs()) {
        return Err(Error::Config("the circles must cross in two points".into()));
    }
    let y = (1.0 - r * r + a * a) / (2.0 * a);
    let x = (1.0 - y * y).sqrt();
    let left = SetDescriptor::point(v(-x, y))?;
    let right = SetDescriptor::point(v(x, y))?;
    let kappa_prime = 1.0 / ((d - 1.0).abs() * (1.0 - r / (d + 1.0)));
    Ok(Scenario {
        name: "two-intersecting-circles".into(),
        description: format!("unit circle and circle of radius {r} about (0, {a})"),
        set_a: circle(0.0, 0.0, 1.0)?,
        set_b: circle(0.0, a, r)?,
        fixed_points: vec![
            FixedPointFamily::Point { point: v(-x, y) },
            FixedPointFamily::Point { point: v(x, y) },
        ],
        fixed_set_complete: false,
        reference: Some(FixedPointFamily::Point { point: v(x, y) }),
        intersection: Some(SetDescriptor::union(vec![left, right])?),
        lambda_range: LambdaRange::default(),
        bounds: KnownBounds {
            kappa_squared: None,
            kappa_prime: (d > 1.0 && d + 1.0 > r).then_some(kappa_prime),
        },
        seeds: vec![v(0.5, -0.5), v(-0.5, -0.5), v(0.8, -0.9), v(-0.7, -0.6), v(0.3, -0.8), v(-0.4, -0.9)],
        expect_linear_convergence: true,
        rate_hypotheses_hold: true,
    })
}

/// Unit circle and a disjoint circle of radius `r` on the positive x-axis.
pub fn separable_circles(r: f64) -> Result<Scenario> {
    check_radius(r)?;
    let f = v(2.0, 0.0);
    let e = v(1.0, 0.0);
    Ok(Scenario {
        name: "separable-circles".into(),
        description: format!("unit circle and circle of radius {r} about ({}, 0)", 2.0 + r),
        set_a: circle(0.0, 0.0, 1.0)?,
        set_b: circle(2.0 + r, 0.0, r)?,
        fixed_points: vec![FixedPointFamily::Gap { f: f.clone(), e: e.clone() }],
        fixed_set_complete: false,
        reference: Some(FixedPointFamily::Gap { f, e }),
        intersection: None,
        lambda_range: LambdaRange::default(),
        bounds: KnownBounds {
            kappa_squared: Some(8.0 * (r * r + 2.0 * r + 1.0) / (r * r + 2.0 * r + 5.0)),
            kappa_prime: None,
        },
        seeds: vec![v(1.2, 0.3), v(0.8, -0.2), v(1.5, 0.1), v(1.1, -0.4)],
        expect_linear_convergence: true,
        rate_hypotheses_hold: true,
    })
}

/// Unit circle inside a larger circle of radius `2 + r` touching neither.
pub fn nonseparable_nonconcentric(r: f64) -> Result<Scenario> {
    check_radius(r)?;
    let f = v(0.0, 1.5);
    let e = v(0.0, 1.0);
    Ok(Scenario {
        name: "nonseparable-nonconcentric".into(),
        description: format!("unit circle inside the circle of radius {} about (0, {})", 2.0 + r, -0.5 - r),
        set_a: circle(0.0, 0.0, 1.0)?,
        set_b: circle(0.0, -0.5 - r, 2.0 + r)?,
        fixed_points: vec![FixedPointFamily::Gap { f: f.clone(), e: e.clone() }],
        fixed_set_complete: false,
        reference: Some(FixedPointFamily::Gap { f, e }),
        intersection: None,
        lambda_range: LambdaRange { min: 0.0, max: 2.0 / 3.0 },
        bounds: KnownBounds {
            kappa_squared: Some(9.0 * (4.0 * r * r + 12.0 * r + 9.0) / (2.0 * r * r + 6.0 * r + 9.0)),
            kappa_prime: None,
        },
        seeds: vec![v(0.1, 1.2), v(-0.2, 1.0), v(0.15, 1.35)],
        expect_linear_convergence: true,
        rate_hypotheses_hold: true,
    })
}

/// Unit circle and a concentric circle of radius `r > 1`. Fixed points form a circle.
pub fn concentric(r: f64) -> Result<Scenario> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::Config(format!("outer radius must exceed 1, got {r}")));
    }
    let lambda_max = r / (2.0 * r - 1.0);
    Ok(Scenario {
        name: "concentric".into(),
        description: format!("unit circle and concentric circle of radius {r}"),
        set_a: circle(0.0, 0.0, 1.0)?,
        set_b: circle(0.0, 0.0, r)?,
        fixed_points: vec![FixedPointFamily::Ring { center: v(0.0, 0.0), inner: 1.0, outer: r }],
        fixed_set_complete: false,
        reference: Some(FixedPointFamily::Gap { f: v(0.0, r), e: v(0.0, 1.0) }),
        intersection: None,
        lambda_range: LambdaRange { min: 0.0, max: lambda_max },
        bounds: KnownBounds {
            kappa_squared: Some(2.0 * r * r / (r.powi(4) - 2.0 * r.powi(3) + 2.0 * r * r - 2.0 * r + 1.0)),
            kappa_prime: None,
        },
        seeds: vec![v(0.1, 1.2), v(-0.3, 1.1), v(0.7, 0.9)],
        expect_linear_convergence: true,
        rate_hypotheses_hold: false,
    })
}

/// Unit circle and a circle of radius `r` touching it at `(1, 0)`.
pub fn tangential_circles(r: f64) -> Result<Scenario> {
    check_radius(r)?;
    Ok(Scenario {
        name: "tangential-circles".into(),
        description: format!("unit circle and circle of radius {r} tangent at (1, 0)"),
        set_a: circle(0.0, 0.0, 1.0)?,
        set_b: circle(1.0 + r, 0.0, r)?,
        fixed_points: vec![FixedPointFamily::Point { point: v(1.0, 0.0) }],
        fixed_set_complete: false,
        reference: Some(FixedPointFamily::Point { point: v(1.0, 0.0) }),
        intersection: Some(SetDescriptor::point(v(1.0, 0.0))?),
        lambda_range: LambdaRange::default(),
        bounds: KnownBounds::default(),
        seeds: vec![v(1.1, 0.3), v(0.9, -0.25), v(1.05, 0.15)],
        expect_linear_convergence: false,
        rate_hypotheses_hold: false,
    })
}

/// Unit circle and its center. The relaxed map has no fixed points.
pub fn circle_point() -> Result<Scenario> {
    Ok(Scenario {
        name: "circle-point".into(),
        description: "unit circle and the single point at its center".into(),
        set_a: circle(0.0, 0.0, 1.0)?,
        set_b: SetDescriptor::point(v(0.0, 0.0))?,
        fixed_points: Vec::new(),
        fixed_set_complete: true,
        reference: None,
        intersection: None,
        lambda_range: LambdaRange { min: 0.0, max: 1.0 },
        bounds: KnownBounds::default(),
        seeds: circle_point_seeds(20),
        expect_linear_convergence: false,
        rate_hypotheses_hold: false,
    })
}

/// Deterministic start points spread over an annulus around the origin.
fn circle_point_seeds(count: usize) -> Vec<Vector> {
    (0..count)
        .map(|i| {
            let angle = 0.3 + i as f64 * std::f64::consts::TAU / count as f64;
            let radius = 0.2 + 2.8 * (i as f64 + 0.5) / count as f64;
            v(radius * angle.cos(), radius * angle.sin())
        })
        .collect()
}

/// Two disjoint unit disks.
pub fn two_balls() -> Result<Scenario> {
    let f = v(2.0, 0.0);
    let e = v(1.0, 0.0);
    Ok(Scenario {
        name: "two-balls".into(),
        description: "unit disks about (0, 0) and (3, 0)".into(),
        set_a: SetDescriptor::ball(v(0.0, 0.0), 1.0)?,
        set_b: SetDescriptor::ball(v(3.0, 0.0), 1.0)?,
        fixed_points: vec![FixedPointFamily::Gap { f: f.clone(), e: e.clone() }],
        fixed_set_complete: true,
        reference: Some(FixedPointFamily::Gap { f, e }),
        intersection: None,
        lambda_range: LambdaRange::default(),
        bounds: KnownBounds::default(),
        seeds: vec![v(1.5, 0.5), v(0.5, -0.7), v(2.5, 1.0)],
        expect_linear_convergence: true,
        rate_hypotheses_hold: true,
    })
}

/// The horizontal line through `(0, 3/4)` and the unit circle.
///
/// Besides the two crossing points there is a fixed point on the y-axis whose
/// shadow `(0, 1)` is not a nearest point of the circle to the line.
pub fn line_circle() -> Result<Scenario> {
    let y = 0.75;
    let x = (1.0f64 - y * y).sqrt();
    Ok(Scenario {
        name: "line-circle".into(),
        description: "horizontal line through (0, 3/4) and the unit circle".into(),
        set_a: SetDescriptor::affine(v(0.0, y), vec![v(1.0, 0.0)])?,
        set_b: circle(0.0, 0.0, 1.0)?,
        fixed_points: vec![
            FixedPointFamily::Point { point: v(-x, y) },
            FixedPointFamily::Point { point: v(x, y) },
            FixedPointFamily::Gap { f: v(0.0, 1.0), e: v(0.0, y) },
        ],
        fixed_set_complete: false,
        reference: Some(FixedPointFamily::Gap { f: v(0.0, 1.0), e: v(0.0, y) }),
        intersection: Some(SetDescriptor::union(vec![
            SetDescriptor::point(v(-x, y))?,
            SetDescriptor::point(v(x, y))?,
        ])?),
        lambda_range: LambdaRange { min: 0.0, max: 0.8 },
        bounds: KnownBounds::default(),
        seeds: vec![v(0.1, 0.8), v(-0.2, 0.6), v(0.05, 0.7)],
        expect_linear_convergence: true,
        rate_hypotheses_hold: false,
    })
}

pub const BUILTIN_NAMES: [&str; 8] = [
    "two-intersecting-circles",
    "separable-circles",
    "nonseparable-nonconcentric",
    "concentric",
    "tangential-circles",
    "circle-point",
    "two-balls",
    "line-circle",
];

/// A built-in scenario with its default parameters.
pub fn builtin(name: &str) -> Result<Scenario> {
    match name {
        "two-intersecting-circles" => two_intersecting_circles(-1.5, 1.0),
        "separable-circles" => separable_circles(1.0),
        "nonseparable-nonconcentric" => nonseparable_nonconcentric(1.0),
        "concentric" => concentric(2.0),
        "tangential-circles" => tangential_circles(1.0),
        "circle-point" => circle_point(),
        "two-balls" => two_balls(),
        "line-circle" => line_circle(),
        other => Err(Error::UnknownScenario(other.into())),
    }
}

pub fn builtins() -> Result<Vec<Scenario>> {
    BUILTIN_NAMES.iter().map(|n| builtin(n)).collect()
}

/// A built-in name, or a path to a scenario in JSON.
pub fn load(name_or_path: &str) -> Result<Scenario> {
    match builtin(name_or_path) {
        Err(Error::UnknownScenario(_)) => {
            let path = std::path::Path::new(name_or_path);
            if !path.exists() {
                return Err(Error::UnknownScenario(name_or_path.into()));
            }
            let scenario: Scenario = serde_json::from_reader(std::fs::File::open(path)?)?;
            scenario.validate()?;
            Ok(scenario)
        }
        found => found,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::characterize_fixed_point;

    #[test]
    fn catalog_is_valid() {
        for s in builtins().unwrap() {
            s.validate().unwrap();
            assert!(BUILTIN_NAMES.contains(&s.name.as_str()));
        }
        assert!(matches!(builtin("nope"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn intersecting_circles_data() {
        let s = two_intersecting_circles(-1.5, 1.0).unwrap();
        assert!((s.bounds.kappa_prime.unwrap() - 10.0 / 3.0).abs() < 1e-12);
        let p = s.problem(0.5).unwrap();
        let point = v((1.0f64 - 0.5625).sqrt(), -0.75);
        assert!(p.set_a().contains(&point, 1e-12).unwrap());
        assert!(p.set_b().contains(&point, 1e-12).unwrap());
    }

    #[test]
    fn closed_form_bounds() {
        assert!((separable_circles(1.0).unwrap().bounds.kappa_squared.unwrap() - 4.0).abs() < 1e-12);
        assert!(
            (nonseparable_nonconcentric(1.0).unwrap().bounds.kappa_squared.unwrap() - 225.0 / 17.0).abs() < 1e-12
        );
        assert!((concentric(2.0).unwrap().bounds.kappa_squared.unwrap() - 1.6).abs() < 1e-12);
    }

    #[test]
    fn reference_points_are_fixed() {
        for name in ["separable-circles", "nonseparable-nonconcentric", "concentric", "two-balls", "line-circle"] {
            let s = builtin(name).unwrap();
            for lambda in [0.2, 0.5] {
                let r = s.reference_point(lambda).unwrap().unwrap();
                let cert = characterize_fixed_point(&s.problem(lambda).unwrap(), &r.xbar, 1e-12).unwrap();
                assert!(cert.g.distance(&r.gap) < 1e-12, "{name} at {lambda}");
            }
        }
    }

    #[test]
    fn lambda_range_is_enforced() {
        let s = nonseparable_nonconcentric(1.0).unwrap();
        assert!(s.check_lambda(0.7).is_err());
        assert!(s.check_lambda(0.5).is_ok());
        assert!(separable_circles(1.0).unwrap().check_lambda(1.0).is_ok());
    }

    #[test]
    fn json_roundtrip() {
        let s = separable_circles(1.0).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
