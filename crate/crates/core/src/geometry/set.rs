use std::slice;

use serde::{Deserialize, Serialize};

use super::vector::{sort_dedup, Vector};
use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-10;
/// Relative slack under which two branch distances of a union count as tied.
const TIE_TOL: f64 = 1e-12;

/// A closed subset of a Euclidean space with an exact projector.
///
/// `Translate { shift, inner }` is the set `inner - shift`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SetDescriptor {
    Sphere { center: Vector, radius: f64 },
    Ball { center: Vector, radius: f64 },
    /// `anchor + span(basis)` with an orthonormal basis.
    Affine { anchor: Vector, basis: Vec<Vector> },
    /// `{x : <normal, x> <= offset}`.
    Halfspace { normal: Vector, offset: f64 },
    Point { point: Vector },
    Translate { shift: Vector, inner: Box<SetDescriptor> },
    Union { members: Vec<SetDescriptor> },
    Product { factors: Vec<SetDescriptor> },
}

/// The value of a multi-valued map at a point.
#[derive(Clone, Debug, PartialEq)]
pub enum PointSet {
    Unique(Vector),
    /// At least two points, sorted lexicographically.
    Finite(Vec<Vector>),
    /// Infinitely many points, described exactly.
    Continuum(SetDescriptor),
}

/// Nearest points of a set together with the distance to it.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub points: PointSet,
    pub distance: f64,
}

impl PointSet {
    fn from_points(mut points: Vec<Vector>) -> PointSet {
        sort_dedup(&mut points);
        if points.len() == 1 {
            PointSet::Unique(points.pop().expect("one point"))
        } else {
            PointSet::Finite(points)
        }
    }

    /// The points of a finite value, or `DegenerateProjection` for a continuum.
    pub fn points(&self) -> Result<&[Vector]> {
        match self {
            PointSet::Unique(p) => Ok(slice::from_ref(p)),
            PointSet::Finite(ps) => Ok(ps),
            PointSet::Continuum(_) => Err(Error::DegenerateProjection),
        }
    }

    /// The lexicographically smallest point.
    pub fn first(&self) -> Result<&Vector> {
        Ok(&self.points()?[0])
    }

    pub fn is_continuum(&self) -> bool {
        matches!(self, PointSet::Continuum(_))
    }

    /// Exact description of the value as a set.
    pub fn to_descriptor(&self) -> SetDescriptor {
        match self {
            PointSet::Unique(p) => SetDescriptor::Point { point: p.clone() },
            PointSet::Finite(ps) => SetDescriptor::Union {
                members: ps.iter().map(|p| SetDescriptor::Point { point: p.clone() }).collect(),
            },
            PointSet::Continuum(d) => d.clone(),
        }
    }

    /// Distance from `y` to the value.
    pub fn distance_from(&self, y: &Vector) -> Result<f64> {
        match self {
            PointSet::Continuum(d) => d.distance(y),
            finite => Ok(finite
                .points()?
                .iter()
                .map(|p| p.distance(y))
                .fold(f64::INFINITY, f64::min)),
        }
    }

    fn map_finite(self, f: impl Fn(&Vector) -> Vector) -> PointSet {
        match self {
            PointSet::Unique(p) => PointSet::Unique(f(&p)),
            PointSet::Finite(ps) => PointSet::from_points(ps.iter().map(f).collect()),
            c @ PointSet::Continuum(_) => c,
        }
    }
}

impl SetDescriptor {
    pub fn sphere(center: Vector, radius: f64) -> Result<Self> {
        let set = SetDescriptor::Sphere { center, radius };
        set.validate()?;
        Ok(set)
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        let set = SetDescriptor::Ball { center, radius };
        set.validate()?;
        Ok(set)
    }

    pub fn affine(anchor: Vector, basis: Vec<Vector>) -> Result<Self> {
        let set = SetDescriptor::Affine { anchor, basis };
        set.validate()?;
        Ok(set)
    }

    pub fn halfspace(normal: Vector, offset: f64) -> Result<Self> {
        let set = SetDescriptor::Halfspace { normal, offset };
        set.validate()?;
        Ok(set)
    }

    pub fn point(point: Vector) -> Result<Self> {
        let set = SetDescriptor::Point { point };
        set.validate()?;
        Ok(set)
    }

    /// The set `inner - shift`.
    pub fn translate(inner: SetDescriptor, shift: Vector) -> Result<Self> {
        let set = SetDescriptor::Translate { shift, inner: Box::new(inner) };
        set.validate()?;
        Ok(set)
    }

    pub fn union(members: Vec<SetDescriptor>) -> Result<Self> {
        let set = SetDescriptor::Union { members };
        set.validate()?;
        Ok(set)
    }

    pub fn product(factors: Vec<SetDescriptor>) -> Result<Self> {
        let set = SetDescriptor::Product { factors };
        set.validate()?;
        Ok(set)
    }

    /// Checks the structural invariants of the whole descriptor tree.
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidSet(msg));
        let finite = |v: &Vector, what: &str| {
            if v.is_finite() && v.dim() > 0 {
                Ok(())
            } else {
                Err(Error::InvalidSet(format!("{what} must be a finite, nonempty vector")))
            }
        };
        match self {
            SetDescriptor::Sphere { center, radius } | SetDescriptor::Ball { center, radius } => {
                finite(center, "center")?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return invalid(format!("radius must be positive, got {radius}"));
                }
            }
            SetDescriptor::Affine { anchor, basis } => {
                finite(anchor, "anchor")?;
                if basis.len() > anchor.dim() {
                    return invalid("affine basis has more vectors than the dimension".into());
                }
                for (i, b) in basis.iter().enumerate() {
                    b.ensure_dim(anchor.dim())?;
                    for (j, c) in basis.iter().enumerate().skip(i) {
                        let expected = if i == j { 1.0 } else { 0.0 };
                        if (b.dot(c) - expected).abs() > ORTHONORMAL_TOL {
                            return invalid("affine basis must be orthonormal".into());
                        }
                    }
                }
            }
            SetDescriptor::Halfspace { normal, offset } => {
                finite(normal, "normal")?;
                if normal.norm() == 0.0 || !offset.is_finite() {
                    return invalid("halfspace needs a nonzero normal and finite offset".into());
                }
            }
            SetDescriptor::Point { point } => finite(point, "point")?,
            SetDescriptor::Translate { shift, inner } => {
                inner.validate()?;
                shift.ensure_dim(inner.dim())?;
                finite(shift, "shift")?;
            }
            SetDescriptor::Union { members } => {
                let Some(first) = members.first() else {
                    return invalid("union needs at least one member".into());
                };
                for m in members {
                    m.validate()?;
                    if m.dim() != first.dim() {
                        return Err(Error::DimensionMismatch { expected: first.dim(), found: m.dim() });
                    }
                }
            }
            SetDescriptor::Product { factors } => {
                if factors.is_empty() {
                    return invalid("product needs at least one factor".into());
                }
                for f in factors {
                    f.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Dimension of the ambient space.
    pub fn dim(&self) -> usize {
        match self {
            SetDescriptor::Sphere { center, .. } | SetDescriptor::Ball { center, .. } => center.dim(),
            SetDescriptor::Affine { anchor, .. } => anchor.dim(),
            SetDescriptor::Halfspace { normal, .. } => normal.dim(),
            SetDescriptor::Point { point } => point.dim(),
            SetDescriptor::Translate { inner, .. } => inner.dim(),
            SetDescriptor::Union { members } => members.first().map_or(0, SetDescriptor::dim),
            SetDescriptor::Product { factors } => factors.iter().map(SetDescriptor::dim).sum(),
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            SetDescriptor::Sphere { .. } => false,
            SetDescriptor::Ball { .. }
            | SetDescriptor::Affine { .. }
            | SetDescriptor::Halfspace { .. }
            | SetDescriptor::Point { .. } => true,
            SetDescriptor::Translate { inner, .. } => inner.is_convex(),
            SetDescriptor::Union { members } => members.len() == 1 && members[0].is_convex(),
            SetDescriptor::Product { factors } => factors.iter().all(SetDescriptor::is_convex),
        }
    }

    /// All nearest points of the set to `x`.
    pub fn project(&self, x: &Vector) -> Result<Projection> {
        x.ensure_dim(self.dim())?;
        Ok(self.project_unchecked(x))
    }

    /// All values of the reflector `2P - Id` at `x`.
    pub fn reflect(&self, x: &Vector) -> Result<PointSet> {
        let points = self.project(x)?.points;
        Ok(match points {
            PointSet::Continuum(d) => PointSet::Continuum(d.scaled_shifted(2.0, &-x)),
            finite => finite.map_finite(|p| p.add_scaled(-0.5, x).scaled(2.0)),
        })
    }

    pub fn distance(&self, x: &Vector) -> Result<f64> {
        Ok(self.project(x)?.distance)
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool> {
        Ok(self.distance(x)? <= tol)
    }

    fn project_unchecked(&self, x: &Vector) -> Projection {
        match self {
            SetDescriptor::Sphere { center, radius } => {
                let offset = x - center;
                let n = offset.norm();
                if n == 0.0 {
                    Projection { points: PointSet::Continuum(self.clone()), distance: *radius }
                } else {
                    Projection {
                        points: PointSet::Unique(center.add_scaled(radius / n, &offset)),
                        distance: (n - radius).abs(),
                    }
                }
            }
            SetDescriptor::Ball { center, radius } => {
                let offset = x - center;
                let n = offset.norm();
                if n <= *radius {
                    Projection { points: PointSet::Unique(x.clone()), distance: 0.0 }
                } else {
                    Projection {
                        points: PointSet::Unique(center.add_scaled(radius / n, &offset)),
                        distance: n - radius,
                    }
                }
            }
            SetDescriptor::Affine { anchor, basis } => {
                let offset = x - anchor;
                let p = basis
                    .iter()
                    .fold(anchor.clone(), |acc, b| acc.add_scaled(offset.dot(b), b));
                let distance = x.distance(&p);
                Projection { points: PointSet::Unique(p), distance }
            }
            SetDescriptor::Halfspace { normal, offset } => {
                let excess = normal.dot(x) - offset;
                if excess <= 0.0 {
                    Projection { points: PointSet::Unique(x.clone()), distance: 0.0 }
                } else {
                    let nn = normal.norm_squared();
                    Projection {
                        points: PointSet::Unique(x.add_scaled(-excess / nn, normal)),
                        distance: excess / nn.sqrt(),
                    }
                }
            }
            SetDescriptor::Point { point } => Projection {
                points: PointSet::Unique(point.clone()),
                distance: x.distance(point),
            },
            SetDescriptor::Translate { shift, inner } => {
                let proj = inner.project_unchecked(&(x + shift));
                let points = match proj.points {
                    PointSet::Continuum(d) => PointSet::Continuum(SetDescriptor::Translate {
                        shift: shift.clone(),
                        inner: Box::new(d),
                    }),
                    finite => finite.map_finite(|p| p - shift),
                };
                Projection { points, distance: proj.distance }
            }
            SetDescriptor::Union { members } => {
                let projections: Vec<Projection> =
                    members.iter().map(|m| m.project_unchecked(x)).collect();
                let best = projections.iter().map(|p| p.distance).fold(f64::INFINITY, f64::min);
                let winners: Vec<&Projection> = projections
                    .iter()
                    .filter(|p| p.distance <= best + TIE_TOL * (1.0 + best))
                    .collect();
                let points = if winners.iter().any(|p| p.points.is_continuum()) {
                    PointSet::Continuum(SetDescriptor::Union {
                        members: winners.iter().map(|p| p.points.to_descriptor()).collect(),
                    })
                } else {
                    PointSet::from_points(
                        winners
                            .iter()
                            .flat_map(|p| p.points.points().expect("finite branch").to_vec())
                            .collect(),
                    )
                };
                Projection { points, distance: best }
            }
            SetDescriptor::Product { factors } => {
                let sizes: Vec<usize> = factors.iter().map(SetDescriptor::dim).collect();
                let blocks = x.split(&sizes).expect("dimension checked by caller");
                let parts: Vec<Projection> = factors
                    .iter()
                    .zip(&blocks)
                    .map(|(f, b)| f.project_unchecked(b))
                    .collect();
                let distance = parts.iter().map(|p| p.distance * p.distance).sum::<f64>().sqrt();
                let points = if parts.iter().any(|p| p.points.is_continuum()) {
                    PointSet::Continuum(SetDescriptor::Product {
                        factors: parts.iter().map(|p| p.points.to_descriptor()).collect(),
                    })
                } else {
                    let lists: Vec<&[Vector]> =
                        parts.iter().map(|p| p.points.points().expect("finite factor")).collect();
                    PointSet::from_points(cartesian(&lists))
                };
                Projection { points, distance }
            }
        }
    }

    /// The image `{scale * p + offset : p in self}` for `scale > 0`.
    pub fn scaled_shifted(&self, scale: f64, offset: &Vector) -> SetDescriptor {
        match self {
            SetDescriptor::Sphere { center, radius } => SetDescriptor::Sphere {
                center: offset.add_scaled(scale, center),
                radius: scale * radius,
            },
            SetDescriptor::Ball { center, radius } => SetDescriptor::Ball {
                center: offset.add_scaled(scale, center),
                radius: scale * radius,
            },
            SetDescriptor::Affine { anchor, basis } => SetDescriptor::Affine {
                anchor: offset.add_scaled(scale, anchor),
                basis: basis.clone(),
            },
            SetDescriptor::Halfspace { normal, offset: level } => SetDescriptor::Halfspace {
                normal: normal.clone(),
                offset: scale * level + normal.dot(offset),
            },
            SetDescriptor::Point { point } => SetDescriptor::Point {
                point: offset.add_scaled(scale, point),
            },
            SetDescriptor::Translate { shift, inner } => {
                inner.scaled_shifted(scale, &offset.add_scaled(-scale, shift))
            }
            SetDescriptor::Union { members } => SetDescriptor::Union {
                members: members.iter().map(|m| m.scaled_shifted(scale, offset)).collect(),
            },
            SetDescriptor::Product { factors } => {
                let sizes: Vec<usize> = factors.iter().map(SetDescriptor::dim).collect();
                let blocks = offset.split(&sizes).expect("offset matches product dimension");
                SetDescriptor::Product {
                    factors: factors
                        .iter()
                        .zip(&blocks)
                        .map(|(f, o)| f.scaled_shifted(scale, o))
                        .collect(),
                }
            }
        }
    }
}

fn cartesian(lists: &[&[Vector]]) -> Vec<Vector> {
    let mut acc: Vec<Vec<Vector>> = vec![Vec::new()];
    for list in lists {
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                list.iter().map(move |p| {
                    let mut next = prefix.clone();
                    next.push(p.clone());
                    next
                })
            })
            .collect();
    }
    acc.iter().map(|blocks| Vector::concat(blocks)).collect()
}

pub fn project(set: &SetDescriptor, x: &Vector) -> Result<Projection> {
    set.project(x)
}

pub fn reflect(set: &SetDescriptor, x: &Vector) -> Result<PointSet> {
    set.reflect(x)
}

pub fn distance(set: &SetDescriptor, x: &Vector) -> Result<f64> {
    set.distance(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec())
    }

    fn unit_circle() -> SetDescriptor {
        SetDescriptor::sphere(v(&[0.0, 0.0]), 1.0).unwrap()
    }

    #[test]
    fn circle_projection_and_distance() {
        let p = unit_circle().project(&v(&[0.5, 0.0])).unwrap();
        assert_eq!(p.points, PointSet::Unique(v(&[1.0, 0.0])));
        assert_abs_diff_eq!(p.distance, 0.5);
    }

    #[test]
    fn circle_reflection() {
        let r = unit_circle().reflect(&v(&[2.0, 0.0])).unwrap();
        assert_eq!(r, PointSet::Unique(v(&[0.0, 0.0])));
    }

    #[test]
    fn circle_center_is_continuum() {
        let p = unit_circle().project(&v(&[0.0, 0.0])).unwrap();
        assert_eq!(p.points, PointSet::Continuum(unit_circle()));
        assert_eq!(p.distance, 1.0);
        assert!(matches!(p.points.points(), Err(Error::DegenerateProjection)));
        let r = unit_circle().reflect(&v(&[0.0, 0.0])).unwrap();
        assert_eq!(r, PointSet::Continuum(SetDescriptor::sphere(v(&[0.0, 0.0]), 2.0).unwrap()));
    }

    #[test]
    fn two_point_union_reports_both_sorted() {
        let u = SetDescriptor::union(vec![
            SetDescriptor::point(v(&[1.0, 0.0])).unwrap(),
            SetDescriptor::point(v(&[-1.0, 0.0])).unwrap(),
        ])
        .unwrap();
        let p = u.project(&v(&[0.0, 3.0])).unwrap();
        assert_eq!(p.points, PointSet::Finite(vec![v(&[-1.0, 0.0]), v(&[1.0, 0.0])]));
        let near = u.project(&v(&[0.2, 0.0])).unwrap();
        assert_eq!(near.points, PointSet::Unique(v(&[1.0, 0.0])));
    }

    #[test]
    fn translate_shifts_projection() {
        let t = SetDescriptor::translate(unit_circle(), v(&[1.0, 0.0])).unwrap();
        let p = t.project(&v(&[-0.5, 0.0])).unwrap();
        assert_eq!(p.points, PointSet::Unique(v(&[0.0, 0.0])));
        assert_abs_diff_eq!(p.distance, 0.5);
        let c = t.project(&v(&[-1.0, 0.0])).unwrap();
        assert!(c.points.is_continuum());
        assert_abs_diff_eq!(c.points.distance_from(&v(&[0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn convex_pieces() {
        let ball = SetDescriptor::ball(v(&[3.0, 0.0]), 1.0).unwrap();
        assert_eq!(ball.project(&v(&[3.5, 0.0])).unwrap().distance, 0.0);
        assert_eq!(ball.project(&v(&[0.0, 0.0])).unwrap().points, PointSet::Unique(v(&[2.0, 0.0])));

        let line = SetDescriptor::affine(v(&[0.0, 0.75]), vec![v(&[1.0, 0.0])]).unwrap();
        let p = line.project(&v(&[2.0, -1.0])).unwrap();
        assert_eq!(p.points, PointSet::Unique(v(&[2.0, 0.75])));
        assert_abs_diff_eq!(p.distance, 1.75);

        let half = SetDescriptor::halfspace(v(&[0.0, 2.0]), 2.0).unwrap();
        let p = half.project(&v(&[1.0, 3.0])).unwrap();
        assert_eq!(p.points, PointSet::Unique(v(&[1.0, 1.0])));
        assert_abs_diff_eq!(p.distance, 2.0);
    }

    #[test]
    fn product_projects_blockwise() {
        let prod = SetDescriptor::product(vec![
            unit_circle(),
            SetDescriptor::point(v(&[5.0, 5.0])).unwrap(),
        ])
        .unwrap();
        assert_eq!(prod.dim(), 4);
        let p = prod.project(&v(&[2.0, 0.0, 5.0, 6.0])).unwrap();
        assert_eq!(p.points, PointSet::Unique(v(&[1.0, 0.0, 5.0, 5.0])));
        assert_abs_diff_eq!(p.distance, 2f64.sqrt());
        let c = prod.project(&v(&[0.0, 0.0, 5.0, 6.0])).unwrap();
        assert!(c.points.is_continuum());
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(SetDescriptor::sphere(v(&[0.0]), -1.0).is_err());
        assert!(SetDescriptor::affine(v(&[0.0, 0.0]), vec![v(&[1.0, 1.0])]).is_err());
        assert!(SetDescriptor::union(vec![]).is_err());
        assert!(unit_circle().project(&v(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn json_shape() {
        let json = r#"{"type":"translate","shift":[1.0,0.0],"inner":{"type":"sphere","center":[0,0],"radius":1.0}}"#;
        let set: SetDescriptor = serde_json::from_str(json).unwrap();
        set.validate().unwrap();
        assert_eq!(set, SetDescriptor::translate(unit_circle(), v(&[1.0, 0.0])).unwrap());
        let back = serde_json::to_value(&set).unwrap();
        assert_eq!(back["type"], "translate");
        assert_eq!(back["inner"]["type"], "sphere");
    }
}
