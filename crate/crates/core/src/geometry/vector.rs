use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of a finite-dimensional Euclidean space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    /// Builds a vector, rejecting non-finite coordinates.
    pub fn try_new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Self(coords))
        } else {
            Err(Error::Config(format!("non-finite coordinates {coords:?}")))
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dot product of mismatched vectors");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        (self - other).norm()
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|c| c * factor).collect())
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "combination of mismatched vectors");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + factor * b).collect())
    }

    /// Unit vector in the direction of `self`, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Vector> {
        let n = self.norm();
        (n > 0.0).then(|| self.scaled(1.0 / n))
    }

    pub fn ensure_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found: self.dim() })
        }
    }

    /// Lexicographic order with `f64::total_cmp` on each coordinate.
    pub fn lex_cmp(&self, other: &Vector) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.dim().cmp(&other.dim())
    }

    pub fn concat(blocks: &[Vector]) -> Vector {
        Vector(blocks.iter().flat_map(|b| b.0.iter().copied()).collect())
    }

    /// Splits `self` into consecutive blocks of the given sizes.
    pub fn split(&self, sizes: &[usize]) -> Result<Vec<Vector>> {
        self.ensure_dim(sizes.iter().sum())?;
        let mut out = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &len in sizes {
            out.push(Vector(self.0[start..start + len].to_vec()));
            start += len;
        }
        Ok(out)
    }
}

/// Sorts points lexicographically and merges those closer than a relative tolerance.
pub(crate) fn sort_dedup(points: &mut Vec<Vector>) {
    points.sort_by(Vector::lex_cmp);
    points.dedup_by(|a, b| a.distance(b) <= 1e-12 * (1.0 + b.norm()));
}

impl From<Vec<f64>> for Vector {
    fn from(coords: Vec<f64>) -> Self {
        Self(coords)
    }
}

impl<const N: usize> From<[f64; N]> for Vector {
    fn from(coords: [f64; N]) -> Self {
        Self(coords.to_vec())
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &Vector {
    type Output = Vector;

    fn add(self, rhs: &Vector) -> Vector {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &Vector {
    type Output = Vector;

    fn sub(self, rhs: &Vector) -> Vector {
        self.add_scaled(-1.0, rhs)
    }
}

impl Mul<f64> for &Vector {
    type Output = Vector;

    fn mul(self, rhs: f64) -> Vector {
        self.scaled(rhs)
    }
}

impl Neg for &Vector {
    type Output = Vector;

    fn neg(self) -> Vector {
        self.scaled(-1.0)
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let a = Vector::from([1.0, 2.0]);
        let b = Vector::from([3.0, -1.0]);
        assert_eq!(&a + &b, Vector::from([4.0, 1.0]));
        assert_eq!(&a - &b, Vector::from([-2.0, 3.0]));
        assert_eq!(&a * 2.0, Vector::from([2.0, 4.0]));
        assert_eq!(a.dot(&b), 1.0);
        assert_eq!(Vector::from([3.0, 4.0]).norm(), 5.0);
    }

    #[test]
    fn lexicographic_order() {
        let a = Vector::from([0.0, 1.0]);
        let b = Vector::from([0.0, 2.0]);
        let c = Vector::from([-1.0, 5.0]);
        let mut v = vec![b.clone(), a.clone(), c.clone(), a.clone()];
        sort_dedup(&mut v);
        assert_eq!(v, vec![c, a, b]);
    }

    #[test]
    fn split_and_concat_roundtrip() {
        let v = Vector::from([1.0, 2.0, 3.0, 4.0, 5.0]);
        let parts = v.split(&[2, 3]).unwrap();
        assert_eq!(parts[1], Vector::from([3.0, 4.0, 5.0]));
        assert_eq!(Vector::concat(&parts), v);
        assert!(v.split(&[2, 2]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Vector::try_new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::try_new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn serializes_as_array() {
        let v = Vector::from([0.5, -1.0]);
        assert_eq!(serde_json::to_string(&v).unwrap(), "[0.5,-1.0]");
    }
}
