//! Points, angles, projections and cones on the unit hypersphere S^{d-1}.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms at or below this are treated as a vanished vector.
pub const MIN_NORM: f64 = 1e-12;

/// A direction in R^d with Euclidean norm 1, d >= 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `coords`; fails on near-zero input or d < 2.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidDimension(coords.len()));
        }
        let n = norm(&coords);
        if !(n > MIN_NORM) || !n.is_finite() {
            return Err(Error::DegenerateVector { norm: n });
        }
        let mut coords = coords;
        coords.iter_mut().for_each(|c| *c /= n);
        Ok(Self(coords))
    }

    /// The i-th standard basis vector of R^d.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if i >= d {
            return Err(Error::IndexOutOfRange { index: i, len: d });
        }
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Ok(Self(v))
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

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }

    /// The antipodal point.
    pub fn antipode(&self) -> UnitVector {
        UnitVector(self.0.iter().map(|c| -c).collect())
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() == d {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: d,
            })
        }
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        UnitVector::new(v)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(u: UnitVector) -> Self {
        u.0
    }
}

/// Class region {z : angle(z, axis) <= theta}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypercone {
    pub axis: UnitVector,
    theta: f64,
}

impl Hypercone {
    pub fn new(axis: UnitVector, theta: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::param("theta", format!("{theta} not in [0, pi]")));
        }
        Ok(Self { axis, theta })
    }

    /// The cone covering the whole sphere.
    pub fn full(axis: UnitVector) -> Self {
        Self { axis, theta: PI }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.axis.dim()
    }

    pub fn is_full(&self) -> bool {
        self.theta >= PI
    }

    pub fn contains(&self, x: &UnitVector) -> Result<bool> {
        in_hypercone(x, self)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        })
    }
}

/// Radial projection v / |v|.
pub fn project_to_sphere(v: &[f64]) -> Result<UnitVector> {
    UnitVector::new(v.to_vec())
}

/// arccos of the clamped inner product, in [0, pi].
pub fn geodesic_angle(a: &UnitVector, b: &UnitVector) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    Ok(clamped_acos(a.dot(b)))
}

pub fn clamped_acos(c: f64) -> f64 {
    c.clamp(-1.0, 1.0).acos()
}

/// (I - x x^T) v: the component of `v` tangent to the sphere at `x`.
pub fn tangent_project(x: &UnitVector, v: &[f64]) -> Result<Vec<f64>> {
    same_dim(x.dim(), v.len())?;
    let c = dot(x.as_slice(), v);
    Ok(v.iter().zip(x.as_slice()).map(|(vi, xi)| vi - c * xi).collect())
}

/// Closed-boundary membership: angle(x, axis) <= theta.
pub fn in_hypercone(x: &UnitVector, cone: &Hypercone) -> Result<bool> {
    let angle = geodesic_angle(x, &cone.axis)?;
    Ok(cone.is_full() || angle <= cone.theta)
}

/// Normalized arithmetic mean of the points (maximum-likelihood vMF mean direction).
pub fn spherical_mean(points: &[UnitVector]) -> Result<UnitVector> {
    let first = points.first().ok_or(Error::EmptyInput)?;
    let d = first.dim();
    let mut sum = vec![0.0; d];
    for p in points {
        same_dim(d, p.dim())?;
        sum.iter_mut().zip(p.as_slice()).for_each(|(s, x)| *s += x);
    }
    let resultant = norm(&sum) / points.len() as f64;
    if resultant <= 1e-9 {
        return Err(Error::DegenerateMean { norm: resultant });
    }
    UnitVector::new(sum)
}

/// Draws a direction uniformly from S^{d-1} by normalizing a standard Gaussian.
pub fn uniform_sphere_sample<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<UnitVector> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = UnitVector::new(g) {
            return Ok(u);
        }
    }
}

/// A uniformly random unit vector orthogonal to `x`.
pub(crate) fn uniform_tangent_direction<R: Rng + ?Sized>(rng: &mut R, x: &UnitVector) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..x.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let t = tangent_project(x, &g).expect("same dimension");
        let n = norm(&t);
        if n > 1e-8 {
            return t.into_iter().map(|c| c / n).collect();
        }
    }
}

/// cos(w) * mu + sin(w) * v for unit `v` orthogonal to `mu`, given w's cosine and sine.
pub(crate) fn compose(mu: &UnitVector, cos_w: f64, sin_w: f64, tangent: &[f64]) -> UnitVector {
    let coords: Vec<f64> = mu
        .as_slice()
        .iter()
        .zip(tangent)
        .map(|(m, t)| cos_w * m + sin_w * t)
        .collect();
    UnitVector::new(coords).expect("composition of orthonormal pair has unit norm")
}
