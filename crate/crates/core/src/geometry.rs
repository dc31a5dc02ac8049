//! Small 3D helpers shared by the guard, contact and clearance code.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

/// A straight 3D segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point3<f64>,
    pub b: Point3<f64>,
}

impl Segment {
    pub fn new(a: Point3<f64>, b: Point3<f64>) -> Self {
        Self { a, b }
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.a + (self.b - self.a) * t
    }

    /// Parameter in `[0, 1]` of the point closest to `p`.
    pub fn closest_parameter(&self, p: &Point3<f64>) -> f64 {
        let d = self.b - self.a;
        let len2 = d.norm_squared();
        if len2 == 0.0 {
            return 0.0;
        }
        ((p - self.a).dot(&d) / len2).clamp(0.0, 1.0)
    }

    pub fn distance_to(&self, p: &Point3<f64>) -> f64 {
        (self.at(self.closest_parameter(p)) - p).norm()
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self::new(self.a + offset, self.b + offset)
    }
}

/// A flat spinning-propeller disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropellerDisc {
    pub center: Point3<f64>,
    pub radius: f64,
    /// Unit normal of the disc plane.
    pub normal: Vector3<f64>,
}

impl PropellerDisc {
    pub fn horizontal(center: Point3<f64>, radius: f64) -> Self {
        Self {
            center,
            radius,
            normal: Vector3::z(),
        }
    }

    /// `count` points evenly spaced around the rim.
    pub fn rim_points(&self, count: usize) -> Vec<Point3<f64>> {
        let (u, v) = plane_basis(&self.normal);
        (0..count)
            .map(|k| {
                let phi = std::f64::consts::TAU * k as f64 / count as f64;
                self.center + (u * phi.cos() + v * phi.sin()) * self.radius
            })
            .collect()
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            center: self.center + offset,
            ..*self
        }
    }
}

/// Two unit vectors spanning the plane orthogonal to `normal`.
pub fn plane_basis(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let n = normal.normalize();
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Minimum distance from any of `points` to any of `segments`.
pub fn min_distance(points: &[Point3<f64>], segments: &[Segment]) -> f64 {
    let mut best = f64::INFINITY;
    for p in points {
        for s in segments {
            best = best.min(s.distance_to(p));
        }
    }
    best
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iterations: usize) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut m1 = hi - phi * (hi - lo);
    let mut m2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(m1), f(m2));
    for _ in 0..iterations {
        if f1 < f2 {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - phi * (hi - lo);
            f1 = f(m1);
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + phi * (hi - lo);
            f2 = f(m2);
        }
    }
    let candidates = [(lo, f(lo)), (hi, f(hi)), (m1, f1), (m2, f2)];
    candidates
        .into_iter()
        .fold((lo, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}
