//! When to expand the guard, and what happens when it touches something.

mod contact;
mod policy;

pub use contact::{
    bump_hints, contact_force, local_capacity, propeller_contacts, resolve_contacts, BumpHint, ContactEvent, GuardIntegrity,
    PropellerContact, CONTACT_DEDUP_DISTANCE,
};
pub use policy::{freefall_detect, nearest_clearance, proximity_policy, AccelSample, FreefallMonitor, ProximityDecision, ProximityLatch};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{golden_min, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Sphere { center: Point3<f64>, radius: f64 },
    Plane { point: Point3<f64>, normal: Vector3<f64> },
    Box { center: Point3<f64>, half_extents: Vector3<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleTag {
    Human,
    Structure,
    Ground,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub shape: Shape,
    pub tag: ObstacleTag,
}

impl Obstacle {
    pub fn new(shape: Shape, tag: ObstacleTag) -> Self {
        Self { shape, tag }
    }

    pub fn ground() -> Self {
        Self::new(
            Shape::Plane {
                point: Point3::origin(),
                normal: Vector3::z(),
            },
            ObstacleTag::Ground,
        )
    }

    pub fn validate(&self) -> Option<String> {
        match self.shape {
            Shape::Sphere { radius, .. } if !(radius > 0.0) => Some("sphere radius must be positive".into()),
            Shape::Plane { normal, .. } if !(normal.norm() > 0.0) => Some("plane normal must be non-zero".into()),
            Shape::Box { half_extents, .. } if half_extents.iter().any(|h| !(*h > 0.0)) => {
                Some("box half extents must be positive".into())
            }
            _ => None,
        }
    }

    /// Signed distance; negative inside.
    pub fn sdf(&self, p: &Point3<f64>) -> f64 {
        match self.shape {
            Shape::Sphere { center, radius } => (p - center).norm() - radius,
            Shape::Plane { point, normal } => (p - point).dot(&normal.normalize()),
            Shape::Box { center, half_extents } => {
                let q = (p - center).abs() - half_extents;
                let outside = q.map(|c| c.max(0.0)).norm();
                outside + q.max().min(0.0)
            }
        }
    }

    /// Unit outward normal of the surface nearest `p`.
    pub fn outward_normal(&self, p: &Point3<f64>) -> Vector3<f64> {
        match self.shape {
            Shape::Sphere { center, .. } => {
                let d = p - center;
                let n = d.norm();
                if n == 0.0 {
                    Vector3::z()
                } else {
                    d / n
                }
            }
            Shape::Plane { normal, .. } => normal.normalize(),
            Shape::Box { center, half_extents } => {
                let local = p - center;
                let q = local.abs() - half_extents;
                if q.max() > 0.0 {
                    let v = Vector3::from_fn(|i, _| q[i].max(0.0) * local[i].signum());
                    v.normalize()
                } else {
                    let axis = q.imax();
                    let mut v = Vector3::zeros();
                    v[axis] = if local[axis] >= 0.0 { 1.0 } else { -1.0 };
                    v
                }
            }
        }
    }

    /// Parameter and signed distance of the segment point nearest the surface.
    pub fn segment_min_sdf(&self, seg: &Segment) -> (f64, f64) {
        match self.shape {
            Shape::Plane { .. } => {
                let (da, db) = (self.sdf(&seg.a), self.sdf(&seg.b));
                if da <= db {
                    (0.0, da)
                } else {
                    (1.0, db)
                }
            }
            Shape::Sphere { center, .. } => {
                let t = seg.closest_parameter(&center);
                (t, self.sdf(&seg.at(t)))
            }
            Shape::Box { .. } => golden_min(|t| self.sdf(&seg.at(t)), 0.0, 1.0, 60),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub expand_distance: f64,
    pub collapse_distance: f64,
    /// Extra standoff for people, added to both thresholds.
    pub human_buffer: f64,
    pub freefall_accel_window: f64,
    /// Band around -g counted as free fall, m/s².
    pub freefall_tolerance: f64,
    pub capacity_at_rack: f64,
    pub capacity_far: f64,
    pub spring_stiffness: f64,
    pub contact_damping: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            expand_distance: 1.0,
            collapse_distance: 1.5,
            human_buffer: 0.5,
            freefall_accel_window: 0.1,
            freefall_tolerance: 1.0,
            capacity_at_rack: 9.0,
            capacity_far: 6.0,
            spring_stiffness: 500.0,
            contact_damping: 0.0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.expand_distance > 0.0) {
            errs.push("expand_distance must be positive".into());
        }
        if !(self.collapse_distance > self.expand_distance) {
            errs.push("collapse_distance must exceed expand_distance".into());
        }
        if !(self.human_buffer >= 0.0) {
            errs.push("human_buffer must be non-negative".into());
        }
        if !(self.freefall_accel_window > 0.0 && self.freefall_tolerance > 0.0) {
            errs.push("free-fall window and tolerance must be positive".into());
        }
        if !(self.capacity_far > 0.0 && self.capacity_at_rack >= self.capacity_far) {
            errs.push("capacity_at_rack must be at least capacity_far, both positive".into());
        }
        if !(self.spring_stiffness > 0.0 && self.contact_damping >= 0.0) {
            errs.push("spring_stiffness must be positive and contact_damping non-negative".into());
        }
        errs
    }
}
