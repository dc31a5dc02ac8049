//! Planar kinematics of a closed ring of angulated scissor units.
//!
//! Each unit is a pair of kinked rods crossing at a shared pivot. Unit `i`
//! spans the sector between the radial lines at `2πi/N` and `2π(i+1)/N`:
//! rod A runs from the outer joint on the first line through the pivot to the
//! inner joint on the second line, rod B mirrors it. Neighbouring units share
//! their outer and inner connection joints, so the whole ring has `3N` joints:
//! `N` outer, `N` inner and `N` pivots.
//!
//! The single degree of freedom is `theta`, the opening angle at a pivot
//! between the outer arms of its two rods. With `h = π/N` the joint radii are
//!
//! ```text
//! outer = l·sin(θ/2)     / sin h
//! pivot = l·sin(θ/2 − h) / sin h
//! inner = l·sin(θ/2 − 2h)/ sin h
//! ```
//!
//! so every radius is linear in the segment length `l`, the outer radius
//! grows until the outer arms line up tangentially at `θ = π`, and the inner
//! joints reach the hub at `θ = 4h`.

use std::f64::consts::PI;

use nalgebra::{Isometry3, Point2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Residual tolerance used when validating geometry, in metres.
pub const GEOMETRY_TOLERANCE: f64 = 1e-9;

/// Default angular distance kept between `theta_max` and the straight-arm singularity.
pub const DEFAULT_SINGULARITY_MARGIN: f64 = PI / 180.0;

pub const DEFAULT_UNIT_COUNT: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("invalid ring spec: {0}")]
    InvalidSpec(String),
    #[error("theta {theta} rad outside feasible range [{min}, {max}]")]
    ThetaOutOfRange { theta: f64, min: f64, max: f64 },
    #[error("target radius {target} m outside achievable band [{min}, {max}]")]
    RadiusOutOfRange { target: f64, min: f64, max: f64 },
}

/// The kink angle that lets `unit_count` identical angulated units close into
/// a ring with purely radial one-parameter deployment: `π − 2π/N`.
pub fn kink_angle_for_closure(unit_count: usize) -> Result<f64, KinematicsError> {
    if unit_count < 4 {
        return Err(KinematicsError::InvalidSpec(format!(
            "unit_count must be at least 4, got {unit_count}"
        )));
    }
    Ok(PI - 2.0 * PI / unit_count as f64)
}

/// Segment length for which the ring reaches `max_outer_radius` exactly at the
/// highest usable opening angle (`π − margin`).
///
/// With a zero margin this is the textbook `R·sin(π/N)`.
pub fn calibrate_segment_length_with_margin(
    unit_count: usize,
    max_outer_radius: f64,
    margin: f64,
) -> Result<f64, KinematicsError> {
    kink_angle_for_closure(unit_count)?;
    if !(max_outer_radius > 0.0 && max_outer_radius.is_finite()) {
        return Err(KinematicsError::InvalidSpec(format!(
            "max_outer_radius must be positive, got {max_outer_radius}"
        )));
    }
    if !(0.0..PI / 2.0).contains(&margin) {
        return Err(KinematicsError::InvalidSpec(format!("singularity margin {margin} out of range")));
    }
    let half = PI / unit_count as f64;
    Ok(max_outer_radius * half.sin() / ((PI - margin) / 2.0).sin())
}

/// [`calibrate_segment_length_with_margin`] with the default 1° margin.
pub fn calibrate_segment_length(unit_count: usize, max_outer_radius: f64) -> Result<f64, KinematicsError> {
    calibrate_segment_length_with_margin(unit_count, max_outer_radius, DEFAULT_SINGULARITY_MARGIN)
}

/// Which of the three concentric joint circles a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointFamily {
    Outer,
    Pivot,
    Inner,
}

/// Parametric description of one scissor ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    unit_count: usize,
    segment_length: f64,
    kink_angle: f64,
    singularity_margin: f64,
    /// Places the ring plane (local xy) relative to the drone body.
    pub hub_plane_pose: Isometry3<f64>,
}

impl RingSpec {
    pub fn new(unit_count: usize, segment_length: f64) -> Result<Self, KinematicsError> {
        let kink_angle = kink_angle_for_closure(unit_count)?;
        Self::with_kink_angle(unit_count, segment_length, kink_angle)
    }

    /// Rejects any kink angle other than the closure value.
    pub fn with_kink_angle(unit_count: usize, segment_length: f64, kink_angle: f64) -> Result<Self, KinematicsError> {
        let closure = kink_angle_for_closure(unit_count)?;
        if !(segment_length > 0.0 && segment_length.is_finite()) {
            return Err(KinematicsError::InvalidSpec(format!(
                "segment_length must be positive, got {segment_length}"
            )));
        }
        if (kink_angle - closure).abs() > 1e-12 {
            return Err(KinematicsError::InvalidSpec(format!(
                "kink angle {kink_angle} rad does not close a ring of {unit_count} units (needs {closure})"
            )));
        }
        Ok(Self {
            unit_count,
            segment_length,
            kink_angle: closure,
            singularity_margin: DEFAULT_SINGULARITY_MARGIN,
            hub_plane_pose: Isometry3::identity(),
        })
    }

    /// Ring whose outer joints reach `max_outer_radius` at `theta_max`.
    pub fn calibrated(unit_count: usize, max_outer_radius: f64) -> Result<Self, KinematicsError> {
        Self::new(unit_count, calibrate_segment_length(unit_count, max_outer_radius)?)
    }

    pub fn with_singularity_margin(mut self, margin: f64) -> Result<Self, KinematicsError> {
        if !(margin > 0.0 && margin < PI / 2.0) {
            return Err(KinematicsError::InvalidSpec(format!("singularity margin {margin} out of range")));
        }
        self.singularity_margin = margin;
        Ok(self)
    }

    pub fn with_pose(mut self, pose: Isometry3<f64>) -> Self {
        self.hub_plane_pose = pose;
        self
    }

    pub fn unit_count(&self) -> usize {
        self.unit_count
    }

    pub fn segment_length(&self) -> f64 {
        self.segment_length
    }

    pub fn kink_angle(&self) -> f64 {
        self.kink_angle
    }

    pub fn singularity_margin(&self) -> f64 {
        self.singularity_margin
    }

    fn half_sector(&self) -> f64 {
        PI / self.unit_count as f64
    }

    /// Feasible opening angles: from inner joints touching the hub up to the
    /// singularity minus the margin. Empty (min > max) for very small `N`.
    pub fn kinematic_range(&self) -> (f64, f64) {
        (4.0 * self.half_sector(), PI - self.singularity_margin)
    }

    /// Supremum of the outer radius over all opening angles, `l / sin(π/N)`.
    pub fn max_outer_radius(&self) -> f64 {
        self.segment_length / self.half_sector().sin()
    }

    /// Radius of one joint family at `theta`, without any range check.
    pub fn radius(&self, family: JointFamily, theta: f64) -> f64 {
        let h = self.half_sector();
        let shift = match family {
            JointFamily::Outer => 0.0,
            JointFamily::Pivot => h,
            JointFamily::Inner => 2.0 * h,
        };
        self.segment_length * (theta / 2.0 - shift).sin() / h.sin()
    }

    pub fn check_theta(&self, theta: f64) -> Result<(), KinematicsError> {
        let (min, max) = self.kinematic_range();
        if theta.is_finite() && theta >= min && theta <= max {
            Ok(())
        } else {
            Err(KinematicsError::ThetaOutOfRange { theta, min, max })
        }
    }

    /// Joint layout at `theta` with no feasibility check. Used by oracles that
    /// probe the bare geometry outside the physical range.
    pub fn geometric_layout(&self, theta: f64) -> JointLayout {
        let n = self.unit_count;
        let h = self.half_sector();
        let outer_joint_radius = self.radius(JointFamily::Outer, theta);
        let pivot_radius = self.radius(JointFamily::Pivot, theta);
        let inner_joint_radius = self.radius(JointFamily::Inner, theta);
        let polar = |r: f64, phi: f64| Point2::new(r * phi.cos(), r * phi.sin());
        let boundary = |i: usize| 2.0 * h * i as f64;

        let outer = (0..n).map(|i| polar(outer_joint_radius, boundary(i))).collect();
        let pivots = (0..n).map(|i| polar(pivot_radius, boundary(i) + h)).collect();
        let inner = (0..n).map(|i| polar(inner_joint_radius, boundary(i))).collect();
        JointLayout {
            theta,
            outer_joint_radius,
            pivot_radius,
            inner_joint_radius,
            outer,
            pivots,
            inner,
        }
    }
}

/// All joint positions of one ring in its own plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointLayout {
    pub theta: f64,
    pub outer_joint_radius: f64,
    pub pivot_radius: f64,
    pub inner_joint_radius: f64,
    /// Outer connection joint `i` sits on the radial line at `2πi/N`.
    pub outer: Vec<Point2<f64>>,
    /// Pivot `i` sits on the bisector of unit `i`.
    pub pivots: Vec<Point2<f64>>,
    /// Inner connection joint `i` shares the radial line of outer joint `i`.
    pub inner: Vec<Point2<f64>>,
}

/// One kinked rod as joint references: end, kink, end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rod {
    pub unit: usize,
    pub joints: [JointRef; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointRef {
    pub family: JointFamily,
    pub index: usize,
}

impl JointRef {
    pub fn new(family: JointFamily, index: usize) -> Self {
        Self { family, index }
    }
}

/// Rods of units `0..units` for a ring of `unit_count` units. Pass
/// `units == unit_count` for a closed ring, `unit_count / 2` for a half ring.
pub fn rods(unit_count: usize, units: usize) -> Vec<Rod> {
    let mut out = Vec::with_capacity(units * 2);
    for unit in 0..units {
        let next = (unit + 1) % unit_count;
        let pivot = JointRef::new(JointFamily::Pivot, unit);
        out.push(Rod {
            unit,
            joints: [JointRef::new(JointFamily::Outer, unit), pivot, JointRef::new(JointFamily::Inner, next)],
        });
        out.push(Rod {
            unit,
            joints: [JointRef::new(JointFamily::Inner, unit), pivot, JointRef::new(JointFamily::Outer, next)],
        });
    }
    out
}

impl JointLayout {
    pub fn unit_count(&self) -> usize {
        self.outer.len()
    }

    pub fn joint(&self, joint: JointRef) -> Point2<f64> {
        match joint.family {
            JointFamily::Outer => self.outer[joint.index],
            JointFamily::Pivot => self.pivots[joint.index],
            JointFamily::Inner => self.inner[joint.index],
        }
    }

    pub fn radius(&self, family: JointFamily) -> f64 {
        match family {
            JointFamily::Outer => self.outer_joint_radius,
            JointFamily::Pivot => self.pivot_radius,
            JointFamily::Inner => self.inner_joint_radius,
        }
    }

    pub fn rods(&self) -> Vec<Rod> {
        rods(self.unit_count(), self.unit_count())
    }
}

/// Operating band of the deployment angle, usually set by the actuator stroke.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeploymentRange {
    pub theta_min: f64,
    pub theta_max: f64,
}

impl DeploymentRange {
    pub fn new(spec: &RingSpec, theta_min: f64, theta_max: f64) -> Result<Self, KinematicsError> {
        spec.check_theta(theta_min)?;
        spec.check_theta(theta_max)?;
        if theta_min >= theta_max {
            return Err(KinematicsError::InvalidSpec(format!(
                "theta_min {theta_min} must be below theta_max {theta_max}"
            )));
        }
        Ok(Self { theta_min, theta_max })
    }

    /// Full kinematic range of the ring.
    pub fn kinematic(spec: &RingSpec) -> Result<Self, KinematicsError> {
        let (lo, hi) = spec.kinematic_range();
        Self::new(spec, lo, hi)
    }

    /// Band between a collapsed outer radius and the top of the kinematic range.
    pub fn from_collapsed_outer_radius(spec: &RingSpec, collapsed: f64) -> Result<Self, KinematicsError> {
        let full = Self::kinematic(spec)?;
        let theta_min = solve_monotone(spec, &full, JointFamily::Outer, collapsed)?;
        Self::new(spec, theta_min, full.theta_max)
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.theta_min && theta <= self.theta_max
    }

    pub fn clamp(&self, theta: f64) -> f64 {
        theta.clamp(self.theta_min, self.theta_max)
    }

    pub fn radius_band(&self, spec: &RingSpec, family: JointFamily) -> (f64, f64) {
        (spec.radius(family, self.theta_min), spec.radius(family, self.theta_max))
    }
}

/// Current value of the single degree of freedom together with its band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeploymentState {
    pub theta: f64,
    pub range: DeploymentRange,
}

impl DeploymentState {
    pub fn new(theta: f64, range: DeploymentRange) -> Result<Self, KinematicsError> {
        if !range.contains(theta) {
            return Err(KinematicsError::ThetaOutOfRange {
                theta,
                min: range.theta_min,
                max: range.theta_max,
            });
        }
        Ok(Self { theta, range })
    }
}

/// Joint layout at `theta`, rejecting angles where rods would cross the hub or
/// pass the straight-arm singularity.
pub fn forward_kinematics(spec: &RingSpec, theta: f64) -> Result<JointLayout, KinematicsError> {
    spec.check_theta(theta)?;
    Ok(spec.geometric_layout(theta))
}

/// Opening angle whose outer radius equals `target`, restricted to `range`.
pub fn inverse_kinematics(spec: &RingSpec, range: &DeploymentRange, target_outer_radius: f64) -> Result<f64, KinematicsError> {
    solve_monotone(spec, range, JointFamily::Outer, target_outer_radius)
}

/// Bisection on the monotone branch: every joint radius is strictly
/// increasing in theta across the feasible range.
pub fn solve_monotone(
    spec: &RingSpec,
    range: &DeploymentRange,
    family: JointFamily,
    target: f64,
) -> Result<f64, KinematicsError> {
    let (min, max) = range.radius_band(spec, family);
    if !(target.is_finite() && target >= min - GEOMETRY_TOLERANCE && target <= max + GEOMETRY_TOLERANCE) {
        return Err(KinematicsError::RadiusOutOfRange { target, min, max });
    }
    let (mut lo, mut hi) = (range.theta_min, range.theta_max);
    if target <= min {
        return Ok(lo);
    }
    if target >= max {
        return Ok(hi);
    }
    // 200 halvings reach adjacent floats long before the cap.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spec.radius(family, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let err_lo = (spec.radius(family, lo) - target).abs();
    let err_hi = (spec.radius(family, hi) - target).abs();
    Ok(if err_lo <= err_hi { lo } else { hi })
}
