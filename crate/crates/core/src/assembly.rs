//! Guard configurations built from scissor rings: poses, masses, part
//! counts, coverage geometry and propeller clearance.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{min_distance, PropellerDisc, Segment};
use crate::scissor::{rods, JointFamily, JointRef, KinematicsError, RingSpec};

/// Minimum propeller-to-guard gap in the expanded state.
pub const REQUIRED_GAP: f64 = 0.15;

pub const DEFAULT_TUBE_RADIUS: f64 = 0.01;
pub const DEFAULT_CYLINDER_SEPARATION: f64 = 0.25;
pub const DEFAULT_HUB_HEIGHT: f64 = 0.13;
pub const ACTUATOR_JOINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("invalid guard: {0}")]
    Invalid(String),
    #[error("point {0:?} is not on any guard member")]
    NotOnStructure([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardKind {
    Circle,
    Cylinder,
    Hemisphere,
    Sphere,
}

impl GuardKind {
    pub const ALL: [GuardKind; 4] = [GuardKind::Circle, GuardKind::Cylinder, GuardKind::Hemisphere, GuardKind::Sphere];

    /// Structure mass in units of one full ring.
    pub fn mass_multiple(self) -> u32 {
        match self {
            GuardKind::Circle => 1,
            GuardKind::Cylinder | GuardKind::Hemisphere => 2,
            GuardKind::Sphere => 3,
        }
    }

    fn has_half_rings(self) -> bool {
        self == GuardKind::Hemisphere
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuardMasses {
    pub ring_mass: f64,
    pub actuator_mass: f64,
}

impl Default for GuardMasses {
    fn default() -> Self {
        Self {
            ring_mass: 0.2,
            actuator_mass: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RingSpan {
    Full,
    /// Units `0..N/2`, the half of the ring with non-negative local y.
    Half,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedRing {
    /// Ring plane (local xy) in the drone body frame.
    pub pose: Isometry3<f64>,
    pub span: RingSpan,
}

impl PlacedRing {
    pub fn unit_count(&self, full: usize) -> usize {
        match self.span {
            RingSpan::Full => full,
            RingSpan::Half => full / 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub cylinder_separation: f64,
    pub tube_radius: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            cylinder_separation: DEFAULT_CYLINDER_SEPARATION,
            tube_radius: DEFAULT_TUBE_RADIUS,
        }
    }
}

/// One guard built from identical rings that all share one deployment angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardConfiguration {
    pub kind: GuardKind,
    pub ring: RingSpec,
    pub rings: Vec<PlacedRing>,
    pub masses: GuardMasses,
    pub tube_radius: f64,
}

/// Ring plane rotated so local x stays on body x and local y points up.
fn vertical_xz() -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[
        Vector3::x(),
        Vector3::z(),
        -Vector3::y(),
    ])))
}

/// Ring plane with local x on body y and local y pointing up.
fn vertical_yz() -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[
        Vector3::y(),
        Vector3::z(),
        Vector3::x(),
    ])))
}

pub fn assemble(
    kind: GuardKind,
    ring: RingSpec,
    masses: GuardMasses,
    options: AssemblyOptions,
) -> Result<GuardConfiguration, AssemblyError> {
    let n = ring.unit_count();
    if kind.has_half_rings() && n % 2 != 0 {
        return Err(AssemblyError::Invalid(format!("half rings need an even unit count, got {n}")));
    }
    if !(masses.ring_mass >= 0.0 && masses.actuator_mass >= 0.0) {
        return Err(AssemblyError::Invalid("masses must be non-negative".into()));
    }
    if !(options.tube_radius > 0.0) {
        return Err(AssemblyError::Invalid("tube radius must be positive".into()));
    }
    let hub = ring.hub_plane_pose;
    let rotated = |q: UnitQuaternion<f64>| hub * Isometry3::from_parts(Translation3::identity(), q);
    let shifted = |dz: f64| hub * Isometry3::translation(0.0, 0.0, dz);
    let full = |pose| PlacedRing { pose, span: RingSpan::Full };
    let half = |pose| PlacedRing { pose, span: RingSpan::Half };

    let rings = match kind {
        GuardKind::Circle => vec![full(hub)],
        GuardKind::Cylinder => {
            let d = options.cylinder_separation / 2.0;
            vec![full(shifted(d)), full(shifted(-d))]
        }
        GuardKind::Hemisphere => vec![full(hub), half(rotated(vertical_xz())), half(rotated(vertical_yz()))],
        GuardKind::Sphere => vec![full(hub), full(rotated(vertical_xz())), full(rotated(vertical_yz()))],
    };
    Ok(GuardConfiguration {
        kind,
        ring,
        rings,
        masses,
        tube_radius: options.tube_radius,
    })
}

/// A single straight rod segment of the guard in the drone body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub ring: usize,
    pub rod: usize,
    /// 0 for the end-to-kink half, 1 for kink-to-end.
    pub half: usize,
    pub segment: Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedJoint {
    pub ring: usize,
    pub joint: JointRef,
    pub position: Point3<f64>,
}

impl GuardConfiguration {
    pub fn structure_mass(&self) -> f64 {
        self.kind.mass_multiple() as f64 * self.masses.ring_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.structure_mass() + self.masses.actuator_mass
    }

    fn ring_points(&self, ring: &PlacedRing, theta: f64) -> (Vec<PlacedJoint>, Vec<Member>, usize) {
        let n = self.ring.unit_count();
        let layout = self.ring.geometric_layout(theta);
        let units = ring.unit_count(n);
        let lift = |p: nalgebra::Point2<f64>| ring.pose * Point3::new(p.x, p.y, 0.0);
        let mut joints = Vec::new();
        let boundary_joints = if units == n { n } else { units + 1 };
        for i in 0..boundary_joints {
            for family in [JointFamily::Outer, JointFamily::Inner] {
                let joint = JointRef::new(family, i);
                joints.push(PlacedJoint { ring: 0, joint, position: lift(layout.joint(joint)) });
            }
        }
        for i in 0..units {
            let joint = JointRef::new(JointFamily::Pivot, i);
            joints.push(PlacedJoint { ring: 0, joint, position: lift(layout.joint(joint)) });
        }
        let mut members = Vec::new();
        for (r, rod) in rods(n, units).iter().enumerate() {
            for half in 0..2 {
                let a = lift(layout.joint(rod.joints[half]));
                let b = lift(layout.joint(rod.joints[half + 1]));
                members.push(Member { ring: 0, rod: r, half, segment: Segment::new(a, b) });
            }
        }
        (joints, members, units)
    }

    /// All rod segments at `theta`, body frame, no range check.
    pub fn members(&self, theta: f64) -> Vec<Member> {
        let mut out = Vec::new();
        for (idx, ring) in self.rings.iter().enumerate() {
            let (_, members, _) = self.ring_points(ring, theta);
            out.extend(members.into_iter().map(|m| Member { ring: idx, ..m }));
        }
        out
    }

    pub fn joints(&self, theta: f64) -> Vec<PlacedJoint> {
        let mut out = Vec::new();
        for (idx, ring) in self.rings.iter().enumerate() {
            let (joints, _, _) = self.ring_points(ring, theta);
            out.extend(joints.into_iter().map(|j| PlacedJoint { ring: idx, ..j }));
        }
        out
    }

    pub fn total_units(&self) -> usize {
        let n = self.ring.unit_count();
        self.rings.iter().map(|r| r.unit_count(n)).sum()
    }

    /// Inner joints of the hub ring on the four rack azimuths, when the unit
    /// count puts joints there.
    pub fn actuator_joint_positions(&self, theta: f64) -> Vec<Point3<f64>> {
        let n = self.ring.unit_count();
        if n % 4 != 0 {
            return Vec::new();
        }
        let layout = self.ring.geometric_layout(theta);
        let hub = self.ring.hub_plane_pose;
        (0..4)
            .map(|k| {
                let p = layout.inner[k * n / 4];
                hub * Point3::new(p.x, p.y, 0.0)
            })
            .collect()
    }

    /// Angle in the hub plane from `point` to the nearest rack direction,
    /// in `[0, π/4]`.
    pub fn rack_offset_angle(&self, point: &Point3<f64>) -> f64 {
        let local = self.ring.hub_plane_pose.inverse_transform_point(point);
        let azimuth = local.y.atan2(local.x).rem_euclid(FRAC_PI_2);
        azimuth.min(FRAC_PI_2 - azimuth)
    }

    pub fn coverage_volume(&self, theta: f64) -> CoverageVolume {
        let members = self.members(theta);
        let outer = self.ring.radius(JointFamily::Outer, theta);
        let inner = self.ring.radius(JointFamily::Inner, theta);
        let bands = self
            .rings
            .iter()
            .map(|r| SweptBand {
                pose: r.pose,
                inner_radius: inner.min(self.ring.radius(JointFamily::Pivot, theta)),
                outer_radius: outer,
                arc: match r.span {
                    RingSpan::Full => TAU,
                    RingSpan::Half => PI,
                },
                tube_radius: self.tube_radius,
            })
            .collect();
        CoverageVolume {
            members,
            bounding_radius: outer + self.tube_radius,
            swept: bands,
        }
    }
}

/// Annular band swept by one ring's rods, inflated by the tube radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweptBand {
    pub pose: Isometry3<f64>,
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// Angular extent from local +x, counter-clockwise.
    pub arc: f64,
    pub tube_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageVolume {
    pub members: Vec<Member>,
    /// Largest in-plane outer-joint radius plus the tube radius.
    pub bounding_radius: f64,
    pub swept: Vec<SweptBand>,
}

impl CoverageVolume {
    pub fn segments(&self) -> Vec<Segment> {
        self.members.iter().map(|m| m.segment).collect()
    }

    /// Distance from `p` to the nearest member axis.
    pub fn distance_to(&self, p: &Point3<f64>) -> f64 {
        self.members
            .iter()
            .map(|m| m.segment.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BillOfMaterials {
    pub rod_count: usize,
    pub regular_joint_count: usize,
    pub actuator_joint_count: usize,
    pub total_pieces: usize,
}

/// Part counts for a guard of `kind` with `unit_count` units per ring.
///
/// Pins inside one ring (pivots and unit-to-unit connections) are part of the
/// press-fit rods. A separate regular joint piece is needed wherever rings
/// meet, i.e. at every joint shared by two or more rings, unless that joint is
/// already one of the four rack-driven actuator joints.
pub fn bill_of_materials(kind: GuardKind, unit_count: usize) -> Result<BillOfMaterials, AssemblyError> {
    let ring = RingSpec::new(unit_count, 0.1)?.with_pose(Isometry3::translation(0.0, 0.0, DEFAULT_HUB_HEIGHT));
    let guard = assemble(kind, ring, GuardMasses::default(), AssemblyOptions::default())?;
    let theta = 0.5 * (guard.ring.kinematic_range().0.max(0.0) + PI);
    let joints = guard.joints(theta);
    let tol = 1e-9;

    // cluster coincident joints and record which rings touch each location
    let mut sites: Vec<(Point3<f64>, Vec<usize>)> = Vec::new();
    for j in &joints {
        match sites.iter_mut().find(|(p, _)| (p - j.position).norm() < tol) {
            Some((_, rings)) => {
                if !rings.contains(&j.ring) {
                    rings.push(j.ring);
                }
            }
            None => sites.push((j.position, vec![j.ring])),
        }
    }
    let actuators = guard.actuator_joint_positions(theta);
    let regular = sites
        .iter()
        .filter(|(p, rings)| rings.len() >= 2 && !actuators.iter().any(|a| (a - p).norm() < tol))
        .count();
    let rod_count = 2 * guard.total_units();
    Ok(BillOfMaterials {
        rod_count,
        regular_joint_count: regular,
        actuator_joint_count: ACTUATOR_JOINTS,
        total_pieces: rod_count + regular + ACTUATOR_JOINTS,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneGeometry {
    pub propellers: Vec<PropellerDisc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearanceReport {
    pub min_gap: f64,
    pub pass: bool,
}

/// Rim samples per propeller used by [`clearance_check`].
pub const CLEARANCE_RIM_SAMPLES: usize = 720;

/// Smallest 3D distance between any propeller rim and any member axis.
pub fn min_gap(propellers: &[PropellerDisc], members: &[Segment]) -> f64 {
    let rim: Vec<Point3<f64>> = propellers.iter().flat_map(|p| p.rim_points(CLEARANCE_RIM_SAMPLES)).collect();
    min_distance(&rim, members)
}

pub fn clearance_check(guard: &GuardConfiguration, theta: f64, drone: &DroneGeometry) -> ClearanceReport {
    let segments: Vec<Segment> = guard.members(theta).iter().map(|m| m.segment).collect();
    let gap = min_gap(&drone.propellers, &segments);
    ClearanceReport {
        min_gap: gap,
        pass: gap >= REQUIRED_GAP,
    }
}
