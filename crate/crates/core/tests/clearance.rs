mod common;

use std::f64::consts::TAU;

use common::sampled_point_segment_distance;
use nalgebra::{Isometry3, Point3};
use ringguard_core::assembly::{assemble, clearance_check, min_gap, AssemblyOptions, GuardKind, GuardMasses, DEFAULT_HUB_HEIGHT};
use ringguard_core::flight::DroneParams;
use ringguard_core::geometry::{PropellerDisc, Segment};
use ringguard_core::scissor::{DeploymentRange, RingSpec};

fn circle(radius: f64, z: f64, n: usize) -> Vec<Segment> {
    (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64;
            let b = TAU * (k + 1) as f64 / n as f64;
            Segment::new(Point3::new(radius * a.cos(), radius * a.sin(), z), Point3::new(radius * b.cos(), radius * b.sin(), z))
        })
        .collect()
}

fn oracle(rims: &[PropellerDisc], members: &[Segment], samples: usize) -> f64 {
    let arr = |p: &Point3<f64>| [p.x, p.y, p.z];
    rims.iter()
        .flat_map(|d| d.rim_points(samples))
        .flat_map(|p| members.iter().map(move |m| sampled_point_segment_distance(arr(&p), arr(&m.a), arr(&m.b))))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn tip_circle_under_expanded_ring() {
    let tips = [PropellerDisc::horizontal(Point3::origin(), 0.35)];
    let ring = circle(0.425, 0.13, 4096);
    let expected = (0.075f64.powi(2) + 0.13f64.powi(2)).sqrt();
    let gap = min_gap(&tips, &ring);
    assert!((gap - expected).abs() < 1e-4, "{gap} vs {expected}");
    assert!((gap - 0.150).abs() < 1e-3);
    assert!((oracle(&tips, &circle(0.425, 0.13, 256), 64) - expected).abs() < 1e-3);
}

#[test]
fn tip_circle_under_collapsed_ring() {
    let tips = [PropellerDisc::horizontal(Point3::origin(), 0.35)];
    let gap = min_gap(&tips, &circle(0.26, 0.13, 4096));
    let expected = (0.09f64.powi(2) + 0.13f64.powi(2)).sqrt();
    assert!((gap - expected).abs() < 1e-4, "{gap}");
    assert!((gap - 0.158).abs() < 1e-3);
}

#[test]
fn real_guard_matches_sampling_oracle() {
    let ring = RingSpec::calibrated(16, 0.425)
        .unwrap()
        .with_pose(Isometry3::translation(0.0, 0.0, DEFAULT_HUB_HEIGHT));
    let range = DeploymentRange::from_collapsed_outer_radius(&ring, 0.26).unwrap();
    let drone = DroneParams::default().geometry();
    for kind in GuardKind::ALL {
        let guard = assemble(kind, ring.clone(), GuardMasses::default(), AssemblyOptions::default()).unwrap();
        let report = clearance_check(&guard, range.theta_max, &drone);
        let members: Vec<Segment> = guard.members(range.theta_max).iter().map(|m| m.segment).collect();
        let slow = oracle(&drone.propellers, &members, 180);
        assert!((report.min_gap - slow).abs() < 2e-3, "{kind:?}: {} vs {slow}", report.min_gap);
        assert!(report.min_gap <= slow + 1e-9);
        // the lower cylinder ring sits 5 mm above the rotor plane
        let expect_pass = kind != GuardKind::Cylinder;
        assert_eq!(report.pass, expect_pass, "{kind:?} expanded gap {}", report.min_gap);
    }
}
