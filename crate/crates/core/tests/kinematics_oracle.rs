mod common;

use std::f64::consts::PI;

use common::{PinJointRing, SplitMix};
use nalgebra::DVector;
use ringguard_core::scissor::{
    forward_kinematics, kink_angle_for_closure, DeploymentRange, JointFamily, JointLayout, RingSpec,
};

fn flatten(layout: &JointLayout) -> DVector<f64> {
    let mut v = Vec::new();
    for p in layout.outer.iter().chain(&layout.pivots).chain(&layout.inner) {
        v.push(p.x);
        v.push(p.y);
    }
    DVector::from_vec(v)
}

fn perturbed(x: &DVector<f64>, scale: f64, rng: &mut SplitMix) -> DVector<f64> {
    x.map(|c| c + rng.range(-scale, scale))
}

#[test]
fn closed_form_satisfies_pin_joint_constraints() {
    let mut rng = SplitMix(11);
    for _ in 0..200 {
        let n = 4 * (2 + (rng.next_u64() % 7) as usize);
        let l = rng.range(0.02, 0.5);
        let spec = RingSpec::new(n, l).unwrap();
        let (lo, hi) = spec.kinematic_range();
        let theta = rng.range(lo, hi);
        let ring = PinJointRing::new(n, l, spec.kink_angle(), theta);
        let x = flatten(&forward_kinematics(&spec, theta).unwrap());
        let r = ring.residuals(&x).amax();
        assert!(r < 1e-9 * l.max(1.0), "N={n} l={l} theta={theta}: residual {r}");
    }
}

#[test]
fn numeric_solver_recovers_closed_form() {
    let mut rng = SplitMix(5);
    for _ in 0..100 {
        let n = [6, 8, 12, 16, 20][(rng.next_u64() % 5) as usize];
        let l = rng.range(0.03, 0.3);
        let spec = RingSpec::new(n, l).unwrap();
        let (lo, hi) = spec.kinematic_range();
        let theta = rng.range(lo, hi);
        let truth = flatten(&forward_kinematics(&spec, theta).unwrap());
        let ring = PinJointRing::new(n, l, spec.kink_angle(), theta);
        let (solved, residual) = ring.solve(perturbed(&truth, 0.02 * l, &mut rng));
        assert!(residual < 1e-9 * l, "N={n}: residual {residual}");
        let gap = (&solved - &truth).amax();
        assert!(gap < 1e-9, "N={n} l={l} theta={theta}: solver differs by {gap}");
    }
}

#[test]
fn closure_only_holds_at_the_closure_kink_angle() {
    for &n in &[4usize, 8, 16] {
        let closure = kink_angle_for_closure(n).unwrap();
        let l = 0.1;
        let spec = RingSpec::new(n, l).unwrap();
        // sweep the bare geometry, including the part outside the physical range
        let samples: Vec<f64> = (1..=9).map(|k| 2.0 * PI / n as f64 + k as f64 * (PI - 2.0 * PI / n as f64) / 10.0).collect();
        for &theta in &samples {
            let x = flatten(&spec.geometric_layout(theta));
            let good = PinJointRing::new(n, l, closure, theta);
            assert!(good.residuals(&x).amax() < 1e-12, "N={n} theta={theta}");
        }
        // any other kink angle leaves a residual the solver cannot remove
        let mut rng = SplitMix(n as u64);
        let mut stuck = 0;
        for &theta in &samples {
            let x = flatten(&spec.geometric_layout(theta));
            let bad = PinJointRing::new(n, l, closure + 0.05, theta);
            let (_, residual) = bad.solve(perturbed(&x, 1e-3, &mut rng));
            if residual > 1e-6 {
                stuck += 1;
            }
        }
        assert!(stuck >= samples.len() - 1, "N={n}: wrong kink angle closed at {} samples", samples.len() - stuck);
    }
}

#[test]
fn joint_families_are_concentric_and_evenly_spaced() {
    let spec = RingSpec::calibrated(16, 0.425).unwrap();
    let range = DeploymentRange::kinematic(&spec).unwrap();
    for k in 0..1000 {
        let theta = range.theta_min + (range.theta_max - range.theta_min) * k as f64 / 999.0;
        let layout = forward_kinematics(&spec, theta).unwrap();
        for (family, points) in [
            (JointFamily::Outer, &layout.outer),
            (JointFamily::Pivot, &layout.pivots),
            (JointFamily::Inner, &layout.inner),
        ] {
            let r = layout.radius(family);
            for p in points.iter() {
                assert!((p.coords.norm() - r).abs() <= 1e-9 * r.max(1e-3));
            }
        }
        // per-unit subtended angles add up to a full turn
        let mut total = 0.0;
        for i in 0..16 {
            let a = layout.outer[i];
            let b = layout.outer[(i + 1) % 16];
            let step = (a.x * b.y - a.y * b.x).atan2(a.x * b.x + a.y * b.y);
            assert!((step - 2.0 * PI / 16.0).abs() < 1e-12);
            total += step;
        }
        assert!((total - 2.0 * PI).abs() < 1e-9);
        // every rod segment keeps its length
        for rod in layout.rods() {
            for pair in rod.joints.windows(2) {
                let len = (layout.joint(pair[0]) - layout.joint(pair[1])).norm();
                assert!((len - spec.segment_length()).abs() < 1e-9 * spec.segment_length());
            }
        }
    }
}

#[test]
fn outer_radius_strictly_increasing() {
    let spec = RingSpec::calibrated(16, 0.425).unwrap();
    let range = DeploymentRange::kinematic(&spec).unwrap();
    let mut last = f64::NEG_INFINITY;
    for k in 0..=2000 {
        let theta = range.theta_min + (range.theta_max - range.theta_min) * k as f64 / 2000.0;
        let r = spec.radius(JointFamily::Outer, theta);
        assert!(r > last);
        last = r;
    }
}
