use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::PidTarget;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Point3<f64>,
    #[serde(default)]
    pub hold_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
    pub tolerance: f64,
    /// Cap on the speed of the moving setpoint; `None` jumps straight to
    /// each waypoint.
    #[serde(default)]
    pub max_speed: Option<f64>,
    /// Braking rate of the moving setpoint near each waypoint, m/s².
    #[serde(default = "default_braking")]
    pub braking: f64,
}

fn default_braking() -> f64 {
    0.1
}

impl Trajectory {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.waypoints.is_empty() {
            errs.push("trajectory needs at least one waypoint".into());
        }
        if !(self.tolerance > 0.0) {
            errs.push("trajectory tolerance must be positive".into());
        }
        if self.waypoints.iter().any(|w| !(w.hold_time >= 0.0)) {
            errs.push("hold_time must be non-negative".into());
        }
        if let Some(v) = self.max_speed {
            if !(v > 0.0) {
                errs.push("max_speed must be positive".into());
            }
        }
        if !(self.braking > 0.0) {
            errs.push("braking must be positive".into());
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryProgress {
    pub index: usize,
    pub hold_since: Option<f64>,
    /// Moving setpoint when a speed cap is set.
    pub carrot: Point3<f64>,
    pub complete: bool,
}

impl TrajectoryProgress {
    pub fn start(from: Point3<f64>) -> Self {
        Self {
            index: 0,
            hold_since: None,
            carrot: from,
            complete: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep {
    pub target: PidTarget,
    pub progress: TrajectoryProgress,
    /// Index of a waypoint finished during this update.
    pub reached: Option<usize>,
    /// Set on the update that finishes the last waypoint.
    pub completed: bool,
}

/// Advance the plan by one control period `dt` ending at time `t`.
pub fn follow_trajectory(traj: &Trajectory, progress: &TrajectoryProgress, position: &Point3<f64>, t: f64, dt: f64) -> TrajectoryStep {
    let mut p = *progress;
    let last = traj.waypoints.len() - 1;
    if p.complete {
        let goal = traj.waypoints[last].position;
        return TrajectoryStep {
            target: PidTarget::hold(goal),
            progress: p,
            reached: None,
            completed: false,
        };
    }
    let wp = traj.waypoints[p.index];
    let mut velocity = Vector3::zeros();
    match traj.max_speed {
        Some(speed) => {
            let gap = wp.position - p.carrot;
            let dist = gap.norm();
            let speed = speed.min((2.0 * traj.braking * dist).sqrt());
            let stride = speed * dt;
            if dist <= stride {
                p.carrot = wp.position;
            } else {
                velocity = gap / dist * speed;
                p.carrot += velocity * dt;
            }
        }
        None => p.carrot = wp.position,
    }
    let mut reached = None;
    let mut completed = false;
    let arrived = p.carrot == wp.position && (position - wp.position).norm() <= traj.tolerance;
    if arrived {
        let since = *p.hold_since.get_or_insert(t);
        if t - since >= wp.hold_time - 1e-12 {
            reached = Some(p.index);
            p.hold_since = None;
            if p.index == last {
                p.complete = true;
                completed = true;
            } else {
                p.index += 1;
            }
        }
    } else {
        p.hold_since = None;
    }
    TrajectoryStep {
        target: PidTarget {
            position: p.carrot,
            velocity,
        },
        progress: p,
        reached,
        completed,
    }
}
