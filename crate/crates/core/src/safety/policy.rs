use std::collections::VecDeque;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{Obstacle, ObstacleTag, PolicyConfig};
use crate::actuator::ActuatorCommand;
use crate::flight::GRAVITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProximityDecision {
    Expand,
    Collapse,
    Hold,
}

/// Distance from `position` to the nearest non-ground obstacle, with the
/// human buffer already subtracted for people.
pub fn nearest_clearance(position: &Point3<f64>, obstacles: &[Obstacle], config: &PolicyConfig) -> Option<f64> {
    obstacles
        .iter()
        .filter(|o| o.tag != ObstacleTag::Ground)
        .map(|o| {
            let d = o.sdf(position);
            if o.tag == ObstacleTag::Human {
                d - config.human_buffer
            } else {
                d
            }
        })
        .min_by(f64::total_cmp)
}

pub fn proximity_policy(position: &Point3<f64>, obstacles: &[Obstacle], config: &PolicyConfig) -> ProximityDecision {
    match nearest_clearance(position, obstacles, config) {
        None => ProximityDecision::Collapse,
        Some(d) if d < config.expand_distance => ProximityDecision::Expand,
        Some(d) if d > config.collapse_distance => ProximityDecision::Collapse,
        Some(_) => ProximityDecision::Hold,
    }
}

/// Remembers the last proximity command so only changes reach the actuator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProximityLatch {
    pub last: ProximityDecision,
}

impl Default for ProximityLatch {
    fn default() -> Self {
        Self {
            last: ProximityDecision::Collapse,
        }
    }
}

impl ProximityLatch {
    pub fn update(&mut self, decision: ProximityDecision) -> Option<ActuatorCommand> {
        if decision == ProximityDecision::Hold || decision == self.last {
            return None;
        }
        self.last = decision;
        Some(match decision {
            ProximityDecision::Expand => ActuatorCommand::Expand,
            _ => ActuatorCommand::Collapse,
        })
    }
}

/// Vertical acceleration measured over the `span` seconds ending at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub t: f64,
    pub span: f64,
    pub accel_z: f64,
}

/// True when thrust is known lost, or every sample in the trailing window
/// reads within `tolerance` of -g and the samples cover the whole window.
pub fn freefall_detect(history: &[AccelSample], thrust_loss: bool, window: f64, tolerance: f64) -> bool {
    if thrust_loss {
        return true;
    }
    let Some(last) = history.last() else {
        return false;
    };
    let start = last.t - window;
    let mut covered = 0.0;
    for s in history.iter().rev() {
        if s.t <= start + 1e-12 {
            break;
        }
        if (s.accel_z + GRAVITY).abs() >= tolerance {
            return false;
        }
        covered += s.span;
    }
    covered >= window - 1e-9
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreefallMonitor {
    pub window: f64,
    pub tolerance: f64,
    samples: VecDeque<AccelSample>,
}

impl FreefallMonitor {
    pub fn new(window: f64, tolerance: f64) -> Self {
        Self {
            window,
            tolerance,
            samples: VecDeque::new(),
        }
    }

    pub fn push(&mut self, sample: AccelSample) {
        self.samples.push_back(sample);
        while let Some(front) = self.samples.front() {
            if front.t < sample.t - 2.0 * self.window {
                self.samples.pop_front();
            } else {
                break;
            }
        }
    }

    pub fn detect(&self, thrust_loss: bool) -> bool {
        let (a, b) = self.samples.as_slices();
        let joined: Vec<AccelSample> = a.iter().chain(b).copied().collect();
        freefall_detect(&joined, thrust_loss, self.window, self.tolerance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safety::Shape;
    use nalgebra::Vector3;

    fn wall_at(x: f64) -> Obstacle {
        Obstacle::new(
            Shape::Plane {
                point: Point3::new(x, 0.0, 0.0),
                normal: -Vector3::x(),
            },
            ObstacleTag::Structure,
        )
    }

    #[test]
    fn threshold_examples() {
        let cfg = PolicyConfig::default();
        let here = Point3::new(0.0, 0.0, 1.0);
        assert_eq!(proximity_policy(&here, &[wall_at(0.8)], &cfg), ProximityDecision::Expand);
        assert_eq!(proximity_policy(&here, &[wall_at(1.2)], &cfg), ProximityDecision::Hold);
        assert_eq!(proximity_policy(&here, &[], &cfg), ProximityDecision::Collapse);
        assert_eq!(proximity_policy(&here, &[Obstacle::ground()], &cfg), ProximityDecision::Collapse);
    }

    #[test]
    fn humans_get_extra_buffer() {
        let cfg = PolicyConfig::default();
        let person = Obstacle::new(
            Shape::Sphere {
                center: Point3::new(1.5, 0.0, 1.0),
                radius: 0.2,
            },
            ObstacleTag::Human,
        );
        let here = Point3::new(0.0, 0.0, 1.0);
        assert_eq!(proximity_policy(&here, &[person], &cfg), ProximityDecision::Expand);
    }

    #[test]
    fn sweep_gives_one_expand_and_one_collapse() {
        let cfg = PolicyConfig::default();
        let here = Point3::new(0.0, 0.0, 1.0);
        let mut latch = ProximityLatch::default();
        let mut issued = Vec::new();
        let down = (0..=300).map(|k| 3.0 - k as f64 * 0.01);
        let up = (0..=300).map(|k| k as f64 * 0.01);
        for d in down.chain(up) {
            if let Some(c) = latch.update(proximity_policy(&here, &[wall_at(d)], &cfg)) {
                issued.push(c);
            }
        }
        assert_eq!(issued, vec![ActuatorCommand::Expand, ActuatorCommand::Collapse]);
    }

    fn series(accel: impl Fn(f64) -> f64, seconds: f64) -> Vec<AccelSample> {
        let dt = 1e-3;
        let n = (seconds / dt).round() as usize;
        (1..=n)
            .map(|k| {
                let t = k as f64 * dt;
                AccelSample { t, span: dt, accel_z: accel(t) }
            })
            .collect()
    }

    #[test]
    fn freefall_cases() {
        let falling = series(|_| -GRAVITY, 0.1);
        assert!(freefall_detect(&falling, false, 0.1, 1.0));
        assert!(!freefall_detect(&falling[..99], false, 0.1, 1.0));
        assert!(!freefall_detect(&series(|_| 0.0, 1.0), false, 0.1, 1.0));
        assert!(!freefall_detect(&series(|_| -5.0, 1.0), false, 0.1, 1.0));
        assert!(freefall_detect(&[], true, 0.1, 1.0));
    }

    #[test]
    fn monitor_trims_history() {
        let mut m = FreefallMonitor::new(0.1, 1.0);
        for s in series(|t| if t < 1.0 { 0.0 } else { -GRAVITY }, 1.1) {
            m.push(s);
        }
        assert!(m.detect(false));
        assert!(m.samples.len() <= 202);
    }
}
