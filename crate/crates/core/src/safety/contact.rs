use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{Obstacle, PolicyConfig};
use crate::assembly::{AssemblyError, GuardConfiguration, Member};
use crate::geometry::PropellerDisc;

/// Points closer than this count as the same contact location.
pub const CONTACT_DEDUP_DISTANCE: f64 = 1e-6;
const PROP_RIM_SAMPLES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub time: f64,
    pub obstacle: usize,
    pub member: usize,
    /// World point on the member axis.
    pub point: Point3<f64>,
    /// Unit vector from the drone toward the obstacle.
    pub contact_normal: Vector3<f64>,
    pub depth: f64,
    pub applied_force: f64,
    pub local_capacity: f64,
    pub broke: bool,
    /// Drone speed toward the obstacle.
    pub closing_speed: f64,
}

/// Force capacity at a body-frame point on the guard deployed at `theta`:
/// full at the racks, falling linearly to the far value midway between two
/// racks.
pub fn local_capacity(
    guard: &GuardConfiguration,
    theta: f64,
    config: &PolicyConfig,
    point: &Point3<f64>,
) -> Result<f64, AssemblyError> {
    let on = guard
        .members(theta)
        .iter()
        .any(|m| m.segment.distance_to(point) <= guard.tube_radius + CONTACT_DEDUP_DISTANCE);
    if !on {
        return Err(AssemblyError::NotOnStructure([point.x, point.y, point.z]));
    }
    Ok(capacity_at_angle(config, guard.rack_offset_angle(point)))
}

fn capacity_at_angle(config: &PolicyConfig, alpha: f64) -> f64 {
    let frac = (alpha / std::f64::consts::FRAC_PI_4).clamp(0.0, 1.0);
    config.capacity_at_rack - (config.capacity_at_rack - config.capacity_far) * frac
}

fn capacity_at(guard: &GuardConfiguration, config: &PolicyConfig, body_point: &Point3<f64>) -> f64 {
    capacity_at_angle(config, guard.rack_offset_angle(body_point))
}

/// Survives breakage only for the obstacles it was already pressing on.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GuardIntegrity {
    pub damaged: bool,
    pub carrying: Vec<usize>,
}

impl GuardIntegrity {
    pub fn allows(&self, obstacle: usize) -> bool {
        !self.damaged || self.carrying.contains(&obstacle)
    }

    /// Returns true the first time a break is seen.
    pub fn absorb(&mut self, events: &[ContactEvent]) -> bool {
        if !self.damaged {
            if events.iter().any(|e| e.broke) {
                self.damaged = true;
                self.carrying = events.iter().map(|e| e.obstacle).collect();
                self.carrying.sort_unstable();
                self.carrying.dedup();
                return true;
            }
            return false;
        }
        self.carrying.retain(|o| events.iter().any(|e| e.obstacle == *o));
        false
    }
}

struct Touch {
    member: usize,
    point: Point3<f64>,
    outward: Vector3<f64>,
    depth: f64,
}

/// Deepest point of the guard inside `obstacle`, if any.
fn deepest(position: &Point3<f64>, members: &[Member], obstacle: &Obstacle, tube: f64) -> Option<Touch> {
    let offset = position.coords;
    let mut best: Option<Touch> = None;
    for (i, m) in members.iter().enumerate() {
        let seg = m.segment.translated(&offset);
        let (t, sdf) = obstacle.segment_min_sdf(&seg);
        let depth = tube - sdf;
        if depth <= 0.0 {
            continue;
        }
        let deeper = match &best {
            None => true,
            Some(b) => depth > b.depth + CONTACT_DEDUP_DISTANCE,
        };
        if deeper {
            let point = seg.at(t);
            best = Some(Touch {
                member: i,
                point,
                outward: obstacle.outward_normal(&point),
                depth,
            });
        }
    }
    best
}

fn magnitude(config: &PolicyConfig, depth: f64, closing: f64) -> f64 {
    (config.spring_stiffness * depth + config.contact_damping * closing).max(0.0)
}

/// Net spring force on the drone from every obstacle the guard presses into.
pub fn contact_force(
    position: &Point3<f64>,
    velocity: &Vector3<f64>,
    members: &[Member],
    obstacles: &[Obstacle],
    config: &PolicyConfig,
    tube: f64,
    integrity: &GuardIntegrity,
) -> Vector3<f64> {
    let mut total = Vector3::zeros();
    for (k, o) in obstacles.iter().enumerate() {
        if !integrity.allows(k) {
            continue;
        }
        if let Some(touch) = deepest(position, members, o, tube) {
            let closing = -velocity.dot(&touch.outward);
            total += touch.outward * magnitude(config, touch.depth, closing);
        }
    }
    total
}

/// One event per obstacle the guard penetrates, at the deepest point.
#[allow(clippy::too_many_arguments)]
pub fn resolve_contacts(
    time: f64,
    position: &Point3<f64>,
    velocity: &Vector3<f64>,
    guard: &GuardConfiguration,
    members: &[Member],
    obstacles: &[Obstacle],
    config: &PolicyConfig,
    integrity: &GuardIntegrity,
) -> (Vec<ContactEvent>, Vector3<f64>) {
    let mut events = Vec::new();
    let mut total = Vector3::zeros();
    for (k, o) in obstacles.iter().enumerate() {
        if !integrity.allows(k) {
            continue;
        }
        let Some(touch) = deepest(position, members, o, guard.tube_radius) else {
            continue;
        };
        let closing = -velocity.dot(&touch.outward);
        let force = magnitude(config, touch.depth, closing);
        let capacity = capacity_at(guard, config, &(touch.point - position.coords));
        total += touch.outward * force;
        events.push(ContactEvent {
            time,
            obstacle: k,
            member: touch.member,
            point: touch.point,
            contact_normal: -touch.outward,
            depth: touch.depth,
            applied_force: force,
            local_capacity: capacity,
            broke: force > capacity,
            closing_speed: closing,
        });
    }
    (events, total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropellerContact {
    pub propeller: usize,
    pub obstacle: usize,
    pub point: Point3<f64>,
}

/// Propeller discs (body frame) touching any obstacle at `position`.
pub fn propeller_contacts(position: &Point3<f64>, propellers: &[PropellerDisc], obstacles: &[Obstacle]) -> Vec<PropellerContact> {
    let mut out = Vec::new();
    for (i, disc) in propellers.iter().enumerate() {
        let disc = disc.translated(&position.coords);
        let mut probes = disc.rim_points(PROP_RIM_SAMPLES);
        probes.push(disc.center);
        for (k, o) in obstacles.iter().enumerate() {
            if let Some(p) = probes.iter().find(|p| o.sdf(p) < 0.0) {
                out.push(PropellerContact {
                    propeller: i,
                    obstacle: k,
                    point: *p,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpHint {
    pub obstacle: usize,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

/// Contact directions for a display or planner, sorted by azimuth.
pub fn bump_hints(events: &[ContactEvent]) -> Vec<BumpHint> {
    let mut hints: Vec<BumpHint> = events
        .iter()
        .map(|e| {
            let n = e.contact_normal;
            BumpHint {
                obstacle: e.obstacle,
                azimuth_deg: n.y.atan2(n.x).to_degrees(),
                elevation_deg: n.z.clamp(-1.0, 1.0).asin().to_degrees(),
            }
        })
        .collect();
    hints.sort_by(|a, b| a.azimuth_deg.total_cmp(&b.azimuth_deg));
    hints
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, AssemblyOptions, GuardKind, GuardMasses, DEFAULT_HUB_HEIGHT};
    use crate::safety::{ObstacleTag, Shape};
    use crate::scissor::RingSpec;
    use nalgebra::Isometry3;

    fn circle() -> GuardConfiguration {
        let ring = RingSpec::calibrated(16, 0.425)
            .unwrap()
            .with_pose(Isometry3::translation(0.0, 0.0, DEFAULT_HUB_HEIGHT));
        assemble(GuardKind::Circle, ring, GuardMasses::default(), AssemblyOptions::default()).unwrap()
    }

    fn event(azimuth: f64) -> ContactEvent {
        let a = azimuth.to_radians();
        ContactEvent {
            time: 0.0,
            obstacle: 0,
            member: 0,
            point: Point3::origin(),
            contact_normal: Vector3::new(a.cos(), a.sin(), 0.0),
            depth: 0.01,
            applied_force: 5.0,
            local_capacity: 9.0,
            broke: false,
            closing_speed: 0.0,
        }
    }

    #[test]
    fn capacity_examples() {
        let g = circle();
        let cfg = PolicyConfig::default();
        let theta = g.ring.kinematic_range().1;
        let r = g.ring.radius(crate::scissor::JointFamily::Outer, theta);
        let on_ring = |deg: f64| {
            let a = deg.to_radians();
            let target = Point3::new(r * a.cos(), r * a.sin(), DEFAULT_HUB_HEIGHT);
            // snap to the nearest member axis so the point is on the structure
            g.members(theta)
                .iter()
                .map(|m| m.segment.at(m.segment.closest_parameter(&target)))
                .min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))
                .unwrap()
        };
        assert_eq!(local_capacity(&g, theta, &cfg, &on_ring(0.0)).unwrap(), 9.0);
        assert!((local_capacity(&g, theta, &cfg, &on_ring(45.0)).unwrap() - 6.0).abs() < 0.2);
        assert!(matches!(
            local_capacity(&g, theta, &cfg, &Point3::new(5.0, 0.0, 0.0)),
            Err(AssemblyError::NotOnStructure(_))
        ));
        assert_eq!(capacity_at_angle(&cfg, std::f64::consts::FRAC_PI_4), 6.0);
        assert_eq!(capacity_at_angle(&cfg, std::f64::consts::PI / 8.0), 7.5);
    }

    #[test]
    fn no_penetration_no_events() {
        let g = circle();
        let members = g.members(g.ring.kinematic_range().0);
        let (events, f) = resolve_contacts(
            0.0,
            &Point3::new(0.0, 0.0, 3.0),
            &Vector3::zeros(),
            &g,
            &members,
            &[Obstacle::ground()],
            &PolicyConfig::default(),
            &GuardIntegrity::default(),
        );
        assert!(events.is_empty());
        assert_eq!(f, Vector3::zeros());
    }

    #[test]
    fn push_breaks_only_where_capacity_is_low() {
        let g = circle();
        let cfg = PolicyConfig::default();
        let theta = g.ring.kinematic_range().1;
        let members = g.members(theta);
        // a wall pressed 8 N worth into the guard, in two directions
        let push = |deg: f64| {
            let a: f64 = deg.to_radians();
            let dir = Vector3::new(a.cos(), a.sin(), 0.0);
            let reach = members
                .iter()
                .flat_map(|m| [m.segment.a, m.segment.b])
                .map(|p| p.coords.dot(&dir))
                .fold(f64::NEG_INFINITY, f64::max);
            let depth = 8.0 / cfg.spring_stiffness;
            let wall = Obstacle::new(
                Shape::Plane {
                    point: Point3::from(dir * (reach + g.tube_radius - depth)),
                    normal: -dir,
                },
                ObstacleTag::Structure,
            );
            let (events, _) = resolve_contacts(0.0, &Point3::origin(), &Vector3::zeros(), &g, &members, &[wall], &cfg, &GuardIntegrity::default());
            assert_eq!(events.len(), 1);
            assert!((events[0].applied_force - 8.0).abs() < 1e-9);
            events[0]
        };
        let at_rack = push(0.0);
        assert_eq!(at_rack.local_capacity, 9.0);
        assert!(!at_rack.broke);
        let far = push(45.0);
        assert!(far.local_capacity < 6.2, "{}", far.local_capacity);
        assert!(far.broke);
    }

    #[test]
    fn damaged_guard_finishes_current_contact_only() {
        let mut integ = GuardIntegrity::default();
        let mut broken = event(0.0);
        broken.broke = true;
        assert!(integ.absorb(&[broken]));
        assert!(integ.allows(0) && !integ.allows(1));
        assert!(!integ.absorb(&[]));
        assert!(!integ.allows(0));
    }

    #[test]
    fn hints_sorted_by_azimuth() {
        assert!(bump_hints(&[]).is_empty());
        let h = bump_hints(&[event(30.0), event(-30.0)]);
        assert_eq!(h.len(), 2);
        assert!((h[0].azimuth_deg + 30.0).abs() < 1e-9 && (h[1].azimuth_deg - 30.0).abs() < 1e-9);
        assert!(bump_hints(&[event(0.0)])[0].azimuth_deg.abs() < 1e-12);
    }

    #[test]
    fn propeller_inside_obstacle_is_reported() {
        let props = [PropellerDisc::horizontal(Point3::new(0.16, 0.16, 0.0), 0.057)];
        let post = Obstacle::new(
            Shape::Sphere {
                center: Point3::new(0.26, 0.16, 1.0),
                radius: 0.05,
            },
            ObstacleTag::Structure,
        );
        let obstacles = [Obstacle::ground(), post];
        let hits = propeller_contacts(&Point3::new(0.0, 0.0, 1.0), &props, &obstacles);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].obstacle, 1);
        // resting on the floor is not a strike
        assert!(propeller_contacts(&Point3::origin(), &props, &obstacles[..1]).is_empty());
    }
}
