//! Rack-and-pinion actuation: a central pinion drives four racks that push
//! the guard's inner joints radially at a constant servo rate.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scissor::{solve_monotone, DeploymentRange, JointFamily, KinematicsError, RingSpec};

pub const DEFAULT_FULL_STROKE_TIME: f64 = 6.0;
pub const DEFAULT_COMMAND_LATENCY: f64 = 0.02;
pub const DEFAULT_PINION_RADIUS: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActuatorError {
    #[error("displacement {value} m outside stroke [0, {stroke}]")]
    OutOfStroke { value: f64, stroke: f64 },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("invalid actuator spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RackPinionSpec {
    pub pinion_radius: f64,
    pub rack_stroke: f64,
    /// Four in-plane unit vectors, 90° apart.
    pub rack_directions: [Vector2<f64>; 4],
    pub full_stroke_time: f64,
    pub attachment: JointFamily,
    /// Radius of the attached joint circle at zero displacement.
    pub collapsed_radius: f64,
    pub command_latency: f64,
    /// Standard deviation of the multiplicative stroke-time jitter.
    pub stroke_time_jitter: f64,
}

impl RackPinionSpec {
    /// Racks on the inner joints, stroke spanning `range`.
    pub fn for_ring(ring: &RingSpec, range: &DeploymentRange) -> Result<Self, ActuatorError> {
        if ring.unit_count() % 4 != 0 {
            return Err(ActuatorError::Invalid(format!(
                "four racks need a unit count divisible by 4, got {}",
                ring.unit_count()
            )));
        }
        let attachment = JointFamily::Inner;
        let (lo, hi) = range.radius_band(ring, attachment);
        Ok(Self {
            pinion_radius: DEFAULT_PINION_RADIUS,
            rack_stroke: hi - lo,
            rack_directions: [
                Vector2::new(1.0, 0.0),
                Vector2::new(0.0, 1.0),
                Vector2::new(-1.0, 0.0),
                Vector2::new(0.0, -1.0),
            ],
            full_stroke_time: DEFAULT_FULL_STROKE_TIME,
            attachment,
            collapsed_radius: lo,
            command_latency: DEFAULT_COMMAND_LATENCY,
            stroke_time_jitter: 0.0,
        })
    }

    pub fn validate(&self) -> Result<(), ActuatorError> {
        let bad = |m: &str| Err(ActuatorError::Invalid(m.to_string()));
        if !(self.full_stroke_time > 0.0) {
            return bad("full_stroke_time must be positive");
        }
        if !(self.rack_stroke > 0.0) {
            return bad("rack_stroke must be positive");
        }
        if !(self.pinion_radius > 0.0) {
            return bad("pinion_radius must be positive");
        }
        if !(self.command_latency >= 0.0 && self.stroke_time_jitter >= 0.0) {
            return bad("latency and jitter must be non-negative");
        }
        for i in 0..4 {
            let a = self.rack_directions[i];
            let b = self.rack_directions[(i + 1) % 4];
            if (a.norm() - 1.0).abs() > 1e-9 || a.dot(&b).abs() > 1e-9 {
                return bad("rack directions must be orthogonal unit vectors");
            }
        }
        Ok(())
    }

    /// Constant servo rate, metres of rack travel per second.
    pub fn rate(&self) -> f64 {
        self.rack_stroke / self.full_stroke_time
    }

    pub fn pinion_angle(&self, displacement: f64) -> f64 {
        displacement / self.pinion_radius
    }

    pub fn deployment_range(&self, ring: &RingSpec) -> Result<DeploymentRange, ActuatorError> {
        let lo = displacement_to_theta(self, ring, 0.0)?;
        let hi = displacement_to_theta(self, ring, self.rack_stroke)?;
        Ok(DeploymentRange::new(ring, lo, hi)?)
    }
}

/// Deployment angle produced by pushing the attached joints out by `displacement`.
pub fn displacement_to_theta(spec: &RackPinionSpec, ring: &RingSpec, displacement: f64) -> Result<f64, ActuatorError> {
    if !(displacement >= 0.0 && displacement <= spec.rack_stroke) {
        return Err(ActuatorError::OutOfStroke {
            value: displacement,
            stroke: spec.rack_stroke,
        });
    }
    let full = DeploymentRange::kinematic(ring)?;
    Ok(solve_monotone(ring, &full, spec.attachment, spec.collapsed_radius + displacement)?)
}

pub fn theta_to_displacement(spec: &RackPinionSpec, ring: &RingSpec, theta: f64) -> Result<f64, ActuatorError> {
    ring.check_theta(theta)?;
    let d = ring.radius(spec.attachment, theta) - spec.collapsed_radius;
    let eps = 1e-12 * spec.rack_stroke.max(1.0);
    if d < -eps || d > spec.rack_stroke + eps {
        return Err(ActuatorError::OutOfStroke {
            value: d,
            stroke: spec.rack_stroke,
        });
    }
    Ok(d.clamp(0.0, spec.rack_stroke))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ActuatorMode {
    Idle,
    Expanding,
    Collapsing,
    SeekTarget { radius: f64, displacement: f64 },
}

impl ActuatorMode {
    pub fn label(&self) -> &'static str {
        match self {
            ActuatorMode::Idle => "Idle",
            ActuatorMode::Expanding => "Expanding",
            ActuatorMode::Collapsing => "Collapsing",
            ActuatorMode::SeekTarget { .. } => "SeekTarget",
        }
    }
}

/// Command after seek radii have been resolved to rack displacements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ActuatorCommand {
    Expand,
    Collapse,
    Stop,
    Seek { radius: f64, displacement: f64 },
    Emergency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    pub displacement: f64,
    pub mode: ActuatorMode,
    pub command_latency: f64,
    /// Multiplier on the stroke time for the current motion (jitter).
    pub stroke_time_scale: f64,
}

impl ActuatorState {
    pub fn collapsed(spec: &RackPinionSpec) -> Self {
        Self {
            displacement: 0.0,
            mode: ActuatorMode::Idle,
            command_latency: spec.command_latency,
            stroke_time_scale: 1.0,
        }
    }

    pub fn at(spec: &RackPinionSpec, displacement: f64) -> Result<Self, ActuatorError> {
        if !(0.0..=spec.rack_stroke).contains(&displacement) {
            return Err(ActuatorError::OutOfStroke {
                value: displacement,
                stroke: spec.rack_stroke,
            });
        }
        Ok(Self {
            displacement,
            ..Self::collapsed(spec)
        })
    }
}

/// Turn a seek radius into a target displacement.
pub fn seek_command(spec: &RackPinionSpec, ring: &RingSpec, outer_radius: f64) -> Result<ActuatorCommand, ActuatorError> {
    let range = spec.deployment_range(ring)?;
    let theta = solve_monotone(ring, &range, JointFamily::Outer, outer_radius)?;
    let displacement = theta_to_displacement(spec, ring, theta)?;
    Ok(ActuatorCommand::Seek {
        radius: outer_radius,
        displacement,
    })
}

fn apply(mode: ActuatorMode, command: ActuatorCommand) -> ActuatorMode {
    match command {
        ActuatorCommand::Expand | ActuatorCommand::Emergency => ActuatorMode::Expanding,
        ActuatorCommand::Collapse => ActuatorMode::Collapsing,
        ActuatorCommand::Stop => ActuatorMode::Idle,
        ActuatorCommand::Seek { radius, displacement } => {
            let _ = mode;
            ActuatorMode::SeekTarget { radius, displacement }
        }
    }
}

/// Advance the rack by one tick. The latest command wins; travel never
/// exceeds `rate · dt` and never leaves the stroke.
pub fn step(state: &ActuatorState, spec: &RackPinionSpec, dt: f64, command: Option<ActuatorCommand>) -> ActuatorState {
    let mut next = *state;
    if let Some(cmd) = command {
        next.mode = apply(next.mode, cmd);
    }
    let max_move = spec.rate() / next.stroke_time_scale * dt;
    let stroke = spec.rack_stroke;
    // snap residue left by summing many small increments
    let snap = 1e-9 * stroke;
    match next.mode {
        ActuatorMode::Idle => {}
        ActuatorMode::Expanding => {
            next.displacement = (next.displacement + max_move).min(stroke);
            if stroke - next.displacement <= snap {
                next.displacement = stroke;
                next.mode = ActuatorMode::Idle;
            }
        }
        ActuatorMode::Collapsing => {
            next.displacement = (next.displacement - max_move).max(0.0);
            if next.displacement <= snap {
                next.displacement = 0.0;
                next.mode = ActuatorMode::Idle;
            }
        }
        ActuatorMode::SeekTarget { displacement: target, .. } => {
            let target = target.clamp(0.0, stroke);
            let gap = target - next.displacement;
            if gap.abs() <= max_move + snap {
                next.displacement = target;
                next.mode = ActuatorMode::Idle;
            } else {
                next.displacement += max_move.copysign(gap);
            }
        }
    }
    next
}

/// Switch straight to expanding, overriding any target. Idempotent.
pub fn emergency_expand(state: &ActuatorState) -> ActuatorState {
    ActuatorState {
        mode: ActuatorMode::Expanding,
        ..*state
    }
}
