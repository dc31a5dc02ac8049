use nalgebra::{Isometry3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::actuator::{RackPinionSpec, DEFAULT_COMMAND_LATENCY, DEFAULT_FULL_STROKE_TIME, DEFAULT_PINION_RADIUS};
use crate::assembly::{
    assemble, AssemblyOptions, GuardConfiguration, GuardKind, GuardMasses, DEFAULT_CYLINDER_SEPARATION, DEFAULT_HUB_HEIGHT,
    DEFAULT_TUBE_RADIUS,
};
use crate::flight::{payload_feasibility, DroneParams, Fault, MocapConfig, PidGains, Trajectory};
use crate::safety::{Obstacle, PolicyConfig};
use crate::scissor::{DeploymentRange, RingSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Rates {
    pub physics: u32,
    pub control: u32,
    pub policy: u32,
    pub telemetry: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            physics: 1000,
            control: 200,
            policy: 50,
            telemetry: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialState {
    pub position: Point3<f64>,
    pub velocity: Vector3<f64>,
    /// Starting rack displacement, metres.
    pub displacement: f64,
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            position: Point3::new(0.0, 0.0, 1.0),
            velocity: Vector3::zeros(),
            displacement: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuardSettings {
    pub kind: GuardKind,
    pub unit_count: usize,
    pub max_outer_diameter: f64,
    pub min_outer_diameter: f64,
    pub hub_height: f64,
    pub ring_mass: f64,
    pub actuator_mass: f64,
    pub tube_radius: f64,
    pub cylinder_separation: f64,
}

impl Default for GuardSettings {
    fn default() -> Self {
        Self {
            kind: GuardKind::Sphere,
            unit_count: 16,
            max_outer_diameter: 0.85,
            min_outer_diameter: 0.52,
            hub_height: DEFAULT_HUB_HEIGHT,
            ring_mass: 0.2,
            actuator_mass: 1.0,
            tube_radius: DEFAULT_TUBE_RADIUS,
            cylinder_separation: DEFAULT_CYLINDER_SEPARATION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActuatorSettings {
    pub pinion_radius: f64,
    pub full_stroke_time: f64,
    pub command_latency: f64,
    pub stroke_time_jitter: f64,
}

impl Default for ActuatorSettings {
    fn default() -> Self {
        Self {
            pinion_radius: DEFAULT_PINION_RADIUS,
            full_stroke_time: DEFAULT_FULL_STROKE_TIME,
            command_latency: DEFAULT_COMMAND_LATENCY,
            stroke_time_jitter: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlSettings {
    pub gains: PidGains,
    pub mocap: MocapConfig,
    /// Accelerometer noise used by free-fall detection, m/s².
    pub accel_noise_sigma: f64,
    /// Cap on operator velocity setpoints, m/s.
    pub teleop_max_speed: f64,
}

impl Default for ControlSettings {
    fn default() -> Self {
        Self {
            gains: PidGains::default(),
            mocap: MocapConfig::default(),
            accel_noise_sigma: 0.0,
            teleop_max_speed: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Mode {
    /// Hold the initial position.
    #[default]
    Hold,
    Trajectory(Trajectory),
    /// Hold until operator commands arrive.
    Teleop,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Hold => "hold",
            Mode::Trajectory(_) => "trajectory",
            Mode::Teleop => "teleop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardAction {
    Expand,
    Collapse,
    Stop,
    Seek,
    Emergency,
}

/// Anything an operator or script can ask of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExternalCommand {
    Velocity {
        velocity: Vector3<f64>,
    },
    Waypoint {
        position: Point3<f64>,
        #[serde(default)]
        hold_time: f64,
    },
    Guard {
        action: GuardAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_m: Option<f64>,
    },
}

impl ExternalCommand {
    pub fn guard(action: GuardAction) -> Self {
        ExternalCommand::Guard { action, radius_m: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedCommand {
    pub at: f64,
    pub command: ExternalCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultInjection {
    pub at: f64,
    pub fault: Fault,
    /// Fault clears at this time; permanent when absent.
    #[serde(default)]
    pub until: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub duration: f64,
    pub rates: Rates,
    pub drone: DroneParams,
    pub initial: InitialState,
    pub guard: GuardSettings,
    pub actuator: ActuatorSettings,
    pub policy: PolicyConfig,
    pub control: ControlSettings,
    pub obstacles: Vec<Obstacle>,
    pub mode: Mode,
    pub faults: Vec<FaultInjection>,
    pub commands: Vec<TimedCommand>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            seed: 0,
            duration: 10.0,
            rates: Rates::default(),
            drone: DroneParams::default(),
            initial: InitialState::default(),
            guard: GuardSettings::default(),
            actuator: ActuatorSettings::default(),
            policy: PolicyConfig::default(),
            control: ControlSettings::default(),
            obstacles: Vec::new(),
            mode: Mode::Hold,
            faults: Vec::new(),
            commands: Vec::new(),
        }
    }
}

/// Guard, rack and deployment band built from a scenario.
#[derive(Debug, Clone)]
pub struct Hardware {
    pub guard: GuardConfiguration,
    pub rack: RackPinionSpec,
    pub range: DeploymentRange,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, Vec<FieldError>> {
        serde_json::from_str(text).map_err(|e| {
            vec![FieldError {
                field: "(document)".into(),
                message: e.to_string(),
            }]
        })
    }

    pub fn build_hardware(&self) -> Result<Hardware, String> {
        let g = &self.guard;
        let ring = RingSpec::calibrated(g.unit_count, g.max_outer_diameter / 2.0)
            .map_err(|e| e.to_string())?
            .with_pose(Isometry3::translation(0.0, 0.0, g.hub_height));
        let range = DeploymentRange::from_collapsed_outer_radius(&ring, g.min_outer_diameter / 2.0).map_err(|e| e.to_string())?;
        let mut rack = RackPinionSpec::for_ring(&ring, &range).map_err(|e| e.to_string())?;
        rack.pinion_radius = self.actuator.pinion_radius;
        rack.full_stroke_time = self.actuator.full_stroke_time;
        rack.command_latency = self.actuator.command_latency;
        rack.stroke_time_jitter = self.actuator.stroke_time_jitter;
        rack.validate().map_err(|e| e.to_string())?;
        let guard = assemble(
            g.kind,
            ring,
            GuardMasses {
                ring_mass: g.ring_mass,
                actuator_mass: g.actuator_mass,
            },
            AssemblyOptions {
                cylinder_separation: g.cylinder_separation,
                tube_radius: g.tube_radius,
            },
        )
        .map_err(|e| e.to_string())?;
        Ok(Hardware { guard, rack, range })
    }

    /// Every problem found, each tied to the offending field.
    pub fn validate(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        fn push(errs: &mut Vec<FieldError>, field: &str, message: String) {
            errs.push(FieldError {
                field: field.into(),
                message,
            })
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            push(&mut errs, "duration", "must be positive and finite".into());
        }
        let r = self.rates;
        if r.physics == 0 || r.control == 0 || r.policy == 0 || r.telemetry == 0 {
            push(&mut errs, "rates", "all rates must be positive".into());
        } else {
            for (name, rate) in [("rates.control", r.control), ("rates.policy", r.policy), ("rates.telemetry", r.telemetry)] {
                if r.physics % rate != 0 {
                    push(&mut errs, name, format!("{rate} Hz does not divide the physics rate {} Hz", r.physics));
                }
            }
            if r.physics < 100 {
                push(&mut errs, "rates.physics", "physics step must be at most 0.01 s".into());
            }
        }
        for m in self.drone.validate() {
            push(&mut errs, "drone", m);
        }
        let g = &self.guard;
        if !(g.min_outer_diameter > 0.0 && g.max_outer_diameter > g.min_outer_diameter) {
            push(&mut errs, "guard", "need 0 < min_outer_diameter < max_outer_diameter".into());
        }
        if !(g.hub_height.is_finite()) {
            push(&mut errs, "guard.hub_height", "must be finite".into());
        }
        if g.unit_count < 8 || g.unit_count % 4 != 0 {
            push(&mut errs, "guard.unit_count", format!("{} is not a multiple of 4 of at least 8", g.unit_count));
        }
        let hw = if errs.iter().all(|e| !e.field.starts_with("guard")) {
            match self.build_hardware() {
                Ok(hw) => Some(hw),
                Err(e) => {
                    push(&mut errs, "guard", e);
                    None
                }
            }
        } else {
            None
        };
        if let Some(hw) = &hw {
            let feas = payload_feasibility(&self.drone, hw.guard.total_mass());
            if !feas.feasible {
                push(&mut errs, 
                    "guard",
                    format!("guard and actuator weigh {:.3} kg, over the {:.3} kg payload", hw.guard.total_mass(), self.drone.payload_capacity),
                );
            }
            if !(0.0..=hw.rack.rack_stroke).contains(&self.initial.displacement) {
                push(&mut errs, "initial.displacement", format!("must lie in [0, {:.4}]", hw.rack.rack_stroke));
            }
        }
        if !self.initial.position.coords.iter().chain(self.initial.velocity.iter()).all(|v| v.is_finite()) {
            push(&mut errs, "initial", "position and velocity must be finite".into());
        }
        for m in self.policy.validate() {
            push(&mut errs, "policy", m);
        }
        for m in self.control.gains.validate() {
            push(&mut errs, "control.gains", m);
        }
        if !(self.control.mocap.noise_sigma >= 0.0 && self.control.accel_noise_sigma >= 0.0) {
            push(&mut errs, "control", "noise levels must be non-negative".into());
        }
        if !(self.control.mocap.rate > 0.0) || (self.control.mocap.rate - r.control as f64).abs() > 1e-9 {
            push(&mut errs, "control.mocap.rate", "must equal the control rate".into());
        }
        if !(self.control.teleop_max_speed > 0.0) {
            push(&mut errs, "control.teleop_max_speed", "must be positive".into());
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if let Some(m) = o.validate() {
                push(&mut errs, &format!("obstacles[{i}]"), m);
            }
        }
        if let Mode::Trajectory(traj) = &self.mode {
            for m in traj.validate() {
                push(&mut errs, "mode", m);
            }
        }
        for (i, f) in self.faults.iter().enumerate() {
            if !(f.at >= 0.0) || f.until.is_some_and(|u| !(u > f.at)) {
                push(&mut errs, &format!("faults[{i}]"), "need at >= 0 and until > at".into());
            }
        }
        for (i, c) in self.commands.iter().enumerate() {
            let field = format!("commands[{i}]");
            if !(c.at >= 0.0) {
                push(&mut errs, &field, "at must be non-negative".into());
            }
            if let (Some(hw), ExternalCommand::Guard { action: GuardAction::Seek, radius_m }) = (&hw, c.command) {
                match radius_m {
                    None => push(&mut errs, &field, "seek needs radius_m".into()),
                    Some(r) => {
                        if let Err(e) = crate::actuator::seek_command(&hw.rack, &hw.guard.ring, r) {
                            push(&mut errs, &field, e.to_string());
                        }
                    }
                }
            }
        }
        errs
    }

    /// Teleop mode is required for interactive serving.
    pub fn validate_for_serving(&self) -> Vec<FieldError> {
        let mut errs = self.validate();
        if self.mode != Mode::Teleop {
            errs.push(FieldError {
                field: "mode".into(),
                message: "serving needs mode teleop".into(),
            });
        }
        errs
    }
}
