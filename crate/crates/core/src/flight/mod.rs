//! Quadrotor point-mass flight model, PID position control, simulated
//! motion capture and waypoint following.

mod mocap;
mod pid;
mod trajectory;

pub use mocap::{MocapConfig, MocapSample, MocapSensor, DropoutWindow, MOCAP_RATE_HZ};
pub use pid::{pid_update, ControlOutput, PidError, PidGains, PidState, PidTarget, SENSOR_TIMEOUT};
pub use trajectory::{follow_trajectory, Trajectory, TrajectoryProgress, TrajectoryStep, Waypoint};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::assembly::DroneGeometry;
use crate::geometry::PropellerDisc;

pub const GRAVITY: f64 = 9.81;
pub const MAX_TILT: f64 = std::f64::consts::PI / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DroneParams {
    pub base_mass: f64,
    pub payload_capacity: f64,
    /// Motor-to-motor distance across the diagonal.
    pub motor_span: f64,
    pub prop_diameter: f64,
    pub overall_span: f64,
    pub max_total_thrust: f64,
    pub flight_time_budget: f64,
    pub thrust_efficiency: f64,
    /// Linear drag, N per m/s.
    pub linear_drag: f64,
}

impl Default for DroneParams {
    fn default() -> Self {
        let base_mass = 1.2;
        let payload_capacity = 1.6;
        Self {
            base_mass,
            payload_capacity,
            motor_span: 0.45,
            prop_diameter: 0.1143,
            overall_span: 0.70,
            max_total_thrust: (base_mass + payload_capacity) * GRAVITY * 1.3,
            flight_time_budget: 1080.0,
            thrust_efficiency: 1.0,
            linear_drag: 0.1,
        }
    }
}

impl DroneParams {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{name} must be positive"));
            }
        };
        positive("base_mass", self.base_mass);
        positive("motor_span", self.motor_span);
        positive("prop_diameter", self.prop_diameter);
        positive("overall_span", self.overall_span);
        positive("max_total_thrust", self.max_total_thrust);
        positive("flight_time_budget", self.flight_time_budget);
        if !(self.payload_capacity >= 0.0) {
            errs.push("payload_capacity must be non-negative".into());
        }
        if !(self.thrust_efficiency > 0.0 && self.thrust_efficiency <= 1.0) {
            errs.push("thrust_efficiency must be in (0, 1]".into());
        }
        if !(self.linear_drag >= 0.0) {
            errs.push("linear_drag must be non-negative".into());
        }
        if (self.overall_span - (self.motor_span + 2.0 * self.prop_diameter)).abs() > 0.03 {
            errs.push("overall_span must be within 3 cm of motor_span + 2 prop_diameter".into());
        }
        errs
    }

    /// Four horizontal propeller discs on the diagonals, body frame.
    pub fn geometry(&self) -> DroneGeometry {
        let arm = self.motor_span / 2.0 / std::f64::consts::SQRT_2;
        let propellers = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
            .iter()
            .map(|(sx, sy)| PropellerDisc::horizontal(Point3::new(sx * arm, sy * arm, 0.0), self.prop_diameter / 2.0))
            .collect();
        DroneGeometry { propellers }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub margin_kg: f64,
}

pub fn payload_feasibility(params: &DroneParams, guard_total_mass: f64) -> Feasibility {
    let margin = params.payload_capacity - guard_total_mass;
    Feasibility {
        feasible: guard_total_mass <= params.payload_capacity,
        margin_kg: margin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    ThrustLoss,
    SensorLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FaultFlags {
    pub thrust_loss: bool,
    pub sensor_loss: bool,
}

impl FaultFlags {
    pub fn set(&mut self, fault: Fault, on: bool) {
        match fault {
            Fault::ThrustLoss => self.thrust_loss = on,
            Fault::SensorLoss => self.sensor_loss = on,
        }
    }

    pub fn active(&self) -> Vec<Fault> {
        let mut out = Vec::new();
        if self.thrust_loss {
            out.push(Fault::ThrustLoss);
        }
        if self.sensor_loss {
            out.push(Fault::SensorLoss);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroneState {
    pub position: Point3<f64>,
    pub velocity: Vector3<f64>,
    /// Kinematic acceleration from the last step.
    pub acceleration: Vector3<f64>,
    pub yaw: f64,
    /// Unit thrust direction; level flight is +z.
    pub body_up: Vector3<f64>,
    pub thrust_command: f64,
    pub faults: FaultFlags,
}

impl DroneState {
    pub fn at_rest(position: Point3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
            yaw: 0.0,
            body_up: Vector3::z(),
            thrust_command: 0.0,
            faults: FaultFlags::default(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.coords.iter().chain(self.velocity.iter()).all(|v| v.is_finite()) && self.thrust_command.is_finite()
    }
}

/// Thrust direction for a commanded horizontal acceleration, tilt capped.
pub fn tilt_direction(horizontal: Vector3<f64>) -> Vector3<f64> {
    let h = Vector3::new(horizontal.x, horizontal.y, 0.0);
    let mag = h.norm();
    if mag == 0.0 {
        return Vector3::z();
    }
    let tilt = (mag / GRAVITY).atan().min(MAX_TILT);
    h / mag * tilt.sin() + Vector3::z() * tilt.cos()
}

/// Thrust actually produced this step.
pub fn effective_thrust(state: &DroneState, params: &DroneParams) -> f64 {
    if state.faults.thrust_loss {
        return 0.0;
    }
    state.thrust_command.clamp(0.0, params.max_total_thrust) * params.thrust_efficiency
}

/// One velocity-Verlet step. `external` gives any extra force (contacts)
/// at a position and velocity. The floor at z = 0 stops the body dead.
pub fn step_dynamics_with(
    state: &DroneState,
    params: &DroneParams,
    total_mass: f64,
    dt: f64,
    external: &dyn Fn(&Point3<f64>, &Vector3<f64>) -> Vector3<f64>,
) -> DroneState {
    let thrust = state.body_up * effective_thrust(state, params);
    let accel = |p: &Point3<f64>, v: &Vector3<f64>| {
        (thrust - v * params.linear_drag + external(p, v)) / total_mass - Vector3::z() * GRAVITY
    };
    let a0 = accel(&state.position, &state.velocity);
    let mut position = state.position + state.velocity * dt + a0 * (0.5 * dt * dt);
    let predicted = state.velocity + a0 * dt;
    let a1 = accel(&position, &predicted);
    let mut velocity = state.velocity + (a0 + a1) * (0.5 * dt);
    let mut acceleration = a1;
    if position.z < 0.0 {
        position.z = 0.0;
        if velocity.z < 0.0 {
            velocity.z = 0.0;
        }
        acceleration.z = acceleration.z.max(0.0);
    }
    DroneState {
        position,
        velocity,
        acceleration,
        thrust_command: state.thrust_command.clamp(0.0, params.max_total_thrust),
        ..*state
    }
}

pub fn step_dynamics(state: &DroneState, params: &DroneParams, total_mass: f64, dt: f64) -> DroneState {
    step_dynamics_with(state, params, total_mass, dt, &|_, _| Vector3::zeros())
}
