use std::collections::VecDeque;

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use super::log::{metrics_summary, telemetry_from_log, CommandSource, Limit, LogRecord, Metrics, TelemetryFrame};
use super::scenario::{ExternalCommand, FieldError, GuardAction, Hardware, Mode, Scenario};
use crate::actuator::{displacement_to_theta, emergency_expand, seek_command, step as actuator_step, ActuatorCommand, ActuatorMode, ActuatorState};
use crate::assembly::{DroneGeometry, Member};
use crate::flight::{
    follow_trajectory, pid_update, step_dynamics_with, DroneState, Fault, MocapSensor, PidError, PidState, PidTarget, TrajectoryProgress,
    GRAVITY,
};
use crate::safety::{
    bump_hints, contact_force, nearest_clearance, propeller_contacts, proximity_policy, resolve_contacts, AccelSample, ContactEvent,
    FreefallMonitor, GuardIntegrity, ObstacleTag, ProximityLatch,
};
use crate::scissor::JointFamily;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<FieldError>),
    #[error("runtime fault: {0}")]
    Runtime(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Setpoint {
    Hold(Point3<f64>),
    Trajectory(TrajectoryProgress),
    Velocity { velocity: Vector3<f64>, carrot: Point3<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    due: f64,
    command: ActuatorCommand,
}

/// Single-threaded, fixed-step world. Everything observable goes to the log.
pub struct Engine {
    scenario: Scenario,
    hw: Hardware,
    geometry: DroneGeometry,
    total_mass: f64,
    dt: f64,
    control_every: u64,
    policy_every: u64,
    telemetry_every: u64,
    tick: u64,
    drone: DroneState,
    actuator: ActuatorState,
    members: Vec<Member>,
    guard_radius: f64,
    member_displacement: f64,
    pid: PidState,
    mocap: MocapSensor,
    rng: ChaCha8Rng,
    setpoint: Setpoint,
    freefall: FreefallMonitor,
    freefall_latched: bool,
    sensor_expand_latched: bool,
    proximity: ProximityLatch,
    integrity: GuardIntegrity,
    pending: Vec<Pending>,
    inbox: VecDeque<ExternalCommand>,
    next_command: usize,
    fault_starts: Vec<bool>,
    fault_ends: Vec<bool>,
    sensor_blind: bool,
    battery_empty: bool,
    last_contacts: Vec<ContactEvent>,
    operator_emergency_this_tick: bool,
    finished: Option<String>,
    end_logged: bool,
    log: Vec<LogRecord>,
}

fn step_count(physics: u32, rate: u32) -> u64 {
    (physics / rate) as u64
}

impl Engine {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        let errs = scenario.validate();
        if !errs.is_empty() {
            return Err(SimError::Validation(errs));
        }
        let hw = scenario.build_hardware().map_err(SimError::Runtime)?;
        let r = scenario.rates;
        let total_mass = scenario.drone.base_mass + hw.guard.total_mass();
        let mut drone = DroneState::at_rest(scenario.initial.position);
        drone.velocity = scenario.initial.velocity;
        drone.thrust_command = total_mass * GRAVITY;
        let actuator = ActuatorState::at(&hw.rack, scenario.initial.displacement).map_err(|e| SimError::Runtime(e.to_string()))?;
        let setpoint = match &scenario.mode {
            Mode::Trajectory(_) => Setpoint::Trajectory(TrajectoryProgress::start(scenario.initial.position)),
            Mode::Hold | Mode::Teleop => Setpoint::Hold(scenario.initial.position),
        };
        let geometry = scenario.drone.geometry();
        let mut engine = Self {
            hw,
            geometry,
            total_mass,
            dt: 1.0 / r.physics as f64,
            control_every: step_count(r.physics, r.control),
            policy_every: step_count(r.physics, r.policy),
            telemetry_every: step_count(r.physics, r.telemetry),
            tick: 0,
            drone,
            actuator,
            members: Vec::new(),
            guard_radius: 0.0,
            member_displacement: f64::NAN,
            pid: PidState::default(),
            mocap: MocapSensor::new(scenario.control.mocap.clone()),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            setpoint,
            freefall: FreefallMonitor::new(scenario.policy.freefall_accel_window, scenario.policy.freefall_tolerance),
            freefall_latched: false,
            sensor_expand_latched: false,
            proximity: ProximityLatch::default(),
            integrity: GuardIntegrity::default(),
            pending: Vec::new(),
            inbox: VecDeque::new(),
            next_command: 0,
            fault_starts: vec![false; scenario.faults.len()],
            fault_ends: vec![false; scenario.faults.len()],
            sensor_blind: false,
            battery_empty: false,
            last_contacts: Vec::new(),
            operator_emergency_this_tick: false,
            finished: None,
            end_logged: false,
            log: Vec::new(),
            scenario,
        };
        engine.scenario.commands.sort_by(|a, b| a.at.total_cmp(&b.at));
        engine.refresh_members()?;
        engine.log.push(LogRecord::RunStart {
            t: 0.0,
            name: engine.scenario.name.clone(),
            seed: engine.scenario.seed,
            mode: engine.scenario.mode.label().into(),
            guard_kind: format!("{:?}", engine.scenario.guard.kind),
            total_mass,
            rack_stroke: engine.hw.rack.rack_stroke,
            segment_length: engine.hw.guard.ring.segment_length(),
        });
        engine.control();
        engine.log_state();
        Ok(engine)
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<LogRecord> {
        self.log
    }

    pub fn drone(&self) -> &DroneState {
        &self.drone
    }

    pub fn actuator(&self) -> &ActuatorState {
        &self.actuator
    }

    pub fn hardware(&self) -> &Hardware {
        &self.hw
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn guard_radius(&self) -> f64 {
        self.guard_radius
    }

    pub fn finished(&self) -> Option<&str> {
        self.finished.as_deref()
    }

    pub fn telemetry(&self) -> Option<TelemetryFrame> {
        telemetry_from_log(&self.log)
    }

    /// Reject commands the engine could not carry out.
    pub fn check_command(&self, cmd: &ExternalCommand) -> Result<(), String> {
        match *cmd {
            ExternalCommand::Velocity { velocity } if !velocity.iter().all(|v| v.is_finite()) => Err("velocity must be finite".into()),
            ExternalCommand::Waypoint { position, hold_time } if !position.coords.iter().all(|v| v.is_finite()) || !(hold_time >= 0.0) => {
                Err("waypoint needs a finite position and non-negative hold_time".into())
            }
            ExternalCommand::Guard {
                action: GuardAction::Seek,
                radius_m,
            } => {
                let r = radius_m.ok_or("seek needs radius_m")?;
                seek_command(&self.hw.rack, &self.hw.guard.ring, r).map(|_| ()).map_err(|e| e.to_string())
            }
            _ => Ok(()),
        }
    }

    /// Queue a command for the next tick boundary.
    pub fn submit(&mut self, cmd: ExternalCommand) -> Result<(), String> {
        self.check_command(&cmd)?;
        self.inbox.push_back(cmd);
        Ok(())
    }

    fn refresh_members(&mut self) -> Result<(), SimError> {
        if self.member_displacement == self.actuator.displacement {
            return Ok(());
        }
        let theta = displacement_to_theta(&self.hw.rack, &self.hw.guard.ring, self.actuator.displacement)
            .map_err(|e| SimError::Runtime(e.to_string()))?;
        self.members = self.hw.guard.members(theta);
        self.guard_radius = self.hw.guard.ring.radius(JointFamily::Outer, theta);
        self.member_displacement = self.actuator.displacement;
        Ok(())
    }

    /// Advance one physics tick.
    pub fn step(&mut self) -> Result<(), SimError> {
        if self.finished.is_some() {
            return Ok(());
        }
        self.operator_emergency_this_tick = false;
        self.intake();
        self.physics()?;
        self.tick += 1;
        if self.tick % self.control_every == 0 {
            self.control();
        }
        if self.tick % self.policy_every == 0 {
            self.policy();
        }
        self.actuate()?;
        self.contacts();
        if self.tick % self.telemetry_every == 0 {
            self.log_state();
        }
        if self.finished.is_some() {
            self.finish("");
        }
        Ok(())
    }

    /// Step until `t_end`, stopping early on mission failure.
    pub fn run_until(&mut self, t_end: f64) -> Result<(), SimError> {
        let last = (t_end / self.dt - 1e-9).ceil() as u64;
        while self.tick < last && self.finished.is_none() {
            self.step()?;
        }
        Ok(())
    }

    /// Close the run; the first reason given sticks.
    pub fn finish(&mut self, reason: &str) {
        if self.finished.is_none() {
            self.finished = Some(reason.to_string());
        }
        if !self.end_logged {
            self.end_logged = true;
            self.log.push(LogRecord::RunEnd {
                t: self.time(),
                reason: self.finished.clone().unwrap_or_default(),
            });
        }
    }

    fn intake(&mut self) {
        let t = self.time();
        for i in 0..self.scenario.faults.len() {
            let f = self.scenario.faults[i];
            if !self.fault_starts[i] && f.at <= t + 1e-12 {
                self.fault_starts[i] = true;
                self.set_fault(f.fault, true, "injected");
            }
            if let Some(until) = f.until {
                if self.fault_starts[i] && !self.fault_ends[i] && until <= t + 1e-12 {
                    self.fault_ends[i] = true;
                    self.set_fault(f.fault, false, "cleared");
                }
            }
        }
        if !self.battery_empty && t >= self.scenario.drone.flight_time_budget {
            self.battery_empty = true;
            self.set_fault(Fault::ThrustLoss, true, "battery");
        }
        while self.next_command < self.scenario.commands.len() && self.scenario.commands[self.next_command].at <= t + 1e-12 {
            let cmd = self.scenario.commands[self.next_command].command;
            self.next_command += 1;
            self.apply_external(cmd, CommandSource::Script);
        }
        while let Some(cmd) = self.inbox.pop_front() {
            self.apply_external(cmd, CommandSource::Operator);
        }
    }

    fn set_fault(&mut self, fault: Fault, on: bool, reason: &str) {
        match fault {
            Fault::ThrustLoss => self.drone.faults.thrust_loss = on || self.battery_empty,
            Fault::SensorLoss => self.sensor_blind = on,
        }
        self.log.push(LogRecord::Fault {
            t: self.time(),
            fault,
            active: on,
            reason: reason.into(),
        });
    }

    fn apply_external(&mut self, cmd: ExternalCommand, source: CommandSource) {
        match cmd {
            ExternalCommand::Velocity { velocity } => {
                let cap = self.scenario.control.teleop_max_speed;
                let v = if velocity.norm() > cap { velocity.normalize() * cap } else { velocity };
                let carrot = match self.setpoint {
                    Setpoint::Velocity { carrot, .. } => carrot,
                    _ => self.drone.position,
                };
                self.setpoint = Setpoint::Velocity { velocity: v, carrot };
            }
            ExternalCommand::Waypoint { position, .. } => self.setpoint = Setpoint::Hold(position),
            ExternalCommand::Guard { action, radius_m } => {
                if action == GuardAction::Emergency {
                    if source == CommandSource::Operator || source == CommandSource::Script {
                        self.operator_emergency_this_tick = true;
                    }
                    self.emergency(source);
                    return;
                }
                let command = match action {
                    GuardAction::Expand => ActuatorCommand::Expand,
                    GuardAction::Collapse => ActuatorCommand::Collapse,
                    GuardAction::Stop => ActuatorCommand::Stop,
                    GuardAction::Seek => match radius_m.map(|r| seek_command(&self.hw.rack, &self.hw.guard.ring, r)) {
                        Some(Ok(c)) => c,
                        _ => return,
                    },
                    GuardAction::Emergency => unreachable!(),
                };
                self.queue_guard(source, action, radius_m, command);
            }
        }
    }

    fn queue_guard(&mut self, source: CommandSource, action: GuardAction, radius_m: Option<f64>, command: ActuatorCommand) {
        let t = self.time();
        let due = t + self.hw.rack.command_latency;
        self.log.push(LogRecord::GuardCommand {
            t,
            source,
            action,
            radius_m,
            effective_at: due,
        });
        self.pending.push(Pending { due, command });
    }

    fn emergency(&mut self, source: CommandSource) {
        let t = self.time();
        self.log.push(LogRecord::GuardCommand {
            t,
            source,
            action: GuardAction::Emergency,
            radius_m: None,
            effective_at: t,
        });
        // anything still in flight would undo the emergency
        self.pending.clear();
        let before = self.actuator;
        self.actuator = emergency_expand(&self.actuator);
        self.note_transition(&before);
    }

    fn physics(&mut self) -> Result<(), SimError> {
        let obstacles = &self.scenario.obstacles;
        let members = &self.members;
        let policy = &self.scenario.policy;
        let tube = self.hw.guard.tube_radius;
        let integrity = &self.integrity;
        let force = |p: &Point3<f64>, v: &Vector3<f64>| contact_force(p, v, members, obstacles, policy, tube, integrity);
        self.drone = step_dynamics_with(&self.drone, &self.scenario.drone, self.total_mass, self.dt, &force);
        if !self.drone.is_finite() {
            return Err(SimError::Runtime(format!("non-finite drone state at t={:.3}", self.time())));
        }
        let noise = self.scenario.control.accel_noise_sigma;
        let mut az = self.drone.acceleration.z;
        if noise > 0.0 {
            az += Normal::new(0.0, noise).expect("validated").sample(&mut self.rng);
        }
        self.freefall.push(AccelSample {
            t: self.time() + self.dt,
            span: self.dt,
            accel_z: az,
        });
        Ok(())
    }

    fn control(&mut self) {
        let t = self.time();
        let dt = self.control_every as f64 * self.dt;
        let sample = self.mocap.sample(t, &self.drone.position, self.sensor_blind, &mut self.rng);
        let target = match &mut self.setpoint {
            Setpoint::Hold(p) => PidTarget::hold(*p),
            Setpoint::Velocity { velocity, carrot } => {
                *carrot += *velocity * dt;
                PidTarget {
                    position: *carrot,
                    velocity: *velocity,
                }
            }
            Setpoint::Trajectory(progress) => {
                let Mode::Trajectory(traj) = &self.scenario.mode else {
                    unreachable!()
                };
                let seen = if sample.valid { sample.position } else { self.drone.position };
                let out = follow_trajectory(traj, progress, &seen, t, dt);
                *progress = out.progress;
                if let Some(index) = out.reached {
                    self.log.push(LogRecord::WaypointReached { t, index });
                }
                if out.completed {
                    self.log.push(LogRecord::TrajectoryComplete { t });
                }
                out.target
            }
        };
        let history = self.mocap.history();
        match pid_update(&self.scenario.control.gains, &self.pid, &target, &history, t, dt, self.total_mass) {
            Ok((out, next)) => {
                self.pid = next;
                self.drone.thrust_command = out.thrust;
                self.drone.body_up = out.body_up;
                if self.drone.faults.sensor_loss {
                    self.drone.faults.sensor_loss = false;
                    self.log.push(LogRecord::Fault {
                        t,
                        fault: Fault::SensorLoss,
                        active: false,
                        reason: "samples resumed".into(),
                    });
                }
            }
            Err(PidError::SensorLoss { .. }) | Err(PidError::NoSample) => {
                if !self.drone.faults.sensor_loss {
                    self.drone.faults.sensor_loss = true;
                    self.log.push(LogRecord::Fault {
                        t,
                        fault: Fault::SensorLoss,
                        active: true,
                        reason: "no valid motion capture".into(),
                    });
                }
            }
        }
    }

    fn policy(&mut self) {
        let t = self.time();
        let mut preempted = self.operator_emergency_this_tick;
        if !self.freefall_latched && self.freefall.detect(self.drone.faults.thrust_loss) {
            self.freefall_latched = true;
            self.log.push(LogRecord::FreefallDetected { t });
            if !preempted {
                self.emergency(CommandSource::Freefall);
            }
            preempted = true;
        }
        if self.drone.faults.sensor_loss && !self.sensor_expand_latched {
            self.sensor_expand_latched = true;
            if !preempted {
                self.emergency(CommandSource::SensorLoss);
            }
            preempted = true;
        }
        if !self.drone.faults.sensor_loss {
            self.sensor_expand_latched = false;
        }
        let decision = proximity_policy(&self.drone.position, &self.scenario.obstacles, &self.scenario.policy);
        if let Some(cmd) = self.proximity.update(decision) {
            if !preempted {
                let action = if cmd == ActuatorCommand::Expand { GuardAction::Expand } else { GuardAction::Collapse };
                self.queue_guard(CommandSource::Proximity, action, None, cmd);
            }
        }
    }

    fn note_transition(&mut self, before: &ActuatorState) {
        if before.mode != self.actuator.mode {
            self.log.push(LogRecord::ActuatorTransition {
                t: self.time(),
                from: before.mode.label().into(),
                to: self.actuator.mode.label().into(),
                displacement: self.actuator.displacement,
            });
        }
    }

    fn actuate(&mut self) -> Result<(), SimError> {
        let t = self.time();
        let mut due = None;
        self.pending.retain(|p| {
            if p.due <= t + 1e-12 {
                due = Some(p.command);
                false
            } else {
                true
            }
        });
        let before = self.actuator;
        if let Some(cmd) = due {
            // the command takes hold at the start of this tick
            self.actuator = actuator_step(&self.actuator, &self.hw.rack, 0.0, Some(cmd));
            let sigma = self.hw.rack.stroke_time_jitter;
            if sigma > 0.0 && self.actuator.mode != ActuatorMode::Idle {
                let draw = Normal::new(1.0, sigma).expect("validated").sample(&mut self.rng);
                self.actuator.stroke_time_scale = draw.max(0.5);
            }
            self.note_transition(&before);
        }
        let moving = self.actuator;
        self.actuator = actuator_step(&self.actuator, &self.hw.rack, self.dt, None);
        if moving.mode != ActuatorMode::Idle && self.actuator.mode == ActuatorMode::Idle {
            let stroke = self.hw.rack.rack_stroke;
            self.log.push(LogRecord::ActuatorTransition {
                t: t + self.dt,
                from: moving.mode.label().into(),
                to: self.actuator.mode.label().into(),
                displacement: self.actuator.displacement,
            });
            if self.actuator.displacement == stroke {
                self.log.push(LogRecord::ActuatorLimit {
                    t: t + self.dt,
                    limit: Limit::Expanded,
                });
            } else if self.actuator.displacement == 0.0 {
                self.log.push(LogRecord::ActuatorLimit {
                    t: t + self.dt,
                    limit: Limit::Collapsed,
                });
            }
        }
        self.refresh_members()
    }

    fn contacts(&mut self) {
        let t = self.time();
        let (events, _) = resolve_contacts(
            t,
            &self.drone.position,
            &self.drone.velocity,
            &self.hw.guard,
            &self.members,
            &self.scenario.obstacles,
            &self.scenario.policy,
            &self.integrity,
        );
        for e in &events {
            self.log.push(LogRecord::Contact(*e));
        }
        if self.integrity.absorb(&events) {
            let worst = events
                .iter()
                .filter(|e| e.broke)
                .max_by(|a, b| a.applied_force.total_cmp(&b.applied_force))
                .expect("a break was reported");
            self.log.push(LogRecord::StructureDamaged {
                t,
                obstacle: worst.obstacle,
                force: worst.applied_force,
                capacity: worst.local_capacity,
            });
        }
        self.last_contacts = events;
        let strikes = propeller_contacts(&self.drone.position, &self.geometry.propellers, &self.scenario.obstacles);
        if !strikes.is_empty() {
            for s in strikes {
                self.log.push(LogRecord::PropellerContact {
                    t,
                    propeller: s.propeller,
                    obstacle: s.obstacle,
                    point: s.point,
                });
            }
            self.finished = Some("mission_failure".into());
        }
    }

    fn log_state(&mut self) {
        let p = self.drone.position;
        let obstacles = &self.scenario.obstacles;
        let min_obstacle_distance = obstacles
            .iter()
            .filter(|o| o.tag != ObstacleTag::Ground)
            .map(|o| o.sdf(&p))
            .min_by(f64::total_cmp);
        let min_human_distance = obstacles
            .iter()
            .filter(|o| o.tag == ObstacleTag::Human)
            .map(|o| o.sdf(&p))
            .min_by(f64::total_cmp);
        self.log.push(LogRecord::State {
            t: self.time(),
            position: p,
            velocity: self.drone.velocity,
            guard_radius: self.guard_radius,
            displacement: self.actuator.displacement,
            actuator_mode: self.actuator.mode.label().into(),
            thrust: crate::flight::effective_thrust(&self.drone, &self.scenario.drone),
            faults: self.drone.faults.active(),
            min_obstacle_distance,
            min_human_distance,
            contacts: bump_hints(&self.last_contacts),
            damaged: self.integrity.damaged,
        });
    }

    /// Clearance the proximity policy currently sees.
    pub fn policy_clearance(&self) -> Option<f64> {
        nearest_clearance(&self.drone.position, &self.scenario.obstacles, &self.scenario.policy)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub log: Vec<LogRecord>,
    pub metrics: Metrics,
}

/// Run a scenario start to finish.
pub fn run_headless(scenario: Scenario) -> Result<RunResult, SimError> {
    let duration = scenario.duration;
    let mut engine = Engine::new(scenario)?;
    engine.run_until(duration)?;
    engine.finish("duration");
    let log = engine.into_log();
    let metrics = metrics_summary(&log);
    Ok(RunResult { log, metrics })
}
