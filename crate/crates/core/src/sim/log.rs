use std::io::Write;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::scenario::GuardAction;
use crate::flight::Fault;
use crate::safety::{BumpHint, ContactEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandSource {
    Script,
    Operator,
    Proximity,
    Freefall,
    SensorLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    Expanded,
    Collapsed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    RunStart {
        t: f64,
        name: String,
        seed: u64,
        mode: String,
        guard_kind: String,
        total_mass: f64,
        rack_stroke: f64,
        segment_length: f64,
    },
    State {
        t: f64,
        position: Point3<f64>,
        velocity: Vector3<f64>,
        guard_radius: f64,
        displacement: f64,
        actuator_mode: String,
        thrust: f64,
        faults: Vec<Fault>,
        min_obstacle_distance: Option<f64>,
        min_human_distance: Option<f64>,
        contacts: Vec<BumpHint>,
        damaged: bool,
    },
    GuardCommand {
        t: f64,
        source: CommandSource,
        action: GuardAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_m: Option<f64>,
        effective_at: f64,
    },
    ActuatorTransition {
        t: f64,
        from: String,
        to: String,
        displacement: f64,
    },
    ActuatorLimit {
        t: f64,
        limit: Limit,
    },
    Contact(ContactEvent),
    Fault {
        t: f64,
        fault: Fault,
        active: bool,
        reason: String,
    },
    FreefallDetected {
        t: f64,
    },
    StructureDamaged {
        t: f64,
        obstacle: usize,
        force: f64,
        capacity: f64,
    },
    PropellerContact {
        t: f64,
        propeller: usize,
        obstacle: usize,
        point: Point3<f64>,
    },
    WaypointReached {
        t: f64,
        index: usize,
    },
    TrajectoryComplete {
        t: f64,
    },
    RunEnd {
        t: f64,
        reason: String,
    },
}

impl LogRecord {
    pub fn t(&self) -> f64 {
        match self {
            LogRecord::Contact(e) => e.time,
            LogRecord::RunStart { t, .. }
            | LogRecord::State { t, .. }
            | LogRecord::GuardCommand { t, .. }
            | LogRecord::ActuatorTransition { t, .. }
            | LogRecord::ActuatorLimit { t, .. }
            | LogRecord::Fault { t, .. }
            | LogRecord::FreefallDetected { t }
            | LogRecord::StructureDamaged { t, .. }
            | LogRecord::PropellerContact { t, .. }
            | LogRecord::WaypointReached { t, .. }
            | LogRecord::TrajectoryComplete { t }
            | LogRecord::RunEnd { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Incomplete,
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub min_human_separation: Option<f64>,
    pub min_obstacle_separation: Option<f64>,
    pub peak_contact_force: f64,
    pub contact_records: usize,
    pub expansion_latency: Option<f64>,
    pub freefall_detected_at: Option<f64>,
    pub structure_damaged: bool,
    pub propeller_contacts: usize,
    pub duration: f64,
    pub outcome: Outcome,
}

fn fold_min(acc: Option<f64>, v: Option<f64>) -> Option<f64> {
    match (acc, v) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Pure fold over the log.
pub fn metrics_summary(log: &[LogRecord]) -> Metrics {
    let mut m = Metrics {
        min_human_separation: None,
        min_obstacle_separation: None,
        peak_contact_force: 0.0,
        contact_records: 0,
        expansion_latency: None,
        freefall_detected_at: None,
        structure_damaged: false,
        propeller_contacts: 0,
        duration: 0.0,
        outcome: Outcome::Incomplete,
    };
    let mut trajectory_mode = false;
    let mut trajectory_done = false;
    let mut ended = false;
    let mut expand_asked: Option<f64> = None;
    for rec in log {
        m.duration = m.duration.max(rec.t());
        match rec {
            LogRecord::RunStart { mode, .. } => trajectory_mode = mode == "trajectory",
            LogRecord::State {
                min_obstacle_distance,
                min_human_distance,
                ..
            } => {
                m.min_obstacle_separation = fold_min(m.min_obstacle_separation, *min_obstacle_distance);
                m.min_human_separation = fold_min(m.min_human_separation, *min_human_distance);
            }
            LogRecord::GuardCommand { t, action, .. } => {
                if matches!(action, GuardAction::Expand | GuardAction::Emergency) && expand_asked.is_none() && m.expansion_latency.is_none() {
                    expand_asked = Some(*t);
                }
            }
            LogRecord::ActuatorLimit { t, limit: Limit::Expanded } => {
                if let (Some(start), None) = (expand_asked, m.expansion_latency) {
                    m.expansion_latency = Some(t - start);
                }
            }
            LogRecord::Contact(e) => {
                m.contact_records += 1;
                m.peak_contact_force = m.peak_contact_force.max(e.applied_force);
            }
            LogRecord::FreefallDetected { t } => {
                m.freefall_detected_at.get_or_insert(*t);
            }
            LogRecord::StructureDamaged { .. } => m.structure_damaged = true,
            LogRecord::PropellerContact { .. } => m.propeller_contacts += 1,
            LogRecord::TrajectoryComplete { .. } => trajectory_done = true,
            LogRecord::RunEnd { .. } => ended = true,
            _ => {}
        }
    }
    m.outcome = if m.propeller_contacts > 0 {
        Outcome::Failure
    } else if ended && (!trajectory_mode || trajectory_done) {
        Outcome::Success
    } else {
        Outcome::Incomplete
    };
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub t: f64,
    pub position: Point3<f64>,
    pub velocity: Vector3<f64>,
    pub guard_radius: f64,
    pub actuator_mode: String,
    pub contacts: Vec<BumpHint>,
    pub faults: Vec<Fault>,
    pub min_obstacle_distance: Option<f64>,
}

/// Latest state sample, updated by any later actuator transitions and faults.
pub fn telemetry_from_log(log: &[LogRecord]) -> Option<TelemetryFrame> {
    let idx = log.iter().rposition(|r| matches!(r, LogRecord::State { .. }))?;
    let LogRecord::State {
        t,
        position,
        velocity,
        guard_radius,
        actuator_mode,
        faults,
        min_obstacle_distance,
        contacts,
        ..
    } = &log[idx]
    else {
        unreachable!()
    };
    let mut frame = TelemetryFrame {
        t: *t,
        position: *position,
        velocity: *velocity,
        guard_radius: *guard_radius,
        actuator_mode: actuator_mode.clone(),
        contacts: contacts.clone(),
        faults: faults.clone(),
        min_obstacle_distance: *min_obstacle_distance,
    };
    for rec in &log[idx + 1..] {
        match rec {
            LogRecord::ActuatorTransition { t, to, .. } => {
                frame.actuator_mode = to.clone();
                frame.t = frame.t.max(*t);
            }
            LogRecord::Fault { t, fault, active, .. } => {
                frame.faults.retain(|f| f != fault);
                if *active {
                    frame.faults.push(*fault);
                    frame.faults.sort();
                }
                frame.t = frame.t.max(*t);
            }
            _ => {}
        }
    }
    Some(frame)
}

pub fn write_jsonl<W: Write>(out: &mut W, log: &[LogRecord]) -> std::io::Result<()> {
    for rec in log {
        serde_json::to_writer(&mut *out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<Vec<LogRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[derive(Serialize)]
struct StateRow<'a> {
    t: f64,
    x: f64,
    y: f64,
    z: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    guard_radius: f64,
    displacement: f64,
    actuator_mode: &'a str,
    thrust: f64,
    min_obstacle_distance: Option<f64>,
    contacts: usize,
}

pub fn write_states_csv<W: Write>(out: W, log: &[LogRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for rec in log {
        if let LogRecord::State {
            t,
            position,
            velocity,
            guard_radius,
            displacement,
            actuator_mode,
            thrust,
            min_obstacle_distance,
            contacts,
            ..
        } = rec
        {
            w.serialize(StateRow {
                t: *t,
                x: position.x,
                y: position.y,
                z: position.z,
                vx: velocity.x,
                vy: velocity.y,
                vz: velocity.z,
                guard_radius: *guard_radius,
                displacement: *displacement,
                actuator_mode,
                thrust: *thrust,
                min_obstacle_distance: *min_obstacle_distance,
                contacts: contacts.len(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `events.jsonl`, `metrics.json` and `states.csv` under `dir`.
pub fn write_outputs(dir: &Path, log: &[LogRecord], metrics: &Metrics) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut events = std::io::BufWriter::new(std::fs::File::create(dir.join("events.jsonl"))?);
    write_jsonl(&mut events, log)?;
    events.flush()?;
    let metrics_text = serde_json::to_string_pretty(metrics).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("metrics.json"), metrics_text + "\n")?;
    let states = std::fs::File::create(dir.join("states.csv"))?;
    write_states_csv(states, log).map_err(std::io::Error::other)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn command(t: f64) -> LogRecord {
        LogRecord::GuardCommand {
            t,
            source: CommandSource::Script,
            action: GuardAction::Expand,
            radius_m: None,
            effective_at: t,
        }
    }

    fn contact(t: f64, force: f64) -> LogRecord {
        LogRecord::Contact(ContactEvent {
            time: t,
            obstacle: 0,
            member: 0,
            point: Point3::origin(),
            contact_normal: Vector3::x(),
            depth: 0.0,
            applied_force: force,
            local_capacity: 9.0,
            broke: false,
            closing_speed: 0.0,
        })
    }

    #[test]
    fn empty_log_is_neutral() {
        let m = metrics_summary(&[]);
        assert_eq!(m.outcome, Outcome::Incomplete);
        assert_eq!(m.peak_contact_force, 0.0);
        assert_eq!(m.expansion_latency, None);
        assert!(telemetry_from_log(&[]).is_none());
    }

    #[test]
    fn peak_force_and_latency() {
        let log = vec![
            command(1.0),
            contact(2.0, 7.0),
            LogRecord::ActuatorLimit {
                t: 7.0,
                limit: Limit::Expanded,
            },
            LogRecord::RunEnd {
                t: 8.0,
                reason: "duration".into(),
            },
        ];
        let m = metrics_summary(&log);
        assert_eq!(m.peak_contact_force, 7.0);
        assert_eq!(m.expansion_latency, Some(6.0));
        assert_eq!(m.outcome, Outcome::Success);
        assert_eq!(metrics_summary(&log), m);
    }

    #[test]
    fn jsonl_round_trip() {
        let log = vec![command(0.5), contact(1.0, 3.0)];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(r#"{"kind":"guard_command""#));
        assert_eq!(read_jsonl(&text).unwrap(), log);
    }

    #[test]
    fn telemetry_follows_later_transitions() {
        let log = vec![
            LogRecord::State {
                t: 1.0,
                position: Point3::new(0.0, 0.0, 1.0),
                velocity: Vector3::zeros(),
                guard_radius: 0.26,
                displacement: 0.0,
                actuator_mode: "Idle".into(),
                thrust: 27.0,
                faults: vec![],
                min_obstacle_distance: None,
                min_human_distance: None,
                contacts: vec![],
                damaged: false,
            },
            LogRecord::ActuatorTransition {
                t: 1.01,
                from: "Idle".into(),
                to: "Expanding".into(),
                displacement: 0.0,
            },
        ];
        let f = telemetry_from_log(&log).unwrap();
        assert_eq!(f.actuator_mode, "Expanding");
        assert_eq!(f.t, 1.01);
    }
}
