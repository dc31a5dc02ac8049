use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{tilt_direction, MocapSample, GRAVITY};

/// Seconds without a valid sample before the controller gives up.
pub const SENSOR_TIMEOUT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub kp: Vector3<f64>,
    pub ki: Vector3<f64>,
    pub kd: Vector3<f64>,
    /// Bound on the integral contribution per axis, m/s².
    pub integrator_clamp: f64,
    /// Bound on the commanded acceleration per axis, m/s².
    pub output_clamp: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: Vector3::new(2.0, 2.0, 4.0),
            ki: Vector3::new(0.1, 0.1, 0.2),
            kd: Vector3::new(1.5, 1.5, 2.5),
            integrator_clamp: 2.0,
            output_clamp: 6.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.kp.iter().chain(self.ki.iter()).chain(self.kd.iter()).any(|g| !(*g >= 0.0)) {
            errs.push("gains must be non-negative".into());
        }
        if !(self.integrator_clamp > 0.0) || !(self.output_clamp > 0.0) {
            errs.push("clamps must be positive".into());
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidTarget {
    pub position: Point3<f64>,
    pub velocity: Vector3<f64>,
}

impl PidTarget {
    pub fn hold(position: Point3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlOutput {
    pub acceleration: Vector3<f64>,
    pub thrust: f64,
    pub body_up: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: Vector3<f64>,
    pub last_output: Option<ControlOutput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PidError {
    #[error("no valid motion-capture sample")]
    NoSample,
    #[error("no valid motion-capture sample for {stale:.3} s")]
    SensorLoss { stale: f64, held: Option<ControlOutput> },
}

/// One control update at time `now`. `history` is oldest first.
pub fn pid_update(
    gains: &PidGains,
    state: &PidState,
    target: &PidTarget,
    history: &[MocapSample],
    now: f64,
    dt: f64,
    total_mass: f64,
) -> Result<(ControlOutput, PidState), PidError> {
    let mut valid = history.iter().rev().filter(|s| s.valid);
    let latest = valid.next().ok_or(PidError::NoSample)?;
    let stale = now - latest.timestamp;
    if stale > SENSOR_TIMEOUT {
        return Err(PidError::SensorLoss {
            stale,
            held: state.last_output,
        });
    }
    let measured_velocity = match valid.next() {
        Some(prev) if latest.timestamp > prev.timestamp => {
            (latest.position - prev.position) / (latest.timestamp - prev.timestamp)
        }
        _ => Vector3::zeros(),
    };
    let error = target.position - latest.position;
    let mut integral = state.integral + error * dt;
    for i in 0..3 {
        if gains.ki[i] > 0.0 {
            let lim = gains.integrator_clamp / gains.ki[i];
            integral[i] = integral[i].clamp(-lim, lim);
        } else {
            integral[i] = 0.0;
        }
    }
    let raw = gains.kp.component_mul(&error)
        + gains.ki.component_mul(&integral)
        + gains.kd.component_mul(&(target.velocity - measured_velocity));
    let acceleration = raw.map(|a| a.clamp(-gains.output_clamp, gains.output_clamp));
    let body_up = tilt_direction(acceleration);
    let thrust = (total_mass * (GRAVITY + acceleration.z) / body_up.z).max(0.0);
    let out = ControlOutput {
        acceleration,
        thrust,
        body_up,
    };
    Ok((
        out,
        PidState {
            integral,
            last_output: Some(out),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, p: Point3<f64>) -> MocapSample {
        MocapSample {
            timestamp: t,
            position: p,
            valid: true,
        }
    }

    #[test]
    fn zero_error_gives_feedforward_only() {
        let p = Point3::new(0.0, 0.0, 1.0);
        let (out, _) = pid_update(&PidGains::default(), &PidState::default(), &PidTarget::hold(p), &[sample(0.0, p)], 0.0, 0.005, 2.8).unwrap();
        assert_eq!(out.thrust, 2.8 * GRAVITY);
        assert_eq!(out.body_up, Vector3::z());
    }

    #[test]
    fn large_error_stays_within_clamps() {
        let gains = PidGains::default();
        let mut st = PidState::default();
        let target = PidTarget::hold(Point3::new(10.0, -10.0, 10.0));
        for k in 0..20_000 {
            let t = k as f64 * 0.005;
            let (out, next) = pid_update(&gains, &st, &target, &[sample(t, Point3::origin())], t, 0.005, 2.8).unwrap();
            st = next;
            for i in 0..3 {
                assert!(out.acceleration[i].abs() <= gains.output_clamp);
                assert!((gains.ki[i] * st.integral[i]).abs() <= gains.integrator_clamp + 1e-12);
            }
        }
    }

    #[test]
    fn stale_samples_raise_sensor_loss() {
        let p = Point3::origin();
        let gains = PidGains::default();
        let (_, st) = pid_update(&gains, &PidState::default(), &PidTarget::hold(p), &[sample(0.0, p)], 0.0, 0.005, 1.0).unwrap();
        let mut hist = vec![sample(0.0, p)];
        hist.push(MocapSample {
            timestamp: 0.2,
            position: p,
            valid: false,
        });
        match pid_update(&gains, &st, &PidTarget::hold(p), &hist, 0.2, 0.005, 1.0) {
            Err(PidError::SensorLoss { held, .. }) => assert_eq!(held, st.last_output),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            pid_update(&gains, &st, &PidTarget::hold(p), &hist[1..], 0.2, 0.005, 1.0),
            Err(PidError::NoSample)
        );
    }

    #[test]
    fn derivative_uses_measurement() {
        let gains = PidGains {
            kp: Vector3::zeros(),
            ki: Vector3::zeros(),
            ..PidGains::default()
        };
        let hist = [sample(0.0, Point3::origin()), sample(0.005, Point3::new(0.005, 0.0, 0.0))];
        let (out, _) = pid_update(&gains, &PidState::default(), &PidTarget::hold(Point3::new(5.0, 0.0, 0.0)), &hist, 0.005, 0.005, 1.0).unwrap();
        assert!((out.acceleration.x + 1.5).abs() < 1e-9);
    }
}
