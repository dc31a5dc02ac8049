//! Request and reply bodies of the HTTP interface.

use serde::{Deserialize, Serialize};

use super::{FieldError, LogRecord, Metrics};
use crate::scissor::{JointFamily, RingSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReply {
    pub metrics: Metrics,
    pub log: Vec<LogRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrateRequest {
    pub target_max_diameter: f64,
    pub units: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub units: usize,
    pub target_max_diameter: f64,
    pub segment_length: f64,
    pub kink_angle: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Smallest outer diameter the bare linkage can fold to.
    pub min_outer_diameter: f64,
    pub max_outer_diameter: f64,
}

/// Body of every non-2xx reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

pub fn calibrate(req: &CalibrateRequest) -> Result<CalibrationReport, FieldError> {
    let bad = |field: &str, e: String| FieldError {
        field: field.into(),
        message: e,
    };
    if !(req.target_max_diameter > 0.0 && req.target_max_diameter.is_finite()) {
        return Err(bad("target_max_diameter", "must be positive".into()));
    }
    let ring = RingSpec::calibrated(req.units, req.target_max_diameter / 2.0).map_err(|e| bad("units", e.to_string()))?;
    let (lo, hi) = ring.kinematic_range();
    if !(lo < hi) {
        return Err(bad("units", format!("{} units leave no deployment range", req.units)));
    }
    Ok(CalibrationReport {
        units: req.units,
        target_max_diameter: req.target_max_diameter,
        segment_length: ring.segment_length(),
        kink_angle: ring.kink_angle(),
        theta_min: lo,
        theta_max: hi,
        min_outer_diameter: 2.0 * ring.radius(JointFamily::Outer, lo),
        max_outer_diameter: 2.0 * ring.radius(JointFamily::Outer, hi),
    })
}
