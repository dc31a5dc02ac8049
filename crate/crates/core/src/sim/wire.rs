//! JSON frames exchanged with a realtime session, one frame per message.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{ExternalCommand, GuardAction, TelemetryFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ClientFrame {
    #[serde(rename = "cmd.velocity")]
    Velocity { velocity: Vector3<f64> },
    #[serde(rename = "cmd.waypoint")]
    Waypoint {
        position: Point3<f64>,
        #[serde(default)]
        hold_time: f64,
    },
    #[serde(rename = "cmd.guard")]
    Guard {
        action: GuardAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_m: Option<f64>,
    },
}

impl From<ClientFrame> for ExternalCommand {
    fn from(f: ClientFrame) -> Self {
        match f {
            ClientFrame::Velocity { velocity } => ExternalCommand::Velocity { velocity },
            ClientFrame::Waypoint { position, hold_time } => ExternalCommand::Waypoint { position, hold_time },
            ClientFrame::Guard { action, radius_m } => ExternalCommand::Guard { action, radius_m },
        }
    }
}

impl From<ExternalCommand> for ClientFrame {
    fn from(c: ExternalCommand) -> Self {
        match c {
            ExternalCommand::Velocity { velocity } => ClientFrame::Velocity { velocity },
            ExternalCommand::Waypoint { position, hold_time } => ClientFrame::Waypoint { position, hold_time },
            ExternalCommand::Guard { action, radius_m } => ClientFrame::Guard { action, radius_m },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ServerFrame {
    #[serde(rename = "telemetry")]
    Telemetry(TelemetryFrame),
    #[serde(rename = "err")]
    Err { message: String },
}

impl ServerFrame {
    pub fn error(message: impl Into<String>) -> Self {
        ServerFrame::Err { message: message.into() }
    }
}

/// Parse one inbound text frame.
pub fn parse_client_frame(text: &str) -> Result<ClientFrame, String> {
    serde_json::from_str(text.trim()).map_err(|e| format!("malformed frame: {e}"))
}
