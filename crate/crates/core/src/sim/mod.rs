//! Deterministic scenario runner, event log and metrics.

mod api;
mod engine;
mod log;
mod scenario;
mod wire;

pub use api::{calibrate, CalibrateRequest, CalibrationReport, ErrorReply, RunReply};
pub use engine::{run_headless, Engine, RunResult, SimError};
pub use log::{
    metrics_summary, read_jsonl, telemetry_from_log, write_jsonl, write_outputs, write_states_csv, CommandSource, Limit, LogRecord,
    Metrics, Outcome, TelemetryFrame,
};
pub use scenario::{
    ActuatorSettings, ControlSettings, ExternalCommand, FaultInjection, FieldError, GuardAction, GuardSettings, Hardware, InitialState,
    Mode, Rates, Scenario, TimedCommand,
};
pub use wire::{parse_client_frame, ClientFrame, ServerFrame};
