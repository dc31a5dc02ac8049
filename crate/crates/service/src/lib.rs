//! HTTP and WebSocket front end for the guard simulator.
//!
//! | route | |
//! |---|---|
//! | `GET /healthz` | liveness |
//! | `GET /v1/telemetry` | latest frame of the realtime run |
//! | `POST /v1/command` | one client frame, same shape as over the socket |
//! | `GET /v1/ws` | telemetry stream out, client frames in |
//! | `POST /v1/run` | headless run of the posted scenario |
//! | `POST /v1/calibrate` | segment length for a target diameter |

mod session;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use ringguard_core::sim::{
    calibrate, parse_client_frame, run_headless, CalibrateRequest, ErrorReply, RunReply, Scenario, ServerFrame, SimError,
};
use tokio::net::TcpListener;

pub use session::Session;

#[derive(Clone, Default)]
pub struct AppState {
    pub session: Option<Arc<Session>>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/v1/telemetry", get(telemetry))
        .route("/v1/command", post(command))
        .route("/v1/ws", get(ws))
        .route("/v1/run", post(run))
        .route("/v1/calibrate", post(calibrate_route))
        .with_state(state)
}

/// Serve `state` on `listener` until the task is dropped.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Bind `addr`, start a realtime session for `scenario` and serve it.
pub async fn serve_realtime(addr: SocketAddr, scenario: Scenario, timescale: f64) -> Result<(), ServeError> {
    let session = Session::start(scenario, timescale).map_err(ServeError::Sim)?;
    let listener = TcpListener::bind(addr).await.map_err(ServeError::Io)?;
    tracing::info!("listening on {}", listener.local_addr().map_err(ServeError::Io)?);
    serve(
        listener,
        AppState {
            session: Some(Arc::new(session)),
        },
    )
    .await
    .map_err(ServeError::Io)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Sim(SimError),
    #[error(transparent)]
    Io(std::io::Error),
}

fn reply_error(status: StatusCode, error: impl Into<String>) -> Response {
    (
        status,
        Json(ErrorReply {
            error: error.into(),
            fields: vec![],
        }),
    )
        .into_response()
}

fn sim_error(e: SimError) -> Response {
    match e {
        SimError::Validation(fields) => (
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(ErrorReply {
                error: "invalid scenario".into(),
                fields,
            }),
        )
            .into_response(),
        SimError::Runtime(msg) => reply_error(StatusCode::INTERNAL_SERVER_ERROR, msg),
    }
}

fn no_session() -> Response {
    reply_error(StatusCode::NOT_FOUND, "no realtime run on this server")
}

async fn telemetry(State(app): State<AppState>) -> Response {
    let Some(s) = app.session else {
        return no_session();
    };
    match s.latest() {
        Some(frame) => Json(ServerFrame::Telemetry(frame)).into_response(),
        None => reply_error(StatusCode::SERVICE_UNAVAILABLE, "no telemetry yet"),
    }
}

async fn command(State(app): State<AppState>, body: String) -> Response {
    let Some(s) = app.session else {
        return no_session();
    };
    let frame = match parse_client_frame(&body) {
        Ok(f) => f,
        Err(e) => return (StatusCode::BAD_REQUEST, Json(ServerFrame::error(e))).into_response(),
    };
    match s.submit(frame.into()).await {
        Ok(()) => StatusCode::ACCEPTED.into_response(),
        Err(e) => (StatusCode::UNPROCESSABLE_ENTITY, Json(ServerFrame::error(e))).into_response(),
    }
}

async fn ws(State(app): State<AppState>, upgrade: WebSocketUpgrade) -> Response {
    let Some(s) = app.session else {
        return no_session();
    };
    upgrade.on_upgrade(move |socket| client(socket, s))
}

async fn client(socket: WebSocket, session: Arc<Session>) {
    let (mut out, mut inbound) = socket.split();
    let mut frames = session.frames();
    frames.mark_changed();
    loop {
        let reply = tokio::select! {
            changed = frames.changed() => {
                if changed.is_err() {
                    break;
                }
                match frames.borrow_and_update().clone() {
                    Some(f) => ServerFrame::Telemetry(f),
                    None => continue,
                }
            }
            msg = inbound.next() => match msg {
                Some(Ok(Message::Text(text))) => match parse_client_frame(&text) {
                    Ok(f) => match session.submit(f.into()).await {
                        Ok(()) => continue,
                        Err(e) => ServerFrame::error(e),
                    },
                    Err(e) => ServerFrame::error(e),
                },
                Some(Ok(Message::Binary(_))) => ServerFrame::error("frames are JSON text"),
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => continue,
            },
        };
        let text = serde_json::to_string(&reply).expect("frames serialize");
        if out.send(Message::Text(text.into())).await.is_err() {
            break;
        }
    }
}

async fn run(body: String) -> Response {
    let scenario = match Scenario::from_json(&body) {
        Ok(s) => s,
        Err(fields) => return sim_error(SimError::Validation(fields)),
    };
    match tokio::task::spawn_blocking(move || run_headless(scenario)).await {
        Ok(Ok(r)) => Json(RunReply {
            metrics: r.metrics,
            log: r.log,
        })
        .into_response(),
        Ok(Err(e)) => sim_error(e),
        Err(e) => reply_error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn calibrate_route(body: String) -> Response {
    let req: CalibrateRequest = match serde_json::from_str(&body) {
        Ok(r) => r,
        Err(e) => return reply_error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    match calibrate(&req) {
        Ok(report) => Json(report).into_response(),
        Err(field) => (
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(ErrorReply {
                error: "invalid calibration request".into(),
                fields: vec![field],
            }),
        )
            .into_response(),
    }
}
