//! Async client for a running `ringguard` service.

use futures::{SinkExt, StreamExt};
use reqwest::StatusCode;
use ringguard_core::sim::{
    CalibrateRequest, CalibrationReport, ClientFrame, ErrorReply, FieldError, RunReply, Scenario, ServerFrame, TelemetryFrame,
};
use serde::de::DeserializeOwned;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("{error}")]
    Invalid { error: String, fields: Vec<FieldError> },
    #[error("server error {status}: {message}")]
    Server { status: StatusCode, message: String },
    #[error("socket: {0}")]
    Socket(#[from] tokio_tungstenite::tungstenite::Error),
    #[error("protocol: {0}")]
    Protocol(String),
}

impl ClientError {
    /// True when the server refused the input itself.
    pub fn is_invalid(&self) -> bool {
        matches!(self, ClientError::Invalid { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` like `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn decode<T: DeserializeOwned>(res: reqwest::Response) -> Result<T, ClientError> {
        let status = res.status();
        let body = res.text().await?;
        if status.is_success() {
            return serde_json::from_str(&body).map_err(|e| ClientError::Protocol(format!("{e}: {body}")));
        }
        Err(Self::failure(status, &body))
    }

    fn failure(status: StatusCode, body: &str) -> ClientError {
        let (error, fields) = match (serde_json::from_str::<ErrorReply>(body), serde_json::from_str::<ServerFrame>(body)) {
            (Ok(r), _) => (r.error, r.fields),
            (_, Ok(ServerFrame::Err { message })) => (message, vec![]),
            _ => (body.to_string(), vec![]),
        };
        if status == StatusCode::BAD_REQUEST || status == StatusCode::UNPROCESSABLE_ENTITY {
            ClientError::Invalid { error, fields }
        } else {
            ClientError::Server { status, message: error }
        }
    }

    pub async fn health(&self) -> Result<(), ClientError> {
        let res = self.http.get(self.url("/healthz")).send().await?;
        match res.status() {
            s if s.is_success() => Ok(()),
            s => Err(Self::failure(s, &res.text().await?)),
        }
    }

    pub async fn telemetry(&self) -> Result<TelemetryFrame, ClientError> {
        let frame: ServerFrame = Self::decode(self.http.get(self.url("/v1/telemetry")).send().await?).await?;
        match frame {
            ServerFrame::Telemetry(f) => Ok(f),
            ServerFrame::Err { message } => Err(ClientError::Protocol(message)),
        }
    }

    pub async fn command(&self, frame: &ClientFrame) -> Result<(), ClientError> {
        let body = serde_json::to_string(frame).expect("frames serialize");
        let res = self.http.post(self.url("/v1/command")).body(body).send().await?;
        match res.status() {
            s if s.is_success() => Ok(()),
            s => Err(Self::failure(s, &res.text().await?)),
        }
    }

    pub async fn run(&self, scenario: &Scenario) -> Result<RunReply, ClientError> {
        let body = serde_json::to_string(scenario).expect("scenario serializes");
        Self::decode(self.http.post(self.url("/v1/run")).body(body).send().await?).await
    }

    pub async fn calibrate(&self, req: &CalibrateRequest) -> Result<CalibrationReport, ClientError> {
        let body = serde_json::to_string(req).expect("request serializes");
        Self::decode(self.http.post(self.url("/v1/calibrate")).body(body).send().await?).await
    }

    /// Open the live socket.
    pub async fn connect(&self) -> Result<Live, ClientError> {
        let url = match self.base.strip_prefix("http") {
            Some(rest) => format!("ws{rest}/v1/ws"),
            None => return Err(ClientError::Protocol(format!("not an http url: {}", self.base))),
        };
        let (socket, _) = tokio_tungstenite::connect_async(url).await?;
        Ok(Live { socket })
    }
}

pub struct Live {
    socket: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl Live {
    pub async fn send(&mut self, frame: &ClientFrame) -> Result<(), ClientError> {
        let text = serde_json::to_string(frame).expect("frames serialize");
        self.socket.send(Message::Text(text.into())).await?;
        Ok(())
    }

    /// Next frame from the server, `None` once the socket closes.
    pub async fn next(&mut self) -> Option<Result<ServerFrame, ClientError>> {
        loop {
            return match self.socket.next().await? {
                Ok(Message::Text(t)) => Some(serde_json::from_str(&t).map_err(|e| ClientError::Protocol(e.to_string()))),
                Ok(Message::Close(_)) => None,
                Ok(_) => continue,
                Err(e) => Some(Err(e.into())),
            };
        }
    }

    pub async fn close(mut self) -> Result<(), ClientError> {
        self.socket.close(None).await?;
        Ok(())
    }
}
