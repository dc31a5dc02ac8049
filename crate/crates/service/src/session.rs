//! A realtime run: one thread owns the engine and paces it against the wall
//! clock. Commands arrive over a queue, telemetry leaves as snapshots.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use ringguard_core::sim::{Engine, ExternalCommand, Scenario, SimError, TelemetryFrame};
use tokio::sync::{oneshot, watch};

/// Wall-clock seconds the loop may fall behind before it stops catching up.
const MAX_LAG: f64 = 0.1;
/// Longest stretch of stepping between looks at the command queue.
const BATCH: Duration = Duration::from_millis(5);

struct Request {
    command: ExternalCommand,
    reply: oneshot::Sender<Result<(), String>>,
}

pub struct Session {
    requests: mpsc::Sender<Request>,
    frames: watch::Receiver<Option<TelemetryFrame>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl Session {
    pub fn start(scenario: Scenario, timescale: f64) -> Result<Self, SimError> {
        if !(timescale > 0.0 && timescale.is_finite()) {
            return Err(SimError::Runtime(format!("timescale must be positive, got {timescale}")));
        }
        let errs = scenario.validate_for_serving();
        if !errs.is_empty() {
            return Err(SimError::Validation(errs));
        }
        let engine = Engine::new(scenario)?;
        let (tx, rx) = mpsc::channel();
        let (frame_tx, frames) = watch::channel(engine.telemetry());
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::Builder::new()
            .name("sim".into())
            .spawn(move || pace(engine, timescale, rx, frame_tx, flag))
            .map_err(|e| SimError::Runtime(e.to_string()))?;
        Ok(Self {
            requests: tx,
            frames,
            stop,
            thread: Some(thread),
        })
    }

    /// Hand a command to the engine; resolves once it has been accepted or
    /// rejected.
    pub async fn submit(&self, command: ExternalCommand) -> Result<(), String> {
        let (reply, answer) = oneshot::channel();
        self.requests
            .send(Request { command, reply })
            .map_err(|_| "simulation stopped".to_string())?;
        answer.await.map_err(|_| "simulation stopped".to_string())?
    }

    pub fn frames(&self) -> watch::Receiver<Option<TelemetryFrame>> {
        self.frames.clone()
    }

    pub fn latest(&self) -> Option<TelemetryFrame> {
        self.frames.borrow().clone()
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn pace(
    mut engine: Engine,
    timescale: f64,
    requests: mpsc::Receiver<Request>,
    frames: watch::Sender<Option<TelemetryFrame>>,
    stop: Arc<AtomicBool>,
) {
    let dt = engine.dt();
    let mut origin = Instant::now();
    let mut sim_origin = engine.time();
    let mut published = engine.log().len();
    while !stop.load(Ordering::Relaxed) {
        match requests.recv_timeout(Duration::from_millis(1)) {
            Ok(req) => {
                let _ = req.reply.send(accept(&mut engine, req.command));
                while let Ok(req) = requests.try_recv() {
                    let _ = req.reply.send(accept(&mut engine, req.command));
                }
            }
            Err(mpsc::RecvTimeoutError::Timeout) => {}
            Err(mpsc::RecvTimeoutError::Disconnected) => break,
        }
        let target = sim_origin + origin.elapsed().as_secs_f64() * timescale;
        let duration = engine.scenario().duration;
        let batch_end = Instant::now() + BATCH;
        while engine.finished().is_none() && engine.time() + 0.5 * dt <= target && Instant::now() < batch_end {
            if engine.time() >= duration - 0.5 * dt {
                engine.finish("duration");
                break;
            }
            if let Err(e) = engine.step() {
                tracing::error!("simulation fault: {e}");
                engine.finish("runtime fault");
                break;
            }
        }
        if (target - engine.time()) / timescale > MAX_LAG {
            // drop the backlog instead of taking bigger steps
            tracing::debug!(t = engine.time(), "simulation stalled");
            origin = Instant::now();
            sim_origin = engine.time();
        }
        if engine.log().len() != published {
            published = engine.log().len();
            frames.send_replace(engine.telemetry());
        }
    }
}

fn accept(engine: &mut Engine, command: ExternalCommand) -> Result<(), String> {
    if let Some(reason) = engine.finished() {
        return Err(format!("run finished ({reason})"));
    }
    engine.submit(command)
}
