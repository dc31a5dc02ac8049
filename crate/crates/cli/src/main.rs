use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ringguard_client::{Client, ClientError};
use ringguard_core::sim::{calibrate, run_headless, write_outputs, CalibrateRequest, FieldError, Scenario, SimError};
use ringguard_service::{serve_realtime, ServeError};

#[derive(Parser)]
#[command(name = "ringguard", version, about = "Quadrotor with an expandable scissor-ring guard")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario headless and write events.jsonl, metrics.json and states.csv.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        duration: Option<f64>,
        /// Run on a service at this URL instead of in process.
        #[arg(long)]
        server: Option<String>,
    },
    /// Run a teleop scenario in real time behind the HTTP/WebSocket interface.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value_t = 1.0)]
        timescale: f64,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
    /// Segment length that makes a ring of `units` reach the target diameter.
    Calibrate {
        #[arg(long)]
        target_max_diameter: f64,
        #[arg(long)]
        units: usize,
        #[arg(long)]
        server: Option<String>,
    },
}

/// Failures sorted by exit code.
enum Failure {
    Invalid(String, Vec<FieldError>),
    Fault(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Fault(e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Validation(fields) => Failure::Invalid("invalid scenario".into(), fields),
            SimError::Runtime(m) => Failure::Fault(anyhow::anyhow!(m)),
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Invalid { error, fields } => Failure::Invalid(error, fields),
            other => Failure::Fault(other.into()),
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Fault)?;
    Scenario::from_json(&text).map_err(|fields| Failure::Invalid(format!("cannot parse {}", path.display()), fields))
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    Ok(tokio::runtime::Runtime::new().context("starting async runtime")?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            duration,
            server,
        } => {
            let mut s = load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(d) = duration {
                s.duration = d;
            }
            let (log, metrics) = match server {
                Some(url) => {
                    let reply = runtime()?.block_on(Client::new(url).run(&s))?;
                    (reply.log, reply.metrics)
                }
                None => {
                    let r = run_headless(s)?;
                    (r.log, r.metrics)
                }
            };
            write_outputs(&out, &log, &metrics).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"));
            Ok(())
        }
        Command::Serve {
            scenario,
            port,
            timescale,
            host,
        } => {
            let s = load(&scenario)?;
            runtime()?
                .block_on(serve_realtime(SocketAddr::new(host, port), s, timescale))
                .map_err(|e| match e {
                    ServeError::Sim(e) => e.into(),
                    ServeError::Io(e) => Failure::Fault(anyhow::Error::new(e).context("serving")),
                })
        }
        Command::Calibrate {
            target_max_diameter,
            units,
            server,
        } => {
            let req = CalibrateRequest {
                target_max_diameter,
                units,
            };
            let report = match server {
                Some(url) => runtime()?.block_on(Client::new(url).calibrate(&req))?,
                None => calibrate(&req).map_err(|f| Failure::Invalid("invalid calibration request".into(), vec![f]))?,
            };
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg, fields)) => {
            eprintln!("error: {msg}");
            for f in fields {
                eprintln!("  {}: {}", f.field, f.message);
            }
            ExitCode::from(2)
        }
        Err(Failure::Fault(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
