use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ringguard"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--scenario"])
        .arg(scenario("hover.json"))
        .arg("--out")
        .arg(dir.path())
        .args(["--seed", "9", "--duration", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(metrics["outcome"], "success");
    for f in ["events.jsonl", "metrics.json", "states.csv"] {
        assert!(dir.path().join(f).metadata().unwrap().len() > 0, "{f}");
    }
    let events = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    assert!(events.lines().next().unwrap().contains(r#""seed":9"#));
    assert!(events.lines().last().unwrap().contains(r#""kind":"run_end""#));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"duration": -1}"#).unwrap();
    let out = bin().args(["run", "--scenario"]).arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duration"));

    let out = bin()
        .args(["run", "--scenario", "/nonexistent/scenario.json", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = bin().args(["calibrate", "--target-max-diameter", "0.85", "--units", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin()
        .args(["calibrate", "--target-max-diameter", "0.85", "--units", "16", "--server", "http://127.0.0.1:9"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // serving needs a teleop scenario
    let out = bin()
        .args(["serve", "--scenario"])
        .arg(scenario("hover.json"))
        .args(["--port", &free_port().to_string()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn calibrate_prints_segment_length() {
    let out = bin().args(["calibrate", "--target-max-diameter", "0.85", "--units", "16"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let l = report["segment_length"].as_f64().unwrap();
    assert!((l - 0.0829).abs() < 1e-4, "{l}");
}

struct Server(std::process::Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn run_against_served_instance_matches_local() {
    let port = free_port();
    let mut child = bin()
        .args(["serve", "--scenario"])
        .arg(scenario("teleop.json"))
        .args(["--port", &port.to_string()])
        .env("RUST_LOG", "info")
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let stderr = child.stderr.take().unwrap();
    let _server = Server(child);
    let mut lines = BufReader::new(stderr).lines();
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        let line = lines.next().expect("server exited").unwrap();
        if line.contains("listening on") {
            break;
        }
        assert!(Instant::now() < deadline);
    }
    let url = format!("http://127.0.0.1:{port}");
    let remote = tempfile::tempdir().unwrap();
    let local = tempfile::tempdir().unwrap();
    for (dir, server) in [(&remote, Some(url.as_str())), (&local, None)] {
        let mut cmd = bin();
        cmd.args(["run", "--scenario"])
            .arg(scenario("freefall.json"))
            .arg("--out")
            .arg(dir.path());
        if let Some(u) = server {
            cmd.args(["--server", u]);
        }
        let out = cmd.output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["events.jsonl", "metrics.json", "states.csv"] {
        assert_eq!(
            std::fs::read(remote.path().join(f)).unwrap(),
            std::fs::read(local.path().join(f)).unwrap(),
            "{f}"
        );
    }
}
