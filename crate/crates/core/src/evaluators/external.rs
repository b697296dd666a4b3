//! Objective evaluated by a child process over line-delimited JSON.
//!
//! On start the parent writes one handshake line
//!
//! ```text
//! {"domain": [{"name": "lr", "lower": 0.0, "upper": 1.0, "kind": "continuous"}, ...]}
//! ```
//!
//! and expects `{"ready": true}`. Each evaluation is then a single request
//! `{"id": 7, "x": {"lr": 0.1, ...}}` answered by `{"id": 7, "f": 0.25}` or
//! `{"id": 7, "error": "..."}`. Closing the child's stdin asks it to exit.
//!
//! A timed-out, crashed or misbehaving child is killed and a fresh one is
//! started on the next request.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{EvalError, Objective};
use crate::domain::{Domain, PointExternal};

const SHUTDOWN_GRACE: Duration = Duration::from_secs(2);

#[derive(Debug, Deserialize)]
struct Response {
    id: Option<u64>,
    f: Option<serde_json::Value>,
    error: Option<String>,
    ready: Option<bool>,
}

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
}

impl Session {
    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn exit_description(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => status.to_string(),
            _ => "closed its output".to_string(),
        }
    }

    /// Closes stdin and waits briefly for a clean exit before killing.
    fn shutdown(mut self) {
        drop(self.stdin.take());
        let deadline = Instant::now() + SHUTDOWN_GRACE;
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        self.kill();
    }
}

pub struct ExternalEvaluator {
    command: String,
    args: Vec<String>,
    timeout: Duration,
    timeout_s: f64,
    domain: Domain,
    session: Option<Session>,
    next_id: u64,
    spawned: usize,
}

impl ExternalEvaluator {
    pub fn new(command: String, args: Vec<String>, timeout_s: f64, domain: Domain) -> Self {
        Self {
            command,
            args,
            timeout: Duration::from_secs_f64(timeout_s),
            timeout_s,
            domain,
            session: None,
            next_id: 0,
            spawned: 0,
        }
    }

    /// Number of child processes started so far.
    pub fn spawn_count(&self) -> usize {
        self.spawned
    }

    fn handshake_line(&self) -> String {
        let vars: Vec<_> = self
            .domain
            .variables()
            .iter()
            .map(|v| {
                json!({
                    "name": v.name,
                    "lower": v.lower,
                    "upper": v.upper,
                    "kind": v.kind,
                })
            })
            .collect();
        json!({ "domain": vars }).to_string()
    }

    fn start(&mut self) -> Result<(), EvalError> {
        let mut child = Command::new(&self.command)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::Spawn(format!("{}: {e}", self.command)))?;
        self.spawned += 1;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut session = Session {
            child,
            stdin: Some(stdin),
            lines: rx,
        };
        let hello = self.handshake_line();
        let result = send(&mut session, &hello).and_then(|_| {
            let line = recv(&mut session, Instant::now() + self.timeout, self.timeout_s)?;
            let resp: Response = parse(&line)?;
            if resp.ready == Some(true) {
                Ok(())
            } else {
                Err(EvalError::Protocol(format!(
                    "expected ready line, got `{line}`"
                )))
            }
        });
        match result {
            Ok(()) => {
                self.session = Some(session);
                Ok(())
            }
            Err(e) => {
                session.kill();
                Err(e)
            }
        }
    }

    fn request(&mut self, id: u64, point: &PointExternal) -> Result<f64, EvalError> {
        let session = self.session.as_mut().expect("session started");
        let line = json!({ "id": id, "x": point.values }).to_string();
        send(session, &line)?;
        let deadline = Instant::now() + self.timeout;
        loop {
            let line = recv(session, deadline, self.timeout_s)?;
            let resp: Response = parse(&line)?;
            match resp.id {
                Some(rid) if rid == id => {}
                // late answer to a request that was already given up on
                Some(rid) if rid < id => continue,
                _ => {
                    return Err(EvalError::Protocol(format!(
                        "unexpected response `{line}` while waiting for id {id}"
                    )))
                }
            }
            if let Some(msg) = resp.error {
                return Err(EvalError::Reported(msg));
            }
            return match resp.f {
                Some(serde_json::Value::Number(n)) => {
                    let f = n.as_f64().unwrap_or(f64::NAN);
                    if f.is_finite() {
                        Ok(f)
                    } else {
                        Err(EvalError::NonFiniteValue(f))
                    }
                }
                // JSON has no NaN/Inf literals, so anything else is malformed
                Some(other) => Err(EvalError::Protocol(format!("`f` is not a number: {other}"))),
                None => Err(EvalError::Protocol(format!(
                    "response `{line}` has neither f nor error"
                ))),
            };
        }
    }
}

fn send(session: &mut Session, line: &str) -> Result<(), EvalError> {
    let stdin = session
        .stdin
        .as_mut()
        .ok_or_else(|| EvalError::ChildCrashed("stdin closed".into()))?;
    writeln!(stdin, "{line}")
        .and_then(|_| stdin.flush())
        .map_err(|e| EvalError::ChildCrashed(format!("write failed: {e}")))
}

fn recv(session: &mut Session, deadline: Instant, timeout_s: f64) -> Result<String, EvalError> {
    let wait = deadline.saturating_duration_since(Instant::now());
    match session.lines.recv_timeout(wait) {
        Ok(line) => Ok(line),
        Err(RecvTimeoutError::Timeout) => Err(EvalError::Timeout(timeout_s)),
        Err(RecvTimeoutError::Disconnected) => {
            // give the process a moment to be reaped so the status is accurate
            thread::sleep(Duration::from_millis(20));
            Err(EvalError::ChildCrashed(session.exit_description()))
        }
    }
}

fn parse(line: &str) -> Result<Response, EvalError> {
    serde_json::from_str(line).map_err(|e| EvalError::Protocol(format!("bad line `{line}`: {e}")))
}

impl Objective for ExternalEvaluator {
    fn evaluate(&mut self, point: &PointExternal) -> Result<f64, EvalError> {
        if self.session.is_none() {
            self.start()?;
        }
        self.next_id += 1;
        let id = self.next_id;
        let result = self.request(id, point);
        match &result {
            // the child is still healthy after reporting its own failure
            Ok(_) | Err(EvalError::Reported(_)) | Err(EvalError::NonFiniteValue(_)) => {}
            Err(_) => {
                if let Some(s) = self.session.take() {
                    s.kill();
                }
            }
        }
        result
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        if let Some(s) = self.session.take() {
            s.shutdown();
        }
    }
}
