//! Host side of the external-forecaster protocol.
//!
//! A plugin is a subprocess speaking UTF-8 JSON lines over stdin/stdout.
//! The host opens with `{"hello":1}` and expects a `capabilities` reply
//! within [`HANDSHAKE_TIMEOUT`]. Each window is then sent as one `predict`
//! message and answered by one `prediction` (or `error`) message carrying
//! the same `seq`. The wire format is documented in `docs/protocol.md`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{Layout, WindowSet};

pub const PROTOCOL_VERSION: u32 = 1;
pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_REPLY_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PluginEndpoint {
    /// Program and arguments.
    pub argv: Vec<String>,
    #[serde(default = "default_version")]
    pub protocol_version: u32,
}

fn default_version() -> u32 {
    PROTOCOL_VERSION
}

impl PluginEndpoint {
    pub fn new<S: Into<String>>(argv: impl IntoIterator<Item = S>) -> Self {
        Self {
            argv: argv.into_iter().map(Into::into).collect(),
            protocol_version: PROTOCOL_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub version: u32,
    #[serde(default)]
    pub supports_future_covariates: bool,
    #[serde(default)]
    pub model_size_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HostMessage {
    Hello(u32),
    Predict(PredictRequest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub seq: u64,
    /// `[input_len][past channel]`
    pub inputs: Vec<Vec<f64>>,
    /// `[horizon][future channel]`
    pub future: Vec<Vec<f64>>,
    pub layout: WireLayout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireLayout {
    pub input_len: usize,
    pub horizon: usize,
    pub past: Vec<String>,
    pub future: Vec<String>,
}

impl From<&Layout> for WireLayout {
    fn from(l: &Layout) -> Self {
        Self {
            input_len: l.input_len,
            horizon: l.horizon,
            past: l.past.clone(),
            future: l.future.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PluginMessage {
    Capabilities(Capabilities),
    Prediction {
        seq: u64,
        values: Vec<Option<f64>>,
    },
    Error {
        #[serde(default)]
        seq: Option<u64>,
        message: String,
    },
}

/// A running plugin process that has completed the handshake.
#[derive(Debug)]
pub struct PluginSession {
    endpoint: PluginEndpoint,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    capabilities: Capabilities,
    reply_timeout: Duration,
}

impl PluginSession {
    pub fn launch(endpoint: &PluginEndpoint) -> Result<Self> {
        Self::launch_with_timeout(endpoint, HANDSHAKE_TIMEOUT)
    }

    pub fn launch_with_timeout(endpoint: &PluginEndpoint, handshake: Duration) -> Result<Self> {
        let (program, args) = endpoint
            .argv
            .split_first()
            .ok_or_else(|| Error::PluginHandshake("empty launch command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::PluginHandshake(format!("cannot launch `{program}`: {e}")))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut session = Self {
            endpoint: endpoint.clone(),
            stdin: child.stdin.take(),
            child,
            lines: rx,
            capabilities: Capabilities {
                version: 0,
                supports_future_covariates: false,
                model_size_bytes: 0,
            },
            reply_timeout: DEFAULT_REPLY_TIMEOUT,
        };
        session.capabilities = session.handshake(handshake)?;
        Ok(session)
    }

    fn handshake(&mut self, timeout: Duration) -> Result<Capabilities> {
        let hello = HostMessage::Hello(self.endpoint.protocol_version);
        self.send(&hello)
            .map_err(|e| Error::PluginHandshake(format!("cannot send hello: {e}")))?;
        let line = match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(Error::PluginHandshake(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::PluginHandshake(format!(
                    "no reply within {} s",
                    timeout.as_secs_f64()
                )))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(Error::PluginHandshake("plugin closed its output".into()))
            }
        };
        match serde_json::from_str::<PluginMessage>(&line) {
            Ok(PluginMessage::Capabilities(c)) if c.version == self.endpoint.protocol_version => {
                Ok(c)
            }
            Ok(PluginMessage::Capabilities(c)) => Err(Error::PluginHandshake(format!(
                "plugin speaks version {}, host {}",
                c.version, self.endpoint.protocol_version
            ))),
            Ok(other) => Err(Error::PluginHandshake(format!(
                "unexpected reply {other:?}"
            ))),
            Err(e) => Err(Error::PluginHandshake(format!(
                "malformed reply `{line}`: {e}"
            ))),
        }
    }

    pub fn capabilities(&self) -> &Capabilities {
        &self.capabilities
    }

    pub fn set_reply_timeout(&mut self, timeout: Duration) {
        self.reply_timeout = timeout;
    }

    fn send(&mut self, msg: &HostMessage) -> std::io::Result<()> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::BrokenPipe, "stdin closed"))?;
        let mut line = serde_json::to_vec(msg)?;
        line.push(b'\n');
        stdin.write_all(&line)?;
        stdin.flush()
    }

    /// Predict every window. The outer error covers the session as a whole;
    /// each window carries its own outcome.
    pub fn remote_predict(
        &mut self,
        windows: &WindowSet,
    ) -> Vec<std::result::Result<Vec<f64>, String>> {
        let n = windows.len();
        let horizon = windows.layout.horizon;
        let layout = WireLayout::from(&windows.layout);
        let mut results: Vec<Option<std::result::Result<Vec<f64>, String>>> = vec![None; n];

        let mut sent = 0;
        for w in 0..n {
            let req = PredictRequest {
                seq: w as u64,
                inputs: rows(windows.inputs.index_axis(Axis(0), w)),
                future: rows(windows.future.index_axis(Axis(0), w)),
                layout: layout.clone(),
            };
            if let Err(e) = self.send(&HostMessage::Predict(req)) {
                for r in results.iter_mut().skip(w) {
                    *r = Some(Err(format!("broken pipe: {e}")));
                }
                break;
            }
            sent += 1;
        }

        let mut pending = sent;
        while pending > 0 {
            let line = match self.lines.recv_timeout(self.reply_timeout) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => {
                    fill_pending(&mut results, &format!("read failed: {e}"));
                    break;
                }
                Err(RecvTimeoutError::Timeout) => {
                    fill_pending(&mut results, "no reply before timeout");
                    break;
                }
                Err(RecvTimeoutError::Disconnected) => {
                    fill_pending(&mut results, "broken pipe: plugin exited");
                    break;
                }
            };
            let (seq, outcome) = match serde_json::from_str::<PluginMessage>(&line) {
                Ok(PluginMessage::Prediction { seq, values }) => {
                    (seq, check_values(values, horizon))
                }
                Ok(PluginMessage::Error {
                    seq: Some(seq),
                    message,
                }) => (seq, Err(message)),
                Ok(other) => {
                    fill_pending(&mut results, &format!("unexpected message {other:?}"));
                    break;
                }
                Err(e) => {
                    fill_pending(&mut results, &format!("malformed reply: {e}"));
                    break;
                }
            };
            match results.get_mut(seq as usize) {
                Some(slot @ None) if (seq as usize) < sent => {
                    *slot = Some(outcome);
                    pending -= 1;
                }
                _ => {
                    fill_pending(&mut results, &format!("unexpected sequence number {seq}"));
                    break;
                }
            }
        }
        results
            .into_iter()
            .map(|r| r.expect("every window resolved"))
            .collect()
    }

    /// Stop the process and launch a fresh one from the same endpoint.
    pub fn relaunch(&mut self) -> Result<()> {
        let fresh = Self::launch(&self.endpoint)?;
        let old = std::mem::replace(self, fresh);
        drop(old);
        Ok(())
    }
}

impl Drop for PluginSession {
    fn drop(&mut self) {
        // closing stdin is the shutdown signal
        self.stdin.take();
        for _ in 0..50 {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn rows(view: ndarray::ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    view.outer_iter().map(|r| r.to_vec()).collect()
}

fn fill_pending(results: &mut [Option<std::result::Result<Vec<f64>, String>>], why: &str) {
    for r in results.iter_mut().filter(|r| r.is_none()) {
        *r = Some(Err(why.to_string()));
    }
}

fn check_values(values: Vec<Option<f64>>, horizon: usize) -> std::result::Result<Vec<f64>, String> {
    if values.len() != horizon {
        return Err(format!(
            "shape mismatch: {} values for horizon {horizon}",
            values.len()
        ));
    }
    values
        .into_iter()
        .map(|v| match v {
            Some(x) if x.is_finite() => Ok(x),
            _ => Err("non-finite value in prediction".to_string()),
        })
        .collect()
}

/// A plugin session usable as a forecaster. Calls are serialised, so one
/// process never sees interleaved requests.
#[derive(Debug)]
pub struct PluginForecaster {
    session: Mutex<PluginSession>,
    capabilities: Capabilities,
}

impl PluginForecaster {
    pub fn new(session: PluginSession) -> Self {
        Self {
            capabilities: session.capabilities().clone(),
            session: Mutex::new(session),
        }
    }

    pub fn launch(endpoint: &PluginEndpoint) -> Result<Self> {
        Ok(Self::new(PluginSession::launch(endpoint)?))
    }

    pub fn capabilities(&self) -> &Capabilities {
        &self.capabilities
    }

    /// All-or-nothing prediction; the first failing window is reported.
    pub fn predict(&self, windows: &WindowSet) -> Result<Array2<f64>> {
        if !windows.layout.future.is_empty() && !self.capabilities.supports_future_covariates {
            return Err(Error::Plugin(
                "plugin does not accept future covariates".into(),
            ));
        }
        let outcomes = self
            .session
            .lock()
            .map_err(|_| Error::Plugin("plugin session poisoned".into()))?
            .remote_predict(windows);
        let h = windows.layout.horizon;
        let mut out = Array2::zeros((windows.len(), h));
        let mut failed = 0;
        let mut first = None;
        for (w, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(v) => out.row_mut(w).assign(&ndarray::ArrayView1::from(&v)),
                Err(e) => {
                    failed += 1;
                    first.get_or_insert((w, e));
                }
            }
        }
        match first {
            None => Ok(out),
            Some((w, e)) => Err(Error::Plugin(format!(
                "{failed} of {} windows failed; window {w}: {e}",
                windows.len()
            ))),
        }
    }
}
