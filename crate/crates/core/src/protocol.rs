//! Line-delimited JSON model protocol.
//!
//! One JSON object per line, newline-terminated:
//!
//! ```text
//! > {"type":"hello","version":1,"m":3}
//! < {"type":"ready","version":1}
//! > {"type":"predict","id":0,"instances":[[1.0,2.0,3.0]]}
//! < {"type":"prediction","id":0,"values":[1.0]}
//! > {"type":"shutdown"}
//! ```
//!
//! The client side is [`RemoteModel`], reachable over a child process's
//! stdin/stdout (`exec:<cmd>`) or a TCP stream (`tcp:<addr>`). [`serve`] is the
//! reference server loop for any [`BlackBoxModel`].

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::BlackBoxModel;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("unexpected frame: {0}")]
    UnexpectedFrame(String),
    #[error("prediction count mismatch: sent {expected} instances, got {got} values")]
    CountMismatch { expected: usize, got: usize },
    #[error("response id {got} does not match request id {expected}")]
    IdMismatch { expected: u64, got: u64 },
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("connection closed by peer")]
    Closed,
    #[error("i/o error: {0}")]
    Io(String),
    #[error("server error: {0}")]
    Server(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("model error: {0}")]
    Model(String),
}

impl From<io::Error> for TransportError {
    fn from(e: io::Error) -> Self {
        TransportError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Frame {
    Hello { version: u32, m: usize },
    Ready { version: u32 },
    Predict { id: u64, instances: Vec<Vec<f64>> },
    Prediction { id: u64, values: Vec<f64> },
    Shutdown,
    Error { message: String },
}

impl Frame {
    /// The wire form, without the trailing newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("frames always serialize")
    }

    pub fn decode(line: &str) -> Result<Frame, TransportError> {
        serde_json::from_str(line.trim_end_matches(['\n', '\r']))
            .map_err(|e| TransportError::MalformedFrame(format!("{e}: {line:?}")))
    }

    fn kind(&self) -> &'static str {
        match self {
            Frame::Hello { .. } => "hello",
            Frame::Ready { .. } => "ready",
            Frame::Predict { .. } => "predict",
            Frame::Prediction { .. } => "prediction",
            Frame::Shutdown => "shutdown",
            Frame::Error { .. } => "error",
        }
    }
}

/// Direction-tagged wire lines: `"> ..."` sent by the client, `"< ..."` received.
pub type Transcript = Vec<String>;

struct Session {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
    next_id: u64,
    child: Option<Child>,
    transcript: Option<Transcript>,
    timeout: Duration,
}

impl Session {
    fn send(&mut self, frame: &Frame) -> Result<(), TransportError> {
        let line = frame.encode();
        if let Some(t) = self.transcript.as_mut() {
            t.push(format!("> {line}"));
        }
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }

    fn receive(&mut self) -> Result<Frame, TransportError> {
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(e.into()),
            Err(RecvTimeoutError::Timeout) => return Err(TransportError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => return Err(TransportError::Closed),
        };
        if let Some(t) = self.transcript.as_mut() {
            t.push(format!("< {line}"));
        }
        Frame::decode(&line)
    }
}

fn spawn_line_reader<R: io::Read + Send + 'static>(reader: R) -> Receiver<io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(reader);
        loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => break,
                Ok(_) => {
                    if !line.ends_with('\n') {
                        // a partial trailing line means the peer died mid-frame
                        let _ = tx.send(Err(io::Error::new(
                            io::ErrorKind::UnexpectedEof,
                            "frame not newline-terminated",
                        )));
                        break;
                    }
                    line.pop();
                    if line.ends_with('\r') {
                        line.pop();
                    }
                    if tx.send(Ok(line)).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                    break;
                }
            }
        }
    });
    rx
}

#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub timeout: Duration,
    /// Keep every wire line for later inspection.
    pub record_transcript: bool,
}

impl Default for ClientOptions {
    fn default() -> Self {
        ClientOptions {
            timeout: DEFAULT_TIMEOUT,
            record_transcript: false,
        }
    }
}

/// A model served by an external process or endpoint.
pub struct RemoteModel {
    m: usize,
    id: String,
    session: Mutex<Session>,
}

impl std::fmt::Debug for RemoteModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteModel")
            .field("m", &self.m)
            .field("id", &self.id)
            .finish()
    }
}

/// Connects to `exec:<shell command>` or `tcp:<host:port>` and performs the
/// handshake.
pub fn remote_model_client(
    target: &str,
    m: usize,
    options: &ClientOptions,
) -> Result<RemoteModel, TransportError> {
    if let Some(cmd) = target.strip_prefix("exec:") {
        RemoteModel::spawn(cmd, m, options)
    } else if let Some(addr) = target.strip_prefix("tcp:") {
        RemoteModel::connect(addr, m, options)
    } else {
        Err(TransportError::Handshake(format!(
            "unknown model address '{target}', expected exec:<cmd> or tcp:<addr>"
        )))
    }
}

impl RemoteModel {
    pub fn spawn(cmd: &str, m: usize, options: &ClientOptions) -> Result<Self, TransportError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let session = Session {
            writer: Box::new(stdin),
            lines: spawn_line_reader(stdout),
            next_id: 0,
            child: Some(child),
            transcript: options.record_transcript.then(Vec::new),
            timeout: options.timeout,
        };
        RemoteModel::handshake(session, m, format!("exec:{cmd}"))
    }

    pub fn connect(addr: &str, m: usize, options: &ClientOptions) -> Result<Self, TransportError> {
        let sock = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| TransportError::Io(format!("cannot resolve {addr}")))?;
        let stream = TcpStream::connect_timeout(&sock, options.timeout)?;
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        let session = Session {
            writer: Box::new(stream),
            lines: spawn_line_reader(reader),
            next_id: 0,
            child: None,
            transcript: options.record_transcript.then(Vec::new),
            timeout: options.timeout,
        };
        RemoteModel::handshake(session, m, format!("tcp:{addr}"))
    }

    fn handshake(mut session: Session, m: usize, id: String) -> Result<Self, TransportError> {
        session.send(&Frame::Hello {
            version: PROTOCOL_VERSION,
            m,
        })?;
        match session.receive() {
            Ok(Frame::Ready { version }) if version == PROTOCOL_VERSION => {}
            Ok(Frame::Ready { version }) => {
                return Err(TransportError::Handshake(format!(
                    "server speaks version {version}, client speaks {PROTOCOL_VERSION}"
                )))
            }
            Ok(Frame::Error { message }) => return Err(TransportError::Handshake(message)),
            Ok(other) => {
                return Err(TransportError::Handshake(format!(
                    "expected ready, got {}",
                    other.kind()
                )))
            }
            Err(TransportError::MalformedFrame(e)) => return Err(TransportError::Handshake(e)),
            Err(e) => return Err(e),
        }
        Ok(RemoteModel {
            m,
            id,
            session: Mutex::new(session),
        })
    }

    /// Wire lines exchanged so far, if recording was enabled.
    pub fn transcript(&self) -> Option<Transcript> {
        self.session.lock().expect("session lock").transcript.clone()
    }

    /// Sends `shutdown` and waits for a child process to exit.
    pub fn shutdown(self) -> Result<Option<Transcript>, TransportError> {
        let mut session = self.session.into_inner().expect("session lock");
        session.send(&Frame::Shutdown)?;
        if let Some(mut child) = session.child.take() {
            session.writer = Box::new(std::io::sink());
            child.wait()?;
        }
        Ok(session.transcript.take())
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            let _ = self.writer.write_all(b"{\"type\":\"shutdown\"}\n");
            let _ = self.writer.flush();
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl BlackBoxModel for RemoteModel {
    fn num_features(&self) -> usize {
        self.m
    }

    fn predict_batch(&self, instances: &[Vec<f64>]) -> Result<Vec<f64>, TransportError> {
        if instances.is_empty() {
            return Ok(Vec::new());
        }
        if instances.iter().flatten().any(|v| !v.is_finite()) {
            return Err(TransportError::NonFinite("instances"));
        }
        if let Some(x) = instances.iter().find(|x| x.len() != self.m) {
            return Err(TransportError::Model(format!(
                "instance has {} features, session negotiated m = {}",
                x.len(),
                self.m
            )));
        }
        let mut session = self.session.lock().expect("session lock");
        let id = session.next_id;
        session.next_id += 1;
        session.send(&Frame::Predict {
            id,
            instances: instances.to_vec(),
        })?;
        match session.receive()? {
            Frame::Prediction { id: got, values } => {
                if got != id {
                    return Err(TransportError::IdMismatch { expected: id, got });
                }
                if values.len() != instances.len() {
                    return Err(TransportError::CountMismatch {
                        expected: instances.len(),
                        got: values.len(),
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(TransportError::NonFinite("prediction values"));
                }
                Ok(values)
            }
            Frame::Error { message } => Err(TransportError::Server(message)),
            other => Err(TransportError::UnexpectedFrame(other.kind().to_string())),
        }
    }

    fn id(&self) -> String {
        self.id.clone()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServeSummary {
    pub predictions: usize,
    pub errors: usize,
}

/// Serves one session: answers frames until `shutdown` or end of input.
///
/// Malformed or out-of-order frames get an `error` frame and the loop continues.
pub fn serve<R: BufRead, W: Write>(
    model: &dyn BlackBoxModel,
    reader: R,
    mut writer: W,
    batch_cap: usize,
) -> io::Result<ServeSummary> {
    let mut summary = ServeSummary::default();
    let mut ready = false;
    let reply = |w: &mut W, f: Frame| -> io::Result<()> {
        w.write_all(f.encode().as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()
    };
    for line in reader.lines() {
        let line = line?;
        let frame = match Frame::decode(&line) {
            Ok(f) => f,
            Err(e) => {
                summary.errors += 1;
                reply(&mut writer, Frame::Error { message: e.to_string() })?;
                continue;
            }
        };
        match frame {
            Frame::Hello { version, m } => {
                if version != PROTOCOL_VERSION || m != model.num_features() {
                    summary.errors += 1;
                    reply(
                        &mut writer,
                        Frame::Error {
                            message: format!(
                                "unsupported hello (version {version}, m {m}); expected version {PROTOCOL_VERSION}, m {}",
                                model.num_features()
                            ),
                        },
                    )?;
                } else {
                    ready = true;
                    reply(&mut writer, Frame::Ready { version: PROTOCOL_VERSION })?;
                }
            }
            Frame::Predict { id, instances } if ready => {
                let result = if instances.len() > batch_cap {
                    Err(format!("batch of {} exceeds cap {batch_cap}", instances.len()))
                } else {
                    model.predict_batch(&instances).map_err(|e| e.to_string())
                };
                match result {
                    Ok(values) => {
                        summary.predictions += 1;
                        reply(&mut writer, Frame::Prediction { id, values })?;
                    }
                    Err(message) => {
                        summary.errors += 1;
                        reply(&mut writer, Frame::Error { message })?;
                    }
                }
            }
            Frame::Shutdown => break,
            other => {
                summary.errors += 1;
                reply(
                    &mut writer,
                    Frame::Error {
                        message: format!("unexpected {} frame", other.kind()),
                    },
                )?;
            }
        }
    }
    Ok(summary)
}

/// Accepts connections on `listener` and serves them one at a time.
pub fn serve_tcp(
    model: &dyn BlackBoxModel,
    listener: TcpListener,
    batch_cap: usize,
    max_sessions: Option<usize>,
) -> io::Result<()> {
    for (served, stream) in (1..).zip(listener.incoming()) {
        let stream = stream?;
        let reader = BufReader::new(stream.try_clone()?);
        serve(model, reader, stream, batch_cap)?;
        if max_sessions.is_some_and(|cap| served >= cap) {
            break;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConformanceReport {
    pub batches: usize,
    pub instances: usize,
    pub violations: Vec<String>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Drives a fuzz session of `batches` random predict requests (batch sizes
/// 1..=64, features uniform in [-10, 10]) and checks frame discipline and
/// determinism by replaying every tenth batch.
pub fn conformance_check(model: &RemoteModel, batches: usize, seed: u64) -> ConformanceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = model.num_features();
    let mut report = ConformanceReport::default();
    for b in 0..batches {
        let size = rng.gen_range(1..=64);
        let batch: Vec<Vec<f64>> = (0..size)
            .map(|_| (0..m).map(|_| rng.gen_range(-10.0..10.0)).collect())
            .collect();
        report.batches += 1;
        report.instances += size;
        match model.predict_batch(&batch) {
            Ok(values) => {
                if b % 10 == 0 {
                    match model.predict_batch(&batch) {
                        Ok(again) if again.iter().zip(&values).all(|(a, v)| a.to_bits() == v.to_bits()) => {}
                        Ok(_) => report.violations.push(format!("batch {b}: replay differs")),
                        Err(e) => report.violations.push(format!("batch {b} replay: {e}")),
                    }
                }
            }
            Err(e) => report.violations.push(format!("batch {b}: {e}")),
        }
    }
    report
}
