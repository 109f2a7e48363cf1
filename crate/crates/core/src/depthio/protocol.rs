//! Wire protocol between the pipeline and an external depth estimator.
//!
//! The estimator runs as a child process; messages flow over its stdin and
//! stdout. Each message is
//!
//! ```text
//! u32 BE length | u8 type | payload
//! ```
//!
//! where `length` counts the type byte plus the payload. Types:
//!
//! | type | name  | payload |
//! |------|-------|---------|
//! | 0x01 | HELLO | u8 protocol version (1), UTF-8 model variant tag |
//! | 0x02 | FRAME | u32 BE frame id, u32 BE width, u32 BE height, RGB8 pixels |
//! | 0x03 | DEPTH | u32 BE frame id, `width·height` u16 BE depth samples |
//! | 0x7F | ERROR | UTF-8 message |
//!
//! The client opens with HELLO and the server answers with its own HELLO
//! carrying the version it speaks. Frames are then sent one at a time; the
//! server answers each FRAME with the DEPTH of the same id (or ERROR).

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::{BackendKind, DepthBackendSpec, DepthMap};
use crate::error::{Error, Result};
use crate::imagecore::{quantize_u8, RgbImage};

pub const PROTOCOL_VERSION: u8 = 1;
pub const MSG_HELLO: u8 = 0x01;
pub const MSG_FRAME: u8 = 0x02;
pub const MSG_DEPTH: u8 = 0x03;
pub const MSG_ERROR: u8 = 0x7F;

/// Upper bound on a single message, guards against garbage length prefixes.
pub const MAX_MESSAGE_LEN: u32 = 1 << 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello { version: u8, model_variant: String },
    Frame { id: u32, width: u32, height: u32, rgb8: Vec<u8> },
    Depth { id: u32, samples: Vec<u16> },
    Error(String),
}

impl Message {
    pub fn frame(id: u32, img: &RgbImage) -> Self {
        Message::Frame {
            id,
            width: img.width() as u32,
            height: img.height() as u32,
            rgb8: img.data().iter().map(|&v| quantize_u8(v)).collect(),
        }
    }

    pub fn depth(id: u32, d: &DepthMap) -> Result<Self> {
        let samples = d
            .data()
            .iter()
            .map(|&v| super::quantize_u16(v))
            .collect::<Result<Vec<u16>>>()?;
        Ok(Message::Depth { id, samples })
    }

    pub fn encode(&self) -> Vec<u8> {
        let (kind, payload) = match self {
            Message::Hello { version, model_variant } => {
                let mut p = vec![*version];
                p.extend_from_slice(model_variant.as_bytes());
                (MSG_HELLO, p)
            }
            Message::Frame { id, width, height, rgb8 } => {
                let mut p = Vec::with_capacity(12 + rgb8.len());
                p.extend_from_slice(&id.to_be_bytes());
                p.extend_from_slice(&width.to_be_bytes());
                p.extend_from_slice(&height.to_be_bytes());
                p.extend_from_slice(rgb8);
                (MSG_FRAME, p)
            }
            Message::Depth { id, samples } => {
                let mut p = Vec::with_capacity(4 + samples.len() * 2);
                p.extend_from_slice(&id.to_be_bytes());
                for s in samples {
                    p.extend_from_slice(&s.to_be_bytes());
                }
                (MSG_DEPTH, p)
            }
            Message::Error(msg) => (MSG_ERROR, msg.as_bytes().to_vec()),
        };
        let mut out = Vec::with_capacity(5 + payload.len());
        out.extend_from_slice(&(payload.len() as u32 + 1).to_be_bytes());
        out.push(kind);
        out.extend_from_slice(&payload);
        out
    }

    pub fn decode(kind: u8, payload: &[u8]) -> Result<Self> {
        let be32 = |at: usize| -> Result<u32> {
            payload
                .get(at..at + 4)
                .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
                .ok_or_else(|| Error::Backend(format!("truncated message of type {kind:#04x}")))
        };
        let utf8 = |b: &[u8]| String::from_utf8(b.to_vec()).map_err(|e| Error::Backend(format!("invalid UTF-8: {e}")));
        match kind {
            MSG_HELLO => {
                let (&version, tag) = payload
                    .split_first()
                    .ok_or_else(|| Error::Backend("empty HELLO".into()))?;
                Ok(Message::Hello {
                    version,
                    model_variant: utf8(tag)?,
                })
            }
            MSG_FRAME => {
                let (id, width, height) = (be32(0)?, be32(4)?, be32(8)?);
                let rgb8 = payload[12..].to_vec();
                if rgb8.len() as u64 != u64::from(width) * u64::from(height) * 3 {
                    return Err(Error::Backend(format!(
                        "FRAME {id}: {} pixel bytes for {width}x{height}",
                        rgb8.len()
                    )));
                }
                Ok(Message::Frame { id, width, height, rgb8 })
            }
            MSG_DEPTH => {
                let id = be32(0)?;
                let body = &payload[4..];
                if !body.len().is_multiple_of(2) {
                    return Err(Error::Backend(format!("DEPTH {id}: odd sample byte count")));
                }
                let samples = body.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect();
                Ok(Message::Depth { id, samples })
            }
            MSG_ERROR => Ok(Message::Error(utf8(payload)?)),
            other => Err(Error::Backend(format!("unknown message type {other:#04x}"))),
        }
    }
}

pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> io::Result<()> {
    w.write_all(&msg.encode())?;
    w.flush()
}

/// Reads one message; `Ok(None)` on a clean end of stream.
pub fn read_message<R: Read>(r: &mut R) -> Result<Option<Message>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len);
    if len == 0 || len > MAX_MESSAGE_LEN {
        return Err(Error::Backend(format!("invalid message length {len}")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Message::decode(body[0], &body[1..]).map(Some)
}

/// Server loop for depth estimators implemented in Rust: answers the
/// handshake, then maps every FRAME through `estimate` until the client
/// closes the stream.
pub fn serve<R, W, F>(input: R, output: W, model_variant: &str, mut estimate: F) -> Result<()>
where
    R: Read,
    W: Write,
    F: FnMut(&RgbImage) -> Result<DepthMap>,
{
    let mut input = BufReader::new(input);
    let mut output = BufWriter::new(output);
    match read_message(&mut input)? {
        Some(Message::Hello { version, .. }) if version == PROTOCOL_VERSION => {}
        Some(Message::Hello { version, .. }) => {
            write_message(&mut output, &Message::Error(format!("unsupported protocol version {version}")))?;
            return Err(Error::Backend(format!("client requested protocol version {version}")));
        }
        Some(other) => return Err(Error::Backend(format!("expected HELLO, got {other:?}"))),
        None => return Ok(()),
    }
    write_message(
        &mut output,
        &Message::Hello {
            version: PROTOCOL_VERSION,
            model_variant: model_variant.to_string(),
        },
    )?;
    while let Some(msg) = read_message(&mut input)? {
        let Message::Frame { id, width, height, rgb8 } = msg else {
            write_message(&mut output, &Message::Error("expected FRAME".into()))?;
            continue;
        };
        let data = rgb8.iter().map(|&b| f32::from(b) / 255.0).collect();
        let reply = RgbImage::new(width as usize, height as usize, data)
            .and_then(|img| estimate(&img))
            .and_then(|d| Message::depth(id, &d));
        match reply {
            Ok(m) => write_message(&mut output, &m)?,
            Err(e) => write_message(&mut output, &Message::Error(format!("frame {id}: {e}")))?,
        }
    }
    Ok(())
}

/// Client side of one external backend process.
pub struct BackendSession {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    replies: Receiver<Result<Message>>,
    timeout: Duration,
    pub server_variant: String,
}

impl BackendSession {
    /// Spawns `command` and performs the HELLO handshake.
    pub fn start(command: &[String], model_variant: &str, timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Backend("empty backend command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Backend(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take().map(BufWriter::new);
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut r = BufReader::new(stdout);
            loop {
                match read_message(&mut r) {
                    Ok(Some(m)) => {
                        if tx.send(Ok(m)).is_err() {
                            break;
                        }
                    }
                    Ok(None) => break,
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        let mut session = Self {
            child,
            stdin,
            replies: rx,
            timeout,
            server_variant: String::new(),
        };
        session.send(&Message::Hello {
            version: PROTOCOL_VERSION,
            model_variant: model_variant.to_string(),
        })?;
        match session.recv("handshake")? {
            Message::Hello { version, model_variant } if version == PROTOCOL_VERSION => {
                session.server_variant = model_variant;
                Ok(session)
            }
            Message::Hello { version, .. } => Err(Error::Backend(format!(
                "protocol version mismatch: backend speaks {version}, expected {PROTOCOL_VERSION}"
            ))),
            Message::Error(e) => Err(Error::Backend(format!("handshake rejected: {e}"))),
            other => Err(Error::Backend(format!("expected HELLO, got {}", describe(&other)))),
        }
    }

    fn send(&mut self, msg: &Message) -> Result<()> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Backend("backend input already closed".into()))?;
        write_message(stdin, msg).map_err(|e| Error::Backend(format!("write to backend failed: {e}")))
    }

    fn recv(&mut self, what: &str) -> Result<Message> {
        match self.replies.recv_timeout(self.timeout) {
            Ok(r) => r,
            Err(RecvTimeoutError::Timeout) => Err(Error::Backend(format!(
                "{what}: no reply within {:.1} s",
                self.timeout.as_secs_f64()
            ))),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Backend(format!("{what}: backend closed its output"))),
        }
    }

    /// Sends one frame and waits for its depth map.
    pub fn estimate(&mut self, index: usize, img: &RgbImage) -> Result<DepthMap> {
        let id = index as u32;
        self.send(&Message::frame(id, img))?;
        match self.recv(&format!("frame {index}"))? {
            Message::Depth { id: got, samples } => {
                if got != id {
                    return Err(Error::Backend(format!("frame {index}: reply carries frame id {got}")));
                }
                let expected = img.pixel_count();
                if samples.len() != expected {
                    return Err(Error::Alignment(format!(
                        "frame {index}: backend returned {} depth samples for a {}x{} frame",
                        samples.len(),
                        img.width(),
                        img.height()
                    )));
                }
                let data = samples.iter().map(|&q| (f64::from(q) / 65535.0) as f32).collect();
                DepthMap::new(img.width(), img.height(), data)
            }
            Message::Error(e) => Err(Error::Backend(format!("frame {index}: backend error: {e}"))),
            other => Err(Error::Backend(format!("frame {index}: unexpected {}", describe(&other)))),
        }
    }

    /// Closes the backend's input and reaps the process.
    pub fn finish(mut self) -> Result<()> {
        self.stdin.take();
        self.child.wait().map_err(|e| Error::Backend(format!("waiting for backend: {e}")))?;
        Ok(())
    }
}

impl Drop for BackendSession {
    fn drop(&mut self) {
        if self.stdin.take().is_some() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

fn describe(m: &Message) -> &'static str {
    match m {
        Message::Hello { .. } => "HELLO",
        Message::Frame { .. } => "FRAME",
        Message::Depth { .. } => "DEPTH",
        Message::Error(_) => "ERROR",
    }
}

/// Runs every frame through an `ExternalProcess` backend, in order.
pub fn run_external_backend(spec: &DepthBackendSpec, frames: &[RgbImage]) -> Result<Vec<DepthMap>> {
    let BackendKind::ExternalProcess { command } = &spec.kind else {
        return Err(Error::Backend(format!("backend {:?} is not an external process", spec.kind)));
    };
    if !(spec.frame_timeout_secs > 0.0 && spec.frame_timeout_secs.is_finite()) {
        return Err(Error::Config(format!(
            "frame timeout must be positive, got {}",
            spec.frame_timeout_secs
        )));
    }
    let mut session = BackendSession::start(
        command,
        &spec.model_variant,
        Duration::from_secs_f64(spec.frame_timeout_secs),
    )?;
    let maps = frames
        .iter()
        .enumerate()
        .map(|(i, f)| session.estimate(i, f))
        .collect::<Result<Vec<_>>>()?;
    session.finish()?;
    Ok(maps)
}
