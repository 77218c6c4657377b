use std::io::{self, BufRead, BufReader, Read, Write};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use thiserror::Error;

use super::codec::{decode_response, encode_command, HidResponse};
use super::command::HidCommand;
use super::ProtocolError;

/// Timing and framing parameters for one protocol session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    /// How long to wait for the response line before declaring the device hung.
    pub ack_timeout: Duration,
    /// Gap the device leaves between executed commands.
    pub inter_command_pacing: Duration,
    pub max_line_length: usize,
    /// Used only when the transport is a real serial port (8N1).
    pub baud_rate: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            ack_timeout: Duration::from_secs(2),
            inter_command_pacing: Duration::from_millis(100),
            max_line_length: 4096,
            baud_rate: 115_200,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.inter_command_pacing.is_zero() || self.ack_timeout <= self.inter_command_pacing {
            return Err(SessionError::InvalidConfig(
                "ack_timeout > inter_command_pacing > 0 is required".into(),
            ));
        }
        if self.max_line_length < 64 {
            return Err(SessionError::InvalidConfig(
                "max_line_length must be at least 64 bytes".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("channel closed")]
    ChannelClosed,
    #[error("malformed response: {0}")]
    MalformedResponse(ProtocolError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// A byte channel that carries encoded lines to the device and response
/// lines back.
pub trait Transport: Send {
    fn send(&mut self, line: &[u8]) -> Result<(), SessionError>;

    /// Blocks for the next complete response line (without its newline).
    fn recv_line(&mut self, timeout: Duration) -> Result<Vec<u8>, SessionError>;

    /// Discards any response lines that are already buffered.
    fn drain(&mut self) {}
}

/// Outcome of reading one newline-terminated line with a length cap.
#[derive(Debug, PartialEq, Eq)]
pub enum LineRead {
    Line(Vec<u8>),
    /// The line exceeded the cap; its bytes were consumed and discarded.
    TooLong(usize),
    Eof,
}

/// Reads up to and including the next `\n`, returning the line without it.
/// A final unterminated fragment at EOF is returned as a line.
pub fn read_line_bounded<R: BufRead + ?Sized>(reader: &mut R, max: usize) -> io::Result<LineRead> {
    let mut line = Vec::new();
    let mut len = 0usize;
    loop {
        let buf = match reader.fill_buf() {
            Ok(buf) => buf,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        if buf.is_empty() {
            return Ok(if len == 0 {
                LineRead::Eof
            } else if len > max {
                LineRead::TooLong(len)
            } else {
                LineRead::Line(line)
            });
        }
        let (chunk, found) = match buf.iter().position(|b| *b == b'\n') {
            Some(i) => (&buf[..i], Some(i)),
            None => (buf, None),
        };
        len += chunk.len();
        if len <= max {
            line.extend_from_slice(chunk);
        }
        let consumed = found.map_or(chunk.len(), |i| i + 1);
        reader.consume(consumed);
        if found.is_some() {
            return Ok(if len > max {
                LineRead::TooLong(len)
            } else {
                LineRead::Line(line)
            });
        }
    }
}

/// Transport over any byte stream (serial port, pseudo-terminal, pipe).
///
/// A background thread splits incoming bytes into lines so that receiving
/// can time out without disturbing the stream.
pub struct StreamTransport {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<LineRead>>,
    max_line_length: usize,
}

impl StreamTransport {
    pub fn new<R, W>(reader: R, writer: W, max_line_length: usize) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::Builder::new()
            .name("hid-reader".into())
            .spawn(move || {
                let mut reader = BufReader::new(reader);
                loop {
                    let next = read_line_bounded(&mut reader, max_line_length);
                    let stop = matches!(next, Ok(LineRead::Eof) | Err(_));
                    if tx.send(next).is_err() || stop {
                        break;
                    }
                }
            })
            .expect("spawn reader thread");
        StreamTransport {
            writer: Box::new(writer),
            lines: rx,
            max_line_length,
        }
    }
}

impl Transport for StreamTransport {
    fn send(&mut self, line: &[u8]) -> Result<(), SessionError> {
        let res = self.writer.write_all(line).and_then(|_| self.writer.flush());
        match res {
            Ok(()) => Ok(()),
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::BrokenPipe
                        | io::ErrorKind::ConnectionReset
                        | io::ErrorKind::NotConnected
                ) || e.raw_os_error() == Some(libc::EIO) =>
            {
                Err(SessionError::ChannelClosed)
            }
            Err(e) => Err(SessionError::Io(e)),
        }
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<Vec<u8>, SessionError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(LineRead::Line(line))) => Ok(line),
            Ok(Ok(LineRead::TooLong(len))) => {
                Err(SessionError::MalformedResponse(ProtocolError::LineTooLong {
                    len,
                    max: self.max_line_length,
                }))
            }
            Ok(Ok(LineRead::Eof)) | Err(RecvTimeoutError::Disconnected) => {
                Err(SessionError::ChannelClosed)
            }
            Ok(Err(e)) if e.raw_os_error() == Some(libc::EIO) => Err(SessionError::ChannelClosed),
            Ok(Err(e)) => Err(SessionError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(SessionError::Timeout(timeout)),
        }
    }

    fn drain(&mut self) {
        while let Ok(Ok(LineRead::Line(_))) = self.lines.try_recv() {}
    }
}

/// Wraps a transport and keeps a copy of every byte sent through it.
pub struct RecordingTransport<T> {
    inner: T,
    sent: Arc<Mutex<Vec<u8>>>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> (Self, Arc<Mutex<Vec<u8>>>) {
        let sent = Arc::new(Mutex::new(Vec::new()));
        (
            RecordingTransport {
                inner,
                sent: sent.clone(),
            },
            sent,
        )
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn send(&mut self, line: &[u8]) -> Result<(), SessionError> {
        self.sent.lock().unwrap().extend_from_slice(line);
        self.inner.send(line)
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<Vec<u8>, SessionError> {
        self.inner.recv_line(timeout)
    }

    fn drain(&mut self) {
        self.inner.drain()
    }
}

/// One open command channel to a device. At most one command is in flight;
/// `execute` takes `&mut self`, so commands leave in call order.
pub struct Session {
    transport: Box<dyn Transport>,
    config: SessionConfig,
    sent: u64,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("config", &self.config)
            .field("sent", &self.sent)
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(transport: impl Transport + 'static, config: SessionConfig) -> Result<Self, SessionError> {
        config.validate()?;
        Ok(Session {
            transport: Box::new(transport),
            config,
            sent: 0,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Number of commands written so far.
    pub fn commands_sent(&self) -> u64 {
        self.sent
    }

    /// Writes the command and blocks for its acknowledgement.
    pub fn execute(&mut self, cmd: &HidCommand) -> Result<HidResponse, SessionError> {
        let line = encode_command(cmd);
        if line.len() > self.config.max_line_length {
            return Err(ProtocolError::LineTooLong {
                len: line.len(),
                max: self.config.max_line_length,
            }
            .into());
        }
        self.transport.drain();
        self.transport.send(&line)?;
        self.sent += 1;
        let reply = self.transport.recv_line(self.config.ack_timeout)?;
        decode_response(&reply).map_err(SessionError::MalformedResponse)
    }
}
