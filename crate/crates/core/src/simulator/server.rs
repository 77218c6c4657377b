use std::io::{self, BufReader, Read, Write};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crate::protocol::pipe::duplex;
use crate::protocol::serial::Pty;
use crate::protocol::{
    encode_response, read_line_bounded, HidResponse, LineRead, SessionError, StreamTransport, Transport,
};

use super::SimHandle;

const DEVICE_MAX_LINE: usize = 4096;

/// In-process transport: each sent line is executed synchronously and its
/// reply queued for the next receive. No real time passes.
pub struct SimulatorLink {
    sim: SimHandle,
    pending: Option<Vec<u8>>,
}

impl SimulatorLink {
    pub fn new(sim: SimHandle) -> Self {
        SimulatorLink { sim, pending: None }
    }
}

impl Transport for SimulatorLink {
    fn send(&mut self, line: &[u8]) -> Result<(), SessionError> {
        let mut sim = self.sim.lock().unwrap();
        if !sim.is_running() {
            return Err(SessionError::ChannelClosed);
        }
        self.pending = sim.handle_line(line);
        Ok(())
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<Vec<u8>, SessionError> {
        match self.pending.take() {
            Some(mut reply) => {
                if reply.last() == Some(&b'\n') {
                    reply.pop();
                }
                Ok(reply)
            }
            None if !self.sim.lock().unwrap().is_running() => Err(SessionError::ChannelClosed),
            None => Err(SessionError::Timeout(timeout)),
        }
    }

    fn drain(&mut self) {
        self.pending = None;
    }
}

/// Runs the device side of the protocol over a byte stream until EOF or
/// until the simulator is stopped.
pub fn serve_stream<R, W>(sim: SimHandle, reader: R, mut writer: W) -> JoinHandle<()>
where
    R: Read + Send + 'static,
    W: Write + Send + 'static,
{
    thread::Builder::new()
        .name("hid-device".into())
        .spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let reply = match read_line_bounded(&mut reader, DEVICE_MAX_LINE) {
                    Ok(LineRead::Line(line)) => {
                        let mut guard = sim.lock().unwrap();
                        if !guard.is_running() {
                            break;
                        }
                        let reply = guard.handle_line(&line);
                        let wall = guard.config().wall_clock.then_some(guard.config().pacing);
                        drop(guard);
                        if let Some(pause) = wall {
                            thread::sleep(pause);
                        }
                        reply
                    }
                    Ok(LineRead::TooLong(len)) => Some(encode_response(&HidResponse::Error(format!(
                        "line of {len} bytes exceeds {DEVICE_MAX_LINE}"
                    )))),
                    Ok(LineRead::Eof) | Err(_) => break,
                };
                if let Some(reply) = reply {
                    if writer.write_all(&reply).and_then(|_| writer.flush()).is_err() {
                        break;
                    }
                }
            }
        })
        .expect("spawn device thread")
}

/// Connects a [`StreamTransport`] to the simulator through an in-memory
/// duplex channel, exercising the full framing path.
pub fn spawn_duplex(sim: SimHandle, max_line_length: usize) -> (StreamTransport, JoinHandle<()>) {
    let (host, device) = duplex();
    let server = serve_stream(sim, device.reader, device.writer);
    (
        StreamTransport::new(host.reader, host.writer, max_line_length),
        server,
    )
}

/// Serves the simulator on a fresh pseudo-terminal. Clients open
/// [`Pty::slave_path`] like a USB serial adapter.
pub fn serve_pty(sim: SimHandle) -> io::Result<(Pty, JoinHandle<()>)> {
    let pty = Pty::open()?;
    let (r, w) = pty.master_handles()?;
    let server = serve_stream(sim, r, w);
    Ok((pty, server))
}
