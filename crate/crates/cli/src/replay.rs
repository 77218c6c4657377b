//! A directory-backed stand-in for the HID device.

use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use hidagent::protocol::{decode_command, encode_response, HidResponse, SessionError, Transport};

/// Acknowledges every well-formed command and appends its wire line to
/// `commands.jsonl`.
pub struct ReplayTransport {
    out: File,
    pending: VecDeque<Vec<u8>>,
}

impl ReplayTransport {
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        let out = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join("commands.jsonl"))?;
        Ok(ReplayTransport {
            out,
            pending: VecDeque::new(),
        })
    }
}

impl Transport for ReplayTransport {
    fn send(&mut self, line: &[u8]) -> Result<(), SessionError> {
        self.out.write_all(line).map_err(SessionError::Io)?;
        let body = line.strip_suffix(b"\n").unwrap_or(line);
        let resp = match decode_command(body) {
            Ok(_) => HidResponse::Success,
            Err(e) => HidResponse::Error(e.to_string()),
        };
        let mut reply = encode_response(&resp);
        if reply.last() == Some(&b'\n') {
            reply.pop();
        }
        self.pending.push_back(reply);
        Ok(())
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<Vec<u8>, SessionError> {
        self.pending.pop_front().ok_or(SessionError::Timeout(timeout))
    }

    fn drain(&mut self) {
        self.pending.clear();
    }
}
