//! In-memory duplex byte channel.
//!
//! Each direction is an unbounded byte queue. Dropping either half of a
//! direction closes it: readers then see EOF after draining, writers get
//! `BrokenPipe`.

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::sync::{Arc, Condvar, Mutex};

#[derive(Default)]
struct Queue {
    data: VecDeque<u8>,
    closed: bool,
}

#[derive(Default)]
struct Shared {
    queue: Mutex<Queue>,
    ready: Condvar,
}

impl Shared {
    fn close(&self) {
        self.queue.lock().unwrap().closed = true;
        self.ready.notify_all();
    }
}

pub struct PipeReader {
    shared: Arc<Shared>,
}

pub struct PipeWriter {
    shared: Arc<Shared>,
}

/// One direction of the channel.
pub fn pipe() -> (PipeWriter, PipeReader) {
    let shared = Arc::new(Shared::default());
    (
        PipeWriter {
            shared: shared.clone(),
        },
        PipeReader { shared },
    )
}

/// One side of a duplex channel: what it reads is what the other side wrote.
pub struct DuplexEnd {
    pub reader: PipeReader,
    pub writer: PipeWriter,
}

pub fn duplex() -> (DuplexEnd, DuplexEnd) {
    let (a_w, b_r) = pipe();
    let (b_w, a_r) = pipe();
    (
        DuplexEnd {
            reader: a_r,
            writer: a_w,
        },
        DuplexEnd {
            reader: b_r,
            writer: b_w,
        },
    )
}

impl Read for PipeReader {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if buf.is_empty() {
            return Ok(0);
        }
        let mut q = self.shared.queue.lock().unwrap();
        while q.data.is_empty() && !q.closed {
            q = self.shared.ready.wait(q).unwrap();
        }
        let n = buf.len().min(q.data.len());
        for (slot, byte) in buf.iter_mut().zip(q.data.drain(..n)) {
            *slot = byte;
        }
        Ok(n)
    }
}

impl Drop for PipeReader {
    fn drop(&mut self) {
        self.shared.close();
    }
}

impl Write for PipeWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let mut q = self.shared.queue.lock().unwrap();
        if q.closed {
            return Err(io::Error::from(io::ErrorKind::BrokenPipe));
        }
        q.data.extend(buf);
        self.shared.ready.notify_all();
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl Drop for PipeWriter {
    fn drop(&mut self) {
        self.shared.close();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_flow_and_close() {
        let (mut a, mut b) = duplex();
        a.writer.write_all(b"hello\n").unwrap();
        let mut buf = [0u8; 16];
        let n = b.reader.read(&mut buf).unwrap();
        assert_eq!(&buf[..n], b"hello\n");
        drop(a.writer);
        assert_eq!(b.reader.read(&mut buf).unwrap(), 0);
        drop(b.reader);
        drop(a.reader);
        assert_eq!(
            b.writer.write(b"x").unwrap_err().kind(),
            io::ErrorKind::BrokenPipe
        );
    }
}
