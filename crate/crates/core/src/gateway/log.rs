use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::capture::Frame;
use crate::geometry::ContentPoint;
use crate::protocol::{encode_command, HidCommand};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log storage is full")]
    StorageFull,
    #[error("unknown frame {0:?}")]
    UnknownFrame(String),
    #[error("corrupt log line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("log i/o error: {0}")]
    Io(io::Error),
}

impl From<io::Error> for LogError {
    fn from(e: io::Error) -> Self {
        match e.raw_os_error() {
            Some(libc::ENOSPC) | Some(libc::EDQUOT) => LogError::StorageFull,
            _ => LogError::Io(e),
        }
    }
}

/// One item of the visual log.
///
/// `action` holds the wire command exactly as sent; `overlay` marks the
/// click or move target in content pixels and is present only for actions
/// with coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub frame_ref: String,
    pub action: Option<Value>,
    pub overlay: Option<[u32; 2]>,
    pub note: Option<String>,
}

/// Append-only visual log stored as a directory:
///
/// ```text
/// entries.jsonl        one LogEntry per line, in seq order
/// frames/<id>.png      content-addressed frames (id = SHA-256 prefix)
/// ```
pub struct VisualLog {
    dir: PathBuf,
    inner: Mutex<Inner>,
}

struct Inner {
    entries: Vec<LogEntry>,
    file: File,
}

const FRAME_ID_LEN: usize = 16;

fn valid_frame_id(id: &str) -> bool {
    id.len() == FRAME_ID_LEN && id.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

impl VisualLog {
    /// Opens (or creates) a log directory, loading existing entries.
    pub fn open(dir: impl AsRef<Path>) -> Result<VisualLog, LogError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join("frames"))?;
        let path = dir.join("entries.jsonl");
        let mut entries = Vec::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: LogEntry = serde_json::from_str(&line).map_err(|e| LogError::Corrupt {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
                entries.push(entry);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(VisualLog {
            dir,
            inner: Mutex::new(Inner { entries, file }),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Stores a frame's PNG under its content hash and returns the id.
    pub fn store_frame(&self, frame: &Frame) -> Result<String, LogError> {
        self.store_png(&frame.to_png())
    }

    pub fn store_png(&self, png: &[u8]) -> Result<String, LogError> {
        let digest = Sha256::digest(png);
        let id: String = digest.iter().map(|b| format!("{b:02x}")).collect::<String>()[..FRAME_ID_LEN].to_string();
        let path = self.dir.join("frames").join(format!("{id}.png"));
        if !path.exists() {
            let tmp = path.with_extension("png.tmp");
            fs::write(&tmp, png)?;
            fs::rename(&tmp, &path)?;
        }
        Ok(id)
    }

    pub fn append(
        &self,
        frame: &Frame,
        action: Option<&HidCommand>,
        overlay: Option<ContentPoint>,
        note: Option<&str>,
    ) -> Result<LogEntry, LogError> {
        let frame_ref = self.store_frame(frame)?;
        let action = action.map(|cmd| {
            serde_json::from_slice::<Value>(&encode_command(cmd)).expect("encoded commands are JSON")
        });
        let mut inner = self.inner.lock().unwrap();
        let entry = LogEntry {
            seq: inner.entries.last().map_or(1, |e| e.seq + 1),
            timestamp_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64),
            frame_ref,
            action,
            overlay: overlay.map(|p| [p.x, p.y]),
            note: note.map(str::to_string),
        };
        let mut line = serde_json::to_vec(&entry).expect("log entries serialize");
        line.push(b'\n');
        inner.file.write_all(&line)?;
        inner.file.flush()?;
        inner.entries.push(entry.clone());
        Ok(entry)
    }

    /// Entries with `seq > since`, in order.
    pub fn entries_since(&self, since: u64) -> Vec<LogEntry> {
        let inner = self.inner.lock().unwrap();
        let start = inner.entries.partition_point(|e| e.seq <= since);
        inner.entries[start..].to_vec()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn last(&self) -> Option<LogEntry> {
        self.inner.lock().unwrap().entries.last().cloned()
    }

    /// The stored PNG bytes of a frame, exactly as written.
    pub fn frame_png(&self, id: &str) -> Result<Vec<u8>, LogError> {
        if !valid_frame_id(id) {
            return Err(LogError::UnknownFrame(id.to_string()));
        }
        match fs::read(self.dir.join("frames").join(format!("{id}.png"))) {
            Ok(bytes) => Ok(bytes),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(LogError::UnknownFrame(id.to_string())),
            Err(e) => Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let log = VisualLog::open(dir.path()).unwrap();
        let f = Frame::filled(8, 8, [100, 120, 140]);
        let a = log.append(&f, None, None, Some("start")).unwrap();
        let b = log
            .append(&f, Some(&HidCommand::click(3, 4)), Some(ContentPoint::new(3, 4)), None)
            .unwrap();
        assert_eq!((a.seq, b.seq), (1, 2));
        assert_eq!(a.frame_ref, b.frame_ref);
        assert_eq!(b.overlay, Some([3, 4]));
        assert_eq!(b.action.as_ref().unwrap()["type"], "click");
        assert_eq!(log.frame_png(&a.frame_ref).unwrap(), f.to_png());
        drop(log);

        let log = VisualLog::open(dir.path()).unwrap();
        assert_eq!(log.entries_since(0).len(), 2);
        assert_eq!(log.entries_since(1), vec![b]);
        let c = log.append(&f, None, None, None).unwrap();
        assert_eq!(c.seq, 3);
    }

    #[test]
    fn frame_ids_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let log = VisualLog::open(dir.path()).unwrap();
        assert!(matches!(log.frame_png("../entries"), Err(LogError::UnknownFrame(_))));
        assert!(matches!(log.frame_png("0123456789abcdef"), Err(LogError::UnknownFrame(_))));
    }

    #[test]
    fn enospc_maps_to_storage_full() {
        let e: LogError = io::Error::from_raw_os_error(libc::ENOSPC).into();
        assert!(matches!(e, LogError::StorageFull));
    }
}
