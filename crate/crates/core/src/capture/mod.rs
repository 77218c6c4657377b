//! Frame acquisition and letterbox normalization.

mod device;
mod frame;
mod letterbox;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use device::{
    select_capture_device, DeviceDescriptor, DeviceEnumerator, DeviceSource, SysfsEnumerator,
    CAPTURE_SIGNATURES,
};
pub use frame::{Frame, CAPTURE_HEIGHT, CAPTURE_WIDTH};
pub use letterbox::{aspect_fit, crop_letterbox, ContentGeometry, BLACK_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CaptureError {
    #[error("capture source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("could not decode frame: {0}")]
    DecodeFailure(String),
    #[error("frame is entirely black")]
    AllBlackFrame,
    #[error("no capture device found")]
    NoDeviceFound,
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Anything that can hand out the most recent raw capture.
pub trait FrameSource: Send {
    fn acquire(&mut self) -> Result<Frame, CaptureError>;
}

impl<S: FrameSource + ?Sized> FrameSource for Box<S> {
    fn acquire(&mut self) -> Result<Frame, CaptureError> {
        (**self).acquire()
    }
}

/// Replays PNG files from a directory in filename order. Once the files run
/// out the last one keeps being returned (re-read from disk each time, so a
/// writer may keep replacing it).
pub struct FileSource {
    dir: PathBuf,
    next: usize,
}

impl FileSource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FileSource {
            dir: dir.into(),
            next: 0,
        }
    }

    fn listing(dir: &Path) -> Result<Vec<PathBuf>, CaptureError> {
        let entries = std::fs::read_dir(dir)
            .map_err(|e| CaptureError::SourceUnavailable(format!("{}: {e}", dir.display())))?;
        let mut files: Vec<PathBuf> = entries
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("png")))
            .collect();
        files.sort();
        Ok(files)
    }
}

impl FrameSource for FileSource {
    fn acquire(&mut self) -> Result<Frame, CaptureError> {
        let files = Self::listing(&self.dir)?;
        if files.is_empty() {
            return Err(CaptureError::SourceUnavailable(format!(
                "no PNG frames in {}",
                self.dir.display()
            )));
        }
        let i = self.next.min(files.len() - 1);
        self.next = self.next.saturating_add(1);
        let bytes = std::fs::read(&files[i])
            .map_err(|e| CaptureError::SourceUnavailable(e.to_string()))?;
        Frame::from_png(&bytes)
    }
}
