//! HDMI capture dongles exposed as V4L2 devices.
//!
//! Enumeration reads sysfs; frame grabbing shells out to `ffmpeg`, which
//! already speaks every UVC pixel format these dongles produce.

use std::path::{Path, PathBuf};
use std::process::Command;

use super::{CaptureError, Frame, FrameSource, CAPTURE_HEIGHT, CAPTURE_WIDTH};

/// Substrings (lowercase) of device names reported by common HDMI-to-USB
/// capture dongles.
pub const CAPTURE_SIGNATURES: &[&str] = &[
    "hdmi",
    "capture",
    "usb video",
    "uvc",
    "macrosilicon",
    "ms2109",
    "ms2130",
    "cam link",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceDescriptor {
    pub index: u32,
    pub name: String,
    pub path: PathBuf,
    /// Advertised capture modes, when the enumerator could read them.
    pub modes: Option<Vec<(u32, u32)>>,
}

impl DeviceDescriptor {
    pub fn matches_signature(&self) -> bool {
        let name = self.name.to_lowercase();
        CAPTURE_SIGNATURES.iter().any(|sig| name.contains(sig))
    }

    pub fn supports_capture_mode(&self) -> bool {
        self.modes
            .as_ref()
            .is_none_or(|m| m.contains(&(CAPTURE_WIDTH, CAPTURE_HEIGHT)))
    }
}

pub trait DeviceEnumerator {
    fn enumerate(&self) -> Vec<DeviceDescriptor>;
}

/// Lists `/sys/class/video4linux/videoN` entries.
pub struct SysfsEnumerator {
    root: PathBuf,
    dev_dir: PathBuf,
}

impl Default for SysfsEnumerator {
    fn default() -> Self {
        SysfsEnumerator::new("/sys/class/video4linux", "/dev")
    }
}

impl SysfsEnumerator {
    pub fn new(root: impl Into<PathBuf>, dev_dir: impl Into<PathBuf>) -> Self {
        SysfsEnumerator {
            root: root.into(),
            dev_dir: dev_dir.into(),
        }
    }
}

impl DeviceEnumerator for SysfsEnumerator {
    fn enumerate(&self) -> Vec<DeviceDescriptor> {
        let Ok(entries) = std::fs::read_dir(&self.root) else {
            return Vec::new();
        };
        let mut out: Vec<DeviceDescriptor> = entries
            .flatten()
            .filter_map(|entry| {
                let file_name = entry.file_name().to_string_lossy().into_owned();
                let index: u32 = file_name.strip_prefix("video")?.parse().ok()?;
                let name = std::fs::read_to_string(entry.path().join("name"))
                    .unwrap_or_default()
                    .trim()
                    .to_string();
                Some(DeviceDescriptor {
                    index,
                    name,
                    path: self.dev_dir.join(&file_name),
                    modes: None,
                })
            })
            .collect();
        out.sort_by_key(|d| d.index);
        out
    }
}

/// Picks the most plausible HDMI capture dongle: signature match, 1920x1080
/// capable, lowest index on ties.
pub fn select_capture_device(devices: &[DeviceDescriptor]) -> Result<DeviceDescriptor, CaptureError> {
    devices
        .iter()
        .filter(|d| d.matches_signature() && d.supports_capture_mode())
        .min_by_key(|d| d.index)
        .cloned()
        .ok_or(CaptureError::NoDeviceFound)
}

/// Grabs single 1920x1080 frames from a V4L2 device through `ffmpeg`.
pub struct DeviceSource {
    path: PathBuf,
    ffmpeg: PathBuf,
    started: std::time::Instant,
}

impl DeviceSource {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        DeviceSource {
            path: path.into(),
            ffmpeg: PathBuf::from("ffmpeg"),
            started: std::time::Instant::now(),
        }
    }

    /// Opens `/dev/video{index}` when given, otherwise auto-selects.
    pub fn open(index: Option<u32>, enumerator: &dyn DeviceEnumerator) -> Result<Self, CaptureError> {
        match index {
            Some(i) => Ok(DeviceSource::new(format!("/dev/video{i}"))),
            None => Ok(DeviceSource::new(select_capture_device(&enumerator.enumerate())?.path)),
        }
    }

    pub fn with_ffmpeg(mut self, ffmpeg: impl Into<PathBuf>) -> Self {
        self.ffmpeg = ffmpeg.into();
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl FrameSource for DeviceSource {
    fn acquire(&mut self) -> Result<Frame, CaptureError> {
        if !self.path.exists() {
            return Err(CaptureError::SourceUnavailable(format!(
                "{} is not present",
                self.path.display()
            )));
        }
        let size = format!("{CAPTURE_WIDTH}x{CAPTURE_HEIGHT}");
        let output = Command::new(&self.ffmpeg)
            .args(["-hide_banner", "-loglevel", "error", "-f", "v4l2", "-video_size", &size, "-i"])
            .arg(&self.path)
            .args(["-frames:v", "1", "-f", "rawvideo", "-pix_fmt", "rgb24", "-"])
            .output()
            .map_err(|e| CaptureError::SourceUnavailable(format!("cannot run ffmpeg: {e}")))?;
        if !output.status.success() {
            return Err(CaptureError::SourceUnavailable(
                String::from_utf8_lossy(&output.stderr).trim().to_string(),
            ));
        }
        Frame::new(CAPTURE_WIDTH, CAPTURE_HEIGHT, output.stdout)
            .map(|f| f.with_timestamp(self.started.elapsed()))
            .map_err(|e| CaptureError::DecodeFailure(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dev(index: u32, name: &str) -> DeviceDescriptor {
        DeviceDescriptor {
            index,
            name: name.into(),
            path: PathBuf::from(format!("/dev/video{index}")),
            modes: None,
        }
    }

    #[test]
    fn selection_rules() {
        assert!(matches!(select_capture_device(&[]), Err(CaptureError::NoDeviceFound)));
        let webcam = dev(0, "Integrated Camera");
        assert!(matches!(
            select_capture_device(std::slice::from_ref(&webcam)),
            Err(CaptureError::NoDeviceFound)
        ));
        let a = dev(4, "USB Video: USB Video");
        let b = dev(2, "MACROSILICON HDMI Capture");
        assert_eq!(select_capture_device(&[webcam, a, b.clone()]).unwrap(), b);
        let mut small = dev(1, "HDMI Capture");
        small.modes = Some(vec![(1280, 720)]);
        assert_eq!(select_capture_device(&[small, b.clone()]).unwrap(), b);
    }

    #[test]
    fn sysfs_listing() {
        let dir = tempfile::tempdir().unwrap();
        for (n, name) in [("video2", "USB Video"), ("video0", "Integrated Camera"), ("misc", "x")] {
            std::fs::create_dir(dir.path().join(n)).unwrap();
            std::fs::write(dir.path().join(n).join("name"), format!("{name}\n")).unwrap();
        }
        let found = SysfsEnumerator::new(dir.path(), "/dev").enumerate();
        assert_eq!(found.iter().map(|d| d.index).collect::<Vec<_>>(), vec![0, 2]);
        let chosen = select_capture_device(&found).unwrap();
        assert_eq!(chosen.path, PathBuf::from("/dev/video2"));
    }

    #[test]
    fn unplugged_device() {
        let mut src = DeviceSource::new("/dev/video-unplugged-99");
        assert!(matches!(src.acquire(), Err(CaptureError::SourceUnavailable(_))));
    }
}
