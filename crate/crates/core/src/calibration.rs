//! Mapping between cropped-content pixels and the device's HID frame.
//!
//! The device only knows relative motion. After homing (driving the pointer
//! into the top-left corner, where the OS clips it) the device's own
//! position counter and the real pointer agree at the origin. Two moves a
//! known distance apart, observed in captured frames, then give the pixel
//! scale along each axis.

use std::path::Path;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::{crop_letterbox, CaptureError, Frame, FrameSource};
use crate::geometry::{ContentPoint, HidPoint};
use crate::protocol::{HidCommand, HidResponse, Session, SessionError};
use crate::vision::{detect_cursor_motion, Axis, VisionError};

/// HID coordinate of the first calibration point on both axes.
pub const CALIBRATION_START: u32 = 100;
/// Distance in HID units between the two calibration points.
pub const CALIBRATION_STEP: u32 = 100;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("calibration is missing or invalid")]
    InvalidCalibration,
    #[error("calibration failed: {0}")]
    CalibrationFailed(#[from] VisionError),
    #[error("device rejected command: {0}")]
    DeviceError(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error("calibration file: {0}")]
    Io(#[from] std::io::Error),
    #[error("calibration file: {0}")]
    Parse(#[from] serde_json::Error),
}

fn version() -> u32 {
    1
}

/// Scales and origin relating content pixels to HID units.
///
/// Stored on disk as:
///
/// ```json
/// {"v": 1, "px_per_hid_x": 1.0, "px_per_hid_y": 1.0,
///  "origin_px": [0.0, 0.0], "created_at": 1760000000, "valid": true}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    #[serde(default = "version")]
    pub v: u32,
    pub px_per_hid_x: f64,
    pub px_per_hid_y: f64,
    /// Content-space pixel of the pointer hotspot after homing.
    pub origin_px: (f64, f64),
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub valid: bool,
}

impl Calibration {
    pub fn new(px_per_hid_x: f64, px_per_hid_y: f64, origin_px: (f64, f64)) -> Self {
        Calibration {
            v: 1,
            px_per_hid_x,
            px_per_hid_y,
            origin_px,
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            valid: true,
        }
    }

    /// Unit scale with the origin at the content's top-left pixel.
    pub fn identity() -> Self {
        Calibration::new(1.0, 1.0, (0.0, 0.0))
    }

    pub fn is_usable(&self) -> bool {
        self.valid
            && [self.px_per_hid_x, self.px_per_hid_y]
                .iter()
                .all(|s| s.is_finite() && *s > 0.0)
            && self.origin_px.0.is_finite()
            && self.origin_px.1.is_finite()
    }

    pub fn invalidate(&mut self) {
        self.valid = false;
    }

    pub fn pixel_to_hid(&self, p: ContentPoint) -> Result<HidPoint, CalibrationError> {
        if !self.is_usable() {
            return Err(CalibrationError::InvalidCalibration);
        }
        let conv = |v: u32, origin: f64, scale: f64| {
            ((v as f64 - origin) / scale).round().clamp(0.0, u32::MAX as f64) as u32
        };
        Ok(HidPoint {
            x: conv(p.x, self.origin_px.0, self.px_per_hid_x),
            y: conv(p.y, self.origin_px.1, self.px_per_hid_y),
        })
    }

    /// Where a HID position should appear in content space.
    pub fn hid_to_pixel(&self, h: HidPoint) -> (f64, f64) {
        (
            self.origin_px.0 + h.x as f64 * self.px_per_hid_x,
            self.origin_px.1 + h.y as f64 * self.px_per_hid_y,
        )
    }

    pub fn load(path: &Path) -> Result<Calibration, CalibrationError> {
        let cal: Calibration = serde_json::from_slice(&std::fs::read(path)?)?;
        if cal.v != 1 {
            return Err(CalibrationError::InvalidCalibration);
        }
        Ok(cal)
    }

    pub fn save(&self, path: &Path) -> Result<(), CalibrationError> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Measure only the horizontal scale and assume square pixels.
    pub horizontal_only: bool,
    /// Pause after each move before grabbing a frame.
    pub settle: Duration,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            horizontal_only: false,
            settle: Duration::from_millis(300),
        }
    }
}

fn expect_success(resp: HidResponse) -> Result<(), CalibrationError> {
    match resp {
        HidResponse::Success => Ok(()),
        HidResponse::Error(m) => Err(CalibrationError::DeviceError(m)),
    }
}

/// Drives the pointer to the screen origin.
pub fn home(session: &mut Session) -> Result<(), CalibrationError> {
    expect_success(session.execute(&HidCommand::Home)?)
}

/// Measures pixel scales and the homed origin.
///
/// Sequence: home; moveto(100,100), frame F1; moveto(200,100), frame F2;
/// moveto(100,100), frame F3; moveto(100,200), frame F4. The cursor
/// displacement F1->F2 gives the x scale and F3->F4 the y scale. The origin
/// is the top-left of the cursor footprint in F1 (the arrow's hotspot)
/// minus `scale * 100`.
pub fn calibrate(
    session: &mut Session,
    source: &mut dyn FrameSource,
    options: CalibrationOptions,
) -> Result<Calibration, CalibrationError> {
    let mut grab_after = |session: &mut Session, x: u32, y: u32| -> Result<Frame, CalibrationError> {
        expect_success(session.execute(&HidCommand::MoveTo { x, y })?)?;
        if !options.settle.is_zero() {
            thread::sleep(options.settle);
        }
        let (frame, _) = crop_letterbox(&source.acquire()?)?;
        Ok(frame)
    };
    let (a, b) = (CALIBRATION_START, CALIBRATION_START + CALIBRATION_STEP);
    let step = CALIBRATION_STEP as f64;

    home(session)?;
    let f1 = grab_after(session, a, a)?;
    let f2 = grab_after(session, b, a)?;
    let horizontal = detect_cursor_motion(&f1, &f2, Axis::Horizontal, true)?;
    let sx = horizontal.displacement / step;
    let sy = if options.horizontal_only {
        sx
    } else {
        let f3 = grab_after(session, a, a)?;
        let f4 = grab_after(session, a, b)?;
        detect_cursor_motion(&f3, &f4, Axis::Vertical, true)?.displacement / step
    };
    if !(sx > 0.0 && sy > 0.0) {
        return Err(VisionError::CursorNotFound.into());
    }

    let hotspot = horizontal.before.bbox;
    let clamp = |v: f64, len: u32| v.clamp(0.0, len.saturating_sub(1) as f64);
    let origin = (
        clamp(hotspot.x as f64 - sx * a as f64, f1.width()),
        clamp(hotspot.y as f64 - sy * a as f64, f1.height()),
    );
    Ok(Calibration::new(sx, sy, origin))
}
