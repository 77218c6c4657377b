//! The operator-facing facade: screenshots, pixel-space mouse and keyboard
//! operations, recognition and query clients, the crawler and the observer.
//!
//! All mouse operations take content-space pixels ([`ContentPoint`]); HID
//! units never cross this API.

mod clients;
mod crawl;
mod queue;

use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use thiserror::Error;

use crate::calibration::{self, Calibration, CalibrationError, CalibrationOptions};
use crate::capture::{crop_letterbox, CaptureError, ContentGeometry, Frame, FrameSource};
use crate::gateway::{LogEntry, LogError, VisualLog};
use crate::geometry::ContentPoint;
use crate::protocol::{Button, HidCommand, HidResponse, Key, ProtocolError, Session, SessionError};
use crate::vision::VisionError;

pub use clients::{
    llm_screenshot_query, parse_elements, recognize_gui_elements, HttpQueryClient, HttpRecognizer, QueryAnswer,
    QueryClient, Recognizer, StubQueryClient, StubRecognizer,
};
pub use crawl::{crawl, CrawlConfig, CrawlManifest, Sampling, ScreenRecord, SIGNATURE_HEIGHT, SIGNATURE_WIDTH};
pub use queue::CommandQueue;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("calibration is missing or invalid")]
    InvalidCalibration,
    #[error("out of range: {0}")]
    RangeError(String),
    #[error("device reported an error: {0}")]
    DeviceError(String),
    #[error(transparent)]
    Session(SessionError),
    #[error(transparent)]
    Protocol(ProtocolError),
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error("calibration failed: {0}")]
    CalibrationFailed(VisionError),
    #[error("service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ControlError {
    /// Stable machine-readable name of the error.
    pub fn kind(&self) -> &'static str {
        match self {
            ControlError::InvalidCalibration => "InvalidCalibration",
            ControlError::RangeError(_) => "RangeError",
            ControlError::DeviceError(_) => "DeviceError",
            ControlError::Session(e) => match e {
                SessionError::Timeout(_) => "Timeout",
                SessionError::ChannelClosed => "ChannelClosed",
                SessionError::MalformedResponse(_) => "MalformedResponse",
                SessionError::InvalidConfig(_) => "InvalidConfig",
                SessionError::Protocol(_) | SessionError::Io(_) => "IoError",
            },
            ControlError::Protocol(e) => match e {
                ProtocolError::MalformedLine { .. } => "MalformedLine",
                ProtocolError::UnknownCommandType { .. } => "UnknownCommandType",
                ProtocolError::InvalidField { .. } => "InvalidField",
                ProtocolError::UnknownKey { .. } => "UnknownKey",
                ProtocolError::LineTooLong { .. } => "LineTooLong",
            },
            ControlError::Capture(e) => match e {
                CaptureError::SourceUnavailable(_) => "SourceUnavailable",
                CaptureError::DecodeFailure(_) => "DecodeFailure",
                CaptureError::AllBlackFrame => "AllBlackFrame",
                CaptureError::NoDeviceFound => "NoDeviceFound",
                CaptureError::InvalidFrame(_) => "InvalidFrame",
                CaptureError::Io(_) => "IoError",
            },
            ControlError::CalibrationFailed(_) => "CalibrationFailed",
            ControlError::ServiceUnavailable(_) => "ServiceUnavailable",
            ControlError::SchemaViolation(_) => "SchemaViolation",
            ControlError::Log(LogError::StorageFull) => "StorageFull",
            ControlError::Log(_) => "LogError",
            ControlError::Io(_) => "IoError",
        }
    }
}

impl From<SessionError> for ControlError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Protocol(p) => ControlError::Protocol(p),
            other => ControlError::Session(other),
        }
    }
}

impl From<ProtocolError> for ControlError {
    fn from(e: ProtocolError) -> Self {
        ControlError::Protocol(e)
    }
}

impl From<CalibrationError> for ControlError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::InvalidCalibration => ControlError::InvalidCalibration,
            CalibrationError::CalibrationFailed(v) => ControlError::CalibrationFailed(v),
            CalibrationError::DeviceError(m) => ControlError::DeviceError(m),
            CalibrationError::Session(s) => s.into(),
            CalibrationError::Capture(c) => ControlError::Capture(c),
            CalibrationError::Io(e) => ControlError::Io(e),
            CalibrationError::Parse(e) => ControlError::SchemaViolation(e.to_string()),
        }
    }
}

/// How waits (settling after a click, between launcher steps) pass.
#[derive(Debug, Clone)]
pub enum Clock {
    Wall,
    /// Waits only advance a counter; used with the simulator.
    Virtual(Arc<Mutex<Duration>>),
}

impl Clock {
    pub fn virtual_clock() -> Clock {
        Clock::Virtual(Arc::new(Mutex::new(Duration::ZERO)))
    }

    pub fn sleep(&self, d: Duration) {
        match self {
            Clock::Wall => thread::sleep(d),
            Clock::Virtual(t) => *t.lock().unwrap() += d,
        }
    }

    /// Total virtual time waited, `None` for the wall clock.
    pub fn elapsed(&self) -> Option<Duration> {
        match self {
            Clock::Wall => None,
            Clock::Virtual(t) => Some(*t.lock().unwrap()),
        }
    }
}

/// Owns one protocol session, one capture source and the calibration
/// relating them.
pub struct Controller {
    session: Session,
    capture: Box<dyn FrameSource>,
    calibration: Option<Calibration>,
    geometry: Option<ContentGeometry>,
    last_frame: Option<Frame>,
    homed: bool,
    connected: bool,
    log: Option<Arc<VisualLog>>,
    last_log_seq: Option<u64>,
    clock: Clock,
}

impl std::fmt::Debug for Controller {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Controller")
            .field("calibration", &self.calibration)
            .field("geometry", &self.geometry)
            .field("homed", &self.homed)
            .field("connected", &self.connected)
            .finish_non_exhaustive()
    }
}

impl Controller {
    pub fn new(session: Session, capture: impl FrameSource + 'static) -> Self {
        Controller {
            session,
            capture: Box::new(capture),
            calibration: None,
            geometry: None,
            last_frame: None,
            homed: false,
            connected: true,
            log: None,
            last_log_seq: None,
            clock: Clock::Wall,
        }
    }

    pub fn with_calibration(mut self, cal: Calibration) -> Self {
        self.calibration = Some(cal);
        self
    }

    pub fn with_log(mut self, log: Arc<VisualLog>) -> Self {
        self.log = Some(log);
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn calibration(&self) -> Option<&Calibration> {
        self.calibration.as_ref()
    }

    pub fn set_calibration(&mut self, cal: Option<Calibration>) {
        self.calibration = cal;
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibration.as_ref().is_some_and(Calibration::is_usable)
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn content_geometry(&self) -> Option<ContentGeometry> {
        self.geometry
    }

    pub fn log(&self) -> Option<&Arc<VisualLog>> {
        self.log.as_ref()
    }

    /// Sequence number of the most recent log entry this controller wrote.
    pub fn last_log_seq(&self) -> Option<u64> {
        self.last_log_seq
    }

    /// Most recent content frame, if any was captured.
    pub fn last_frame(&self) -> Option<&Frame> {
        self.last_frame.as_ref()
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    /// Captures one frame and strips the letterbox.
    pub fn get_screenshot(&mut self) -> Result<Frame, ControlError> {
        let raw = self.capture.acquire()?;
        let (frame, geometry) = crop_letterbox(&raw)?;
        self.geometry = Some(geometry);
        self.last_frame = Some(frame.clone());
        Ok(frame)
    }

    /// Runs the two-point calibration and keeps the result.
    ///
    /// On failure any previous calibration is marked invalid.
    pub fn calibrate(&mut self, mut options: CalibrationOptions) -> Result<Calibration, ControlError> {
        if let Clock::Virtual(_) = self.clock {
            self.clock.sleep(options.settle * 4);
            options.settle = Duration::ZERO;
        }
        let result = calibration::calibrate(&mut self.session, &mut self.capture, options);
        match result {
            Ok(cal) => {
                self.homed = true;
                self.calibration = Some(cal.clone());
                let note = format!(
                    "calibrated: px_per_hid=({:.4}, {:.4}) origin=({:.1}, {:.1})",
                    cal.px_per_hid_x, cal.px_per_hid_y, cal.origin_px.0, cal.origin_px.1
                );
                self.log_current(None, None, Some(&note))?;
                Ok(cal)
            }
            Err(e) => {
                if let Some(c) = &mut self.calibration {
                    c.invalidate();
                }
                let e = ControlError::from(e);
                self.note_failure(&e);
                Err(e)
            }
        }
    }

    fn note_failure(&mut self, e: &ControlError) {
        if matches!(e, ControlError::Session(SessionError::ChannelClosed)) {
            self.connected = false;
        }
    }

    fn content_bounds(&mut self) -> Result<ContentGeometry, ControlError> {
        match self.geometry {
            Some(g) => Ok(g),
            None => {
                self.get_screenshot()?;
                Ok(self.geometry.expect("set by get_screenshot"))
            }
        }
    }

    fn target(&mut self, p: ContentPoint) -> Result<HidCommand, ControlError> {
        let cal = match &self.calibration {
            Some(c) if c.is_usable() => c.clone(),
            _ => return Err(ControlError::InvalidCalibration),
        };
        let bounds = self.content_bounds()?;
        if !bounds.contains(p) {
            return Err(ControlError::RangeError(format!(
                "({}, {}) is outside the {}x{} content area",
                p.x, p.y, bounds.content_width, bounds.content_height
            )));
        }
        let h = cal.pixel_to_hid(p)?;
        Ok(HidCommand::MoveTo { x: h.x, y: h.y })
    }

    fn ensure_homed(&mut self) -> Result<(), ControlError> {
        if !self.homed {
            self.send(&HidCommand::Home)?;
            self.homed = true;
        }
        Ok(())
    }

    fn send(&mut self, cmd: &HidCommand) -> Result<(), ControlError> {
        let result = self.session.execute(cmd).map_err(ControlError::from);
        match result {
            Ok(HidResponse::Success) => Ok(()),
            Ok(HidResponse::Error(m)) => Err(ControlError::DeviceError(m)),
            Err(e) => {
                self.note_failure(&e);
                Err(e)
            }
        }
    }

    /// Appends the newest frame to the log, grabbing one if needed.
    fn log_current(
        &mut self,
        action: Option<&HidCommand>,
        overlay: Option<ContentPoint>,
        note: Option<&str>,
    ) -> Result<Option<LogEntry>, ControlError> {
        let Some(log) = self.log.clone() else {
            return Ok(None);
        };
        let frame = match self.get_screenshot() {
            Ok(f) => f,
            Err(_) => match &self.last_frame {
                Some(f) => f.clone(),
                None => return Ok(None),
            },
        };
        let entry = log.append(&frame, action, overlay, note)?;
        self.last_log_seq = Some(entry.seq);
        Ok(Some(entry))
    }

    /// Logs the screen as the action saw it, then sends the action.
    fn act(&mut self, cmd: HidCommand, overlay: Option<ContentPoint>) -> Result<(), ControlError> {
        self.log_current(Some(&cmd), overlay, None)?;
        self.send(&cmd)
    }

    pub fn move_mouse(&mut self, p: ContentPoint) -> Result<(), ControlError> {
        let cmd = self.target(p)?;
        self.ensure_homed()?;
        self.act(cmd, Some(p))
    }

    pub fn click_mouse(&mut self, p: ContentPoint, button: Button) -> Result<(), ControlError> {
        let HidCommand::MoveTo { x, y } = self.target(p)? else {
            unreachable!("target() builds a moveto")
        };
        self.ensure_homed()?;
        self.act(HidCommand::Click { x, y, button }, Some(p))
    }

    /// Types `text`; an empty string sends nothing.
    pub fn type_text(&mut self, text: &str) -> Result<(), ControlError> {
        if text.is_empty() {
            return Ok(());
        }
        let cmd = HidCommand::type_text(text)?;
        self.act(cmd, None)
    }

    /// Presses all keys down in order and releases them in reverse.
    pub fn keypress(&mut self, keys: &[Key]) -> Result<(), ControlError> {
        let cmd = HidCommand::key(keys.to_vec())?;
        self.act(cmd, None)
    }

    /// Like [`Controller::keypress`] with key names, e.g. `["cmd", "space"]`.
    pub fn keypress_names<S: AsRef<str>>(&mut self, names: &[S]) -> Result<(), ControlError> {
        let keys = names
            .iter()
            .map(|n| n.as_ref().parse::<Key>())
            .collect::<Result<Vec<_>, _>>()?;
        self.keypress(&keys)
    }

    /// Opens an application through the system launcher: cmd+space, the
    /// name, enter.
    pub fn run_application(&mut self, name: &str) -> Result<(), ControlError> {
        if name.trim().is_empty() {
            return Err(ControlError::RangeError("application name is empty".into()));
        }
        let pause = self.session.config().inter_command_pacing;
        self.keypress(&[Key::Cmd, Key::Space])?;
        self.clock.sleep(pause);
        self.type_text(name)?;
        self.clock.sleep(pause);
        self.keypress(&[Key::Enter])
    }

    pub fn sleep(&self, d: Duration) {
        self.clock.sleep(d);
    }

    /// Screenshot, recognize, ask. The frame, query and answer (or error)
    /// are logged either way.
    pub fn observe_and_answer(
        &mut self,
        recognizer: &dyn Recognizer,
        client: &dyn QueryClient,
        query: &str,
    ) -> Result<QueryAnswer, ControlError> {
        if query.trim().is_empty() {
            return Err(ControlError::RangeError("query is empty".into()));
        }
        let frame = self.get_screenshot()?;
        let result = recognizer
            .recognize(&frame)
            .and_then(|elements| llm_screenshot_query(client, &frame, &elements, query));
        if let Some(log) = self.log.clone() {
            let note = match &result {
                Ok(a) => serde_json::json!({ "query": query, "answer": a }),
                Err(e) => serde_json::json!({ "query": query, "error": e.kind(), "message": e.to_string() }),
            };
            let entry = log.append(&frame, None, None, Some(&note.to_string()))?;
            self.last_log_seq = Some(entry.seq);
        }
        result
    }
}
