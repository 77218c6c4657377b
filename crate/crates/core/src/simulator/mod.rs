//! A virtual HID target: framebuffer, pointer kinematics, widget app.
//!
//! The simulator receives the same wire lines a real bridge would and turns
//! absolute `moveto`/`click` targets into relative pointer reports, exactly
//! as the device firmware does. The simulated OS applies a pixels-per-unit
//! scale, optional acceleration, and clips the pointer at the screen edges.
//! Rendering produces a letterboxed 1920x1080 capture.

mod render;
pub mod scene;
mod server;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::capture::{aspect_fit, CaptureError, ContentGeometry, Frame, FrameSource, CAPTURE_HEIGHT, CAPTURE_WIDTH};
use crate::geometry::Rect;
use crate::protocol::{
    decode_command, encode_response, Button, HidCommand, HidResponse, Key, ProtocolError, Special,
};

pub use render::{clock_region, texture_offset, CursorSprite, Texel, TEXTURE_AMPLITUDE};
pub use scene::{Scene, SceneError, BORDER_COLOR, BORDER_WIDTH};
pub use server::{serve_pty, serve_stream, spawn_duplex, SimulatorLink};

/// Largest relative report, per axis, the device emits for absolute moves.
pub const CHUNK_HID: i64 = 10;
/// Per-report magnitude of the homing sweep.
pub const HOME_STEP_HID: i64 = 1000;

/// Pointer acceleration applied by the simulated OS to each relative report.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Acceleration {
    #[default]
    None,
    /// Gain `1` up to `threshold` units, then `1 + alpha * (|d| - threshold)`.
    Gain { threshold: u32, alpha: f64 },
}

impl Acceleration {
    pub fn gain(&self, delta: i64) -> f64 {
        match *self {
            Acceleration::None => 1.0,
            Acceleration::Gain { threshold, alpha } => {
                let d = delta.unsigned_abs();
                if d <= threshold as u64 {
                    1.0
                } else {
                    1.0 + alpha * (d - threshold as u64) as f64
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scene: Scene,
    pub px_per_hid: f64,
    pub acceleration: Acceleration,
    /// `None` hides the pointer entirely.
    pub cursor: Option<CursorSprite>,
    pub clock_distractor: bool,
    /// Gap between executed commands.
    pub pacing: Duration,
    /// Sleep for `pacing` on the wall clock instead of advancing virtual time.
    pub wall_clock: bool,
    /// Initial pointer position in native pixels; screen center by default.
    pub start: Option<(u32, u32)>,
}

impl SimConfig {
    pub fn new(scene: Scene) -> Self {
        SimConfig {
            scene,
            px_per_hid: 1.0,
            acceleration: Acceleration::None,
            cursor: Some(CursorSprite::arrow()),
            clock_distractor: false,
            pacing: Duration::from_millis(100),
            wall_clock: false,
            start: None,
        }
    }

    pub fn native_width(&self) -> u32 {
        self.scene.width
    }

    pub fn native_height(&self) -> u32 {
        self.scene.height
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.scene.validate()?;
        if !(self.px_per_hid.is_finite() && self.px_per_hid > 0.0) {
            return Err(SceneError::Invalid("px_per_hid must be positive".into()));
        }
        if let Some(c) = &self.cursor {
            if c.width > self.scene.width || c.height > self.scene.height {
                return Err(SceneError::Invalid("cursor larger than screen".into()));
            }
        }
        if let Acceleration::Gain { alpha, .. } = self.acceleration {
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(SceneError::Invalid("acceleration alpha must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Input as observed by the target OS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimEvent {
    Click { x: u32, y: u32, button: Button },
    KeyDown(Key),
    KeyUp(Key),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// Sub-pixel pointer position kept by the simulated OS.
    pointer_f: (f64, f64),
    /// Device-tracked position, in HID units, since the last home.
    pub shadow_hid: (u32, u32),
    pub homed: bool,
    pub screen_id: usize,
    pub frame_counter: u64,
    /// Virtual time consumed by command pacing.
    pub clock: Duration,
    pub launcher_query: String,
    pub events: Vec<SimEvent>,
    /// Every command decoded from the wire, in arrival order.
    pub received: Vec<HidCommand>,
    /// Screen ids in the order they were shown, starting with the initial one.
    pub screen_history: Vec<usize>,
}

impl SimState {
    /// The pixel the pointer hotspot is on.
    pub fn pointer(&self) -> (u32, u32) {
        (
            self.pointer_f.0.round() as u32,
            self.pointer_f.1.round() as u32,
        )
    }

    pub fn pointer_subpixel(&self) -> (f64, f64) {
        self.pointer_f
    }
}

pub struct Simulator {
    config: SimConfig,
    state: SimState,
    screen_cache: HashMap<usize, Frame>,
    responsive: bool,
    running: bool,
}

/// Shared handle used by transports, frame sources and test inspection.
pub type SimHandle = Arc<Mutex<Simulator>>;

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self, SceneError> {
        config.validate()?;
        let state = Self::initial_state(&config);
        Ok(Simulator {
            config,
            state,
            screen_cache: HashMap::new(),
            responsive: true,
            running: true,
        })
    }

    pub fn into_handle(self) -> SimHandle {
        Arc::new(Mutex::new(self))
    }

    fn initial_state(config: &SimConfig) -> SimState {
        let (w, h) = (config.native_width(), config.native_height());
        let start = config.start.unwrap_or((w / 2, h / 2));
        let home = config.scene.home_index();
        SimState {
            pointer_f: (start.0.min(w - 1) as f64, start.1.min(h - 1) as f64),
            shadow_hid: (0, 0),
            homed: false,
            screen_id: home,
            frame_counter: 0,
            clock: Duration::ZERO,
            launcher_query: String::new(),
            events: Vec::new(),
            received: Vec::new(),
            screen_history: vec![home],
        }
    }

    /// Returns to the initial state; the configuration is kept.
    pub fn reset(&mut self) {
        self.state = Self::initial_state(&self.config);
        self.responsive = true;
        self.running = true;
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn pointer(&self) -> (u32, u32) {
        self.state.pointer()
    }

    pub fn screen_name(&self) -> &str {
        &self.config.scene.screens[self.state.screen_id].name
    }

    /// All text typed so far, concatenated.
    pub fn typed_text(&self) -> String {
        self.state
            .events
            .iter()
            .filter_map(|e| match e {
                SimEvent::Text(t) => Some(t.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Where the content sits inside the 1920x1080 capture.
    pub fn output_geometry(&self) -> ContentGeometry {
        aspect_fit(
            self.config.native_width(),
            self.config.native_height(),
            CAPTURE_WIDTH,
            CAPTURE_HEIGHT,
        )
    }

    /// The pointer hotspot in cropped-content coordinates.
    pub fn pointer_in_content(&self) -> (f64, f64) {
        let (x, y) = self.pointer();
        render::native_to_content(
            &self.output_geometry(),
            (self.config.native_width(), self.config.native_height()),
            (x as f64, y as f64),
        )
    }

    /// Teleports the pointer (native pixels) without touching device state.
    pub fn set_pointer(&mut self, x: u32, y: u32) {
        let (w, h) = (self.config.native_width(), self.config.native_height());
        self.state.pointer_f = (x.min(w - 1) as f64, y.min(h - 1) as f64);
    }

    /// When unresponsive the device swallows commands without replying.
    pub fn set_responsive(&mut self, responsive: bool) {
        self.responsive = responsive;
    }

    /// Simulates unplugging: transports close and capture fails.
    pub fn stop(&mut self) {
        self.running = false;
    }

    pub fn is_running(&self) -> bool {
        self.running
    }

    /// One raw relative report through the simulated OS: scale, acceleration,
    /// then clipping to the screen.
    pub fn inject_relative(&mut self, dx: i64, dy: i64) {
        let cfg = &self.config;
        let (w, h) = (cfg.native_width() as f64, cfg.native_height() as f64);
        let sx = dx as f64 * cfg.px_per_hid * cfg.acceleration.gain(dx);
        let sy = dy as f64 * cfg.px_per_hid * cfg.acceleration.gain(dy);
        let (x, y) = self.state.pointer_f;
        self.state.pointer_f = ((x + sx).clamp(0.0, w - 1.0), (y + sy).clamp(0.0, h - 1.0));
    }

    fn home(&mut self) {
        let (w, h) = (
            self.config.native_width() as f64,
            self.config.native_height() as f64,
        );
        let diag_hid = (w * w + h * h).sqrt() / self.config.px_per_hid;
        let sweeps = (diag_hid / HOME_STEP_HID as f64).ceil() as u64 + 2;
        for _ in 0..sweeps {
            self.inject_relative(-HOME_STEP_HID, -HOME_STEP_HID);
        }
        self.state.shadow_hid = (0, 0);
        self.state.homed = true;
    }

    /// Walks from the shadow position to `(x, y)` in reports of at most
    /// [`CHUNK_HID`] units per axis, with no delay between reports.
    fn move_to(&mut self, x: u32, y: u32) {
        let (sx, sy) = self.state.shadow_hid;
        let dx = x as i64 - sx as i64;
        let dy = y as i64 - sy as i64;
        let steps = (dx.abs().max(dy.abs()) + CHUNK_HID - 1) / CHUNK_HID;
        let (mut px, mut py) = (0i64, 0i64);
        for i in 1..=steps {
            // round-half-up of d * i / steps
            let cx = (2 * dx * i + steps).div_euclid(2 * steps);
            let cy = (2 * dy * i + steps).div_euclid(2 * steps);
            self.inject_relative(cx - px, cy - py);
            px = cx;
            py = cy;
        }
        self.state.shadow_hid = (x, y);
    }

    fn show(&mut self, screen: usize) {
        self.state.screen_id = screen;
        self.state.screen_history.push(screen);
    }

    fn click(&mut self, button: Button) {
        let (x, y) = self.pointer();
        self.state.events.push(SimEvent::Click { x, y, button });
        if button != Button::Left {
            return;
        }
        let screen = &self.config.scene.screens[self.state.screen_id];
        let target = screen
            .widgets
            .iter()
            .find(|w| w.rect.contains(x, y))
            .and_then(|w| w.target.as_deref())
            .and_then(|t| self.config.scene.screen_index(t));
        if let Some(t) = target {
            self.show(t);
        }
    }

    fn launcher_screen(&self) -> Option<usize> {
        self.config
            .scene
            .launcher
            .as_ref()
            .and_then(|l| self.config.scene.screen_index(&l.screen))
    }

    fn chord(&mut self, keys: &[Key]) {
        for k in keys {
            self.state.events.push(SimEvent::KeyDown(*k));
        }
        for k in keys.iter().rev() {
            self.state.events.push(SimEvent::KeyUp(*k));
        }
        let on_launcher = self.launcher_screen() == Some(self.state.screen_id);
        match keys {
            [Key::Cmd, Key::Space] | [Key::Space, Key::Cmd] => {
                if let Some(l) = self.launcher_screen() {
                    self.state.launcher_query.clear();
                    self.show(l);
                }
            }
            [Key::Enter] if on_launcher => {
                let query = self.state.launcher_query.trim().to_lowercase();
                let target = self
                    .config
                    .scene
                    .launcher
                    .as_ref()
                    .and_then(|l| l.apps.get(&query))
                    .and_then(|s| self.config.scene.screen_index(s));
                if let Some(t) = target {
                    self.show(t);
                }
                self.state.launcher_query.clear();
            }
            [Key::Backspace] if on_launcher => {
                self.state.launcher_query.pop();
            }
            [Key::Esc] if on_launcher => {
                let home = self.config.scene.home_index();
                self.show(home);
            }
            _ => {}
        }
    }

    /// Executes one command against the simulated target.
    pub fn apply_command(&mut self, cmd: &HidCommand) -> HidResponse {
        self.state.received.push(cmd.clone());
        match cmd {
            HidCommand::Home => self.home(),
            HidCommand::MoveTo { x, y } => self.move_to(*x, *y),
            HidCommand::Click { x, y, button } => {
                self.move_to(*x, *y);
                self.click(*button);
            }
            HidCommand::Type { text } => {
                if !text.is_empty() {
                    self.state.events.push(SimEvent::Text(text.clone()));
                    if self.launcher_screen() == Some(self.state.screen_id) {
                        self.state.launcher_query.push_str(text);
                    }
                }
            }
            HidCommand::Key { keys } => self.chord(keys),
            HidCommand::Special { name } => {
                let keys = name.chord();
                self.chord(&keys);
                debug_assert!(matches!(name, Special::Run | Special::ScreenshotHost));
            }
        }
        self.state.clock += self.config.pacing;
        HidResponse::Success
    }

    /// Device-side line handling: decode, execute, encode the reply.
    /// Returns `None` when the device is configured not to answer.
    pub fn handle_line(&mut self, line: &[u8]) -> Option<Vec<u8>> {
        if !self.responsive {
            return None;
        }
        let response = match decode_command(line) {
            Ok(cmd) => self.apply_command(&cmd),
            Err(ProtocolError::UnknownKey { .. }) => HidResponse::Error("unknown key".into()),
            Err(e) => HidResponse::Error(e.to_string()),
        };
        Some(encode_response(&response))
    }

    fn screen_raster(&mut self, id: usize) -> Frame {
        let scene = &self.config.scene;
        self.screen_cache
            .entry(id)
            .or_insert_with(|| render::render_screen(scene, &scene.screens[id]))
            .clone()
    }

    /// Native-resolution frame for a given distractor tick, without side effects.
    pub fn render_native(&mut self, tick: u64) -> Frame {
        let mut frame = self.screen_raster(self.state.screen_id);
        if self.config.clock_distractor {
            let region = clock_region(self.config.native_width(), self.config.native_height());
            render::draw_clock(&mut frame, region, tick);
        }
        if let Some(sprite) = &self.config.cursor {
            render::draw_cursor(&mut frame, sprite, self.pointer());
        }
        frame
    }

    /// Renders the current state into a letterboxed 1920x1080 capture and
    /// advances the frame counter.
    pub fn render_frame(&mut self) -> Frame {
        let tick = self.state.frame_counter;
        let native = self.render_native(tick);
        self.state.frame_counter += 1;
        let (out, _) = render::letterbox(&native);
        out.with_timestamp(self.state.clock + Duration::from_millis(tick))
    }

    /// The clock distractor's area in raw-capture coordinates.
    pub fn clock_region_in_capture(&self) -> Rect {
        let (w, h) = (self.config.native_width(), self.config.native_height());
        let r = clock_region(w, h);
        let g = self.output_geometry();
        let map = |v: u32, n: u32, c: u32| (v as u64 * c as u64 / n as u64) as u32;
        let x0 = map(r.x, w, g.content_width);
        let y0 = map(r.y, h, g.content_height);
        let x1 = (map(r.right(), w, g.content_width) + 1).min(g.content_width);
        let y1 = (map(r.bottom(), h, g.content_height) + 1).min(g.content_height);
        Rect::new(g.offset_x + x0, g.offset_y + y0, x1 - x0, y1 - y0)
    }
}

/// Frame source backed by a running simulator.
pub struct SimulatorSource {
    sim: SimHandle,
}

impl SimulatorSource {
    pub fn new(sim: SimHandle) -> Self {
        SimulatorSource { sim }
    }
}

impl FrameSource for SimulatorSource {
    fn acquire(&mut self) -> Result<Frame, CaptureError> {
        let mut sim = self.sim.lock().unwrap();
        if !sim.is_running() {
            return Err(CaptureError::SourceUnavailable("simulator stopped".into()));
        }
        Ok(sim.render_frame())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(configure: impl FnOnce(&mut SimConfig)) -> Simulator {
        let mut cfg = SimConfig::new(Scene::with_launcher(1920, 1080));
        configure(&mut cfg);
        Simulator::new(cfg).unwrap()
    }

    #[test]
    fn home_clips_to_origin() {
        let mut s = sim(|c| c.start = Some((977, 501)));
        assert_eq!(s.apply_command(&HidCommand::Home), HidResponse::Success);
        assert_eq!(s.pointer(), (0, 0));
        assert_eq!(s.state().shadow_hid, (0, 0));
        s.apply_command(&HidCommand::Home);
        assert_eq!(s.pointer(), (0, 0));
    }

    #[test]
    fn unit_scale_moveto() {
        let mut s = sim(|_| {});
        s.apply_command(&HidCommand::Home);
        s.apply_command(&HidCommand::MoveTo { x: 100, y: 100 });
        assert_eq!(s.pointer(), (100, 100));
    }

    #[test]
    fn chunking_defeats_acceleration() {
        let accel = Acceleration::Gain {
            threshold: 10,
            alpha: 0.05,
        };
        let mut s = sim(|c| c.acceleration = accel);
        s.apply_command(&HidCommand::Home);
        s.apply_command(&HidCommand::MoveTo { x: 500, y: 0 });
        assert_eq!(s.state().pointer_subpixel(), (500.0, 0.0));

        // one raw report of +500 is amplified by 1 + 0.05 * 490
        let expected = 500.0 * (1.0 + 0.05 * 490.0);
        assert_eq!(accel.gain(500), 1.0 + 0.05 * 490.0);
        let mut raw = sim(|c| {
            c.acceleration = accel;
            c.scene = Scene::three_screen(20_000, 100);
        });
        raw.apply_command(&HidCommand::Home);
        raw.inject_relative(500, 0);
        assert_eq!(raw.state().pointer_subpixel().0, expected);
        assert_ne!(expected, 500.0);
    }

    #[test]
    fn click_before_home_is_accepted() {
        let mut s = sim(|_| {});
        assert!(s.apply_command(&HidCommand::click(5, 5)).is_success());
        assert!(!s.state().homed);
    }

    #[test]
    fn reset_keeps_config() {
        let mut s = sim(|c| c.px_per_hid = 2.0);
        s.apply_command(&HidCommand::Home);
        s.reset();
        assert_eq!(s.config().px_per_hid, 2.0);
        assert_eq!(s.pointer(), (960, 540));
        assert_eq!(s.screen_name(), "home");
    }

    #[test]
    fn button_fsm() {
        let mut s = sim(|_| {});
        s.apply_command(&HidCommand::Home);
        let notes = s.config().scene.screens[0].widgets[0].rect;
        // off-button click does nothing
        s.apply_command(&HidCommand::click(10, 10));
        assert_eq!(s.screen_name(), "home");
        let (cx, cy) = notes.center();
        s.apply_command(&HidCommand::Click {
            x: cx,
            y: cy,
            button: Button::Right,
        });
        assert_eq!(s.screen_name(), "home");
        s.apply_command(&HidCommand::click(cx, cy));
        assert_eq!(s.screen_name(), "notes");
    }

    #[test]
    fn launcher_flow() {
        let mut s = sim(|_| {});
        s.apply_command(&HidCommand::Special { name: Special::Run });
        assert_eq!(s.screen_name(), "launcher");
        s.apply_command(&HidCommand::type_text("Notes").unwrap());
        s.apply_command(&HidCommand::key(vec![Key::Enter]).unwrap());
        assert_eq!(s.screen_name(), "notes");
        assert_eq!(
            &s.state().events[..4],
            &[
                SimEvent::KeyDown(Key::Cmd),
                SimEvent::KeyDown(Key::Space),
                SimEvent::KeyUp(Key::Space),
                SimEvent::KeyUp(Key::Cmd)
            ]
        );
    }

    #[test]
    fn bad_lines_get_error_replies() {
        let mut s = sim(|_| {});
        let reply = s
            .handle_line(b"{\"type\": \"key\", \"keys\": [\"bogus\"]}\n")
            .unwrap();
        assert_eq!(reply, b"{\"result\": \"error\", \"message\": \"unknown key\"}\n");
        let reply = s.handle_line(b"garbage\n").unwrap();
        assert!(reply.starts_with(b"{\"result\": \"error\""));
        s.set_responsive(false);
        assert!(s.handle_line(b"{\"type\": \"home\"}\n").is_none());
    }

    #[test]
    fn pacing_is_virtual() {
        let mut s = sim(|c| c.pacing = Duration::from_millis(100));
        for _ in 0..3 {
            s.apply_command(&HidCommand::Home);
        }
        assert_eq!(s.state().clock, Duration::from_millis(300));
    }
}
