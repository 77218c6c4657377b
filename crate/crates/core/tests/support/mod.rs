//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use hidagent::calibration::CalibrationOptions;
use hidagent::capture::{crop_letterbox, Frame};
use hidagent::control::{Clock, Controller};
use hidagent::element::ElementKind;
use hidagent::geometry::Rect;
use hidagent::protocol::{HidCommand, Session, SessionConfig};
use hidagent::simulator::scene::{Screen, Widget};
use hidagent::simulator::{Scene, SimConfig, SimHandle, Simulator, SimulatorLink, SimulatorSource};
use rand::Rng;

pub fn handle(cfg: SimConfig) -> SimHandle {
    Simulator::new(cfg).expect("valid simulator config").into_handle()
}

/// Controller wired straight to the simulator, on a virtual clock.
pub fn controller(sim: &SimHandle) -> Controller {
    let session = Session::new(SimulatorLink::new(sim.clone()), SessionConfig::default()).unwrap();
    Controller::new(session, SimulatorSource::new(sim.clone())).with_clock(Clock::virtual_clock())
}

pub fn calibrated(cfg: SimConfig) -> (SimHandle, Controller) {
    let sim = handle(cfg);
    let mut ctl = controller(&sim);
    ctl.calibrate(CalibrationOptions::default()).expect("calibration succeeds");
    (sim, ctl)
}

pub fn max_channel_diff(a: [u8; 3], b: [u8; 3]) -> u8 {
    (0..3).map(|i| a[i].abs_diff(b[i])).max().unwrap()
}

/// Pixels whose largest channel difference exceeds `threshold`.
pub fn changed_pixels(a: &Frame, b: &Frame, threshold: u8) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for y in 0..a.height() {
        for x in 0..a.width() {
            if max_channel_diff(a.pixel(x, y), b.pixel(x, y)) > threshold {
                out.push((x, y));
            }
        }
    }
    out
}

pub fn bbox_of(points: &[(u32, u32)]) -> Option<Rect> {
    let x0 = points.iter().map(|p| p.0).min()?;
    let y0 = points.iter().map(|p| p.1).min()?;
    let x1 = points.iter().map(|p| p.0).max()?;
    let y1 = points.iter().map(|p| p.1).max()?;
    Some(Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

fn centroid(points: &[(u32, u32)]) -> (f64, f64) {
    let n = points.len().max(1) as f64;
    let sx: f64 = points.iter().map(|p| p.0 as f64).sum();
    let sy: f64 = points.iter().map(|p| p.1 as f64).sum();
    (sx / n, sy / n)
}

/// Scale estimate from whole-frame change centroids, with no blob pairing or
/// directional filtering. Moves the pointer to x = 100, 200, 300; each diff
/// mask is centered between two cursor positions, so consecutive mask
/// centroids are one step apart when only the cursor changes.
pub fn naive_centroid_scale(sim: &SimHandle) -> f64 {
    let mut link = sim.lock().unwrap();
    link.apply_command(&HidCommand::Home);
    let mut frames = Vec::new();
    for x in [100, 200, 300] {
        link.apply_command(&HidCommand::MoveTo { x, y: 100 });
        let (f, _) = crop_letterbox(&link.render_frame()).unwrap();
        frames.push(f);
    }
    let a = centroid(&changed_pixels(&frames[0], &frames[1], 16));
    let b = centroid(&changed_pixels(&frames[1], &frames[2], 16));
    (b.0 - a.0) / 100.0
}

pub fn random_color(rng: &mut impl Rng) -> [u8; 3] {
    let mut c = [rng.gen_range(40..=200), rng.gen_range(40..=200), rng.gen_range(40..=200)];
    let i = rng.gen_range(0..3);
    c[i] = rng.gen_range(100..=200);
    c
}

/// A one-screen scene of the given size with a few random widgets.
pub fn random_scene(rng: &mut impl Rng, width: u32, height: u32) -> Scene {
    let mut widgets = Vec::new();
    for i in 0..rng.gen_range(0..4) {
        let w = rng.gen_range(8..=width.clamp(8, 200));
        let h = rng.gen_range(8..=height.clamp(8, 120));
        if w > width || h > height {
            continue;
        }
        widgets.push(Widget {
            label: format!("w{i}"),
            kind: ElementKind::Button,
            rect: Rect::new(rng.gen_range(0..=width - w), rng.gen_range(0..=height - h), w, h),
            fill: random_color(rng),
            target: None,
        });
    }
    Scene {
        v: 1,
        width,
        height,
        home: "only".into(),
        screens: vec![Screen {
            name: "only".into(),
            background: random_color(rng),
            widgets,
        }],
        launcher: None,
        answers: BTreeMap::new(),
    }
}

/// Paints a solid rectangle.
pub fn fill_rect(frame: &mut Frame, r: Rect, rgb: [u8; 3]) {
    for y in r.y..r.bottom() {
        for x in r.x..r.right() {
            frame.set_pixel(x, y, rgb);
        }
    }
}

/// Deterministic noise frame.
pub fn noise_frame(rng: &mut impl Rng, w: u32, h: u32) -> Frame {
    let pixels = (0..w * h * 3).map(|_| rng.gen()).collect();
    Frame::new(w, h, pixels).unwrap()
}

/// Exact-match oracle: every placement where the patch equals the screen.
pub fn exact_placements(patch: &Frame, screen: &Frame) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for y in 0..=screen.height() - patch.height() {
        for x in 0..=screen.width() - patch.width() {
            let same = (0..patch.height()).all(|py| {
                let s = &screen.row(y + py)[x as usize * 3..(x + patch.width()) as usize * 3];
                s == patch.row(py)
            });
            if same {
                out.push((x, y));
            }
        }
    }
    out
}
