//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs entirely against the simulator.

mod support;

use std::net::{IpAddr, Ipv4Addr};
use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use hidagent::capture::{crop_letterbox, Frame, CAPTURE_HEIGHT, CAPTURE_WIDTH};
use hidagent::control::{crawl, CommandQueue, CrawlConfig, StubRecognizer};
use hidagent::gateway::{self, GatewayConfig, GatewayState, VisualLog};
use hidagent::geometry::{ContentPoint, Rect};
use hidagent::protocol::{decode_command, encode_command, Button, HidCommand, Key, Special};
use hidagent::simulator::{Acceleration, CursorSprite, Scene, SimConfig, Simulator};
use hidagent::vision::{gui_diff, patch_location};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

const NAMED: &[Key] = &[
    Key::Ctrl,
    Key::Alt,
    Key::Cmd,
    Key::Shift,
    Key::Space,
    Key::Enter,
    Key::Esc,
    Key::Tab,
    Key::Backspace,
    Key::Delete,
    Key::Up,
    Key::Down,
    Key::Left,
    Key::Right,
];

fn random_key(rng: &mut ChaCha8Rng) -> Key {
    match rng.gen_range(0..3) {
        0 => *NAMED.choose(rng).unwrap(),
        1 => Key::F(rng.gen_range(1..=12)),
        _ => Key::Char(rng.gen_range(b' '..=b'~') as char),
    }
}

fn random_command(rng: &mut ChaCha8Rng) -> HidCommand {
    match rng.gen_range(0..6) {
        0 => HidCommand::Home,
        1 => HidCommand::MoveTo {
            x: rng.gen(),
            y: rng.gen(),
        },
        2 => HidCommand::Click {
            x: rng.gen(),
            y: rng.gen(),
            button: if rng.gen() { Button::Left } else { Button::Right },
        },
        3 => {
            let len = rng.gen_range(0..40);
            let text: String = (0..len)
                .map(|_| match rng.gen_range(0..20) {
                    0 => '\n',
                    1 => '\t',
                    2 => '"',
                    3 => '\\',
                    _ => rng.gen_range(b' '..=b'~') as char,
                })
                .collect();
            HidCommand::type_text(text).unwrap()
        }
        4 => {
            let n = rng.gen_range(1..5);
            HidCommand::key((0..n).map(|_| random_key(rng)).collect()).unwrap()
        }
        _ => HidCommand::Special {
            name: if rng.gen() { Special::Run } else { Special::ScreenshotHost },
        },
    }
}

fn protocol_golden() -> Outcome {
    let started = Instant::now();
    let line = encode_command(&HidCommand::click(121, 2145));
    check!(
        line == b"{\"type\": \"click\", \"x\": 121, \"y\": 2145}\n",
        "golden mismatch: {:?}",
        String::from_utf8_lossy(&line)
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 10_000;
    for i in 0..n {
        let cmd = random_command(&mut rng);
        let wire = encode_command(&cmd);
        check!(wire.ends_with(b"\n") && wire.iter().filter(|b| **b == b'\n').count() == 1, "command {i} is not one line");
        let back = decode_command(&wire[..wire.len() - 1]).map_err(|e| format!("command {i}: {e}"))?;
        check!(back == cmd, "command {i} round-tripped to {back:?}, expected {cmd:?}");
    }
    let elapsed = started.elapsed();
    check!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("golden ok, {n} round trips in {elapsed:.2?}"))
}

fn homing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..50 {
        let (w, h) = (rng.gen_range(16..=4096), rng.gen_range(16..=4096));
        let mut cfg = SimConfig::new(support::random_scene(&mut rng, w, h));
        cfg.cursor = None;
        cfg.px_per_hid = rng.gen_range(0.25..4.0);
        if rng.gen() {
            cfg.acceleration = Acceleration::Gain {
                threshold: rng.gen_range(1..20),
                alpha: rng.gen_range(0.0..0.2),
            };
        }
        let px = cfg.px_per_hid;
        let mut sim = Simulator::new(cfg).map_err(|e| e.to_string())?;
        sim.set_pointer(rng.gen_range(0..w), rng.gen_range(0..h));
        for _ in 0..rng.gen_range(0..5) {
            sim.inject_relative(rng.gen_range(-500..500), rng.gen_range(-500..500));
        }
        check!(sim.apply_command(&HidCommand::Home).is_success(), "state {i}: home refused");
        check!(
            sim.state().pointer_subpixel() == (0.0, 0.0),
            "state {i} ({w}x{h}, px_per_hid {px:.3}): pointer at {:?}",
            sim.state().pointer_subpixel()
        );
    }
    Ok("50/50 random states reached (0,0)".into())
}

fn calibration_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut naive_worst: f64 = 0.0;
    for px in [0.5, 1.0, 1.5, 2.37] {
        let mut cfg = SimConfig::new(Scene::three_screen(1920, 1080));
        cfg.px_per_hid = px;
        cfg.clock_distractor = true;
        cfg.cursor = Some(CursorSprite::faint());
        let (_, ctl) = support::calibrated(cfg.clone());
        let cal = ctl.calibration().unwrap();
        for got in [cal.px_per_hid_x, cal.px_per_hid_y] {
            let err = (got - px).abs() / px;
            worst = worst.max(err);
            check!(err <= 0.02, "px_per_hid {px}: recovered {got:.4} ({:.2}% error)", err * 100.0);
        }
        let naive = support::naive_centroid_scale(&support::handle(cfg));
        naive_worst = naive_worst.max((naive - px).abs() / px);
    }
    check!(
        naive_worst > 0.05,
        "naive baseline stayed within 5% ({:.2}%)",
        naive_worst * 100.0
    );
    Ok(format!(
        "max error {:.3}%, naive baseline max error {:.1}%",
        worst * 100.0,
        naive_worst * 100.0
    ))
}

fn motion_accuracy() -> Outcome {
    let gain = Acceleration::Gain {
        threshold: 10,
        alpha: 0.05,
    };
    let mut cfg = SimConfig::new(Scene::three_screen(1920, 1080));
    cfg.acceleration = gain;
    let (sim, mut ctl) = support::calibrated(cfg.clone());
    let cal = ctl.calibration().unwrap().clone();

    let mut baseline = Simulator::new(cfg).map_err(|e| e.to_string())?;
    baseline.apply_command(&HidCommand::Home);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let (mut far, mut far_missed) = (0, 0);
    for i in 0..100 {
        let p = ContentPoint::new(rng.gen_range(0..1920), rng.gen_range(0..1080));
        ctl.move_mouse(p).map_err(|e| format!("target {i}: {e}"))?;
        let (x, y) = sim.lock().unwrap().pointer_in_content();
        let miss = (x - p.x as f64).abs().max((y - p.y as f64).abs());
        worst = worst.max(miss);
        check!(miss <= 2.0, "target {i} {p:?}: landed at ({x}, {y})");

        // same target as one unchunked relative report from where the pointer is
        let (bx, by) = baseline.state().pointer_subpixel();
        let dx = ((p.x as f64 - bx) / cal.px_per_hid_x).round() as i64;
        let dy = ((p.y as f64 - by) / cal.px_per_hid_y).round() as i64;
        let dist = ((p.x as f64 - bx).powi(2) + (p.y as f64 - by).powi(2)).sqrt();
        baseline.inject_relative(dx, dy);
        let (ax, ay) = baseline.state().pointer_subpixel();
        let bmiss = ((ax - p.x as f64).powi(2) + (ay - p.y as f64).powi(2)).sqrt();
        if dist > 200.0 {
            far += 1;
            if bmiss > 10.0 {
                far_missed += 1;
            }
        }
        // next baseline trial starts from the true target, like the chunked path
        baseline.set_pointer(p.x, p.y);
    }
    check!(far > 0, "no targets farther than 200 px");
    let rate = far_missed as f64 / far as f64;
    check!(rate >= 0.9, "unchunked baseline missed only {far_missed}/{far} far targets");
    Ok(format!(
        "worst miss {worst:.2} px; unchunked baseline missed {far_missed}/{far} far targets by > 10 px"
    ))
}

/// Aspect fit in exact integer arithmetic (round half up).
fn fit_oracle(sw: u32, sh: u32) -> (u32, u32, u32, u32) {
    let (sw, sh, ow, oh) = (sw as u64, sh as u64, CAPTURE_WIDTH as u64, CAPTURE_HEIGHT as u64);
    let (w, h) = if sw * oh >= sh * ow {
        (ow, ((2 * sh * ow + sw) / (2 * sw)).clamp(1, oh))
    } else {
        (((2 * sw * oh + sh) / (2 * sh)).clamp(1, ow), oh)
    };
    (((ow - w) / 2) as u32, ((oh - h) / 2) as u32, w as u32, h as u32)
}

fn letterbox() -> Outcome {
    let mut portrait = Simulator::new(SimConfig::new(Scene::three_screen(1080, 2340))).map_err(|e| e.to_string())?;
    let (_, g) = crop_letterbox(&portrait.render_frame()).map_err(|e| e.to_string())?;
    let found = (g.offset_x, g.offset_y, g.content_width, g.content_height);
    check!(found == fit_oracle(1080, 2340), "portrait crop {found:?} vs {:?}", fit_oracle(1080, 2340));
    check!(found == (711, 0, 498, 1080), "portrait crop {found:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..100 {
        let (w, h) = (rng.gen_range(64..=3000), rng.gen_range(64..=3000));
        let mut sim = Simulator::new(SimConfig::new(support::random_scene(&mut rng, w, h))).map_err(|e| e.to_string())?;
        let (once, g) = crop_letterbox(&sim.render_frame()).map_err(|e| format!("scene {i}: {e}"))?;
        let found = (g.offset_x, g.offset_y, g.content_width, g.content_height);
        check!(found == fit_oracle(w, h), "scene {i} ({w}x{h}): crop {found:?} vs {:?}", fit_oracle(w, h));
        let (twice, g2) = crop_letterbox(&once).map_err(|e| e.to_string())?;
        check!(
            twice.same_pixels(&once) && (g2.offset_x, g2.offset_y) == (0, 0),
            "scene {i} ({w}x{h}): second crop changed the frame"
        );
    }
    Ok("portrait 1080x2340 -> offset 711, width 498; 100 random scenes idempotent".into())
}

fn vision() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let screens: Vec<Frame> = (0..10)
        .map(|_| {
            let mut cfg = SimConfig::new(support::random_scene(&mut rng, 640, 360));
            cfg.cursor = None;
            Simulator::new(cfg).unwrap().render_native(0)
        })
        .collect();
    for i in 0..200 {
        let a = &screens[i % screens.len()];
        let (w, h) = (rng.gen_range(1..=200), rng.gen_range(1..=120));
        let r = Rect::new(rng.gen_range(0..=640 - w), rng.gen_range(0..=360 - h), w, h);
        let mut b = a.clone();
        support::fill_rect(&mut b, r, [255, 0, 255]);
        let d = gui_diff(a, &b, 16).map_err(|e| e.to_string())?.ok_or(format!("injection {i}: no change found"))?;
        check!(
            Rect::new(d.x, d.y, d.width, d.height) == r,
            "injection {i}: found {:?}, injected {r:?}",
            (d.x, d.y, d.width, d.height)
        );
        let fraction = r.area() as f64 / (640.0 * 360.0);
        check!((d.changed_fraction - fraction).abs() < 1e-12, "injection {i}: fraction {}", d.changed_fraction);
    }
    for i in 0..100 {
        let screen = &screens[i % screens.len()];
        let (w, h) = (rng.gen_range(12..=64), rng.gen_range(12..=64));
        let (x, y) = (rng.gen_range(0..=640 - w), rng.gen_range(0..=360 - h));
        let patch = screen.crop(Rect::new(x, y, w, h)).map_err(|e| e.to_string())?;
        let m = patch_location(&patch, screen, 0.02)
            .map_err(|e| e.to_string())?
            .ok_or(format!("patch {i} at ({x},{y}) not found"))?;
        check!((m.x, m.y) == (x, y) && m.score == 0.0, "patch {i}: expected ({x},{y}), got {m:?}");
    }
    for i in 0..100 {
        let screen = &screens[i % screens.len()];
        let (w, h) = (rng.gen_range(12..=64), rng.gen_range(12..=64));
        let patch = support::noise_frame(&mut rng, w, h);
        let m = patch_location(&patch, screen, 0.02).map_err(|e| e.to_string())?;
        check!(m.is_none(), "absent patch {i} matched at {m:?}");
    }
    Ok("200/200 diff boxes exact, 100/100 patches at origin with score 0, 100/100 absent".into())
}

fn crawler() -> Outcome {
    let run = || -> Result<(usize, Vec<u8>), String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = SimConfig::new(Scene::three_screen(1920, 1080));
        cfg.clock_distractor = true;
        let (_, mut ctl) = support::calibrated(cfg);
        let rec = StubRecognizer::new(Some(Scene::three_screen(1920, 1080)));
        let records = crawl(&mut ctl, &rec, &CrawlConfig::new(dir.path(), 60, 42)).map_err(|e| e.to_string())?;
        let manifest = std::fs::read(dir.path().join("manifest.json")).map_err(|e| e.to_string())?;
        Ok((records.len(), manifest))
    };
    let (n1, m1) = run()?;
    let (n2, m2) = run()?;
    check!(n1 == 3 && n2 == 3, "found {n1} and {n2} screens");
    check!(m1 == m2, "manifests differ between runs");
    Ok(format!("3 screens, manifest ({} bytes) identical across runs", m1.len()))
}

fn gateway_contract() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = Arc::new(VisualLog::open(dir.path()).map_err(|e| e.to_string())?);
    let (sim, ctl) = support::calibrated(SimConfig::new(Scene::three_screen(1920, 1080)));
    let (queue, _) = CommandQueue::spawn(ctl.with_log(log.clone()));
    let rec = Arc::new(StubRecognizer::new(Some(Scene::three_screen(1920, 1080))));
    let gw = gateway::spawn(
        GatewayState::new(queue, log.clone(), rec),
        GatewayConfig {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 0,
        },
    )
    .map_err(|e| e.to_string())?;
    let http = reqwest::blocking::Client::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        // stay off the buttons so the screen does not change under us
        let (x, y) = (rng.gen_range(0..700), rng.gen_range(0..1080));
        let resp = http
            .post(gw.url("/action"))
            .json(&json!({"v": 1, "kind": "click", "x": x, "y": y, "source": "ui"}))
            .send()
            .map_err(|e| e.to_string())?;
        check!(resp.status().as_u16() == 200, "click {i}: HTTP {}", resp.status());
        let (px, py) = sim.lock().unwrap().pointer_in_content();
        let miss = (px - x as f64).abs().max((py - y as f64).abs());
        worst = worst.max(miss);
        check!(miss <= 2.0, "click {i} at ({x},{y}) landed at ({px},{py})");
    }
    let body: Value = http
        .get(gw.url("/log?since=0"))
        .send()
        .and_then(|r| r.json())
        .map_err(|e| e.to_string())?;
    let entries = body["entries"].as_array().ok_or("no entries")?;
    let seqs: Vec<u64> = entries.iter().filter_map(|e| e["seq"].as_u64()).collect();
    check!(!seqs.is_empty(), "empty log");
    check!(
        seqs.windows(2).all(|w| w[1] == w[0] + 1),
        "log has gaps or is out of order: {seqs:?}"
    );
    let mid = seqs[seqs.len() / 2];
    let tail: Value = http
        .get(gw.url(&format!("/log?since={mid}")))
        .send()
        .and_then(|r| r.json())
        .map_err(|e| e.to_string())?;
    let tail_seqs: Vec<u64> = tail["entries"].as_array().ok_or("no entries")?.iter().filter_map(|e| e["seq"].as_u64()).collect();
    check!(tail_seqs == seqs.iter().copied().filter(|s| *s > mid).collect::<Vec<_>>(), "since={mid} returned {tail_seqs:?}");
    for e in entries {
        let id = e["frame_ref"].as_str().ok_or("entry without frame")?;
        let served = http.get(gw.url(&format!("/frame/{id}"))).send().and_then(|r| r.bytes()).map_err(|e| e.to_string())?;
        let stored = log.frame_png(id).map_err(|e| e.to_string())?;
        check!(served.as_ref() == stored.as_slice(), "frame {id}: served bytes differ from storage");
    }
    gw.shutdown().map_err(|e| e.to_string())?;
    Ok(format!(
        "10 clicks within {worst:.2} px, {} log entries gap-free, PNG bytes identical",
        seqs.len()
    ))
}

fn main() {
    let criteria: &[Criterion] = &[
        ("protocol golden and round trip", protocol_golden),
        ("homing", homing),
        ("calibration recovery", calibration_recovery),
        ("motion accuracy", motion_accuracy),
        ("letterbox", letterbox),
        ("vision", vision),
        ("crawler", crawler),
        ("gateway contract", gateway_contract),
    ];
    panic::set_hook(Box::new(|_| {}));
    let started = Instant::now();
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{:.2?}]", t.elapsed()),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason} [{:.2?}]", t.elapsed());
            }
        }
    }
    let total = started.elapsed();
    if total >= Duration::from_secs(120) {
        failed += 1;
        println!("FAIL total runtime: {total:.2?} exceeds 2 min");
    } else {
        println!("PASS total runtime: {total:.2?}");
    }
    println!("{} of {} criteria passed", criteria.len() + 1 - failed, criteria.len() + 1);
    if failed > 0 {
        std::process::exit(1);
    }
}
