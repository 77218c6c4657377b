mod support;

use std::net::{IpAddr, Ipv4Addr};
use std::sync::Arc;

use hidagent::capture::Frame;
use hidagent::control::{CommandQueue, ControlError, Recognizer, StubRecognizer};
use hidagent::element::UiElement;
use hidagent::gateway::{self, GatewayConfig, GatewayHandle, GatewayState, VisualLog};
use hidagent::simulator::{Scene, SimConfig, SimHandle};
use reqwest::blocking::Client;
use serde_json::{json, Value};

struct Fixture {
    sim: SimHandle,
    log: Arc<VisualLog>,
    gw: GatewayHandle,
    http: Client,
    _dir: tempfile::TempDir,
}

fn start(calibrate: bool, recognizer: Arc<dyn Recognizer>) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let log = Arc::new(VisualLog::open(dir.path()).unwrap());
    let cfg = SimConfig::new(Scene::three_screen(1920, 1080));
    let (sim, ctl) = if calibrate {
        support::calibrated(cfg)
    } else {
        let sim = support::handle(cfg);
        let ctl = support::controller(&sim);
        (sim, ctl)
    };
    let (queue, _) = CommandQueue::spawn(ctl.with_log(log.clone()));
    let state = GatewayState::new(queue, log.clone(), recognizer);
    let gw = gateway::spawn(
        state,
        GatewayConfig {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 0,
        },
    )
    .unwrap();
    Fixture {
        sim,
        log,
        gw,
        http: Client::new(),
        _dir: dir,
    }
}

fn stub() -> Arc<dyn Recognizer> {
    Arc::new(StubRecognizer::new(Some(Scene::three_screen(1920, 1080))))
}

impl Fixture {
    fn post(&self, body: Value) -> (u16, Value) {
        let resp = self.http.post(self.gw.url("/action")).json(&body).send().unwrap();
        (resp.status().as_u16(), resp.json().unwrap())
    }

    fn get_json(&self, path: &str) -> (u16, Value) {
        let resp = self.http.get(self.gw.url(path)).send().unwrap();
        (resp.status().as_u16(), resp.json().unwrap())
    }
}

#[test]
fn click_lands_and_is_logged() {
    let f = start(true, stub());
    let (status, body) = f.post(json!({"v": 1, "kind": "click", "x": 150, "y": 80, "source": "ui"}));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["result"], "success");
    let (x, y) = f.sim.lock().unwrap().pointer_in_content();
    assert!((x - 150.0).abs() <= 2.0 && (y - 80.0).abs() <= 2.0);
    assert_eq!(body["log_seq"], f.log.last().unwrap().seq);
}

#[test]
fn log_is_gap_free_and_frames_match_storage() {
    let f = start(true, stub());
    for (x, y) in [(10, 10), (300, 900), (1500, 40)] {
        assert_eq!(f.post(json!({"kind": "click", "x": x, "y": y})).0, 200);
    }
    assert_eq!(f.post(json!({"kind": "type", "text": "hello"})).0, 200);
    assert_eq!(f.post(json!({"kind": "key", "keys": ["cmd", "a"]})).0, 200);

    let (_, all) = f.get_json("/log?since=0");
    let entries = all["entries"].as_array().unwrap();
    let seqs: Vec<u64> = entries.iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    let first = seqs[0];
    assert_eq!(seqs, (first..first + seqs.len() as u64).collect::<Vec<_>>());

    let (_, tail) = f.get_json(&format!("/log?since={}", seqs[2]));
    let tail_seqs: Vec<u64> = tail["entries"].as_array().unwrap().iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert_eq!(tail_seqs, seqs[3..]);

    for e in entries {
        let id = e["frame_ref"].as_str().unwrap();
        let served = f.http.get(f.gw.url(&format!("/frame/{id}"))).send().unwrap();
        assert_eq!(served.headers()["content-type"], "image/png");
        let bytes = served.bytes().unwrap();
        assert_eq!(bytes.as_ref(), f.log.frame_png(id).unwrap().as_slice());
    }
    assert_eq!(f.get_json("/log?since=abc").0, 422);
}

#[test]
fn latest_frame_carries_geometry_and_resolves() {
    let f = start(true, stub());
    let resp = f.http.get(f.gw.url("/frame/latest")).send().unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    let id = resp.headers()["x-frame-id"].to_str().unwrap().to_string();
    assert_eq!(resp.headers()["x-content-offset"], "0,0");
    assert_eq!(resp.headers()["x-content-size"], "1920,1080");
    let bytes = resp.bytes().unwrap();
    let frame = Frame::from_png(&bytes).unwrap();
    assert_eq!(frame.dimensions(), (1920, 1080));
    let again = f.http.get(f.gw.url(&format!("/frame/{id}"))).send().unwrap().bytes().unwrap();
    assert_eq!(again, bytes);
    assert_eq!(f.http.get(f.gw.url("/frame/0123456789abcdef")).send().unwrap().status().as_u16(), 404);
    assert_eq!(f.http.get(f.gw.url("/frame/..%2Fentries.jsonl")).send().unwrap().status().as_u16(), 404);
}

#[test]
fn status_codes_follow_the_error_kind() {
    let f = start(false, stub());
    let (status, body) = f.post(json!({"kind": "click", "x": 5, "y": 5}));
    assert_eq!((status, body["error"].as_str().unwrap()), (409, "InvalidCalibration"));
    let (_, st) = f.get_json("/status");
    assert_eq!(st["calibrated"], false);
    assert_eq!(st["target_connected"], true);

    let f = start(true, stub());
    assert_eq!(f.post(json!({"kind": "click", "x": 5, "y": 5, "text": "x"})).0, 422);
    assert_eq!(f.post(json!({"kind": "click", "x": 5000, "y": 5})).0, 422);
    assert_eq!(f.post(json!({"kind": "key", "keys": ["hyper"]})).0, 422);
    let raw = f.http.post(f.gw.url("/action")).body("not json").send().unwrap();
    assert_eq!(raw.status().as_u16(), 422);

    f.sim.lock().unwrap().stop();
    let (status, body) = f.post(json!({"kind": "type", "text": "x"}));
    assert_eq!(status, 503, "{body}");
}

struct Flaky(std::sync::atomic::AtomicBool);

impl Recognizer for Flaky {
    fn recognize(&self, frame: &Frame) -> Result<Vec<UiElement>, ControlError> {
        if self.0.swap(true, std::sync::atomic::Ordering::SeqCst) {
            Err(ControlError::ServiceUnavailable("recognizer down".into()))
        } else {
            StubRecognizer::new(Some(Scene::three_screen(1920, 1080))).recognize(frame)
        }
    }
}

#[test]
fn accessible_view_degrades_to_stale() {
    let f = start(true, Arc::new(Flaky(false.into())));
    let (status, fresh) = f.get_json("/accessible");
    assert_eq!(status, 200);
    assert_eq!(fresh["stale"], false);
    let elements = fresh["elements"].as_array().unwrap();
    assert_eq!(elements.len(), 3);
    assert_eq!(elements[1]["content"], "Settings");
    assert_eq!(elements[1]["action"], json!({"kind": "click", "x": 959, "y": 534, "source": "ui"}));

    let (status, stale) = f.get_json("/accessible");
    assert_eq!(status, 200);
    assert_eq!(stale["stale"], true);
    assert_eq!(stale["elements"], fresh["elements"]);

    // the element's own action is a valid request
    let (status, _) = f.post(elements[1]["action"].clone());
    assert_eq!(status, 200);
    assert_eq!(f.sim.lock().unwrap().screen_name(), "settings");
}
