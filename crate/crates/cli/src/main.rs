//! `hidagent`: drive a target computer (or the built-in simulator) from the
//! command line.

mod config;
mod replay;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use hidagent::calibration::{Calibration, CalibrationOptions};
use hidagent::capture::{DeviceSource, FileSource, Frame, FrameSource, SysfsEnumerator};
use hidagent::control::{
    crawl, Clock, CommandQueue, ControlError, Controller, CrawlConfig, HttpQueryClient, HttpRecognizer,
    QueryClient, Recognizer, Sampling, StubQueryClient, StubRecognizer,
};
use hidagent::gateway::{self, GatewayConfig, GatewayState, VisualLog};
use hidagent::geometry::ContentPoint;
use hidagent::protocol::{serial, Button, Key, Session, SessionConfig, StreamTransport};
use hidagent::simulator::{
    serve_pty, Acceleration, CursorSprite, Scene, SimConfig, SimHandle, Simulator, SimulatorLink, SimulatorSource,
};

use config::{CaptureSpec, CliConfig, ConfigFile, Overrides, TargetSpec};
use replay::ReplayTransport;

#[derive(Parser, Debug)]
#[command(name = "hidagent", version, about = "Control a computer through a USB HID bridge and HDMI capture")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Device to drive: sim, serial:PATH or replay:DIR
    #[arg(long, global = true)]
    target: Option<TargetSpec>,
    /// Frame source: sim, device[:N] or files:DIR
    #[arg(long, global = true)]
    capture: Option<CaptureSpec>,
    /// JSON config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scene JSON for the simulator and the stub recognizer
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// Calibration file to read and write
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
    /// Visual log directory
    #[arg(long, global = true)]
    log_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    baud: Option<u32>,
    /// Serial device, used when no target is given
    #[arg(long = "serial", env = "HIDAGENT_SERIAL", global = true, hide_env_values = true)]
    serial_env: Option<PathBuf>,
    /// Simulated pixels per HID unit
    #[arg(long, global = true, default_value_t = 1.0)]
    px_per_hid: f64,
    /// Simulated pointer acceleration as THRESHOLD,ALPHA
    #[arg(long, global = true, value_parser = parse_gain)]
    gain: Option<(u32, f64)>,
    /// Animate a clock in the simulated screen
    #[arg(long, global = true)]
    clock_distractor: bool,
    /// Draw the simulated cursor at 30% opacity
    #[arg(long, global = true)]
    faint_cursor: bool,
    /// UI recognizer endpoint; the built-in stub is used otherwise
    #[arg(long, global = true)]
    recognizer_url: Option<String>,
    /// Screenshot query endpoint; the built-in stub is used otherwise
    #[arg(long, global = true)]
    query_url: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Measure the pointer scale and store the calibration file
    Calibrate {
        #[arg(long)]
        horizontal_only: bool,
    },
    /// Save the current content area as PNG
    Screenshot { out: PathBuf },
    /// Click at content pixel X Y
    Click {
        x: u32,
        y: u32,
        #[arg(long)]
        right: bool,
    },
    /// Move the pointer to content pixel X Y
    Move { x: u32, y: u32 },
    /// Type text
    Type { text: String },
    /// Press a chord such as cmd+space
    Key { chord: String },
    /// Open an application through the launcher
    Run { app: String },
    /// Ask a question about the current screen
    Ask { query: String },
    /// Explore by clicking and save every distinct screen
    Crawl {
        #[arg(long)]
        max_steps: u32,
        #[arg(long)]
        out: PathBuf,
        /// Click anywhere instead of on recognized elements
        #[arg(long)]
        uniform: bool,
        #[arg(long, default_value_t = 300)]
        settle_ms: u64,
    },
    /// Run the HTTP gateway
    Serve {
        #[arg(long, env = "HIDAGENT_PORT")]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
    },
    /// Expose a simulated target on a pseudo-terminal
    Simulate {
        /// Directory that receives frame.png whenever the screen changes
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Exit after this many milliseconds
        #[arg(long)]
        duration_ms: Option<u64>,
    },
}

fn parse_gain(s: &str) -> Result<(u32, f64), String> {
    let (t, a) = s.split_once(',').ok_or("expected THRESHOLD,ALPHA")?;
    let t = t.trim().parse().map_err(|_| format!("bad threshold {t:?}"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad alpha {a:?}"))?;
    if !a.is_finite() || a < 0.0 {
        return Err("alpha must be a non-negative number".into());
    }
    Ok((t, a))
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Control(ControlError),
}

impl From<ControlError> for CliError {
    fn from(e: ControlError) -> Self {
        CliError::Control(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Control(e.into())
    }
}

fn control<E: Into<ControlError>>(e: E) -> CliError {
    CliError::Control(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            if !out.is_null() {
                println!("{out}");
            }
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(m)) => {
            eprintln!("{}", json!({"error": "Usage", "message": m}));
            ExitCode::from(2)
        }
        Err(CliError::Control(e)) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::from(1)
        }
    }
}

fn resolve(g: &Global, port: Option<u16>) -> Result<CliConfig, CliError> {
    let file = match &g.config {
        Some(p) => ConfigFile::load(p).map_err(CliError::Usage)?,
        None => ConfigFile::default(),
    };
    let flags = Overrides {
        target: g.target.clone(),
        capture: g.capture.clone(),
        calibration_file: g.calibration.clone(),
        port,
        seed: g.seed,
        scene: g.scene.clone(),
        log_dir: g.log_dir.clone(),
        baud: g.baud,
        serial_env: g.serial_env.clone(),
    };
    CliConfig::resolve(flags, file).map_err(CliError::Usage)
}

fn load_scene(cfg: &CliConfig) -> Result<Option<Scene>, CliError> {
    match &cfg.scene {
        Some(p) => Scene::load(p)
            .map(Some)
            .map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
        None => Ok(None),
    }
}

fn sim_config(g: &Global, scene: Scene) -> Result<SimConfig, CliError> {
    let mut sc = SimConfig::new(scene);
    sc.px_per_hid = g.px_per_hid;
    sc.clock_distractor = g.clock_distractor;
    if g.faint_cursor {
        sc.cursor = Some(CursorSprite::faint());
    }
    if let Some((threshold, alpha)) = g.gain {
        sc.acceleration = Acceleration::Gain { threshold, alpha };
    }
    sc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(sc)
}

fn start_simulator(g: &Global, scene: Scene) -> Result<SimHandle, CliError> {
    let sc = sim_config(g, scene)?;
    Ok(Simulator::new(sc).map_err(|e| CliError::Usage(e.to_string()))?.into_handle())
}

struct Setup {
    controller: Controller,
    scene: Option<Scene>,
    calibration_file: PathBuf,
    config: CliConfig,
}

fn setup(g: &Global, port: Option<u16>) -> Result<Setup, CliError> {
    let cfg = resolve(g, port)?;
    let scene = load_scene(&cfg)?;
    let session_cfg = SessionConfig {
        baud_rate: cfg.baud,
        ..SessionConfig::default()
    };
    let mut controller = match &cfg.target {
        TargetSpec::Simulator => {
            let scene = scene.clone().unwrap_or_else(|| Scene::with_launcher(1920, 1080));
            let sim = start_simulator(g, scene)?;
            let session = Session::new(SimulatorLink::new(sim.clone()), session_cfg).map_err(control)?;
            Controller::new(session, SimulatorSource::new(sim)).with_clock(Clock::virtual_clock())
        }
        TargetSpec::Serial(path) => {
            let (r, w) = serial::open_serial(path, cfg.baud).map_err(control)?;
            let max = session_cfg.max_line_length;
            let session = Session::new(StreamTransport::new(r, w, max), session_cfg).map_err(control)?;
            Controller::new(session, capture_source(&cfg.capture)?)
        }
        TargetSpec::Replay(dir) => {
            let session = Session::new(ReplayTransport::open(dir)?, session_cfg).map_err(control)?;
            Controller::new(session, capture_source(&cfg.capture)?).with_clock(Clock::virtual_clock())
        }
    };
    if cfg.calibration_file.exists() {
        let cal = Calibration::load(&cfg.calibration_file).map_err(control)?;
        controller.set_calibration(Some(cal));
    }
    if let Some(dir) = &cfg.log_dir {
        controller = controller.with_log(Arc::new(VisualLog::open(dir).map_err(control)?));
    }
    let scene = match (&cfg.target, scene) {
        (TargetSpec::Simulator, None) => Some(Scene::with_launcher(1920, 1080)),
        (_, s) => s,
    };
    Ok(Setup {
        controller,
        scene,
        calibration_file: cfg.calibration_file.clone(),
        config: cfg,
    })
}

fn capture_source(spec: &CaptureSpec) -> Result<Box<dyn FrameSource>, CliError> {
    Ok(match spec {
        CaptureSpec::Files(dir) => Box::new(FileSource::new(dir)),
        CaptureSpec::Device(index) => Box::new(DeviceSource::open(*index, &SysfsEnumerator::default()).map_err(control)?),
        CaptureSpec::Simulator => return Err(CliError::Usage("--capture sim needs --target sim".into())),
    })
}

fn recognizer(g: &Global, scene: Option<Scene>) -> Result<Arc<dyn Recognizer>, CliError> {
    Ok(match &g.recognizer_url {
        Some(url) => Arc::new(HttpRecognizer::new(url.clone(), Duration::from_secs(30)).map_err(control)?),
        None => Arc::new(StubRecognizer::new(scene)),
    })
}

fn query_client(g: &Global, scene: Option<Scene>) -> Result<Box<dyn QueryClient>, CliError> {
    Ok(match &g.query_url {
        Some(url) => Box::new(HttpQueryClient::new(url.clone(), Duration::from_secs(60)).map_err(control)?),
        None => Box::new(StubQueryClient::new(scene)),
    })
}

fn ok() -> Value {
    json!({"result": "success"})
}

fn run(cli: Cli) -> Result<Value, CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Simulate { frames, duration_ms } => simulate(g, frames, duration_ms),
        Command::Serve { port, bind } => serve(g, port, bind),
        command => {
            let Setup {
                mut controller,
                scene,
                calibration_file,
                config,
            } = setup(g, None)?;
            let ctl = &mut controller;
            match command {
                Command::Calibrate { horizontal_only } => {
                    let cal = ctl.calibrate(CalibrationOptions {
                        horizontal_only,
                        ..CalibrationOptions::default()
                    })?;
                    cal.save(&calibration_file).map_err(control)?;
                    Ok(json!({
                        "px_per_hid_x": cal.px_per_hid_x,
                        "px_per_hid_y": cal.px_per_hid_y,
                        "origin_px": [cal.origin_px.0, cal.origin_px.1],
                        "file": calibration_file,
                    }))
                }
                Command::Screenshot { out } => {
                    let frame = ctl.get_screenshot()?;
                    save_atomic(&frame, &out)?;
                    Ok(json!({"file": out, "width": frame.width(), "height": frame.height()}))
                }
                Command::Click { x, y, right } => {
                    let button = if right { Button::Right } else { Button::Left };
                    ctl.click_mouse(ContentPoint::new(x, y), button)?;
                    Ok(ok())
                }
                Command::Move { x, y } => {
                    ctl.move_mouse(ContentPoint::new(x, y))?;
                    Ok(ok())
                }
                Command::Type { text } => {
                    ctl.type_text(&text)?;
                    Ok(ok())
                }
                Command::Key { chord } => {
                    let keys = Key::parse_chord(&chord).map_err(control)?;
                    ctl.keypress(&keys)?;
                    Ok(ok())
                }
                Command::Run { app } => {
                    ctl.run_application(&app)?;
                    Ok(ok())
                }
                Command::Ask { query } => {
                    let rec = recognizer(g, scene.clone())?;
                    let client = query_client(g, scene)?;
                    let answer = ctl.observe_and_answer(rec.as_ref(), client.as_ref(), &query)?;
                    Ok(serde_json::to_value(answer).expect("answers serialize"))
                }
                Command::Crawl {
                    max_steps,
                    out,
                    uniform,
                    settle_ms,
                } => {
                    let rec = recognizer(g, scene)?;
                    let mut cc = CrawlConfig::new(&out, max_steps, config.seed);
                    cc.settle_wait = Duration::from_millis(settle_ms);
                    if uniform {
                        cc.sampling = Sampling::Uniform;
                    }
                    let records = crawl(ctl, rec.as_ref(), &cc)?;
                    Ok(json!({
                        "screens": records.len(),
                        "steps": max_steps,
                        "out": out,
                        "records": records.iter().map(|r| json!({
                            "index": r.index,
                            "visit_count": r.visit_count,
                            "elements": r.elements.len(),
                        })).collect::<Vec<_>>(),
                    }))
                }
                Command::Simulate { .. } | Command::Serve { .. } => unreachable!(),
            }
        }
    }
}

fn save_atomic(frame: &Frame, out: &Path) -> Result<(), CliError> {
    let mut tmp = out.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, frame.to_png())?;
    std::fs::rename(&tmp, out)?;
    Ok(())
}

fn serve(g: &Global, port: Option<u16>, bind: std::net::IpAddr) -> Result<Value, CliError> {
    let mut with_log = g.clone();
    if with_log.log_dir.is_none() {
        with_log.log_dir = Some(resolve(g, port)?.log_dir.unwrap_or_else(|| config::DEFAULT_LOG_DIR.into()));
    }
    let Setup {
        controller,
        scene,
        config,
        ..
    } = setup(&with_log, port)?;
    let log = controller.log().cloned().expect("log dir is set");
    let rec = recognizer(g, scene)?;
    let (queue, _worker) = CommandQueue::spawn(controller);
    let state = GatewayState::new(queue, log, rec);
    let gw = GatewayConfig {
        bind,
        port: config.port,
    };
    gateway::run_until_interrupted(state, gw, |addr| {
        println!("{}", json!({"listening": format!("http://{addr}")}));
    })?;
    Ok(Value::Null)
}

fn simulate(g: &Global, frames: Option<PathBuf>, duration_ms: Option<u64>) -> Result<Value, CliError> {
    let scene = match &g.scene {
        Some(p) => Scene::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => Scene::with_launcher(1920, 1080),
    };
    let mut sc = sim_config(g, scene)?;
    sc.wall_clock = true;
    let sim = Simulator::new(sc).map_err(|e| CliError::Usage(e.to_string()))?.into_handle();
    let (pty, _server) = serve_pty(sim.clone())?;
    if let Some(dir) = &frames {
        std::fs::create_dir_all(dir)?;
    }
    let out = frames.as_ref().map(|d| d.join("frame.png"));
    let render = |last: &mut Option<Frame>| -> Result<(), CliError> {
        let Some(out) = &out else { return Ok(()) };
        let frame = sim.lock().unwrap().render_frame();
        if last.as_ref().is_none_or(|l| !l.same_pixels(&frame)) {
            save_atomic(&frame, out)?;
            *last = Some(frame);
        }
        Ok(())
    };
    let mut last = None;
    render(&mut last)?;
    println!(
        "{}",
        json!({"pty": pty.slave_path(), "frames": frames})
    );
    let deadline = duration_ms.map(|ms| Instant::now() + Duration::from_millis(ms));
    while sim.lock().unwrap().is_running() && deadline.is_none_or(|d| Instant::now() < d) {
        std::thread::sleep(Duration::from_millis(50));
        render(&mut last)?;
    }
    Ok(Value::Null)
}
