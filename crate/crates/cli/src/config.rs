//! Resolved CLI configuration: flags, then environment, then the JSON
//! config file, then defaults.
//!
//! Config file example:
//!
//! ```json
//! {
//!   "target": "serial:/dev/ttyACM0",
//!   "capture": "device:0",
//!   "calibration_file": "cal.json",
//!   "gateway": {"enabled": true, "port": 8765},
//!   "seed": 7,
//!   "scene": "scene.json",
//!   "log_dir": "log"
//! }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

pub const DEFAULT_CALIBRATION_FILE: &str = "hidagent-calibration.json";
pub const DEFAULT_LOG_DIR: &str = "hidagent-log";
pub const DEFAULT_PORT: u16 = 8765;
pub const DEFAULT_BAUD: u32 = 115_200;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetSpec {
    Simulator,
    Serial(PathBuf),
    Replay(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaptureSpec {
    Simulator,
    Device(Option<u32>),
    Files(PathBuf),
}

fn split(s: &str) -> (&str, Option<&str>) {
    match s.split_once(':') {
        Some((a, b)) => (a, Some(b)),
        None => (s, None),
    }
}

impl FromStr for TargetSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match split(s) {
            ("sim" | "simulator", None) => Ok(TargetSpec::Simulator),
            ("serial", Some(p)) if !p.is_empty() => Ok(TargetSpec::Serial(p.into())),
            ("replay", Some(p)) if !p.is_empty() => Ok(TargetSpec::Replay(p.into())),
            _ => Err(format!("invalid target {s:?}: expected sim, serial:PATH or replay:DIR")),
        }
    }
}

impl FromStr for CaptureSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match split(s) {
            ("sim" | "simulator", None) => Ok(CaptureSpec::Simulator),
            ("device", None) => Ok(CaptureSpec::Device(None)),
            ("device", Some(i)) => i
                .parse()
                .map(|i| CaptureSpec::Device(Some(i)))
                .map_err(|_| format!("invalid device index {i:?}")),
            ("files", Some(p)) if !p.is_empty() => Ok(CaptureSpec::Files(p.into())),
            _ => Err(format!("invalid capture {s:?}: expected sim, device[:N] or files:DIR")),
        }
    }
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSpec::Simulator => write!(f, "sim"),
            TargetSpec::Serial(p) => write!(f, "serial:{}", p.display()),
            TargetSpec::Replay(p) => write!(f, "replay:{}", p.display()),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayFile {
    pub enabled: Option<bool>,
    pub port: Option<u16>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub target: Option<String>,
    pub capture: Option<String>,
    pub calibration_file: Option<PathBuf>,
    #[serde(default)]
    pub gateway: GatewayFile,
    pub seed: Option<u64>,
    pub scene: Option<PathBuf>,
    pub log_dir: Option<PathBuf>,
    pub baud: Option<u32>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub target: TargetSpec,
    pub capture: CaptureSpec,
    pub calibration_file: PathBuf,
    pub gateway_enabled: bool,
    pub port: u16,
    pub seed: u64,
    pub scene: Option<PathBuf>,
    pub log_dir: Option<PathBuf>,
    pub baud: u32,
}

/// Values given on the command line or through the environment.
#[derive(Debug, Default)]
pub struct Overrides {
    pub target: Option<TargetSpec>,
    pub capture: Option<CaptureSpec>,
    pub calibration_file: Option<PathBuf>,
    pub port: Option<u16>,
    pub seed: Option<u64>,
    pub scene: Option<PathBuf>,
    pub log_dir: Option<PathBuf>,
    pub baud: Option<u32>,
    pub serial_env: Option<PathBuf>,
}

impl CliConfig {
    pub fn resolve(flags: Overrides, file: ConfigFile) -> Result<CliConfig, String> {
        let file_target = file.target.as_deref().map(str::parse).transpose()?;
        let file_capture = file.capture.as_deref().map(str::parse).transpose()?;
        let target = flags
            .target
            .or(flags.serial_env.map(TargetSpec::Serial))
            .or(file_target)
            .unwrap_or(TargetSpec::Simulator);
        let capture = match flags.capture.or(file_capture) {
            Some(c) => c,
            None if target == TargetSpec::Simulator => CaptureSpec::Simulator,
            None => return Err(format!("target {target} needs an explicit --capture")),
        };
        if target == TargetSpec::Simulator && capture != CaptureSpec::Simulator {
            return Err("the simulator target captures from the simulator; drop --capture or use --capture sim".into());
        }
        if target != TargetSpec::Simulator && capture == CaptureSpec::Simulator {
            return Err("--capture sim needs --target sim".into());
        }
        let gateway_enabled = file.gateway.enabled.unwrap_or(false);
        let log_dir = flags
            .log_dir
            .or(file.log_dir)
            .or_else(|| gateway_enabled.then(|| PathBuf::from(DEFAULT_LOG_DIR)));
        Ok(CliConfig {
            target,
            capture,
            calibration_file: flags
                .calibration_file
                .or(file.calibration_file)
                .unwrap_or_else(|| DEFAULT_CALIBRATION_FILE.into()),
            gateway_enabled,
            port: flags.port.or(file.gateway.port).unwrap_or(DEFAULT_PORT),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            scene: flags.scene.or(file.scene),
            log_dir,
            baud: flags.baud.or(file.baud).unwrap_or(DEFAULT_BAUD),
        })
    }
}
