//! Random-click exploration that collects one screenshot per distinct screen.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ControlError, Controller, Recognizer};
use crate::capture::Frame;
use crate::element::UiElement;
use crate::geometry::ContentPoint;
use crate::protocol::Button;
use crate::vision::{gui_diff, DEFAULT_PIXEL_THRESHOLD};

pub const SIGNATURE_WIDTH: u32 = 32;
pub const SIGNATURE_HEIGHT: u32 = 18;
/// Mean absolute thumbnail difference (in gray levels) that separates screens.
const SIGNATURE_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Click recognized element centers, or anywhere when none are found.
    #[default]
    ElementCenters,
    /// Click uniformly over the content area.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlConfig {
    pub max_steps: u32,
    pub change_fraction_threshold: f64,
    #[serde(with = "millis")]
    pub settle_wait: Duration,
    pub seed: u64,
    pub sampling: Sampling,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl CrawlConfig {
    pub fn new(output_dir: impl Into<PathBuf>, max_steps: u32, seed: u64) -> Self {
        CrawlConfig {
            max_steps,
            change_fraction_threshold: 0.02,
            settle_wait: Duration::from_millis(300),
            seed,
            sampling: Sampling::ElementCenters,
            output_dir: output_dir.into(),
        }
    }
}

/// One distinct screen found by the crawler.
#[derive(Debug, Clone)]
pub struct ScreenRecord {
    pub index: u32,
    pub frame: Frame,
    pub elements: Vec<UiElement>,
    /// 32x18 grayscale thumbnail, row-major.
    pub signature: Vec<u8>,
    pub visit_count: u32,
}

#[derive(Serialize, Deserialize)]
struct RecordFile {
    v: u32,
    index: u32,
    visit_count: u32,
    signature: String,
    elements: Vec<UiElement>,
}

/// Contents of `manifest.json`. Holds no timestamps, so identical runs
/// produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlManifest {
    pub v: u32,
    pub seed: u64,
    pub config: CrawlConfig,
    pub steps_done: u32,
    /// Record index of the screen shown after each step; the first element
    /// is the starting screen.
    pub order: Vec<u32>,
    pub records: Vec<String>,
}

fn signature_distance(a: &[u8], b: &[u8]) -> f64 {
    let total: u64 = a.iter().zip(b).map(|(x, y)| x.abs_diff(*y) as u64).sum();
    total as f64 / a.len().max(1) as f64
}

fn record_name(index: u32) -> String {
    format!("{index:04}")
}

struct Crawl<'a> {
    dir: &'a Path,
    records: Vec<ScreenRecord>,
}

impl Crawl<'_> {
    fn find(&self, signature: &[u8]) -> Option<usize> {
        self.records
            .iter()
            .position(|r| signature_distance(&r.signature, signature) < SIGNATURE_THRESHOLD)
    }

    /// Returns the record index for `frame`, storing it when new.
    fn visit(&mut self, frame: &Frame, recognizer: &dyn Recognizer) -> Result<u32, ControlError> {
        let signature = frame.thumbnail_gray(SIGNATURE_WIDTH, SIGNATURE_HEIGHT);
        if let Some(i) = self.find(&signature) {
            self.records[i].visit_count += 1;
            return Ok(self.records[i].index);
        }
        let index = self.records.len() as u32;
        let record = ScreenRecord {
            index,
            frame: frame.clone(),
            elements: recognizer.recognize(frame)?,
            signature,
            visit_count: 1,
        };
        record
            .frame
            .save_png(&self.dir.join(format!("{}.png", record_name(index))))?;
        self.records.push(record);
        self.write_record(index as usize)?;
        Ok(index)
    }

    fn write_record(&self, i: usize) -> Result<(), ControlError> {
        let r = &self.records[i];
        let file = RecordFile {
            v: 1,
            index: r.index,
            visit_count: r.visit_count,
            signature: r.signature.iter().map(|b| format!("{b:02x}")).collect(),
            elements: r.elements.clone(),
        };
        let path = self.dir.join(format!("{}.json", record_name(r.index)));
        fs::write(path, serde_json::to_vec_pretty(&file).expect("records serialize"))?;
        Ok(())
    }

    fn load(dir: &Path, manifest: &CrawlManifest) -> Result<Vec<ScreenRecord>, ControlError> {
        manifest
            .records
            .iter()
            .map(|name| {
                let file: RecordFile = serde_json::from_slice(&fs::read(dir.join(format!("{name}.json")))?)
                    .map_err(|e| ControlError::SchemaViolation(format!("{name}.json: {e}")))?;
                let frame = Frame::load_png(&dir.join(format!("{name}.png")))?;
                let signature = (0..file.signature.len() / 2)
                    .map(|i| u8::from_str_radix(&file.signature[2 * i..2 * i + 2], 16))
                    .collect::<Result<Vec<u8>, _>>()
                    .map_err(|e| ControlError::SchemaViolation(format!("{name}.json: {e}")))?;
                Ok(ScreenRecord {
                    index: file.index,
                    frame,
                    elements: file.elements,
                    signature,
                    visit_count: file.visit_count,
                })
            })
            .collect()
    }
}

fn write_manifest(dir: &Path, manifest: &CrawlManifest) -> Result<(), ControlError> {
    let mut bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    bytes.push(b'\n');
    fs::write(dir.join("manifest.json"), bytes)?;
    Ok(())
}

fn pick_target(rng: &mut ChaCha8Rng, elements: &[UiElement], sampling: Sampling, w: u32, h: u32) -> ContentPoint {
    if sampling == Sampling::ElementCenters && !elements.is_empty() {
        let (x, y) = elements[rng.gen_range(0..elements.len())].center();
        return ContentPoint::new(x, y);
    }
    ContentPoint::new(rng.gen_range(0..w), rng.gen_range(0..h))
}

/// Explores the target by clicking and keeps every distinct screen.
///
/// Each step: recognize the current screen, click a random target, wait
/// `settle_wait`, screenshot and compare with the pre-click frame. When at
/// least `change_fraction_threshold` of the pixels changed, the new frame's
/// thumbnail signature is checked against all stored screens and stored if
/// unseen. Output goes to `output_dir` as `NNNN.png` + `NNNN.json` per
/// screen plus `manifest.json`; an unfinished crawl with the same seed
/// resumes from its manifest.
pub fn crawl(
    ctl: &mut Controller,
    recognizer: &dyn Recognizer,
    config: &CrawlConfig,
) -> Result<Vec<ScreenRecord>, ControlError> {
    if !ctl.is_calibrated() {
        return Err(ControlError::InvalidCalibration);
    }
    if !(0.0..=1.0).contains(&config.change_fraction_threshold) {
        return Err(ControlError::RangeError("change_fraction_threshold must be in [0, 1]".into()));
    }
    let dir = config.output_dir.as_path();
    fs::create_dir_all(dir)?;

    let manifest_path = dir.join("manifest.json");
    let previous: Option<CrawlManifest> = match fs::read(&manifest_path) {
        Ok(bytes) => Some(
            serde_json::from_slice(&bytes).map_err(|e| ControlError::SchemaViolation(format!("manifest.json: {e}")))?,
        ),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let mut manifest = CrawlManifest {
        v: 1,
        seed: config.seed,
        config: config.clone(),
        steps_done: 0,
        order: Vec::new(),
        records: Vec::new(),
    };
    let mut state = Crawl {
        dir,
        records: Vec::new(),
    };
    if let Some(prev) = previous.filter(|p| p.seed == config.seed) {
        state.records = Crawl::load(dir, &prev)?;
        manifest.steps_done = prev.steps_done;
        manifest.order = prev.order;
    }

    let mut current = ctl.get_screenshot()?;
    if manifest.order.is_empty() {
        let here = state.visit(&current, recognizer)?;
        manifest.order.push(here);
    } else if state.find(&current.thumbnail_gray(SIGNATURE_WIDTH, SIGNATURE_HEIGHT)).is_none() {
        // the target moved on while the crawl was stopped
        state.visit(&current, recognizer)?;
    }
    manifest.records = state.records.iter().map(|r| record_name(r.index)).collect();
    write_manifest(dir, &manifest)?;

    while manifest.steps_done < config.max_steps {
        let step = manifest.steps_done;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(step as u64));
        let elements = recognizer.recognize(&current)?;
        let target = pick_target(&mut rng, &elements, config.sampling, current.width(), current.height());
        ctl.click_mouse(target, Button::Left)?;
        ctl.sleep(config.settle_wait);
        let after = ctl.get_screenshot()?;
        let changed = gui_diff(&current, &after, DEFAULT_PIXEL_THRESHOLD)
            .map_err(|e| ControlError::RangeError(e.to_string()))?
            .is_some_and(|d| d.changed_fraction >= config.change_fraction_threshold);
        let index = if changed {
            state.visit(&after, recognizer)?
        } else {
            *manifest.order.last().expect("order starts non-empty")
        };
        manifest.order.push(index);
        manifest.steps_done += 1;
        manifest.records = state.records.iter().map(|r| record_name(r.index)).collect();
        write_manifest(dir, &manifest)?;
        current = after;
    }
    for i in 0..state.records.len() {
        state.write_record(i)?;
    }
    Ok(state.records)
}
