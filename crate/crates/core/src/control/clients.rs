//! Element recognition and screenshot question answering.
//!
//! Both are external services in practice. The stub implementations work
//! offline against frames rendered by the simulator.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ControlError;
use crate::capture::Frame;
use crate::element::{ElementKind, UiElement};
use crate::geometry::Rect;
use crate::simulator::{Scene, BORDER_COLOR};

/// Turns a content-space frame into a list of on-screen elements.
pub trait Recognizer: Send + Sync {
    fn recognize(&self, frame: &Frame) -> Result<Vec<UiElement>, ControlError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAnswer {
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// Answers a natural-language question about a screenshot.
pub trait QueryClient: Send + Sync {
    fn query(&self, frame: &Frame, elements: &[UiElement], query: &str) -> Result<QueryAnswer, ControlError>;
}

/// Runs element recognition on a content-space frame.
pub fn recognize_gui_elements(client: &dyn Recognizer, frame: &Frame) -> Result<Vec<UiElement>, ControlError> {
    client.recognize(frame)
}

/// Asks a question about a frame; the recognized elements travel with it.
pub fn llm_screenshot_query(
    client: &dyn QueryClient,
    frame: &Frame,
    elements: &[UiElement],
    query: &str,
) -> Result<QueryAnswer, ControlError> {
    if query.trim().is_empty() {
        return Err(ControlError::RangeError("query is empty".into()));
    }
    client.query(frame, elements, query)
}

/// Smallest bordered rectangle the stub reports, in content pixels.
const MIN_ELEMENT_SIDE: u32 = 4;

/// Finds the simulator's bordered widgets by their reserved outline color.
///
/// With a scene attached, each detection is labeled with the scene widget
/// it overlaps best (ties broken by fill color); otherwise it is reported
/// as an unlabeled button.
#[derive(Debug, Clone, Default)]
pub struct StubRecognizer {
    scene: Option<Scene>,
}

impl StubRecognizer {
    pub fn new(scene: Option<Scene>) -> Self {
        StubRecognizer { scene }
    }

    fn label(&self, frame: &Frame, bbox: Rect) -> (ElementKind, Option<String>) {
        let Some(scene) = &self.scene else {
            return (ElementKind::Button, None);
        };
        let sx = frame.width() as f64 / scene.width as f64;
        let sy = frame.height() as f64 / scene.height as f64;
        let fill = interior_mean(frame, bbox);
        let mut best: Option<(f64, &crate::simulator::scene::Widget)> = None;
        for w in scene.screens.iter().flat_map(|s| &s.widgets) {
            let r = w.rect;
            let x0 = (r.x as f64 * sx).round() as u32;
            let y0 = (r.y as f64 * sy).round() as u32;
            let x1 = (r.right() as f64 * sx).round() as u32;
            let y1 = (r.bottom() as f64 * sy).round() as u32;
            let scaled = Rect::new(x0, y0, x1.saturating_sub(x0).max(1), y1.saturating_sub(y0).max(1));
            if scaled.iou(&bbox) < 0.5 {
                continue;
            }
            let dist: f64 = (0..3).map(|c| (fill[c] - w.fill[c] as f64).abs()).sum();
            if best.is_none_or(|(d, _)| dist < d) {
                best = Some((dist, w));
            }
        }
        match best {
            Some((_, w)) => (w.kind, Some(w.label.clone())),
            None => (ElementKind::Button, None),
        }
    }
}

fn interior_mean(frame: &Frame, bbox: Rect) -> [f64; 3] {
    let inset = (bbox.width.min(bbox.height) / 4).max(1);
    let (x0, y0) = (bbox.x + inset, bbox.y + inset);
    let (x1, y1) = (bbox.right().saturating_sub(inset), bbox.bottom().saturating_sub(inset));
    let mut sum = [0f64; 3];
    let mut n = 0f64;
    for y in y0..y1.max(y0 + 1).min(frame.height()) {
        for x in x0..x1.max(x0 + 1).min(frame.width()) {
            let p = frame.pixel(x, y);
            for c in 0..3 {
                sum[c] += p[c] as f64;
            }
            n += 1.0;
        }
    }
    sum.map(|s| s / n.max(1.0))
}

/// Bounding boxes of 8-connected runs of `color`, in raster order.
pub(crate) fn color_components(frame: &Frame, color: [u8; 3]) -> Vec<Rect> {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    let hit = |i: usize| frame.pixel((i % w) as u32, (i / w) as u32) == color;
    for start in 0..w * h {
        if seen[start] || !hit(start) {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if !seen[j] && hit(j) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(Rect::new(x0 as u32, y0 as u32, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32));
    }
    out
}

impl Recognizer for StubRecognizer {
    fn recognize(&self, frame: &Frame) -> Result<Vec<UiElement>, ControlError> {
        let mut boxes: Vec<Rect> = color_components(frame, BORDER_COLOR)
            .into_iter()
            .filter(|r| r.width >= MIN_ELEMENT_SIDE && r.height >= MIN_ELEMENT_SIDE)
            .collect();
        boxes.sort_by_key(|r| (r.y, r.x));
        Ok(boxes
            .into_iter()
            .enumerate()
            .map(|(i, bbox)| {
                let (kind, content) = self.label(frame, bbox);
                UiElement {
                    id: i as u32,
                    kind,
                    bbox,
                    content,
                }
            })
            .collect())
    }
}

/// Offline query answering: counts buttons, otherwise looks the question
/// up in the scene's canned answers.
#[derive(Debug, Clone, Default)]
pub struct StubQueryClient {
    scene: Option<Scene>,
}

impl StubQueryClient {
    pub fn new(scene: Option<Scene>) -> Self {
        StubQueryClient { scene }
    }
}

fn normalize_query(q: &str) -> String {
    q.trim()
        .trim_end_matches(['?', '.', '!'])
        .trim()
        .to_lowercase()
}

impl QueryClient for StubQueryClient {
    fn query(&self, _frame: &Frame, elements: &[UiElement], query: &str) -> Result<QueryAnswer, ControlError> {
        let q = normalize_query(query);
        if q == "how many buttons" || q == "how many buttons are there" {
            let n = elements.iter().filter(|e| e.kind == ElementKind::Button).count();
            return Ok(QueryAnswer {
                answer: n.to_string(),
                confidence: Some(1.0),
            });
        }
        let canned = self.scene.as_ref().and_then(|s| {
            s.answers
                .iter()
                .find(|(k, _)| normalize_query(k) == q)
                .map(|(_, v)| v.clone())
        });
        Ok(match canned {
            Some(answer) => QueryAnswer {
                answer,
                confidence: Some(1.0),
            },
            None => QueryAnswer {
                answer: "unknown".into(),
                confidence: Some(0.0),
            },
        })
    }
}

fn encode_frame(frame: &Frame) -> String {
    BASE64.encode(frame.to_png())
}

fn http_client(timeout: Duration) -> Result<reqwest::blocking::Client, ControlError> {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| ControlError::ServiceUnavailable(e.to_string()))
}

fn post_json(client: &reqwest::blocking::Client, url: &str, body: &Value) -> Result<Value, ControlError> {
    let resp = client
        .post(url)
        .json(body)
        .send()
        .map_err(|e| ControlError::ServiceUnavailable(e.to_string()))?;
    if !resp.status().is_success() {
        return Err(ControlError::ServiceUnavailable(format!("{url} returned {}", resp.status())));
    }
    resp.json()
        .map_err(|e| ControlError::SchemaViolation(format!("response is not JSON: {e}")))
}

/// Recognizer service client.
///
/// Request `{"image": <base64 PNG>}`; response
/// `{"elements": [{"id", "kind", "bbox": [x, y, w, h], "content"}]}`.
pub struct HttpRecognizer {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpRecognizer {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, ControlError> {
        Ok(HttpRecognizer {
            url: url.into(),
            client: http_client(timeout)?,
        })
    }
}

/// Validates a recognizer response against the frame it describes.
pub fn parse_elements(body: &Value, frame_w: u32, frame_h: u32) -> Result<Vec<UiElement>, ControlError> {
    let list = body
        .get("elements")
        .cloned()
        .ok_or_else(|| ControlError::SchemaViolation("missing \"elements\"".into()))?;
    let elements: Vec<UiElement> =
        serde_json::from_value(list).map_err(|e| ControlError::SchemaViolation(e.to_string()))?;
    for (i, e) in elements.iter().enumerate() {
        if e.bbox.right() > frame_w || e.bbox.bottom() > frame_h {
            return Err(ControlError::SchemaViolation(format!("element {} lies outside the frame", e.id)));
        }
        if elements[..i].iter().any(|o| o.id == e.id) {
            return Err(ControlError::SchemaViolation(format!("duplicate element id {}", e.id)));
        }
    }
    Ok(elements)
}

impl Recognizer for HttpRecognizer {
    fn recognize(&self, frame: &Frame) -> Result<Vec<UiElement>, ControlError> {
        let body = post_json(&self.client, &self.url, &json!({ "image": encode_frame(frame) }))?;
        parse_elements(&body, frame.width(), frame.height())
    }
}

/// Query service client.
///
/// Request `{"image": <base64 PNG>, "elements": [...], "query": "..."}`;
/// response `{"answer": "...", "confidence": 0.9}` (confidence optional).
pub struct HttpQueryClient {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpQueryClient {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, ControlError> {
        Ok(HttpQueryClient {
            url: url.into(),
            client: http_client(timeout)?,
        })
    }
}

impl QueryClient for HttpQueryClient {
    fn query(&self, frame: &Frame, elements: &[UiElement], query: &str) -> Result<QueryAnswer, ControlError> {
        let body = post_json(
            &self.client,
            &self.url,
            &json!({ "image": encode_frame(frame), "elements": elements, "query": query }),
        )?;
        serde_json::from_value(body).map_err(|e| ControlError::SchemaViolation(e.to_string()))
    }
}
