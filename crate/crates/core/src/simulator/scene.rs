//! Declarative widget-app layout for the simulated target.
//!
//! A scene file is JSON:
//!
//! ```json
//! {
//!   "v": 1,
//!   "width": 1920,
//!   "height": 1080,
//!   "home": "home",
//!   "screens": [
//!     {
//!       "name": "home",
//!       "background": [150, 170, 200],
//!       "widgets": [
//!         {"label": "Notes", "kind": "button", "rect": [806, 270, 307, 97],
//!          "fill": [120, 150, 190], "target": "notes"}
//!       ]
//!     }
//!   ],
//!   "launcher": {"screen": "launcher", "apps": {"notes": "notes"}}
//! }
//! ```
//!
//! Colors are restricted so that the simulator's texture never produces
//! black (letterbox) pixels or the reserved widget border color.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::element::ElementKind;
use crate::geometry::Rect;

/// Solid color of every widget outline. Nothing else in a frame uses it.
pub const BORDER_COLOR: [u8; 3] = [24, 24, 32];
/// Outline thickness in native pixels.
pub const BORDER_WIDTH: u32 = 3;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scene file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scene: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Widget {
    pub label: String,
    #[serde(default)]
    pub kind: ElementKind,
    pub rect: Rect,
    pub fill: [u8; 3],
    /// Screen shown after a left click; `None` means the click is inert.
    #[serde(default)]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screen {
    pub name: String,
    pub background: [u8; 3],
    #[serde(default)]
    pub widgets: Vec<Widget>,
}

impl Screen {
    /// Widgets in raster order of their top-left corner.
    pub fn widgets_in_raster_order(&self) -> Vec<&Widget> {
        let mut w: Vec<&Widget> = self.widgets.iter().collect();
        w.sort_by_key(|w| (w.rect.y, w.rect.x));
        w
    }
}

/// Keyboard launcher reached through the cmd+space chord.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Launcher {
    pub screen: String,
    /// Lowercase application name to the screen it opens.
    pub apps: BTreeMap<String, String>,
}

fn scene_version() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default = "scene_version")]
    pub v: u32,
    pub width: u32,
    pub height: u32,
    pub home: String,
    pub screens: Vec<Screen>,
    #[serde(default)]
    pub launcher: Option<Launcher>,
    /// Canned answers for the stub query client.
    #[serde(default)]
    pub answers: BTreeMap<String, String>,
}

fn color_ok(c: [u8; 3]) -> bool {
    c.iter().all(|v| (40..=200).contains(v)) && c.iter().any(|v| *v >= 100)
}

impl Scene {
    pub fn load(path: &Path) -> Result<Scene, SceneError> {
        let scene: Scene = serde_json::from_slice(&std::fs::read(path)?)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenes always serialize")
    }

    pub fn screen_index(&self, name: &str) -> Option<usize> {
        self.screens.iter().position(|s| s.name == name)
    }

    pub fn home_index(&self) -> usize {
        self.screen_index(&self.home).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Invalid(m));
        if self.v != 1 {
            return bad(format!("unsupported scene version {}", self.v));
        }
        if self.width < 16 || self.height < 16 {
            return bad("screen must be at least 16x16".into());
        }
        if self.screens.is_empty() {
            return bad("at least one screen is required".into());
        }
        for (i, s) in self.screens.iter().enumerate() {
            if self.screens[..i].iter().any(|o| o.name == s.name) {
                return bad(format!("duplicate screen {:?}", s.name));
            }
            if !color_ok(s.background) {
                return bad(format!("screen {:?}: background out of range", s.name));
            }
            for w in &s.widgets {
                if w.rect.right() > self.width || w.rect.bottom() > self.height {
                    return bad(format!("widget {:?} lies outside the screen", w.label));
                }
                if w.rect.width < 2 * BORDER_WIDTH + 2 || w.rect.height < 2 * BORDER_WIDTH + 2 {
                    return bad(format!("widget {:?} is too small", w.label));
                }
                if !color_ok(w.fill) {
                    return bad(format!("widget {:?}: fill out of range", w.label));
                }
                if let Some(t) = &w.target {
                    if self.screen_index(t).is_none() {
                        return bad(format!("widget {:?} targets unknown screen {t:?}", w.label));
                    }
                }
            }
        }
        if self.screen_index(&self.home).is_none() {
            return bad(format!("home screen {:?} does not exist", self.home));
        }
        if let Some(l) = &self.launcher {
            if self.screen_index(&l.screen).is_none() {
                return bad(format!("launcher screen {:?} does not exist", l.screen));
            }
            for target in l.apps.values() {
                if self.screen_index(target).is_none() {
                    return bad(format!("launcher app targets unknown screen {target:?}"));
                }
            }
        }
        Ok(())
    }

    /// Three screens (home, notes, settings) linked by buttons, sized for a
    /// `width x height` display. Buttons sit in a central column, clear of
    /// the top-left calibration area and the bottom-right clock.
    pub fn three_screen(width: u32, height: u32) -> Scene {
        let bw = (width * 16 / 100).max(24);
        let bh = (height * 9 / 100).max(16);
        let x = width * 42 / 100;
        let row = |i: u32| height * 25 / 100 + i * height * 20 / 100;
        let button = |label: &str, i: u32, fill: [u8; 3], target: Option<&str>| Widget {
            label: label.into(),
            kind: ElementKind::Button,
            rect: Rect::new(x, row(i), bw, bh),
            fill,
            target: target.map(str::to_string),
        };
        Scene {
            v: 1,
            width,
            height,
            home: "home".into(),
            screens: vec![
                Screen {
                    name: "home".into(),
                    background: [150, 170, 200],
                    widgets: vec![
                        button("Notes", 0, [110, 140, 190], Some("notes")),
                        button("Settings", 1, [190, 150, 110], Some("settings")),
                        button("Refresh", 2, [120, 180, 120], None),
                    ],
                },
                Screen {
                    name: "notes".into(),
                    background: [200, 185, 120],
                    widgets: vec![
                        button("Back", 0, [160, 120, 90], Some("home")),
                        button("New note", 1, [190, 190, 90], None),
                    ],
                },
                Screen {
                    name: "settings".into(),
                    background: [120, 190, 150],
                    widgets: vec![
                        button("Back", 0, [80, 150, 110], Some("home")),
                        button("Notes", 1, [110, 140, 190], Some("notes")),
                    ],
                },
            ],
            launcher: None,
            answers: BTreeMap::new(),
        }
    }

    /// [`Scene::three_screen`] plus a keyboard launcher screen that opens
    /// `notes` and `settings` by name.
    pub fn with_launcher(width: u32, height: u32) -> Scene {
        let mut scene = Scene::three_screen(width, height);
        let field = Widget {
            label: "Search".into(),
            kind: ElementKind::Field,
            rect: Rect::new(width * 30 / 100, height * 20 / 100, width * 40 / 100, (height * 8 / 100).max(16)),
            fill: [180, 180, 200],
            target: None,
        };
        scene.screens.push(Screen {
            name: "launcher".into(),
            background: [110, 110, 150],
            widgets: vec![field],
        });
        scene.launcher = Some(Launcher {
            screen: "launcher".into(),
            apps: [("notes", "notes"), ("settings", "settings")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        });
        scene
    }
}
