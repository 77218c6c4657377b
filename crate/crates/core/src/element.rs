use serde::{Deserialize, Serialize};

use crate::geometry::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    #[default]
    Button,
    Text,
    Icon,
    Field,
    Other,
}

/// A recognized on-screen element. `bbox` is in content-space pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiElement {
    pub id: u32,
    pub kind: ElementKind,
    pub bbox: Rect,
    #[serde(default)]
    pub content: Option<String>,
}

impl UiElement {
    pub fn center(&self) -> (u32, u32) {
        self.bbox.center()
    }
}
