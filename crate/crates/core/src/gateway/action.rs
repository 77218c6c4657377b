use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::control::{ControlError, Controller};
use crate::geometry::ContentPoint;
use crate::protocol::{Button, Key};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ActionSource {
    Ui,
    #[default]
    Api,
}

/// What an action does; coordinates are content-space pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionKind {
    Click { x: u32, y: u32, button: Button },
    Type { text: String },
    Key { keys: Vec<Key> },
}

/// A forwarded input action, as posted to `/action`:
///
/// ```json
/// {"v": 1, "kind": "click", "x": 150, "y": 80, "source": "ui"}
/// {"v": 1, "kind": "type", "text": "todo list"}
/// {"v": 1, "kind": "key", "keys": ["cmd", "space"]}
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionRequest {
    pub kind: ActionKind,
    pub source: ActionSource,
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value, String> {
    obj.get(name).ok_or_else(|| format!("missing {name:?}"))
}

fn coordinate(obj: &Map<String, Value>, name: &str) -> Result<u32, String> {
    field(obj, name)?
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| format!("{name:?} must be a non-negative integer"))
}

impl ActionRequest {
    pub fn click(x: u32, y: u32) -> Self {
        ActionRequest {
            kind: ActionKind::Click {
                x,
                y,
                button: Button::Left,
            },
            source: ActionSource::Api,
        }
    }

    /// Strict parse: every field must belong to the request's kind.
    pub fn from_json(value: &Value) -> Result<ActionRequest, String> {
        let obj = value.as_object().ok_or("request must be a JSON object")?;
        if let Some(v) = obj.get("v") {
            if v.as_u64() != Some(1) {
                return Err("unsupported version".into());
            }
        }
        let source = match obj.get("source") {
            None => ActionSource::Api,
            Some(s) => serde_json::from_value(s.clone()).map_err(|_| "\"source\" must be \"ui\" or \"api\"")?,
        };
        let kind_name = field(obj, "kind")?.as_str().ok_or("\"kind\" must be a string")?;
        let allowed: &[&str] = match kind_name {
            "click" => &["x", "y", "button"],
            "type" => &["text"],
            "key" => &["keys"],
            other => return Err(format!("unknown kind {other:?}")),
        };
        if let Some(extra) = obj
            .keys()
            .find(|k| !["v", "kind", "source"].contains(&k.as_str()) && !allowed.contains(&k.as_str()))
        {
            return Err(format!("field {extra:?} does not belong to a {kind_name} action"));
        }
        let kind = match kind_name {
            "click" => ActionKind::Click {
                x: coordinate(obj, "x")?,
                y: coordinate(obj, "y")?,
                button: match obj.get("button") {
                    None => Button::Left,
                    Some(b) => b
                        .as_str()
                        .and_then(|s| s.parse().ok())
                        .ok_or("\"button\" must be \"left\" or \"right\"")?,
                },
            },
            "type" => ActionKind::Type {
                text: field(obj, "text")?
                    .as_str()
                    .ok_or("\"text\" must be a string")?
                    .to_string(),
            },
            _ => {
                let names = field(obj, "keys")?.as_array().ok_or("\"keys\" must be an array")?;
                if names.is_empty() {
                    return Err("\"keys\" is empty".into());
                }
                let keys = names
                    .iter()
                    .map(|n| {
                        let n = n.as_str().ok_or("key names must be strings")?;
                        Key::parse(n).map_err(|e| e.to_string())
                    })
                    .collect::<Result<Vec<_>, String>>()?;
                ActionKind::Key { keys }
            }
        };
        Ok(ActionRequest { kind, source })
    }
}

/// Dispatches an action to the controller exactly as a direct call would.
pub fn handle_action(ctl: &mut Controller, req: &ActionRequest) -> Result<(), ControlError> {
    match &req.kind {
        ActionKind::Click { x, y, button } => ctl.click_mouse(ContentPoint::new(*x, *y), *button),
        ActionKind::Type { text } => ctl.type_text(text),
        ActionKind::Key { keys } => ctl.keypress(keys),
    }
}
