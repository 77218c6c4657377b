//! Newline-delimited JSON framing for commands and responses.
//!
//! Encoding is canonical: `"type"` comes first, followed by the remaining
//! fields in a fixed order, with `", "` and `": "` separators. Decoding
//! accepts any field order and ignores unknown fields.

use serde_json::{Map, Value};

use super::command::{validate_text, Button, HidCommand, Key, Special};
use super::ProtocolError;

/// Acknowledgement returned by the device for every command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HidResponse {
    Success,
    Error(String),
}

impl HidResponse {
    pub fn is_success(&self) -> bool {
        matches!(self, HidResponse::Success)
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Encodes a command as one JSON object followed by a single `\n`.
pub fn encode_command(cmd: &HidCommand) -> Vec<u8> {
    let mut out = format!("{{\"type\": {}", json_str(cmd.type_name()));
    match cmd {
        HidCommand::Home => {}
        HidCommand::MoveTo { x, y } => out.push_str(&format!(", \"x\": {x}, \"y\": {y}")),
        HidCommand::Click { x, y, button } => {
            out.push_str(&format!(", \"x\": {x}, \"y\": {y}"));
            if *button != Button::Left {
                out.push_str(&format!(", \"button\": {}", json_str(button.as_str())));
            }
        }
        HidCommand::Type { text } => out.push_str(&format!(", \"text\": {}", json_str(text))),
        HidCommand::Key { keys } => {
            let names: Vec<String> = keys.iter().map(|k| json_str(&k.name())).collect();
            out.push_str(&format!(", \"keys\": [{}]", names.join(", ")));
        }
        HidCommand::Special { name } => {
            out.push_str(&format!(", \"name\": {}", json_str(name.name())))
        }
    }
    out.push_str("}\n");
    out.into_bytes()
}

pub fn encode_response(resp: &HidResponse) -> Vec<u8> {
    let line = match resp {
        HidResponse::Success => "{\"result\": \"success\"}\n".to_string(),
        HidResponse::Error(msg) => {
            format!("{{\"result\": \"error\", \"message\": {}}}\n", json_str(msg))
        }
    };
    line.into_bytes()
}

fn line_text(line: &[u8]) -> String {
    String::from_utf8_lossy(line).trim_end_matches(['\n', '\r']).to_string()
}

fn parse_object(line: &[u8]) -> Result<Map<String, Value>, ProtocolError> {
    let text = line_text(line);
    let malformed = |reason: String| ProtocolError::MalformedLine {
        line: text.clone(),
        reason,
    };
    let body = std::str::from_utf8(line).map_err(|e| malformed(e.to_string()))?;
    let body = body.trim_end_matches(['\n', '\r']);
    if body.contains('\n') {
        return Err(malformed("interior newline".into()));
    }
    if body.trim().is_empty() {
        return Err(malformed("empty line".into()));
    }
    match serde_json::from_str::<Value>(body) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(malformed("not a JSON object".into())),
        Err(e) => Err(malformed(e.to_string())),
    }
}

fn coord(map: &Map<String, Value>, field: &'static str, line: &str) -> Result<u32, ProtocolError> {
    let invalid = |reason: String| ProtocolError::InvalidField {
        field,
        reason,
        line: Some(line.to_string()),
    };
    match map.get(field) {
        None => Err(invalid("missing".into())),
        Some(Value::Number(n)) => {
            if let Some(v) = n.as_u64() {
                u32::try_from(v).map_err(|_| invalid(format!("{v} out of range")))
            } else if n.as_i64().is_some_and(|v| v < 0) || n.as_f64().is_some_and(|v| v < 0.0) {
                Err(invalid(format!("negative coordinate {n}")))
            } else {
                Err(invalid(format!("{n} is not an integer")))
            }
        }
        Some(other) => Err(invalid(format!("expected integer, got {other}"))),
    }
}

fn string_field<'a>(
    map: &'a Map<String, Value>,
    field: &'static str,
    line: &str,
) -> Result<&'a str, ProtocolError> {
    match map.get(field) {
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(ProtocolError::InvalidField {
            field,
            reason: format!("expected string, got {other}"),
            line: Some(line.to_string()),
        }),
        None => Err(ProtocolError::InvalidField {
            field,
            reason: "missing".into(),
            line: Some(line.to_string()),
        }),
    }
}

/// Decodes one command line. The trailing newline is optional.
pub fn decode_command(line: &[u8]) -> Result<HidCommand, ProtocolError> {
    let map = parse_object(line)?;
    let text = line_text(line);
    let ty = match map.get("type") {
        Some(Value::String(s)) => s.as_str(),
        Some(_) => {
            return Err(ProtocolError::MalformedLine {
                line: text,
                reason: "\"type\" is not a string".into(),
            })
        }
        None => {
            return Err(ProtocolError::MalformedLine {
                line: text,
                reason: "missing \"type\"".into(),
            })
        }
    };
    let attach = |e: ProtocolError| e.with_line(&text);
    match ty {
        "home" => Ok(HidCommand::Home),
        "moveto" => Ok(HidCommand::MoveTo {
            x: coord(&map, "x", &text)?,
            y: coord(&map, "y", &text)?,
        }),
        "click" => {
            let button = match map.get("button") {
                None | Some(Value::Null) => Button::Left,
                Some(_) => string_field(&map, "button", &text)?
                    .parse()
                    .map_err(attach)?,
            };
            Ok(HidCommand::Click {
                x: coord(&map, "x", &text)?,
                y: coord(&map, "y", &text)?,
                button,
            })
        }
        "type" => {
            let s = string_field(&map, "text", &text)?;
            validate_text(s).map_err(attach)?;
            Ok(HidCommand::Type {
                text: s.to_string(),
            })
        }
        "key" => {
            let items = match map.get("keys") {
                Some(Value::Array(items)) => items,
                _ => {
                    return Err(ProtocolError::InvalidField {
                        field: "keys",
                        reason: "expected an array of key names".into(),
                        line: Some(text),
                    })
                }
            };
            let mut keys = Vec::with_capacity(items.len());
            for item in items {
                let name = item.as_str().ok_or_else(|| ProtocolError::InvalidField {
                    field: "keys",
                    reason: format!("expected string, got {item}"),
                    line: Some(text.clone()),
                })?;
                keys.push(Key::parse(name).map_err(attach)?);
            }
            HidCommand::key(keys).map_err(attach)
        }
        "special" => {
            let name: Special = string_field(&map, "name", &text)?
                .parse()
                .map_err(attach)?;
            Ok(HidCommand::Special { name })
        }
        other => Err(ProtocolError::UnknownCommandType {
            ty: other.to_string(),
            line: text,
        }),
    }
}

pub fn decode_response(line: &[u8]) -> Result<HidResponse, ProtocolError> {
    let map = parse_object(line)?;
    let text = line_text(line);
    match map.get("result").and_then(Value::as_str) {
        Some("success") => Ok(HidResponse::Success),
        Some("error") => {
            let message = match map.get("message") {
                Some(Value::String(m)) => m.clone(),
                _ => String::new(),
            };
            Ok(HidResponse::Error(message))
        }
        Some(other) => Err(ProtocolError::MalformedLine {
            line: text,
            reason: format!("unknown result {other:?}"),
        }),
        None => Err(ProtocolError::MalformedLine {
            line: text,
            reason: "missing \"result\"".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn enc(cmd: &HidCommand) -> String {
        String::from_utf8(encode_command(cmd)).unwrap()
    }

    #[test]
    fn golden_click_line() {
        assert_eq!(
            enc(&HidCommand::click(121, 2145)),
            "{\"type\": \"click\", \"x\": 121, \"y\": 2145}\n"
        );
    }

    #[test]
    fn golden_other_lines() {
        assert_eq!(
            enc(&HidCommand::MoveTo { x: 0, y: 0 }),
            "{\"type\": \"moveto\", \"x\": 0, \"y\": 0}\n"
        );
        assert_eq!(
            enc(&HidCommand::Special { name: Special::Run }),
            "{\"type\": \"special\", \"name\": \"run\"}\n"
        );
        assert_eq!(
            enc(&HidCommand::Click {
                x: 1,
                y: 2,
                button: Button::Right
            }),
            "{\"type\": \"click\", \"x\": 1, \"y\": 2, \"button\": \"right\"}\n"
        );
        assert_eq!(
            enc(&HidCommand::key(vec![Key::Cmd, Key::Space]).unwrap()),
            "{\"type\": \"key\", \"keys\": [\"cmd\", \"space\"]}\n"
        );
        assert_eq!(enc(&HidCommand::Home), "{\"type\": \"home\"}\n");
    }

    #[test]
    fn decode_any_order() {
        assert_eq!(
            decode_command(b"{\"x\": 121, \"type\": \"click\", \"y\": 2145}\n").unwrap(),
            HidCommand::click(121, 2145)
        );
        assert_eq!(
            decode_command(b"{\"type\": \"moveto\", \"y\": 3, \"x\": 4, \"speed\": 9}").unwrap(),
            HidCommand::MoveTo { x: 4, y: 3 }
        );
    }

    #[test]
    fn decode_rejections() {
        assert!(matches!(
            decode_command(b"{\"type\": \"warp\"}\n"),
            Err(ProtocolError::UnknownCommandType { ty, .. }) if ty == "warp"
        ));
        let err = decode_command(b"{\"type\": \"click\", \"x\": -5, \"y\": 1}\n").unwrap_err();
        assert!(matches!(err, ProtocolError::InvalidField { field: "x", .. }));
        assert_eq!(
            err.line(),
            Some("{\"type\": \"click\", \"x\": -5, \"y\": 1}")
        );
        assert!(matches!(
            decode_command(b"{\"type\": \"click\", \"x\": 1.5, \"y\": 1}"),
            Err(ProtocolError::InvalidField { field: "x", .. })
        ));
        assert!(matches!(
            decode_command(b"not json\n"),
            Err(ProtocolError::MalformedLine { .. })
        ));
        assert!(matches!(
            decode_command(b"{\"x\": 1}\n"),
            Err(ProtocolError::MalformedLine { .. })
        ));
        assert!(matches!(
            decode_command(b"{\"type\": \"key\", \"keys\": [\"bogus\"]}\n"),
            Err(ProtocolError::UnknownKey { .. })
        ));
        assert!(matches!(
            decode_command(b"{\"type\": \"type\", \"text\": \"\\u00e9\"}\n"),
            Err(ProtocolError::InvalidField { field: "text", .. })
        ));
    }

    #[test]
    fn responses() {
        assert_eq!(
            decode_response(b"{\"result\": \"success\"}\n").unwrap(),
            HidResponse::Success
        );
        assert_eq!(
            decode_response(b"{\"result\": \"error\", \"message\": \"unknown key\"}\n").unwrap(),
            HidResponse::Error("unknown key".into())
        );
        assert!(matches!(
            decode_response(b"\n"),
            Err(ProtocolError::MalformedLine { .. })
        ));
        for resp in [HidResponse::Success, HidResponse::Error("bad \"x\"".into())] {
            assert_eq!(decode_response(&encode_response(&resp)).unwrap(), resp);
        }
    }

    pub(crate) fn arb_key() -> impl Strategy<Value = Key> {
        prop_oneof![
            prop::sample::select(vec![
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
            ]),
            (1u8..=12).prop_map(Key::F),
            (0x20u8..=0x7e).prop_map(|b| Key::Char(b as char)),
        ]
    }

    fn arb_command() -> impl Strategy<Value = HidCommand> {
        prop_oneof![
            Just(HidCommand::Home),
            (any::<u32>(), any::<u32>()).prop_map(|(x, y)| HidCommand::MoveTo { x, y }),
            (any::<u32>(), any::<u32>(), any::<bool>()).prop_map(|(x, y, r)| {
                HidCommand::Click {
                    x,
                    y,
                    button: if r { Button::Right } else { Button::Left },
                }
            }),
            "[ -~\n\t]{0,40}".prop_map(|text| HidCommand::Type { text }),
            prop::collection::vec(arb_key(), 1..5).prop_map(|keys| HidCommand::Key { keys }),
            prop::sample::select(vec![Special::Run, Special::ScreenshotHost])
                .prop_map(|name| HidCommand::Special { name }),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(cmd in arb_command()) {
            let bytes = encode_command(&cmd);
            prop_assert_eq!(bytes.iter().filter(|b| **b == b'\n').count(), 1);
            prop_assert_eq!(*bytes.last().unwrap(), b'\n');
            prop_assert_eq!(decode_command(&bytes).unwrap(), cmd);
        }
    }
}
