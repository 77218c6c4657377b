use std::fmt;
use std::str::FromStr;

use super::ProtocolError;

/// Mouse button carried by a click command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Button {
    #[default]
    Left,
    Right,
}

impl Button {
    pub fn as_str(self) -> &'static str {
        match self {
            Button::Left => "left",
            Button::Right => "right",
        }
    }
}

impl FromStr for Button {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Button::Left),
            "right" => Ok(Button::Right),
            other => Err(ProtocolError::InvalidField {
                field: "button",
                reason: format!("unknown button {other:?}"),
                line: None,
            }),
        }
    }
}

/// A key name from the published key table.
///
/// Named keys cover modifiers, editing and navigation keys and F1-F12. Any
/// single printable ASCII character is also a key (`"a"`, `"+"`, `" "`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Key {
    Ctrl,
    Alt,
    Cmd,
    Shift,
    Space,
    Enter,
    Esc,
    Tab,
    Backspace,
    Delete,
    Up,
    Down,
    Left,
    Right,
    /// Function key F1..=F12.
    F(u8),
    /// A single printable ASCII character.
    Char(char),
}

const NAMED_KEYS: &[(&str, Key)] = &[
    ("ctrl", Key::Ctrl),
    ("alt", Key::Alt),
    ("cmd", Key::Cmd),
    ("shift", Key::Shift),
    ("space", Key::Space),
    ("enter", Key::Enter),
    ("esc", Key::Esc),
    ("tab", Key::Tab),
    ("backspace", Key::Backspace),
    ("delete", Key::Delete),
    ("up", Key::Up),
    ("down", Key::Down),
    ("left", Key::Left),
    ("right", Key::Right),
];

impl Key {
    pub fn parse(name: &str) -> Result<Key, ProtocolError> {
        if let Some((_, key)) = NAMED_KEYS.iter().find(|(n, _)| *n == name) {
            return Ok(*key);
        }
        if let Some(num) = name.strip_prefix('f') {
            if let Ok(n) = num.parse::<u8>() {
                if (1..=12).contains(&n) && num == n.to_string() {
                    return Ok(Key::F(n));
                }
            }
        }
        let mut chars = name.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if is_printable_ascii(c) {
                return Ok(Key::Char(c));
            }
        }
        Err(ProtocolError::UnknownKey {
            name: name.to_string(),
            line: None,
        })
    }

    /// Parses a `+`-separated chord such as `cmd+space`. A literal plus key
    /// is written as a trailing `+` (`shift++`).
    pub fn parse_chord(chord: &str) -> Result<Vec<Key>, ProtocolError> {
        if chord.is_empty() {
            return Err(ProtocolError::InvalidField {
                field: "keys",
                reason: "empty chord".into(),
                line: None,
            });
        }
        let mut keys = Vec::new();
        let mut rest = chord;
        while !rest.is_empty() {
            let (name, tail) = match rest.find('+') {
                Some(0) => ("+", rest[1..].strip_prefix('+').unwrap_or(&rest[1..])),
                Some(i) => (&rest[..i], &rest[i + 1..]),
                None => (rest, ""),
            };
            keys.push(Key::parse(name)?);
            rest = tail;
        }
        Ok(keys)
    }

    pub fn name(&self) -> String {
        match self {
            Key::F(n) => format!("f{n}"),
            Key::Char(c) => c.to_string(),
            named => NAMED_KEYS
                .iter()
                .find(|(_, k)| k == named)
                .map(|(n, _)| (*n).to_string())
                .expect("every named key is in the table"),
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Key {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Key::parse(s)
    }
}

/// Device-side shortcuts invoked by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Special {
    /// cmd/windows + space.
    Run,
    /// The host platform's screenshot chord (cmd+shift+3).
    ScreenshotHost,
}

impl Special {
    pub fn name(self) -> &'static str {
        match self {
            Special::Run => "run",
            Special::ScreenshotHost => "screenshot_host",
        }
    }

    /// The key chord the device emits for this special command.
    pub fn chord(self) -> Vec<Key> {
        match self {
            Special::Run => vec![Key::Cmd, Key::Space],
            Special::ScreenshotHost => vec![Key::Cmd, Key::Shift, Key::Char('3')],
        }
    }
}

impl FromStr for Special {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "run" => Ok(Special::Run),
            "screenshot_host" => Ok(Special::ScreenshotHost),
            other => Err(ProtocolError::InvalidField {
                field: "name",
                reason: format!("unknown special command {other:?}"),
                line: None,
            }),
        }
    }
}

/// One command on the serial wire. Coordinates are absolute HID units in the
/// device's homed frame, so they are unsigned by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HidCommand {
    Home,
    MoveTo { x: u32, y: u32 },
    Click { x: u32, y: u32, button: Button },
    Type { text: String },
    Key { keys: Vec<Key> },
    Special { name: Special },
}

impl HidCommand {
    pub fn click(x: u32, y: u32) -> Self {
        HidCommand::Click {
            x,
            y,
            button: Button::Left,
        }
    }

    /// Builds a type command, rejecting characters outside the US layout.
    pub fn type_text(text: impl Into<String>) -> Result<Self, ProtocolError> {
        let text = text.into();
        validate_text(&text)?;
        Ok(HidCommand::Type { text })
    }

    pub fn key(keys: Vec<Key>) -> Result<Self, ProtocolError> {
        if keys.is_empty() {
            return Err(ProtocolError::InvalidField {
                field: "keys",
                reason: "at least one key is required".into(),
                line: None,
            });
        }
        Ok(HidCommand::Key { keys })
    }

    /// Parses key names and builds a chord command.
    pub fn key_names<S: AsRef<str>>(names: &[S]) -> Result<Self, ProtocolError> {
        let keys = names
            .iter()
            .map(|n| Key::parse(n.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        HidCommand::key(keys)
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            HidCommand::Home => "home",
            HidCommand::MoveTo { .. } => "moveto",
            HidCommand::Click { .. } => "click",
            HidCommand::Type { .. } => "type",
            HidCommand::Key { .. } => "key",
            HidCommand::Special { .. } => "special",
        }
    }

    /// Target coordinates for pointer commands.
    pub fn coordinates(&self) -> Option<(u32, u32)> {
        match *self {
            HidCommand::MoveTo { x, y } | HidCommand::Click { x, y, .. } => Some((x, y)),
            _ => None,
        }
    }
}

pub(crate) fn is_printable_ascii(c: char) -> bool {
    (' '..='~').contains(&c)
}

/// Characters the US-layout usage table can produce.
pub fn is_typeable(c: char) -> bool {
    is_printable_ascii(c) || c == '\n' || c == '\t'
}

pub(crate) fn validate_text(text: &str) -> Result<(), ProtocolError> {
    match text.chars().find(|c| !is_typeable(*c)) {
        None => Ok(()),
        Some(c) => Err(ProtocolError::InvalidField {
            field: "text",
            reason: format!("character {c:?} has no US-layout key"),
            line: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_table() {
        assert_eq!(Key::parse("cmd").unwrap(), Key::Cmd);
        assert_eq!(Key::parse("f12").unwrap(), Key::F(12));
        assert_eq!(Key::parse("a").unwrap(), Key::Char('a'));
        assert_eq!(Key::parse(" ").unwrap(), Key::Char(' '));
        assert!(Key::parse("f13").is_err());
        assert!(Key::parse("f01").is_err());
        assert!(Key::parse("bogus").is_err());
        assert!(Key::parse("é").is_err());
        assert!(Key::parse("").is_err());
        for name in ["ctrl", "left", "f1", "z", "+"] {
            assert_eq!(Key::parse(name).unwrap().name(), name);
        }
    }

    #[test]
    fn chords() {
        assert_eq!(
            Key::parse_chord("cmd+space").unwrap(),
            vec![Key::Cmd, Key::Space]
        );
        assert_eq!(
            Key::parse_chord("shift++").unwrap(),
            vec![Key::Shift, Key::Char('+')]
        );
        assert_eq!(Key::parse_chord("a").unwrap(), vec![Key::Char('a')]);
        assert!(Key::parse_chord("cmd+bogus").is_err());
        assert!(Key::parse_chord("").is_err());
    }

    #[test]
    fn text_validation() {
        assert!(HidCommand::type_text("todo list").is_ok());
        assert!(HidCommand::type_text("line\n\tnext").is_ok());
        assert!(matches!(
            HidCommand::type_text("café"),
            Err(ProtocolError::InvalidField { field: "text", .. })
        ));
    }

    #[test]
    fn empty_chord_rejected() {
        assert!(HidCommand::key(vec![]).is_err());
        assert!(matches!(
            HidCommand::key_names(&["bogus"]),
            Err(ProtocolError::UnknownKey { .. })
        ));
    }
}
