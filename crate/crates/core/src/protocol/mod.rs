//! The JSON-over-serial command protocol spoken between the control computer
//! and the HID bridge.
//!
//! Every command is one JSON object on one line, answered by exactly one
//! response line:
//!
//! ```text
//! send:    {"type": "click", "x": 121, "y": 2145}
//! receive: {"result": "success"}
//! ```

mod codec;
mod command;
pub mod pipe;
pub mod serial;
mod session;

pub use codec::{decode_command, decode_response, encode_command, encode_response, HidResponse};
pub use command::{is_typeable, Button, HidCommand, Key, Special};
pub use session::{
    read_line_bounded, LineRead, RecordingTransport, Session, SessionConfig, SessionError, StreamTransport,
    Transport,
};

use thiserror::Error;

/// Errors raised while building, encoding or decoding protocol lines.
///
/// Decoding errors carry the offending line so it can be logged verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("malformed line ({reason}): {line}")]
    MalformedLine { line: String, reason: String },

    #[error("unknown command type {ty:?}: {line}")]
    UnknownCommandType { ty: String, line: String },

    #[error("invalid field {field:?}: {reason}")]
    InvalidField {
        field: &'static str,
        reason: String,
        line: Option<String>,
    },

    #[error("unknown key {name:?}")]
    UnknownKey { name: String, line: Option<String> },

    #[error("encoded line is {len} bytes, limit is {max}")]
    LineTooLong { len: usize, max: usize },
}

impl ProtocolError {
    /// The wire line that triggered the error, when there was one.
    pub fn line(&self) -> Option<&str> {
        match self {
            ProtocolError::MalformedLine { line, .. }
            | ProtocolError::UnknownCommandType { line, .. } => Some(line),
            ProtocolError::InvalidField { line, .. } | ProtocolError::UnknownKey { line, .. } => {
                line.as_deref()
            }
            ProtocolError::LineTooLong { .. } => None,
        }
    }

    pub(crate) fn with_line(self, text: &str) -> Self {
        match self {
            ProtocolError::InvalidField { field, reason, .. } => ProtocolError::InvalidField {
                field,
                reason,
                line: Some(text.to_string()),
            },
            ProtocolError::UnknownKey { name, .. } => ProtocolError::UnknownKey {
                name,
                line: Some(text.to_string()),
            },
            other => other,
        }
    }
}
