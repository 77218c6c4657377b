//! Visual log and the localhost HTTP service built on it.
//!
//! Endpoints (all JSON bodies carry `"v": 1`):
//!
//! | method | path | returns |
//! |---|---|---|
//! | GET | `/log?since=N` | entries with `seq > N` |
//! | GET | `/frame/{id}` | stored PNG |
//! | GET | `/frame/latest` | fresh PNG with `X-Frame-Id`, `X-Content-Offset`, `X-Content-Size` |
//! | GET | `/accessible` | recognized elements with click actions |
//! | POST | `/action` | forwards a click, text or key chord |
//! | GET | `/status` | calibration, connection and content geometry |

mod action;
mod log;
mod server;

pub use action::{handle_action, ActionKind, ActionRequest, ActionSource};
pub use log::{LogEntry, LogError, VisualLog};
pub use server::{router, run_until_interrupted, serve, spawn, GatewayConfig, GatewayHandle, GatewayState};
