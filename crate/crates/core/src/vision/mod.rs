//! Pixel-space analysis on captured frames: change detection, template
//! search and directional cursor tracking.
//!
//! Everything here is a pure function of immutable frames.

mod cursor;
mod diff;
mod patch;

use thiserror::Error;

pub use cursor::{changed_components, detect_cursor_displacement, detect_cursor_motion, Axis, Blob, CursorMotion};
pub use diff::{changed_mask, diff_mask_png, gui_diff, DiffRegion, DEFAULT_PIXEL_THRESHOLD};
pub use patch::{patch_location, MatchResult, DEFAULT_SCORE_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VisionError {
    #[error("frame sizes differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("patch {patch:?} does not fit in screenshot {screen:?}")]
    PatchLargerThanScreen { patch: (u32, u32), screen: (u32, u32) },
    #[error("cursor not found")]
    CursorNotFound,
    #[error("ambiguous motion: {candidates} equally plausible cursor pairs")]
    AmbiguousMotion { candidates: usize },
}
