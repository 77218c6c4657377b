use serde::{Deserialize, Serialize};

use super::{CaptureError, Frame};
use crate::geometry::{ContentPoint, Rect};

/// A pixel counts as black when every channel is at or below this value.
pub const BLACK_THRESHOLD: u8 = 12;

/// Where the active content sits inside a raw capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContentGeometry {
    pub offset_x: u32,
    pub offset_y: u32,
    pub content_width: u32,
    pub content_height: u32,
}

impl ContentGeometry {
    pub fn full(width: u32, height: u32) -> Self {
        ContentGeometry {
            offset_x: 0,
            offset_y: 0,
            content_width: width,
            content_height: height,
        }
    }

    pub fn rect(&self) -> Rect {
        Rect::new(
            self.offset_x,
            self.offset_y,
            self.content_width,
            self.content_height,
        )
    }

    pub fn contains(&self, p: ContentPoint) -> bool {
        p.x < self.content_width && p.y < self.content_height
    }

    /// Maps a content-space point back into raw-capture coordinates.
    pub fn to_raw(&self, p: ContentPoint) -> (u32, u32) {
        (p.x + self.offset_x, p.y + self.offset_y)
    }
}

/// Centered aspect-preserving fit of a `src_w x src_h` screen into an
/// `out_w x out_h` capture.
pub fn aspect_fit(src_w: u32, src_h: u32, out_w: u32, out_h: u32) -> ContentGeometry {
    let scale = (out_w as f64 / src_w as f64).min(out_h as f64 / src_h as f64);
    let w = ((src_w as f64 * scale).round() as u32).clamp(1, out_w);
    let h = ((src_h as f64 * scale).round() as u32).clamp(1, out_h);
    ContentGeometry {
        offset_x: (out_w - w) / 2,
        offset_y: (out_h - h) / 2,
        content_width: w,
        content_height: h,
    }
}

fn is_black(px: &[u8]) -> bool {
    px.iter().all(|c| *c <= BLACK_THRESHOLD)
}

fn row_black(frame: &Frame, y: u32, x0: u32, x1: u32) -> bool {
    frame.row(y)[x0 as usize * 3..x1 as usize * 3]
        .chunks_exact(3)
        .all(is_black)
}

fn col_black(frame: &Frame, x: u32, y0: u32, y1: u32) -> bool {
    (y0..y1).all(|y| is_black(&frame.pixel(x, y)))
}

/// Strips uniformly black rows and columns from each edge.
///
/// Interior black regions are kept: only full rows/columns that are black
/// from edge to edge count as framing.
pub fn crop_letterbox(frame: &Frame) -> Result<(Frame, ContentGeometry), CaptureError> {
    let (w, h) = frame.dimensions();
    if w == 0 || h == 0 {
        return Err(CaptureError::InvalidFrame("empty frame".into()));
    }
    let mut top = 0;
    while top < h && row_black(frame, top, 0, w) {
        top += 1;
    }
    if top == h {
        return Err(CaptureError::AllBlackFrame);
    }
    let mut bottom = h;
    while bottom > top && row_black(frame, bottom - 1, 0, w) {
        bottom -= 1;
    }
    let mut left = 0;
    while left < w && col_black(frame, left, top, bottom) {
        left += 1;
    }
    let mut right = w;
    while right > left && col_black(frame, right - 1, top, bottom) {
        right -= 1;
    }
    let geometry = ContentGeometry {
        offset_x: left,
        offset_y: top,
        content_width: right - left,
        content_height: bottom - top,
    };
    let content = if geometry.rect() == frame.bounds() {
        frame.clone()
    } else {
        frame.crop(geometry.rect())?
    };
    Ok((content, geometry))
}
