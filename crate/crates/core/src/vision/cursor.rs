use serde::{Deserialize, Serialize};

use super::diff::{changed_mask, DEFAULT_PIXEL_THRESHOLD};
use super::VisionError;
use crate::capture::Frame;
use crate::geometry::Rect;

/// Largest centroid offset across the motion axis for an old/new pair.
const OFF_AXIS_TOLERANCE: f64 = 3.0;
/// A competing pair whose area similarity reaches this fraction of the best
/// one makes the result ambiguous.
const AMBIGUITY_RATIO: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// One 8-connected component of changed pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub area: u64,
    pub centroid: (f64, f64),
    pub bbox: Rect,
}

impl Blob {
    fn along(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Horizontal => self.centroid.0,
            Axis::Vertical => self.centroid.1,
        }
    }

    fn across(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Horizontal => self.centroid.1,
            Axis::Vertical => self.centroid.0,
        }
    }
}

/// The cursor footprints matched between two frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CursorMotion {
    /// Signed on-axis centroid displacement in pixels.
    pub displacement: f64,
    pub before: Blob,
    pub after: Blob,
}

/// Groups the changed pixels between `a` and `b` into 8-connected blobs,
/// in raster order of their first pixel.
pub fn changed_components(a: &Frame, b: &Frame, threshold: u8) -> Result<Vec<Blob>, VisionError> {
    let mask = changed_mask(a, b, threshold)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    let mut seen = vec![false; mask.len()];
    let mut blobs = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut n, mut sx, mut sy) = (0u64, 0u64, 0u64);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            n += 1;
            sx += x as u64;
            sy += y as u64;
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        blobs.push(Blob {
            area: n,
            centroid: (sx as f64 / n as f64, sy as f64 / n as f64),
            bbox: Rect::new(x0 as u32, y0 as u32, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32),
        });
    }
    Ok(blobs)
}

/// Finds the cursor's old and new footprints for a move along one axis.
///
/// Blobs are paired as (old, new) when their centroids line up across the
/// axis within 3 px and the on-axis offset has the expected sign. Of the
/// valid pairs the one with the most similar areas wins.
pub fn detect_cursor_motion(
    before: &Frame,
    after: &Frame,
    axis: Axis,
    positive: bool,
) -> Result<CursorMotion, VisionError> {
    let blobs = changed_components(before, after, DEFAULT_PIXEL_THRESHOLD)?;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, old) in blobs.iter().enumerate() {
        for (j, new) in blobs.iter().enumerate() {
            if i == j || (old.across(axis) - new.across(axis)).abs() > OFF_AXIS_TOLERANCE {
                continue;
            }
            let d = new.along(axis) - old.along(axis);
            if d == 0.0 || (d > 0.0) != positive {
                continue;
            }
            let similarity = old.area.min(new.area) as f64 / old.area.max(new.area) as f64;
            pairs.push((similarity, i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let Some(&(best, i, j)) = pairs.first() else {
        return Err(VisionError::CursorNotFound);
    };
    let rivals = pairs[1..]
        .iter()
        .filter(|p| p.0 >= AMBIGUITY_RATIO * best)
        .count();
    if rivals > 0 {
        return Err(VisionError::AmbiguousMotion {
            candidates: rivals + 1,
        });
    }
    let (old, new) = (blobs[i], blobs[j]);
    Ok(CursorMotion {
        displacement: new.along(axis) - old.along(axis),
        before: old,
        after: new,
    })
}

/// On-axis cursor displacement in pixels between two frames.
pub fn detect_cursor_displacement(
    before: &Frame,
    after: &Frame,
    axis: Axis,
    positive: bool,
) -> Result<f64, VisionError> {
    detect_cursor_motion(before, after, axis, positive).map(|m| m.displacement)
}
