use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::VisionError;
use crate::capture::Frame;

/// Per-channel intensity difference above which a pixel counts as changed.
pub const DEFAULT_PIXEL_THRESHOLD: u8 = 16;

/// Bounding box of all changed pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffRegion {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
    pub changed_fraction: f64,
}

fn check_dims(a: &Frame, b: &Frame) -> Result<(), VisionError> {
    if a.dimensions() != b.dimensions() {
        return Err(VisionError::DimensionMismatch {
            a: a.dimensions(),
            b: b.dimensions(),
        });
    }
    Ok(())
}

/// Row-major changed-pixel mask.
pub fn changed_mask(a: &Frame, b: &Frame, threshold: u8) -> Result<Vec<bool>, VisionError> {
    check_dims(a, b)?;
    let w = a.width() as usize;
    let mut mask = vec![false; w * a.height() as usize];
    if w == 0 {
        return Ok(mask);
    }
    mask.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let (ra, rb) = (a.row(y as u32), b.row(y as u32));
        for (x, m) in row.iter_mut().enumerate() {
            let i = x * 3;
            *m = (0..3).any(|c| ra[i + c].abs_diff(rb[i + c]) > threshold);
        }
    });
    Ok(mask)
}

/// Location and size of the difference between two same-sized frames, or
/// `None` when no pixel differs by more than `threshold` in any channel.
pub fn gui_diff(a: &Frame, b: &Frame, threshold: u8) -> Result<Option<DiffRegion>, VisionError> {
    let mask = changed_mask(a, b, threshold)?;
    let w = a.width() as usize;
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    let mut count = 0u64;
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        let (x, y) = (i % w, i / w);
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
        count += 1;
    }
    if count == 0 {
        return Ok(None);
    }
    Ok(Some(DiffRegion {
        x: x0 as u32,
        y: y0 as u32,
        width: (x1 - x0 + 1) as u32,
        height: (y1 - y0 + 1) as u32,
        changed_fraction: count as f64 / mask.len() as f64,
    }))
}

/// Debug rendering of the changed mask: white where changed, black elsewhere.
pub fn diff_mask_png(a: &Frame, b: &Frame, threshold: u8) -> Result<Vec<u8>, VisionError> {
    let mask = changed_mask(a, b, threshold)?;
    let pixels = mask
        .iter()
        .flat_map(|m| if *m { [255u8; 3] } else { [0u8; 3] })
        .collect();
    let frame = Frame::new(a.width(), a.height(), pixels).expect("mask matches frame size");
    Ok(frame.to_png())
}
