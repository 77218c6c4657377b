use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::VisionError;
use crate::capture::Frame;

/// Largest normalized mean absolute difference accepted as a match.
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.02;

/// Number of patch pixels used for the cheap lower-bound pass.
const PROBE_PIXELS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
    /// Mean absolute per-channel difference, scaled to `[0, 1]`.
    pub score: f64,
}

/// Exhaustive template search minimizing the sum of absolute differences.
///
/// Returns the best placement when its score is at most `threshold`; ties
/// go to the smallest `y`, then the smallest `x`. Internally a partial sum
/// over a few probe pixels (a lower bound of the full sum) orders and prunes
/// the candidates, which leaves the result identical to a plain scan.
pub fn patch_location(
    patch: &Frame,
    screenshot: &Frame,
    threshold: f64,
) -> Result<Option<MatchResult>, VisionError> {
    let (pw, ph) = patch.dimensions();
    let (sw, sh) = screenshot.dimensions();
    if pw == 0 || ph == 0 || pw > sw || ph > sh {
        return Err(VisionError::PatchLargerThanScreen {
            patch: (pw, ph),
            screen: (sw, sh),
        });
    }
    let samples = pw as u64 * ph as u64 * 3;
    let norm = samples as f64 * 255.0;
    let budget = if threshold < 0.0 {
        return Ok(None);
    } else {
        (threshold * norm).floor() as u64
    };

    let npix = (pw * ph) as usize;
    let probes: Vec<(u32, u32)> = (0..PROBE_PIXELS.min(npix))
        .map(|k| {
            let i = (k * npix + npix / 2) / PROBE_PIXELS.min(npix);
            ((i % pw as usize) as u32, (i / pw as usize) as u32)
        })
        .collect();

    let (nx, ny) = (sw - pw + 1, sh - ph + 1);
    let mut candidates: Vec<(u64, u32, u32)> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|y| {
            let probes = &probes;
            (0..nx).filter_map(move |x| {
                let mut partial = 0u64;
                for &(px, py) in probes {
                    partial += pixel_sad(patch.pixel(px, py), screenshot.pixel(x + px, y + py));
                    if partial > budget {
                        return None;
                    }
                }
                Some((partial, y, x))
            })
        })
        .collect();
    candidates.sort_unstable();

    let mut best: Option<(u64, u32, u32)> = None;
    for &(partial, y, x) in &candidates {
        let limit = best.map_or(budget, |b| b.0);
        if partial > limit {
            break;
        }
        if let Some(sad) = full_sad(patch, screenshot, x, y, limit) {
            let better = match best {
                None => true,
                Some(b) => sad < b.0 || (sad == b.0 && (y, x) < (b.1, b.2)),
            };
            if better {
                best = Some((sad, y, x));
            }
        }
    }
    Ok(best.map(|(sad, y, x)| MatchResult {
        x,
        y,
        width: pw,
        height: ph,
        score: sad as f64 / norm,
    }))
}

#[inline]
fn pixel_sad(a: [u8; 3], b: [u8; 3]) -> u64 {
    (a[0].abs_diff(b[0]) as u64) + (a[1].abs_diff(b[1]) as u64) + (a[2].abs_diff(b[2]) as u64)
}

/// Full SAD at `(x, y)`, or `None` once it exceeds `limit`.
fn full_sad(patch: &Frame, screen: &Frame, x: u32, y: u32, limit: u64) -> Option<u64> {
    let row_len = patch.width() as usize * 3;
    let start = x as usize * 3;
    let mut sad = 0u64;
    for py in 0..patch.height() {
        let a = patch.row(py);
        let b = &screen.row(y + py)[start..start + row_len];
        sad += a
            .iter()
            .zip(b)
            .map(|(p, q)| p.abs_diff(*q) as u64)
            .sum::<u64>();
        if sad > limit {
            return None;
        }
    }
    Some(sad)
}
