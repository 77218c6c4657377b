use crate::capture::{aspect_fit, ContentGeometry, Frame, CAPTURE_HEIGHT, CAPTURE_WIDTH};
use crate::geometry::Rect;

use super::scene::{Scene, Screen, BORDER_COLOR, BORDER_WIDTH};

/// Peak per-channel amplitude of the wallpaper texture.
pub const TEXTURE_AMPLITUDE: i32 = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Texel {
    Clear,
    Solid([u8; 3]),
    /// Translucent tint blended over whatever lies beneath.
    Shade { rgb: [u8; 3], alpha: f32 },
}

/// A small cursor raster with the click hotspot inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct CursorSprite {
    pub width: u32,
    pub height: u32,
    pub hotspot: (u32, u32),
    pub texels: Vec<Texel>,
}

const ARROW: [&str; 12] = [
    "X.......",
    "XX......",
    "XoX.....",
    "XooX....",
    "XoooX...",
    "XooooX..",
    "XoooooX.",
    "XooooooX",
    "XoooXXXX",
    "XoXoX...",
    "XX.XoX..",
    "X...XX..",
];

impl CursorSprite {
    fn from_pattern(outline: Texel, fill: Texel) -> Self {
        let texels = ARROW
            .iter()
            .flat_map(|row| row.chars())
            .map(|c| match c {
                'X' => outline,
                'o' => fill,
                _ => Texel::Clear,
            })
            .collect();
        CursorSprite {
            width: 8,
            height: 12,
            hotspot: (0, 0),
            texels,
        }
    }

    /// 8x12 black-outlined white arrow, hotspot at the tip.
    pub fn arrow() -> Self {
        Self::from_pattern(Texel::Solid([0, 0, 0]), Texel::Solid([255, 255, 255]))
    }

    /// Low-contrast translucent arrow, like the pointer some phones draw.
    pub fn faint() -> Self {
        let shade = Texel::Shade {
            rgb: [0, 0, 0],
            alpha: 0.3,
        };
        Self::from_pattern(shade, shade)
    }

    pub fn texel(&self, x: u32, y: u32) -> Texel {
        self.texels[(y * self.width + x) as usize]
    }
}

#[inline]
fn mix(v: u32) -> u32 {
    let mut h = v.wrapping_mul(0x9E37_79B9);
    h ^= h >> 16;
    h = h.wrapping_mul(0x85EB_CA6B);
    h ^= h >> 13;
    h = h.wrapping_mul(0xC2B2_AE35);
    h ^ (h >> 16)
}

/// Deterministic per-pixel wallpaper offset in `[-A, A]` for each channel.
#[inline]
pub fn texture_offset(x: u32, y: u32) -> [i32; 3] {
    let h = mix(x.wrapping_mul(0x27D4_EB2F) ^ mix(y.wrapping_add(0x1656_67B1)));
    let span = (2 * TEXTURE_AMPLITUDE + 1) as u32;
    [
        (h & 0x3FF) % span,
        ((h >> 10) & 0x3FF) % span,
        ((h >> 20) & 0x3FF) % span,
    ]
    .map(|v| v as i32 - TEXTURE_AMPLITUDE)
}

#[inline]
fn textured(base: [u8; 3], x: u32, y: u32) -> [u8; 3] {
    let t = texture_offset(x, y);
    [0, 1, 2].map(|c| (base[c] as i32 + t[c]).clamp(0, 255) as u8)
}

/// The screen without pointer or clock, at native resolution.
pub(crate) fn render_screen(scene: &Scene, screen: &Screen) -> Frame {
    let (w, h) = (scene.width, scene.height);
    let mut frame = Frame::filled(w, h, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            frame.set_pixel(x, y, textured(screen.background, x, y));
        }
    }
    for widget in &screen.widgets {
        let r = widget.rect;
        for y in r.y..r.bottom() {
            for x in r.x..r.right() {
                let border = x < r.x + BORDER_WIDTH
                    || x >= r.right() - BORDER_WIDTH
                    || y < r.y + BORDER_WIDTH
                    || y >= r.bottom() - BORDER_WIDTH;
                let rgb = if border {
                    BORDER_COLOR
                } else {
                    textured(widget.fill, x, y)
                };
                frame.set_pixel(x, y, rgb);
            }
        }
    }
    frame
}

/// Native-space square occupied by the clock distractor.
pub fn clock_region(width: u32, height: u32) -> Rect {
    let size = (width.min(height) / 8).clamp(12, 110);
    let margin = size / 4;
    Rect::new(
        width.saturating_sub(size + margin),
        height.saturating_sub(size + margin),
        size.min(width),
        size.min(height),
    )
}

const CLOCK_FACE: [u8; 3] = [200, 200, 185];
const HAND_COLORS: [[u8; 3]; 2] = [[40, 40, 40], [190, 40, 40]];

/// Draws a clock whose seconds hand advances 6 degrees per tick. The hand
/// alternates color each tick so old and new hands differ everywhere.
pub(crate) fn draw_clock(frame: &mut Frame, region: Rect, tick: u64) {
    let r = region.width.min(region.height) as f64 / 2.0;
    let (cx, cy) = (region.x as f64 + r, region.y as f64 + r);
    let angle = (tick % 60) as f64 * std::f64::consts::TAU / 60.0;
    let (dx, dy) = (angle.sin(), -angle.cos());
    let len = r * 0.8;
    let half_thickness = (r / 18.0).max(1.0);
    let hand = HAND_COLORS[(tick % 2) as usize];
    for y in region.y..region.bottom().min(frame.height()) {
        for x in region.x..region.right().min(frame.width()) {
            let (px, py) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            if px * px + py * py > r * r {
                continue;
            }
            let along = (px * dx + py * dy).clamp(0.0, len);
            let (qx, qy) = (px - along * dx, py - along * dy);
            let rgb = if qx * qx + qy * qy <= half_thickness * half_thickness {
                hand
            } else {
                textured(CLOCK_FACE, x, y)
            };
            frame.set_pixel(x, y, rgb);
        }
    }
}

pub(crate) fn draw_cursor(frame: &mut Frame, sprite: &CursorSprite, pointer: (u32, u32)) {
    let ox = pointer.0 as i64 - sprite.hotspot.0 as i64;
    let oy = pointer.1 as i64 - sprite.hotspot.1 as i64;
    for sy in 0..sprite.height {
        for sx in 0..sprite.width {
            let (x, y) = (ox + sx as i64, oy + sy as i64);
            if x < 0 || y < 0 || x >= frame.width() as i64 || y >= frame.height() as i64 {
                continue;
            }
            let (x, y) = (x as u32, y as u32);
            match sprite.texel(sx, sy) {
                Texel::Clear => {}
                Texel::Solid(rgb) => frame.set_pixel(x, y, rgb),
                Texel::Shade { rgb, alpha } => {
                    let under = frame.pixel(x, y);
                    let out = [0, 1, 2].map(|c| {
                        (under[c] as f32 * (1.0 - alpha) + rgb[c] as f32 * alpha).round() as u8
                    });
                    frame.set_pixel(x, y, out);
                }
            }
        }
    }
}

/// Scales the native screen into a black 1920x1080 capture, nearest neighbour.
pub(crate) fn letterbox(native: &Frame) -> (Frame, ContentGeometry) {
    let geometry = aspect_fit(native.width(), native.height(), CAPTURE_WIDTH, CAPTURE_HEIGHT);
    let mut out = Frame::filled(CAPTURE_WIDTH, CAPTURE_HEIGHT, [0, 0, 0]);
    if native.dimensions() == (geometry.content_width, geometry.content_height) {
        out.paste(native, geometry.offset_x, geometry.offset_y);
        return (out, geometry);
    }
    let (cw, ch) = (geometry.content_width as u64, geometry.content_height as u64);
    let (nw, nh) = (native.width() as u64, native.height() as u64);
    let src_x: Vec<u32> = (0..cw)
        .map(|cx| (((2 * cx + 1) * nw) / (2 * cw)).min(nw - 1) as u32)
        .collect();
    for cy in 0..ch {
        let sy = (((2 * cy + 1) * nh) / (2 * ch)).min(nh - 1) as u32;
        for (cx, sx) in src_x.iter().enumerate() {
            out.set_pixel(
                geometry.offset_x + cx as u32,
                geometry.offset_y + cy as u32,
                native.pixel(*sx, sy),
            );
        }
    }
    (out, geometry)
}

/// Native-to-content mapping for a point, matching [`letterbox`] sampling.
pub(crate) fn native_to_content(geometry: &ContentGeometry, native: (u32, u32), p: (f64, f64)) -> (f64, f64) {
    (
        p.0 * geometry.content_width as f64 / native.0 as f64,
        p.1 * geometry.content_height as f64 / native.1 as f64,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_bounds() {
        for y in 0..200 {
            for x in 0..200 {
                assert!(texture_offset(x, y)
                    .iter()
                    .all(|v| v.abs() <= TEXTURE_AMPLITUDE));
            }
        }
        assert_ne!(texture_offset(1, 2), texture_offset(2, 1));
    }

    #[test]
    fn arrow_is_eight_connected() {
        let s = CursorSprite::arrow();
        let cells: Vec<(i32, i32)> = (0..s.height)
            .flat_map(|y| (0..s.width).map(move |x| (x, y)))
            .filter(|(x, y)| s.texel(*x, *y) != Texel::Clear)
            .map(|(x, y)| (x as i32, y as i32))
            .collect();
        let mut seen = vec![cells[0]];
        let mut i = 0;
        while i < seen.len() {
            let (x, y) = seen[i];
            for c in &cells {
                if (c.0 - x).abs() <= 1 && (c.1 - y).abs() <= 1 && !seen.contains(c) {
                    seen.push(*c);
                }
            }
            i += 1;
        }
        assert_eq!(seen.len(), cells.len());
        assert_eq!(s.texel(0, 0), Texel::Solid([0, 0, 0]));
    }

    #[test]
    fn clock_hand_changes_each_tick() {
        let region = Rect::new(0, 0, 100, 100);
        let mut a = Frame::filled(100, 100, [150, 150, 150]);
        let mut b = a.clone();
        draw_clock(&mut a, region, 7);
        draw_clock(&mut b, region, 8);
        assert!(!a.same_pixels(&b));
    }
}
