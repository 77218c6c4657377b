use std::io::Cursor;
use std::path::Path;
use std::time::Duration;

use image::{ImageFormat, RgbImage};

use super::CaptureError;
use crate::geometry::Rect;

/// Width of every raw capture from the HDMI dongle.
pub const CAPTURE_WIDTH: u32 = 1920;
/// Height of every raw capture from the HDMI dongle.
pub const CAPTURE_HEIGHT: u32 = 1080;

/// An immutable row-major RGB8 raster.
#[derive(Clone)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    timestamp: Duration,
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("timestamp", &self.timestamp)
            .finish_non_exhaustive()
    }
}

impl Frame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Frame, CaptureError> {
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(CaptureError::InvalidFrame(format!(
                "{width}x{height} needs {expected} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            pixels,
            timestamp: Duration::ZERO,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Frame {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Frame {
            width,
            height,
            pixels,
            timestamp: Duration::ZERO,
        }
    }

    pub fn with_timestamp(mut self, timestamp: Duration) -> Frame {
        self.timestamp = timestamp;
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Monotonic capture time relative to the source's start.
    pub fn timestamp(&self) -> Duration {
        self.timestamp
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.offset(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.offset(x, y);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// One row of raw bytes.
    pub fn row(&self, y: u32) -> &[u8] {
        let start = self.offset(0, y);
        &self.pixels[start..start + self.width as usize * 3]
    }

    pub fn crop(&self, rect: Rect) -> Result<Frame, CaptureError> {
        if rect.width == 0
            || rect.height == 0
            || rect.right() > self.width
            || rect.bottom() > self.height
        {
            return Err(CaptureError::InvalidFrame(format!(
                "crop {rect:?} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(rect.area() as usize * 3);
        for y in rect.y..rect.bottom() {
            let start = self.offset(rect.x, y);
            pixels.extend_from_slice(&self.pixels[start..start + rect.width as usize * 3]);
        }
        Ok(Frame {
            width: rect.width,
            height: rect.height,
            pixels,
            timestamp: self.timestamp,
        })
    }

    /// Copies `src` onto this frame with its top-left at `(x, y)`, clipping
    /// whatever falls outside.
    pub fn paste(&mut self, src: &Frame, x: u32, y: u32) {
        if x >= self.width || y >= self.height {
            return;
        }
        let w = src.width.min(self.width - x) as usize * 3;
        for sy in 0..src.height.min(self.height - y) {
            let dst = self.offset(x, y + sy);
            self.pixels[dst..dst + w].copy_from_slice(&src.row(sy)[..w]);
        }
    }

    /// Pixel equality, ignoring timestamps.
    pub fn same_pixels(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.pixels == other.pixels
    }

    pub fn to_png(&self) -> Vec<u8> {
        let img = RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("frame buffer matches its dimensions");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)
            .expect("in-memory PNG encoding does not fail");
        out.into_inner()
    }

    pub fn from_png(bytes: &[u8]) -> Result<Frame, CaptureError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| CaptureError::DecodeFailure(e.to_string()))?
            .into_rgb8();
        let (w, h) = img.dimensions();
        Frame::new(w, h, img.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<(), CaptureError> {
        std::fs::write(path, self.to_png()).map_err(|e| CaptureError::Io(e.to_string()))
    }

    pub fn load_png(path: &Path) -> Result<Frame, CaptureError> {
        let bytes = std::fs::read(path).map_err(|e| CaptureError::Io(e.to_string()))?;
        Frame::from_png(&bytes)
    }

    /// Area-averaged grayscale thumbnail, `w * h` bytes, row-major.
    pub fn thumbnail_gray(&self, w: u32, h: u32) -> Vec<u8> {
        let mut out = Vec::with_capacity(w as usize * h as usize);
        for ty in 0..h {
            let y0 = (ty as u64 * self.height as u64 / h as u64) as u32;
            let y1 = (((ty + 1) as u64 * self.height as u64 / h as u64) as u32).max(y0 + 1);
            for tx in 0..w {
                let x0 = (tx as u64 * self.width as u64 / w as u64) as u32;
                let x1 = (((tx + 1) as u64 * self.width as u64 / w as u64) as u32).max(x0 + 1);
                let mut sum = 0u64;
                let mut n = 0u64;
                for y in y0..y1.min(self.height) {
                    for x in x0..x1.min(self.width) {
                        let [r, g, b] = self.pixel(x, y);
                        sum += 299 * r as u64 + 587 * g as u64 + 114 * b as u64;
                        n += 1;
                    }
                }
                out.push(if n == 0 {
                    0
                } else {
                    ((sum as f64 / (n as f64 * 1000.0)).round()) as u8
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_invariant() {
        assert!(Frame::new(2, 2, vec![0; 11]).is_err());
        assert!(Frame::new(2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn crop_paste_png() {
        let mut f = Frame::filled(20, 10, [10, 20, 30]);
        f.set_pixel(5, 6, [1, 2, 3]);
        let c = f.crop(Rect::new(4, 5, 3, 3)).unwrap();
        assert_eq!(c.pixel(1, 1), [1, 2, 3]);
        let mut g = Frame::filled(20, 10, [10, 20, 30]);
        g.paste(&c, 4, 5);
        assert!(g.same_pixels(&f));
        let back = Frame::from_png(&f.to_png()).unwrap();
        assert!(back.same_pixels(&f));
        assert!(f.crop(Rect::new(18, 0, 5, 1)).is_err());
    }

    #[test]
    fn thumbnail_of_uniform_frame() {
        let f = Frame::filled(64, 36, [100, 100, 100]);
        assert!(f.thumbnail_gray(32, 18).iter().all(|v| *v == 100));
    }
}
