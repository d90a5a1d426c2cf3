//! Synthetic test scenes: calibrated fiducials, textures and composites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::imaging::RasterImage;

/// A dark axis-aligned rectangle on a flat background, rendered with exact
/// area coverage so sub-pixel extents are preserved in the gray levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fiducial {
    pub center_x: f64,
    pub center_y: f64,
    pub width_px: f64,
    pub height_px: f64,
    pub foreground: u8,
}

fn coverage_1d(lo: f64, hi: f64, pixel: usize) -> f64 {
    // pixel `i` spans [i - 0.5, i + 0.5]
    let a = pixel as f64 - 0.5;
    let b = pixel as f64 + 0.5;
    (hi.min(b) - lo.max(a)).clamp(0.0, 1.0)
}

/// Paints `fiducial` into `image` (all channels), blending by coverage.
pub fn paint_fiducial(image: &mut RasterImage, fiducial: &Fiducial) {
    let x_lo = fiducial.center_x - fiducial.width_px / 2.0;
    let x_hi = fiducial.center_x + fiducial.width_px / 2.0;
    let y_lo = fiducial.center_y - fiducial.height_px / 2.0;
    let y_hi = fiducial.center_y + fiducial.height_px / 2.0;
    let fx0 = (x_lo - 1.0).floor().max(0.0) as usize;
    let fx1 = ((x_hi + 1.0).ceil().max(0.0) as usize).min(image.width());
    let fy0 = (y_lo - 1.0).floor().max(0.0) as usize;
    let fy1 = ((y_hi + 1.0).ceil().max(0.0) as usize).min(image.height());
    let fg = fiducial.foreground as f64;
    for y in fy0..fy1 {
        let cy = coverage_1d(y_lo, y_hi, y);
        if cy == 0.0 {
            continue;
        }
        for x in fx0..fx1 {
            let a = cy * coverage_1d(x_lo, x_hi, x);
            if a == 0.0 {
                continue;
            }
            for c in 0..image.channels() {
                let bg = image.get(x, y, c) as f64;
                let v = bg + (fg - bg) * a;
                image.set(x, y, c, (v + 0.5).floor() as u8);
            }
        }
    }
}

/// Gray frame of `background` with a single fiducial.
pub fn fiducial_scene(width: usize, height: usize, background: u8, fiducial: &Fiducial) -> Result<RasterImage> {
    let mut img = RasterImage::filled(width, height, 1, background)?;
    paint_fiducial(&mut img, fiducial);
    Ok(img)
}

/// Uniform gray noise with samples in `[lo, hi]`.
pub fn noise(width: usize, height: usize, lo: u8, hi: u8, seed: u64) -> Result<RasterImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height).map(|_| rng.random_range(lo..=hi)).collect();
    RasterImage::new(width, height, 1, data)
}

/// Checkerboard with square cells of `cell` pixels.
pub fn checkerboard(width: usize, height: usize, cell: usize, lo: u8, hi: u8) -> Result<RasterImage> {
    let cell = cell.max(1);
    RasterImage::gray_from_fn(width, height, |x, y| {
        if ((x / cell) + (y / cell)).is_multiple_of(2) {
            hi
        } else {
            lo
        }
    })
}

/// Bright noise texture (samples in `[150, 250]`) with a dark fiducial on top.
pub fn textured_fiducial_scene(width: usize, height: usize, fiducial: &Fiducial, seed: u64) -> Result<RasterImage> {
    let mut img = noise(width, height, 150, 250, seed)?;
    paint_fiducial(&mut img, fiducial);
    Ok(img)
}
