//! Blur detectors: variance of the Laplacian and local-binary-pattern
//! sharpness maps with tile-level segmentation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{Mask, RasterImage};
use crate::report::sig6;

pub const DEFAULT_VARLAP_THRESHOLD: f64 = 100.0;
pub const DEFAULT_LBP_THRESHOLD: f64 = 0.15;
pub const DEFAULT_TILE_PX: usize = 32;
pub const DEFAULT_LBP_DELTA: u8 = 16;
pub const MIN_TILE_PX: usize = 8;

/// Signed raster of Laplacian responses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedRaster {
    width: usize,
    height: usize,
    values: Vec<i32>,
}

impl SignedRaster {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.values[y * self.width + x]
    }
}

fn require_size(image: &RasterImage, min: usize) -> Result<()> {
    if image.width() < min || image.height() < min {
        return Err(Error::TooSmall {
            width: image.width(),
            height: image.height(),
            min,
        });
    }
    Ok(())
}

fn gray_plane(image: &RasterImage) -> Vec<i32> {
    image.to_gray().data().iter().map(|&v| v as i32).collect()
}

/// 4-neighbor Laplacian over the valid interior; output is `(w−2)×(h−2)`.
pub fn laplacian(image: &RasterImage) -> Result<SignedRaster> {
    require_size(image, 3)?;
    let (w, h) = image.dims();
    let g = gray_plane(image);
    let (ow, oh) = (w - 2, h - 2);
    let mut values = Vec::with_capacity(ow * oh);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = g[y * w + x];
            values.push(g[(y - 1) * w + x] + g[(y + 1) * w + x] + g[y * w + x - 1] + g[y * w + x + 1] - 4 * c);
        }
    }
    Ok(SignedRaster {
        width: ow,
        height: oh,
        values,
    })
}

fn population_variance(values: impl Iterator<Item = i32>) -> f64 {
    let (mut n, mut sum, mut sq) = (0u64, 0i64, 0i128);
    for v in values {
        n += 1;
        sum += v as i64;
        sq += (v as i128) * (v as i128);
    }
    if n == 0 {
        return 0.0;
    }
    // exact integer numerator: n·Σv² − (Σv)²
    let num = n as i128 * sq - (sum as i128) * (sum as i128);
    num as f64 / (n as f64 * n as f64)
}

pub fn variance_of_laplacian(image: &RasterImage) -> Result<f64> {
    let lap = laplacian(image)?;
    Ok(population_variance(lap.values.iter().copied()))
}

/// Per-tile scores on a regular grid. Edge tiles may be partial.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessMap {
    width: usize,
    height: usize,
    tile: usize,
    tiles_x: usize,
    tiles_y: usize,
    scores: Vec<f64>,
}

impl SharpnessMap {
    pub fn new(width: usize, height: usize, tile: usize, scores: Vec<f64>) -> Result<Self> {
        if tile == 0 || width == 0 || height == 0 {
            return Err(Error::InvalidParameter("sharpness map needs positive dims and tile".into()));
        }
        let tiles_x = width.div_ceil(tile);
        let tiles_y = height.div_ceil(tile);
        if scores.len() != tiles_x * tiles_y {
            return Err(Error::DimensionMismatch {
                expected: (tiles_x, tiles_y),
                actual: (scores.len(), 1),
            });
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::InvalidParameter(format!("tile score {bad} is not a finite non-negative value")));
        }
        Ok(SharpnessMap {
            width,
            height,
            tile,
            tiles_x,
            tiles_y,
            scores,
        })
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn tile_px(&self) -> usize {
        self.tile
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        (self.tiles_x, self.tiles_y)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score(&self, tx: usize, ty: usize) -> f64 {
        self.scores[ty * self.tiles_x + tx]
    }
}

fn tile_scores(
    width: usize,
    height: usize,
    tile: usize,
    score: impl Fn(usize, usize, usize, usize) -> f64 + Sync,
) -> Result<SharpnessMap> {
    let tiles_x = width.div_ceil(tile);
    let tiles_y = height.div_ceil(tile);
    let scores = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|i| {
            let (tx, ty) = (i % tiles_x, i / tiles_x);
            let x0 = tx * tile;
            let y0 = ty * tile;
            score(x0, y0, (x0 + tile).min(width), (y0 + tile).min(height))
        })
        .collect();
    SharpnessMap::new(width, height, tile, scores)
}

fn check_window(image: &RasterImage, window: usize) -> Result<()> {
    if window < MIN_TILE_PX {
        return Err(Error::InvalidParameter(format!(
            "window must be at least {MIN_TILE_PX} px, got {window}"
        )));
    }
    require_size(image, window + 1)
}

/// Rotation-invariant uniform label of an 8-bit circular code: the number of
/// set bits when the code has at most two 0/1 transitions, 9 otherwise.
pub fn riu2_label(code: u8) -> u8 {
    if (code ^ code.rotate_left(1)).count_ones() > 2 {
        9
    } else {
        code.count_ones() as u8
    }
}

/// Radius-1 8-neighbor codes; bit `p` is set when `|n_p − c| > delta`.
/// Border pixels carry `None`.
pub fn lbp_codes(image: &RasterImage, delta: u8) -> Vec<Option<u8>> {
    const OFFSETS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];
    let (w, h) = image.dims();
    let g = gray_plane(image);
    let delta = delta as i32;
    let mut out = vec![None; w * h];
    if w < 3 || h < 3 {
        return out;
    }
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = g[y * w + x];
            let mut code = 0u8;
            for (bit, (dx, dy)) in OFFSETS.iter().enumerate() {
                let n = g[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
                if (n - c).abs() > delta {
                    code |= 1 << bit;
                }
            }
            out[y * w + x] = Some(code);
        }
    }
    out
}

/// Fraction of pixels per tile whose label falls in 6..=9.
pub fn lbp_sharpness_map(image: &RasterImage, window: usize, delta: u8) -> Result<SharpnessMap> {
    check_window(image, window)?;
    let (w, h) = image.dims();
    let labels: Vec<Option<u8>> = lbp_codes(image, delta).into_iter().map(|c| c.map(riu2_label)).collect();
    tile_scores(w, h, window, |x0, y0, x1, y1| {
        let (mut hits, mut n) = (0usize, 0usize);
        for y in y0..y1 {
            for label in labels[y * w + x0..y * w + x1].iter().flatten() {
                n += 1;
                if *label >= 6 {
                    hits += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            hits as f64 / n as f64
        }
    })
}

/// Per-tile variance of the Laplacian; a response belongs to the tile
/// holding its center pixel.
pub fn varlap_sharpness_map(image: &RasterImage, window: usize) -> Result<SharpnessMap> {
    check_window(image, window)?;
    let (w, h) = image.dims();
    let lap = laplacian(image)?;
    tile_scores(w, h, window, |x0, y0, x1, y1| {
        let xs = x0.max(1)..x1.min(w - 1);
        let ys = y0.max(1)..y1.min(h - 1);
        let lap = &lap;
        population_variance(ys.flat_map(|y| xs.clone().map(move |x| lap.get(x - 1, y - 1))))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlurVerdict {
    pub blurred: bool,
    pub score: f64,
    pub threshold: f64,
    pub mask: Mask,
}

impl BlurVerdict {
    /// `verdict=<blurred|clean> score=<v> threshold=<t>`
    pub fn report_line(&self) -> String {
        format!(
            "verdict={} score={} threshold={}",
            if self.blurred { "blurred" } else { "clean" },
            sig6(self.score),
            sig6(self.threshold)
        )
    }
}

/// Whole-image VarLap verdict; the mask is all-set when blurred.
pub fn varlap_verdict(image: &RasterImage, threshold: f64) -> Result<BlurVerdict> {
    let score = variance_of_laplacian(image)?;
    let blurred = score < threshold;
    Ok(BlurVerdict {
        blurred,
        score,
        threshold,
        mask: Mask::filled(image.width(), image.height(), blurred),
    })
}

/// Tiles scoring below `threshold` become the blur mask (replicated to pixel
/// resolution). The verdict score is the lowest tile score.
pub fn segment_blur(map: &SharpnessMap, threshold: f64) -> BlurVerdict {
    let (w, h) = map.image_dims();
    let tile = map.tile;
    let mask = Mask::from_fn(w, h, |x, y| map.score(x / tile, y / tile) < threshold);
    let score = map.scores.iter().copied().fold(f64::INFINITY, f64::min);
    BlurVerdict {
        blurred: !mask.is_empty(),
        score,
        threshold,
        mask,
    }
}
