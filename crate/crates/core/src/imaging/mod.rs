//! Raster synthesis of an attacked frame: the in-lens region is rescaled
//! about its center, then one side of the lens boundary is box blurred.

pub mod netpbm;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::optics::LensKind;

pub const MIN_LEVEL: u8 = 1;
pub const MAX_LEVEL: u8 = 9;

/// Row-major 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a gray image from a per-pixel function.
    pub fn gray_from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Luma conversion with weights 0.299/0.587/0.114, rounded to nearest.
    /// Gray images are returned unchanged.
    pub fn to_gray(&self) -> RasterImage {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| {
                let l = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
                ((l + 500) / 1000) as u8
            })
            .collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Luma at one pixel (the sample itself for gray images).
    pub fn luma(&self, x: usize, y: usize) -> u8 {
        if self.channels == 1 {
            self.get(x, y, 0)
        } else {
            let i = (y * self.width + x) * 3;
            let p = &self.data[i..i + 3];
            let l = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
            ((l + 500) / 1000) as u8
        }
    }
}

/// Boolean raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Mask {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Mask {
            width,
            height,
            bits,
        }
    }

    /// Mask of the pixels inside `rect`, clipped to the frame.
    pub fn from_rect(width: usize, height: usize, rect: PixelRect) -> Self {
        Mask::from_fn(width, height, |x, y| rect.contains(x, y))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn complement(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn intersection(&self, other: &Mask) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        }
    }

    pub fn union(&self, other: &Mask) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        }
    }

    /// Intersection over union with another mask of the same size.
    pub fn iou(&self, other: &Mask) -> f64 {
        let inter = self.intersection(other).count();
        let uni = self.union(other).count();
        if uni == 0 {
            1.0
        } else {
            inter as f64 / uni as f64
        }
    }

    /// 255 where set, 0 elsewhere.
    pub fn to_image(&self) -> RasterImage {
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

/// Axis-aligned pixel rectangle, `[x_min, x_max) × [y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl PixelRect {
    pub fn new(x_min: usize, y_min: usize, x_max: usize, y_max: usize) -> Result<Self> {
        if x_max <= x_min || y_max <= y_min {
            return Err(Error::InvalidParameter(format!(
                "empty rectangle {x_min} {y_min} {x_max} {y_max}"
            )));
        }
        Ok(PixelRect {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    pub fn width(&self) -> usize {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LensRegion {
    FullFrame,
    /// Disk of pixel centers within `radius` of `(center_x, center_y)`.
    /// May extend past the frame.
    Circle {
        center_x: f64,
        center_y: f64,
        radius: f64,
    },
}

impl LensRegion {
    pub fn circle(center_x: f64, center_y: f64, radius: f64) -> Result<Self> {
        if !(center_x.is_finite() && center_y.is_finite() && radius.is_finite() && radius >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "circle needs a finite center and radius >= 1, got ({center_x}, {center_y}, {radius})"
            )));
        }
        Ok(LensRegion::Circle {
            center_x,
            center_y,
            radius,
        })
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        match *self {
            LensRegion::FullFrame => true,
            LensRegion::Circle {
                center_x,
                center_y,
                radius,
            } => {
                let dx = x as f64 - center_x;
                let dy = y as f64 - center_y;
                dx * dx + dy * dy <= radius * radius
            }
        }
    }

    /// Scaling center for a frame of the given size.
    pub fn center(&self, width: usize, height: usize) -> (f64, f64) {
        match *self {
            LensRegion::FullFrame => ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0),
            LensRegion::Circle {
                center_x, center_y, ..
            } => (center_x, center_y),
        }
    }
}

/// In-lens and out-of-lens masks; they partition the frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMasks {
    pub in_lens: Mask,
    pub out_of_lens: Mask,
}

pub fn region_masks(width: usize, height: usize, region: LensRegion) -> RegionMasks {
    let in_lens = Mask::from_fn(width, height, |x, y| region.contains(x, y));
    let out_of_lens = in_lens.complement();
    RegionMasks {
        in_lens,
        out_of_lens,
    }
}

/// Bilinear sample with edge-replicated borders.
fn sample_bilinear(image: &RasterImage, x: f64, y: f64, c: usize) -> f64 {
    let max_x = (image.width - 1) as f64;
    let max_y = (image.height - 1) as f64;
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(image.width - 1);
    let y1 = (y0 + 1).min(image.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let p00 = image.get(x0, y0, c) as f64;
    let p10 = image.get(x1, y0, c) as f64;
    let p01 = image.get(x0, y1, c) as f64;
    let p11 = image.get(x1, y1, c) as f64;
    let top = p00 + (p10 - p00) * fx;
    let bottom = p01 + (p11 - p01) * fx;
    top + (bottom - top) * fy
}

/// Resamples the content inside `region` by `scale` about the region center.
///
/// Only pixels inside the region are rewritten. Output pixel `p` takes the
/// bilinear sample of the source at `c + (p − c)/scale`, so `scale > 1`
/// enlarges and `scale < 1` shrinks. Source coordinates outside the frame
/// replicate the nearest edge sample.
pub fn scale_region(image: &RasterImage, region: LensRegion, scale: f64) -> Result<RasterImage> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let (w, h) = image.dims();
    let masks = region_masks(w, h, region);
    if masks.in_lens.is_empty() {
        return Err(Error::DegenerateRegion {
            width: w,
            height: h,
        });
    }
    if scale == 1.0 {
        return Ok(image.clone());
    }
    let (cx, cy) = region.center(w, h);
    let inv = 1.0 / scale;
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            if !masks.in_lens.get(x, y) {
                continue;
            }
            let sx = cx + (x as f64 - cx) * inv;
            let sy = cy + (y as f64 - cy) * inv;
            for c in 0..image.channels {
                let v = sample_bilinear(image, sx, sy, c);
                out.set(x, y, c, (v + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(out)
}

/// Summed-area table over one channel, `(w+1)·(h+1)` entries.
fn integral(image: &RasterImage, c: usize) -> Vec<u64> {
    let (w, h) = image.dims();
    let stride = w + 1;
    let mut table = vec![0u64; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0u64;
        for x in 0..w {
            row += image.get(x, y, c) as u64;
            table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
        }
    }
    table
}

/// Replaces every masked pixel with the mean of its `(2r+1)²` window.
///
/// The window is clipped at the frame edges and the mean is taken over the
/// in-frame samples, rounded half up. Unmasked pixels are copied verbatim.
pub fn box_blur(image: &RasterImage, mask: &Mask, radius: usize) -> Result<RasterImage> {
    if mask.dims() != image.dims() {
        return Err(Error::DimensionMismatch {
            expected: image.dims(),
            actual: mask.dims(),
        });
    }
    if radius == 0 || mask.is_empty() {
        return Ok(image.clone());
    }
    let (w, h) = image.dims();
    let stride = w + 1;
    let mut out = image.clone();
    for c in 0..image.channels {
        let table = integral(image, c);
        for y in 0..h {
            let y0 = y.saturating_sub(radius);
            let y1 = (y + radius + 1).min(h);
            for x in 0..w {
                if !mask.get(x, y) {
                    continue;
                }
                let x0 = x.saturating_sub(radius);
                let x1 = (x + radius + 1).min(w);
                let sum = table[y1 * stride + x1] + table[y0 * stride + x0]
                    - table[y0 * stride + x1]
                    - table[y1 * stride + x0];
                let count = ((y1 - y0) * (x1 - x0)) as u64;
                out.set(x, y, c, ((2 * sum + count) / (2 * count)) as u8);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlurPlacement {
    InLens,
    OutOfLens,
}

impl BlurPlacement {
    pub fn default_for(kind: LensKind) -> Self {
        match kind {
            LensKind::Concave => BlurPlacement::OutOfLens,
            LensKind::Convex => BlurPlacement::InLens,
        }
    }
}

/// Everything needed to synthesize one attacked frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackProfile {
    pub lens_kind: LensKind,
    /// Discrete attack level, `None` for hand-specified profiles.
    pub level: Option<u8>,
    pub region: LensRegion,
    pub scale_factor: f64,
    pub blur_radius: usize,
    pub blur_placement: BlurPlacement,
}

impl AttackProfile {
    /// A profile with explicit scale and blur, using the lens kind's default
    /// blur placement.
    pub fn manual(lens_kind: LensKind, region: LensRegion, scale_factor: f64, blur_radius: usize) -> Self {
        AttackProfile {
            lens_kind,
            level: None,
            region,
            scale_factor,
            blur_radius,
            blur_placement: BlurPlacement::default_for(lens_kind),
        }
    }
}

/// Rescales the in-lens content, then blurs the side of the lens boundary
/// selected by the profile.
pub fn apply_attack_transform(image: &RasterImage, profile: &AttackProfile) -> Result<RasterImage> {
    let scaled = scale_region(image, profile.region, profile.scale_factor)?;
    if profile.blur_radius == 0 {
        return Ok(scaled);
    }
    let masks = region_masks(image.width(), image.height(), profile.region);
    let mask = match profile.blur_placement {
        BlurPlacement::InLens => &masks.in_lens,
        BlurPlacement::OutOfLens => &masks.out_of_lens,
    };
    box_blur(&scaled, mask, profile.blur_radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct LevelOverride {
    pub lens: LensKind,
    pub level: u8,
    pub scale: f64,
    pub blur: usize,
    #[serde(default)]
    pub placement: Option<BlurPlacement>,
}

/// Mapping from discrete attack levels to scale and blur.
///
/// Blur radius is `level · blur_per_level`; the scale factor runs linearly
/// from the first to the second entry of the lens kind's range across levels
/// 1..=9. Overrides replace individual levels verbatim.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Calibration {
    pub blur_per_level: usize,
    pub concave_scale: [f64; 2],
    pub convex_scale: [f64; 2],
    #[serde(rename = "override")]
    pub overrides: Vec<LevelOverride>,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            blur_per_level: 1,
            concave_scale: [0.95, 0.55],
            convex_scale: [1.1, 3.0],
            overrides: Vec::new(),
        }
    }
}

impl Calibration {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let calib: Calibration = toml::from_str(text).map_err(|e| {
            let offset = e.span().map(|s| s.start).unwrap_or(0);
            Error::parse(offset, e.message().to_string())
        })?;
        calib.validate()?;
        Ok(calib)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        for s in self.concave_scale.iter().chain(&self.convex_scale) {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::InvalidParameter(format!("scale {s} must be positive")));
            }
        }
        let mut seen = BTreeMap::new();
        for o in &self.overrides {
            if !(MIN_LEVEL..=MAX_LEVEL).contains(&o.level) {
                return Err(Error::BadLevel(o.level));
            }
            if !(o.scale.is_finite() && o.scale > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "override scale {} must be positive",
                    o.scale
                )));
            }
            if seen.insert((o.lens as u8, o.level), ()).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate override for {} level {}",
                    o.lens, o.level
                )));
            }
        }
        Ok(())
    }
}

pub fn level_to_profile(
    lens_kind: LensKind,
    level: u8,
    region: LensRegion,
    calibration: &Calibration,
) -> Result<AttackProfile> {
    if !(MIN_LEVEL..=MAX_LEVEL).contains(&level) {
        return Err(Error::BadLevel(level));
    }
    let placement = BlurPlacement::default_for(lens_kind);
    if let Some(o) = calibration
        .overrides
        .iter()
        .find(|o| o.lens == lens_kind && o.level == level)
    {
        return Ok(AttackProfile {
            lens_kind,
            level: Some(level),
            region,
            scale_factor: o.scale,
            blur_radius: o.blur,
            blur_placement: o.placement.unwrap_or(placement),
        });
    }
    let [first, last] = match lens_kind {
        LensKind::Concave => calibration.concave_scale,
        LensKind::Convex => calibration.convex_scale,
    };
    let t = (level - MIN_LEVEL) as f64 / (MAX_LEVEL - MIN_LEVEL) as f64;
    Ok(AttackProfile {
        lens_kind,
        level: Some(level),
        region,
        scale_factor: first + (last - first) * t,
        blur_radius: level as usize * calibration.blur_per_level,
        blur_placement: placement,
    })
}
