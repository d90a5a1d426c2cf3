//! Depth and disparity maps, the pinhole proxy estimator and map I/O.
//!
//! Invalid pixels (holes in an estimator's output, zero disparities) are
//! stored as NaN and skipped by every reduction.

use std::fs;
use std::ops::Deref;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::netpbm;
use crate::imaging::{Mask, PixelRect, RasterImage};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "map of {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(ScalarMap {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.get(x, y).is_finite()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarMap {
        ScalarMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Per-pixel depth in meters; every valid value is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap(ScalarMap);

impl DepthMap {
    /// Wraps a map, marking non-positive and non-finite values invalid.
    pub fn new(map: ScalarMap) -> Self {
        DepthMap(map.map(|v| if v.is_finite() && v > 0.0 { v } else { f64::NAN }))
    }

    pub fn into_inner(self) -> ScalarMap {
        self.0
    }
}

impl Deref for DepthMap {
    type Target = ScalarMap;
    fn deref(&self) -> &ScalarMap {
        &self.0
    }
}

/// Per-pixel disparity; every valid value is non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap(ScalarMap);

impl DisparityMap {
    /// Wraps a map, marking negative and non-finite values invalid.
    pub fn new(map: ScalarMap) -> Self {
        DisparityMap(map.map(|v| if v.is_finite() && v >= 0.0 { v } else { f64::NAN }))
    }

    pub fn into_inner(self) -> ScalarMap {
        self.0
    }
}

impl Deref for DisparityMap {
    type Target = ScalarMap;
    fn deref(&self) -> &ScalarMap {
        &self.0
    }
}

/// Stereo baseline and focal length in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    baseline_m: f64,
    focal_px: f64,
}

impl CameraIntrinsics {
    pub fn new(baseline_m: f64, focal_px: f64) -> Result<Self> {
        if !(baseline_m.is_finite() && baseline_m > 0.0 && focal_px.is_finite() && focal_px > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "intrinsics must be positive, got baseline {baseline_m} focal {focal_px}"
            )));
        }
        Ok(CameraIntrinsics {
            baseline_m,
            focal_px,
        })
    }

    pub fn baseline_m(&self) -> f64 {
        self.baseline_m
    }

    pub fn focal_px(&self) -> f64 {
        self.focal_px
    }
}

/// `depth = baseline · focal / disparity`; zero disparity becomes invalid.
pub fn disparity_to_depth(disparity: &DisparityMap, k: &CameraIntrinsics) -> DepthMap {
    let bf = k.baseline_m * k.focal_px;
    DepthMap::new(disparity.map(|d| if d > 0.0 { bf / d } else { f64::NAN }))
}

/// Inverse of [`disparity_to_depth`], by the same formula.
pub fn depth_to_disparity(depth: &DepthMap, k: &CameraIntrinsics) -> DisparityMap {
    let bf = k.baseline_m * k.focal_px;
    DisparityMap::new(depth.map(|z| bf / z))
}

/// Divides every disparity by `c` (used to bring differently scaled
/// estimator outputs onto a common scale).
pub fn rescale_disparity(disparity: &DisparityMap, c: f64) -> Result<DisparityMap> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rescale constant must be positive, got {c}"
        )));
    }
    Ok(DisparityMap(disparity.map(|d| d / c)))
}

/// Mean over the valid pixels selected by `mask`.
pub fn masked_mean(map: &ScalarMap, mask: &Mask) -> Result<f64> {
    if mask.dims() != map.dims() {
        return Err(Error::DimensionMismatch {
            expected: map.dims(),
            actual: mask.dims(),
        });
    }
    let (sum, n) = map
        .values
        .iter()
        .zip(mask.bits())
        .filter(|(v, &m)| m && v.is_finite())
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / n as f64)
}

/// Known-size target used by the proxy estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiducialSpec {
    pub physical_height_m: f64,
    /// Pixels with luma strictly below this level belong to the fiducial.
    pub threshold: u8,
    /// Restricts the search to this rectangle when set.
    pub reference_box: Option<PixelRect>,
}

impl FiducialSpec {
    pub fn new(physical_height_m: f64, threshold: u8) -> Result<Self> {
        if !(physical_height_m.is_finite() && physical_height_m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fiducial height must be positive, got {physical_height_m}"
            )));
        }
        Ok(FiducialSpec {
            physical_height_m,
            threshold,
            reference_box: None,
        })
    }

    pub fn with_reference_box(mut self, rect: PixelRect) -> Self {
        self.reference_box = Some(rect);
        self
    }
}

/// Minimum blob size accepted as a fiducial detection.
pub const MIN_BLOB_PIXELS: usize = 4;

/// The largest 4-connected dark component found for a fiducial.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub bbox: PixelRect,
    pub pixels: Mask,
    pub area: usize,
}

impl Blob {
    pub fn height_px(&self) -> usize {
        self.bbox.height()
    }
}

pub fn detect_fiducial(image: &RasterImage, fiducial: &FiducialSpec) -> Result<Blob> {
    let (w, h) = image.dims();
    let within = |x: usize, y: usize| fiducial.reference_box.is_none_or(|r| r.contains(x, y));
    let dark = Mask::from_fn(w, h, |x, y| within(x, y) && image.luma(x, y) < fiducial.threshold);
    let mut label = vec![0u32; w * h];
    let mut best: Option<(usize, u32, PixelRect)> = None;
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !dark.bits()[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut area = 0;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            let mut visit = |j: usize| {
                if dark.bits()[j] && label[j] == 0 {
                    label[j] = next;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if best.as_ref().is_none_or(|(a, _, _)| area > *a) {
            let rect = PixelRect {
                x_min: x0,
                y_min: y0,
                x_max: x1 + 1,
                y_max: y1 + 1,
            };
            best = Some((area, next, rect));
        }
    }
    match best {
        Some((area, id, bbox)) if area >= MIN_BLOB_PIXELS => {
            let pixels = Mask::from_fn(w, h, |x, y| label[y * w + x] == id);
            Ok(Blob { bbox, pixels, area })
        }
        _ => Err(Error::FiducialNotFound {
            threshold: fiducial.threshold,
            min_pixels: MIN_BLOB_PIXELS,
        }),
    }
}

/// Pinhole depth from apparent height: `focal_px · H / h_px`.
pub fn proxy_estimate_depth(image: &RasterImage, fiducial: &FiducialSpec, k: &CameraIntrinsics) -> Result<f64> {
    let blob = detect_fiducial(image, fiducial)?;
    Ok(k.focal_px * fiducial.physical_height_m / blob.height_px() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Depth,
    Disparity,
}

/// Map-producing wrapper around [`proxy_estimate_depth`].
///
/// Fiducial pixels carry the fiducial depth. Every other pixel gets a
/// shading cue `background_depth_m + texture_gain_m · luma/255`, which makes
/// the background estimate sensitive to blur the way a learned estimator's
/// output degrades on smeared texture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyEstimator {
    pub fiducial: FiducialSpec,
    pub intrinsics: CameraIntrinsics,
    pub background_depth_m: f64,
    pub texture_gain_m: f64,
    pub output: MapKind,
}

impl ProxyEstimator {
    pub fn new(fiducial: FiducialSpec, intrinsics: CameraIntrinsics) -> Self {
        ProxyEstimator {
            fiducial,
            intrinsics,
            background_depth_m: 30.0,
            texture_gain_m: 10.0,
            output: MapKind::Depth,
        }
    }

    pub fn estimate_map(&self, image: &RasterImage) -> Result<ScalarMap> {
        let blob = detect_fiducial(image, &self.fiducial)?;
        let depth = self.intrinsics.focal_px * self.fiducial.physical_height_m / blob.height_px() as f64;
        let (w, h) = image.dims();
        let mut values = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let z = if blob.pixels.get(x, y) {
                    depth
                } else {
                    self.background_depth_m + self.texture_gain_m * image.luma(x, y) as f64 / 255.0
                };
                values.push(z);
            }
        }
        let map = DepthMap::new(ScalarMap::new(w, h, values)?);
        Ok(match self.output {
            MapKind::Depth => map.into_inner(),
            MapKind::Disparity => depth_to_disparity(&map, &self.intrinsics).into_inner(),
        })
    }
}

fn parse_pfm(bytes: &[u8]) -> Result<ScalarMap> {
    // Three whitespace-terminated tokens ("Pf", "W H", scale), then raw floats.
    let mut pos = 0;
    let mut tokens: Vec<(usize, &str)> = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
            pos += 1;
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        if start == pos || pos >= bytes.len() {
            return Err(Error::parse(start, "truncated PFM header"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::parse(start, "non-ASCII PFM header"))?;
        tokens.push((start, text));
    }
    let data_start = pos + 1;
    match tokens[0].1 {
        "Pf" => {}
        "PF" => return Err(Error::parse(0, "three-channel PFM is not a depth map")),
        _ => return Err(Error::parse(0, "expected Pf magic")),
    }
    let num = |i: usize, what: &str| -> Result<usize> {
        tokens[i]
            .1
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::parse(tokens[i].0, format!("invalid {what}")))
    };
    let width = num(1, "width")?;
    let height = num(2, "height")?;
    let scale: f64 = tokens[3]
        .1
        .parse()
        .ok()
        .filter(|s: &f64| s.is_finite() && *s != 0.0)
        .ok_or_else(|| Error::parse(tokens[3].0, "invalid scale"))?;
    let little = scale < 0.0;
    let need = width * height * 4;
    if bytes.len() < data_start + need {
        return Err(Error::parse(bytes.len(), format!("truncated PFM data: need {need} bytes")));
    }
    let mut values = vec![0.0; width * height];
    for (i, chunk) in bytes[data_start..data_start + need].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        // rows are stored bottom-up
        let (x, file_row) = (i % width, i / width);
        values[(height - 1 - file_row) * width + x] = v as f64;
    }
    ScalarMap::new(width, height, values)
}

/// Little-endian grayscale PFM, bottom-up rows.
pub fn encode_pfm(map: &ScalarMap) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", map.width, map.height).into_bytes();
    for y in (0..map.height).rev() {
        for x in 0..map.width {
            out.extend_from_slice(&(map.get(x, y) as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> Result<ScalarMap> {
    parse_pfm(bytes)
}

/// Sidecar path holding the meters-per-count scale of a 16-bit PGM map.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".scale");
    PathBuf::from(s)
}

fn read_scale(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let token = text.split_whitespace().next().ok_or_else(|| Error::parse(0, "empty scale sidecar"))?;
    token
        .parse::<f64>()
        .ok()
        .filter(|s| s.is_finite() && *s > 0.0)
        .ok_or_else(|| Error::parse(0, format!("invalid scale {token:?}")))
}

/// Decodes a 16-bit PGM map: `value = raw · scale`, raw 0 is invalid.
pub fn decode_pgm_map(bytes: &[u8], scale: f64) -> Result<ScalarMap> {
    let g = netpbm::decode_gray16(bytes)?;
    let values = g
        .samples
        .iter()
        .map(|&s| if s == 0 { f64::NAN } else { s as f64 * scale })
        .collect();
    ScalarMap::new(g.width, g.height, values)
}

/// Loads a PFM map, or a 16-bit PGM map with a `<path>.scale` sidecar.
pub fn load_map(path: impl AsRef<Path>, expected: Option<(usize, usize)>) -> Result<ScalarMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let map = if bytes.starts_with(b"P5") {
        let scale = read_scale(&sidecar_path(path))?;
        decode_pgm_map(&bytes, scale)?
    } else {
        parse_pfm(&bytes)?
    };
    if let Some(dims) = expected {
        if dims != map.dims() {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: map.dims(),
            });
        }
    }
    Ok(map)
}

pub fn load_depth_map(path: impl AsRef<Path>, expected: Option<(usize, usize)>) -> Result<DepthMap> {
    Ok(DepthMap::new(load_map(path, expected)?))
}

pub fn load_disparity_map(path: impl AsRef<Path>, expected: Option<(usize, usize)>) -> Result<DisparityMap> {
    Ok(DisparityMap::new(load_map(path, expected)?))
}

pub fn save_pfm(path: impl AsRef<Path>, map: &ScalarMap) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pfm(map)).map_err(|e| Error::io(path, e))
}

/// Parses one `x_min y_min x_max y_max` box per line. Blank lines and lines
/// starting with `#` are ignored.
pub fn parse_boxes(text: &str) -> Result<Vec<PixelRect>> {
    let mut boxes = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            let nums: Vec<usize> = trimmed
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(offset, format!("bad box line {trimmed:?}")))?;
            if nums.len() != 4 {
                return Err(Error::parse(offset, format!("box needs 4 integers, got {}", nums.len())));
            }
            boxes.push(
                PixelRect::new(nums[0], nums[1], nums[2], nums[3]).map_err(|e| Error::parse(offset, e.to_string()))?,
            );
        }
        offset += line.len();
    }
    Ok(boxes)
}

pub fn load_boxes(path: impl AsRef<Path>) -> Result<Vec<PixelRect>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_boxes(&text)
}
