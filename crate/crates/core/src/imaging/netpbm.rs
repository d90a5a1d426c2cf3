//! Binary netpbm codecs: 8-bit P5/P6 for images, 16-bit P5 for quantized maps.

use std::fs;
use std::path::Path;

use super::RasterImage;
use crate::error::{Error, Result};

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    data_offset: usize,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(start, format!("{what} out of range")))
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::parse(0, "truncated magic number"));
    }
    let magic = [bytes[0], bytes[1]];
    if magic[0] != b'P' || !(magic[1] == b'5' || magic[1] == b'6') {
        return Err(Error::parse(0, "expected P5 or P6 magic number"));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.read_uint("width")? as usize;
    let height = cur.read_uint("height")? as usize;
    let maxval_pos = cur.pos;
    let maxval = cur.read_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::parse(2, "width and height must be at least 1"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(maxval_pos, format!("unsupported maxval {maxval}")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(Error::parse(cur.pos, "expected single whitespace after maxval")),
    }
    Ok(Header {
        magic,
        width,
        height,
        maxval,
        data_offset: cur.pos + 1,
    })
}

/// Decodes an 8-bit binary PGM (P5) or PPM (P6).
pub fn decode(bytes: &[u8]) -> Result<RasterImage> {
    let header = parse_header(bytes)?;
    if header.maxval != 255 {
        return Err(Error::parse(0, format!("expected maxval 255, got {}", header.maxval)));
    }
    let channels = if header.magic[1] == b'5' { 1 } else { 3 };
    let len = header.width * header.height * channels;
    let end = header.data_offset + len;
    if bytes.len() < end {
        return Err(Error::parse(
            bytes.len(),
            format!("truncated pixel data: need {len} bytes"),
        ));
    }
    RasterImage::new(
        header.width,
        header.height,
        channels,
        bytes[header.data_offset..end].to_vec(),
    )
}

pub fn encode(image: &RasterImage) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.data());
    out
}

/// A 16-bit single-channel raster (P5 with maxval > 255, big-endian samples).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray16 {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

pub fn decode_gray16(bytes: &[u8]) -> Result<Gray16> {
    let header = parse_header(bytes)?;
    if header.magic[1] != b'5' {
        return Err(Error::parse(0, "16-bit maps must be P5"));
    }
    let n = header.width * header.height;
    let wide = header.maxval > 255;
    let bytes_per = if wide { 2 } else { 1 };
    let end = header.data_offset + n * bytes_per;
    if bytes.len() < end {
        return Err(Error::parse(
            bytes.len(),
            format!("truncated pixel data: need {} bytes", n * bytes_per),
        ));
    }
    let data = &bytes[header.data_offset..end];
    let samples = if wide {
        data.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        data.iter().map(|&b| b as u16).collect()
    };
    Ok(Gray16 {
        width: header.width,
        height: header.height,
        maxval: header.maxval as u16,
        samples,
    })
}

pub fn encode_gray16(map: &Gray16) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", map.width, map.height, map.maxval).into_bytes();
    if map.maxval > 255 {
        for s in &map.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    } else {
        out.extend(map.samples.iter().map(|&s| s as u8));
    }
    out
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_image(path: impl AsRef<Path>, image: &RasterImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(image)).map_err(|e| Error::io(path, e))
}
