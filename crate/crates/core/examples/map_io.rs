//! Round trip of estimator maps through PFM and scaled 16-bit PGM.

use std::fs;

use lensdepth::estimation::{load_boxes, load_map, masked_mean, save_pfm, sidecar_path, ScalarMap};
use lensdepth::imaging::netpbm::{encode_gray16, Gray16};
use lensdepth::imaging::Mask;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let (w, h) = (40, 30);
    let values: Vec<f64> = (0..w * h).map(|i| 5.0 + (i % w) as f64 * 0.25).collect();
    let map = ScalarMap::new(w, h, values)?;

    let pfm = dir.path().join("depth.pfm");
    save_pfm(&pfm, &map)?;
    let back = load_map(&pfm, Some((w, h)))?;
    println!("pfm: ({}, {}) -> {:.2}", 7, 3, back.get(7, 3));

    // 16-bit PGM with meters per count in a sidecar
    let scale = 1.0 / 256.0;
    let raw: Vec<u16> = map.values().iter().map(|v| (v / scale).round() as u16).collect();
    let pgm = dir.path().join("depth.pgm");
    fs::write(&pgm, encode_gray16(&Gray16 { width: w, height: h, maxval: u16::MAX, samples: raw }))?;
    fs::write(sidecar_path(&pgm), format!("{scale}\n"))?;
    let back = load_map(&pgm, Some((w, h)))?;
    println!("pgm: ({}, {}) -> {:.2}", 7, 3, back.get(7, 3));

    let boxes = dir.path().join("boxes.txt");
    fs::write(&boxes, "# x_min y_min x_max y_max\n10 5 20 15\n")?;
    for b in load_boxes(&boxes)? {
        println!("box {b:?}: mean {:.3}", masked_mean(&back, &Mask::from_rect(w, h, b))?);
    }
    Ok(())
}
