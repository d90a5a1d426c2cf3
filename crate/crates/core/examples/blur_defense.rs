//! Blur detection on a clean frame and on a convex attack frame.

use lensdepth::defense::{
    lbp_sharpness_map, segment_blur, varlap_verdict, DEFAULT_LBP_DELTA, DEFAULT_LBP_THRESHOLD, DEFAULT_TILE_PX,
    DEFAULT_VARLAP_THRESHOLD,
};
use lensdepth::imaging::{apply_attack_transform, level_to_profile, Calibration, LensRegion};
use lensdepth::optics::LensKind;
use lensdepth::synth::noise;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clean = noise(256, 256, 0, 255, 21)?;
    let region = LensRegion::circle(128.0, 128.0, 90.0)?;
    let profile = level_to_profile(LensKind::Convex, 5, region, &Calibration::default())?;
    let attacked = apply_attack_transform(&clean, &profile)?;

    for (name, image) in [("clean", &clean), ("convex level 5", &attacked)] {
        let v = varlap_verdict(image, DEFAULT_VARLAP_THRESHOLD)?;
        let map = lbp_sharpness_map(image, DEFAULT_TILE_PX, DEFAULT_LBP_DELTA)?;
        let seg = segment_blur(&map, DEFAULT_LBP_THRESHOLD);
        println!("{name}");
        println!("  varlap {}", v.report_line());
        println!("  lbp    {} ({} blurred px)", seg.report_line(), seg.mask.count());
    }
    Ok(())
}
