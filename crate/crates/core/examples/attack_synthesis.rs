//! Renders a fiducial scene and writes every concave and convex attack level
//! as PGM into a temporary directory.

use lensdepth::imaging::netpbm::write_image;
use lensdepth::imaging::{apply_attack_transform, level_to_profile, Calibration, LensRegion, MAX_LEVEL, MIN_LEVEL};
use lensdepth::optics::LensKind;
use lensdepth::synth::{textured_fiducial_scene, Fiducial};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fid = Fiducial {
        center_x: 80.0,
        center_y: 80.0,
        width_px: 24.0,
        height_px: 32.0,
        foreground: 0,
    };
    let scene = textured_fiducial_scene(160, 160, &fid, 1)?;
    let region = LensRegion::circle(80.0, 80.0, 50.0)?;
    let calib = Calibration::default();
    let dir = tempfile::tempdir()?;
    write_image(dir.path().join("benign.pgm"), &scene)?;
    for kind in [LensKind::Concave, LensKind::Convex] {
        for level in MIN_LEVEL..=MAX_LEVEL {
            let profile = level_to_profile(kind, level, region, &calib)?;
            let attacked = apply_attack_transform(&scene, &profile)?;
            let path = dir.path().join(format!("{kind}_level_{level}.pgm"));
            write_image(&path, &attacked)?;
            println!(
                "{kind} level {level}: scale {:.3}, blur {} ({:?}) -> {}",
                profile.scale_factor,
                profile.blur_radius,
                profile.blur_placement,
                path.file_name().unwrap().to_string_lossy()
            );
        }
    }
    Ok(())
}
