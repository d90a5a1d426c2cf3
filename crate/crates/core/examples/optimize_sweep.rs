//! Level search over a loss-weight sweep with the proxy estimator, printed as CSV.

use lensdepth::attack_opt::{alpha_sweep, write_sweep_csv, LossConfig, DEFAULT_ALPHAS};
use lensdepth::estimation::{CameraIntrinsics, FiducialSpec, ProxyEstimator};
use lensdepth::imaging::{Calibration, LensRegion, PixelRect};
use lensdepth::optics::LensKind;
use lensdepth::synth::{textured_fiducial_scene, Fiducial};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fid = Fiducial {
        center_x: 96.0,
        center_y: 96.0,
        width_px: 30.0,
        height_px: 40.0,
        foreground: 0,
    };
    let image = textured_fiducial_scene(192, 192, &fid, 4)?;
    let mut proxy = ProxyEstimator::new(FiducialSpec::new(1.0, 128)?, CameraIntrinsics::new(0.54, 600.0)?);
    proxy.texture_gain_m = 5000.0;
    let cfg = LossConfig::targeted(0.0, 25.0, PixelRect::new(93, 93, 99, 99)?, LensRegion::circle(96.0, 96.0, 48.0)?)?;
    let rows = alpha_sweep(&image, &proxy, &cfg, LensKind::Concave, &Calibration::default(), &DEFAULT_ALPHAS)?;
    for row in &rows {
        if let Ok(r) = &row.result {
            let curve: Vec<String> = r.loss_curve.iter().map(|l| format!("{:.1}", l.total)).collect();
            eprintln!("alpha {}: {}", row.alpha, curve.join(" "));
        }
    }
    write_sweep_csv(&rows, std::io::stdout())?;
    Ok(())
}
