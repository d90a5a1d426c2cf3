//! The fiducial proxy estimator against the thin-lens prediction.
//!
//! A fiducial of known height is rendered at the apparent size a camera would
//! see through a concave lens, and the proxy recovers its depth.

use lensdepth::estimation::{proxy_estimate_depth, CameraIntrinsics, FiducialSpec, ProxyEstimator};
use lensdepth::optics::{combined_magnification, AttackGeometry, CameraSpec, LensSpec};
use lensdepth::synth::{fiducial_scene, Fiducial};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = CameraIntrinsics::new(0.54, 1200.0)?;
    let spec = FiducialSpec::new(1.5, 128)?;
    let distance = 9.0;
    let geom = AttackGeometry::new(distance, LensSpec::new(-0.2)?, CameraSpec::new(0.026, 0.08)?)?;
    let r = combined_magnification(&geom)?;

    let benign_px = k.focal_px() * 1.5 / distance;
    for (name, height_px) in [("benign", benign_px), ("attacked", benign_px / r.depth_ratio)] {
        let fid = Fiducial {
            center_x: 160.0,
            center_y: 160.0,
            width_px: 60.0,
            height_px,
            foreground: 0,
        };
        let scene = fiducial_scene(320, 320, 220, &fid)?;
        let z = proxy_estimate_depth(&scene, &spec, &k)?;
        println!("{name}: apparent {height_px:.1} px, proxy depth {z:.2} m");
        if name == "attacked" {
            println!("prediction {:.2} m", distance * r.depth_ratio);
            let map = ProxyEstimator::new(spec, k).estimate_map(&scene)?;
            println!("map center {:.2} m, corner {:.2} m", map.get(160, 160), map.get(0, 0));
        }
    }
    Ok(())
}
