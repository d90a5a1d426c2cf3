//! Expected depth for every grid geometry, then the full chain for one lens.

use lensdepth::optics::{
    combined_magnification, expected_depth_grid, AttackGeometry, CameraSpec, LensKind, LensSpec, GRID_CAMERA_FOCAL_M,
};

pub fn main() -> lensdepth::Result<()> {
    for kind in [LensKind::Concave, LensKind::Convex] {
        println!("{kind}: f, d_b, d_o1 -> expected depth");
        for cell in expected_depth_grid(kind, GRID_CAMERA_FOCAL_M)? {
            println!(
                "  {:>5.2} {:>5.2} {:>5.1} -> {:>6.2} m  ({})",
                kind.signed(cell.focal_magnitude_m),
                cell.lens_gap_m,
                cell.object_distance_m,
                cell.expected_depth_m,
                cell.result.scenario
            );
        }
    }

    let geom = AttackGeometry::new(9.0, LensSpec::new(-0.3)?, CameraSpec::new(GRID_CAMERA_FOCAL_M, 0.08)?)?;
    let r = combined_magnification(&geom)?;
    println!("\nf=-0.3 d_b=0.08 d_o1=9");
    println!("  intermediate image {:.4} m, m1 {:.4}", r.d_i1_m, r.m1);
    println!("  camera stage d_o2 {:.4} m, m2 {:.6}", r.d_o2_m, r.m2);
    println!("  m_total {:.6} vs m_ori {:.6}, ratio {:.4}", r.m_total, r.m_ori, r.depth_ratio);
    Ok(())
}
