//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

/// Paraxial two-stage trace on a shared optical axis.
///
/// The attack lens sits at x = 0, the object at x = −d_o1 and the camera lens
/// at x = +d_b. Each stage uses the Gaussian form with real distances
/// positive (`1/d_o + 1/d_i = 1/f`, `m = −d_i/d_o`). The intermediate image is
/// placed on the axis and the camera sees it at its plain distance from the
/// camera lens. Returns `(m_total, m_ori, expected_depth)`.
pub fn raytrace(f: f64, fc: f64, d_b: f64, d_o1: f64) -> Option<(f64, f64, f64)> {
    let gauss = |focal: f64, d_o: f64| -> Option<(f64, f64)> {
        let den = d_o - focal;
        if den.abs() < 1e-9 {
            return None;
        }
        let d_i = d_o * focal / den;
        Some((d_i, -d_i / d_o))
    };
    let (d_i1, m1) = gauss(f, d_o1)?;
    // real images land right of the lens, virtual ones left of it
    let image_x = d_i1;
    let camera_x = d_b;
    let d_o2 = (camera_x - image_x).abs();
    let (_, m2) = gauss(fc, d_o2)?;
    let (_, m_ori) = gauss(fc, d_o1 + d_b)?;
    let m_total = m1 * m2;
    if m_total == 0.0 {
        return None;
    }
    Some((m_total, m_ori, (m_ori / m_total).abs() * d_o1))
}

/// Mean of `values` where `mask` is set.
pub fn mean_where(values: &[f64], mask: &[bool]) -> f64 {
    let (s, n) = values
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    s / n as f64
}
