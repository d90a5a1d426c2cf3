//! Thin-lens optics of an attack lens placed in front of a camera.
//!
//! Sign conventions: a lens focal length is negative for a concave
//! (diverging) lens and positive for a convex one. Image distances returned
//! by [`thin_lens_image_distance`] are positive for virtual images (same side
//! as the object) and negative for real images. Magnifications are positive
//! for upright images.
//!
//! The camera is always modeled as a convex lens of focal length `f_c`
//! sitting `d_b` behind the attack lens. The intermediate image formed by
//! the attack lens acts as the object for the camera; where that image lands
//! relative to the camera decides which of the combined-magnification
//! formulas applies (see [`ScenarioKind`]).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SINGULAR_EPS: f64 = 1e-12;

/// Focal lengths used by the physical attack grid, in meters.
pub const GRID_FOCAL_LENGTHS_M: [f64; 3] = [0.20, 0.30, 0.50];
/// Lens-to-camera gaps used by the physical attack grid, in meters.
pub const GRID_LENS_GAPS_M: [f64; 4] = [0.02, 0.04, 0.08, 0.12];
/// Object distances used by the physical attack grid, in meters.
pub const GRID_OBJECT_DISTANCES_M: [f64; 3] = [6.0, 9.0, 12.0];
/// Camera focal length used for the physical attack grid (26 mm).
pub const GRID_CAMERA_FOCAL_M: f64 = 0.026;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LensKind {
    Concave,
    Convex,
}

impl LensKind {
    /// Signed focal length for a lens of this kind with the given magnitude.
    pub fn signed(self, magnitude_m: f64) -> f64 {
        match self {
            LensKind::Concave => -magnitude_m.abs(),
            LensKind::Convex => magnitude_m.abs(),
        }
    }
}

impl fmt::Display for LensKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LensKind::Concave => "concave",
            LensKind::Convex => "convex",
        })
    }
}

/// A thin attack lens, described by its signed focal length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensSpec {
    focal_length_m: f64,
}

impl LensSpec {
    pub fn new(focal_length_m: f64) -> Result<Self> {
        if !focal_length_m.is_finite() || focal_length_m == 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "lens focal length must be finite and non-zero, got {focal_length_m}"
            )));
        }
        Ok(LensSpec { focal_length_m })
    }

    pub fn with_kind(kind: LensKind, magnitude_m: f64) -> Result<Self> {
        Self::new(kind.signed(magnitude_m))
    }

    pub fn focal_length_m(&self) -> f64 {
        self.focal_length_m
    }

    pub fn kind(&self) -> LensKind {
        if self.focal_length_m < 0.0 {
            LensKind::Concave
        } else {
            LensKind::Convex
        }
    }
}

/// The victim camera: its lens focal length and the gap to the attack lens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSpec {
    focal_length_m: f64,
    lens_gap_m: f64,
}

impl CameraSpec {
    pub fn new(focal_length_m: f64, lens_gap_m: f64) -> Result<Self> {
        if !(focal_length_m.is_finite() && focal_length_m > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "camera focal length must be positive, got {focal_length_m}"
            )));
        }
        if !(lens_gap_m.is_finite() && lens_gap_m > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "lens gap must be positive, got {lens_gap_m}"
            )));
        }
        Ok(CameraSpec {
            focal_length_m,
            lens_gap_m,
        })
    }

    pub fn focal_length_m(&self) -> f64 {
        self.focal_length_m
    }

    pub fn lens_gap_m(&self) -> f64 {
        self.lens_gap_m
    }
}

/// Object, optional attack lens and camera along one optical axis.
///
/// `lens == None` is the pass-through (benign) configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackGeometry {
    object_distance_m: f64,
    lens: Option<LensSpec>,
    camera: CameraSpec,
}

impl AttackGeometry {
    pub fn new(object_distance_m: f64, lens: LensSpec, camera: CameraSpec) -> Result<Self> {
        Self::build(object_distance_m, Some(lens), camera)
    }

    pub fn pass_through(object_distance_m: f64, camera: CameraSpec) -> Result<Self> {
        Self::build(object_distance_m, None, camera)
    }

    fn build(object_distance_m: f64, lens: Option<LensSpec>, camera: CameraSpec) -> Result<Self> {
        if !(object_distance_m.is_finite() && object_distance_m > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "object distance must be positive, got {object_distance_m}"
            )));
        }
        Ok(AttackGeometry {
            object_distance_m,
            lens,
            camera,
        })
    }

    pub fn object_distance_m(&self) -> f64 {
        self.object_distance_m
    }

    pub fn lens(&self) -> Option<LensSpec> {
        self.lens
    }

    pub fn camera(&self) -> CameraSpec {
        self.camera
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// No attack lens.
    PassThrough,
    Concave,
    /// Convex lens with the object inside its focal length.
    ConvexNearObject,
    /// Convex lens whose real image forms between the attack lens and the camera.
    ConvexFarLens,
    /// Convex lens whose real image would form behind the camera lens.
    ConvexNearLens,
}

impl ScenarioKind {
    /// Whether the configuration is physically usable against a vehicle camera
    /// (short lens gap, distant object, upright image).
    pub fn feasible_in_ad(self) -> bool {
        matches!(
            self,
            ScenarioKind::PassThrough | ScenarioKind::Concave | ScenarioKind::ConvexNearLens
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::PassThrough => "PassThrough",
            ScenarioKind::Concave => "Concave",
            ScenarioKind::ConvexNearObject => "ConvexNearObject",
            ScenarioKind::ConvexFarLens => "ConvexFarLens",
            ScenarioKind::ConvexNearLens => "ConvexNearLens",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every intermediate quantity of the two-lens imaging chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticsResult {
    pub d_i1_m: f64,
    pub m1: f64,
    /// Distance from the intermediate image to the camera lens, as used by
    /// the camera stage.
    pub d_o2_m: f64,
    pub d_i2_m: f64,
    pub m2: f64,
    pub m_total: f64,
    pub m_ori: f64,
    pub depth_ratio: f64,
    pub scenario: ScenarioKind,
}

fn check_denominator(den: f64, scale: f64, what: &str) -> Result<()> {
    if den.abs() <= SINGULAR_EPS * scale.abs().max(1.0) || !den.is_finite() {
        return Err(Error::SingularConfiguration(format!("{what} is zero")));
    }
    Ok(())
}

fn check_object_distance(d_o: f64) -> Result<()> {
    if !(d_o.is_finite() && d_o > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "object distance must be positive, got {d_o}"
        )));
    }
    Ok(())
}

/// Image distance `-d_o·f/(d_o − f)` of a single thin lens.
pub fn thin_lens_image_distance(focal_m: f64, d_o: f64) -> Result<f64> {
    check_object_distance(d_o)?;
    let den = d_o - focal_m;
    check_denominator(den, d_o.max(focal_m.abs()), "object distance minus focal length")?;
    Ok(-d_o * focal_m / den)
}

/// Lateral magnification `-f/(d_o − f)` of a single thin lens.
pub fn magnification(focal_m: f64, d_o: f64) -> Result<f64> {
    check_object_distance(d_o)?;
    let den = d_o - focal_m;
    check_denominator(den, d_o.max(focal_m.abs()), "object distance minus focal length")?;
    Ok(-focal_m / den)
}

/// Magnification of the camera alone for an object `d_o1` in front of the
/// attack lens position, i.e. `d_o1 + d_b` in front of the camera.
pub fn baseline_magnification(camera: &CameraSpec, d_o1: f64) -> Result<f64> {
    check_object_distance(d_o1)?;
    let fc = camera.focal_length_m();
    let den = d_o1 + camera.lens_gap_m() - fc;
    check_denominator(den, d_o1 + camera.lens_gap_m(), "camera object distance minus f_c")?;
    Ok(-fc / den)
}

pub fn classify_scenario(geom: &AttackGeometry) -> Result<ScenarioKind> {
    let Some(lens) = geom.lens else {
        return Ok(ScenarioKind::PassThrough);
    };
    let f = lens.focal_length_m();
    if f < 0.0 {
        return Ok(ScenarioKind::Concave);
    }
    let d_o1 = geom.object_distance_m;
    if d_o1 < f {
        return Ok(ScenarioKind::ConvexNearObject);
    }
    let d_i1 = thin_lens_image_distance(f, d_o1)?;
    if geom.camera.lens_gap_m() >= d_i1.abs() {
        Ok(ScenarioKind::ConvexFarLens)
    } else {
        Ok(ScenarioKind::ConvexNearLens)
    }
}

/// Full two-stage evaluation of the lens chain.
///
/// The camera-stage object distance depends on the scenario:
/// `|d_i1| + d_b` (concave, convex near object), `d_b − |d_i1|`
/// (convex, image between the lenses) or `|d_i1| − d_b` (convex, image
/// behind the camera lens).
pub fn combined_magnification(geom: &AttackGeometry) -> Result<OpticsResult> {
    let scenario = classify_scenario(geom)?;
    let camera = geom.camera;
    let fc = camera.focal_length_m();
    let d_b = camera.lens_gap_m();
    let d_o1 = geom.object_distance_m;

    let (d_i1, m1) = match geom.lens {
        // The unchanged object acts as its own virtual image.
        None => (d_o1, 1.0),
        Some(lens) => {
            let f = lens.focal_length_m();
            (thin_lens_image_distance(f, d_o1)?, magnification(f, d_o1)?)
        }
    };
    let image = d_i1.abs();
    let d_o2 = match scenario {
        ScenarioKind::PassThrough | ScenarioKind::Concave | ScenarioKind::ConvexNearObject => {
            image + d_b
        }
        ScenarioKind::ConvexFarLens => d_b - image,
        ScenarioKind::ConvexNearLens => image - d_b,
    };
    let den = d_o2 - fc;
    check_denominator(den, image + d_b, "camera-stage object distance minus f_c")?;
    let d_i2 = -d_o2 * fc / den;
    let m2 = -fc / den;
    let m_total = m1 * m2;
    let m_ori = baseline_magnification(&camera, d_o1)?;
    if m_total == 0.0 || !m_total.is_finite() {
        return Err(Error::SingularConfiguration(
            "total magnification is zero".into(),
        ));
    }
    Ok(OpticsResult {
        d_i1_m: d_i1,
        m1,
        d_o2_m: d_o2,
        d_i2_m: d_i2,
        m2,
        m_total,
        m_ori,
        depth_ratio: (m_ori / m_total).abs(),
        scenario,
    })
}

/// Depth the victim perceives: the true object distance scaled by
/// `|m_ori / m_total|`.
pub fn expected_depth(geom: &AttackGeometry) -> Result<f64> {
    if geom.lens.is_none() {
        return Ok(geom.object_distance_m);
    }
    let result = combined_magnification(geom)?;
    Ok(result.depth_ratio * geom.object_distance_m)
}

/// Pinhole projection: apparent size `h·b/d` of an object of height `h` at
/// distance `d` on a sensor `b` behind the pinhole.
pub fn pinhole_apparent_size(object_height_m: f64, distance_m: f64, sensor_gap_m: f64) -> Result<f64> {
    for (name, v) in [
        ("object height", object_height_m),
        ("distance", distance_m),
        ("sensor gap", sensor_gap_m),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidGeometry(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(object_height_m * sensor_gap_m / distance_m)
}

/// One cell of the expected-depth grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub kind: LensKind,
    pub focal_magnitude_m: f64,
    pub lens_gap_m: f64,
    pub object_distance_m: f64,
    pub result: OpticsResult,
    pub expected_depth_m: f64,
}

/// Evaluates every (f, d_b, d_o1) combination of the physical attack grid for
/// one lens kind, rows ordered by f, then d_b, then d_o1.
pub fn expected_depth_grid(kind: LensKind, camera_focal_m: f64) -> Result<Vec<GridCell>> {
    let mut cells = Vec::with_capacity(36);
    for &f in &GRID_FOCAL_LENGTHS_M {
        for &d_b in &GRID_LENS_GAPS_M {
            for &d_o1 in &GRID_OBJECT_DISTANCES_M {
                let geom = AttackGeometry::new(
                    d_o1,
                    LensSpec::with_kind(kind, f)?,
                    CameraSpec::new(camera_focal_m, d_b)?,
                )?;
                let result = combined_magnification(&geom)?;
                cells.push(GridCell {
                    kind,
                    focal_magnitude_m: f,
                    lens_gap_m: d_b,
                    object_distance_m: d_o1,
                    result,
                    expected_depth_m: result.depth_ratio * d_o1,
                });
            }
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(f: f64, fc: f64, d_b: f64, d_o1: f64) -> AttackGeometry {
        AttackGeometry::new(
            d_o1,
            LensSpec::new(f).unwrap(),
            CameraSpec::new(fc, d_b).unwrap(),
        )
        .unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn image_distance_signs() {
        assert!(close(thin_lens_image_distance(-0.20, 6.0).unwrap(), 0.193548, 1e-6));
        assert!(close(thin_lens_image_distance(0.20, 6.0).unwrap(), -0.206897, 1e-6));
        assert!(close(thin_lens_image_distance(0.20, 0.40).unwrap(), -0.40, 1e-12));
    }

    #[test]
    fn magnification_values() {
        assert!(close(magnification(-0.20, 6.0).unwrap(), 0.032258, 1e-6));
        assert!(close(magnification(0.20, 6.0).unwrap(), -0.034483, 1e-6));
        assert!(close(magnification(0.20, 0.40).unwrap(), -1.0, 1e-12));
    }

    #[test]
    fn object_at_focal_point_is_singular() {
        assert!(matches!(
            thin_lens_image_distance(0.2, 0.2),
            Err(Error::SingularConfiguration(_))
        ));
        assert!(matches!(
            magnification(0.2, 0.2),
            Err(Error::SingularConfiguration(_))
        ));
        let g = geom(0.2, 0.026, 0.04, 0.2);
        assert!(matches!(
            expected_depth(&g),
            Err(Error::SingularConfiguration(_))
        ));
    }

    #[test]
    fn baseline_values() {
        let cam = CameraSpec::new(0.026, 0.04).unwrap();
        assert!(close(baseline_magnification(&cam, 6.0).unwrap(), -0.0043233, 1e-7));
        let cam = CameraSpec::new(0.026, 0.12).unwrap();
        assert!(close(baseline_magnification(&cam, 9.0).unwrap(), -0.0028590, 1e-7));
        // d_o1 + d_b = 2 f_c
        let cam = CameraSpec::new(0.026, 0.012).unwrap();
        assert!(close(baseline_magnification(&cam, 0.040).unwrap(), -1.0, 1e-12));
        let cam = CameraSpec::new(0.5, 0.25).unwrap();
        assert!(matches!(
            baseline_magnification(&cam, 0.25),
            Err(Error::SingularConfiguration(_))
        ));
    }

    #[test]
    fn classification() {
        let s = classify_scenario(&geom(-0.30, 0.026, 0.12, 9.0)).unwrap();
        assert_eq!(s, ScenarioKind::Concave);
        assert!(s.feasible_in_ad());
        let s = classify_scenario(&geom(0.20, 0.026, 0.04, 6.0)).unwrap();
        assert_eq!(s, ScenarioKind::ConvexNearLens);
        assert!(s.feasible_in_ad());
        let s = classify_scenario(&geom(0.20, 0.026, 0.04, 0.10)).unwrap();
        assert_eq!(s, ScenarioKind::ConvexNearObject);
        assert!(!s.feasible_in_ad());
        let s = classify_scenario(&geom(0.20, 0.026, 0.30, 6.0)).unwrap();
        assert_eq!(s, ScenarioKind::ConvexFarLens);
        assert!(!s.feasible_in_ad());
    }

    #[test]
    fn gap_equal_to_image_distance_is_far_lens() {
        // f = 0.25, d_o1 = 0.5 images at exactly 0.5.
        let g = geom(0.25, 0.026, 0.5, 0.5);
        assert_eq!(classify_scenario(&g).unwrap(), ScenarioKind::ConvexFarLens);
    }

    #[test]
    fn combined_examples() {
        let r = combined_magnification(&geom(-0.20, 0.026, 0.04, 6.0)).unwrap();
        assert!(close(r.m_total, -0.0040410, 1e-7), "{}", r.m_total);
        let r = combined_magnification(&geom(0.20, 0.026, 0.04, 6.0)).unwrap();
        assert!(close(r.m_total, 0.0063632, 1e-7), "{}", r.m_total);
        let r = combined_magnification(&geom(0.20, 0.026, 0.30, 6.0)).unwrap();
        assert_eq!(r.scenario, ScenarioKind::ConvexFarLens);
        assert!(close(r.m_total, 0.013361, 1e-6), "{}", r.m_total);
        assert!(((r.m1 * r.m2 - r.m_total) / r.m_total).abs() < 1e-12);
    }

    #[test]
    fn expected_depth_examples() {
        let d = expected_depth(&geom(-0.20, 0.026, 0.04, 6.0)).unwrap();
        assert!(close(d, 6.42, 0.005), "{d}");
        let d = expected_depth(&geom(0.20, 0.026, 0.04, 6.0)).unwrap();
        assert!(close(d, 4.08, 0.005), "{d}");
        let d = expected_depth(&geom(-0.30, 0.026, 0.12, 9.0)).unwrap();
        assert!(close(d, 11.79, 0.005), "{d}");
        let cam = CameraSpec::new(0.026, 0.04).unwrap();
        let d = expected_depth(&AttackGeometry::pass_through(6.0, cam).unwrap()).unwrap();
        assert_eq!(d, 6.0);
    }

    #[test]
    fn pass_through_ratio_is_one() {
        let cam = CameraSpec::new(0.026, 0.04).unwrap();
        let r = combined_magnification(&AttackGeometry::pass_through(6.0, cam).unwrap()).unwrap();
        assert_eq!(r.scenario, ScenarioKind::PassThrough);
        assert!((r.depth_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinhole() {
        assert!(close(pinhole_apparent_size(1.5, 15.0, 0.026).unwrap(), 0.0026, 1e-12));
        assert!(close(pinhole_apparent_size(1.5, 30.0, 0.026).unwrap(), 0.0013, 1e-12));
        assert_eq!(pinhole_apparent_size(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!(pinhole_apparent_size(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn invalid_types_are_rejected() {
        assert!(LensSpec::new(0.0).is_err());
        assert!(CameraSpec::new(-0.026, 0.04).is_err());
        assert!(CameraSpec::new(0.026, 0.0).is_err());
        let cam = CameraSpec::new(0.026, 0.04).unwrap();
        assert!(AttackGeometry::new(-1.0, LensSpec::new(0.2).unwrap(), cam).is_err());
    }

    #[test]
    fn concave_ratio_grows_as_focal_length_shrinks() {
        let mut prev = 0.0;
        // f from -0.5 to -0.1: |f| decreasing, ratio must increase
        for i in 0..=40 {
            let f = -0.5 + 0.01 * i as f64;
            let r = combined_magnification(&geom(f, 0.026, 0.06, 9.0)).unwrap();
            assert!(r.depth_ratio > prev, "f={f}");
            prev = r.depth_ratio;
        }
    }

    #[test]
    fn concave_ratio_grows_with_gap() {
        let mut prev = 0.0;
        for i in 0..=50 {
            let d_b = 0.02 + 0.002 * i as f64;
            let r = combined_magnification(&geom(-0.3, 0.026, d_b, 9.0)).unwrap();
            assert!(r.depth_ratio > prev, "d_b={d_b}");
            prev = r.depth_ratio;
        }
    }

    #[test]
    fn grid_ratios_straddle_one() {
        for cell in expected_depth_grid(LensKind::Concave, GRID_CAMERA_FOCAL_M).unwrap() {
            assert_eq!(cell.result.scenario, ScenarioKind::Concave);
            // the smallest gap still shrinks depth slightly
            assert_eq!(cell.result.depth_ratio > 1.0, cell.lens_gap_m > 0.02, "{cell:?}");
        }
        for cell in expected_depth_grid(LensKind::Convex, GRID_CAMERA_FOCAL_M).unwrap() {
            assert_eq!(cell.result.scenario, ScenarioKind::ConvexNearLens);
            assert!(cell.result.depth_ratio < 1.0);
        }
    }
}
