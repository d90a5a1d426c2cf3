//! Black-box search for the attack level minimizing
//! `L_total = (1 − α)·L_veh + α·L_out`.
//!
//! `L_veh` pulls the masked vehicle estimate toward a target (targeted mode)
//! or pushes it away from the benign estimate (untargeted mode, negative
//! loss). `L_out` keeps the out-of-lens estimate close to the benign one.
//! All reductions are means over the valid masked pixels.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{load_map, masked_mean, ProxyEstimator, ScalarMap};
use crate::imaging::{
    apply_attack_transform, level_to_profile, region_masks, Calibration, LensRegion, Mask, PixelRect, RasterImage,
    MAX_LEVEL, MIN_LEVEL,
};
use crate::metrics::{adr, aer, MetricName};
use crate::optics::LensKind;

/// Target disparity for concave-lens targeted attacks.
pub const CONCAVE_TARGET_DISPARITY: f64 = 0.43;
/// Target disparity for convex-lens targeted attacks.
pub const CONVEX_TARGET_DISPARITY: f64 = 0.60;
/// Divisor bringing Lite-Mono disparities onto the scale of the other estimators.
pub const LITE_MONO_DISPARITY_SCALE: f64 = 5.4;
/// Weights explored by the default sweep.
pub const DEFAULT_ALPHAS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    Targeted,
    Untargeted,
}

impl AttackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackMode::Targeted => "targeted",
            AttackMode::Untargeted => "untargeted",
        }
    }

    pub fn metric(self) -> MetricName {
        match self {
            AttackMode::Targeted => MetricName::Aer,
            AttackMode::Untargeted => MetricName::Adr,
        }
    }
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub alpha: f64,
    pub mode: AttackMode,
    /// Target value for targeted attacks, in the estimator's output units.
    pub y_tar: Option<f64>,
    pub vehicle_box: PixelRect,
    pub region: LensRegion,
}

impl LossConfig {
    pub fn targeted(alpha: f64, y_tar: f64, vehicle_box: PixelRect, region: LensRegion) -> Result<Self> {
        let cfg = LossConfig {
            alpha,
            mode: AttackMode::Targeted,
            y_tar: Some(y_tar),
            vehicle_box,
            region,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn untargeted(alpha: f64, vehicle_box: PixelRect, region: LensRegion) -> Result<Self> {
        let cfg = LossConfig {
            alpha,
            mode: AttackMode::Untargeted,
            y_tar: None,
            vehicle_box,
            region,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        let cfg = LossConfig { alpha, ..self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.mode == AttackMode::Targeted {
            match self.y_tar {
                Some(y) if y.is_finite() && y > 0.0 => {}
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "targeted mode needs a positive y_tar, got {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// Which frame an estimator is being asked about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateInput {
    Benign,
    Level(u8),
}

/// A depth (or disparity) estimator treated as a black box.
pub trait Estimator: Sync {
    fn estimate(&self, image: &RasterImage, input: EstimateInput) -> Result<ScalarMap>;
}

impl Estimator for ProxyEstimator {
    fn estimate(&self, image: &RasterImage, _input: EstimateInput) -> Result<ScalarMap> {
        self.estimate_map(image)
    }
}

impl<F> Estimator for F
where
    F: Fn(&RasterImage, EstimateInput) -> Result<ScalarMap> + Sync,
{
    fn estimate(&self, image: &RasterImage, input: EstimateInput) -> Result<ScalarMap> {
        self(image, input)
    }
}

/// Precomputed estimator outputs: `benign.{pfm,pgm}` and `level_<n>.{pfm,pgm}`
/// in one directory. PGM maps need their `.scale` sidecar.
#[derive(Debug, Clone)]
pub struct MapDirectoryEstimator {
    dir: PathBuf,
}

impl MapDirectoryEstimator {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        MapDirectoryEstimator { dir: dir.into() }
    }

    pub fn path_for(&self, input: EstimateInput) -> PathBuf {
        let stem = match input {
            EstimateInput::Benign => "benign".to_string(),
            EstimateInput::Level(l) => format!("level_{l}"),
        };
        let pfm = self.dir.join(format!("{stem}.pfm"));
        if pfm.exists() {
            return pfm;
        }
        let pgm = self.dir.join(format!("{stem}.pgm"));
        if pgm.exists() {
            pgm
        } else {
            pfm
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl Estimator for MapDirectoryEstimator {
    fn estimate(&self, image: &RasterImage, input: EstimateInput) -> Result<ScalarMap> {
        load_map(self.path_for(input), Some(image.dims()))
    }
}

fn mean_abs_diff(a: &ScalarMap, b: &ScalarMap, mask: &Mask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    if mask.dims() != a.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            actual: mask.dims(),
        });
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((x, y), &m) in a.values().iter().zip(b.values()).zip(mask.bits()) {
        if m && x.is_finite() && y.is_finite() {
            sum += (x - y).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / n as f64)
}

/// Mean absolute difference between attacked and benign estimates over the
/// out-of-lens mask.
pub fn loss_out(est_att: &ScalarMap, est_benign: &ScalarMap, m_out: &Mask) -> Result<f64> {
    mean_abs_diff(est_att, est_benign, m_out)
}

/// Mean `|est − y_tar|` over the vehicle mask.
pub fn loss_vehicle_targeted(est_att: &ScalarMap, m_veh: &Mask, y_tar: f64) -> Result<f64> {
    let target = ScalarMap::filled(est_att.width(), est_att.height(), y_tar)?;
    mean_abs_diff(est_att, &target, m_veh)
}

/// Negated mean deviation from the benign estimate over the vehicle mask.
pub fn loss_vehicle_untargeted(est_att: &ScalarMap, est_benign: &ScalarMap, m_veh: &Mask) -> Result<f64> {
    Ok(-mean_abs_diff(est_att, est_benign, m_veh)?)
}

pub fn loss_total(l_veh: f64, l_out: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * l_veh + alpha * l_out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRow {
    pub level: u8,
    pub total: f64,
    pub vehicle: f64,
    pub out_of_lens: f64,
    /// Masked mean of the attacked estimate over the vehicle box.
    pub vehicle_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_level: u8,
    pub best_loss: f64,
    /// One row per candidate level, ascending.
    pub loss_curve: Vec<LossRow>,
    pub metric: MetricName,
    pub metric_value: f64,
}

struct Prepared {
    benign_map: ScalarMap,
    benign_vehicle_mean: f64,
    m_veh: Mask,
    m_out: Mask,
}

fn prepare(benign: &RasterImage, estimator: &dyn Estimator, cfg: &LossConfig) -> Result<Prepared> {
    cfg.validate()?;
    let (w, h) = benign.dims();
    let benign_map = estimator.estimate(benign, EstimateInput::Benign)?;
    if benign_map.dims() != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            actual: benign_map.dims(),
        });
    }
    let m_veh = Mask::from_rect(w, h, cfg.vehicle_box);
    let benign_vehicle_mean = masked_mean(&benign_map, &m_veh)?;
    let m_out = region_masks(w, h, cfg.region).out_of_lens;
    Ok(Prepared {
        benign_map,
        benign_vehicle_mean,
        m_veh,
        m_out,
    })
}

fn evaluate_level(
    benign: &RasterImage,
    estimator: &dyn Estimator,
    cfg: &LossConfig,
    lens_kind: LensKind,
    calibration: &Calibration,
    prepared: &Prepared,
    level: u8,
) -> Result<LossRow> {
    let profile = level_to_profile(lens_kind, level, cfg.region, calibration)?;
    let attacked = apply_attack_transform(benign, &profile)?;
    let map = estimator.estimate(&attacked, EstimateInput::Level(level))?;
    let vehicle = match cfg.mode {
        AttackMode::Targeted => loss_vehicle_targeted(&map, &prepared.m_veh, cfg.y_tar.unwrap_or_default())?,
        AttackMode::Untargeted => loss_vehicle_untargeted(&map, &prepared.benign_map, &prepared.m_veh)?,
    };
    // A full-frame lens leaves nothing outside it to preserve.
    let out_of_lens = if prepared.m_out.is_empty() {
        0.0
    } else {
        loss_out(&map, &prepared.benign_map, &prepared.m_out)?
    };
    Ok(LossRow {
        level,
        total: loss_total(vehicle, out_of_lens, cfg.alpha),
        vehicle,
        out_of_lens,
        vehicle_mean: masked_mean(&map, &prepared.m_veh)?,
    })
}

/// Exhaustive search over `levels`. Ties resolve to the smallest level.
pub fn optimize_levels(
    benign: &RasterImage,
    estimator: &dyn Estimator,
    cfg: &LossConfig,
    lens_kind: LensKind,
    calibration: &Calibration,
    levels: &[u8],
) -> Result<OptimizationResult> {
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    if levels.is_empty() {
        return Err(Error::InvalidParameter("no candidate levels".into()));
    }
    if let Some(&bad) = levels.iter().find(|l| !(MIN_LEVEL..=MAX_LEVEL).contains(l)) {
        return Err(Error::BadLevel(bad));
    }
    let prepared = prepare(benign, estimator, cfg)?;
    let rows: Vec<Result<LossRow>> = levels
        .par_iter()
        .map(|&level| {
            evaluate_level(benign, estimator, cfg, lens_kind, calibration, &prepared, level).map_err(|e| {
                Error::AtLevel {
                    level,
                    source: Box::new(e),
                }
            })
        })
        .collect();
    let loss_curve = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut best = &loss_curve[0];
    for row in &loss_curve[1..] {
        if row.total < best.total {
            best = row;
        }
    }
    let metric = cfg.mode.metric();
    let metric_value = match cfg.mode {
        AttackMode::Targeted => aer(best.vehicle_mean, cfg.y_tar.unwrap_or_default())?,
        AttackMode::Untargeted => adr(best.vehicle_mean, prepared.benign_vehicle_mean)?,
    };
    Ok(OptimizationResult {
        best_level: best.level,
        best_loss: best.total,
        metric,
        metric_value,
        loss_curve,
    })
}

/// [`optimize_levels`] over all nine levels.
pub fn optimize_level(
    benign: &RasterImage,
    estimator: &dyn Estimator,
    cfg: &LossConfig,
    lens_kind: LensKind,
    calibration: &Calibration,
) -> Result<OptimizationResult> {
    let all: Vec<u8> = (MIN_LEVEL..=MAX_LEVEL).collect();
    optimize_levels(benign, estimator, cfg, lens_kind, calibration, &all)
}

#[derive(Debug)]
pub struct SweepRow {
    pub alpha: f64,
    pub mode: AttackMode,
    pub result: Result<OptimizationResult>,
}

/// One optimization per weight, in the given order. Failures are kept per row.
pub fn alpha_sweep(
    benign: &RasterImage,
    estimator: &dyn Estimator,
    base_cfg: &LossConfig,
    lens_kind: LensKind,
    calibration: &Calibration,
    alphas: &[f64],
) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() {
        return Err(Error::InvalidParameter("alpha list is empty".into()));
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    Ok(alphas
        .iter()
        .map(|&alpha| {
            let result = base_cfg
                .with_alpha(alpha)
                .and_then(|cfg| optimize_level(benign, estimator, &cfg, lens_kind, calibration));
            SweepRow {
                alpha,
                mode: base_cfg.mode,
                result,
            }
        })
        .collect())
}

pub const SWEEP_CSV_HEADER: [&str; 6] = ["alpha", "mode", "best_level", "best_loss", "metric_name", "metric_value"];

/// Writes sweep rows as CSV. Failed rows carry `failed` in `best_level`,
/// `error` in `metric_name` and the message in `metric_value`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
    w.write_record(SWEEP_CSV_HEADER).map_err(io_err)?;
    for row in rows {
        let record = match &row.result {
            Ok(r) => [
                row.alpha.to_string(),
                row.mode.to_string(),
                r.best_level.to_string(),
                r.best_loss.to_string(),
                r.metric.as_str().to_string(),
                r.metric_value.to_string(),
            ],
            Err(e) => [
                row.alpha.to_string(),
                row.mode.to_string(),
                "failed".to_string(),
                String::new(),
                "error".to_string(),
                e.to_string(),
            ],
        };
        w.write_record(&record).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
