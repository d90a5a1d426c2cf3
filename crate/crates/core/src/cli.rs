//! Command-line front end.
//!
//! Every option can also come from a TOML file passed with `--config`. Keys
//! are the long flag names; a `[<command>]` table overrides top-level keys,
//! and flags override both. Exit codes: 0 success, 1 domain failure
//! (singular optics, missing fiducial...), 2 usage or I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::attack_opt::{
    alpha_sweep, write_sweep_csv, EstimateInput, Estimator, LossConfig, MapDirectoryEstimator,
    CONCAVE_TARGET_DISPARITY, CONVEX_TARGET_DISPARITY, DEFAULT_ALPHAS,
};
use crate::defense::{
    lbp_sharpness_map, segment_blur, varlap_verdict, DEFAULT_LBP_DELTA, DEFAULT_LBP_THRESHOLD, DEFAULT_TILE_PX,
    DEFAULT_VARLAP_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::estimation::{
    load_boxes, load_map, masked_mean, CameraIntrinsics, FiducialSpec, MapKind, ProxyEstimator, ScalarMap,
};
use crate::imaging::netpbm::{read_image, write_image};
use crate::imaging::{
    apply_attack_transform, level_to_profile, region_masks, AttackProfile, BlurPlacement, Calibration, LensRegion,
    Mask, RasterImage,
};
use crate::metrics::{adr, aer, MetricName};
use crate::optics::{
    combined_magnification, expected_depth, expected_depth_grid, AttackGeometry, CameraSpec, LensKind, LensSpec,
    GRID_CAMERA_FOCAL_M,
};
use crate::report::sig6;
use crate::scenario::{run_scenario, write_tick_csv, ScenarioConfig};

pub const DEFAULT_LENS_GAP_M: f64 = 0.04;

#[derive(Debug, Parser)]
#[command(name = "lensdepth", version, about = "Lens-attack optics, synthesis, search, defenses and braking scenarios")]
struct Cli {
    /// TOML file of default option values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expected depth through a lens/camera pair, or the full grid as CSV.
    Optics(OpticsArgs),
    /// Write an attacked image.
    Simulate(SimulateArgs),
    /// Sweep the loss weight and report the best attack level per weight.
    Optimize(OptimizeArgs),
    /// ADR / AER from scalars or masked map means.
    Metrics(MetricsArgs),
    /// Blur verdict for an image.
    Defend(DefendArgs),
    /// Closed-loop braking run.
    Scenario(ScenarioArgs),
}

#[derive(Debug, Args)]
struct OpticsArgs {
    /// concave or convex; defaults to the sign of --f.
    #[arg(long)]
    lens: Option<String>,
    /// Attack-lens focal length in meters.
    #[arg(long, allow_hyphen_values = true)]
    f: Option<f64>,
    /// Lens-to-camera gap in meters.
    #[arg(long)]
    db: Option<f64>,
    /// Object distance in meters.
    #[arg(long)]
    do1: Option<f64>,
    /// Camera focal length in meters.
    #[arg(long)]
    fc: Option<f64>,
    /// Print the whole grid for this lens kind as CSV.
    #[arg(long, value_name = "KIND")]
    table: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    lens: Option<String>,
    /// Discrete attack level 1..=9.
    #[arg(long, conflicts_with = "scale")]
    level: Option<u8>,
    /// In-lens scale factor.
    #[arg(long)]
    scale: Option<f64>,
    /// Box-blur radius in pixels (with --scale).
    #[arg(long)]
    blur: Option<usize>,
    /// Lens circle as `cx,cy,r` in pixels; full frame when absent.
    #[arg(long)]
    circle: Option<String>,
    /// Blur side: in or out.
    #[arg(long)]
    placement: Option<String>,
    /// TOML level calibration.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Also write `<output stem>_in_mask.pgm` and `<output stem>_out_mask.pgm`.
    #[arg(long)]
    emit_masks: bool,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[arg(long)]
    benign: Option<PathBuf>,
    /// proxy or maps.
    #[arg(long)]
    estimator: Option<String>,
    /// Directory of `benign` and `level_<n>` maps (PFM, or PGM with `.scale` sidecar).
    #[arg(long)]
    maps: Option<PathBuf>,
    /// Divide every loaded map by this constant.
    #[arg(long)]
    rescale: Option<f64>,
    /// targeted or untargeted.
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated loss weights.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Box file; the first box is the vehicle.
    #[arg(long)]
    boxes: Option<PathBuf>,
    #[arg(long)]
    lens: Option<String>,
    /// Target value in estimator units; defaults per lens kind.
    #[arg(long)]
    y_tar: Option<f64>,
    #[arg(long)]
    circle: Option<String>,
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Physical fiducial height in meters (proxy).
    #[arg(long)]
    fiducial_height: Option<f64>,
    /// Luma below which a pixel belongs to the fiducial (proxy).
    #[arg(long)]
    fiducial_threshold: Option<u8>,
    #[arg(long)]
    baseline: Option<f64>,
    #[arg(long)]
    focal_px: Option<f64>,
    /// depth or disparity (proxy).
    #[arg(long)]
    proxy_output: Option<String>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// adr or aer.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    attacked: Option<f64>,
    /// Benign value (ADR) or target (AER).
    #[arg(long)]
    reference: Option<f64>,
    #[arg(long)]
    attacked_map: Option<PathBuf>,
    #[arg(long)]
    reference_map: Option<PathBuf>,
    #[arg(long)]
    boxes: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DefendArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// varlap or lbp.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    /// LBP tile size in pixels.
    #[arg(long)]
    tile: Option<usize>,
    /// LBP neighbor difference threshold.
    #[arg(long)]
    delta: Option<u8>,
    /// Write the blur mask as PGM.
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[arg(long)]
    gap0: Option<f64>,
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long)]
    decel: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_time: Option<f64>,
    /// Derive the ratio from --lens/--f/--db/--do1/--fc.
    #[arg(long)]
    ratio_from_optics: bool,
    #[arg(long)]
    lens: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    f: Option<f64>,
    #[arg(long)]
    db: Option<f64>,
    #[arg(long)]
    do1: Option<f64>,
    #[arg(long)]
    fc: Option<f64>,
    /// Tick log CSV destination.
    #[arg(long)]
    log: Option<PathBuf>,
}

/// Option values from a config file, looked up in `[section]` then at top level.
struct Settings {
    table: toml::Table,
    section: &'static str,
}

impl Settings {
    fn load(path: Option<&Path>, section: &'static str) -> Result<Self> {
        let table = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::parse(e.span().map_or(0, |s| s.start), e.message().to_string()))?
            }
        };
        Ok(Settings { table, section })
    }

    fn raw(&self, key: &str) -> Option<&toml::Value> {
        self.table
            .get(self.section)
            .and_then(|s| s.as_table())
            .and_then(|s| s.get(key))
            .or_else(|| self.table.get(key).filter(|v| !v.is_table()))
    }

    fn bad(&self, key: &str, want: &str) -> Error {
        Error::InvalidParameter(format!("config key `{key}` must be {want}"))
    }

    fn f64(&self, key: &str, flag: Option<f64>) -> Result<Option<f64>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(*v)),
            Some(toml::Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(_) => Err(self.bad(key, "a number")),
        }
    }

    fn uint(&self, key: &str, flag: Option<u64>) -> Result<Option<u64>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
            Some(_) => Err(self.bad(key, "a non-negative integer")),
        }
    }

    fn string(&self, key: &str, flag: Option<String>) -> Result<Option<String>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(self.bad(key, "a string")),
        }
    }

    fn path(&self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        Ok(self.string(key, flag.map(|p| p.to_string_lossy().into_owned()))?.map(PathBuf::from))
    }

    fn flag(&self, key: &str, flag: bool) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        match self.raw(key) {
            None => Ok(false),
            Some(toml::Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(self.bad(key, "a boolean")),
        }
    }

    fn f64_list(&self, key: &str, flag: Option<Vec<f64>>) -> Result<Option<Vec<f64>>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    toml::Value::Float(f) => Ok(*f),
                    toml::Value::Integer(i) => Ok(*i as f64),
                    _ => Err(self.bad(key, "an array of numbers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(self.bad(key, "an array of numbers")),
        }
    }
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidParameter(format!("missing required option --{key}")))
}

fn parse_lens(s: &str) -> Result<LensKind> {
    match s.to_ascii_lowercase().as_str() {
        "concave" => Ok(LensKind::Concave),
        "convex" => Ok(LensKind::Convex),
        other => Err(Error::InvalidParameter(format!("lens must be concave or convex, got `{other}`"))),
    }
}

fn parse_circle(s: &str) -> Result<LensRegion> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidParameter(format!("circle must be `cx,cy,r`, got `{s}`")))?;
    match parts[..] {
        [cx, cy, r] => LensRegion::circle(cx, cy, r),
        _ => Err(Error::InvalidParameter(format!("circle must be `cx,cy,r`, got `{s}`"))),
    }
}

fn region(settings: &Settings, flag: Option<String>) -> Result<LensRegion> {
    match settings.string("circle", flag)? {
        Some(s) => parse_circle(&s),
        None => Ok(LensRegion::FullFrame),
    }
}

fn calibration(settings: &Settings, flag: Option<PathBuf>) -> Result<Calibration> {
    match settings.path("calibration", flag)? {
        Some(p) => Calibration::load(p),
        None => Ok(Calibration::default()),
    }
}

fn geometry(
    settings: &Settings,
    lens: Option<String>,
    f: Option<f64>,
    db: Option<f64>,
    do1: Option<f64>,
    fc: Option<f64>,
) -> Result<AttackGeometry> {
    let f = required(settings.f64("f", f)?, "f")?;
    let kind = match settings.string("lens", lens)? {
        Some(s) => parse_lens(&s)?,
        None if f < 0.0 => LensKind::Concave,
        None => LensKind::Convex,
    };
    let db = settings.f64("db", db)?.unwrap_or(DEFAULT_LENS_GAP_M);
    let fc = settings.f64("fc", fc)?.unwrap_or(GRID_CAMERA_FOCAL_M);
    let do1 = required(settings.f64("do1", do1)?, "do1")?;
    AttackGeometry::new(do1, LensSpec::with_kind(kind, f.abs())?, CameraSpec::new(fc, db)?)
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn cmd_optics(args: OpticsArgs, settings: &Settings, out: &mut dyn Write) -> Result<()> {
    if let Some(table) = settings.string("table", args.table)? {
        let kind = parse_lens(&table)?;
        let fc = settings.f64("fc", args.fc)?.unwrap_or(GRID_CAMERA_FOCAL_M);
        let cells = expected_depth_grid(kind, fc)?;
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::io("<stdout>", std::io::Error::other(e));
        w.write_record(["lens", "f", "d_b", "d_o1", "scenario", "m_total", "m_ori", "depth_ratio", "expected_depth"])
            .map_err(csv_err)?;
        for c in cells {
            w.write_record([
                c.kind.to_string(),
                c.kind.signed(c.focal_magnitude_m).to_string(),
                c.lens_gap_m.to_string(),
                c.object_distance_m.to_string(),
                c.result.scenario.to_string(),
                c.result.m_total.to_string(),
                c.result.m_ori.to_string(),
                c.result.depth_ratio.to_string(),
                c.expected_depth_m.to_string(),
            ])
            .map_err(csv_err)?;
        }
        return w.flush().map_err(out_err);
    }
    let geom = geometry(settings, args.lens, args.f, args.db, args.do1, args.fc)?;
    let r = combined_magnification(&geom)?;
    let depth = expected_depth(&geom)?;
    writeln!(
        out,
        "scenario={}\nfeasible={}\nm_total={}\nm_ori={}\ndepth_ratio={}\nexpected_depth={}",
        r.scenario,
        r.scenario.feasible_in_ad(),
        sig6(r.m_total),
        sig6(r.m_ori),
        sig6(r.depth_ratio),
        sig6(depth)
    )
    .map_err(out_err)
}

fn parse_placement(s: &str) -> Result<BlurPlacement> {
    match s {
        "in" | "in-lens" => Ok(BlurPlacement::InLens),
        "out" | "out-of-lens" => Ok(BlurPlacement::OutOfLens),
        other => Err(Error::InvalidParameter(format!("placement must be in or out, got `{other}`"))),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_simulate(args: SimulateArgs, settings: &Settings, out: &mut dyn Write) -> Result<()> {
    let input = required(settings.path("input", args.input)?, "input")?;
    let output = required(settings.path("output", args.output)?, "output")?;
    let kind = parse_lens(&required(settings.string("lens", args.lens)?, "lens")?)?;
    let region = region(settings, args.circle)?;
    let level = settings.uint("level", args.level.map(u64::from))?;
    let scale = settings.f64("scale", args.scale)?;
    let mut profile = match (level, scale) {
        (Some(_), Some(_)) => return Err(Error::InvalidParameter("--level and --scale are exclusive".into())),
        (Some(l), None) => {
            let l = u8::try_from(l).map_err(|_| Error::InvalidParameter(format!("level {l} out of range")))?;
            level_to_profile(kind, l, region, &calibration(settings, args.calibration)?)?
        }
        (None, Some(s)) => {
            let blur = settings.uint("blur", args.blur.map(|b| b as u64))?.unwrap_or(0);
            AttackProfile::manual(kind, region, s, blur as usize)
        }
        (None, None) => return Err(Error::InvalidParameter("one of --level or --scale is required".into())),
    };
    if let Some(p) = settings.string("placement", args.placement)? {
        profile.blur_placement = parse_placement(&p)?;
    }
    let image = read_image(&input)?;
    let attacked = apply_attack_transform(&image, &profile)?;
    write_image(&output, &attacked)?;
    writeln!(
        out,
        "output={}\nscale={}\nblur={}",
        output.display(),
        sig6(profile.scale_factor),
        profile.blur_radius
    )
    .map_err(out_err)?;
    if settings.flag("emit-masks", args.emit_masks)? {
        let masks = region_masks(image.width(), image.height(), region);
        let in_path = sibling(&output, "_in_mask.pgm");
        let out_path = sibling(&output, "_out_mask.pgm");
        write_image(&in_path, &masks.in_lens.to_image())?;
        write_image(&out_path, &masks.out_of_lens.to_image())?;
        writeln!(out, "in_mask={}\nout_mask={}", in_path.display(), out_path.display()).map_err(out_err)?;
    }
    Ok(())
}

/// Map-directory estimator whose outputs are divided by a constant.
struct Rescaled<E> {
    inner: E,
    divisor: f64,
}

impl<E: Estimator> Estimator for Rescaled<E> {
    fn estimate(&self, image: &RasterImage, input: EstimateInput) -> Result<ScalarMap> {
        Ok(self.inner.estimate(image, input)?.map(|v| v / self.divisor))
    }
}

fn cmd_optimize(args: OptimizeArgs, settings: &Settings, out: &mut dyn Write) -> Result<()> {
    let benign = read_image(required(settings.path("benign", args.benign)?, "benign")?)?;
    let kind = parse_lens(&required(settings.string("lens", args.lens)?, "lens")?)?;
    let boxes = load_boxes(required(settings.path("boxes", args.boxes)?, "boxes")?)?;
    let vehicle_box = *boxes
        .first()
        .ok_or_else(|| Error::InvalidParameter("box file holds no boxes".into()))?;
    let region = region(settings, args.circle)?;
    let calib = calibration(settings, args.calibration)?;
    let alphas = settings.f64_list("alphas", args.alphas)?.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
    let mode = settings.string("mode", args.mode)?.unwrap_or_else(|| "targeted".into());
    let cfg = match mode.as_str() {
        "targeted" => {
            let default = match kind {
                LensKind::Concave => CONCAVE_TARGET_DISPARITY,
                LensKind::Convex => CONVEX_TARGET_DISPARITY,
            };
            let y_tar = settings.f64("y-tar", args.y_tar)?.unwrap_or(default);
            LossConfig::targeted(0.0, y_tar, vehicle_box, region)?
        }
        "untargeted" => LossConfig::untargeted(0.0, vehicle_box, region)?,
        other => {
            return Err(Error::InvalidParameter(format!(
                "mode must be targeted or untargeted, got `{other}`"
            )))
        }
    };
    let estimator_kind = settings.string("estimator", args.estimator)?.unwrap_or_else(|| "proxy".into());
    let estimator: Box<dyn Estimator> = match estimator_kind.as_str() {
        "proxy" => {
            let height = settings.f64("fiducial-height", args.fiducial_height)?.unwrap_or(1.0);
            let threshold = settings
                .uint("fiducial-threshold", args.fiducial_threshold.map(u64::from))?
                .unwrap_or(128);
            let threshold = u8::try_from(threshold)
                .map_err(|_| Error::InvalidParameter(format!("fiducial-threshold {threshold} exceeds 255")))?;
            let baseline = settings.f64("baseline", args.baseline)?.unwrap_or(0.54);
            let focal = settings.f64("focal-px", args.focal_px)?.unwrap_or(720.0);
            let mut proxy = ProxyEstimator::new(
                FiducialSpec::new(height, threshold)?,
                CameraIntrinsics::new(baseline, focal)?,
            );
            proxy.output = match settings.string("proxy-output", args.proxy_output)?.as_deref() {
                None | Some("depth") => MapKind::Depth,
                Some("disparity") => MapKind::Disparity,
                Some(other) => {
                    return Err(Error::InvalidParameter(format!(
                        "proxy-output must be depth or disparity, got `{other}`"
                    )))
                }
            };
            Box::new(proxy)
        }
        "maps" => {
            let dir = required(settings.path("maps", args.maps)?, "maps")?;
            if !dir.is_dir() {
                return Err(Error::io(&dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
            }
            let maps = MapDirectoryEstimator::new(dir);
            match settings.f64("rescale", args.rescale)? {
                Some(c) if c > 0.0 && c.is_finite() => Box::new(Rescaled { inner: maps, divisor: c }),
                Some(c) => return Err(Error::InvalidParameter(format!("rescale must be positive, got {c}"))),
                None => Box::new(maps),
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "estimator must be proxy or maps, got `{other}`"
            )))
        }
    };
    let rows = alpha_sweep(&benign, estimator.as_ref(), &cfg, kind, &calib, &alphas)?;
    match settings.path("output", args.output)? {
        Some(p) => {
            let file = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
            write_sweep_csv(&rows, file)
        }
        None => write_sweep_csv(&rows, out),
    }
}

fn parse_metric(s: &str) -> Result<MetricName> {
    match s.to_ascii_lowercase().as_str() {
        "adr" => Ok(MetricName::Adr),
        "aer" => Ok(MetricName::Aer),
        other => Err(Error::InvalidParameter(format!("metric must be adr or aer, got `{other}`"))),
    }
}

fn score(metric: MetricName, attacked: f64, reference: f64) -> Result<f64> {
    match metric {
        MetricName::Adr => adr(attacked, reference),
        MetricName::Aer => aer(attacked, reference),
    }
}

fn cmd_metrics(args: MetricsArgs, settings: &Settings, out: &mut dyn Write) -> Result<()> {
    let metric = parse_metric(&required(settings.string("metric", args.metric)?, "metric")?)?;
    let name = metric.as_str();
    let reference = settings.f64("reference", args.reference)?;
    if let Some(map_path) = settings.path("attacked-map", args.attacked_map)? {
        let attacked = load_map(&map_path, None)?;
        let reference_map = settings
            .path("reference-map", args.reference_map)?
            .map(|p| load_map(p, Some(attacked.dims())))
            .transpose()?;
        let boxes = load_boxes(required(settings.path("boxes", args.boxes)?, "boxes")?)?;
        let (w, h) = attacked.dims();
        for (i, b) in boxes.iter().enumerate() {
            let mask = Mask::from_rect(w, h, *b);
            let a = masked_mean(&attacked, &mask)?;
            let r = match (&reference_map, reference) {
                (Some(m), _) => masked_mean(m, &mask)?,
                (None, Some(r)) => r,
                (None, None) => return Err(Error::InvalidParameter("need --reference-map or --reference".into())),
            };
            writeln!(
                out,
                "box={i} attacked={} reference={} {name}={}",
                sig6(a),
                sig6(r),
                sig6(score(metric, a, r)?)
            )
            .map_err(out_err)?;
        }
        return Ok(());
    }
    let attacked = required(settings.f64("attacked", args.attacked)?, "attacked")?;
    let reference = required(reference, "reference")?;
    writeln!(out, "{name}={}", sig6(score(metric, attacked, reference)?)).map_err(out_err)
}

fn cmd_defend(args: DefendArgs, settings: &Settings, out: &mut dyn Write) -> Result<()> {
    let method = settings.string("method", args.method)?.unwrap_or_else(|| "varlap".into());
    match method.as_str() {
        "varlap" | "lbp" => {}
        "hifst" => return Err(Error::InvalidParameter("method hifst is not supported".into())),
        other => return Err(Error::InvalidParameter(format!("method must be varlap or lbp, got `{other}`"))),
    }
    let threshold = settings.f64("threshold", args.threshold)?;
    let verdict_for = |image: &RasterImage| -> Result<_> {
        match method.as_str() {
            "varlap" => varlap_verdict(image, threshold.unwrap_or(DEFAULT_VARLAP_THRESHOLD)),
            "lbp" => {
                let tile = settings.uint("tile", args.tile.map(|t| t as u64))?.unwrap_or(DEFAULT_TILE_PX as u64);
                let delta = settings
                    .uint("delta", args.delta.map(u64::from))?
                    .unwrap_or(DEFAULT_LBP_DELTA as u64);
                let delta = u8::try_from(delta)
                    .map_err(|_| Error::InvalidParameter(format!("delta {delta} exceeds 255")))?;
                let map = lbp_sharpness_map(image, tile as usize, delta)?;
                Ok(segment_blur(&map, threshold.unwrap_or(DEFAULT_LBP_THRESHOLD)))
            }
            _ => unreachable!("method validated above"),
        }
    };
    let image = read_image(required(settings.path("input", args.input)?, "input")?)?;
    let verdict = verdict_for(&image)?;
    writeln!(out, "{}", verdict.report_line()).map_err(out_err)?;
    if let Some(p) = settings.path("mask", args.mask)? {
        write_image(p, &verdict.mask.to_image())?;
    }
    Ok(())
}

fn cmd_scenario(args: ScenarioArgs, settings: &Settings, out: &mut dyn Write) -> Result<()> {
    let d = ScenarioConfig::default();
    let mut cfg = ScenarioConfig {
        initial_gap_m: settings.f64("gap0", args.gap0)?.unwrap_or(d.initial_gap_m),
        ego_speed_mps: settings.f64("speed", args.speed)?.unwrap_or(d.ego_speed_mps),
        max_decel_mps2: settings.f64("decel", args.decel)?.unwrap_or(d.max_decel_mps2),
        safety_margin_m: settings.f64("margin", args.margin)?.unwrap_or(d.safety_margin_m),
        dt_s: settings.f64("dt", args.dt)?.unwrap_or(d.dt_s),
        depth_ratio: settings.f64("ratio", args.ratio)?.unwrap_or(d.depth_ratio),
        noise_sigma_m: settings.f64("sigma", args.sigma)?.unwrap_or(d.noise_sigma_m),
        max_sim_time_s: settings.f64("max-time", args.max_time)?.unwrap_or(d.max_sim_time_s),
        seed: settings.uint("seed", args.seed)?.unwrap_or(d.seed),
    };
    if settings.flag("ratio-from-optics", args.ratio_from_optics)? {
        let geom = geometry(settings, args.lens, args.f, args.db, args.do1, args.fc)?;
        cfg.depth_ratio = expected_depth(&geom)? / geom.object_distance_m();
    }
    let run = run_scenario(&cfg)?;
    if let Some(p) = settings.path("log", args.log)? {
        let file = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        write_tick_csv(&run, std::io::BufWriter::new(file))?;
    }
    writeln!(out, "depth_ratio={}\n{}", sig6(cfg.depth_ratio), run.outcome).map_err(out_err)
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Optics(a) => cmd_optics(a, &Settings::load(config, "optics")?, out),
        Command::Simulate(a) => cmd_simulate(a, &Settings::load(config, "simulate")?, out),
        Command::Optimize(a) => cmd_optimize(a, &Settings::load(config, "optimize")?, out),
        Command::Metrics(a) => cmd_metrics(a, &Settings::load(config, "metrics")?, out),
        Command::Defend(a) => cmd_defend(a, &Settings::load(config, "defend")?, out),
        Command::Scenario(a) => cmd_scenario(a, &Settings::load(config, "scenario")?, out),
    }
}

/// Exit status for a failed command.
pub fn exit_code(error: &Error) -> u8 {
    if error.is_domain() {
        1
    } else {
        2
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    ExitCode::from(code)
}
