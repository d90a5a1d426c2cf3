use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lensdepth::attack_opt::{optimize_level, LossConfig};
use lensdepth::estimation::{save_pfm, CameraIntrinsics, FiducialSpec, ProxyEstimator, ScalarMap};
use lensdepth::imaging::netpbm::{read_image, write_image};
use lensdepth::imaging::{box_blur, region_masks, Calibration, LensRegion, Mask, PixelRect, RasterImage};
use lensdepth::optics::{expected_depth_grid, LensKind, GRID_CAMERA_FOCAL_M};
use lensdepth::synth::{noise, textured_fiducial_scene, Fiducial};

fn lensdepth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lensdepth")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn optics_single_geometry() {
    let o = lensdepth(&["optics", "--f", "-0.2", "--db", "0.04", "--do1", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(value(&text, "scenario"), "Concave");
    assert_eq!(value(&text, "feasible"), "true");
    let depth: f64 = value(&text, "expected_depth").parse().unwrap();
    assert!((depth - 6.42).abs() < 0.01, "{depth}");
}

#[test]
fn optics_table_matches_library_grid() {
    for (kind, name) in [(LensKind::Concave, "concave"), (LensKind::Convex, "convex")] {
        let o = lensdepth(&["optics", "--table", name]);
        assert_eq!(o.status.code(), Some(0));
        let mut reader = csv::Reader::from_reader(o.stdout.as_slice());
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        let cells = expected_depth_grid(kind, GRID_CAMERA_FOCAL_M).unwrap();
        assert_eq!(rows.len(), 36);
        for (row, cell) in rows.iter().zip(&cells) {
            assert_eq!(&row[0], name);
            assert_eq!(row[2].parse::<f64>().unwrap(), cell.lens_gap_m);
            assert_eq!(row[3].parse::<f64>().unwrap(), cell.object_distance_m);
            assert_eq!(row[8].parse::<f64>().unwrap(), cell.expected_depth_m);
            let single = lensdepth(&["optics", "--f", &row[1], "--db", &row[2], "--do1", &row[3]]);
            let depth: f64 = value(&stdout(&single), "expected_depth").parse().unwrap();
            assert!((depth - cell.expected_depth_m).abs() <= 1e-5 * depth, "{row:?}");
        }
    }
}

#[test]
fn optics_rejects_unknown_lens() {
    let o = lensdepth(&["optics", "--lens", "prism", "--f", "0.2", "--do1", "6"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_identity_and_locality() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.pgm");
    let image = noise(48, 40, 0, 255, 3).unwrap();
    write_image(&input, &image).unwrap();

    let same = dir.path().join("same.pgm");
    let o = lensdepth(&["simulate", "--input", s(&input), "--output", s(&same), "--lens", "concave", "--scale", "1", "--blur", "0"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert_eq!(fs::read(&same).unwrap(), fs::read(&input).unwrap());

    let shrunk = dir.path().join("shrunk.pgm");
    let o = lensdepth(&[
        "simulate", "--input", s(&input), "--output", s(&shrunk), "--lens", "concave", "--scale", "0.8", "--circle",
        "24,20,12", "--emit-masks",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = read_image(&shrunk).unwrap();
    let masks = region_masks(48, 40, LensRegion::circle(24.0, 20.0, 12.0).unwrap());
    for y in 0..40 {
        for x in 0..48 {
            if masks.out_of_lens.get(x, y) {
                assert_eq!(out.get(x, y, 0), image.get(x, y, 0));
            }
        }
    }
    assert_ne!(out, image);
    let in_mask = read_image(dir.path().join("shrunk_in_mask.pgm")).unwrap();
    assert_eq!(in_mask, masks.in_lens.to_image());

    let leveled = dir.path().join("level.pgm");
    let o = lensdepth(&["simulate", "--input", s(&input), "--output", s(&leveled), "--lens", "convex", "--level", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&stdout(&o), "blur"), "3");
}

#[test]
fn simulate_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.pgm");
    let missing = dir.path().join("missing.pgm");
    let o = lensdepth(&["simulate", "--input", s(&missing), "--output", s(&out), "--lens", "concave", "--level", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let broken = dir.path().join("broken.pgm");
    fs::write(&broken, b"P5\n4 4\n255\nxx").unwrap();
    let o = lensdepth(&["simulate", "--input", s(&broken), "--output", s(&out), "--lens", "concave", "--level", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());

    let o = lensdepth(&["simulate", "--input", s(&broken), "--output", s(&out), "--lens", "concave", "--level", "12"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn optimize_proxy_sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let fid = Fiducial { center_x: 64.0, center_y: 64.0, width_px: 20.0, height_px: 28.0, foreground: 0 };
    let image = textured_fiducial_scene(128, 128, &fid, 9).unwrap();
    let benign = dir.path().join("benign.pgm");
    write_image(&benign, &image).unwrap();
    let boxes = dir.path().join("boxes.txt");
    fs::write(&boxes, "# vehicle\n61 61 67 67\n0 0 4 4\n").unwrap();
    let csv_path = dir.path().join("sweep.csv");
    let o = lensdepth(&[
        "optimize", "--benign", s(&benign), "--lens", "concave", "--boxes", s(&boxes), "--circle", "64,64,32",
        "--mode", "targeted", "--y-tar", "30", "--output", s(&csv_path),
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");

    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["alpha", "mode", "best_level", "best_loss", "metric_name", "metric_value"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);

    let proxy = ProxyEstimator::new(FiducialSpec::new(1.0, 128).unwrap(), CameraIntrinsics::new(0.54, 720.0).unwrap());
    let region = LensRegion::circle(64.0, 64.0, 32.0).unwrap();
    let vbox = PixelRect::new(61, 61, 67, 67).unwrap();
    for (row, alpha) in rows.iter().zip([0.1, 0.2, 0.3, 0.4]) {
        assert_eq!(row[0].parse::<f64>().unwrap(), alpha);
        assert_eq!(&row[1], "targeted");
        assert_eq!(&row[4], "AER");
        let cfg = LossConfig::targeted(alpha, 30.0, vbox, region).unwrap();
        let expect = optimize_level(&image, &proxy, &cfg, LensKind::Concave, &Calibration::default()).unwrap();
        assert_eq!(row[2].parse::<u8>().unwrap(), expect.best_level);
        assert_eq!(row[3].parse::<f64>().unwrap(), expect.best_loss);
        let min = expect.loss_curve.iter().map(|r| r.total).fold(f64::INFINITY, f64::min);
        assert_eq!(expect.best_loss, min);
    }
}

fn write_maps(dir: &Path, skip: Option<u8>) {
    let (w, h) = (8, 8);
    save_pfm(dir.join("benign.pfm"), &ScalarMap::filled(w, h, 0.3).unwrap()).unwrap();
    for level in 1..=9u8 {
        if Some(level) == skip {
            continue;
        }
        let v = 0.3 + 0.02 * level as f64;
        save_pfm(dir.join(format!("level_{level}.pfm")), &ScalarMap::filled(w, h, v).unwrap()).unwrap();
    }
}

#[test]
fn optimize_with_map_directory() {
    let dir = tempfile::tempdir().unwrap();
    let benign = dir.path().join("benign.pgm");
    write_image(&benign, &RasterImage::filled(8, 8, 1, 100).unwrap()).unwrap();
    let boxes = dir.path().join("boxes.txt");
    fs::write(&boxes, "2 2 6 6\n").unwrap();

    let maps = dir.path().join("maps");
    fs::create_dir(&maps).unwrap();
    write_maps(&maps, None);
    let o = lensdepth(&[
        "optimize", "--benign", s(&benign), "--lens", "concave", "--boxes", s(&boxes), "--estimator", "maps", "--maps",
        s(&maps), "--mode", "untargeted", "--alphas", "0.1,0.3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let mut reader = csv::Reader::from_reader(o.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert_eq!(&row[4], "ADR");
        // full-frame lens: every level only moves the vehicle, strongest wins
        assert_eq!(&row[2], "9");
        let adr: f64 = row[5].parse().unwrap();
        assert!((adr - 0.18 / 0.3).abs() < 1e-6, "{adr}");
    }

    let holey = dir.path().join("holey");
    fs::create_dir(&holey).unwrap();
    write_maps(&holey, Some(7));
    let o = lensdepth(&[
        "optimize", "--benign", s(&benign), "--lens", "concave", "--boxes", s(&boxes), "--estimator", "maps", "--maps",
        s(&holey), "--mode", "untargeted",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let mut reader = csv::Reader::from_reader(o.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| &r[2] == "failed" && &r[4] == "error" && r[5].contains('7')));

    let o = lensdepth(&[
        "optimize", "--benign", s(&benign), "--lens", "concave", "--boxes", s(&boxes), "--estimator", "maps", "--maps",
        s(&dir.path().join("nowhere")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metrics_scalar_and_map() {
    let o = lensdepth(&["metrics", "--metric", "adr", "--attacked", "0.5", "--reference", "0.23"]);
    assert_eq!(o.status.code(), Some(0));
    let v: f64 = value(&stdout(&o), "ADR").parse().unwrap();
    assert!((v - 1.17391).abs() < 1e-5);

    let o = lensdepth(&["metrics", "--metric", "aer", "--attacked", "1", "--reference", "0"]);
    assert_eq!(o.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let attacked = dir.path().join("a.pfm");
    let mut map = ScalarMap::filled(10, 10, 2.0).unwrap();
    map.set(1, 1, 4.0);
    save_pfm(&attacked, &map).unwrap();
    let boxes = dir.path().join("b.txt");
    fs::write(&boxes, "0 0 2 2\n5 5 10 10\n").unwrap();
    let o = lensdepth(&["metrics", "--metric", "aer", "--attacked-map", s(&attacked), "--reference", "2", "--boxes", s(&boxes)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["box=0 attacked=2.5 reference=2 AER=0.25", "box=1 attacked=2 reference=2 AER=0"]);
}

#[test]
fn defend_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let sharp = noise(96, 96, 0, 255, 11).unwrap();
    let blurred = box_blur(&sharp, &Mask::filled(96, 96, true), 4).unwrap();
    let sharp_path = dir.path().join("sharp.pgm");
    let blurred_path = dir.path().join("blurred.pgm");
    write_image(&sharp_path, &sharp).unwrap();
    write_image(&blurred_path, &blurred).unwrap();

    for method in ["varlap", "lbp"] {
        let o = lensdepth(&["defend", "--input", s(&sharp_path), "--method", method]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).starts_with("verdict=clean"), "{method}: {}", stdout(&o));
        let mask = dir.path().join(format!("{method}_mask.pgm"));
        let o = lensdepth(&["defend", "--input", s(&blurred_path), "--method", method, "--mask", s(&mask)]);
        assert!(stdout(&o).starts_with("verdict=blurred"), "{method}: {}", stdout(&o));
        let m = read_image(&mask).unwrap();
        assert!(m.data().iter().all(|&v| v == 255));
    }

    let o = lensdepth(&["defend", "--input", s(&sharp_path), "--method", "hifst"]);
    assert_eq!(o.status.code(), Some(2));

    let tiny = dir.path().join("tiny.pgm");
    write_image(&tiny, &RasterImage::filled(2, 2, 1, 0).unwrap()).unwrap();
    let o = lensdepth(&["defend", "--input", s(&tiny)]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn scenario_outcomes_and_log() {
    let o = lensdepth(&["scenario"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("STOPPED gap="));

    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("ticks.csv");
    let o = lensdepth(&["scenario", "--ratio", "1.5", "--log", s(&log)]);
    let text = stdout(&o);
    let speed: f64 = text.lines().nth(1).unwrap().strip_prefix("COLLISION speed=").unwrap().parse().unwrap();
    assert!((speed - 4.16).abs() <= 0.1, "{speed}");
    let log_text = fs::read_to_string(&log).unwrap();
    assert!(log_text.starts_with("t,true_gap,perceived_gap,speed,accel,braking\n"));

    let o = lensdepth(&["scenario", "--ratio-from-optics", "--f", "-0.2", "--db", "0.12", "--do1", "6"]);
    let ratio: f64 = value(&stdout(&o), "depth_ratio").parse().unwrap();
    assert!((ratio - 8.78 / 6.0).abs() < 0.01, "{ratio}");

    let o = lensdepth(&["scenario", "--dt", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "ratio = 3.0\n[scenario]\nratio = 1.5\n").unwrap();
    let o = lensdepth(&["--config", s(&cfg), "scenario"]);
    assert_eq!(value(&stdout(&o), "depth_ratio"), "1.5");
    let o = lensdepth(&["--config", s(&cfg), "scenario", "--ratio", "1"]);
    assert_eq!(value(&stdout(&o), "depth_ratio"), "1");
}
