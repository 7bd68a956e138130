use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use intrinsic_core::imgcore::{load_image, save_png, ImageBuffer};
use intrinsic_core::pipeline::{read_bundle, relight_intensity, BundleMetadata};
use intrinsic_core::semantics::{build_grid, load_patch_features, load_proposals, read_spft};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intrinsic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two reflectance blocks under a soft light in the top-left corner.
fn scene(w: usize, h: usize, tint: f64) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, 3, |x, y, c| {
        let r = if x < w / 2 { [0.7, 0.3, 0.2][c] } else { [0.2, 0.5, 0.7][c] };
        let d2 = (x as f64 - 8.0).powi(2) + (y as f64 - 8.0).powi(2);
        r * tint * (0.4 + 0.6 * (-d2 / 300.0).exp())
    })
    .unwrap()
}

fn write_scene(dir: &Path, name: &str, w: usize, h: usize) -> PathBuf {
    let p = dir.join(name);
    save_png(&scene(w, h, 1.0), &p).unwrap();
    p
}

fn metadata(bundle: &Path) -> BundleMetadata {
    serde_json::from_str(&fs::read_to_string(bundle.join("metadata.json")).unwrap()).unwrap()
}

#[test]
fn missing_input_fails() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["decompose", "nope.png", "--out", s(&tmp.path().join("b"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.png"));
}

#[test]
fn bad_flag_is_usage_error() {
    let out = run(&["decompose", "--bogus"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn decompose_writes_history() {
    let tmp = TempDir::new().unwrap();
    let img = write_scene(tmp.path(), "a.png", 40, 32);
    let bundle = tmp.path().join("b");
    let out = run(&["decompose", s(&img), "--out", s(&bundle), "--k", "3", "--seed", "9"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for i in 1..=3 {
        assert!(bundle.join(format!("iters/{i:02}/reflectance.pfm")).is_file());
    }
    assert!(!bundle.join("iters/04").exists());
    let meta = metadata(&bundle);
    assert_eq!((meta.width, meta.height, meta.params.k, meta.params.seed), (40, 32, 3, 9));
    assert_eq!(meta.iterations.len(), 3);
}

#[test]
fn variant_and_param_overrides() {
    let tmp = TempDir::new().unwrap();
    let img = write_scene(tmp.path(), "a.png", 32, 32);
    let bundle = tmp.path().join("b");
    let out = run(&[
        "decompose", s(&img), "--out", s(&bundle), "--variant", "v4", "--k", "1", "--param", "theta=30",
    ]);
    assert!(matches!(code(&out), 0 | 2));
    let p = metadata(&bundle).params;
    assert_eq!((p.gamma_m, p.gamma_g, p.theta), (0.0, 0.0, 30.0));
    assert!(p.gamma_l > 0.0);

    let bad = run(&["decompose", s(&img), "--out", s(&bundle), "--param", "theta"]);
    assert_eq!(code(&bad), 1);
    let unknown = run(&["decompose", s(&img), "--out", s(&bundle), "--param", "zeta=1"]);
    assert_eq!(code(&unknown), 1);
}

#[test]
fn batch_decompose() {
    let tmp = TempDir::new().unwrap();
    let a = write_scene(tmp.path(), "a.png", 24, 24);
    let b = write_scene(tmp.path(), "b.png", 28, 24);
    let out_dir = tmp.path().join("out");
    let out = run(&["decompose", s(&a), s(&b), "--out", s(&out_dir), "--k", "1", "--jobs", "2"]);
    assert!(matches!(code(&out), 0 | 2));
    assert_eq!(metadata(&out_dir.join("a")).width, 24);
    assert_eq!(metadata(&out_dir.join("b")).width, 28);
}

#[test]
fn relighting() {
    let tmp = TempDir::new().unwrap();
    let img = write_scene(tmp.path(), "a.png", 32, 32);
    let bundle = tmp.path().join("b");
    assert!(matches!(code(&run(&["decompose", s(&img), "--out", s(&bundle), "--k", "2"])), 0 | 2));
    let loaded = read_bundle(&bundle).unwrap();

    let out = run(&["relight-color", "--bundle", s(&bundle), "--ab", "0,0"]);
    assert_eq!(code(&out), 0);
    let recon = loaded
        .merged
        .reflectance
        .zip_map(&loaded.merged.shading, |r, s| (r * s).clamp(0.0, 1.0))
        .unwrap();
    let expected = tmp.path().join("expected.png");
    save_png(&recon, &expected).unwrap();
    assert_eq!(fs::read(bundle.join("relight_color.png")).unwrap(), fs::read(&expected).unwrap());

    let tinted = tmp.path().join("tinted.png");
    let out = run(&["relight-color", "--bundle", s(&bundle), "--ab", "-12,8", "--percentile", "90", "--out", s(&tinted)]);
    assert_eq!(code(&out), 0);
    assert_ne!(fs::read(&tinted).unwrap(), fs::read(&expected).unwrap());

    let out = run(&["relight-intensity", "--bundle", s(&bundle), "--scale", "0"]);
    assert_eq!(code(&out), 0);
    let p = loaded.metadata.params;
    let want = relight_intensity(&loaded.components(), p.merge_blur, 0.0, p.eps).unwrap();
    save_png(&want, &expected).unwrap();
    assert_eq!(fs::read(bundle.join("relight_intensity.png")).unwrap(), fs::read(&expected).unwrap());

    assert_eq!(code(&run(&["relight-color", "--bundle", s(&bundle), "--ab", "1"])), 1);
}

#[test]
fn relight_missing_bundle() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("none");
    assert_eq!(code(&run(&["relight-color", "--bundle", s(&missing), "--ab", "5,5"])), 1);
    assert_eq!(code(&run(&["relight-intensity", "--bundle", s(&missing)])), 1);
}

fn json_lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn eval_lmse_identity() {
    let tmp = TempDir::new().unwrap();
    let img = write_scene(tmp.path(), "a.png", 40, 40);
    let out = run(&["eval", "lmse", "--pred", s(&img), "--gt", s(&img)]);
    assert_eq!(code(&out), 0);
    let lines = json_lines(&out);
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["metric"], "lmse");
    assert_eq!(lines[0]["value"], 0.0);
}

#[test]
fn eval_lmse_dimension_mismatch() {
    let tmp = TempDir::new().unwrap();
    let a = write_scene(tmp.path(), "a.png", 40, 40);
    let b = write_scene(tmp.path(), "b.png", 30, 40);
    assert_eq!(code(&run(&["eval", "lmse", "--pred", s(&a), "--gt", s(&b)])), 1);
}

const JUDGEMENTS: &str = r#"{
    "intrinsic_points": [{"id": 1, "x": 0.1, "y": 0.5}, {"id": 2, "x": 0.9, "y": 0.5}],
    "intrinsic_comparisons": [
        {"point1": 1, "point2": 2, "darker": "1", "darker_score": 1.0},
        {"point1": 1, "point2": 2, "darker": "2", "darker_score": 3.0}
    ]
}"#;

#[test]
fn eval_whdr() {
    let tmp = TempDir::new().unwrap();
    let pred = tmp.path().join("p.png");
    let img = ImageBuffer::from_fn(20, 10, 3, |x, _, _| if x < 10 { 0.1 } else { 0.6 }).unwrap();
    save_png(&img, &pred).unwrap();
    let j = tmp.path().join("p.json");
    fs::write(&j, JUDGEMENTS).unwrap();
    let out = run(&["eval", "whdr", "--pred", s(&pred), "--judgements", s(&j)]);
    assert_eq!(code(&out), 0);
    let lines = json_lines(&out);
    assert_eq!(lines[0]["value"], 0.75);
    assert_eq!(lines[0]["params"]["delta"], 0.1);

    fs::write(&j, "{ not json").unwrap();
    assert_eq!(code(&run(&["eval", "whdr", "--pred", s(&pred), "--judgements", s(&j)])), 1);
}

#[test]
fn eval_batch_directory() {
    let tmp = TempDir::new().unwrap();
    let (pred, gt) = (tmp.path().join("pred"), tmp.path().join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    for (i, name) in ["a.png", "b.png", "c.png"].iter().enumerate() {
        save_png(&scene(30, 30, 1.0), gt.join(name)).unwrap();
        save_png(&scene(30, 30, 0.5 + 0.2 * i as f64), pred.join(name)).unwrap();
    }
    fs::write(pred.join("notes.txt"), "ignored").unwrap();
    let csv = tmp.path().join("summary.csv");
    let out = run(&["eval", "lmse", "--pred", s(&pred), "--gt", s(&gt), "--csv", s(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lines = json_lines(&out);
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[3]["image"], "mean");
    assert_eq!(lines[3]["count"], 3);
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(rows.starts_with("image,metric,value,count"));

    fs::remove_file(gt.join("b.png")).unwrap();
    assert_eq!(code(&run(&["eval", "lmse", "--pred", s(&pred), "--gt", s(&gt)])), 1);
}

#[test]
fn feature_export_round_trip() {
    let tmp = TempDir::new().unwrap();
    let img_path = write_scene(tmp.path(), "big.png", 120, 120);
    let (spft, sppr) = (tmp.path().join("f.spft"), tmp.path().join("p.sppr"));
    let out = run(&["features", s(&img_path), "--out-spft", s(&spft), "--out-sppr", s(&sppr)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    // 60 px patches at stride 30: offsets 0, 30, 60 on each axis.
    let (header, _) = read_spft(&spft).unwrap();
    assert_eq!(header.patch_count, 9);
    let grid = build_grid(120, 120, 60, 30).unwrap();
    assert_eq!(load_patch_features(&spft, &grid).unwrap().patch_count(), 9);
    let props = load_proposals(&sppr, 120, 120).unwrap();
    assert!(!props.is_empty() && props.len() <= 256);

    let bundle = tmp.path().join("b");
    let out = run(&[
        "decompose", s(&img_path), "--out", s(&bundle), "--features", s(&spft), "--proposals", s(&sppr), "--k", "1",
    ]);
    assert!(matches!(code(&out), 0 | 2));
    let meta = metadata(&bundle);
    assert_eq!(meta.features.patches, 9);
    assert_eq!(meta.features.proposals, props.len());

    assert_eq!(code(&run(&["features", s(&img_path)])), 1);
}

#[test]
fn features_reject_mismatched_image() {
    let tmp = TempDir::new().unwrap();
    let big = write_scene(tmp.path(), "big.png", 64, 64);
    let small = write_scene(tmp.path(), "small.png", 48, 48);
    let spft = tmp.path().join("f.spft");
    assert_eq!(code(&run(&["features", s(&big), "--out-spft", s(&spft)])), 0);
    let out = run(&["decompose", s(&small), "--out", s(&tmp.path().join("b")), "--features", s(&spft)]);
    assert_eq!(code(&out), 1);
    assert!(load_image(&small).is_ok());
}
