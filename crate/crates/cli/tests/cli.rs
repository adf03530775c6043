use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use depthsplat_core::io::{load_image, read_scalar_map};
use depthsplat_core::metrics::psnr;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_depthsplat"));
    c.env("RUST_LOG", "warn").env_remove("SPLAT_PRECISION").env_remove("SPLAT_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn depthsplat")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let ds = dir.join("data");
    let mut args = vec!["synth", "--out", ds.to_str().unwrap(), "--size", "32", "--gaussians", "20"];
    args.extend_from_slice(extra);
    ok(&args);
    ds
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["train", "--help"]).status.code(), Some(0));
    assert_eq!(run(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    let out = run(&["train", "--no-depth-loss", "--lambda-depth", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_dataset_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--dataset", s(&dir.path().join("nope")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

#[test]
fn ingest_reports_views_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), &[]);
    let text = ok(&["ingest", s(&ds)]);
    assert!(text.contains("views:        20"), "{text}");
    assert!(text.contains("train views:  view_001.png, view_005.png, view_010.png, view_014.png, view_018.png"));
    assert!(text.contains("test views:   view_000.png (extrapolated), view_009.png, view_019.png (extrapolated)"));
}

#[test]
fn ingest_names_a_missing_depth_map() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), &[]);
    fs::remove_file(ds.join("depth/view_005.pfm")).unwrap();
    let out = run(&["ingest", s(&ds)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("view_005"));
}

#[test]
fn ingest_inverts_inverse_depth() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), &["--inverse-depth"]);
    let plain = ok(&["ingest", s(&ds)]);
    let inverted = ok(&["ingest", s(&ds), "--invert-depth"]);
    let range = |t: &str| -> (f64, f64) {
        let line = t.lines().find(|l| l.starts_with("depth view_001.png")).unwrap();
        let inner = &line[line.find('[').unwrap() + 1..line.find(']').unwrap()];
        let (a, b) = inner.split_once(", ").unwrap();
        (a.parse().unwrap(), b.parse().unwrap())
    };
    let (lo, hi) = range(&plain);
    let (ilo, ihi) = range(&inverted);
    assert!(hi < 1.0 && lo > 0.0);
    assert!((ilo - 1.0 / hi).abs() < 1e-5 * ilo && (ihi - 1.0 / lo).abs() < 1e-5 * ihi);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), &[]);
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[train]\nlambda_depth = 0.3\niterations = 7\nseed = 4\n").unwrap();
    let out = dir.path().join("out");
    ok(&["train", "--config", s(&cfg), "--dataset", s(&ds), "--out", s(&out), "--lambda-depth", "0"]);
    let written: toml::Table = fs::read_to_string(out.join("config.toml")).unwrap().parse().unwrap();
    let train = written["train"].as_table().unwrap();
    assert_eq!(train["lambda_depth"].as_float(), Some(0.0));
    assert_eq!(train["iterations"].as_integer(), Some(7));
    assert_eq!(train["seed"].as_integer(), Some(4));
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').take(5).map(|x| x.parse().unwrap()).collect();
        assert!((v[4] - (0.8 * v[1] + 0.2 * v[2])).abs() < 1e-12, "{line}");
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[train]\nlamda = 0.3\n").unwrap();
    let out = run(&["train", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_is_reproducible_and_writes_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), &[]);
    let go = |name: &str| {
        let out = dir.path().join(name);
        ok(&["train", "--dataset", s(&ds), "--out", s(&out), "--iterations", "100", "--checkpoint-interval", "50"]);
        out
    };
    let (a, b) = (go("a"), go("b"));
    for f in ["checkpoints/iter_000050.ckpt", "checkpoints/iter_000100.ply", "final.ply", "eval.csv", "run.json"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert_eq!(csv, fs::read_to_string(b.join("metrics.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("checkpoints/iter_000100.ckpt")).unwrap(),
        fs::read(b.join("checkpoints/iter_000100.ckpt")).unwrap()
    );

    // resuming from the halfway checkpoint reproduces the tail
    ok(&[
        "train",
        "--dataset",
        s(&ds),
        "--out",
        s(&b),
        "--iterations",
        "100",
        "--checkpoint-interval",
        "50",
        "--resume",
        s(&b.join("checkpoints/iter_000050.ckpt")),
    ]);
    assert_eq!(csv, fs::read_to_string(b.join("metrics.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("checkpoints/iter_000100.ckpt")).unwrap(),
        fs::read(b.join("checkpoints/iter_000100.ckpt")).unwrap()
    );

    let eval_out = dir.path().join("eval");
    ok(&["eval", "--checkpoint", s(&a.join("final.ply")), "--dataset", s(&ds), "--out", s(&eval_out)]);
    let eval = fs::read_to_string(eval_out.join("eval.csv")).unwrap();
    let rows: Vec<&str> = eval.lines().collect();
    assert_eq!(rows[0], "view,psnr,ssim,extrapolated,lpips");
    let names: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(names, ["view_000.png", "view_009.png", "view_019.png", "mean", "mean_extrapolated"]);
}

#[test]
fn render_writes_images_and_depth() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), &[]);
    let out = dir.path().join("render");
    let gt = ds.join("ground_truth.ply");
    ok(&["render", "--checkpoint", s(&gt), "--dataset", s(&ds), "--view", "9", "--out", s(&out), "--depth"]);
    let rendered = load_image(&out.join("view_009.png")).unwrap();
    let target = load_image(&ds.join("images/view_009.png")).unwrap();
    assert!(psnr(&rendered.data, &target.data).unwrap() > 25.0);
    let depth = read_scalar_map(&out.join("view_009_depth.pfm")).unwrap();
    assert_eq!((depth.width, depth.height), (32, 32));
    assert!(depth.data.iter().any(|&d| d > 1.0));

    let bad = run(&["render", "--checkpoint", s(&gt), "--dataset", s(&ds), "--view", "20", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("out of range"));
}

#[test]
fn gradcheck_passes_on_a_small_scene() {
    let text = ok(&["gradcheck", "--scenes", "1", "--gaussians", "4", "--size", "16"]);
    assert!(text.contains("overall max relative error"));
}
