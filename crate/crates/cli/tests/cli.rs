use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use layerblur::synth::SceneScript;
use layerblur::ImageBuffer;
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_layerblur"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn layerblur")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "layerblur {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn scripts() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn translation(tx: f64, ty: f64) -> Value {
    json!({"a11": 1.0, "a12": 0.0, "a21": 0.0, "a22": 1.0, "tx": tx, "ty": ty})
}

/// Disk over noise, `frames` frames, per-frame steps for each layer.
fn script(size: usize, frames: usize, fg: (f64, f64), bg: (f64, f64)) -> Value {
    let r = (frames / 2) as f64;
    let traj = |step: (f64, f64)| -> Vec<Value> {
        (0..=frames)
            .map(|i| translation(step.0 * (i as f64 - r), step.1 * (i as f64 - r)))
            .collect()
    };
    let c = size as f64 / 2.0 - 0.5;
    json!({
        "width": size,
        "height": size,
        "foreground": {"type": "noise", "seed": 3, "low": 0.1, "high": 0.9, "smooth": 2},
        "background": {"type": "noise", "seed": 4, "low": 0.1, "high": 0.9, "smooth": 2},
        "mask": {"shapes": [{"type": "disk", "cx": c, "cy": c, "radius": size as f64 / 4.0}]},
        "foreground_motion": traj(fg),
        "background_motion": traj(bg),
        "duty_cycle": 0.5,
        "noise_sigma": 0.02,
        "seed": 5
    })
}

fn write_json(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

fn synth_into(dir: &Path, script: &Value) -> PathBuf {
    let path = dir.join("script.json");
    write_json(&path, script);
    let out = dir.join("seq");
    ok(&["synth", s(&path), "--out", s(&out)]);
    out
}

#[test]
fn synth_writes_frames_truth_and_motions() {
    let dir = tempfile::tempdir().unwrap();
    let out = synth_into(dir.path(), &script(32, 5, (1.0, 0.5), (-0.5, 0.0)));
    let names = files(&out);
    assert_eq!(names.iter().filter(|n| n.starts_with("frame_")).count(), 5);
    for n in ["gt_L0.png", "gt_L1.png", "gt_A.png", "motions.json"] {
        assert!(names.contains(&n.to_string()), "missing {n} in {names:?}");
    }
    assert_eq!(names.len(), 9);
}

#[test]
fn sharp_static_frames_equal_the_composite() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = script(24, 3, (0.0, 0.0), (0.0, 0.0));
    sc["noise_sigma"] = json!(0.0);
    let path = dir.path().join("still.json");
    write_json(&path, &sc);
    let out = dir.path().join("seq");
    ok(&["synth", s(&path), "--out", s(&out)]);

    let scene = SceneScript::load(&path).unwrap().build_scene().unwrap();
    let composite = ImageBuffer::from_fn(24, 24, 1, |x, y, c| {
        let a = scene.alpha.get(x, y, 0);
        (1.0 - a) * scene.foreground.get(x, y, c) + a * scene.background.get(x, y, c)
    });
    for i in 0..3 {
        let frame = ImageBuffer::load_png(&out.join(format!("frame_{i:03}.png"))).unwrap();
        assert_eq!(frame.to_bytes(), composite.to_bytes(), "frame {i}");
    }
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    write_json(&path, &script(32, 3, (1.5, 0.0), (0.0, -1.0)));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["synth", s(&path), "--out", s(&a), "--seed", "9"]);
    ok(&["synth", s(&path), "--out", s(&b), "--seed", "9"]);
    let names = files(&a);
    assert_eq!(names, files(&b));
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n} differs");
    }
}

#[test]
fn malformed_script_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"width\": 10,").unwrap();
    let out = run(&["synth", s(&path), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());

    let missing = run(&["synth", s(&dir.path().join("nope.json")), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&missing), 2);
}

fn max_diff(script: &str) -> f64 {
    let dir = tempfile::tempdir().unwrap();
    ok(&["modelcmp", s(&scripts().join(script)), "--out", s(dir.path())]);
    assert!(dir.path().join("heatmap.png").is_file());
    read_json(&dir.path().join("report.json"))["max_diff"].as_f64().unwrap()
}

#[test]
fn modelcmp_separates_the_models_only_where_they_differ() {
    assert!(max_diff("static_background.json") < 1e-6);
    assert!(max_diff("homogeneous_background.json") < 1e-6);
    assert!(max_diff("fence.json") > 0.05);
}

fn kernelviz(script: &str, frame: &str, pixels: &[&str], out: &Path) -> Vec<Value> {
    let path = scripts().join(script);
    let mut args = vec!["kernelviz", s(&path), "--frame", frame, "--out", s(out)];
    for p in pixels {
        args.extend(["--pixel", p]);
    }
    ok(&args);
    let report = read_json(&out.join("kernels.json"));
    let entries = report.as_array().unwrap().clone();
    assert_eq!(entries.len(), pixels.len());
    for e in &entries {
        assert!(out.join(e["strip"].as_str().unwrap()).is_file());
        for model in ["proposed", "conventional"] {
            let k = &e[model];
            let listed: f64 = ["foreground", "background"]
                .iter()
                .flat_map(|l| k[l].as_array().unwrap().iter().map(|t| t[2].as_f64().unwrap()))
                .sum();
            let total = k["foreground_sum"].as_f64().unwrap() + k["background_sum"].as_f64().unwrap();
            assert!((listed - total).abs() < 1e-10);
        }
        let total = e["proposed"]["foreground_sum"].as_f64().unwrap() + e["proposed"]["background_sum"].as_f64().unwrap();
        assert!((total - 1.0).abs() < 1e-10, "proposed kernel at {} sums to {total}", e["pixel"]);
    }
    entries
}

#[test]
fn kernelviz_interior_background_has_no_foreground_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let entries = kernelviz("disk.json", "1", &["2,2", "60,5"], dir.path());
    for e in &entries {
        for model in ["proposed", "conventional"] {
            assert!(e[model]["foreground"].as_array().unwrap().is_empty(), "{model} at {}", e["pixel"]);
        }
    }
}

#[test]
fn kernelviz_boundary_background_kernel_is_truncated() {
    let dir = tempfile::tempdir().unwrap();
    // pixels straddling a fence bar edge
    let entries = kernelviz("fence.json", "0", &["12,10", "16,10", "28,10"], dir.path());
    let support = |e: &Value, m: &str| e[m]["background"].as_array().unwrap().len();
    for e in &entries {
        let (p, c) = (support(e, "proposed"), support(e, "conventional"));
        assert!(p > 0 && p < c, "at {}: proposed {p} taps, conventional {c}", e["pixel"]);
        // the conventional weights are the full kernel scaled by the blurred mask
        let conv = &e["conventional"];
        let scale = conv["background_sum"].as_f64().unwrap();
        assert!(scale > 0.0 && scale < 1.0);
    }
}

#[test]
fn kernelviz_rejects_out_of_bounds_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["kernelviz", s(&scripts().join("disk.json")), "--pixel", "64,3", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
    let bad = run(&["kernelviz", s(&scripts().join("disk.json")), "--pixel", "3", "--out", s(dir.path())]);
    assert_eq!(code(&bad), 2);
}

fn copy_truth_as_restored(truth: &Path, restored: &Path) {
    fs::create_dir_all(restored).unwrap();
    for n in ["L0", "L1", "A"] {
        fs::copy(truth.join(format!("gt_{n}.png")), restored.join(format!("{n}.png"))).unwrap();
    }
    fs::copy(truth.join("motions.json"), restored.join("motions.json")).unwrap();
}

#[test]
fn eval_of_the_truth_is_capped() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synth_into(dir.path(), &script(32, 3, (2.0, 0.0), (-1.0, 0.0)));
    let restored = dir.path().join("restored");
    copy_truth_as_restored(&truth, &restored);
    let out = ok(&["eval", s(&restored), s(&truth), "--out", s(&dir.path().join("m"))]);
    let m: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["psnr_background"].as_f64(), Some(99.0));
    assert_eq!(m["psnr_foreground"].as_f64(), Some(99.0));
    assert_eq!(m["mask_mae"].as_f64(), Some(0.0));
    assert_eq!(m["motion"]["max_translation"].as_f64(), Some(0.0));
    assert_eq!(read_json(&dir.path().join("m/metrics.json")), m);
}

/// Independent PSNR over 8-bit images, restricted to `keep`.
fn psnr_bytes(a: &[u8], b: &[u8], keep: impl Fn(usize) -> bool) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if keep(i) {
            let d = (*x as f64 - *y as f64) / 255.0;
            sum += d * d;
            n += 1;
        }
    }
    -10.0 * (sum / n as f64).log10()
}

#[test]
fn eval_matches_an_independent_psnr() {
    let dir = tempfile::tempdir().unwrap();
    // static scene: every pixel of both layers is seen, so nothing is masked
    let mut sc = script(32, 3, (0.0, 0.0), (0.0, 0.0));
    sc["mask"] = json!({"shapes": []});
    sc["foreground"] = sc["background"].clone();
    let truth = synth_into(dir.path(), &sc);
    let restored = dir.path().join("restored");
    copy_truth_as_restored(&truth, &restored);

    let bg = ImageBuffer::load_png(&truth.join("gt_L0.png")).unwrap();
    // uniform offset of 26/255 plus a deterministic ripple
    let noisy = ImageBuffer::from_fn(32, 32, 1, |x, y, _| {
        (bg.get(x, y, 0) + 26.0 / 255.0 + 0.03 * ((x * 7 + y * 3) as f64).sin()).clamp(0.0, 1.0)
    });
    noisy.save_png(&restored.join("L0.png")).unwrap();

    let out = ok(&["eval", s(&restored), s(&truth)]);
    let m: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["recoverable_background"].as_f64(), Some(1.0));
    let want = psnr_bytes(
        &ImageBuffer::load_png(&restored.join("L0.png")).unwrap().to_bytes(),
        &bg.to_bytes(),
        |_| true,
    );
    let got = m["psnr_background"].as_f64().unwrap();
    assert!((got - want).abs() <= 0.005 + 1e-9, "{got} vs {want}");
    assert!(got < 25.0);
}

#[test]
fn eval_reports_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synth_into(dir.path(), &script(24, 3, (1.0, 0.0), (0.0, 0.0)));
    let restored = dir.path().join("restored");
    copy_truth_as_restored(&truth, &restored);
    fs::remove_file(restored.join("A.png")).unwrap();
    let out = run(&["eval", s(&restored), s(&truth)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("A.png"));
}

fn fast_config(dir: &Path, min_level_size: usize, solver: Value) -> PathBuf {
    let path = dir.join("config.json");
    let mut solver = solver;
    solver["inner_iterations"] = json!(2);
    solver["nm_max_evals"] = json!(12);
    solver["cg_max_iter"] = json!(30);
    write_json(&path, &json!({"min_level_size": min_level_size, "solver": solver}));
    path
}

#[test]
fn deblur_from_truth_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synth_into(dir.path(), &script(32, 3, (2.0, 1.0), (-1.0, 0.0)));
    let config = fast_config(dir.path(), 28, json!({}));
    let out = dir.path().join("out");
    ok(&["deblur", s(&truth), "--config", s(&config), "--out", s(&out), "--gt-init"]);
    for n in ["L0.png", "L1.png", "A.png", "motions.json", "energy.csv", "metrics.json"] {
        assert!(out.join(n).is_file(), "missing {n}");
    }
    let report = read_json(&out.join("metrics.json"));
    let levels = report["levels"].as_array().unwrap().len();
    assert_eq!(levels, 2);
    let csv = fs::read_to_string(out.join("energy.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    assert_eq!(rows, levels * 2 * 3);
    assert_eq!(report["sub_steps"].as_u64(), Some(rows as u64));
    assert_eq!(report["metrics"]["aligned"].as_bool(), Some(false));
}

#[test]
fn deblur_does_no_harm_to_sharp_input() {
    let dir = tempfile::tempdir().unwrap();
    // sensor noise keeps the input PSNR finite; a single level keeps the
    // ground-truth start at full resolution
    let truth = synth_into(dir.path(), &script(32, 3, (0.05, 0.0), (0.0, 0.05)));
    let config = fast_config(dir.path(), 40, json!({}));
    let out = dir.path().join("out");
    ok(&["deblur", s(&truth), "--config", s(&config), "--out", s(&out), "--gt-init"]);
    let m = &read_json(&out.join("metrics.json"))["metrics"];
    for layer in ["background", "foreground"] {
        let got = m[format!("psnr_{layer}")].as_f64().unwrap();
        let input = m[format!("baseline_psnr_{layer}")].as_f64().unwrap();
        assert!(got >= input - 1.0, "{layer}: restored {got} dB, input {input} dB");
    }
}

#[test]
fn deblur_rejects_mismatched_frames() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    fs::create_dir_all(&frames).unwrap();
    ImageBuffer::filled(20, 20, 1, 0.5).save_png(&frames.join("frame_000.png")).unwrap();
    ImageBuffer::filled(18, 20, 1, 0.5).save_png(&frames.join("frame_001.png")).unwrap();
    let out = run(&["deblur", s(&frames), "--out", s(&dir.path().join("out"))]);
    assert_eq!(code(&out), 2);

    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    assert_eq!(code(&run(&["deblur", s(&empty), "--out", s(&dir.path().join("o2"))])), 2);
}

#[test]
fn numeric_failure_exits_3_and_keeps_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synth_into(dir.path(), &script(32, 3, (2.0, 1.0), (-1.0, 0.0)));
    let config = fast_config(dir.path(), 28, json!({"lambda1": 1e300}));
    let out_dir = dir.path().join("out");
    let out = run(&["deblur", s(&truth), "--config", s(&config), "--out", s(&out_dir), "--gt-init"]);
    assert_eq!(code(&out), 3, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("energy.csv")).unwrap();
    assert!(csv.starts_with("step,"));
    assert!(!out_dir.join("metrics.json").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synth_into(dir.path(), &script(24, 3, (1.0, 0.0), (0.0, 0.0)));
    let config = dir.path().join("c.json");
    write_json(&config, &json!({"pyramid_scael": 0.5}));
    let out = run(&["deblur", s(&truth), "--config", s(&config), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn deblur_takes_directories_from_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synth_into(dir.path(), &script(32, 3, (2.0, 1.0), (-1.0, 0.0)));
    let out = dir.path().join("from_config");
    let config = dir.path().join("dirs.json");
    write_json(
        &config,
        &json!({
            "min_level_size": 40,
            "frames_dir": s(&truth),
            "output_dir": s(&out),
            "solver": {"inner_iterations": 1, "nm_max_evals": 8, "cg_max_iter": 20}
        }),
    );
    ok(&["deblur", "--config", s(&config), "--gt-init"]);
    assert_eq!(fs::read_to_string(out.join("energy.csv")).unwrap().lines().count(), 1 + 3);

    let bare = run(&["deblur", "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&bare), 2);
}
