use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use layerblur::init::ForegroundChoice;
use layerblur::metrics::{align_gauge, evaluate, Metrics};
use layerblur::model::render_all_frames;
use layerblur::pipeline::{deblur, RunConfig, Start};
use layerblur::solver::{write_trace_csv, EnergyBreakdown, TraceEntry};
use layerblur::synth::{render_sequence, SceneScript};
use layerblur::{extract_pixel_kernels, BlurModelKind, ImageBuffer, PixelKernels};
use serde::Serialize;

use crate::artifacts::{ensure_dir, load_frames, read_json, save_frames, write_json, Bundle};

const GROUND_TRUTH: &str = "gt_";

pub fn synth(script: &Path, out: &Path, seed: Option<u64>, model: Option<BlurModelKind>) -> Result<()> {
    let mut script = SceneScript::load(script)?;
    if let Some(seed) = seed {
        script.seed = seed;
    }
    let (frames, scene) = render_sequence(&script, model.unwrap_or_default())?;
    ensure_dir(out)?;
    save_frames(out, &frames)?;
    Bundle { dir: out, prefix: GROUND_TRUTH }.save(&scene)?;
    log::info!("wrote {} frames to {}", frames.len(), out.display());
    Ok(())
}

pub struct DeblurArgs {
    pub frames: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub model: Option<BlurModelKind>,
    pub gt_init: bool,
    pub gt: Option<PathBuf>,
    pub fg_label: Option<ForegroundChoice>,
}

#[derive(Serialize)]
struct DeblurReport {
    levels: Vec<(usize, usize)>,
    sub_steps: usize,
    final_energy: Option<EnergyBreakdown>,
    seconds: f64,
    /// Present when ground truth was available.
    metrics: Option<EvalReport>,
}

#[derive(Serialize)]
pub struct EvalReport {
    /// Whether the restored scene was re-anchored onto the truth's
    /// coordinate frame before scoring.
    pub aligned: bool,
    #[serde(flatten)]
    pub metrics: Metrics,
}

fn score(restored: &layerblur::Scene, truth: &layerblur::Scene, frames: Option<&[ImageBuffer]>, align: bool) -> Result<EvalReport> {
    let metrics = if align {
        evaluate(&align_gauge(restored, truth)?, truth, frames)?
    } else {
        evaluate(restored, truth, frames)?
    };
    Ok(EvalReport { aligned: align, metrics })
}

fn write_trace(path: &Path, trace: &[TraceEntry]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    write_trace_csv(BufWriter::new(file), trace)?;
    Ok(())
}

pub fn deblur_cmd(args: DeblurArgs) -> Result<()> {
    let mut config: RunConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(model) = args.model {
        config.model = model;
    }
    if let Some(fg) = args.fg_label {
        config.init.foreground = fg;
    }
    config.validate()?;
    let frames_dir = args
        .frames
        .or_else(|| config.frames_dir.clone())
        .context("no frame directory given and none in the config")?;
    let out = args
        .out
        .or_else(|| config.output_dir.clone())
        .context("no output directory given (--out) and none in the config")?;

    let frames = load_frames(&frames_dir)?;
    ensure!(
        frames.len() >= 2,
        "need at least two frame_*.png files in {}, found {}",
        frames_dir.display(),
        frames.len()
    );
    let gt_dir = args.gt.clone().unwrap_or_else(|| frames_dir.clone());
    let gt = Bundle { dir: &gt_dir, prefix: GROUND_TRUTH };
    let truth = if gt.exists() {
        Some(gt.load_scene()?)
    } else if args.gt.is_some() || args.gt_init {
        bail!("no ground-truth bundle (gt_L0/gt_L1/gt_A.png, motions.json) in {}", gt_dir.display());
    } else {
        None
    };
    let start = match (&truth, args.gt_init) {
        (Some(t), true) => Start::Scene(Box::new(t.clone())),
        _ => Start::Initialize,
    };

    ensure_dir(&out)?;
    let began = Instant::now();
    let mut trace = Vec::new();
    let result = deblur(&frames, &start, &config, &mut trace);
    // the trace is written even when a level fails
    write_trace(&out.join("energy.csv"), &trace)?;
    let output = result?;
    let seconds = began.elapsed().as_secs_f64();

    Bundle { dir: &out, prefix: "" }.save(&output.scene)?;
    // flow initialization anchors the layers on the middle frame, so its
    // output is scored in the truth's frame; a ground-truth start shares it
    let align = !args.gt_init;
    let metrics = match &truth {
        Some(t) => Some(score(&output.scene, t, Some(&frames), align)?),
        None => None,
    };
    write_json(
        &out.join("metrics.json"),
        &DeblurReport {
            levels: output.levels,
            sub_steps: trace.len(),
            final_energy: trace.last().map(|t| t.energy),
            seconds,
            metrics,
        },
    )
}

#[derive(Serialize)]
struct ModelComparison {
    max_diff: f64,
    mean_diff: f64,
    per_frame_max: Vec<f64>,
    /// Difference mapped to white in the heatmap.
    heatmap_scale: f64,
}

pub fn modelcmp(script: &Path, out: &Path) -> Result<()> {
    let script = SceneScript::load(script)?;
    let scene = script.build_scene()?;
    let prop = render_all_frames(&scene, BlurModelKind::Proposed)?;
    let conv = render_all_frames(&scene, BlurModelKind::Conventional)?;
    let (w, h, c) = (scene.width(), scene.height(), scene.channels());
    let mut heat = ImageBuffer::new(w, h, 1);
    let mut per_frame_max = Vec::with_capacity(prop.len());
    let (mut sum, mut count) = (0.0, 0usize);
    for (a, b) in prop.iter().zip(&conv) {
        let mut frame_max = 0.0f64;
        for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
            let d = (x - y).abs();
            let px = &mut heat.data_mut()[i / c];
            *px = px.max(d);
            frame_max = frame_max.max(d);
            sum += d;
            count += 1;
        }
        per_frame_max.push(frame_max);
    }
    let max_diff = per_frame_max.iter().copied().fold(0.0, f64::max);
    let scale = if max_diff > 0.0 { max_diff } else { 1.0 };
    ensure_dir(out)?;
    heat.map(|v| v / scale).save_png(&out.join("heatmap.png"))?;
    write_json(
        &out.join("report.json"),
        &ModelComparison {
            max_diff,
            mean_diff: sum / count.max(1) as f64,
            per_frame_max,
            heatmap_scale: scale,
        },
    )
}

pub fn parse_pixel(s: &str) -> Result<(usize, usize), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("pixel {s:?} is not of the form x,y"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("pixel {s:?}: {e}"));
    Ok((parse(x)?, parse(y)?))
}

#[derive(Serialize)]
struct KernelDump {
    /// `[x, y, weight]` for every non-zero layer pixel.
    foreground: Vec<(usize, usize, f64)>,
    background: Vec<(usize, usize, f64)>,
    foreground_sum: f64,
    background_sum: f64,
}

impl KernelDump {
    fn new(k: &PixelKernels, width: usize) -> Self {
        let list = |m: &std::collections::BTreeMap<usize, f64>| m.iter().map(|(&i, &w)| (i % width, i / width, w)).collect();
        Self {
            foreground: list(&k.foreground),
            background: list(&k.background),
            foreground_sum: k.foreground_sum(),
            background_sum: k.background_sum(),
        }
    }
}

#[derive(Serialize)]
struct PixelReport {
    pixel: (usize, usize),
    frame: usize,
    strip: String,
    proposed: KernelDump,
    conventional: KernelDump,
}

/// Four panels side by side: proposed fg, proposed bg, conventional fg,
/// conventional bg, each scaled by the largest weight of the strip.
fn kernel_strip(kernels: [&PixelKernels; 2], w: usize, h: usize) -> ImageBuffer {
    let gap = 2;
    let maps = [
        &kernels[0].foreground,
        &kernels[0].background,
        &kernels[1].foreground,
        &kernels[1].background,
    ];
    let peak = maps
        .iter()
        .flat_map(|m| m.values())
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut strip = ImageBuffer::filled(4 * w + 3 * gap, h, 1, 1.0);
    for (panel, map) in maps.iter().enumerate() {
        let x0 = panel * (w + gap);
        for y in 0..h {
            for x in 0..w {
                strip.set(x0 + x, y, 0, 0.0);
            }
        }
        for (&i, &v) in map.iter() {
            strip.set(x0 + i % w, i / w, 0, v.abs() / peak);
        }
    }
    strip
}

pub fn kernelviz(script: &Path, pixels: &[(usize, usize)], frame: usize, out: &Path) -> Result<()> {
    let script = SceneScript::load(script)?;
    let scene = script.build_scene()?;
    ensure!(!pixels.is_empty(), "no pixels requested");
    let (w, h) = (scene.width(), scene.height());
    let mut reports = Vec::with_capacity(pixels.len());
    let mut strips = Vec::with_capacity(pixels.len());
    for &p in pixels {
        let prop = extract_pixel_kernels(&scene, frame, p, BlurModelKind::Proposed)?;
        let conv = extract_pixel_kernels(&scene, frame, p, BlurModelKind::Conventional)?;
        let name = format!("kernels_f{frame}_x{}_y{}.png", p.0, p.1);
        strips.push((name.clone(), kernel_strip([&prop, &conv], w, h)));
        reports.push(PixelReport {
            pixel: p,
            frame,
            strip: name,
            proposed: KernelDump::new(&prop, w),
            conventional: KernelDump::new(&conv, w),
        });
    }
    ensure_dir(out)?;
    for (name, img) in strips {
        img.save_png(&out.join(name))?;
    }
    write_json(&out.join("kernels.json"), &reports)
}

pub fn eval(restored: &Path, truth: &Path, out: Option<&Path>, align: bool) -> Result<EvalReport> {
    let truth_bundle = Bundle { dir: truth, prefix: GROUND_TRUTH };
    let truth_scene = truth_bundle.load_scene()?;
    let rest = Bundle { dir: restored, prefix: "" };
    let [bg, fg, alpha] = rest.load_images()?;
    // without restored motions the truth's are borrowed and no motion error is reported
    let (motions, has_motion) = match rest.load_motions()? {
        Some(m) => (m, true),
        None => (layerblur::pipeline::MotionFile::from_scene(&truth_scene), false),
    };
    let restored_scene = motions.into_scene(fg, bg, alpha)?;
    let frames = load_frames(truth)?;
    let frames = (frames.len() == truth_scene.frame_count()).then_some(frames);
    let align = align && has_motion;
    let mut report = score(&restored_scene, &truth_scene, frames.as_deref(), align)?;
    if !has_motion {
        report.metrics.motion = None;
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("metrics.json"), &report)?;
    }
    Ok(report)
}
