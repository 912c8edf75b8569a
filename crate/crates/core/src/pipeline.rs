//! Coarse-to-fine orchestration of the alternating solver.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::init::{initialize, InitConfig};
use crate::motion::{auto_sample_count, AffineMotion, CaptureTiming};
use crate::scene::{BlurModelKind, Scene};
use crate::solver::{alternate_into, SolverConfig, TraceEntry};

/// Optional replacements for the frame-count dependent solver defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOverrides {
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub sigma_d: Option<f64>,
    pub sigma_a: Option<f64>,
    pub tau: Option<f64>,
    pub hyper_exponent: Option<f64>,
    pub beta_schedule: Option<Vec<f64>>,
    pub cg_max_iter: Option<usize>,
    pub cg_rel_tol: Option<f64>,
    pub pd_iterations: Option<usize>,
    pub nm_max_evals: Option<usize>,
    pub inner_iterations: Option<usize>,
}

impl SolverOverrides {
    /// Defaults for `frames` frames with every present field replaced. When
    /// only `lambda1` is given, `lambda2` and `lambda3` follow it.
    pub fn resolve(&self, frames: usize, model: BlurModelKind) -> SolverConfig {
        let mut c = SolverConfig::for_frames(frames);
        if let Some(l1) = self.lambda1 {
            c.lambda1 = l1;
            c.lambda2 = 0.055 * l1;
            c.lambda3 = l1 / 20000.0;
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        take!(
            lambda2,
            lambda3,
            sigma_d,
            sigma_a,
            hyper_exponent,
            beta_schedule,
            cg_max_iter,
            cg_rel_tol,
            pd_iterations,
            nm_max_evals,
            inner_iterations
        );
        // τ tracks σ_A unless set explicitly
        c.tau = self.tau.unwrap_or(c.sigma_a);
        c.model = model;
        c
    }
}

/// Everything a deblurring run needs besides the frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub solver: SolverOverrides,
    pub pyramid_scale: f64,
    pub min_level_size: usize,
    pub duty_cycle: f64,
    pub model: BlurModelKind,
    /// Exposure samples per frame; derived per level when absent.
    pub samples: Option<usize>,
    pub init: InitConfig,
    pub seed: u64,
    pub frames_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            solver: SolverOverrides::default(),
            pyramid_scale: 0.8,
            min_level_size: 32,
            duty_cycle: 0.5,
            model: BlurModelKind::Proposed,
            samples: None,
            init: InitConfig::default(),
            seed: 0,
            frames_dir: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return Err(Error::Config(format!(
                "pyramid_scale must lie in (0, 1), got {}",
                self.pyramid_scale
            )));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle <= 1.0) {
            return Err(Error::Config(format!("duty_cycle must lie in (0, 1], got {}", self.duty_cycle)));
        }
        if self.min_level_size == 0 {
            return Err(Error::Config("min_level_size must be positive".into()));
        }
        if self.samples == Some(0) {
            return Err(Error::Config("samples must be positive".into()));
        }
        self.init.ransac.validate()
    }

    pub fn solver_config(&self, frames: usize) -> SolverConfig {
        self.solver.resolve(frames, self.model)
    }
}

/// Level sizes from finest to coarsest: each is `ceil(prev * scale)`, and
/// shrinking stops at the first level whose smaller side is below
/// `min_level_size`.
pub fn pyramid_sizes(width: usize, height: usize, scale: f64, min_level_size: usize) -> Vec<(usize, usize)> {
    let mut sizes = vec![(width, height)];
    loop {
        let (w, h) = *sizes.last().expect("non-empty");
        if w.min(h) < min_level_size {
            break;
        }
        let next = (
            ((w as f64 * scale).ceil() as usize).max(1),
            ((h as f64 * scale).ceil() as usize).max(1),
        );
        if next == (w, h) {
            break;
        }
        sizes.push(next);
    }
    sizes
}

fn rescale_motions(motions: &[Vec<AffineMotion>; 2], sx: f64, sy: f64) -> [Vec<AffineMotion>; 2] {
    let f = |t: &Vec<AffineMotion>| t.iter().map(|m| m.rescaled(sx, sy)).collect();
    [f(&motions[0]), f(&motions[1])]
}

/// Resamples a scene onto a `width x height` grid: area averaging when
/// shrinking, bilinear when enlarging, motions re-expressed in level pixels.
pub fn resample_scene(scene: &Scene, width: usize, height: usize, samples: Option<usize>) -> Result<Scene> {
    let sx = width as f64 / scene.width() as f64;
    let sy = height as f64 / scene.height() as f64;
    let motions = rescale_motions(&scene.motions, sx, sy);
    let m = samples.unwrap_or_else(|| auto_sample_count(&motions, scene.timing.duty_cycle, width, height));
    let timing = CaptureTiming::new(scene.timing.duty_cycle, m, scene.timing.frames)?;
    let [bg, fg] = motions;
    Scene::new(
        scene.foreground.resize(width, height),
        scene.background.resize(width, height),
        scene.alpha.resize(width, height).clamped(),
        bg,
        fg,
        timing,
    )
}

/// Where the coarse-to-fine run starts.
#[derive(Debug, Clone)]
pub enum Start {
    /// Flow/RANSAC initialization from the frames.
    Initialize,
    /// A full-resolution scene, typically the ground truth.
    Scene(Box<Scene>),
}

#[derive(Debug, Clone)]
pub struct DeblurOutput {
    pub scene: Scene,
    pub levels: Vec<(usize, usize)>,
}

/// Runs the solver from the coarsest pyramid level to full resolution.
/// Trace entries are appended to `trace` as they are produced, so the
/// caller keeps them even when a later level fails.
pub fn deblur(
    frames: &[ImageBuffer],
    start: &Start,
    config: &RunConfig,
    trace: &mut Vec<TraceEntry>,
) -> Result<DeblurOutput> {
    config.validate()?;
    if frames.len() < 2 {
        return Err(Error::Shape(format!("need at least two frames, got {}", frames.len())));
    }
    let first = &frames[0];
    if let Some(bad) = frames.iter().position(|f| !f.same_shape(first)) {
        return Err(Error::Shape(format!(
            "frame {bad} is {}x{}x{}, frame 0 is {}x{}x{}",
            frames[bad].width(),
            frames[bad].height(),
            frames[bad].channels(),
            first.width(),
            first.height(),
            first.channels()
        )));
    }
    let (w, h) = (first.width(), first.height());
    let solver = config.solver_config(frames.len());
    solver.validate()?;

    let full = match start {
        Start::Initialize => {
            let mut init = config.init.clone();
            init.ransac.seed = init.ransac.seed.wrapping_add(config.seed);
            initialize(frames, config.duty_cycle, &init)?
        }
        Start::Scene(s) => {
            if s.width() != w || s.height() != h || s.frame_count() != frames.len() {
                return Err(Error::Shape(format!(
                    "starting scene is {}x{} with {} frames, input is {w}x{h} with {}",
                    s.width(),
                    s.height(),
                    s.frame_count(),
                    frames.len()
                )));
            }
            let mut s = (**s).clone();
            s.timing.duty_cycle = config.duty_cycle;
            s
        }
    };

    let levels = pyramid_sizes(w, h, config.pyramid_scale, config.min_level_size);
    let mut current: Option<Scene> = None;
    for (depth, &(lw, lh)) in levels.iter().enumerate().rev() {
        let level = levels.len() - 1 - depth;
        let level_frames: Vec<ImageBuffer> = frames.iter().map(|f| f.resize(lw, lh)).collect();
        let seed_scene = match &current {
            None => resample_scene(&full, lw, lh, config.samples)?,
            Some(prev) => resample_scene(prev, lw, lh, config.samples)?,
        };
        log::info!(
            "level {level}: {lw}x{lh}, {} samples per exposure",
            seed_scene.timing.samples
        );
        let out = alternate_into(&seed_scene, &level_frames, &solver, level, trace)?;
        current = Some(out);
    }
    Ok(DeblurOutput {
        scene: current.expect("at least one level"),
        levels,
    })
}

/// Motion trajectories and timing as written next to restored or
/// ground-truth images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionFile {
    pub timing: CaptureTiming,
    pub background: Vec<AffineMotion>,
    pub foreground: Vec<AffineMotion>,
}

impl MotionFile {
    pub fn from_scene(scene: &Scene) -> Self {
        Self {
            timing: scene.timing,
            background: scene.motions[0].clone(),
            foreground: scene.motions[1].clone(),
        }
    }

    pub fn into_scene(self, foreground: ImageBuffer, background: ImageBuffer, alpha: ImageBuffer) -> Result<Scene> {
        Scene::new(foreground, background, alpha, self.background, self.foreground, self.timing)
    }
}
