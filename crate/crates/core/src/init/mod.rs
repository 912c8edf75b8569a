//! Initial motions, layers and mask from the blurred frames alone.
//!
//! Flow from every frame to the reference frame is split into two affine
//! motions by sequential RANSAC. Those describe the mid-exposure pose of each
//! frame; they are converted to shutter-opening motions, then each layer is
//! the average of the frames aligned by its motion and the mask is the
//! average of the aligned per-frame background labels.

mod flow;
mod ransac;

use std::collections::VecDeque;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use flow::{compute_flow, FlowField, FLOW_ITERATIONS, FLOW_MIN_LEVEL, FLOW_PYRAMID_SCALE, FLOW_WINDOW};
pub use ransac::{ransac_two_affine, MotionLabel, RansacConfig, TwoMotionFit};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::motion::{auto_sample_count, interpolate_motion, AffineMotion, CaptureTiming};
use crate::scene::{Layer, Scene};
use crate::warp::warp_affine;

/// Which RANSAC hypothesis becomes the foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForegroundChoice {
    A,
    B,
    /// The hypothesis with the smaller labelled area.
    #[default]
    Auto,
}

impl FromStr for ForegroundChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Self::A),
            "b" => Ok(Self::B),
            "auto" => Ok(Self::Auto),
            other => Err(Error::Config(format!("foreground label must be a, b or auto, not {other:?}"))),
        }
    }
}

/// Zero-based index of the reference frame, the middle one (`⌈N/2⌉`
/// counting from one).
pub fn reference_frame(frames: usize) -> usize {
    frames.div_ceil(2).saturating_sub(1)
}

/// Per-frame layer motions and background labels for one frame.
#[derive(Debug, Clone)]
pub struct FrameLayers {
    pub background: AffineMotion,
    pub foreground: AffineMotion,
    /// 1 on pixels labelled background, 0 on foreground; outliers take the
    /// label of the nearest labelled pixel.
    pub background_mask: ImageBuffer,
}

/// Splits a two-motion fit into layers. Returns `(background, foreground)`
/// motions and the background label mask.
pub fn assign_layers(fit: &TwoMotionFit, choice: ForegroundChoice) -> FrameLayers {
    let fg_is_a = match choice {
        ForegroundChoice::A => true,
        ForegroundChoice::B => false,
        ForegroundChoice::Auto => fit.count(MotionLabel::A) < fit.count(MotionLabel::B),
    };
    let bg_label = if fg_is_a { MotionLabel::B } else { MotionLabel::A };
    let (background, foreground) = if fg_is_a {
        (fit.motion_b, fit.motion_a)
    } else {
        (fit.motion_a, fit.motion_b)
    };
    let filled = fill_outliers(&fit.labels, fit.width, fit.height);
    let mask = filled.iter().map(|&l| if l == bg_label { 1.0 } else { 0.0 }).collect();
    FrameLayers {
        background,
        foreground,
        background_mask: ImageBuffer::from_vec(fit.width, fit.height, 1, mask).expect("label grid"),
    }
}

/// Replaces outlier labels by the label of the nearest (4-connected,
/// breadth-first) inlier.
fn fill_outliers(labels: &[MotionLabel], width: usize, height: usize) -> Vec<MotionLabel> {
    let mut out = labels.to_vec();
    let mut queue: VecDeque<usize> = (0..out.len()).filter(|&i| out[i] != MotionLabel::Outlier).collect();
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % width, i / width);
        let mut visit = |j: usize| {
            if out[j] == MotionLabel::Outlier {
                out[j] = out[i];
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < width {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - width);
        }
        if y + 1 < height {
            visit(i + width);
        }
    }
    out
}

/// Mid-exposure motion of frame `i` for a trajectory of shutter openings.
pub fn mid_exposure(trajectory: &[AffineMotion], frame: usize, duty_cycle: f64) -> AffineMotion {
    interpolate_motion(&trajectory[frame], &trajectory[frame + 1], 0.5, duty_cycle)
}

/// Converts mid-exposure poses `m_0..m_{N−1}` into `N + 1` shutter-opening
/// motions assuming constant velocity within each frame interval; the last
/// opening is extrapolated.
pub fn openings_from_mid_exposure(mids: &[AffineMotion], duty_cycle: f64) -> Vec<AffineMotion> {
    let n = mids.len();
    let p: Vec<[f64; 6]> = mids.iter().map(AffineMotion::params).collect();
    let velocity = |i: usize| -> [f64; 6] {
        if n < 2 {
            return [0.0; 6];
        }
        let (a, b) = if i + 1 < n { (i, i + 1) } else { (n - 2, n - 1) };
        std::array::from_fn(|k| p[b][k] - p[a][k])
    };
    let mut out: Vec<AffineMotion> = (0..n)
        .map(|i| {
            let v = velocity(i);
            AffineMotion::from_params(std::array::from_fn(|k| p[i][k] - 0.5 * duty_cycle * v[k]))
        })
        .collect();
    let last = out[n - 1].params();
    let v = velocity(n - 1);
    out.push(AffineMotion::from_params(std::array::from_fn(|k| last[k] + v[k])));
    out
}

/// Builds the initial scene from per-layer opening motions (`N + 1` each)
/// and per-frame background masks.
///
/// Each layer is the mean of the frames aligned to the reference by the
/// inverse of that layer's mid-exposure motion; the mask is the mean of the
/// background masks aligned by the foreground motion.
pub fn init_scene(
    frames: &[ImageBuffer],
    motions: [Vec<AffineMotion>; 2],
    background_masks: &[ImageBuffer],
    timing: CaptureTiming,
) -> Result<Scene> {
    timing.validate()?;
    let n = timing.frames;
    if frames.len() != n || background_masks.len() != n {
        return Err(Error::Shape(format!(
            "{} frames and {} masks for a {n}-frame timing",
            frames.len(),
            background_masks.len()
        )));
    }
    for m in &motions {
        if m.len() != n + 1 {
            return Err(Error::Shape(format!("trajectory of {} motions, expected {}", m.len(), n + 1)));
        }
    }
    let first = &frames[0];
    for (f, m) in frames.iter().zip(background_masks) {
        f.ensure_same_shape(first, "frame vs first frame")?;
        if !m.same_dims(first) || m.channels() != 1 {
            return Err(Error::Shape("background mask must be single-channel, frame-sized".into()));
        }
    }
    let bg_pixels: f64 = background_masks.iter().map(|m| m.data().iter().sum::<f64>()).sum();
    let total = (n * first.pixel_count()) as f64;
    if bg_pixels == 0.0 {
        return Err(Error::DegenerateMask("no pixel labelled background".into()));
    }
    if bg_pixels == total {
        return Err(Error::DegenerateMask("no pixel labelled foreground".into()));
    }

    let aligned_mean = |images: &[ImageBuffer], layer: Layer| -> Result<ImageBuffer> {
        let warped = (0..n)
            .into_par_iter()
            .map(|i| {
                let inv = mid_exposure(&motions[layer.index()], i, timing.duty_cycle).inverse()?;
                warp_affine(&images[i], &inv)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut acc = ImageBuffer::new(images[0].width(), images[0].height(), images[0].channels());
        for w in &warped {
            for (a, v) in acc.data_mut().iter_mut().zip(w.data()) {
                *a += v / n as f64;
            }
        }
        Ok(acc.clamped())
    };
    let background = aligned_mean(frames, Layer::Background)?;
    let foreground = aligned_mean(frames, Layer::Foreground)?;
    let alpha = aligned_mean(background_masks, Layer::Foreground)?;
    let [bg, fg] = motions;
    Scene::new(foreground, background, alpha, bg, fg, timing)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub ransac: RansacConfig,
    pub foreground: ForegroundChoice,
    /// Exposure samples; derived from the motions when absent.
    pub samples: Option<usize>,
}

/// Picks which fitted motion continues the foreground of a neighbouring,
/// already labelled pair: the assignment whose motions land closest to the
/// anchor's at the image centre.
fn follow_roles(fit: &TwoMotionFit, anchor_bg: &AffineMotion, anchor_fg: &AffineMotion) -> ForegroundChoice {
    let (cx, cy) = ((fit.width as f64 - 1.0) / 2.0, (fit.height as f64 - 1.0) / 2.0);
    let dist = |m: &AffineMotion, n: &AffineMotion| {
        let (a, b) = (m.apply(cx, cy), n.apply(cx, cy));
        (a.0 - b.0).hypot(a.1 - b.1)
    };
    let a_is_fg = dist(&fit.motion_a, anchor_fg) + dist(&fit.motion_b, anchor_bg);
    let b_is_fg = dist(&fit.motion_b, anchor_fg) + dist(&fit.motion_a, anchor_bg);
    if a_is_fg <= b_is_fg {
        ForegroundChoice::A
    } else {
        ForegroundChoice::B
    }
}

/// Motions and labels of every frame against the reference frame.
///
/// Flow is computed between neighbouring frames (each frame towards the
/// reference) so that displacements stay small; the pairwise affines are then
/// chained onto the reference. Layer roles are decided by `config.foreground`
/// on the reference pair and carried outwards by motion continuity. Labels
/// come from each frame's own pair.
pub fn estimate_frame_layers(frames: &[ImageBuffer], config: &InitConfig) -> Result<Vec<FrameLayers>> {
    let n = frames.len();
    if n < 2 {
        return Err(Error::Shape("initialization needs at least two frames".into()));
    }
    let r = reference_frame(n);
    // the reference pairs with r + 1, which exists whenever n >= 2
    let toward = |i: usize| if i < r { i + 1 } else if i > r { i - 1 } else { r + 1 };
    let fits = (0..n)
        .into_par_iter()
        .map(|i| {
            let ransac = RansacConfig {
                seed: config.ransac.seed.wrapping_add(i as u64),
                ..config.ransac.clone()
            };
            let flow = compute_flow(&frames[i], &frames[toward(i)])?;
            if flow.degenerate && i != r {
                return Err(Error::DegenerateMask(format!("frame {i} has no texture to track")));
            }
            ransac_two_affine(&flow, &ransac)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pairwise: Vec<Option<FrameLayers>> = vec![None; n];
    pairwise[r] = Some(assign_layers(&fits[r], config.foreground));
    let order: Vec<usize> = (0..r).rev().chain(r + 1..n).collect();
    for &i in &order {
        let j = toward(i);
        let prev = pairwise[j].as_ref().expect("neighbour labelled first");
        // pairs right of the reference run backwards; the first of them
        // compares against the inverted reference pair
        let (abg, afg) = if j == r && i > r {
            (prev.background.inverse()?, prev.foreground.inverse()?)
        } else {
            (prev.background, prev.foreground)
        };
        pairwise[i] = Some(assign_layers(&fits[i], follow_roles(&fits[i], &abg, &afg)));
    }
    let pairwise: Vec<FrameLayers> = pairwise.into_iter().map(|p| p.expect("all labelled")).collect();

    let mut out = pairwise.clone();
    out[r].background = AffineMotion::IDENTITY;
    out[r].foreground = AffineMotion::IDENTITY;
    // frame i → neighbour j → … → reference
    for &i in &order {
        let j = toward(i);
        out[i].background = out[j].background.compose(&pairwise[i].background);
        out[i].foreground = out[j].foreground.compose(&pairwise[i].foreground);
    }
    Ok(out)
}

/// Full initialization: flow, RANSAC, role assignment, opening motions and
/// aligned averages.
pub fn initialize(frames: &[ImageBuffer], duty_cycle: f64, config: &InitConfig) -> Result<Scene> {
    let per_frame = estimate_frame_layers(frames, config)?;
    let bg_mid: Vec<AffineMotion> = per_frame.iter().map(|f| f.background).collect();
    let fg_mid: Vec<AffineMotion> = per_frame.iter().map(|f| f.foreground).collect();
    let motions = [
        openings_from_mid_exposure(&bg_mid, duty_cycle),
        openings_from_mid_exposure(&fg_mid, duty_cycle),
    ];
    let (w, h) = (frames[0].width(), frames[0].height());
    let samples = config
        .samples
        .unwrap_or_else(|| auto_sample_count(&motions, duty_cycle, w, h));
    let timing = CaptureTiming::new(duty_cycle, samples, frames.len())?;
    let masks: Vec<ImageBuffer> = per_frame.into_iter().map(|f| f.background_mask).collect();
    init_scene(frames, motions, &masks, timing)
}
