//! Reconstruction quality measures against a known scene.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::motion::AffineMotion;
use crate::init::mid_exposure;
use crate::model::layer_exposure;
use crate::scene::{BlurModelKind, Layer, Scene};
use crate::warp::warp_affine;

/// Reported PSNR of an exact match.
pub const PSNR_CAP: f64 = 99.0;

/// A layer pixel counts as recoverable when the frames together observe at
/// least this fraction of one full exposure of it.
pub const RECOVERABLE_EXPOSURE: f64 = 0.05;

/// `10 log10(1 / MSE)` over the selected pixels (all when `mask` is `None`),
/// capped at [`PSNR_CAP`]. Intensities are assumed to lie in `[0, 1]`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, mask: Option<&[bool]>) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Shape("psnr operands differ in shape".into()));
    }
    let c = a.channels();
    if let Some(m) = mask {
        if m.len() != a.pixel_count() {
            return Err(Error::Shape("psnr mask length differs from pixel count".into()));
        }
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
        if mask.is_none_or(|m| m[i / c]) {
            sum += (x - y).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Shape("psnr over an empty pixel set".into()));
    }
    let mse = sum / count as f64;
    Ok(if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    })
}

/// Rounds to the 0.01 dB reporting resolution.
pub fn round_db(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

pub fn mean_abs_error(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Shape("mean_abs_error operands differ in shape".into()));
    }
    let n = a.data().len().max(1) as f64;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
}

/// Pixels of each layer (`[background, foreground]`) that the true scene
/// exposes to the camera; the rest cannot be recovered from the frames.
pub fn recoverable_masks(truth: &Scene) -> Result<[Vec<bool>; 2]> {
    let [bg, fg] = layer_exposure(truth, BlurModelKind::Proposed)?;
    let m = |e: &ImageBuffer| e.data().iter().map(|&v| v > RECOVERABLE_EXPOSURE).collect();
    Ok([m(&bg), m(&fg)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionErrors {
    /// Largest translation error over all openings of both layers, pixels.
    pub max_translation: f64,
    pub mean_translation: f64,
    /// Largest Frobenius norm of the linear-part difference.
    pub max_linear: f64,
}

pub fn motion_errors(estimate: &Scene, truth: &Scene) -> Result<MotionErrors> {
    let (mut max_t, mut sum_t, mut max_l, mut n) = (0.0f64, 0.0, 0.0f64, 0usize);
    for layer in 0..2 {
        let (e, t) = (&estimate.motions[layer], &truth.motions[layer]);
        if e.len() != t.len() {
            return Err(Error::Shape("motion trajectories differ in length".into()));
        }
        for (a, b) in e.iter().zip(t) {
            let (pa, pb) = (a.params(), b.params());
            let dt = (pa[4] - pb[4]).hypot(pa[5] - pb[5]);
            let dl = (0..4).map(|k| (pa[k] - pb[k]).powi(2)).sum::<f64>().sqrt();
            max_t = max_t.max(dt);
            max_l = max_l.max(dl);
            sum_t += dt;
            n += 1;
        }
    }
    Ok(MotionErrors {
        max_translation: max_t,
        mean_translation: sum_t / n.max(1) as f64,
        max_linear: max_l,
    })
}

/// The middle frame moved back onto the layer grid by the inverse of the
/// layer's mid-exposure pose: the no-deblurring estimate of that layer.
pub fn blurred_baseline(frames: &[ImageBuffer], truth: &Scene, layer: Layer) -> Result<ImageBuffer> {
    let mid = frames.len() / 2;
    let frame = frames
        .get(mid)
        .ok_or_else(|| Error::Shape("no frames for the baseline".into()))?;
    let pose = mid_exposure(&truth.motions[layer.index()], mid, truth.timing.duty_cycle);
    // warp gathers src(θ(p)); frame(p) ≈ layer(pose(p)), so layer(q) ≈ frame(pose⁻¹(q))
    warp_affine(frame, &pose.inverse()?)
}

/// Re-expresses `restored` in the coordinate frame of `truth`.
///
/// Layer coordinates are only defined up to one affine map per layer; the
/// map is fixed here by requiring the mid-exposure pose of the middle frame
/// to agree with the truth. Layers (and the mask, which lives on the
/// foreground grid) are resampled and the trajectories re-anchored.
pub fn align_gauge(restored: &Scene, truth: &Scene) -> Result<Scene> {
    let n = truth.frame_count();
    if restored.frame_count() != n {
        return Err(Error::Shape(format!(
            "restored scene has {} frames, truth has {n}",
            restored.frame_count()
        )));
    }
    let mid = n / 2;
    let gauge = |layer: Layer| -> Result<AffineMotion> {
        let est = mid_exposure(&restored.motions[layer.index()], mid, restored.timing.duty_cycle);
        let tru = mid_exposure(&truth.motions[layer.index()], mid, truth.timing.duty_cycle);
        Ok(est.compose(&tru.inverse()?))
    };
    let (g_bg, g_fg) = (gauge(Layer::Background)?, gauge(Layer::Foreground)?);
    let reanchor = |traj: &[AffineMotion], g: &AffineMotion| -> Result<Vec<AffineMotion>> {
        let inv = g.inverse()?;
        Ok(traj.iter().map(|m| inv.compose(m)).collect())
    };
    Scene::new(
        warp_affine(&restored.foreground, &g_fg)?,
        warp_affine(&restored.background, &g_bg)?,
        warp_affine(&restored.alpha, &g_fg)?.clamped(),
        reanchor(&restored.motions[0], &g_bg)?,
        reanchor(&restored.motions[1], &g_fg)?,
        restored.timing,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub psnr_background: f64,
    pub psnr_foreground: f64,
    pub mask_mae: f64,
    pub motion: Option<MotionErrors>,
    /// Share of layer pixels included in the PSNR figures.
    pub recoverable_background: f64,
    pub recoverable_foreground: f64,
    pub baseline_psnr_background: Option<f64>,
    pub baseline_psnr_foreground: Option<f64>,
}

/// Compares a restored scene with the truth. PSNR values are rounded to
/// 0.01 dB. Motion errors are reported when both scenes carry trajectories
/// of equal length; baselines when the blurred frames are given.
pub fn evaluate(restored: &Scene, truth: &Scene, frames: Option<&[ImageBuffer]>) -> Result<Metrics> {
    if restored.width() != truth.width() || restored.height() != truth.height() {
        return Err(Error::Shape(format!(
            "restored scene is {}x{}, truth is {}x{}",
            restored.width(),
            restored.height(),
            truth.width(),
            truth.height()
        )));
    }
    let [bg_mask, fg_mask] = recoverable_masks(truth)?;
    let fraction = |m: &[bool]| m.iter().filter(|&&b| b).count() as f64 / m.len().max(1) as f64;
    let layer_psnr = |img: &ImageBuffer, t: &ImageBuffer, m: &[bool]| -> Result<f64> {
        if m.iter().any(|&b| b) {
            Ok(round_db(psnr(img, t, Some(m))?))
        } else {
            Ok(PSNR_CAP)
        }
    };
    let motion = (restored.motions[0].len() == truth.motions[0].len()
        && restored.motions[1].len() == truth.motions[1].len())
    .then(|| motion_errors(restored, truth))
    .transpose()?;
    let (baseline_bg, baseline_fg) = match frames {
        Some(f) => (
            Some(layer_psnr(&blurred_baseline(f, truth, Layer::Background)?, &truth.background, &bg_mask)?),
            Some(layer_psnr(&blurred_baseline(f, truth, Layer::Foreground)?, &truth.foreground, &fg_mask)?),
        ),
        None => (None, None),
    };
    Ok(Metrics {
        psnr_background: layer_psnr(&restored.background, &truth.background, &bg_mask)?,
        psnr_foreground: layer_psnr(&restored.foreground, &truth.foreground, &fg_mask)?,
        mask_mae: mean_abs_error(&restored.alpha, &truth.alpha)?,
        motion,
        recoverable_background: fraction(&bg_mask),
        recoverable_foreground: fraction(&fg_mask),
        baseline_psnr_background: baseline_bg,
        baseline_psnr_foreground: baseline_fg,
    })
}
