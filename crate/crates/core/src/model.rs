//! Layered blur generative models as matrix-free linear operators.
//!
//! For frame `i` and exposure sample `k`, `W_l^{i,k}` warps layer `l` by the
//! motion interpolated between the openings of frames `i` and `i + 1`.
//!
//! * Proposed: `B = 1/M Σ_k [ W1k((1−A)⊙L1) + (W1k A) ⊙ (W0k L0) ]`
//! * Conventional: `B = K1((1−A)⊙L1) + (K1 A) ⊙ (K0 L0)` with
//!   `K_l = 1/M Σ_k W_l^k`.
//!
//! Both are linear in `(L0, L1)` for fixed `A` and affine in `A` for fixed
//! layers; [`LayerOperator`] and [`MaskOperator`] expose those linear maps
//! together with their exact adjoints.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::motion::{interpolate_motion, AffineMotion, CaptureTiming};
use crate::scene::{BlurModelKind, Layer, Scene};
use crate::warp::WarpStencil;

/// Warp stencils for every exposure sample of one frame.
#[derive(Debug, Clone)]
pub struct FrameStencils {
    pub background: Vec<WarpStencil>,
    pub foreground: Vec<WarpStencil>,
}

impl FrameStencils {
    pub fn for_frame(scene: &Scene, frame: usize) -> Result<Self> {
        scene.check_frame(frame)?;
        let bg = &scene.motions[Layer::Background.index()];
        let fg = &scene.motions[Layer::Foreground.index()];
        Self::from_motions(
            scene.width(),
            scene.height(),
            (&bg[frame], &bg[frame + 1]),
            (&fg[frame], &fg[frame + 1]),
            &scene.timing,
        )
    }

    pub fn from_motions(
        width: usize,
        height: usize,
        background: (&AffineMotion, &AffineMotion),
        foreground: (&AffineMotion, &AffineMotion),
        timing: &CaptureTiming,
    ) -> Result<Self> {
        let build = |(a, b): (&AffineMotion, &AffineMotion)| -> Result<Vec<WarpStencil>> {
            timing
                .sample_fractions()
                .map(|t| {
                    let m = interpolate_motion(a, b, t, timing.duty_cycle);
                    WarpStencil::new(width, height, &m)
                })
                .collect()
        };
        Ok(Self {
            background: build(background)?,
            foreground: build(foreground)?,
        })
    }

    #[inline]
    pub fn samples(&self) -> usize {
        self.foreground.len()
    }
}

fn warp_mask_samples(stencils: &FrameStencils, alpha: &[f64], kind: BlurModelKind) -> Vec<Vec<f64>> {
    let n = alpha.len();
    let per_sample: Vec<Vec<f64>> = stencils
        .foreground
        .iter()
        .map(|s| {
            let mut out = vec![0.0; n];
            s.gather(alpha, 1, &mut out);
            out
        })
        .collect();
    match kind {
        BlurModelKind::Proposed => per_sample,
        BlurModelKind::Conventional => vec![mean_of(&per_sample)],
    }
}

fn mean_of(parts: &[Vec<f64>]) -> Vec<f64> {
    let inv = 1.0 / parts.len() as f64;
    let mut acc = vec![0.0; parts[0].len()];
    for p in parts {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

struct LayerFrameOp {
    stencils: FrameStencils,
    // Proposed: W1k A per sample. Conventional: the single blurred mask K1 A.
    visibility: Vec<Vec<f64>>,
}

/// `K_L`: maps `[L0; L1]` to the stacked blurred frames for fixed mask and
/// motions.
pub struct LayerOperator {
    kind: BlurModelKind,
    width: usize,
    height: usize,
    channels: usize,
    one_minus_alpha: Vec<f64>,
    frames: Vec<LayerFrameOp>,
}

impl LayerOperator {
    pub fn new(scene: &Scene, frames: &[usize], kind: BlurModelKind) -> Result<Self> {
        Self::with_channels(scene, frames, kind, scene.channels())
    }

    pub fn all_frames(scene: &Scene, kind: BlurModelKind) -> Result<Self> {
        let frames: Vec<usize> = (0..scene.frame_count()).collect();
        Self::new(scene, &frames, kind)
    }

    pub fn with_channels(
        scene: &Scene,
        frames: &[usize],
        kind: BlurModelKind,
        channels: usize,
    ) -> Result<Self> {
        let alpha = scene.alpha.data();
        let ops = frames
            .par_iter()
            .map(|&f| {
                let stencils = FrameStencils::for_frame(scene, f)?;
                let visibility = warp_mask_samples(&stencils, alpha, kind);
                Ok(LayerFrameOp {
                    stencils,
                    visibility,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            width: scene.width(),
            height: scene.height(),
            channels,
            one_minus_alpha: alpha.iter().map(|a| 1.0 - a).collect(),
            frames: ops,
        })
    }

    #[inline]
    fn image_len(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// `2 · n · channels`: background then foreground.
    pub fn input_len(&self) -> usize {
        2 * self.image_len()
    }

    pub fn output_len(&self) -> usize {
        self.frames.len() * self.image_len()
    }

    /// `out = K_L [L0; L1]`.
    pub fn apply(&self, layers: &[f64], out: &mut [f64]) {
        let len = self.image_len();
        assert_eq!(layers.len(), 2 * len);
        assert_eq!(out.len(), self.output_len());
        let c = self.channels;
        let (l0, l1) = layers.split_at(len);
        let pre: Vec<f64> = l1
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.one_minus_alpha[i / c])
            .collect();
        out.par_chunks_mut(len)
            .zip(&self.frames)
            .for_each(|(dst, op)| self.apply_frame(op, l0, &pre, dst));
    }

    fn apply_frame(&self, op: &LayerFrameOp, l0: &[f64], fg_pre: &[f64], dst: &mut [f64]) {
        let c = self.channels;
        let m = op.stencils.samples();
        let inv = 1.0 / m as f64;
        let len = dst.len();
        let mut warped = vec![0.0; len];
        let mut fg_acc = vec![0.0; len];
        let mut bg_acc = vec![0.0; len];
        for k in 0..m {
            op.stencils.foreground[k].gather(fg_pre, c, &mut warped);
            fg_acc.iter_mut().zip(&warped).for_each(|(a, w)| *a += w);
            op.stencils.background[k].gather(l0, c, &mut warped);
            match self.kind {
                BlurModelKind::Proposed => {
                    let vis = &op.visibility[k];
                    for (i, (a, w)) in bg_acc.iter_mut().zip(&warped).enumerate() {
                        *a += vis[i / c] * w;
                    }
                }
                BlurModelKind::Conventional => {
                    bg_acc.iter_mut().zip(&warped).for_each(|(a, w)| *a += w);
                }
            }
        }
        match self.kind {
            BlurModelKind::Proposed => {
                for i in 0..len {
                    dst[i] = inv * (fg_acc[i] + bg_acc[i]);
                }
            }
            BlurModelKind::Conventional => {
                let vis = &op.visibility[0];
                for i in 0..len {
                    dst[i] = inv * fg_acc[i] + vis[i / c] * (inv * bg_acc[i]);
                }
            }
        }
    }

    /// `out = K_Lᵀ r`.
    pub fn apply_adjoint(&self, residual: &[f64], out: &mut [f64]) {
        let len = self.image_len();
        assert_eq!(residual.len(), self.output_len());
        assert_eq!(out.len(), 2 * len);
        let parts: Vec<Vec<f64>> = residual
            .par_chunks(len)
            .zip(&self.frames)
            .map(|(r, op)| self.adjoint_frame(op, r))
            .collect();
        out.iter_mut().for_each(|v| *v = 0.0);
        for p in &parts {
            out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
        }
        let c = self.channels;
        let (_, l1) = out.split_at_mut(len);
        for (i, v) in l1.iter_mut().enumerate() {
            *v *= self.one_minus_alpha[i / c];
        }
    }

    fn adjoint_frame(&self, op: &LayerFrameOp, r: &[f64]) -> Vec<f64> {
        let c = self.channels;
        let len = r.len();
        let m = op.stencils.samples();
        let inv = 1.0 / m as f64;
        let mut out = vec![0.0; 2 * len];
        let (bg, fg) = out.split_at_mut(len);
        let mut weighted = vec![0.0; len];
        for k in 0..m {
            op.stencils.foreground[k].scatter_add(r, c, fg);
            let vis = match self.kind {
                BlurModelKind::Proposed => &op.visibility[k],
                BlurModelKind::Conventional => &op.visibility[0],
            };
            for (i, (w, v)) in weighted.iter_mut().zip(r).enumerate() {
                *w = vis[i / c] * v;
            }
            op.stencils.background[k].scatter_add(&weighted, c, bg);
        }
        out.iter_mut().for_each(|v| *v *= inv);
        out
    }
}

struct MaskFrameOp {
    stencils: FrameStencils,
    // Proposed: W0k L0 per sample. Conventional: K0 L0 once.
    background: Vec<Vec<f64>>,
    // 1/M Σ_k W1k L1, the mask-independent part of the render.
    offset: Vec<f64>,
}

/// `K_A`: the linear part of the render as a function of the mask for fixed
/// layers and motions. The full render is `offset + K_A A`.
pub struct MaskOperator {
    kind: BlurModelKind,
    width: usize,
    height: usize,
    channels: usize,
    foreground: Vec<f64>,
    frames: Vec<MaskFrameOp>,
}

impl MaskOperator {
    pub fn new(scene: &Scene, frames: &[usize], kind: BlurModelKind) -> Result<Self> {
        let c = scene.channels();
        let len = scene.foreground.data().len();
        let l0 = scene.background.data();
        let l1 = scene.foreground.data();
        let ops = frames
            .par_iter()
            .map(|&f| {
                let stencils = FrameStencils::for_frame(scene, f)?;
                let m = stencils.samples();
                let inv = 1.0 / m as f64;
                let mut offset = vec![0.0; len];
                let mut tmp = vec![0.0; len];
                for s in &stencils.foreground {
                    s.gather(l1, c, &mut tmp);
                    offset.iter_mut().zip(&tmp).for_each(|(o, t)| *o += inv * t);
                }
                let per_sample: Vec<Vec<f64>> = stencils
                    .background
                    .iter()
                    .map(|s| {
                        let mut out = vec![0.0; len];
                        s.gather(l0, c, &mut out);
                        out
                    })
                    .collect();
                let background = match kind {
                    BlurModelKind::Proposed => per_sample,
                    BlurModelKind::Conventional => vec![mean_of(&per_sample)],
                };
                Ok(MaskFrameOp {
                    stencils,
                    background,
                    offset,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            width: scene.width(),
            height: scene.height(),
            channels: c,
            foreground: l1.to_vec(),
            frames: ops,
        })
    }

    pub fn all_frames(scene: &Scene, kind: BlurModelKind) -> Result<Self> {
        let frames: Vec<usize> = (0..scene.frame_count()).collect();
        Self::new(scene, &frames, kind)
    }

    pub fn input_len(&self) -> usize {
        self.width * self.height
    }

    pub fn output_len(&self) -> usize {
        self.frames.len() * self.width * self.height * self.channels
    }

    /// Stacked `1/M Σ_k W1k L1` for every frame.
    pub fn offset(&self) -> Vec<f64> {
        self.frames.iter().flat_map(|f| f.offset.iter().copied()).collect()
    }

    /// `out = K_A A`.
    pub fn apply(&self, alpha: &[f64], out: &mut [f64]) {
        let n = self.width * self.height;
        let c = self.channels;
        assert_eq!(alpha.len(), n);
        assert_eq!(out.len(), self.output_len());
        // A ⊙ L1, broadcast over channels
        let masked_fg: Vec<f64> = self
            .foreground
            .iter()
            .enumerate()
            .map(|(i, v)| alpha[i / c] * v)
            .collect();
        out.par_chunks_mut(n * c).zip(&self.frames).for_each(|(dst, op)| {
            let m = op.stencils.samples();
            let inv = 1.0 / m as f64;
            let mut wa = vec![0.0; n];
            let mut wfg = vec![0.0; n * c];
            let mut bg_acc = vec![0.0; n * c];
            let mut vis_acc = vec![0.0; n];
            dst.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..m {
                let s1 = &op.stencils.foreground[k];
                s1.gather(alpha, 1, &mut wa);
                s1.gather(&masked_fg, c, &mut wfg);
                match self.kind {
                    BlurModelKind::Proposed => {
                        let bg = &op.background[k];
                        for i in 0..n * c {
                            bg_acc[i] += wa[i / c] * bg[i];
                        }
                    }
                    BlurModelKind::Conventional => {
                        vis_acc.iter_mut().zip(&wa).for_each(|(a, w)| *a += w);
                    }
                }
                dst.iter_mut().zip(&wfg).for_each(|(d, w)| *d -= w);
            }
            match self.kind {
                BlurModelKind::Proposed => {
                    for i in 0..n * c {
                        dst[i] = inv * (bg_acc[i] + dst[i]);
                    }
                }
                BlurModelKind::Conventional => {
                    let bg = &op.background[0];
                    for i in 0..n * c {
                        dst[i] = inv * vis_acc[i / c] * bg[i] + inv * dst[i];
                    }
                }
            }
        });
    }

    /// `out = K_Aᵀ r` (single channel).
    pub fn apply_adjoint(&self, residual: &[f64], out: &mut [f64]) {
        let n = self.width * self.height;
        let c = self.channels;
        assert_eq!(residual.len(), self.output_len());
        assert_eq!(out.len(), n);
        let parts: Vec<Vec<f64>> = residual
            .par_chunks(n * c)
            .zip(&self.frames)
            .map(|(r, op)| {
                let m = op.stencils.samples();
                let inv = 1.0 / m as f64;
                let mut vis_grad = vec![0.0; n * c];
                let mut fg_grad = vec![0.0; n * c];
                let mut weighted = vec![0.0; n * c];
                for k in 0..m {
                    let s1 = &op.stencils.foreground[k];
                    let bg = match self.kind {
                        BlurModelKind::Proposed => &op.background[k],
                        BlurModelKind::Conventional => &op.background[0],
                    };
                    for i in 0..n * c {
                        weighted[i] = bg[i] * r[i];
                    }
                    s1.scatter_add(&weighted, c, &mut vis_grad);
                    s1.scatter_add(r, c, &mut fg_grad);
                }
                let mut g = vec![0.0; n];
                for i in 0..n * c {
                    g[i / c] += inv * (vis_grad[i] - self.foreground[i] * fg_grad[i]);
                }
                g
            })
            .collect();
        out.iter_mut().for_each(|v| *v = 0.0);
        for p in &parts {
            out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
        }
    }
}

/// Stacks `[L0; L1]` into the layout consumed by [`LayerOperator`].
pub fn stack_layers(scene: &Scene) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * scene.background.data().len());
    v.extend_from_slice(scene.background.data());
    v.extend_from_slice(scene.foreground.data());
    v
}

/// Renders every frame of `scene` without clamping, concatenated.
pub fn render_all_linear(scene: &Scene, kind: BlurModelKind) -> Result<Vec<f64>> {
    let op = LayerOperator::all_frames(scene, kind)?;
    let mut out = vec![0.0; op.output_len()];
    op.apply(&stack_layers(scene), &mut out);
    Ok(out)
}

/// One blurred frame under the chosen model, clamped to `[0, 1]`.
pub fn render_blurred_frame(scene: &Scene, frame: usize, kind: BlurModelKind) -> Result<ImageBuffer> {
    scene.check_frame(frame)?;
    let op = LayerOperator::new(scene, &[frame], kind)?;
    let mut out = vec![0.0; op.output_len()];
    op.apply(&stack_layers(scene), &mut out);
    Ok(ImageBuffer::from_vec(scene.width(), scene.height(), scene.channels(), out)?.clamped())
}

pub fn render_all_frames(scene: &Scene, kind: BlurModelKind) -> Result<Vec<ImageBuffer>> {
    let flat = render_all_linear(scene, kind)?;
    let len = scene.foreground.data().len();
    flat.chunks(len)
        .map(|c| {
            ImageBuffer::from_vec(scene.width(), scene.height(), scene.channels(), c.to_vec())
                .map(ImageBuffer::clamped)
        })
        .collect()
}

/// One row of the combined blur operator at a pixel, split by layer.
/// Keys are row-major pixel indices into the layer images.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PixelKernels {
    pub foreground: BTreeMap<usize, f64>,
    pub background: BTreeMap<usize, f64>,
}

impl PixelKernels {
    pub fn foreground_sum(&self) -> f64 {
        self.foreground.values().sum()
    }

    pub fn background_sum(&self) -> f64 {
        self.background.values().sum()
    }
}

fn accumulate(map: &mut BTreeMap<usize, f64>, key: usize, w: f64) {
    if w != 0.0 {
        *map.entry(key).or_insert(0.0) += w;
    }
}

/// Per-pixel blur kernels for foreground and background layer pixels.
///
/// Proposed: each sample contributes the background taps weighted by that
/// sample's mask visibility, so occluded samples drop out of the support.
/// Conventional: the background kernel is the full averaged kernel scaled
/// by the blurred mask value.
pub fn extract_pixel_kernels(
    scene: &Scene,
    frame: usize,
    pixel: (usize, usize),
    kind: BlurModelKind,
) -> Result<PixelKernels> {
    let (x, y) = pixel;
    if x >= scene.width() || y >= scene.height() {
        return Err(Error::Index(format!(
            "pixel ({x}, {y}) outside {}x{}",
            scene.width(),
            scene.height()
        )));
    }
    let stencils = FrameStencils::for_frame(scene, frame)?;
    let p = y * scene.width() + x;
    let alpha = scene.alpha.data();
    let m = stencils.samples() as f64;
    let mut out = PixelKernels::default();

    let visibility: Vec<f64> = stencils
        .foreground
        .iter()
        .map(|s| s.taps(p).iter().map(|&(q, w)| w * alpha[q as usize]).sum())
        .collect();
    for s in &stencils.foreground {
        for &(q, w) in s.taps(p) {
            accumulate(&mut out.foreground, q as usize, w * (1.0 - alpha[q as usize]) / m);
        }
    }
    let blurred_alpha = visibility.iter().sum::<f64>() / m;
    for (k, s) in stencils.background.iter().enumerate() {
        let scale = match kind {
            BlurModelKind::Proposed => visibility[k],
            BlurModelKind::Conventional => blurred_alpha,
        };
        for &(q, w) in s.taps(p) {
            accumulate(&mut out.background, q as usize, scale * w / m);
        }
    }
    Ok(out)
}

/// Column sums of the layer blocks of `K_L` over all frames, divided by the
/// frame count: how much of each layer pixel reaches the observations.
pub fn layer_exposure(scene: &Scene, kind: BlurModelKind) -> Result<[ImageBuffer; 2]> {
    let frames: Vec<usize> = (0..scene.frame_count()).collect();
    let op = LayerOperator::with_channels(scene, &frames, kind, 1)?;
    let ones = vec![1.0 / frames.len() as f64; op.output_len()];
    let mut cols = vec![0.0; op.input_len()];
    op.apply_adjoint(&ones, &mut cols);
    let n = scene.width() * scene.height();
    let bg = ImageBuffer::from_vec(scene.width(), scene.height(), 1, cols[..n].to_vec())?;
    let fg = ImageBuffer::from_vec(scene.width(), scene.height(), 1, cols[n..].to_vec())?;
    Ok([bg, fg])
}
