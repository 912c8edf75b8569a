//! Occlusion-aware layered motion blur.
//!
//! A blurred video frame is modelled as the time average of instantaneous
//! two-layer composites (foreground over background with an alpha mask),
//! each layer moving under its own affine motion. The crate provides the
//! forward models, a synthetic scene renderer with dense-matrix oracles,
//! the alternating deblurring solver, flow/RANSAC initialization and the
//! coarse-to-fine pipeline.

pub mod error;
pub mod gradient;
pub mod image;
pub mod init;
pub mod metrics;
pub mod model;
pub mod motion;
pub mod pipeline;
pub mod scene;
pub mod solver;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};
pub use gradient::{image_gradient, image_gradient_adjoint};
pub use image::ImageBuffer;
pub use model::{
    extract_pixel_kernels, layer_exposure, render_blurred_frame, LayerOperator, MaskOperator, PixelKernels,
};
pub use motion::{interpolate_motion, AffineMotion, CaptureTiming};
pub use scene::{composite, BlurModelKind, Layer, Scene};
pub use warp::{warp_adjoint, warp_affine, WarpStencil};
pub use solver::{alternate, objective, EnergyBreakdown, SolverConfig};
pub use metrics::{evaluate, psnr, Metrics};
pub use pipeline::{deblur, RunConfig, Start};
