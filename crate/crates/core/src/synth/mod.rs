//! Synthetic ground truth: scene scripts, sequence rendering, dense
//! operator oracles and the model-equivalence checks.

mod cases;
mod dense;
mod script;
mod texture;

pub use cases::{check_special_cases, model_difference, special_case_scene, SpecialCase, SpecialCaseReport};
pub use dense::{dense_mask_operator, dense_operator, DENSE_PIXEL_LIMIT};
pub use script::{fence_script, render_sequence, LayerSource, MaskSource, SceneScript};
pub use texture::{render_mask, Color, Shape, Texture};
