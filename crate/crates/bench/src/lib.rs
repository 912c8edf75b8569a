//! Shared fixtures for the benchmarks.

use layerblur::synth::{special_case_scene, SpecialCase};
use layerblur::Scene;

/// Three-frame scene with both layers moving, `size` pixels square.
pub fn moving_scene(size: usize) -> Scene {
    special_case_scene(SpecialCase::Control, 7, size).expect("fixture scene")
}
