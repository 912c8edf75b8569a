mod common;

use common::{max_abs, noise, textured_scene, SceneParams};
use layerblur::model::{
    extract_pixel_kernels, render_all_frames, render_blurred_frame, LayerOperator, MaskOperator,
};
use layerblur::pipeline::pyramid_sizes;
use layerblur::{interpolate_motion, warp_affine, BlurModelKind, ImageBuffer, Scene};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KINDS: [BlurModelKind; 2] = [BlurModelKind::Proposed, BlurModelKind::Conventional];

fn params() -> impl Strategy<Value = SceneParams> {
    (
        any::<u64>(),
        2usize..5,
        2usize..6,
        0.2f64..1.0,
        (-3.0f64..3.0, -3.0f64..3.0),
        (-3.0f64..3.0, -3.0f64..3.0),
    )
        .prop_map(|(seed, frames, samples, duty, fg_step, bg_step)| SceneParams {
            size: (20, 16),
            frames,
            samples,
            duty,
            fg_step,
            bg_step,
            seed: seed % 10_000,
            ..SceneParams::default()
        })
}

fn with_layers(scene: &Scene, fg: ImageBuffer, bg: ImageBuffer) -> Scene {
    let [bgm, fgm] = scene.motions.clone();
    Scene::new(fg, bg, scene.alpha.clone(), bgm, fgm, scene.timing).unwrap()
}

fn with_alpha(scene: &Scene, value: f64) -> Scene {
    let [bgm, fgm] = scene.motions.clone();
    let alpha = ImageBuffer::filled(scene.width(), scene.height(), 1, value);
    Scene::new(scene.foreground.clone(), scene.background.clone(), alpha, bgm, fgm, scene.timing).unwrap()
}

/// Time-averaged gather of one layer along its own trajectory.
fn plain_blur(scene: &Scene, frame: usize, layer: usize) -> ImageBuffer {
    let img = if layer == 0 { &scene.background } else { &scene.foreground };
    let traj = &scene.motions[layer];
    let m = scene.timing.samples;
    let mut acc = ImageBuffer::new(img.width(), img.height(), img.channels());
    for k in 0..m {
        let motion = interpolate_motion(&traj[frame], &traj[frame + 1], k as f64 / m as f64, scene.timing.duty_cycle);
        let w = warp_affine(img, &motion).unwrap();
        for (a, v) in acc.data_mut().iter_mut().zip(w.data()) {
            *a += v / m as f64;
        }
    }
    acc
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, .. ProptestConfig::default() })]

    #[test]
    fn renders_are_linear_in_the_layers(params in params(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let scene = textured_scene(&params);
        let (w, h) = params.size;
        let x = (noise(params.seed + 1, params.size, 1, 0.0, 0.5, 1), noise(params.seed + 2, params.size, 1, 0.0, 0.5, 1));
        let y = (noise(params.seed + 3, params.size, 1, 0.0, 0.5, 1), noise(params.seed + 4, params.size, 1, 0.0, 0.5, 1));
        let mix = |p: &ImageBuffer, q: &ImageBuffer| ImageBuffer::from_fn(w, h, 1, |i, j, _| a * p.get(i, j, 0) + b * q.get(i, j, 0));
        let sx = with_layers(&scene, x.0.clone(), x.1.clone());
        let sy = with_layers(&scene, y.0.clone(), y.1.clone());
        let sm = with_layers(&scene, mix(&x.0, &y.0), mix(&x.1, &y.1));
        for kind in KINDS {
            for f in 0..params.frames {
                let (rx, ry, rm) = (
                    render_blurred_frame(&sx, f, kind).unwrap(),
                    render_blurred_frame(&sy, f, kind).unwrap(),
                    render_blurred_frame(&sm, f, kind).unwrap(),
                );
                let want: Vec<f64> = rx.data().iter().zip(ry.data()).map(|(p, q)| a * p + b * q).collect();
                prop_assert!(max_abs(rm.data(), &want) < 1e-10);
            }
        }
    }

    #[test]
    fn constant_masks_reduce_to_single_layer_blur(params in params()) {
        let scene = textured_scene(&params);
        for (value, layer) in [(1.0, 0usize), (0.0, 1usize)] {
            let s = with_alpha(&scene, value);
            for kind in KINDS {
                for f in 0..params.frames {
                    let got = render_blurred_frame(&s, f, kind).unwrap();
                    prop_assert!(max_abs(got.data(), plain_blur(&s, f, layer).data()) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn kernel_weights_are_conserved(params in params(), px in 0usize..20, py in 0usize..16) {
        let scene = textured_scene(&params);
        for kind in KINDS {
            for f in 0..params.frames {
                let k = extract_pixel_kernels(&scene, f, (px, py), kind).unwrap();
                let total = k.foreground_sum() + k.background_sum();
                prop_assert!((total - 1.0).abs() < 1e-10, "{kind:?} frame {f}: {total}");
            }
        }
    }

    #[test]
    fn operators_satisfy_the_adjoint_identity(params in params(), seed in any::<u64>()) {
        let scene = textured_scene(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for kind in KINDS {
            let op = LayerOperator::all_frames(&scene, kind).unwrap();
            let (x, y) = (random_vec(&mut rng, op.input_len()), random_vec(&mut rng, op.output_len()));
            let (mut ax, mut aty) = (vec![0.0; op.output_len()], vec![0.0; op.input_len()]);
            op.apply(&x, &mut ax);
            op.apply_adjoint(&y, &mut aty);
            let scale = dot(&ax, &ax).sqrt() * dot(&y, &y).sqrt();
            prop_assert!((dot(&ax, &y) - dot(&x, &aty)).abs() <= 1e-10 * scale.max(1.0));

            let op = MaskOperator::all_frames(&scene, kind).unwrap();
            let (x, y) = (random_vec(&mut rng, op.input_len()), random_vec(&mut rng, op.output_len()));
            let (mut ax, mut aty) = (vec![0.0; op.output_len()], vec![0.0; op.input_len()]);
            op.apply(&x, &mut ax);
            op.apply_adjoint(&y, &mut aty);
            let scale = dot(&ax, &ax).sqrt() * dot(&y, &y).sqrt();
            prop_assert!((dot(&ax, &y) - dot(&x, &aty)).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn rendering_is_deterministic(params in params()) {
        let scene = textured_scene(&params);
        for kind in KINDS {
            let (a, b) = (render_all_frames(&scene, kind).unwrap(), render_all_frames(&scene, kind).unwrap());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
            }
        }
    }

    #[test]
    fn pyramid_levels_telescope(w in 1usize..600, h in 1usize..600, min in 2usize..80) {
        let levels = pyramid_sizes(w, h, 0.8, min);
        prop_assert_eq!(levels[0], (w, h));
        for pair in levels.windows(2) {
            let ((pw, ph), (cw, ch)) = (pair[0], pair[1]);
            prop_assert_eq!((cw, ch), ((pw as f64 * 0.8).ceil() as usize, (ph as f64 * 0.8).ceil() as usize));
            prop_assert!(cw.min(ch) < pw.min(ph));
            // a level is only added below one that still met the minimum
            prop_assert!(pw.min(ph) >= min);
        }
        let (lw, lh) = *levels.last().unwrap();
        if w.min(h) >= min {
            prop_assert!(lw.min(lh) as f64 >= min as f64 * 0.8);
            prop_assert!(lw.min(lh) < min);
        }
    }
}
