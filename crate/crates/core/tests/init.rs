mod common;

use common::{noise, soft_disk, translations};
use layerblur::init::{
    assign_layers, compute_flow, init_scene, initialize, mid_exposure, ransac_two_affine, FlowField,
    ForegroundChoice, InitConfig, MotionLabel, RansacConfig,
};
use layerblur::model::render_all_frames;
use layerblur::synth::{render_mask, render_sequence, LayerSource, MaskSource, SceneScript, Shape, Texture};
use layerblur::{warp_affine, AffineMotion, BlurModelKind, CaptureTiming, Error, ImageBuffer, Layer};
use proptest::prelude::*;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn identical_images_give_zero_flow() {
    let a = noise(3, (40, 32), 1, 0.0, 1.0, 2);
    let f = compute_flow(&a, &a).unwrap();
    assert!(!f.degenerate);
    assert!(f.u.data().iter().chain(f.v.data()).all(|d| d.abs() < 1e-9));
}

#[test]
fn translated_texture_gives_translation_flow() {
    let a = noise(9, (64, 64), 1, 0.0, 1.0, 2);
    // content moves by +2 px in x
    let b = warp_affine(&a, &AffineMotion::translation(-2.0, 0.0)).unwrap();
    let f = compute_flow(&a, &b).unwrap();
    let mu = median(f.u.data().to_vec());
    let mv = median(f.v.data().to_vec());
    assert!((mu - 2.0).abs() < 0.25 && mv.abs() < 0.25, "median flow ({mu}, {mv})");
}

#[test]
fn color_inputs_are_tracked_in_gray() {
    let a = noise(10, (48, 48), 3, 0.0, 1.0, 2);
    let b = warp_affine(&a, &AffineMotion::translation(0.0, -1.5)).unwrap();
    let f = compute_flow(&a, &b).unwrap();
    assert!((median(f.v.data().to_vec()) - 1.5).abs() < 0.25);
}

#[test]
fn constant_images_are_degenerate() {
    let a = ImageBuffer::filled(20, 20, 1, 0.4);
    let f = compute_flow(&a, &a).unwrap();
    assert!(f.degenerate);
    assert!(f.u.data().iter().all(|&d| d == 0.0));
    assert!(compute_flow(&a, &ImageBuffer::new(20, 21, 1)).is_err());
}

#[test]
fn flow_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flow.bin");
    let a = noise(1, (24, 16), 1, 0.0, 1.0, 1);
    let b = warp_affine(&a, &AffineMotion::translation(1.0, 0.5)).unwrap();
    let f = compute_flow(&a, &b).unwrap();
    f.save(&path).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 8 + 8 * 24 * 16);
    let g = FlowField::load(&path).unwrap();
    assert_eq!(g.width(), 24);
    assert!(f.u.max_abs_diff(&g.u) < 1e-5 && f.v.max_abs_diff(&g.v) < 1e-5);
}

fn affine_flow(w: usize, h: usize, motion: impl Fn(usize, usize) -> AffineMotion) -> FlowField {
    let mut f = FlowField::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let (px, py) = motion(x, y).apply(x as f64, y as f64);
            f.u.set(x, y, 0, px - x as f64);
            f.v.set(x, y, 0, py - y as f64);
        }
    }
    f
}

fn param_error(a: &AffineMotion, b: &AffineMotion) -> f64 {
    a.params().iter().zip(b.params()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

#[test]
fn single_affine_flow_is_a_single_motion() {
    let m = AffineMotion::from_params([1.01, 0.02, -0.015, 0.99, 1.5, -2.0]);
    let flow = affine_flow(48, 40, |_, _| m);
    match ransac_two_affine(&flow, &RansacConfig::default()) {
        Err(Error::SingleMotion { motion, second_fraction }) => {
            assert!(param_error(&motion, &m) < 1e-6);
            assert!(second_fraction < 0.15);
        }
        other => panic!("expected single-motion error, got {other:?}"),
    }
}

#[test]
fn zero_flow_is_identity() {
    let flow = FlowField::zeros(30, 30);
    match ransac_two_affine(&flow, &RansacConfig::default()) {
        Err(Error::SingleMotion { motion, .. }) => assert!(param_error(&motion, &AffineMotion::IDENTITY) < 1e-12),
        other => panic!("expected single-motion error, got {other:?}"),
    }
}

fn two_motion_flow() -> (FlowField, AffineMotion, AffineMotion, usize) {
    let (w, h) = (60, 40);
    let a = AffineMotion::from_params([1.02, -0.01, 0.015, 0.98, 3.0, 1.0]);
    let b = AffineMotion::from_params([0.97, 0.02, -0.02, 1.03, -4.0, 2.5]);
    let split = w * 6 / 10;
    (affine_flow(w, h, |x, _| if x < split { a } else { b }), a, b, split)
}

#[test]
fn two_motion_flow_is_separated() {
    let (flow, a, b, split) = two_motion_flow();
    let fit = ransac_two_affine(&flow, &RansacConfig::default()).unwrap();
    assert!(param_error(&fit.motion_a, &a) < 1e-3);
    assert!(param_error(&fit.motion_b, &b) < 1e-3);
    let correct = fit
        .labels
        .iter()
        .enumerate()
        .filter(|(i, &l)| l == if i % flow.width() < split { MotionLabel::A } else { MotionLabel::B })
        .count();
    assert!(correct as f64 >= 0.99 * fit.labels.len() as f64);
    assert_eq!(fit.labels.len(), flow.width() * flow.height());
}

#[test]
fn ransac_is_deterministic_per_seed() {
    let (mut flow, ..) = two_motion_flow();
    // mild perturbation so that sampling matters
    for (i, u) in flow.u.data_mut().iter_mut().enumerate() {
        *u += 0.3 * ((i * 7919) % 13) as f64 / 13.0;
    }
    let cfg = RansacConfig { seed: 42, ..Default::default() };
    let f1 = ransac_two_affine(&flow, &cfg).unwrap();
    let f2 = ransac_two_affine(&flow, &cfg).unwrap();
    assert_eq!(f1.motion_a, f2.motion_a);
    assert_eq!(f1.motion_b, f2.motion_b);
    assert_eq!(f1.labels, f2.labels);
}

#[test]
fn smaller_region_becomes_foreground() {
    let (flow, a, b, _) = two_motion_flow();
    let fit = ransac_two_affine(&flow, &RansacConfig::default()).unwrap();
    let auto = assign_layers(&fit, ForegroundChoice::Auto);
    assert_eq!(auto.foreground, fit.motion_b);
    assert!(param_error(&auto.background, &a) < 1e-3 && param_error(&auto.foreground, &b) < 1e-3);
    let forced = assign_layers(&fit, ForegroundChoice::A);
    assert_eq!(forced.foreground, fit.motion_a);
    let bg_count = auto.background_mask.data().iter().filter(|&&v| v == 1.0).count();
    assert_eq!(bg_count, fit.count(MotionLabel::A));
}

#[test]
fn init_with_identity_motions_returns_the_frame() {
    let frame = noise(2, (20, 16), 3, 0.1, 0.9, 1);
    let mask = soft_disk(20, 16, 9.0, 8.0, 4.0, 0.0);
    let n = 3;
    let scene = init_scene(
        &vec![frame.clone(); n],
        [vec![AffineMotion::IDENTITY; n + 1], vec![AffineMotion::IDENTITY; n + 1]],
        &vec![mask.clone(); n],
        CaptureTiming::new(0.5, 4, n).unwrap(),
    )
    .unwrap();
    assert!(scene.background.max_abs_diff(&frame) < 1e-12);
    assert!(scene.foreground.max_abs_diff(&frame) < 1e-12);
    assert!(scene.alpha.max_abs_diff(&mask) < 1e-12);
}

#[test]
fn init_aligned_average_matches_direct_resampling() {
    let (w, h) = (24, 20);
    let frames = vec![noise(4, (w, h), 1, 0.0, 1.0, 1), noise(5, (w, h), 1, 0.0, 1.0, 1)];
    let masks = vec![soft_disk(w, h, 10.0, 9.0, 5.0, 0.0), soft_disk(w, h, 12.0, 9.0, 5.0, 0.0)];
    let bg = translations(2, 1, (-1.25, 0.5));
    let fg = translations(2, 1, (2.5, -0.75));
    let timing = CaptureTiming::new(0.6, 3, 2).unwrap();
    let scene = init_scene(&frames, [bg.clone(), fg.clone()], &masks, timing).unwrap();

    let oracle = |imgs: &[ImageBuffer], traj: &[AffineMotion]| {
        ImageBuffer::from_fn(w, h, 1, |x, y, _| {
            let mut acc = 0.0;
            for (i, img) in imgs.iter().enumerate() {
                // mid-exposure pose: opening + duty/2 of the way to the next one
                let s = 0.5 * timing.duty_cycle;
                let tx = traj[i].tx + s * (traj[i + 1].tx - traj[i].tx);
                let ty = traj[i].ty + s * (traj[i + 1].ty - traj[i].ty);
                acc += img.sample_bilinear(x as f64 - tx, y as f64 - ty, 0);
            }
            (acc / imgs.len() as f64).clamp(0.0, 1.0)
        })
    };
    assert!(scene.background.max_abs_diff(&oracle(&frames, &bg)) < 1e-10);
    assert!(scene.foreground.max_abs_diff(&oracle(&frames, &fg)) < 1e-10);
    assert!(scene.alpha.max_abs_diff(&oracle(&masks, &fg)) < 1e-10);
}

#[test]
fn init_rejects_empty_label_regions() {
    let frame = noise(2, (12, 12), 1, 0.1, 0.9, 1);
    let traj = vec![AffineMotion::IDENTITY; 3];
    let timing = CaptureTiming::new(0.5, 2, 2).unwrap();
    for fill in [0.0, 1.0] {
        let masks = vec![ImageBuffer::filled(12, 12, 1, fill); 2];
        let r = init_scene(&[frame.clone(), frame.clone()], [traj.clone(), traj.clone()], &masks, timing);
        assert!(matches!(r, Err(Error::DegenerateMask(_))));
    }
}

#[test]
fn fence_bars_are_the_foreground() {
    let (w, h) = (64, 48);
    let bars = render_mask(&[Shape::Fence { period: 16, bar_width: 5, offset: 3, vertical: true }], w, h);
    let bg = AffineMotion::translation(-2.0, 0.5);
    let fg = AffineMotion::translation(3.0, 0.0);
    let flow = affine_flow(w, h, |x, y| if bars.get(x, y, 0) == 0.0 { fg } else { bg });
    let fit = ransac_two_affine(&flow, &RansacConfig::default()).unwrap();
    let layers = assign_layers(&fit, ForegroundChoice::Auto);
    assert!(param_error(&layers.foreground, &fg) < 1e-6);
    assert!(param_error(&layers.background, &bg) < 1e-6);
    assert!(layers.background_mask.max_abs_diff(&bars) < 1e-12);
}

fn check_initialized_translations(frames: usize, fg_step: (f64, f64), bg_step: (f64, f64), tol: f64) {
    let size = 64;
    let reference = layerblur::init::reference_frame(frames);
    let script = SceneScript {
        width: size,
        height: size,
        channels: 1,
        foreground: LayerSource::Procedural(Texture::Noise { seed: 21, low: 0.0, high: 1.0, smooth: 2 }),
        background: LayerSource::Procedural(Texture::Noise { seed: 22, low: 0.0, high: 1.0, smooth: 2 }),
        mask: MaskSource::Shapes { shapes: vec![Shape::Disk { cx: 31.5, cy: 31.5, radius: 20.0 }] },
        foreground_motion: translations(frames, reference, fg_step),
        background_motion: translations(frames, reference, bg_step),
        duty_cycle: 0.5,
        samples: Some(4),
        noise_sigma: 0.0,
        seed: 0,
    };
    let (blurred, truth) = render_sequence(&script, BlurModelKind::Proposed).unwrap();
    let scene = initialize(&blurred, 0.5, &InitConfig::default()).unwrap();
    // affine fits are only constrained where the layer is visible, so
    // compare displacements there: the disk for the foreground, the corners
    // for the background
    let probes = |layer: Layer| -> Vec<(f64, f64)> {
        match layer {
            Layer::Foreground => vec![(31.5, 31.5), (24.0, 31.5), (39.0, 31.5)],
            Layer::Background => vec![(5.0, 5.0), (58.0, 5.0), (5.0, 58.0), (58.0, 58.0)],
        }
    };
    for layer in Layer::ALL {
        // the reference frame is pinned to the identity
        let r = mid_exposure(&truth.motions[layer.index()], reference, 0.5);
        for i in 0..frames {
            let got = mid_exposure(&scene.motions[layer.index()], i, 0.5);
            let want = mid_exposure(&truth.motions[layer.index()], i, 0.5);
            for (x, y) in probes(layer) {
                let (gx, gy) = got.apply(x, y);
                let (wx, wy) = want.apply(x, y);
                let (ex, ey) = (gx - (wx - r.tx), gy - (wy - r.ty));
                assert!(ex.abs() < tol && ey.abs() < tol, "{layer:?} frame {i} at ({x}, {y}): error ({ex}, {ey})");
            }
        }
    }
    let inside = scene.alpha.get(31, 31, 0);
    let outside = scene.alpha.get(3, 3, 0);
    assert!(inside < 0.5 && outside > 0.5, "mask {inside} / {outside}");
    for img in [&scene.background, &scene.foreground, &scene.alpha] {
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn initialize_recovers_translations_of_a_rendered_sequence() {
    check_initialized_translations(3, (3.0, 0.0), (-2.0, 1.0), 0.5);
}

#[test]
fn initialize_chains_large_displacements() {
    // the outer frames sit 10 to 12 px from the middle one and are reached
    // through two pairwise fits, whose errors add up
    check_initialized_translations(5, (4.0, 3.0), (-3.0, 1.0), 0.75);
}

#[test]
fn init_output_stays_in_unit_range_on_rendered_sequence() {
    let truth = common::textured_scene(&common::SceneParams { size: (24, 24), ..Default::default() });
    let frames = render_all_frames(&truth, BlurModelKind::Proposed).unwrap();
    let masks: Vec<ImageBuffer> = (0..frames.len()).map(|_| truth.alpha.clone()).collect();
    let scene = init_scene(&frames, truth.motions.clone(), &masks, truth.timing).unwrap();
    for img in [&scene.background, &scene.foreground, &scene.alpha] {
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, .. ProptestConfig::default() })]
    #[test]
    fn labels_partition_every_pixel(seed in any::<u64>(), shift in -3.0f64..3.0) {
        let (mut flow, ..) = two_motion_flow();
        for u in flow.u.data_mut() {
            *u += shift * 0.1;
        }
        let cfg = RansacConfig { seed, ..Default::default() };
        if let Ok(fit) = ransac_two_affine(&flow, &cfg) {
            let total = fit.count(MotionLabel::A) + fit.count(MotionLabel::B) + fit.count(MotionLabel::Outlier);
            prop_assert_eq!(total, flow.width() * flow.height());
        }
    }
}


