mod common;

use funkan::dataset::{Sample, Task};
use funkan::gibbs;
use funkan::hermite::HermiteBasis;
use funkan::metrics::{self, KellnerParams, Overlap};
use funkan::tensor::Tensor;
use funkan::training::{augment, Adam, AugmentConfig, LrSchedule};
use funkan::Image;
use proptest::prelude::*;

fn image(max_side: usize, lo: f64, hi: f64) -> impl Strategy<Value = Image> {
    (2..=max_side, 2..=max_side).prop_flat_map(move |(h, w)| {
        prop::collection::vec(lo..hi, h * w).prop_map(move |d| Image::new(h, w, d).unwrap())
    })
}

fn image_pair(max_side: usize) -> impl Strategy<Value = (Image, Image)> {
    (2..=max_side, 2..=max_side).prop_flat_map(|(h, w)| {
        (
            prop::collection::vec(0.0..1.0f64, h * w),
            prop::collection::vec(0.0..1.0f64, h * w),
        )
            .prop_map(move |(a, b)| (Image::new(h, w, a).unwrap(), Image::new(h, w, b).unwrap()))
    })
}

fn sample_strategy(max_side: usize, square: bool) -> impl Strategy<Value = Sample> {
    (2..=max_side, 2..=max_side).prop_flat_map(move |(h, w)| {
        let w = if square { h } else { w };
        (
            prop::collection::vec(0.0..1.0f64, h * w),
            prop::collection::vec(prop::bool::ANY, h * w),
        )
            .prop_map(move |(x, m)| Sample {
                name: "p".into(),
                input: Image::new(h, w, x).unwrap(),
                target: Image::new(h, w, m.into_iter().map(|b| b as u8 as f64).collect()).unwrap(),
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psnr_is_symmetric_and_non_negative((a, b) in image_pair(12)) {
        let ab = metrics::psnr(&a, &b, 1.0).unwrap();
        let ba = metrics::psnr(&b, &a, 1.0).unwrap();
        prop_assert!(ab == ba || (ab - ba).abs() < 1e-12);
        prop_assert!(ab >= 0.0);
        prop_assert!(metrics::psnr(&a, &a, 1.0).unwrap().is_infinite());
    }

    #[test]
    fn f1_is_a_function_of_iou(
        pred in prop::collection::vec(prop::bool::ANY, 1..200),
        seed in any::<u64>(),
    ) {
        let truth: Vec<bool> = pred.iter().enumerate().map(|(i, &p)| p ^ ((seed >> (i % 64)) & 1 == 1)).collect();
        let o = Overlap::of(&pred, &truth);
        let (iou, f1) = (o.iou(), o.f1());
        prop_assert!((f1 - 2.0 * iou / (1.0 + iou)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&iou) && iou <= f1 + 1e-15);
    }

    #[test]
    fn total_variation_is_homogeneous_and_shift_invariant(img in image(10, -1.0, 1.0), c in -3.0..3.0f64) {
        let tv = metrics::total_variation(&img);
        let scaled = metrics::total_variation(&img.map(|v| c * v));
        prop_assert!((scaled - c.abs() * tv).abs() <= 1e-9 * (1.0 + tv));
        let shifted = metrics::total_variation(&img.map(|v| v + c));
        prop_assert!((shifted - tv).abs() <= 1e-9 * (1.0 + tv));
        prop_assert!(tv >= 0.0);
    }

    #[test]
    fn geometric_transforms_are_involutions(img in image(9, 0.0, 1.0)) {
        prop_assert_eq!(img.flip_horizontal().flip_horizontal(), img.clone());
        prop_assert_eq!(img.flip_vertical().flip_vertical(), img.clone());
        prop_assert_eq!(img.transpose().transpose(), img.clone());
        prop_assert_eq!(img.rot90().rot90().rot90().rot90(), img.clone());
        // rot90 is a transpose followed by a vertical flip
        prop_assert_eq!(img.rot90(), img.transpose().flip_vertical());
    }

    #[test]
    fn segmentation_augmentation_moves_image_and_mask_together(s in sample_strategy(8, true), seed in any::<u64>()) {
        // make the mask a pixelwise function of the image, then check it survives every transform
        let s = Sample { target: s.input.map(|v| (v > 0.5) as u8 as f64), ..s };
        let forced = AugmentConfig { hflip: 1.0, vflip: 1.0, rot90: 1.0, transpose: 1.0, ..AugmentConfig::default() };
        for cfg in [forced, AugmentConfig::default()] {
            let out = augment(&s, Task::Segment, &cfg, &mut common::rng(seed));
            prop_assert_eq!(out.input.dims(), out.target.dims());
            prop_assert_eq!(out.target.clone(), out.input.map(|v| (v > 0.5) as u8 as f64));
            prop_assert!(out.input.data.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn non_square_samples_are_only_flipped(s in sample_strategy(8, false), seed in any::<u64>()) {
        let forced = AugmentConfig { hflip: 0.0, vflip: 0.0, rot90: 1.0, transpose: 1.0, ..AugmentConfig::default() };
        let out = augment(&s, Task::Segment, &forced, &mut common::rng(seed));
        if s.input.height != s.input.width {
            prop_assert_eq!(out, s);
        }
    }

    #[test]
    fn enhancement_augmentation_never_touches_the_target(s in sample_strategy(8, false), seed in any::<u64>()) {
        let out = augment(&s, Task::Enhance, &AugmentConfig::default(), &mut common::rng(seed));
        prop_assert_eq!(&out.target, &s.target);
        prop_assert!(out.input.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn schedule_emits_stages_at_boundaries(
        raw in prop::collection::vec(1e-6..1.0f64, 1..5),
        gaps in prop::collection::vec(1usize..6, 4),
    ) {
        let mut stages = raw.clone();
        stages.sort_by(|a, b| b.partial_cmp(a).unwrap());
        stages.dedup();
        let mut bounds = Vec::new();
        let mut e = 0;
        for g in gaps.iter().take(stages.len() - 1) {
            e += g;
            bounds.push(e);
        }
        let epochs = e + 3;
        let s = LrSchedule::new(&stages, Some(&bounds), epochs).unwrap();
        for epoch in 0..epochs {
            let expected = bounds.iter().filter(|&&b| epoch >= b).count();
            prop_assert_eq!(s.lr(epoch), stages[expected]);
        }
    }

    #[test]
    fn adam_step_decreases_a_quadratic(
        w0 in prop::collection::vec(-5.0..5.0f64, 1..6),
        lr in 1e-5..1e-2f64,
    ) {
        prop_assume!(w0.iter().any(|v| v.abs() > 1e-3));
        let w = Tensor::param(w0.clone(), &[w0.len()]).unwrap();
        let params = vec![("w".to_string(), w.clone())];
        let mut adam = Adam::new(&params);
        let before: f64 = w0.iter().map(|v| v * v).sum();
        w.square().sum().backward().unwrap();
        adam.step(&params, lr).unwrap();
        let after: f64 = w.to_vec().iter().map(|v| v * v).sum();
        prop_assert!(after < before);
    }

    #[test]
    fn kspace_crop_is_linear(a in image(12, -1.0, 1.0), c in -2.0..2.0f64, seed in any::<u64>()) {
        let (h, w) = a.dims();
        let mut r = common::rng(seed);
        let b = Image::from_fn(h, w, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0));
        let (ch, cw) = ((h + 1) / 2, (w + 1) / 2);
        let combo = Image::from_fn(h, w, |i, j| c * a.get(i, j) + b.get(i, j));
        let lhs = gibbs::kspace_crop(&combo, ch, cw).unwrap();
        let ca = gibbs::kspace_crop(&a, ch, cw).unwrap();
        let cb = gibbs::kspace_crop(&b, ch, cw).unwrap();
        for i in 0..lhs.data.len() {
            prop_assert!((lhs.data[i] - (c * ca.data[i] + cb.data[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn kellner_leaves_constants_alone(h in 2usize..20, w in 2usize..20, v in 0.0..1.0f64) {
        let img = Image::filled(h, w, v);
        let out = metrics::kellner_dering(&img, KellnerParams::default()).unwrap();
        prop_assert!(out.data.iter().all(|x| (x - v).abs() <= 1e-6));
    }

    #[test]
    fn tensor_and_scalar_hermite_agree(xs in prop::collection::vec(-6.0..6.0f64, 1..20), k in 0usize..6) {
        let basis = HermiteBasis::new(6).unwrap();
        let t = basis.eval(k, &Tensor::new(xs.clone(), &[xs.len()]).unwrap()).unwrap();
        for (x, v) in xs.iter().zip(t.to_vec()) {
            prop_assert!((basis.eval_scalar(k, *x).unwrap() - v).abs() < 1e-14);
        }
    }
}

#[test]
fn enhancement_noise_has_the_configured_spread() {
    let n = 1000;
    let s = Sample {
        name: "flat".into(),
        input: Image::filled(n, n, 0.5),
        target: Image::filled(n, n, 0.5),
    };
    let out = augment(&s, Task::Enhance, &AugmentConfig::default(), &mut common::rng(3));
    let d: Vec<f64> = out.input.data.iter().map(|v| v - 0.5).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
    assert!((sd - 0.01).abs() <= 0.001, "sigma {sd}");
    assert!(mean.abs() < 1e-4);
}
