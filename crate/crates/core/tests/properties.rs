use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use phase_speckle::eval::{evaluate, EvalOptions};
use phase_speckle::imgcore::{read_pfm_raw, read_png, write_pfm_raw, write_png};
use phase_speckle::matcher::{embed_phase, match_stereo, MatchParams};
use phase_speckle::pattern::{
    compose_rgb, gen_permutation, gen_speckle_pattern, scramble, wrap_phase, PatternParams, Permutation, PhaseField,
};
use phase_speckle::ppn::{decode, decode_pixel, ChannelOrder};
use phase_speckle::recon::depth;
use phase_speckle::simulator::{perturb, preset_scene_sized, render, PerturbParams, RigSpec, PRESET_NAMES};
use phase_speckle::{DisparityMap, GrayImage, RgbImage, ValidityMask};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn wrapped_diff(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

fn phase_field(w: usize, h: usize, values: &[f64]) -> PhaseField {
    PhaseField::from_fn(w, h, |x, y| values[(y * w + x) % values.len()]).unwrap()
}

fn scramble_plane(plane: &GrayImage, perm: &Permutation) -> Vec<f64> {
    perm.map().iter().map(|&m| plane.data()[m]).collect()
}

fn amplitudes() -> impl Strategy<Value = (f64, f64)> {
    (0.05f64..0.95).prop_flat_map(|a| (Just(a), 0.01f64..=a.min(1.0 - a)))
}

fn small_pattern(seed: u64) -> RgbImage {
    gen_speckle_pattern(&PatternParams {
        lo_width: 48,
        lo_height: 12,
        upsample: 2,
        seed,
        ..PatternParams::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn png_round_trip_is_exact(w in 1usize..12, h in 1usize..12, bytes in prop::collection::vec(any::<u8>(), 432)) {
        let img = RgbImage::from_fn(w, h, |x, y| {
            let i = 3 * (y * w + x);
            std::array::from_fn(|c| f64::from(bytes[i + c]) / 255.0)
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        write_png(&img, &path).unwrap();
        let back = read_png(&path).unwrap();
        prop_assert_eq!(back.to_rgb8(), img.to_rgb8());
        prop_assert_eq!(back, img);
    }

    #[test]
    fn pfm_round_trip_is_bit_identical(w in 1usize..9, h in 1usize..9, bits in prop::collection::vec(any::<u32>(), 64)) {
        let mut data: Vec<f32> = bits[..w * h].iter().map(|&b| f32::from_bits(b)).collect();
        data[0] = f32::NAN;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.pfm");
        write_pfm_raw(&path, w, h, &data).unwrap();
        let (rw, rh, back) = read_pfm_raw(&path).unwrap();
        prop_assert_eq!((rw, rh), (w, h));
        let a: Vec<u32> = data.iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn containers_reject_mismatched_dimensions(w in 1usize..20, h in 1usize..20, extra in 1usize..5) {
        prop_assert!(GrayImage::new(w, h, vec![0.0; w * h + extra]).is_err());
        prop_assert!(DisparityMap::new(w, h, vec![0.0; w * h - 1]).is_err());
        prop_assert!(ValidityMask::new(w, h, vec![true; w * h + extra]).is_err());
        let a = GrayImage::filled(w, h, 0.5).unwrap();
        let b = GrayImage::filled(w + extra, h, 0.5).unwrap();
        prop_assert!(RgbImage::new(a.clone(), a, b).is_err());
    }

    #[test]
    fn scramble_commutes_with_compose(
        w in 1usize..24,
        h in 1usize..24,
        seed in any::<u64>(),
        phases in prop::collection::vec(-PI..PI, 1..64),
        (a, b) in amplitudes(),
    ) {
        let field = phase_field(w, h, &phases);
        let perm = gen_permutation(w * h, seed);
        let lhs = compose_rgb(&scramble(&field, &perm).unwrap(), a, b).unwrap();
        let rhs = compose_rgb(&field, a, b).unwrap();
        prop_assert_eq!(lhs.r().data(), &scramble_plane(rhs.r(), &perm)[..]);
        prop_assert_eq!(lhs.g().data(), &scramble_plane(rhs.g(), &perm)[..]);
        prop_assert_eq!(lhs.b().data(), &scramble_plane(rhs.b(), &perm)[..]);
    }

    #[test]
    fn permutation_is_a_bijection_with_inverse(n in 1usize..2000, seed in any::<u64>()) {
        let perm = gen_permutation(n, seed);
        let mut sorted = perm.map().to_vec();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(&gen_permutation(n, seed), &perm);
        let field = PhaseField::from_fn(n, 1, |x, _| x as f64).unwrap();
        let back = scramble(&scramble(&field, &perm).unwrap(), &perm.inverse()).unwrap();
        prop_assert_eq!(back, field);
    }

    #[test]
    fn pattern_is_a_pure_function_of_its_params(seed in any::<u64>(), period in 3.0f64..20.0, (a, b) in amplitudes()) {
        let params = PatternParams { lo_width: 20, lo_height: 6, upsample: 3, seed, period, a, b };
        let p = gen_speckle_pattern(&params).unwrap();
        prop_assert_eq!(&p, &gen_speckle_pattern(&params).unwrap());
        prop_assert_eq!(p.dims(), (60, 18));
        for y in 0..p.height() {
            for x in 0..p.width() {
                let [r, g, bl] = p.pixel(x, y);
                prop_assert!((r + g + bl - 3.0 * a).abs() < 1e-12);
                prop_assert!([r, g, bl].iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn ppn_matches_closed_form(phi in -PI..PI, (a, b) in amplitudes()) {
        let c = phase_speckle::pattern::channel_values(phi, a, b);
        let (phase, modulation) = decode_pixel(c[0], c[1], c[2]);
        let expected = (3.0 * b * phi.cos()).atan2(-(3f64.sqrt()) * b * phi.sin());
        prop_assert!(wrapped_diff(phase, expected) < 1e-9);
        prop_assert!((modulation - (3.0 * b * phi.cos()).hypot(3f64.sqrt() * b * phi.sin())).abs() < 1e-9);
    }

    #[test]
    fn ppn_invariant_to_channel_uniform_affine(
        rgb in prop::collection::vec(0.0f64..1.0, 3..300),
        alpha in 0.1f64..5.0,
        beta in -1.0f64..1.0,
    ) {
        for p in rgb.chunks_exact(3) {
            let (ph, m) = decode_pixel(p[0], p[1], p[2]);
            if m < 1e-3 {
                continue;
            }
            let (ph2, m2) = decode_pixel(alpha * p[0] + beta, alpha * p[1] + beta, alpha * p[2] + beta);
            prop_assert!(wrapped_diff(ph, ph2) < 1e-6, "{} vs {}", ph, ph2);
            prop_assert!((m2 - alpha * m).abs() < 1e-9 * (1.0 + m2));
        }
    }

    #[test]
    fn ppn_equal_albedo_cancels(phi in -PI..PI, (a, b) in amplitudes(), rho in 0.05f64..1.5) {
        let c = phase_speckle::pattern::channel_values(phi, a, b);
        let (ph, _) = decode_pixel(c[0], c[1], c[2]);
        let (ph2, _) = decode_pixel(rho * c[0], rho * c[1], rho * c[2]);
        prop_assert!(wrapped_diff(ph, ph2) < 1e-12);
    }

    #[test]
    fn ppn_outputs_in_range(r in -2.0f64..2.0, g in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (ph, m) = decode_pixel(r, g, b);
        prop_assert!(ph > -PI && ph <= PI);
        prop_assert!(m >= 0.0);
    }

    #[test]
    fn ppn_is_pixel_local(seed in any::<u64>(), x0 in 0usize..40, y0 in 0usize..10, w in 1usize..40, h in 1usize..10) {
        let img = small_pattern(seed);
        let full = decode(&img, 0.05).unwrap();
        let part = decode(&img.crop(x0, y0, w, h).unwrap(), 0.05).unwrap();
        prop_assert_eq!(part, full.crop(x0, y0, w, h).unwrap());
    }

    #[test]
    fn cyclic_channel_shift_is_a_fringe_shift(phases in prop::collection::vec(-PI..PI, 1..200), (a, b) in amplitudes()) {
        let field = PhaseField::new(phases.len(), 1, phases).unwrap();
        let img = compose_rgb(&field, a, b).unwrap();
        for (order, step) in [(ChannelOrder::Gbr, -TAU / 3.0), (ChannelOrder::Brg, TAU / 3.0)] {
            let shifted = decode(&order.apply(&img), 0.0).unwrap();
            let moved = PhaseField::from_fn(field.width(), 1, |x, _| wrap_phase(field.get(x, 0) + step)).unwrap();
            let expected = decode(&compose_rgb(&moved, a, b).unwrap(), 0.0).unwrap();
            for x in 0..field.width() {
                prop_assert!(wrapped_diff(shifted.phase.get(x, 0), expected.phase.get(x, 0)) < 1e-9);
            }
        }
    }

    #[test]
    fn depth_strictly_decreasing(f in 1.0f64..5000.0, b in 1.0f64..500.0, d in 0.01f64..500.0, step in 1e-3f64..50.0) {
        prop_assert!(depth(f, b, d) > depth(f, b, d + step));
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn eval_invariant_under_pixel_permutation(
        pairs in prop::collection::vec((0.0f32..64.0, 0.0f32..64.0, any::<bool>()), 1..200),
        seed in any::<u64>(),
    ) {
        let n = pairs.len();
        let pred: Vec<f32> = pairs.iter().map(|p| if p.2 { p.0 } else { f32::NAN }).collect();
        let gt: Vec<f32> = pairs.iter().map(|p| p.1).collect();
        let perm = gen_permutation(n, seed);
        let pp: Vec<f32> = perm.map().iter().map(|&i| pred[i]).collect();
        let gp: Vec<f32> = perm.map().iter().map(|&i| gt[i]).collect();
        for penalize_missing in [false, true] {
            let opts = EvalOptions { threshold: 3.0, penalize_missing };
            let a = evaluate(&DisparityMap::new(n, 1, pred.clone()).unwrap(), &DisparityMap::new(n, 1, gt.clone()).unwrap(), None, opts);
            let b = evaluate(&DisparityMap::new(n, 1, pp.clone()).unwrap(), &DisparityMap::new(n, 1, gp.clone()).unwrap(), None, opts);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert!((a.summary.epe - b.summary.epe).abs() <= 1e-9 * (1.0 + a.summary.epe));
                    prop_assert_eq!(a.summary.d1, b.summary.d1);
                    prop_assert_eq!(a.summary.n_evaluated, b.summary.n_evaluated);
                    prop_assert_eq!(a.summary.n_missing, b.summary.n_missing);
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "permutation changed evaluability"),
            }
        }
    }

    #[test]
    fn eval_scale_covariant(
        pairs in prop::collection::vec((0.0f32..64.0, 0.0f32..64.0), 1..200),
        k in -2i32..4,
        t in 0.5f64..8.0,
    ) {
        let s = 2f32.powi(k);
        let n = pairs.len();
        let map = |f: &dyn Fn(&(f32, f32)) -> f32| DisparityMap::new(n, 1, pairs.iter().map(f).collect()).unwrap();
        let opts = |threshold| EvalOptions { threshold, penalize_missing: true };
        let a = evaluate(&map(&|p| p.0), &map(&|p| p.1), None, opts(t)).unwrap().summary;
        let b = evaluate(&map(&|p| p.0 * s), &map(&|p| p.1 * s), None, opts(t * f64::from(s))).unwrap().summary;
        prop_assert!((b.epe - f64::from(s) * a.epe).abs() <= 1e-9 * (1.0 + b.epe));
        prop_assert_eq!(a.d1, b.d1);
    }

    #[test]
    fn d1_monotone_in_threshold(
        pairs in prop::collection::vec((0.0f32..64.0, 0.0f32..64.0), 1..200),
        t1 in 0.1f64..10.0,
        dt in 0.0f64..10.0,
    ) {
        let n = pairs.len();
        let pred = DisparityMap::new(n, 1, pairs.iter().map(|p| p.0).collect()).unwrap();
        let gt = DisparityMap::new(n, 1, pairs.iter().map(|p| p.1).collect()).unwrap();
        let d1 = |threshold| evaluate(&pred, &gt, None, EvalOptions { threshold, penalize_missing: false }).unwrap().summary.d1;
        prop_assert!(d1(t1) >= d1(t1 + dt));
    }
}

proptest! {
    #![proptest_config(config(6))]

    #[test]
    fn simulator_proj_coord_follows_disparity(preset in 0usize..5, seed in any::<u64>()) {
        let rig = RigSpec { width: 320, height: 240, ..RigSpec::default() };
        let mut scene = preset_scene_sized(PRESET_NAMES[preset], 320, 240).unwrap();
        scene.seed = seed;
        scene.noise_sigma = 0.01;
        let pattern = gen_speckle_pattern(&PatternParams { seed, ..PatternParams::default() }).unwrap();
        let out = render(&scene, &rig, &pattern).unwrap();
        let kappa = rig.kappa();
        for y in 0..rig.height {
            for x in 0..rig.width {
                let d = f64::from(out.gt_disparity.get(x, y));
                prop_assert!(d.is_finite());
                let expected = x as f64 - kappa * d;
                prop_assert!((out.proj_coord.get(x, y) - expected).abs() < 1e-4);
            }
        }
        prop_assert_eq!(&out, &render(&scene, &rig, &pattern).unwrap());
    }

    #[test]
    fn phase_matching_invariant_to_channel_uniform_affine(seed in any::<u64>(), alpha in 0.3f64..3.0, beta in -0.2f64..0.2) {
        let rig = RigSpec { width: 192, height: 48, ..RigSpec::default() };
        let scene = preset_scene_sized("boxes", 192, 48).unwrap();
        let pattern = gen_speckle_pattern(&PatternParams { seed, ..PatternParams::default() }).unwrap();
        let out = render(&scene, &rig, &pattern).unwrap();
        let params = MatchParams { d_max: 48, ..MatchParams::default() };
        // Modulation scales with the gain, so the threshold scales with it.
        let run = |l: &RgbImage, r: &RgbImage, threshold: f64| {
            let f = |img: &RgbImage| embed_phase(&decode(img, threshold).unwrap());
            match_stereo(&f(l), &f(r), &params).unwrap()
        };
        let base = run(&out.left, &out.right, 0.05);

        let exact = PerturbParams { gains: [2.0; 3], ..PerturbParams::default() };
        let scaled = run(&perturb(&out.left, &exact).unwrap(), &perturb(&out.right, &exact).unwrap(), 0.1);
        let bits = |m: &DisparityMap| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&scaled), bits(&base));

        let general = PerturbParams { gains: [alpha; 3], offsets: [beta; 3], ..PerturbParams::default() };
        let moved = run(&perturb(&out.left, &general).unwrap(), &perturb(&out.right, &general).unwrap(), 0.05 * alpha);
        let mut changed = 0;
        for (a, b) in base.data().iter().zip(moved.data()) {
            if a.is_nan() != b.is_nan() || (!a.is_nan() && (a - b).abs() > 1e-4) {
                changed += 1;
            }
        }
        prop_assert!(changed * 1000 <= base.data().len(), "{} pixels changed", changed);
    }

    #[test]
    fn matcher_equivariant_under_horizontal_crop(seed in any::<u64>(), x0 in 0usize..64, w in 120usize..160) {
        let rig = RigSpec { width: 256, height: 32, ..RigSpec::default() };
        let scene = preset_scene_sized("steps", 256, 32).unwrap();
        let pattern = gen_speckle_pattern(&PatternParams { seed, ..PatternParams::default() }).unwrap();
        let out = render(&scene, &rig, &pattern).unwrap();
        let params = MatchParams { d_max: 24, window: 2, ..MatchParams::default() };
        let left = embed_phase(&decode(&out.left, 0.05).unwrap());
        let right = embed_phase(&decode(&out.right, 0.05).unwrap());
        let full = match_stereo(&left, &right, &params).unwrap();
        let part = match_stereo(&left.crop(x0, 0, w, 32).unwrap(), &right.crop(x0, 0, w, 32).unwrap(), &params).unwrap();
        let margin = params.d_max + params.window + 1;
        for y in 0..32 {
            for x in margin..w - margin {
                let (a, b) = (part.get(x, y), full.get(x0 + x, y));
                prop_assert!(a.to_bits() == b.to_bits(), "({}, {}): {} vs {}", x, y, a, b);
            }
        }
    }
}

#[test]
fn channel_swap_keeps_phase_injective() {
    let n = 4096;
    let phis: Vec<f64> = (0..n).map(|i| -PI + TAU * (i as f64 + 0.5) / n as f64).collect();
    let img = compose_rgb(&PhaseField::new(n, 1, phis.clone()).unwrap(), 0.5, 0.45).unwrap();
    for order in [ChannelOrder::Rbg, ChannelOrder::Grb, ChannelOrder::Bgr] {
        let out = decode(&order.apply(&img), 0.0).unwrap();
        let mut decoded = out.phase.data().to_vec();
        decoded.sort_by(f64::total_cmp);
        let min_gap = decoded.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        assert!(min_gap > 0.5 * TAU / n as f64, "{order:?}: gap {min_gap}");
    }
}

#[test]
fn crosstalk_phase_deviation_bounded() {
    let n = 4096;
    let phis: Vec<f64> = (0..n).map(|i| -PI + TAU * i as f64 / n as f64).collect();
    let img = compose_rgb(&PhaseField::new(n, 1, phis).unwrap(), 0.5, 0.45).unwrap();
    let mixed = perturb(
        &img,
        &PerturbParams {
            crosstalk: [[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]],
            ..PerturbParams::default()
        },
    )
    .unwrap();
    let a = decode(&img, 0.0).unwrap();
    let b = decode(&mixed, 0.0).unwrap();
    let worst = (0..n)
        .map(|x| wrapped_diff(a.phase.get(x, 0), b.phase.get(x, 0)))
        .fold(0.0, f64::max);
    assert!(worst <= 0.2, "max deviation {worst}");
}

#[test]
fn permutation_fixed_points_near_one_per_shuffle() {
    let n = 10_000;
    let total: usize = (0..100u64)
        .map(|seed| {
            gen_permutation(n, seed)
                .map()
                .iter()
                .enumerate()
                .filter(|(i, m)| i == *m)
                .count()
        })
        .sum();
    let rate = total as f64 / (100.0 * n as f64);
    let expected = 1.0 / n as f64;
    assert!(
        rate >= expected / 5.0 && rate <= expected * 5.0,
        "fixed-point rate {rate}"
    );
}

#[test]
fn pattern_value_histogram_survives_scramble() {
    let params = PatternParams::default();
    let base = phase_speckle::pattern::gen_base_phase(params.lo_width, params.lo_height, params.period).unwrap();
    let scrambled = scramble(&base, &gen_permutation(base.len(), 7)).unwrap();
    let sorted = |f: &PhaseField| {
        let mut v = f.data().to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    assert_eq!(sorted(&base), sorted(&scrambled));
}

fn differing_fraction(params: &PatternParams, seed_a: u64, seed_b: u64) -> f64 {
    let a = gen_speckle_pattern(&PatternParams {
        seed: seed_a,
        ..params.clone()
    })
    .unwrap();
    let b = gen_speckle_pattern(&PatternParams {
        seed: seed_b,
        ..params.clone()
    })
    .unwrap();
    let (w, h) = a.dims();
    let differ = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| a.pixel(x, y) != b.pixel(x, y))
        .count();
    differ as f64 / (w * h) as f64
}

#[test]
fn distinct_seeds_decorrelate_the_pattern() {
    // An integer period T leaves only T distinct phases, so two seeds agree
    // on about 1/T of the cells; a non-integer period makes every column distinct.
    let integer = differing_fraction(&PatternParams::default(), 1, 2);
    assert!((integer - 7.0 / 8.0).abs() < 0.01, "T=8: {integer}");
    let fractional = PatternParams {
        period: 8.37,
        ..PatternParams::default()
    };
    let f = differing_fraction(&fractional, 1, 2);
    assert!(f >= 0.99, "T=8.37: {f}");
}
