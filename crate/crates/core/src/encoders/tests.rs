use std::f64::consts::PI;

use proptest::prelude::{prop_assert, proptest, ProptestConfig};
use rand::Rng as _;

use super::*;
use crate::rng;

fn random_image(n: usize, seed: u64) -> Image {
    let mut r = rng::stream(seed, "test");
    Image::new(n, (0..n * n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn op(kind: EncodingKind, n: usize, seed: u64) -> EncodingOperator {
    make_encoding(&EncodingSpec::default_for(kind, n), n, seed).unwrap()
}

#[test]
fn poisson_mask_hits_target_and_keeps_dc() {
    let e = make_encoding(&EncodingSpec::PoissonDisc { fraction: 0.40 }, 32, 7).unwrap();
    let mask = e.mask().unwrap();
    let frac = mask.iter().filter(|&&b| b).count() as f64 / 1024.0;
    assert!((0.39..=0.41).contains(&frac), "fraction {frac}");
    assert!(mask[0]);
    let e16 = op(EncodingKind::PoissonDisc, 16, 3);
    assert!((e16.sampled_fraction() - 0.4).abs() <= 0.01);
}

#[test]
fn poisson_mask_is_reproducible() {
    let a = poisson_disc_mask(16, 0.4, 9).unwrap();
    let b = poisson_disc_mask(16, 0.4, 9).unwrap();
    let c = poisson_disc_mask(16, 0.4, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn poisson_unreachable_fraction_is_an_error() {
    // 16 cells of 1/16 each cannot land within 0.01 of 0.4
    assert!(matches!(poisson_disc_mask(4, 0.4, 1), Err(Error::Construction(_))));
    assert!(matches!(
        make_encoding(&EncodingSpec::PoissonDisc { fraction: 0.0 }, 16, 1),
        Err(Error::Config(_))
    ));
}

#[test]
fn spiral_sample_count() {
    let e = op(EncodingKind::Spiral, 32, 0);
    assert_eq!(e.trajectory().unwrap().len(), 853);
    e.trajectory().unwrap().check_range(32).unwrap();
    let e16 = op(EncodingKind::Spiral, 16, 0);
    assert_eq!(e16.trajectory().unwrap().len(), 213);
}

#[test]
fn misaligned_default_shift() {
    assert_eq!(op(EncodingKind::Misaligned, 128, 0).max_shift(), Some(3));
    assert_eq!(op(EncodingKind::Misaligned, 16, 0).max_shift(), Some(1));
}

#[test]
fn cartesian_constant_image_single_nonzero() {
    let n = 8;
    let e = op(EncodingKind::Cartesian, n, 0);
    let sv = e.encode(&Image::constant(n, 0.5), &Image::zeros(n), None).unwrap();
    assert_eq!(sv.len(), 2 * n * n);
    let nonzero: Vec<usize> = (0..sv.len()).filter(|&i| sv.values[i].abs() > 1e-12).collect();
    assert_eq!(nonzero, vec![0]);
    assert!((sv.values[0] - 0.5 * n as f64).abs() < 1e-12);
}

#[test]
fn layouts_have_expected_lengths() {
    let n = 16;
    let img = random_image(n, 1);
    let zero = Image::zeros(n);
    let p = op(EncodingKind::PoissonDisc, n, 2);
    let pop = p.mask().unwrap().iter().filter(|&&b| b).count();
    assert_eq!(p.encode(&img, &zero, None).unwrap().len(), 2 * pop);
    let r = op(EncodingKind::Radon, n, 0);
    assert_eq!(r.encode(&img, &zero, None).unwrap().len(), 60 * 25);
    assert!(!r.layout().complex);
    let s = op(EncodingKind::Spiral, n, 0);
    assert_eq!(s.encode(&img, &zero, None).unwrap().len(), 2 * 213);
}

#[test]
fn misaligned_requires_rng_and_zero_shift_is_cartesian() {
    let n = 8;
    let img = random_image(n, 2);
    let zero = Image::zeros(n);
    let m = op(EncodingKind::Misaligned, n, 0);
    assert!(matches!(m.encode(&img, &zero, None), Err(Error::Usage(_))));
    let m0 = make_encoding(&EncodingSpec::Misaligned { max_shift: 0 }, n, 0).unwrap();
    let mut r = rng::stream(1, "x");
    let a = m0.encode(&img, &zero, Some(&mut r)).unwrap();
    let b = op(EncodingKind::Cartesian, n, 0).encode(&img, &zero, None).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn misaligned_same_rng_state_reproduces() {
    let n = 16;
    let img = random_image(n, 3);
    let zero = Image::zeros(n);
    let m = op(EncodingKind::Misaligned, n, 0);
    let a = m.encode(&img, &zero, Some(&mut rng::stream(5, "m"))).unwrap();
    let b = m.encode(&img, &zero, Some(&mut rng::stream(5, "m"))).unwrap();
    assert_eq!(a.values, b.values);
    let mut shared = rng::stream(5, "m");
    let c = m.encode(&img, &zero, Some(&mut shared)).unwrap();
    let d = m.encode(&img, &zero, Some(&mut shared)).unwrap();
    assert_eq!(a.values, c.values);
    assert_ne!(c.values, d.values, "fresh shifts per call");
}

#[test]
fn shift_lines_moves_along_readout_with_zero_fill() {
    let n = 4;
    let mut g = ComplexGrid::zeros(n);
    // row 0: centered positions 0..4 hold k = -2, -1, 0, 1 -> dft indices 2, 3, 0, 1
    for (c, v) in [(2, 1.0), (3, 2.0), (0, 3.0), (1, 4.0)] {
        g.re[c] = v;
    }
    let out = shift_lines(&g, &[1, 0, 0, 0]);
    // after shifting right by one sample: centered row becomes [0, 1, 2, 3]
    assert_eq!(&out.re[..4], &[2.0, 3.0, 0.0, 1.0]);
}

#[test]
fn poisson_scatter_then_reencode_is_idempotent() {
    let n = 16;
    let e = op(EncodingKind::PoissonDisc, n, 4);
    let sv = e.encode(&random_image(n, 4), &random_image(n, 5), None).unwrap();
    let grid = e.scatter_to_grid(&sv).unwrap();
    let (re, im) = numerics::idft2(&grid).unwrap();
    let again = e.encode(&re, &im, None).unwrap();
    for (a, b) in sv.values.iter().zip(&again.values) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn serialization_round_trips_byte_exactly() {
    for kind in EncodingKind::ALL {
        let e = op(kind, 16, 11);
        let text = e.to_json();
        let back = EncodingOperator::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text, "{kind}");
        assert_eq!(back.layout(), e.layout());
        assert_eq!(back.mask(), e.mask());
        assert_eq!(back.trajectory(), e.trajectory());
    }
}

#[test]
fn construction_is_reproducible_from_seed() {
    for kind in EncodingKind::ALL {
        assert_eq!(op(kind, 16, 21).to_json(), op(kind, 16, 21).to_json());
    }
}

#[test]
fn rejects_side_mismatch() {
    let e = op(EncodingKind::Cartesian, 8, 0);
    assert!(matches!(e.encode(&Image::zeros(16), &Image::zeros(16), None), Err(Error::Dimension(_))));
}

#[test]
fn phase_map_spans_full_range() {
    for seed in 0..20 {
        let pm = synthesize_phase_map(16, seed);
        let lo = pm.phase.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pm.phase.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo.abs() < 1e-9 && (hi - 2.0 * PI).abs() < 1e-9);
    }
}

#[test]
fn phase_maps_differ_between_seeds() {
    for s in 0..100u64 {
        let a = synthesize_phase_map(16, 2 * s);
        let b = synthesize_phase_map(16, 2 * s + 1);
        let differing = a.phase.iter().zip(&b.phase).filter(|(x, y)| (*x - *y).abs() > 1e-12).count();
        assert!(differing as f64 >= 0.01 * 256.0, "pair {s}");
    }
}

#[test]
fn degenerate_phase_map_is_flat_pi() {
    let pm = phase_map_from_params(16, 0.3, 0.0, 0.0);
    assert!(pm.phase.iter().all(|&p| p == PI));
}

#[test]
fn apply_phase_special_values() {
    let n = 8;
    let img = random_image(n, 7);
    let (re, im) = apply_phase(&img, &PhaseMap { n, phase: vec![0.0; n * n] }).unwrap();
    assert_eq!(re, img);
    assert!(im.pixels().iter().all(|&v| v == 0.0));
    let (re, im) = apply_phase(&img, &PhaseMap { n, phase: vec![PI / 2.0; n * n] }).unwrap();
    for i in 0..n * n {
        assert!(re.pixels()[i].abs() < 1e-12);
        assert!((im.pixels()[i] - img.pixels()[i]).abs() < 1e-12);
    }
    let bad = PhaseMap { n: 4, phase: vec![0.0; 16] };
    assert!(apply_phase(&img, &bad).is_err());
}

#[test]
fn apply_phase_preserves_magnitude() {
    let n = 16;
    let img = random_image(n, 8);
    let pm = synthesize_phase_map(n, 8);
    let (re, im) = apply_phase(&img, &pm).unwrap();
    for i in 0..n * n {
        let mag = re.pixels()[i].hypot(im.pixels()[i]);
        assert!((mag - img.pixels()[i].abs()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn encode_is_linear(seed in 0u64..1000, alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let n = 8;
        let x = random_image(n, seed);
        let z = random_image(n, seed + 1);
        let zero = Image::zeros(n);
        let mix = Image::new(n, x.pixels().iter().zip(z.pixels()).map(|(a, b)| alpha * a + beta * b).collect()).unwrap();
        for kind in EncodingKind::ALL {
            if kind == EncodingKind::PoissonDisc {
                continue; // no 8x8 mask within tolerance
            }
            let e = op(kind, n, 1);
            let enc = |img: &Image| e.encode(img, &zero, Some(&mut rng::stream(seed, "shifts"))).unwrap().values;
            let (ex, ez, em) = (enc(&x), enc(&z), enc(&mix));
            for i in 0..em.len() {
                prop_assert!((em[i] - (alpha * ex[i] + beta * ez[i])).abs() < 1e-10);
            }
        }
        let p = op(EncodingKind::PoissonDisc, 16, 1);
        let (x, z) = (random_image(16, seed), random_image(16, seed + 1));
        let zero = Image::zeros(16);
        let mix = Image::new(16, x.pixels().iter().zip(z.pixels()).map(|(a, b)| alpha * a + beta * b).collect()).unwrap();
        let (ex, ez, em) = (
            p.encode(&x, &zero, None).unwrap().values,
            p.encode(&z, &zero, None).unwrap().values,
            p.encode(&mix, &zero, None).unwrap().values,
        );
        for i in 0..em.len() {
            prop_assert!((em[i] - (alpha * ex[i] + beta * ez[i])).abs() < 1e-10);
        }
    }
}
