use std::collections::BTreeSet;

use rand::Rng as _;

use super::*;
use crate::encoders::{make_encoding, EncodingKind, EncodingSpec};
use crate::pgm::{self, Gray8};
use crate::rng;

fn enc(kind: EncodingKind, n: usize) -> EncodingOperator {
    make_encoding(&EncodingSpec::default_for(kind, n), n, 3).unwrap()
}

#[test]
fn synth_corpus_is_deterministic() {
    let a = synth_corpus(8, 16, 1).unwrap();
    let b = synth_corpus(8, 16, 1).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.images, synth_corpus(8, 16, 2).unwrap().images);
}

#[test]
fn corpus_normalization_contract() {
    for corpus in [synth_corpus(12, 16, 4).unwrap(), noise_corpus(5, 8, 4).unwrap()] {
        let mut global = 0.0f64;
        for img in &corpus.images {
            assert!(img.mean().abs() < 1e-9);
            global = global.max(img.max_abs());
        }
        assert!((global - 1.0).abs() < 1e-12);
    }
}

#[test]
fn synth_images_have_structure() {
    let corpus = synth_corpus(32, 16, 9).unwrap();
    for img in &corpus.images {
        let levels: BTreeSet<u64> = img.pixels().iter().map(|v| (v * 1e6).round() as i64 as u64).collect();
        assert!(levels.len() >= 2);
    }
}

#[test]
fn rot90_augmentation() {
    let corpus = synth_corpus(10, 8, 5).unwrap();
    let aug = augment_rot90(&corpus);
    assert_eq!(aug.len(), 40);
    let one = corpus.truncated(1);
    let four = augment_rot90(&one);
    assert_eq!(four.len(), 4);
    // rotating the 90 degree member three more quarter turns is a -90 degree turn
    let back = rot90(&rot90(&rot90(&four.images[1])));
    assert_eq!(back, one.images[0]);
    assert_eq!(rot90(&four.images[3]), one.images[0]);
}

#[test]
fn symmetric_image_rotates_to_copies() {
    let n = 8;
    let px = (0..n * n)
        .map(|i| {
            let (r, c) = ((i / n) as f64 - 3.5, (i % n) as f64 - 3.5);
            (r * r + c * c).sqrt()
        })
        .collect();
    let img = Image::new(n, px).unwrap();
    let corpus = Corpus { n, images: vec![img.clone()], ids: vec!["x".into()], provenance: "t".into(), normalization_scale: 1.0 };
    let aug = augment_rot90(&corpus);
    assert!(aug.images.iter().all(|i| *i == img));
}

#[test]
fn tile_crop_corners() {
    let img = synth_corpus(1, 8, 6).unwrap().images.remove(0);
    assert_eq!(tile_crop_at(&img, 0, 0), img);
    let n = 8;
    let flipped = tile_crop_at(&img, n, n);
    for r in 0..n {
        for c in 0..n {
            assert_eq!(flipped.get(r, c), img.get(n - 1 - r, n - 1 - c));
        }
    }
}

#[test]
fn tile_crop_values_come_from_input() {
    let img = synth_corpus(1, 8, 7).unwrap().images.remove(0);
    let bits: BTreeSet<u64> = img.pixels().iter().map(|v| v.to_bits()).collect();
    let mut r = rng::stream(1, "crop");
    for _ in 0..20 {
        let out = augment_tile_crop(&img, &mut r);
        assert!(out.pixels().iter().all(|v| bits.contains(&v.to_bits())));
    }
}

fn write_pgm(dir: &Path, name: &str, img: &Gray8) {
    pgm::write(&dir.join(name), img).unwrap();
}

#[test]
fn load_constant_pgm_gives_zero_image() {
    let tmp = tempfile::tempdir().unwrap();
    let n = 8;
    write_pgm(tmp.path(), "a.pgm", &Gray8 { width: 4 * n, height: 4 * n, data: vec![77; 16 * n * n] });
    let corpus = load_corpus(tmp.path(), n).unwrap();
    assert_eq!(corpus.len(), 1);
    assert!(corpus.images[0].pixels().iter().all(|&v| v == 0.0));
}

#[test]
fn load_bright_center_pixel_lands_in_center_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let n = 8;
    let side = 2 * n;
    let mut data = vec![0u8; side * side];
    data[n * side + n] = 255;
    write_pgm(tmp.path(), "b.pgm", &Gray8 { width: side, height: side, data });
    let img = &load_corpus(tmp.path(), n).unwrap().images[0];
    // 2x box filter: source pixel (n, n) falls in output cell (n/2, n/2)
    let argmax = img.pixels().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(argmax, (n / 2) * n + n / 2);
}

#[test]
fn center_square_of_non_square_input() {
    assert_eq!(center_square(40, 64), (0, 12, 40));
    assert_eq!(center_square(65, 33), (16, 0, 33));
}

#[test]
fn box_downsample_preserves_mean() {
    let mut r = rng::stream(2, "box");
    let src: Vec<f64> = (0..33 * 33).map(|_| r.random::<f64>()).collect();
    let out = box_downsample(&src, 33, 8);
    let m_src = src.iter().sum::<f64>() / src.len() as f64;
    let m_out = out.iter().sum::<f64>() / out.len() as f64;
    assert!((m_src - m_out).abs() < 1e-12);
}

#[test]
fn loader_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(matches!(load_corpus(tmp.path(), 8), Err(Error::Ingestion { .. })));
    write_pgm(tmp.path(), "small.pgm", &Gray8 { width: 10, height: 30, data: vec![0; 300] });
    match load_corpus(tmp.path(), 8) {
        Err(Error::Ingestion { path, .. }) => assert!(path.ends_with("small.pgm")),
        other => panic!("expected ingestion error, got {other:?}"),
    }
    std::fs::write(tmp.path().join("small.pgm"), b"garbage").unwrap();
    assert!(matches!(load_corpus(tmp.path(), 8), Err(Error::Ingestion { .. })));
}

#[test]
fn dataset_layouts() {
    let n = 8;
    let corpus = synth_corpus(10, n, 1).unwrap();
    let mut r = rng::stream(0, "ds");
    let ds = build_dataset(&corpus, &enc(EncodingKind::Cartesian, n), TargetMode::Magnitude, None, &mut r).unwrap();
    assert_eq!(ds.len(), 10);
    assert_eq!(ds.d_in(), 2 * n * n);
    let radon = build_dataset(&corpus, &enc(EncodingKind::Radon, n), TargetMode::Magnitude, None, &mut r).unwrap();
    assert_eq!(radon.d_in(), 60 * 15);
}

#[test]
fn dataset_inputs_are_unit_max_abs() {
    let n = 8;
    let corpus = synth_corpus(6, n, 2).unwrap();
    for kind in [EncodingKind::Cartesian, EncodingKind::Spiral, EncodingKind::Radon, EncodingKind::Misaligned] {
        let ds = build_dataset(&corpus, &enc(kind, n), TargetMode::Magnitude, None, &mut rng::stream(1, "d")).unwrap();
        let m = ds.inputs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert_eq!(m, 1.0, "{kind}");
    }
}

#[test]
fn phase_targets_are_pythagorean() {
    let n = 8;
    let corpus = synth_corpus(4, n, 3).unwrap();
    let e = enc(EncodingKind::Cartesian, n);
    let mut r = rng::stream(0, "p");
    let re = build_dataset(&corpus, &e, TargetMode::Real, Some(9), &mut r).unwrap();
    let im = build_dataset(&corpus, &e, TargetMode::Imag, Some(9), &mut r).unwrap();
    let mag = build_dataset(&corpus, &e, TargetMode::Magnitude, Some(9), &mut r).unwrap();
    for i in 0..re.targets.len() {
        let lhs = re.targets[i].powi(2) + im.targets[i].powi(2);
        assert!((lhs - mag.targets[i].powi(2)).abs() < 1e-10);
    }
}

#[test]
fn degenerate_target_modes_rejected() {
    let n = 8;
    let corpus = synth_corpus(2, n, 3).unwrap();
    let mut r = rng::stream(0, "p");
    for mode in [TargetMode::Real, TargetMode::Imag, TargetMode::Phase] {
        assert!(matches!(
            build_dataset(&corpus, &enc(EncodingKind::Cartesian, n), mode, None, &mut r),
            Err(Error::Config(_))
        ));
    }
    assert!(matches!(
        build_dataset(&corpus, &enc(EncodingKind::Radon, n), TargetMode::Real, Some(1), &mut r),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        build_dataset(&corpus, &enc(EncodingKind::Cartesian, 16), TargetMode::Magnitude, None, &mut r),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn dataset_build_is_reproducible_and_round_trips() {
    let n = 8;
    let corpus = synth_corpus(5, n, 4).unwrap();
    let e = enc(EncodingKind::Misaligned, n);
    let a = build_dataset(&corpus, &e, TargetMode::Magnitude, None, &mut rng::stream(2, "d")).unwrap();
    let b = build_dataset(&corpus, &e, TargetMode::Magnitude, None, &mut rng::stream(2, "d")).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    let back = Dataset::from_bytes(&a.to_bytes()).unwrap();
    assert_eq!(back.to_bytes(), a.to_bytes());
    assert_eq!(back.inputs, a.inputs);
}

#[test]
fn corpus_file_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.bin");
    let corpus = synth_corpus(3, 8, 1).unwrap();
    corpus.save(&path).unwrap();
    assert_eq!(Corpus::load(&path).unwrap(), corpus);
}
