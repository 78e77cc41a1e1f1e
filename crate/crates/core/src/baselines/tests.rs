use rand::Rng as _;

use super::*;
use crate::encoders::{make_encoding, EncodingSpec};
use crate::numerics::{dft2, KTrajectory};
use crate::rng;

fn op(kind: EncodingKind, n: usize) -> EncodingOperator {
    make_encoding(&EncodingSpec::default_for(kind, n), n, 7).unwrap()
}

fn random_image(n: usize, seed: u64) -> Image {
    let mut r = rng::stream(seed, "img");
    Image::new(n, (0..n * n).map(|_| r.random_range(0.0..1.0)).collect()).unwrap()
}

fn rmse(a: &Image, b: &Image) -> f64 {
    let s: f64 = a.pixels().iter().zip(b.pixels()).map(|(x, y)| (x - y).powi(2)).sum();
    (s / a.pixels().len() as f64).sqrt()
}

#[test]
fn ifft_inverts_cartesian_encoding() {
    let x = random_image(16, 1);
    let sv = op(EncodingKind::Cartesian, 16).encode(&x, &Image::zeros(16), None).unwrap();
    let y = ifft_recon(&sv).unwrap();
    assert!(rmse(&x, &y) < 1e-10);
    let zero = SensorVec::new(vec![0.0; sv.len()], sv.layout.clone()).unwrap();
    assert!(ifft_recon(&zero).unwrap().pixels().iter().all(|&v| v == 0.0));
    let radon = op(EncodingKind::Radon, 8).encode(&random_image(8, 2), &Image::zeros(8), None).unwrap();
    assert!(matches!(ifft_recon(&radon), Err(Error::Usage(_))));
}

#[test]
fn misalignment_hurts_the_inverse_dft() {
    let x = random_image(32, 3);
    let z = Image::zeros(32);
    let clean = ifft_recon(&op(EncodingKind::Cartesian, 32).encode(&x, &z, None).unwrap()).unwrap();
    let mis = op(EncodingKind::Misaligned, 32);
    let sv = mis.encode(&x, &z, Some(&mut rng::stream(4, "shift"))).unwrap();
    assert!(rmse(&ifft_recon(&sv).unwrap(), &x) > rmse(&clean, &x));
}

#[test]
fn zero_fill_cases() {
    let n = 16;
    let x = random_image(n, 5);
    let z = Image::zeros(n);
    let full = make_encoding(&EncodingSpec::PoissonDisc { fraction: 1.0 }, n, 1).unwrap();
    let a = zero_fill_recon(&full.encode(&x, &z, None).unwrap(), &full).unwrap();
    let b = ifft_recon(&op(EncodingKind::Cartesian, n).encode(&x, &z, None).unwrap()).unwrap();
    assert!(rmse(&a, &b) < 1e-12);

    let pd = op(EncodingKind::PoissonDisc, n);
    let c = Image::constant(n, 0.37);
    let rec = zero_fill_recon(&pd.encode(&c, &z, None).unwrap(), &pd).unwrap();
    assert!((rec.mean() - 0.37).abs() < 1e-10);
    let sv = pd.encode(&z, &z, None).unwrap();
    assert!(zero_fill_recon(&sv, &pd).unwrap().pixels().iter().all(|&v| v == 0.0));
    let other = op(EncodingKind::PoissonDisc, 8);
    assert!(zero_fill_recon(&sv, &other).is_err());
}

#[test]
fn gridding_cases() {
    let n = 16;
    let x = random_image(n, 6);
    let z = Image::zeros(n);
    let traj = KTrajectory::cartesian(n);
    let g = dft2(&x, &z).unwrap();
    let samples: Vec<Complex64> = (0..n * n).map(|i| Complex64::new(g.re[i], g.im[i])).collect();
    let a = gridding_recon(&samples, &traj, n).unwrap();
    let b = ifft_recon(&op(EncodingKind::Cartesian, n).encode(&x, &z, None).unwrap()).unwrap();
    assert!(rmse(&a, &b) < 1e-10);
    let zeros = vec![Complex64::new(0.0, 0.0); traj.len()];
    assert!(gridding_recon(&zeros, &traj, n).unwrap().pixels().iter().all(|&v| v == 0.0));
    assert!(matches!(gridding_recon(&zeros[1..], &traj, n), Err(Error::Dimension(_))));
}

#[test]
fn gridding_of_a_spiral_disc_correlates_with_truth() {
    let n = 32;
    let c = (n as f64 - 1.0) / 2.0;
    let disc: Vec<f64> = (0..n * n)
        .map(|i| {
            let (r, q) = ((i / n) as f64 - c, (i % n) as f64 - c);
            if r.hypot(q) < 8.0 { 1.0 } else { 0.0 }
        })
        .collect();
    let x = Image::new(n, disc).unwrap();
    let sp = op(EncodingKind::Spiral, n);
    let rec = reconstruct(Method::Gridding, &sp.encode(&x, &Image::zeros(n), None).unwrap(), &sp, 0).unwrap();
    let (mx, my) = (x.mean(), rec.image.mean());
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.pixels().iter().zip(rec.image.pixels()) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    let ncc = sxy / (sxx * syy).sqrt();
    assert!(ncc > 0.7, "{ncc}");
}

#[test]
fn kaczmarz_distance_to_solution_never_grows() {
    let n = 8;
    let geom = RadonGeometry::new(n, 60, crate::numerics::radon::default_rays(n)).unwrap();
    let truth = random_image(n, 8);
    let b = geom.forward(&truth).unwrap();
    let mut x = vec![0.0; n * n];
    let mut dist = vec![truth.norm()];
    let hist = kaczmarz(&geom, &b.values, &mut x, 10, 1.0, |x| {
        dist.push(x.iter().zip(truth.pixels()).map(|(a, t)| (a - t).powi(2)).sum::<f64>().sqrt());
    })
    .unwrap();
    assert_eq!(hist.len(), 10);
    assert!(dist.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{dist:?}");
    let art = kaczmarz_art(&b, &geom, 10, 1.0).unwrap();
    assert_eq!(art.residual_history, hist);
    assert_eq!(art.iterations, 10);
    let wrong = Sinogram::new(60, geom.n_rays() + 2, vec![0.0; 60 * (geom.n_rays() + 2)]).unwrap();
    assert!(matches!(kaczmarz_art(&wrong, &geom, 1, 1.0), Err(Error::Dimension(_))));
}

#[test]
fn kaczmarz_fixed_point_and_orthogonal_rows() {
    let a = DenseRows::new(vec![vec![1.0, 2.0, 0.0], vec![0.0, 1.0, -1.0], vec![0.0, 0.0, 0.0]]).unwrap();
    let x0 = [0.5, -0.25, 2.0];
    let b = [x0[0] + 2.0 * x0[1], x0[1] - x0[2], 0.0];
    let mut x = x0;
    kaczmarz(&a, &b, &mut x, 5, 1.0, |_| {}).unwrap();
    assert_eq!(x, x0);

    let q = DenseRows::new(vec![vec![3.0, 0.0, 0.0], vec![0.0, 1.0, 1.0], vec![0.0, 2.0, -2.0]]).unwrap();
    let want = [1.0, -2.0, 0.5];
    let b = [3.0, -1.5, -5.0];
    let mut x = [0.0; 3];
    let hist = kaczmarz(&q, &b, &mut x, 1, 1.0, |_| {}).unwrap();
    for (a, w) in x.iter().zip(want) {
        assert!((a - w).abs() < 1e-9);
    }
    assert!(hist[0] < 1e-9);
    assert!(kaczmarz(&q, &b, &mut x, 0, 1.0, |_| {}).is_err());
}

#[test]
fn dispatch_and_image_output() {
    let n = 8;
    let radon = op(EncodingKind::Radon, n);
    let sv = radon.encode(&random_image(n, 9), &Image::zeros(n), None).unwrap();
    let res = reconstruct(Method::Art, &sv, &radon, 10).unwrap();
    assert_eq!(res.residual_history.len(), 10);
    assert!(matches!(reconstruct(Method::Ifft, &sv, &radon, 10), Err(Error::Usage(_))));
    assert!("nope".parse::<Method>().is_err());
    assert_eq!(Method::baseline_for(EncodingKind::Spiral), Method::Gridding);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.art.pgm");
    write_image(&res.image, &path).unwrap();
    let pgm = crate::pgm::read(&path).unwrap();
    assert_eq!((pgm.width, pgm.height), (n, n));
    let raw = std::fs::read(dir.path().join("x.art.pgm.f64")).unwrap();
    let back: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    assert_eq!(back, res.image.pixels());
}
