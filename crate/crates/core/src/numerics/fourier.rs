use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::{ComplexGrid, Image, KTrajectory};
use crate::error::{Error, Result};

fn fft2_in_place(buf: &mut [Complex64], n: usize, direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft(n, direction);
    fft.process(buf);
    transpose(buf, n);
    fft.process(buf);
    transpose(buf, n);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in r + 1..n {
            buf.swap(r * n + c, c * n + r);
        }
    }
}

/// Unitary 2D DFT: `X[k, l] = (1/n) sum_{u,v} x[u, v] exp(-2 pi i (k u + l v) / n)`.
pub fn dft2(img_re: &Image, img_im: &Image) -> Result<ComplexGrid> {
    let n = img_re.n();
    if img_im.n() != n {
        return Err(Error::dim(format!(
            "real part has side {n}, imaginary part has side {}",
            img_im.n()
        )));
    }
    let mut buf: Vec<Complex64> = img_re
        .pixels()
        .iter()
        .zip(img_im.pixels())
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    fft2_in_place(&mut buf, n, FftDirection::Forward);
    Ok(split(n, &buf))
}

/// Inverse of [`dft2`].
pub fn idft2(grid: &ComplexGrid) -> Result<(Image, Image)> {
    let n = grid.n;
    let mut buf: Vec<Complex64> =
        grid.re.iter().zip(&grid.im).map(|(&re, &im)| Complex64::new(re, im)).collect();
    fft2_in_place(&mut buf, n, FftDirection::Inverse);
    Ok((
        Image::from_raw(n, buf.iter().map(|z| z.re).collect()),
        Image::from_raw(n, buf.iter().map(|z| z.im).collect()),
    ))
}

fn split(n: usize, buf: &[Complex64]) -> ComplexGrid {
    ComplexGrid {
        n,
        re: buf.iter().map(|z| z.re).collect(),
        im: buf.iter().map(|z| z.im).collect(),
    }
}

fn phasors(k: f64, n: usize, sign: f64) -> Vec<Complex64> {
    (0..n)
        .map(|u| Complex64::from_polar(1.0, sign * 2.0 * PI * k * u as f64 / n as f64))
        .collect()
}

/// Exact non-uniform DFT at arbitrary k locations, same scaling as [`dft2`].
pub fn nudft(img_re: &Image, img_im: &Image, traj: &KTrajectory) -> Result<Vec<Complex64>> {
    let n = img_re.n();
    if img_im.n() != n {
        return Err(Error::dim("real and imaginary parts differ in size"));
    }
    traj.check_range(n)?;
    let x: Vec<Complex64> = img_re
        .pixels()
        .iter()
        .zip(img_im.pixels())
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    let scale = 1.0 / n as f64;
    let samples = traj
        .points
        .iter()
        .map(|&(ku, kv)| {
            let eu = phasors(ku, n, -1.0);
            let ev = phasors(kv, n, -1.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for (u, row) in x.chunks_exact(n).enumerate() {
                let inner: Complex64 = row.iter().zip(&ev).map(|(a, b)| a * b).sum();
                acc += eu[u] * inner;
            }
            acc * scale
        })
        .collect();
    Ok(samples)
}

/// Adjoint of [`nudft`] under the standard complex inner product.
pub fn nudft_adjoint(
    samples: &[Complex64],
    traj: &KTrajectory,
    n: usize,
) -> Result<(Image, Image)> {
    if samples.len() != traj.len() {
        return Err(Error::dim(format!(
            "{} samples for {} trajectory points",
            samples.len(),
            traj.len()
        )));
    }
    traj.check_range(n)?;
    let mut x = vec![Complex64::new(0.0, 0.0); n * n];
    for (&s, &(ku, kv)) in samples.iter().zip(&traj.points) {
        let eu = phasors(ku, n, 1.0);
        let ev: Vec<Complex64> = phasors(kv, n, 1.0).into_iter().map(|e| e * s).collect();
        for (u, row) in x.chunks_exact_mut(n).enumerate() {
            for (xv, e) in row.iter_mut().zip(&ev) {
                *xv += eu[u] * e;
            }
        }
    }
    let scale = 1.0 / n as f64;
    Ok((
        Image::from_raw(n, x.iter().map(|z| z.re * scale).collect()),
        Image::from_raw(n, x.iter().map(|z| z.im * scale).collect()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_image(n: usize, seed: u64) -> Image {
        let mut r = rng::stream(seed, "test");
        Image::new(n, (0..n * n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn constant_image_maps_to_dc() {
        let n = 8;
        let c = 0.75;
        let g = dft2(&Image::constant(n, c), &Image::zeros(n)).unwrap();
        for i in 0..n * n {
            let expect = if i == 0 { c * n as f64 } else { 0.0 };
            assert!((g.re[i] - expect).abs() < 1e-12);
            assert!(g.im[i].abs() < 1e-12);
        }
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let n = 8;
        let mut px = vec![0.0; n * n];
        px[0] = 1.0;
        let g = dft2(&Image::new(n, px).unwrap(), &Image::zeros(n)).unwrap();
        for i in 0..n * n {
            assert!((g.re[i] - 1.0 / n as f64).abs() < 1e-12);
            assert!(g.im[i].abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_and_round_trip() {
        let re = random_image(16, 1);
        let im = random_image(16, 2);
        let g = dft2(&re, &im).unwrap();
        let norm_x = (re.norm().powi(2) + im.norm().powi(2)).sqrt();
        assert!((g.norm() - norm_x).abs() < 1e-12);
        let (r2, i2) = idft2(&g).unwrap();
        for (a, b) in r2.pixels().iter().zip(re.pixels()) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in i2.pixels().iter().zip(im.pixels()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn idft_of_zero_and_dc() {
        let n = 8;
        let (r, i) = idft2(&ComplexGrid::zeros(n)).unwrap();
        assert!(r.pixels().iter().chain(i.pixels()).all(|&v| v == 0.0));
        let mut g = ComplexGrid::zeros(n);
        g.re[0] = n as f64;
        let (r, i) = idft2(&g).unwrap();
        assert!(r.pixels().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(i.pixels().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn dft_side_mismatch() {
        assert!(matches!(dft2(&Image::zeros(8), &Image::zeros(4)), Err(Error::Dimension(_))));
    }

    #[test]
    fn nudft_on_grid_matches_dft() {
        let n = 8;
        let re = random_image(n, 3);
        let im = random_image(n, 4);
        let g = dft2(&re, &im).unwrap();
        let s = nudft(&re, &im, &KTrajectory::cartesian(n)).unwrap();
        for (i, z) in s.iter().enumerate() {
            assert!((z.re - g.re[i]).abs() < 1e-10);
            assert!((z.im - g.im[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn nudft_constant_image_off_grid() {
        let n = 8;
        let traj = KTrajectory::new(vec![(0.3, -1.7), (2.25, 3.5), (-4.0, 0.1)]).unwrap();
        let s = nudft(&Image::constant(n, 1.0), &Image::zeros(n), &traj).unwrap();
        for (z, &(ku, kv)) in s.iter().zip(&traj.points) {
            // direct double-loop summation
            let mut acc = Complex64::new(0.0, 0.0);
            for u in 0..n {
                for v in 0..n {
                    let arg = -2.0 * PI * (ku * u as f64 + kv * v as f64) / n as f64;
                    acc += Complex64::new(arg.cos(), arg.sin());
                }
            }
            assert!((z.norm() - acc.norm() / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn nudft_rejects_out_of_range() {
        let n = 8;
        let traj = KTrajectory::new(vec![(4.0, 0.0)]).unwrap();
        assert!(matches!(
            nudft(&Image::zeros(n), &Image::zeros(n), &traj),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn nudft_adjoint_identity_and_special_cases() {
        let n = 8;
        let mut r = rng::stream(11, "test");
        let traj = KTrajectory::new(
            (0..50).map(|_| (r.random_range(-4.0..4.0), r.random_range(-4.0..4.0))).collect(),
        )
        .unwrap();
        let xr = random_image(n, 5);
        let xi = random_image(n, 6);
        let y: Vec<Complex64> =
            (0..50).map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
        let ax = nudft(&xr, &xi, &traj).unwrap();
        let lhs: Complex64 = ax.iter().zip(&y).map(|(a, b)| a * b.conj()).sum();
        let (ar, ai) = nudft_adjoint(&y, &traj, n).unwrap();
        let rhs: Complex64 = (0..n * n)
            .map(|i| {
                Complex64::new(xr.pixels()[i], xi.pixels()[i])
                    * Complex64::new(ar.pixels()[i], ai.pixels()[i]).conj()
            })
            .sum();
        assert!((lhs - rhs).norm() / lhs.norm() < 1e-10);

        let zeros = vec![Complex64::new(0.0, 0.0); 50];
        let (zr, zi) = nudft_adjoint(&zeros, &traj, n).unwrap();
        assert!(zr.pixels().iter().chain(zi.pixels()).all(|&v| v == 0.0));

        let full = KTrajectory::cartesian(n);
        let g = dft2(&xr, &xi).unwrap();
        let samples: Vec<Complex64> = (0..n * n).map(|i| Complex64::new(g.re[i], g.im[i])).collect();
        let (br, bi) = nudft_adjoint(&samples, &full, n).unwrap();
        let (cr, ci) = idft2(&g).unwrap();
        for i in 0..n * n {
            assert!((br.pixels()[i] - cr.pixels()[i]).abs() < 1e-10);
            assert!((bi.pixels()[i] - ci.pixels()[i]).abs() < 1e-10);
        }
        assert!(nudft_adjoint(&zeros[..3], &traj, n).is_err());
    }
}
