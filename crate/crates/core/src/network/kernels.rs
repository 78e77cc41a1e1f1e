//! Dense kernels: a thin safe wrapper over `matrixmultiply` and the
//! im2col/col2im pair used by every same-padded, stride-1 convolution.

/// `c = beta * c + op(a) * op(b)` where `op(a)` is `m x k` and `op(b)` is `k x n`,
/// all row-major. With `ta` set, `a` is stored as `k x m` and read transposed;
/// likewise `tb` for `b` stored as `n x k`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, beta: f64, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too small");
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfold `channels x n x n` into rows `(c, ky, kx)` by columns `pixel`, zero padded by `k / 2`.
pub(crate) fn im2col(input: &[f64], channels: usize, n: usize, k: usize, cols: &mut [f64]) {
    let pad = (k / 2) as isize;
    let p = n * n;
    debug_assert_eq!(cols.len(), channels * k * k * p);
    for c in 0..channels {
        let plane = &input[c * p..(c + 1) * p];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((c * k + ky) * k + kx) * p..][..p];
                let dx = kx as isize - pad;
                for y in 0..n {
                    let sy = y as isize + ky as isize - pad;
                    let dst = &mut row[y * n..(y + 1) * n];
                    if sy < 0 || sy >= n as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * n..(sy as usize + 1) * n];
                    let lo = (-dx).max(0) as usize;
                    let hi = (n as isize - dx).min(n as isize) as usize;
                    dst[..lo].fill(0.0);
                    dst[hi.max(lo)..].fill(0.0);
                    if hi > lo {
                        let s0 = (lo as isize + dx) as usize;
                        dst[lo..hi].copy_from_slice(&src[s0..s0 + (hi - lo)]);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: fold columns back, accumulating into a zeroed `out`.
pub(crate) fn col2im(cols: &[f64], channels: usize, n: usize, k: usize, out: &mut [f64]) {
    let pad = (k / 2) as isize;
    let p = n * n;
    out[..channels * p].fill(0.0);
    for c in 0..channels {
        let plane = &mut out[c * p..(c + 1) * p];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((c * k + ky) * k + kx) * p..][..p];
                let dx = kx as isize - pad;
                for y in 0..n {
                    let sy = y as isize + ky as isize - pad;
                    if sy < 0 || sy >= n as isize {
                        continue;
                    }
                    let lo = (-dx).max(0) as usize;
                    let hi = (n as isize - dx).min(n as isize) as usize;
                    if hi <= lo {
                        continue;
                    }
                    let s0 = (lo as isize + dx) as usize;
                    let dst = &mut plane[sy as usize * n + s0..][..hi - lo];
                    for (d, s) in dst.iter_mut().zip(&row[y * n + lo..y * n + hi]) {
                        *d += s;
                    }
                }
            }
        }
    }
}
