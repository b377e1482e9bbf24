//! Small matrix kernels behind the convolution and dense layers.
//!
//! All products accumulate into the output, every inner loop runs over a
//! contiguous slice, and the fused multiply-add keeps the autovectorizer on
//! the FMA units.

use super::real::Real;

/// `c (m×n) += a (m×k) · b (k×n)`
pub(crate) fn mm_acc<R: Real>(a: &[R], b: &[R], c: &mut [R], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == R::zero() {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv = a_ip.mul_add(bv, *cv);
            }
        }
    }
}

/// Dot product of two contiguous slices with eight independent accumulators,
/// so the lanes map onto SIMD registers.
#[inline]
fn fast_dot<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    const LANES: usize = 8;
    let mut acc = [R::zero(); LANES];
    let chunks = a.len() / LANES;
    for c in 0..chunks {
        let base = c * LANES;
        for l in 0..LANES {
            acc[l] = a[base + l].mul_add(b[base + l], acc[l]);
        }
    }
    let mut tail = R::zero();
    for i in chunks * LANES..a.len() {
        tail = a[i].mul_add(b[i], tail);
    }
    acc.iter().fold(tail, |s, &v| s + v)
}

/// `c (m×k) += a (m×n) · bᵀ (n×k from b: k×n)`, as row dots.
pub(crate) fn mm_abt_acc<R: Real>(a: &[R], b: &[R], c: &mut [R], m: usize, n: usize, k: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * k);
    if n == 1 {
        // Rank-1 outer product: both operands are contiguous vectors.
        for i in 0..m {
            let a_i = a[i];
            if a_i == R::zero() {
                continue;
            }
            let c_row = &mut c[i * k..(i + 1) * k];
            for (cv, &bv) in c_row.iter_mut().zip(b) {
                *cv = a_i.mul_add(bv, *cv);
            }
        }
        return;
    }
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        let c_row = &mut c[i * k..(i + 1) * k];
        for p in 0..k {
            let b_row = &b[p * n..(p + 1) * n];
            c_row[p] += fast_dot(a_row, b_row);
        }
    }
}

/// `c (k×n) += aᵀ (k×m from a: m×k) · b (m×n)`
pub(crate) fn mm_atb_acc<R: Real>(a: &[R], b: &[R], c: &mut [R], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    for i in 0..m {
        let b_row = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == R::zero() {
                continue;
            }
            let c_row = &mut c[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv = a_ip.mul_add(bv, *cv);
            }
        }
    }
}

/// Valid output range `[lo, hi)` such that `o·stride + offset ∈ [0, limit)`.
#[inline]
fn valid_range(offset: isize, stride: usize, limit: usize, count: usize) -> (usize, usize) {
    let s = stride as isize;
    let lo = if offset >= 0 {
        0
    } else {
        ((-offset) + s - 1) / s
    };
    let hi = if limit as isize > offset {
        ((limit as isize - offset) + s - 1) / s
    } else {
        0
    };
    ((lo as usize).min(count), (hi as usize).min(count).max(lo as usize).min(count))
}

/// Unfold `(channels, h, w)` into the column matrix `(channels·kh·kw, oh·ow)`
/// with zero padding.
#[allow(clippy::too_many_arguments)]
pub(crate) fn im2col<R: Real>(
    x: &[R],
    channels: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    cols: &mut [R],
) {
    debug_assert_eq!(x.len(), channels * h * w);
    debug_assert_eq!(cols.len(), channels * kh * kw * oh * ow);
    cols.fill(R::zero());
    for c in 0..channels {
        let x_ch = &x[c * h * w..(c + 1) * h * w];
        for i in 0..kh {
            for j in 0..kw {
                let row = ((c * kh + i) * kw + j) * oh * ow;
                let y_off = i as isize - pad as isize;
                let x_off = j as isize - pad as isize;
                let (oy_lo, oy_hi) = valid_range(y_off, stride, h, oh);
                let (ox_lo, ox_hi) = valid_range(x_off, stride, w, ow);
                for oy in oy_lo..oy_hi {
                    let iy = (oy * stride) as isize + y_off;
                    let x_row = &x_ch[iy as usize * w..(iy as usize + 1) * w];
                    let out_row = &mut cols[row + oy * ow..row + (oy + 1) * ow];
                    let mut ix = (ox_lo * stride) as isize + x_off;
                    for slot in out_row[ox_lo..ox_hi].iter_mut() {
                        *slot = x_row[ix as usize];
                        ix += stride as isize;
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back into `(channels, h, w)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn col2im_acc<R: Real>(
    cols: &[R],
    channels: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    x: &mut [R],
) {
    debug_assert_eq!(x.len(), channels * h * w);
    debug_assert_eq!(cols.len(), channels * kh * kw * oh * ow);
    for c in 0..channels {
        let x_ch = &mut x[c * h * w..(c + 1) * h * w];
        for i in 0..kh {
            for j in 0..kw {
                let row = ((c * kh + i) * kw + j) * oh * ow;
                let y_off = i as isize - pad as isize;
                let x_off = j as isize - pad as isize;
                let (oy_lo, oy_hi) = valid_range(y_off, stride, h, oh);
                let (ox_lo, ox_hi) = valid_range(x_off, stride, w, ow);
                for oy in oy_lo..oy_hi {
                    let iy = (oy * stride) as isize + y_off;
                    let x_row = &mut x_ch[iy as usize * w..(iy as usize + 1) * w];
                    let in_row = &cols[row + oy * ow..row + (oy + 1) * ow];
                    let mut ix = (ox_lo * stride) as isize + x_off;
                    for &v in in_row[ox_lo..ox_hi].iter() {
                        x_row[ix as usize] += v;
                        ix += stride as isize;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mm_small_known_product() {
        // [1 2; 3 4] · [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        mm_acc(&a, &b, &mut c, 2, 2, 2);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transposed_variants_agree_with_explicit_transpose() {
        let m = 3;
        let k = 4;
        let n = 5;
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64) * 0.3 - 1.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64) * 0.17 + 0.2).collect();

        // aᵀ explicitly.
        let mut at = vec![0.0; k * m];
        for i in 0..m {
            for p in 0..k {
                at[p * m + i] = a[i * k + p];
            }
        }
        let mut c1 = vec![0.0; k * n];
        let d: Vec<f64> = (0..m * n).map(|i| (i as f64) * 0.05 - 0.4).collect();
        mm_atb_acc(&a, &d, &mut c1, m, k, n);
        let mut c2 = vec![0.0; k * n];
        mm_acc(&at, &d, &mut c2, k, m, n);
        for (x, y) in c1.iter().zip(&c2) {
            assert!((x - y).abs() < 1e-12);
        }

        // a·bᵀ via explicit transpose of b.
        let mut bt = vec![0.0; n * k];
        for p in 0..k {
            for j in 0..n {
                bt[j * k + p] = b[p * n + j];
            }
        }
        let e: Vec<f64> = (0..m * n).map(|i| (i as f64) * 0.09 + 0.01).collect();
        let mut c3 = vec![0.0; m * k];
        mm_abt_acc(&e, &b, &mut c3, m, n, k);
        let mut c4 = vec![0.0; m * k];
        mm_acc(&e, &bt, &mut c4, m, n, k);
        for (x, y) in c3.iter().zip(&c4) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    /// Reference im2col with a branch per element.
    #[allow(clippy::too_many_arguments)]
    fn im2col_naive(
        x: &[f64],
        channels: usize,
        h: usize,
        w: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        pad: usize,
        oh: usize,
        ow: usize,
        cols: &mut [f64],
    ) {
        cols.fill(0.0);
        for c in 0..channels {
            for i in 0..kh {
                for j in 0..kw {
                    let row = ((c * kh + i) * kw + j) * oh * ow;
                    for oy in 0..oh {
                        let iy = (oy * stride + i) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for ox in 0..ow {
                            let ix = (ox * stride + j) as isize - pad as isize;
                            if ix >= 0 && ix < w as isize {
                                cols[row + oy * ow + ox] =
                                    x[(c * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn im2col_matches_naive_reference() {
        for &(c, h, w, kh, kw, s, p) in &[
            (1usize, 6usize, 6usize, 3usize, 3usize, 1usize, 1usize),
            (2, 5, 7, 3, 3, 2, 1),
            (3, 8, 4, 2, 2, 2, 0),
            (1, 4, 4, 3, 3, 1, 2),
        ] {
            let oh = (h + 2 * p - kh) / s + 1;
            let ow = (w + 2 * p - kw) / s + 1;
            let x: Vec<f64> = (0..c * h * w).map(|i| ((i * 31 % 101) as f64) / 17.0).collect();
            let mut fast = vec![0.0; c * kh * kw * oh * ow];
            let mut slow = vec![0.0; c * kh * kw * oh * ow];
            im2col(&x, c, h, w, kh, kw, s, p, oh, ow, &mut fast);
            im2col_naive(&x, c, h, w, kh, kw, s, p, oh, ow, &mut slow);
            assert_eq!(fast, slow, "case ({c},{h},{w},{kh},{kw},{s},{p})");
        }
    }

    #[test]
    fn im2col_col2im_are_adjoint() {
        // <im2col(x), y> == <x, col2im(y)> for random x, y.
        let (c, h, w, kh, kw, s, p) = (2usize, 5usize, 6usize, 3usize, 3usize, 2usize, 1usize);
        let oh = (h + 2 * p - kh) / s + 1;
        let ow = (w + 2 * p - kw) / s + 1;
        let x: Vec<f64> = (0..c * h * w).map(|i| ((i * 37 % 101) as f64) / 50.0 - 1.0).collect();
        let y: Vec<f64> = (0..c * kh * kw * oh * ow)
            .map(|i| ((i * 53 % 97) as f64) / 48.0 - 1.0)
            .collect();
        let mut cols = vec![0.0; y.len()];
        im2col(&x, c, h, w, kh, kw, s, p, oh, ow, &mut cols);
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut xt = vec![0.0; x.len()];
        col2im_acc(&y, c, h, w, kh, kw, s, p, oh, ow, &mut xt);
        let rhs: f64 = x.iter().zip(&xt).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }
}
