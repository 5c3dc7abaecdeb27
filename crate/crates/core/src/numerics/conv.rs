//! 2-D cross-correlation ("convolution") and its transpose ("deconvolution"),
//! plus their analytic backwards.
//!
//! Layouts (row-major):
//! - `conv2d_forward`: input `[C_in, H, W]`, kernels `[C_out, C_in, k, k]`,
//!   bias `[C_out]`, output `[C_out, H', W']` with
//!   `H' = floor((H + 2*pad - k) / stride) + 1`.
//! - `deconv2d_forward`: input `[C_in, H, W]`, kernels `[C_in, C_out, k, k]`,
//!   bias `[C_out]`, output `[C_out, H', W']` with
//!   `H' = (H - 1) * stride - 2*pad + k`.
//!
//! With a shared kernel tensor the two are linear-operator adjoints:
//! `<conv(x), y> == <x, deconv(y)>` (zero bias).

use crate::error::{Error, Result};
use crate::numerics::tensor::DenseTensor;

/// Output extent of a strided convolution, `floor((in + 2p - k)/s) + 1`.
pub fn conv2d_out_extent(input: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::Dimension("stride must be >= 1".to_string()));
    }
    let padded = input + 2 * pad;
    if padded < k {
        return Err(Error::Dimension(format!(
            "conv output extent would be non-positive: in={input} k={k} stride={stride} pad={pad}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

/// Output extent of a transposed convolution, `(in - 1)s - 2p + k`.
pub fn deconv2d_out_extent(input: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::Dimension("stride must be >= 1".to_string()));
    }
    let grown = (input - 1) * stride + k;
    if grown <= 2 * pad {
        return Err(Error::Dimension(format!(
            "deconv output extent would be non-positive: in={input} k={k} stride={stride} pad={pad}"
        )));
    }
    Ok(grown - 2 * pad)
}

struct ConvGeom {
    c_in: usize,
    c_out: usize,
    k: usize,
    h: usize,
    w: usize,
}

fn check_conv_shapes(
    input: &DenseTensor,
    kernels: &DenseTensor,
    bias: Option<&DenseTensor>,
    transposed: bool,
) -> Result<ConvGeom> {
    let (c_in, h, w) = match input.shape() {
        [c, h, w] => (*c, *h, *w),
        other => {
            return Err(Error::Dimension(format!(
                "conv input must be [C, H, W], got {other:?}"
            )))
        }
    };
    let (k0, k1, kh, kw) = match kernels.shape() {
        [a, b, kh, kw] => (*a, *b, *kh, *kw),
        other => {
            return Err(Error::Dimension(format!(
                "conv kernels must be rank 4, got {other:?}"
            )))
        }
    };
    if kh != kw {
        return Err(Error::Dimension(format!(
            "kernels must be square, got {kh}x{kw}"
        )));
    }
    // Forward conv kernels are [C_out, C_in, k, k]; transposed kernels are
    // [C_in, C_out, k, k].
    let (kc_in, c_out) = if transposed { (k0, k1) } else { (k1, k0) };
    if kc_in != c_in {
        return Err(Error::Dimension(format!(
            "kernel input channels {kc_in} != input channels {c_in}"
        )));
    }
    if let Some(b) = bias {
        b.expect_shape(&[c_out], "conv bias")?;
    }
    Ok(ConvGeom {
        c_in,
        c_out,
        k: kh,
        h,
        w,
    })
}

/// Strided 2-D cross-correlation with zero padding and per-channel bias.
pub fn conv2d_forward(
    input: &DenseTensor,
    kernels: &DenseTensor,
    bias: &DenseTensor,
    stride: usize,
    pad: usize,
) -> Result<DenseTensor> {
    let g = check_conv_shapes(input, kernels, Some(bias), false)?;
    let oh = conv2d_out_extent(g.h, g.k, stride, pad)?;
    let ow = conv2d_out_extent(g.w, g.k, stride, pad)?;
    let (h, w, k) = (g.h, g.w, g.k);
    let x = input.data();
    let kd = kernels.data();
    let bd = bias.data();
    let mut out = vec![0.0; g.c_out * oh * ow];
    for co in 0..g.c_out {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bd[co];
                for ci in 0..g.c_in {
                    let kbase = ((co * g.c_in + ci) * k) * k;
                    let xbase = ci * h * w;
                    for ky in 0..k {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let xrow = xbase + iy as usize * w;
                        let krow = kbase + ky * k;
                        for kx in 0..k {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc += x[xrow + ix as usize] * kd[krow + kx];
                        }
                    }
                }
                out[(co * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Ok(DenseTensor::from_raw(vec![g.c_out, oh, ow], out))
}

/// Gradients of `conv2d_forward`: `(d_input, d_kernels, d_bias)`.
pub fn conv2d_backward(
    input: &DenseTensor,
    kernels: &DenseTensor,
    stride: usize,
    pad: usize,
    upstream: &DenseTensor,
) -> Result<(DenseTensor, DenseTensor, DenseTensor)> {
    let g = check_conv_shapes(input, kernels, None, false)?;
    let oh = conv2d_out_extent(g.h, g.k, stride, pad)?;
    let ow = conv2d_out_extent(g.w, g.k, stride, pad)?;
    upstream.expect_shape(&[g.c_out, oh, ow], "conv upstream")?;
    let (h, w, k) = (g.h, g.w, g.k);
    let x = input.data();
    let kd = kernels.data();
    let up = upstream.data();
    let mut dx = vec![0.0; input.len()];
    let mut dk = vec![0.0; kernels.len()];
    let mut db = vec![0.0; g.c_out];
    for co in 0..g.c_out {
        for oy in 0..oh {
            for ox in 0..ow {
                let u = up[(co * oh + oy) * ow + ox];
                db[co] += u;
                for ci in 0..g.c_in {
                    let kbase = ((co * g.c_in + ci) * k) * k;
                    let xbase = ci * h * w;
                    for ky in 0..k {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let xrow = xbase + iy as usize * w;
                        let krow = kbase + ky * k;
                        for kx in 0..k {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            dx[xrow + ix as usize] += u * kd[krow + kx];
                            dk[krow + kx] += u * x[xrow + ix as usize];
                        }
                    }
                }
            }
        }
    }
    Ok((
        DenseTensor::from_raw(input.shape().to_vec(), dx),
        DenseTensor::from_raw(kernels.shape().to_vec(), dk),
        DenseTensor::from_raw(vec![g.c_out], db),
    ))
}

/// Transposed convolution (up-sampling adjoint of `conv2d_forward`) with
/// per-channel bias.
pub fn deconv2d_forward(
    input: &DenseTensor,
    kernels: &DenseTensor,
    bias: &DenseTensor,
    stride: usize,
    pad: usize,
) -> Result<DenseTensor> {
    let g = check_conv_shapes(input, kernels, Some(bias), true)?;
    let oh = deconv2d_out_extent(g.h, g.k, stride, pad)?;
    let ow = deconv2d_out_extent(g.w, g.k, stride, pad)?;
    let (h, w, k) = (g.h, g.w, g.k);
    let x = input.data();
    let kd = kernels.data();
    let mut out = vec![0.0; g.c_out * oh * ow];
    for (co, &b) in bias.data().iter().enumerate() {
        out[co * oh * ow..(co + 1) * oh * ow].fill(b);
    }
    for ci in 0..g.c_in {
        for iy in 0..h {
            for ix in 0..w {
                let v = x[(ci * h + iy) * w + ix];
                if v == 0.0 {
                    continue;
                }
                for co in 0..g.c_out {
                    let kbase = ((ci * g.c_out + co) * k) * k;
                    let obase = co * oh * ow;
                    for ky in 0..k {
                        let oy = (iy * stride + ky) as isize - pad as isize;
                        if oy < 0 || oy >= oh as isize {
                            continue;
                        }
                        let orow = obase + oy as usize * ow;
                        let krow = kbase + ky * k;
                        for kx in 0..k {
                            let ox = (ix * stride + kx) as isize - pad as isize;
                            if ox < 0 || ox >= ow as isize {
                                continue;
                            }
                            out[orow + ox as usize] += v * kd[krow + kx];
                        }
                    }
                }
            }
        }
    }
    Ok(DenseTensor::from_raw(vec![g.c_out, oh, ow], out))
}

/// Gradients of `deconv2d_forward`: `(d_input, d_kernels, d_bias)`.
pub fn deconv2d_backward(
    input: &DenseTensor,
    kernels: &DenseTensor,
    stride: usize,
    pad: usize,
    upstream: &DenseTensor,
) -> Result<(DenseTensor, DenseTensor, DenseTensor)> {
    let g = check_conv_shapes(input, kernels, None, true)?;
    let oh = deconv2d_out_extent(g.h, g.k, stride, pad)?;
    let ow = deconv2d_out_extent(g.w, g.k, stride, pad)?;
    upstream.expect_shape(&[g.c_out, oh, ow], "deconv upstream")?;
    let (h, w, k) = (g.h, g.w, g.k);
    let x = input.data();
    let kd = kernels.data();
    let up = upstream.data();
    let mut dx = vec![0.0; input.len()];
    let mut dk = vec![0.0; kernels.len()];
    let mut db = vec![0.0; g.c_out];
    for co in 0..g.c_out {
        let obase = co * oh * ow;
        for v in &up[obase..obase + oh * ow] {
            db[co] += v;
        }
    }
    for ci in 0..g.c_in {
        for iy in 0..h {
            for ix in 0..w {
                let xi = (ci * h + iy) * w + ix;
                let xv = x[xi];
                let mut acc = 0.0;
                for co in 0..g.c_out {
                    let kbase = ((ci * g.c_out + co) * k) * k;
                    let obase = co * oh * ow;
                    for ky in 0..k {
                        let oy = (iy * stride + ky) as isize - pad as isize;
                        if oy < 0 || oy >= oh as isize {
                            continue;
                        }
                        let orow = obase + oy as usize * ow;
                        let krow = kbase + ky * k;
                        for kx in 0..k {
                            let ox = (ix * stride + kx) as isize - pad as isize;
                            if ox < 0 || ox >= ow as isize {
                                continue;
                            }
                            let u = up[orow + ox as usize];
                            acc += u * kd[krow + kx];
                            dk[krow + kx] += u * xv;
                        }
                    }
                }
                dx[xi] = acc;
            }
        }
    }
    Ok((
        DenseTensor::from_raw(input.shape().to_vec(), dx),
        DenseTensor::from_raw(kernels.shape().to_vec(), dk),
        DenseTensor::from_raw(vec![g.c_out], db),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_t(shape: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
        DenseTensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_t(&[1, 5, 5], &mut rng);
        let k = DenseTensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        let b = DenseTensor::zeros(&[1]);
        let y = conv2d_forward(&x, &k, &b, 1, 0).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn shape_arithmetic() {
        assert_eq!(conv2d_out_extent(64, 4, 2, 1).unwrap(), 32);
        assert_eq!(deconv2d_out_extent(32, 4, 2, 1).unwrap(), 64);
        assert_eq!(deconv2d_out_extent(1, 4, 1, 0).unwrap(), 4);
        assert!(conv2d_out_extent(2, 5, 1, 0).is_err());
        assert!(deconv2d_out_extent(1, 2, 1, 2).is_err());
    }

    #[test]
    fn conv_matches_quadruple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_t(&[1, 4, 4], &mut rng);
        let k = rand_t(&[1, 1, 2, 2], &mut rng);
        let b = rand_t(&[1], &mut rng);
        let y = conv2d_forward(&x, &k, &b, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3]);
        // Brute-force oracle over an explicitly materialized window.
        for oy in 0..3usize {
            for ox in 0..3usize {
                let mut acc = b.data()[0];
                for ky in 0..2usize {
                    for kx in 0..2usize {
                        acc += x.data()[(oy + ky) * 4 + (ox + kx)] * k.data()[ky * 2 + kx];
                    }
                }
                assert!((y.data()[oy * 3 + ox] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deconv_single_pixel_broadcasts_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DenseTensor::new(vec![1, 1, 1], vec![1.7]).unwrap();
        let k = rand_t(&[1, 1, 4, 4], &mut rng);
        let b = DenseTensor::zeros(&[1]);
        let y = deconv2d_forward(&x, &k, &b, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 4, 4]);
        for (yv, kv) in y.data().iter().zip(k.data()) {
            assert!((yv - 1.7 * kv).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_deconv_adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for &(c_in, c_out, h, k, s, p) in
            &[(1usize, 1usize, 4usize, 2usize, 1usize, 0usize), (2, 2, 8, 4, 2, 1), (2, 1, 6, 3, 1, 1)]
        {
            let x = rand_t(&[c_in, h, h], &mut rng);
            let kernels = rand_t(&[c_out, c_in, k, k], &mut rng);
            let zb_out = DenseTensor::zeros(&[c_out]);
            let zb_in = DenseTensor::zeros(&[c_in]);
            let cx = conv2d_forward(&x, &kernels, &zb_out, s, p).unwrap();
            let y = rand_t(cx.shape(), &mut rng);
            // Same kernel tensor read as [C_out_conv, C_in_conv, k, k] on one
            // side and [C_in_deconv, C_out_deconv, k, k] on the other.
            let dy = deconv2d_forward(&y, &kernels, &zb_in, s, p).unwrap();
            let lhs = cx.inner(&y).unwrap();
            let rhs = x.inner(&dy).unwrap();
            assert!(
                (lhs - rhs).abs() < 1e-10,
                "adjoint identity violated: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn round_trip_geometry_preserved() {
        // conv then deconv with (k=4, s=2, p=1) preserves even extents.
        for h in [8usize, 16, 32, 64] {
            let c = conv2d_out_extent(h, 4, 2, 1).unwrap();
            assert_eq!(deconv2d_out_extent(c, 4, 2, 1).unwrap(), h);
        }
    }

    #[test]
    fn channel_mismatch_is_dimension_error() {
        let x = DenseTensor::zeros(&[2, 4, 4]);
        let k = DenseTensor::zeros(&[1, 3, 2, 2]);
        let b = DenseTensor::zeros(&[1]);
        assert!(matches!(
            conv2d_forward(&x, &k, &b, 1, 0),
            Err(Error::Dimension(_))
        ));
    }
}
