//! Affine, activation and loss kernels with their analytic backwards.
//!
//! All forwards are pure; backwards take whatever the forward cached (input
//! or output) and the upstream gradient, and return gradients of matching
//! shape. Log losses clamp their argument at [`LOG_EPS`].

use crate::error::{Error, Result};
use crate::numerics::tensor::DenseTensor;

/// Clamp applied inside `-log(p)` style losses.
pub const LOG_EPS: f64 = 1e-12;

/// `w·x + b` for `w: [n_out, n_in]`, `x: [n_in]`, `b: [n_out]`.
pub fn affine_forward(x: &DenseTensor, w: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let (n_out, n_in) = affine_dims(w)?;
    x.expect_shape(&[n_in], "affine input")?;
    b.expect_shape(&[n_out], "affine bias")?;
    let mut out = vec![0.0; n_out];
    affine_into(x.data(), w.data(), b.data(), n_out, n_in, &mut out);
    Ok(DenseTensor::from_raw(vec![n_out], out))
}

/// Gradients of an affine layer: `(dx, dw, db)` given the upstream gradient
/// on the output.
pub fn affine_backward(
    x: &DenseTensor,
    w: &DenseTensor,
    upstream: &DenseTensor,
) -> Result<(DenseTensor, DenseTensor, DenseTensor)> {
    let (n_out, n_in) = affine_dims(w)?;
    x.expect_shape(&[n_in], "affine input")?;
    upstream.expect_shape(&[n_out], "affine upstream")?;
    let mut dx = vec![0.0; n_in];
    let mut dw = vec![0.0; n_out * n_in];
    let xd = x.data();
    let wd = w.data();
    let up = upstream.data();
    for o in 0..n_out {
        let u = up[o];
        let row = o * n_in;
        for i in 0..n_in {
            dw[row + i] = u * xd[i];
            dx[i] += wd[row + i] * u;
        }
    }
    Ok((
        DenseTensor::from_raw(vec![n_in], dx),
        DenseTensor::from_raw(vec![n_out, n_in], dw),
        DenseTensor::from_raw(vec![n_out], up.to_vec()),
    ))
}

fn affine_dims(w: &DenseTensor) -> Result<(usize, usize)> {
    match w.shape() {
        [n_out, n_in] => Ok((*n_out, *n_in)),
        other => Err(Error::Dimension(format!(
            "affine weight must be a matrix, got shape {other:?}"
        ))),
    }
}

/// Slice-level affine kernel shared by the model hot loops.
pub(crate) fn affine_into(
    x: &[f64],
    w: &[f64],
    b: &[f64],
    n_out: usize,
    n_in: usize,
    out: &mut [f64],
) {
    debug_assert_eq!(x.len(), n_in);
    debug_assert_eq!(w.len(), n_out * n_in);
    debug_assert_eq!(out.len(), n_out);
    for (o, slot) in out.iter_mut().enumerate() {
        let row = &w[o * n_in..(o + 1) * n_in];
        let mut acc = b[o];
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        *slot = acc;
    }
}

/// Slice-level affine backward accumulating into `dw`/`db` and overwriting `dx`.
pub(crate) fn affine_backward_into(
    x: &[f64],
    w: &[f64],
    upstream: &[f64],
    n_out: usize,
    n_in: usize,
    dx: &mut [f64],
    dw: &mut [f64],
    db: &mut [f64],
) {
    dx.fill(0.0);
    for o in 0..n_out {
        let u = upstream[o];
        db[o] += u;
        let row = o * n_in;
        for i in 0..n_in {
            dw[row + i] += u * x[i];
            dx[i] += w[row + i] * u;
        }
    }
}

/// Elementwise hyperbolic tangent.
pub fn tanh_forward(x: &DenseTensor) -> DenseTensor {
    x.map(f64::tanh)
}

/// Backward through tanh given the forward *output* `y = tanh(x)`.
pub fn tanh_backward(output: &DenseTensor, upstream: &DenseTensor) -> Result<DenseTensor> {
    upstream.expect_shape(output.shape(), "tanh upstream")?;
    let data = output
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&y, &u)| u * (1.0 - y * y))
        .collect();
    Ok(DenseTensor::from_raw(output.shape().to_vec(), data))
}

/// Elementwise leaky rectifier: `x` for `x >= 0`, `slope * x` otherwise.
pub fn leaky_relu_forward(x: &DenseTensor, slope: f64) -> DenseTensor {
    x.map(|v| if v >= 0.0 { v } else { slope * v })
}

/// Backward through the leaky rectifier given the forward *input*.
pub fn leaky_relu_backward(
    input: &DenseTensor,
    slope: f64,
    upstream: &DenseTensor,
) -> Result<DenseTensor> {
    upstream.expect_shape(input.shape(), "leaky relu upstream")?;
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &u)| if x >= 0.0 { u } else { slope * u })
        .collect();
    Ok(DenseTensor::from_raw(input.shape().to_vec(), data))
}

/// Elementwise logistic sigmoid; output in (0, 1).
pub fn sigmoid_forward(x: &DenseTensor) -> DenseTensor {
    x.map(sigmoid)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Backward through sigmoid given the forward *output* `y`.
pub fn sigmoid_backward(output: &DenseTensor, upstream: &DenseTensor) -> Result<DenseTensor> {
    upstream.expect_shape(output.shape(), "sigmoid upstream")?;
    let data = output
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&y, &u)| u * y * (1.0 - y))
        .collect();
    Ok(DenseTensor::from_raw(output.shape().to_vec(), data))
}

/// Numerically stable softmax over a non-empty vector of logits.
pub fn softmax(logits: &DenseTensor) -> Result<DenseTensor> {
    if logits.rank() != 1 || logits.is_empty() {
        return Err(Error::Dimension(format!(
            "softmax expects a non-empty vector, got shape {:?}",
            logits.shape()
        )));
    }
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits.data(), &mut out);
    Ok(DenseTensor::from_raw(vec![logits.len()], out))
}

pub(crate) fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        let e = (l - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// `-log(probs[label])`, with the probability clamped at [`LOG_EPS`].
pub fn softmax_xent_loss(probs: &DenseTensor, label: usize) -> Result<f64> {
    if probs.rank() != 1 || probs.is_empty() {
        return Err(Error::Dimension(format!(
            "cross-entropy expects a probability vector, got shape {:?}",
            probs.shape()
        )));
    }
    if label >= probs.len() {
        return Err(Error::Index(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(-(probs.data()[label].max(LOG_EPS)).ln())
}

/// Gradient of `-log softmax` with respect to the *logits*:
/// `probs - onehot(label)`.
pub fn softmax_xent_backward(probs: &DenseTensor, label: usize) -> Result<DenseTensor> {
    if label >= probs.len() {
        return Err(Error::Index(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let mut g = probs.data().to_vec();
    g[label] -= 1.0;
    Ok(DenseTensor::from_raw(vec![g.len()], g))
}

/// Mean of per-sample cross-entropy losses.
pub fn softmax_xent_batch_loss(losses: &[f64]) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::Dimension("empty loss batch".to_string()));
    }
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Binary cross-entropy on a probability, target in {0, 1}.
pub fn bce_loss(p: f64, target: f64) -> f64 {
    let p = p.clamp(LOG_EPS, 1.0 - LOG_EPS);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Gradient of the binary cross-entropy with respect to the probability.
pub fn bce_backward(p: f64, target: f64) -> f64 {
    let p = p.clamp(LOG_EPS, 1.0 - LOG_EPS);
    -target / p + (1.0 - target) / (1.0 - p)
}

/// Gradient of `bce(sigmoid(z), target)` with respect to the logit `z`.
/// The composition collapses to `sigmoid(z) - target`.
pub fn bce_backward_logit(p: f64, target: f64) -> f64 {
    p - target
}

/// Mean squared error between two same-shape tensors.
pub fn mse_loss(pred: &DenseTensor, target: &DenseTensor) -> Result<f64> {
    target.expect_shape(pred.shape(), "mse target")?;
    let n = pred.len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Gradient of the mean squared error with respect to `pred`.
pub fn mse_backward(pred: &DenseTensor, target: &DenseTensor) -> Result<DenseTensor> {
    target.expect_shape(pred.shape(), "mse target")?;
    let n = pred.len() as f64;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| 2.0 * (a - b) / n)
        .collect();
    Ok(DenseTensor::from_raw(pred.shape().to_vec(), data))
}
