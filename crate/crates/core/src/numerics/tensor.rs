//! Dense row-major tensors over `f64`.
//!
//! Everything in the pipeline (BoW vectors, layer weights, image rasters)
//! lives in a `DenseTensor`. Shapes are checked at construction and at every
//! operation boundary; data is always row-major.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Builds a tensor, rejecting empty extents, length mismatches and
    /// non-finite values. Use this for anything that enters a model.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&e| e == 0) {
            return Err(Error::Dimension(format!(
                "tensor extents must be positive, got {shape:?}"
            )));
        }
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::Dimension(format!(
                "shape {shape:?} implies {expect} elements, got {}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Dimension(
                "tensor data contains NaN or Inf".to_string(),
            ));
        }
        Ok(Self { shape, data })
    }

    /// Internal constructor for freshly computed values; skips the finite
    /// scan but still enforces the shape/length invariant.
    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        debug_assert!(!shape.is_empty() && shape.iter().all(|&e| e > 0));
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::from_raw(shape.to_vec(), vec![0.0; n])
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self::from_raw(shape.to_vec(), vec![value; n])
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let n = shape.iter().product();
        Self::from_raw(shape.to_vec(), (0..n).map(&mut f).collect())
    }

    /// Vector constructor, shape `[data.len()]`.
    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(vec![n], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reinterprets the same buffer under a new shape of equal volume.
    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if shape.is_empty() || shape.iter().any(|&e| e == 0) || expect != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} ({} elements) to {shape:?}",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Self::from_raw(shape, self.data.clone()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    /// Flattened inner product; shapes must hold the same element count.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.data.len() != other.data.len() {
            return Err(Error::Dimension(format!(
                "inner product over {} vs {} elements",
                self.data.len(),
                other.data.len()
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Checks that `shape` matches exactly, with `what` naming the operand
    /// in the error message.
    pub fn expect_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Dimension(format!(
                "{what}: expected shape {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }
}

/// A parameter tensor paired with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct GradPair {
    pub value: DenseTensor,
    pub grad: DenseTensor,
}

impl GradPair {
    pub fn new(value: DenseTensor) -> Self {
        let grad = DenseTensor::zeros(value.shape());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_checks_length_and_extents() {
        assert!(DenseTensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(
            DenseTensor::new(vec![2, 3], vec![0.0; 5]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            DenseTensor::new(vec![0], vec![]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            DenseTensor::new(vec![], vec![]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn new_rejects_non_finite() {
        assert!(DenseTensor::new(vec![2], vec![1.0, f64::NAN]).is_err());
        assert!(DenseTensor::new(vec![2], vec![f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn grad_pair_shapes_match() {
        let p = GradPair::new(DenseTensor::zeros(&[3, 4]));
        assert_eq!(p.value.shape(), p.grad.shape());
    }

    #[test]
    fn reshape_preserves_volume() {
        let t = DenseTensor::from_fn(&[2, 6], |i| i as f64);
        let r = t.reshaped(vec![3, 4]).unwrap();
        assert_eq!(r.shape(), &[3, 4]);
        assert_eq!(r.data(), t.data());
        assert!(t.reshaped(vec![5]).is_err());
    }
}
