//! Stochastic gradient descent with classical momentum.

use crate::error::{Error, Result};
use crate::numerics::tensor::{DenseTensor, GradPair};

/// Momentum SGD over a fixed set of parameters.
///
/// Update rule per tensor: `v <- momentum * v - lr * grad; value <- value + v`.
/// With `momentum = 0` this reduces to plain SGD. Velocity buffers are
/// allocated lazily on the first step and keyed by parameter position, so the
/// same parameter set (same order, same shapes) must be passed every step.
#[derive(Debug, Clone)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    step_count: usize,
    velocity: Vec<DenseTensor>,
}

impl Sgd {
    /// `lr >= 0` (zero makes every step a no-op), `0 <= momentum < 1`.
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !lr.is_finite() || lr < 0.0 {
            return Err(Error::Config(format!("learning rate must be >= 0, got {lr}")));
        }
        if !momentum.is_finite() || !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        Ok(Self {
            lr,
            momentum,
            step_count: 0,
            velocity: Vec::new(),
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.step_count
    }

    /// Applies one update to every parameter and leaves the gradients
    /// untouched (callers zero them when starting a new accumulation).
    pub fn step(&mut self, params: &mut [&mut GradPair]) -> Result<()> {
        self.step_count += 1;
        if self.velocity.is_empty() {
            self.velocity = params
                .iter()
                .map(|p| DenseTensor::zeros(p.value.shape()))
                .collect();
        }
        if self.velocity.len() != params.len() {
            return Err(Error::Dimension(format!(
                "optimizer saw {} parameters, expected {}",
                params.len(),
                self.velocity.len()
            )));
        }
        for (p, v) in params.iter_mut().zip(self.velocity.iter_mut()) {
            if !p.grad.is_finite() {
                return Err(Error::Training {
                    iteration: self.step_count,
                    message: "non-finite gradient".to_string(),
                });
            }
            p.value.expect_shape(v.shape(), "sgd parameter")?;
            let vel = v.data_mut();
            let val = p.value.data_mut();
            let grad = p.grad.data();
            for i in 0..vel.len() {
                vel[i] = self.momentum * vel[i] - self.lr * grad[i];
                val[i] += vel[i];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_pair(value: f64, grad: f64) -> GradPair {
        let mut p = GradPair::new(DenseTensor::filled(&[1], value));
        p.grad.data_mut()[0] = grad;
        p
    }

    #[test]
    fn zero_grad_leaves_params_unchanged() {
        let mut p = scalar_pair(1.5, 0.0);
        let mut opt = Sgd::new(0.1, 0.0).unwrap();
        opt.step(&mut [&mut p]).unwrap();
        assert_eq!(p.value.data()[0], 1.5);
    }

    #[test]
    fn single_step_arithmetic() {
        let mut p = scalar_pair(1.0, 1.0);
        let mut opt = Sgd::new(0.1, 0.0).unwrap();
        opt.step(&mut [&mut p]).unwrap();
        assert!((p.value.data()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn momentum_recurrence_two_steps() {
        // v1 = -0.1, w = 0.9; v2 = 0.5*(-0.1) - 0.1 = -0.15, w = 0.75.
        let mut p = scalar_pair(1.0, 1.0);
        let mut opt = Sgd::new(0.1, 0.5).unwrap();
        opt.step(&mut [&mut p]).unwrap();
        assert!((p.value.data()[0] - 0.9).abs() < 1e-15);
        p.grad.data_mut()[0] = 1.0;
        opt.step(&mut [&mut p]).unwrap();
        assert!((p.value.data()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn non_finite_grad_reports_iteration() {
        let mut p = scalar_pair(1.0, f64::NAN);
        let mut opt = Sgd::new(0.1, 0.0).unwrap();
        match opt.step(&mut [&mut p]) {
            Err(Error::Training { iteration, .. }) => assert_eq!(iteration, 1),
            other => panic!("expected training error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(Sgd::new(-0.1, 0.0).is_err());
        assert!(Sgd::new(0.1, 1.0).is_err());
        assert!(Sgd::new(0.1, -0.2).is_err());
        assert!(Sgd::new(0.0, 0.0).is_ok());
    }
}
