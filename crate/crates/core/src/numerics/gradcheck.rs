//! Central finite-difference gradient checking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numerics::tensor::DenseTensor;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub eps: f64,
    /// Cap on checked coordinates per tensor; larger tensors are sampled.
    pub max_coords_per_tensor: usize,
    /// Seed for the coordinate sampler.
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_coords_per_tensor: 200,
            seed: 0,
        }
    }
}

/// Compares analytic gradients against central finite differences of the
/// scalar function `f` and returns the worst relative error
/// `|a - n| / max(1e-8, |a| + |n|)` over all checked coordinates.
///
/// `f` must be a deterministic function of `params`; `analytic` holds one
/// gradient tensor per parameter tensor, shape-matched.
pub fn grad_check<F>(
    mut f: F,
    params: &[DenseTensor],
    analytic: &[DenseTensor],
    cfg: GradCheckConfig,
) -> f64
where
    F: FnMut(&[DenseTensor]) -> f64,
{
    assert_eq!(
        params.len(),
        analytic.len(),
        "one analytic gradient per parameter tensor"
    );
    let mut work: Vec<DenseTensor> = params.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for ti in 0..work.len() {
        assert_eq!(
            work[ti].shape(),
            analytic[ti].shape(),
            "gradient shape mismatch on tensor {ti}"
        );
        let n = work[ti].len();
        let coords: Vec<usize> = if n <= cfg.max_coords_per_tensor {
            (0..n).collect()
        } else {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            all.truncate(cfg.max_coords_per_tensor);
            all
        };
        for ci in coords {
            let orig = work[ti].data()[ci];
            work[ti].data_mut()[ci] = orig + cfg.eps;
            let plus = f(&work);
            work[ti].data_mut()[ci] = orig - cfg.eps;
            let minus = f(&work);
            work[ti].data_mut()[ci] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.eps);
            let a = analytic[ti].data()[ci];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            if rel > worst {
                worst = rel;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn quadratic_gradient_matches_analytic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = DenseTensor::from_fn(&[6], |_| rng.gen_range(-2.0..2.0));
        let analytic = w.map(|v| 2.0 * v);
        let err = grad_check(
            |p| p[0].data().iter().map(|v| v * v).sum(),
            &[w],
            &[analytic],
            GradCheckConfig::default(),
        );
        assert!(err < 1e-8, "relative error {err}");
    }

    #[test]
    fn sampling_is_seeded_and_bounded() {
        let w = DenseTensor::zeros(&[500]);
        let g = DenseTensor::zeros(&[500]);
        let mut calls = 0usize;
        let cfg = GradCheckConfig {
            max_coords_per_tensor: 10,
            ..Default::default()
        };
        let _ = grad_check(
            |_| {
                calls += 1;
                0.0
            },
            std::slice::from_ref(&w),
            std::slice::from_ref(&g),
            cfg,
        );
        assert_eq!(calls, 20); // two evaluations per sampled coordinate
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let w = DenseTensor::filled(&[3], 1.0);
        let wrong = DenseTensor::filled(&[3], 5.0);
        let err = grad_check(
            |p| p[0].data().iter().map(|v| v * v).sum(),
            &[w],
            &[wrong],
            GradCheckConfig::default(),
        );
        assert!(err > 0.1);
    }
}
