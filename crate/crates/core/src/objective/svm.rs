//! Support vector machine with the smoothed hinge loss.
//!
//! The decision variable is the augmented `[w, b]` and every sample row is
//! implicitly extended with a trailing 1, so the bias rides along inside
//! the finite-sum template. The ridge term `(1/2)||[w, b]||^2` is replicated
//! into every component, which leaves the global objective unchanged.

use super::{Dataset, Objective};
use crate::error::{CoreError, Result};
use crate::linalg;

/// Smoothed hinge: linear for `u < 0`, quadratic on `[0, 1)`, zero beyond.
/// Continuously differentiable; both branch limits at 0 equal 1/2 and at 1
/// equal 0.
pub fn smoothed_hinge(u: f64) -> f64 {
    if u < 0.0 {
        0.5 - u
    } else if u < 1.0 {
        0.5 * (1.0 - u) * (1.0 - u)
    } else {
        0.0
    }
}

pub fn smoothed_hinge_deriv(u: f64) -> f64 {
    if u < 0.0 {
        -1.0
    } else if u < 1.0 {
        u - 1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct SvmObjective {
    data: Dataset,
    partition: Vec<Vec<usize>>,
    lambda: f64,
    lipschitz: f64,
}

/// Builds the smoothed-hinge SVM objective. The decision dimension is the
/// feature dimension plus one (bias).
pub fn make_svm_smoothed_hinge(
    data: Dataset,
    partition: Vec<Vec<usize>>,
    lambda: f64,
) -> Result<SvmObjective> {
    if lambda <= 0.0 {
        return Err(CoreError::NonPositiveParameter {
            name: "lambda",
            value: lambda,
        });
    }
    data.validate_labels()?;
    super::logistic::validate_partition(&partition, data.len())?;
    let mut max_aug_norm_sq = 0.0f64;
    for part in &partition {
        for &idx in part {
            let row = data.feature_row(idx);
            max_aug_norm_sq = max_aug_norm_sq.max(linalg::dot(row, row) + 1.0);
        }
    }
    Ok(SvmObjective {
        lipschitz: 1.0 + lambda * max_aug_norm_sq,
        data,
        partition,
        lambda,
    })
}

impl SvmObjective {
    fn row(&self, agent: usize, sample: usize) -> (&[f64], f64) {
        let idx = self.partition[agent][sample];
        (self.data.feature_row(idx), self.data.label(idx))
    }

    /// Margin of the augmented sample: `b (c^T w + v)`.
    fn margin(&self, c: &[f64], b: f64, z: &[f64]) -> f64 {
        let d = self.data.dim();
        b * (linalg::dot(c, &z[..d]) + z[d])
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Objective for SvmObjective {
    fn agents(&self) -> usize {
        self.partition.len()
    }

    fn dim(&self) -> usize {
        self.data.dim() + 1
    }

    fn samples(&self, agent: usize) -> usize {
        self.partition[agent].len()
    }

    fn component_value(&self, agent: usize, sample: usize, z: &[f64]) -> f64 {
        let (c, b) = self.row(agent, sample);
        0.5 * linalg::dot(z, z) + self.lambda * smoothed_hinge(self.margin(c, b, z))
    }

    fn component_grad(&self, agent: usize, sample: usize, z: &[f64], out: &mut [f64]) {
        let (c, b) = self.row(agent, sample);
        let d = self.data.dim();
        let slope = self.lambda * smoothed_hinge_deriv(self.margin(c, b, z)) * b;
        for k in 0..d {
            out[k] = z[k] + slope * c[k];
        }
        out[d] = z[d] + slope;
    }

    fn strong_convexity(&self) -> f64 {
        1.0
    }

    fn smoothness(&self) -> f64 {
        self.lipschitz
    }

    fn describe(&self) -> String {
        format!(
            "svm_smoothed_hinge(lambda={}, m={}, n={})",
            self.lambda,
            self.agents(),
            self.dim()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_util;
    use super::*;
    use crate::rng::{self, Purpose};
    use rand::Rng;

    #[test]
    fn hinge_piecewise_table() {
        // Satisfied margin.
        assert_eq!(smoothed_hinge(2.0), 0.0);
        assert_eq!(smoothed_hinge_deriv(2.0), 0.0);
        // Boundary of the quadratic region.
        assert_eq!(smoothed_hinge(0.0), 0.5);
        assert_eq!(smoothed_hinge_deriv(0.0), -1.0);
        // Left branch continues the same values.
        assert!((smoothed_hinge(-1e-12) - 0.5).abs() < 1e-11);
        assert_eq!(smoothed_hinge_deriv(-1.0), -1.0);
        assert_eq!(smoothed_hinge(-2.0), 2.5);
        // Interior of the quadratic region.
        assert!((smoothed_hinge(0.5) - 0.125).abs() < 1e-15);
        assert!((smoothed_hinge_deriv(0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn hinge_is_continuously_differentiable_at_kinks() {
        for kink in [0.0, 1.0] {
            let h = 1e-7;
            let fd = (smoothed_hinge(kink + h) - smoothed_hinge(kink - h)) / (2.0 * h);
            assert!((fd - smoothed_hinge_deriv(kink)).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let data = Dataset::from_parts(vec![1.0], 1, vec![1.0]).unwrap();
        assert!(make_svm_smoothed_hinge(data, vec![vec![0]], 0.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference_near_kinks() {
        let mut rng = rng::stream(13, 0, 0, Purpose::Data);
        let n = 4;
        let features: Vec<f64> = (0..8 * n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let labels: Vec<f64> = (0..8)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let data = Dataset::from_parts(features, n, labels).unwrap();
        let obj =
            make_svm_smoothed_hinge(data, super::super::partition_evenly(8, 2, 5), 0.5).unwrap();
        // Random points.
        for _ in 0..30 {
            let z: Vec<f64> = (0..n + 1).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let agent = rng.gen_range(0..2);
            let sample = rng.gen_range(0..4);
            test_util::assert_grad_matches_fd(&obj, agent, sample, &z);
        }
        // Points engineered to land near the kinks u = 0 and u = 1.
        for target in [0.0, 1.0, 1e-7, 1.0 - 1e-7, -1e-7] {
            let agent = 0;
            let sample = 1;
            let (c, b) = obj.row(agent, sample);
            // z = [t * c / ||c||^2, 0] puts the margin at b * t.
            let scale = target / (b * linalg::dot(c, c));
            let mut z: Vec<f64> = c.iter().map(|v| v * scale).collect();
            z.push(0.0);
            test_util::assert_grad_matches_fd(&obj, agent, sample, &z);
        }
    }
}
