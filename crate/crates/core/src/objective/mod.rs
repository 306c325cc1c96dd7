//! Finite-sum objectives with component-level gradient access.
//!
//! Every objective is an average of `m` local functions, each itself an
//! average of `q_i` component functions. Solvers only ever touch components
//! through [`Objective::component_grad`], so the estimator cost accounting
//! (one call = one component evaluation) is exact.

use crate::error::{CoreError, Result};
use crate::linalg;

mod dataset;
mod logistic;
mod quadratic;
mod svm;

pub use dataset::{partition_evenly, Dataset};
pub use logistic::{make_logistic, LogisticObjective};
pub use quadratic::{
    make_synthetic_quadratic, make_synthetic_quadratic_with_spread, QuadraticObjective,
};
pub use svm::{make_svm_smoothed_hinge, smoothed_hinge, smoothed_hinge_deriv, SvmObjective};

/// A finite-sum objective: `f(z) = (1/m) sum_i (1/q_i) sum_j f_{i,j}(z)`.
///
/// Implementations are immutable after construction and reentrant, so they
/// can be shared across threads freely.
pub trait Objective: Send + Sync {
    /// Number of agents `m`.
    fn agents(&self) -> usize;
    /// Decision dimension `n`.
    fn dim(&self) -> usize;
    /// Local sample count `q_i`.
    fn samples(&self, agent: usize) -> usize;
    fn component_value(&self, agent: usize, sample: usize, z: &[f64]) -> f64;
    fn component_grad(&self, agent: usize, sample: usize, z: &[f64], out: &mut [f64]);
    /// Strong-convexity modulus of every local function.
    fn strong_convexity(&self) -> f64;
    /// Lipschitz constant of every component gradient.
    fn smoothness(&self) -> f64;
    /// One-line description used in trace metadata.
    fn describe(&self) -> String;
}

/// `(1/q_i) sum_j grad f_{i,j}(z)` written into `out`.
pub fn batch_gradient(obj: &dyn Objective, agent: usize, z: &[f64], out: &mut [f64]) {
    let q = obj.samples(agent);
    assert!(q > 0, "agent {agent} has no samples");
    out.fill(0.0);
    let mut scratch = vec![0.0; obj.dim()];
    for j in 0..q {
        obj.component_grad(agent, j, z, &mut scratch);
        linalg::axpy(1.0, &scratch, out);
    }
    let inv = 1.0 / q as f64;
    for v in out.iter_mut() {
        *v *= inv;
    }
}

/// Gradient of the global average.
pub fn global_gradient(obj: &dyn Objective, z: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    let mut batch = vec![0.0; obj.dim()];
    for i in 0..obj.agents() {
        batch_gradient(obj, i, z, &mut batch);
        linalg::axpy(1.0, &batch, out);
    }
    let inv = 1.0 / obj.agents() as f64;
    for v in out.iter_mut() {
        *v *= inv;
    }
}

/// Value of the global average.
pub fn global_value(obj: &dyn Objective, z: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..obj.agents() {
        let q = obj.samples(i);
        let local: f64 = (0..q).map(|j| obj.component_value(i, j, z)).sum();
        acc += local / q as f64;
    }
    acc / obj.agents() as f64
}

/// Total component count across agents (one epoch of evaluations).
pub fn total_samples(obj: &dyn Objective) -> u64 {
    (0..obj.agents()).map(|i| obj.samples(i) as u64).sum()
}

/// How a decision vector scores a raw feature row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Margin is `c^T z`.
    Logistic,
    /// Decision vector is `[w, b]`; margin is `c^T w + b`.
    SvmAugmented,
}

/// Fraction of `dataset` rows whose margin sign matches the label. A zero
/// margin predicts +1.
pub fn predict_accuracy(kind: ModelKind, z: &[f64], dataset: &Dataset) -> Result<f64> {
    let expected = match kind {
        ModelKind::Logistic => dataset.dim(),
        ModelKind::SvmAugmented => dataset.dim() + 1,
    };
    if z.len() != expected {
        return Err(CoreError::DimensionMismatch {
            expected,
            actual: z.len(),
        });
    }
    if dataset.is_empty() {
        return Err(CoreError::Dataset("empty evaluation set".into()));
    }
    let mut correct = 0usize;
    for idx in 0..dataset.len() {
        let row = dataset.feature_row(idx);
        let margin = match kind {
            ModelKind::Logistic => linalg::dot(row, z),
            ModelKind::SvmAugmented => linalg::dot(row, &z[..dataset.dim()]) + z[dataset.dim()],
        };
        let predicted = if margin >= 0.0 { 1.0 } else { -1.0 };
        if predicted == dataset.label(idx) {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}
