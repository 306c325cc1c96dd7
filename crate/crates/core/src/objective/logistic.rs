//! Regularized logistic regression components:
//! `f_{i,j}(z) = (beta/2) ||z||^2 + log(1 + exp(-b c^T z))`.

use super::{Dataset, Objective};
use crate::error::{CoreError, Result};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct LogisticObjective {
    data: Dataset,
    partition: Vec<Vec<usize>>,
    beta: f64,
    lipschitz: f64,
}

/// Builds the logistic objective over an agent partition of the dataset.
/// The smoothness constant is the standard `beta + max ||c||^2 / 4` bound.
pub fn make_logistic(
    data: Dataset,
    partition: Vec<Vec<usize>>,
    beta: f64,
) -> Result<LogisticObjective> {
    if beta <= 0.0 {
        return Err(CoreError::NonPositiveParameter {
            name: "beta",
            value: beta,
        });
    }
    data.validate_labels()?;
    validate_partition(&partition, data.len())?;
    let mut max_norm_sq = 0.0f64;
    for part in &partition {
        for &idx in part {
            let row = data.feature_row(idx);
            max_norm_sq = max_norm_sq.max(linalg::dot(row, row));
        }
    }
    Ok(LogisticObjective {
        lipschitz: beta + max_norm_sq / 4.0,
        data,
        partition,
        beta,
    })
}

pub(super) fn validate_partition(partition: &[Vec<usize>], n_samples: usize) -> Result<()> {
    let mut seen = vec![false; n_samples];
    for (agent, part) in partition.iter().enumerate() {
        if part.is_empty() {
            return Err(CoreError::EmptySampleSet { agent });
        }
        for &idx in part {
            if idx >= n_samples {
                return Err(CoreError::Dataset(format!(
                    "partition references sample {idx} beyond {n_samples}"
                )));
            }
            if seen[idx] {
                return Err(CoreError::Dataset(format!(
                    "sample {idx} assigned to two agents"
                )));
            }
            seen[idx] = true;
        }
    }
    Ok(())
}

/// `log(1 + exp(u))` without overflow.
fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Numerically stable logistic sigmoid.
fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl LogisticObjective {
    fn row(&self, agent: usize, sample: usize) -> (&[f64], f64) {
        let idx = self.partition[agent][sample];
        (self.data.feature_row(idx), self.data.label(idx))
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Objective for LogisticObjective {
    fn agents(&self) -> usize {
        self.partition.len()
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn samples(&self, agent: usize) -> usize {
        self.partition[agent].len()
    }

    fn component_value(&self, agent: usize, sample: usize, z: &[f64]) -> f64 {
        let (c, b) = self.row(agent, sample);
        0.5 * self.beta * linalg::dot(z, z) + log1p_exp(-b * linalg::dot(c, z))
    }

    fn component_grad(&self, agent: usize, sample: usize, z: &[f64], out: &mut [f64]) {
        let (c, b) = self.row(agent, sample);
        let s = sigmoid(-b * linalg::dot(c, z));
        for d in 0..z.len() {
            out[d] = self.beta * z[d] - b * c[d] * s;
        }
    }

    fn strong_convexity(&self) -> f64 {
        self.beta
    }

    fn smoothness(&self) -> f64 {
        self.lipschitz
    }

    fn describe(&self) -> String {
        format!(
            "logistic(beta={}, m={}, n={})",
            self.beta,
            self.agents(),
            self.dim()
        )
    }
}
