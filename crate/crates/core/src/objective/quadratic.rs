//! Synthetic diagonal quadratic with a closed-form minimizer, used as the
//! test objective throughout:
//! `f_{i,j}(z) = (1/2) (z - t_{i,j})^T D_{i,j} (z - t_{i,j})`.

use rand::Rng;

use super::Objective;
use crate::error::{CoreError, Result};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    m: usize,
    n: usize,
    counts: Vec<usize>,
    offsets: Vec<usize>,
    /// Diagonal entries per component, `[component][dim]` flattened.
    diag: Vec<f64>,
    /// Target per component, same layout.
    target: Vec<f64>,
    mu: f64,
    lipschitz: f64,
}

/// Seeded sampler: diagonal entries uniform in `[mu, l]`, targets standard
/// normal scaled by `spread`.
pub fn make_synthetic_quadratic_with_spread(
    m: usize,
    n: usize,
    q_per_agent: usize,
    seed: u64,
    mu: f64,
    l: f64,
    spread: f64,
) -> Result<QuadraticObjective> {
    if mu <= 0.0 {
        return Err(CoreError::NonPositiveParameter {
            name: "mu",
            value: mu,
        });
    }
    if l < mu {
        return Err(CoreError::NonPositiveParameter {
            name: "l - mu",
            value: l - mu,
        });
    }
    if m == 0 || n == 0 || q_per_agent == 0 {
        return Err(CoreError::Dataset(
            "quadratic objective needs positive m, n, q".into(),
        ));
    }
    let total = m * q_per_agent;
    let mut rng = rng::stream(seed, 0, 2, Purpose::Data);
    let diag: Vec<f64> = (0..total * n)
        .map(|_| rng.gen::<f64>() * (l - mu) + mu)
        .collect();
    let target: Vec<f64> = (0..total * n)
        .map(|_| spread * rng::standard_normal(&mut rng))
        .collect();
    QuadraticObjective::from_parts(m, n, vec![q_per_agent; m], diag, target, mu, l)
}

/// Spread-1 variant.
pub fn make_synthetic_quadratic(
    m: usize,
    n: usize,
    q_per_agent: usize,
    seed: u64,
    mu: f64,
    l: f64,
) -> Result<QuadraticObjective> {
    make_synthetic_quadratic_with_spread(m, n, q_per_agent, seed, mu, l, 1.0)
}

impl QuadraticObjective {
    /// Explicit construction from per-component diagonals and targets, both
    /// laid out `[agent 0 samples..., agent 1 samples, ...] x dim`.
    pub fn from_parts(
        m: usize,
        n: usize,
        counts: Vec<usize>,
        diag: Vec<f64>,
        target: Vec<f64>,
        mu: f64,
        lipschitz: f64,
    ) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if counts.len() != m || diag.len() != total * n || target.len() != total * n {
            return Err(CoreError::DimensionMismatch {
                expected: total * n,
                actual: diag.len(),
            });
        }
        if let Some(agent) = counts.iter().position(|&q| q == 0) {
            return Err(CoreError::EmptySampleSet { agent });
        }
        if diag
            .iter()
            .any(|&d| d < mu - 1e-12 || d > lipschitz + 1e-12)
        {
            return Err(CoreError::Dataset(
                "diagonal entries must lie in [mu, lipschitz]".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(m);
        let mut acc = 0;
        for &q in &counts {
            offsets.push(acc);
            acc += q;
        }
        Ok(QuadraticObjective {
            m,
            n,
            counts,
            offsets,
            diag,
            target,
            mu,
            lipschitz,
        })
    }

    fn component(&self, agent: usize, sample: usize) -> (&[f64], &[f64]) {
        let at = (self.offsets[agent] + sample) * self.n;
        (&self.diag[at..at + self.n], &self.target[at..at + self.n])
    }

    /// Closed-form global minimizer: per coordinate, the objective is a
    /// weighted sum of parabolas, so the optimum is the weighted average of
    /// the targets.
    pub fn minimizer(&self) -> Vec<f64> {
        let mut num = vec![0.0; self.n];
        let mut den = vec![0.0; self.n];
        for i in 0..self.m {
            let w = 1.0 / (self.m as f64 * self.counts[i] as f64);
            for j in 0..self.counts[i] {
                let (d, t) = self.component(i, j);
                for k in 0..self.n {
                    num[k] += w * d[k] * t[k];
                    den[k] += w * d[k];
                }
            }
        }
        num.iter().zip(&den).map(|(a, b)| a / b).collect()
    }
}

impl Objective for QuadraticObjective {
    fn agents(&self) -> usize {
        self.m
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn samples(&self, agent: usize) -> usize {
        self.counts[agent]
    }

    fn component_value(&self, agent: usize, sample: usize, z: &[f64]) -> f64 {
        let (d, t) = self.component(agent, sample);
        let mut acc = 0.0;
        for k in 0..self.n {
            let dev = z[k] - t[k];
            acc += d[k] * dev * dev;
        }
        0.5 * acc
    }

    fn component_grad(&self, agent: usize, sample: usize, z: &[f64], out: &mut [f64]) {
        let (d, t) = self.component(agent, sample);
        for k in 0..self.n {
            out[k] = d[k] * (z[k] - t[k]);
        }
    }

    fn strong_convexity(&self) -> f64 {
        self.mu
    }

    fn smoothness(&self) -> f64 {
        self.lipschitz
    }

    fn describe(&self) -> String {
        format!(
            "quadratic(m={}, n={}, q={:?}, mu={}, L={})",
            self.m,
            self.n,
            self.counts.first().copied().unwrap_or(0),
            self.mu,
            self.lipschitz
        )
    }
}
