//! Directed communication networks with column-stochastic mixing weights.
//!
//! A network couples three things: the adjacency structure (every agent's
//! out-neighbor set, always containing the agent itself), the dense weight
//! matrix with `a[i][j] > 0` exactly when `j` sends to `i` and every column
//! summing to one, and the spectral bundle derived from it (Perron vector
//! `pi`, rank-one limit `A_inf = pi 1^T`, and the weighted-norm contraction
//! factor `sigma_a`). Self-loops plus strong connectivity make the matrix
//! primitive, which is what the derived quantities rely on.

use std::collections::VecDeque;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::linalg;
use crate::rng::{self, Purpose};

const RANDOM_GRAPH_RETRIES: usize = 100;
const PERRON_TOL: f64 = 1e-12;

/// Supported topology generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    /// Directed cycle `i -> i+1` plus self-loops.
    Ring,
    /// Two-dimensional grid with symmetric edges (weights still unbalanced
    /// because degrees differ).
    Mesh,
    /// `i -> (i + 2^t) mod m` for `t = 0..floor(log2(m-1))` plus self-loop.
    DirectedExponential,
    /// Exponential offsets in both directions.
    SymmetricExponential,
    /// Complete digraph.
    Full,
    /// Each ordered pair is an edge independently with this probability.
    RandomStronglyConnected { ratio: f64 },
    /// Each unordered pair becomes a bidirectional edge with this probability.
    RandomUndirected { ratio: f64 },
    /// Each agent draws this many distinct non-self out-neighbors.
    RandomRegular { out_degree: usize },
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::Ring => write!(f, "ring"),
            GraphKind::Mesh => write!(f, "mesh"),
            GraphKind::DirectedExponential => write!(f, "directed_exponential"),
            GraphKind::SymmetricExponential => write!(f, "symmetric_exponential"),
            GraphKind::Full => write!(f, "full"),
            GraphKind::RandomStronglyConnected { ratio } => {
                write!(f, "random_strongly_connected(ratio={ratio})")
            }
            GraphKind::RandomUndirected { ratio } => write!(f, "random_undirected(ratio={ratio})"),
            GraphKind::RandomRegular { out_degree } => {
                write!(f, "random_regular(out_degree={out_degree})")
            }
        }
    }
}

/// Perron vector and the contraction data derived from the weight matrix.
#[derive(Debug, Clone)]
pub struct SpectralBundle {
    /// Positive right eigenvector of the weight matrix at eigenvalue 1,
    /// normalized to sum one.
    pub pi: Vec<f64>,
    /// `pi 1^T`, row-major m x m.
    pub a_infinity: Vec<f64>,
    /// `||A - A_inf||_pi`, strictly inside (0,1) for primitive inputs
    /// (0 exactly when the weights are already rank-one).
    pub sigma_a: f64,
    pub pi_max: f64,
    pub pi_min: f64,
    /// `pi_max / pi_min`; 1 exactly when the matrix is doubly stochastic.
    pub theta_ratio: f64,
}

impl SpectralBundle {
    /// `T = sqrt(theta) * ||1_m - m pi||_2`, the push-sum decay coefficient.
    pub fn t_const(&self) -> f64 {
        let m = self.pi.len() as f64;
        let dev: Vec<f64> = self.pi.iter().map(|p| 1.0 - m * p).collect();
        self.theta_ratio.sqrt() * linalg::norm2(&dev)
    }
}

/// A strongly connected digraph with self-loops and uniform-out-degree
/// column-stochastic weights.
#[derive(Debug, Clone)]
pub struct DirectedNetwork {
    m: usize,
    out_neighbors: Vec<Vec<usize>>,
    in_neighbors: Vec<Vec<usize>>,
    /// Row-major; `weights[i*m + j]` is the weight on edge `j -> i`.
    weights: Vec<f64>,
    spectral: SpectralBundle,
    kind_label: String,
}

impl DirectedNetwork {
    /// Builds a network from adjacency lists (weights from the uniform
    /// out-degree rule, then the full spectral bundle).
    pub fn from_adjacency(out_neighbors: Vec<Vec<usize>>) -> Result<Self> {
        Self::from_adjacency_labeled(out_neighbors, "custom".to_string())
    }

    fn from_adjacency_labeled(mut out_neighbors: Vec<Vec<usize>>, label: String) -> Result<Self> {
        let m = out_neighbors.len();
        if m < 2 {
            return Err(CoreError::TooFewAgents(m));
        }
        for (i, list) in out_neighbors.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if !list.contains(&i) {
                return Err(CoreError::MissingSelfLoop(i));
            }
            if let Some(&bad) = list.iter().find(|&&j| j >= m) {
                return Err(CoreError::DimensionMismatch {
                    expected: m,
                    actual: bad,
                });
            }
        }
        if !check_strong_connectivity(&out_neighbors) {
            return Err(CoreError::NotStronglyConnected);
        }
        let weights = build_column_stochastic_weights(&out_neighbors)?;
        let mut in_neighbors = vec![Vec::new(); m];
        for (j, outs) in out_neighbors.iter().enumerate() {
            for &i in outs {
                in_neighbors[i].push(j);
            }
        }
        for list in &mut in_neighbors {
            list.sort_unstable();
        }
        let pi = perron_vector(&weights, m, PERRON_TOL)?;
        let spectral = spectral_bundle(&weights, m, pi)?;
        Ok(DirectedNetwork {
            m,
            out_neighbors,
            in_neighbors,
            weights,
            spectral,
            kind_label: label,
        })
    }

    pub fn agents(&self) -> usize {
        self.m
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_neighbors[i]
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    /// Weight on the edge `j -> i`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.m + j]
    }

    /// Row-major dense weight matrix.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spectral(&self) -> &SpectralBundle {
        &self.spectral
    }

    pub fn kind_label(&self) -> &str {
        &self.kind_label
    }

    /// Applies `(A ⊗ I_n)` blockwise: `dst` block `i` becomes
    /// `sum_j a_ij src_j`. The Kronecker product is never materialized.
    pub fn mix_into(&self, src: &[f64], dst: &mut [f64], n: usize) {
        assert_eq!(src.len(), self.m * n);
        assert_eq!(dst.len(), self.m * n);
        for i in 0..self.m {
            let block = &mut dst[i * n..(i + 1) * n];
            block.fill(0.0);
            for &j in &self.in_neighbors[i] {
                let a = self.weights[i * self.m + j];
                linalg::axpy(a, &src[j * n..(j + 1) * n], block);
            }
        }
    }

    /// Scalar (n = 1) mixing used for the push-sum weights.
    pub fn mix_scalar_into(&self, src: &[f64], dst: &mut [f64]) {
        self.mix_into(src, dst, 1);
    }

    /// Writes the documented edge-list format: agent count on the first
    /// line, then one `i j` line per directed edge `j -> i`.
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let mut text = format!("{}\n", self.m);
        for (i, ins) in self.in_neighbors.iter().enumerate() {
            for &j in ins {
                text.push_str(&format!("{i} {j}\n"));
            }
        }
        fs::write(path, text).map_err(|e| CoreError::io(path.display().to_string(), e))
    }

    /// Reads the edge-list format written by [`write_edge_list`].
    ///
    /// [`write_edge_list`]: DirectedNetwork::write_edge_list
    pub fn read_edge_list(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let m: usize = lines
            .next()
            .ok_or_else(|| CoreError::Dataset("empty edge-list file".into()))?
            .trim()
            .parse()
            .map_err(|_| CoreError::Dataset("first line must be the agent count".into()))?;
        let mut out_neighbors = vec![Vec::new(); m];
        for line in lines {
            let mut parts = line.split_whitespace();
            let (i, j) = match (parts.next(), parts.next()) {
                (Some(a), Some(b)) => (
                    a.parse::<usize>()
                        .map_err(|_| CoreError::Dataset(format!("bad edge line: {line}")))?,
                    b.parse::<usize>()
                        .map_err(|_| CoreError::Dataset(format!("bad edge line: {line}")))?,
                ),
                _ => return Err(CoreError::Dataset(format!("bad edge line: {line}"))),
            };
            if i >= m || j >= m {
                return Err(CoreError::Dataset(format!(
                    "edge ({i}, {j}) out of range for m = {m}"
                )));
            }
            out_neighbors[j].push(i);
        }
        Self::from_adjacency_labeled(out_neighbors, format!("file({})", path.display()))
    }

    /// Exports the dense weight matrix as CSV, one row per line.
    pub fn write_weights_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for i in 0..self.m {
            let row: Vec<String> = (0..self.m)
                .map(|j| format!("{}", self.weights[i * self.m + j]))
                .collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| CoreError::io(path.display().to_string(), e))
    }
}

/// Generates one of the named topologies. `seed` only matters for the random
/// kinds, which retry (fresh draws, same seed lineage) until strongly
/// connected.
pub fn generate_graph(kind: GraphKind, m: usize, seed: u64) -> Result<DirectedNetwork> {
    if m < 2 {
        return Err(CoreError::TooFewAgents(m));
    }
    let label = kind.to_string();
    match kind {
        GraphKind::Ring => {
            let adj = (0..m).map(|i| vec![i, (i + 1) % m]).collect();
            DirectedNetwork::from_adjacency_labeled(adj, label)
        }
        GraphKind::Mesh => {
            let (rows, cols) = mesh_shape(m);
            let mut adj = vec![Vec::new(); m];
            for r in 0..rows {
                for c in 0..cols {
                    let i = r * cols + c;
                    adj[i].push(i);
                    if r > 0 {
                        adj[i].push((r - 1) * cols + c);
                    }
                    if r + 1 < rows {
                        adj[i].push((r + 1) * cols + c);
                    }
                    if c > 0 {
                        adj[i].push(r * cols + c - 1);
                    }
                    if c + 1 < cols {
                        adj[i].push(r * cols + c + 1);
                    }
                }
            }
            DirectedNetwork::from_adjacency_labeled(adj, label)
        }
        GraphKind::DirectedExponential => {
            let adj = (0..m)
                .map(|i| {
                    let mut outs = vec![i];
                    let mut step = 1usize;
                    while step < m {
                        outs.push((i + step) % m);
                        step *= 2;
                    }
                    outs
                })
                .collect();
            DirectedNetwork::from_adjacency_labeled(adj, label)
        }
        GraphKind::SymmetricExponential => {
            let adj = (0..m)
                .map(|i| {
                    let mut outs = vec![i];
                    let mut step = 1usize;
                    while step < m {
                        outs.push((i + step) % m);
                        outs.push((i + m - step % m) % m);
                        step *= 2;
                    }
                    outs
                })
                .collect();
            DirectedNetwork::from_adjacency_labeled(adj, label)
        }
        GraphKind::Full => {
            let adj = (0..m).map(|_| (0..m).collect()).collect();
            DirectedNetwork::from_adjacency_labeled(adj, label)
        }
        GraphKind::RandomStronglyConnected { ratio } => {
            check_ratio(ratio)?;
            retry_random(seed, &label, |rng| {
                (0..m)
                    .map(|i| {
                        let mut outs = vec![i];
                        for j in 0..m {
                            if j != i && rng.gen::<f64>() < ratio {
                                outs.push(j);
                            }
                        }
                        outs
                    })
                    .collect()
            })
        }
        GraphKind::RandomUndirected { ratio } => {
            check_ratio(ratio)?;
            retry_random(seed, &label, |rng| {
                let mut adj: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
                for i in 0..m {
                    for j in (i + 1)..m {
                        if rng.gen::<f64>() < ratio {
                            adj[i].push(j);
                            adj[j].push(i);
                        }
                    }
                }
                adj
            })
        }
        GraphKind::RandomRegular { out_degree } => {
            if out_degree == 0 || out_degree >= m {
                return Err(CoreError::Config(format!(
                    "out_degree must lie in 1..{m}, got {out_degree}"
                )));
            }
            retry_random(seed, &label, |rng| {
                (0..m)
                    .map(|i| {
                        let mut others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
                        others.shuffle(rng);
                        others.truncate(out_degree);
                        others.push(i);
                        others
                    })
                    .collect()
            })
        }
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(CoreError::Config(format!(
            "connectivity ratio must lie in (0,1], got {ratio}"
        )));
    }
    Ok(())
}

fn retry_random(
    seed: u64,
    label: &str,
    mut draw: impl FnMut(&mut rand_chacha::ChaCha8Rng) -> Vec<Vec<usize>>,
) -> Result<DirectedNetwork> {
    let mut rng = rng::stream(seed, 0, 0, Purpose::Graph);
    for _ in 0..RANDOM_GRAPH_RETRIES {
        let adj = draw(&mut rng);
        if check_strong_connectivity(&adj) {
            return DirectedNetwork::from_adjacency_labeled(adj, label.to_string());
        }
    }
    Err(CoreError::GenerationRetriesExhausted(RANDOM_GRAPH_RETRIES))
}

/// Largest divisor pair `(rows, cols)` with `rows <= cols`; primes collapse
/// to a path.
fn mesh_shape(m: usize) -> (usize, usize) {
    let mut rows = 1;
    let mut d = 1;
    while d * d <= m {
        if m.is_multiple_of(d) {
            rows = d;
        }
        d += 1;
    }
    (rows, m / rows)
}

/// Uniform out-degree weights: `a_ji = 1 / |N_i^out|` for `j` in `N_i^out`.
/// Returns the row-major matrix with `a[i*m + j]` the weight on `j -> i`.
pub fn build_column_stochastic_weights(out_neighbors: &[Vec<usize>]) -> Result<Vec<f64>> {
    let m = out_neighbors.len();
    if m < 2 {
        return Err(CoreError::TooFewAgents(m));
    }
    for (i, outs) in out_neighbors.iter().enumerate() {
        if !outs.contains(&i) {
            return Err(CoreError::MissingSelfLoop(i));
        }
    }
    if !check_strong_connectivity(out_neighbors) {
        return Err(CoreError::NotStronglyConnected);
    }
    let mut weights = vec![0.0; m * m];
    for (j, outs) in out_neighbors.iter().enumerate() {
        let share = 1.0 / outs.len() as f64;
        for &i in outs {
            weights[i * m + j] = share;
        }
    }
    Ok(weights)
}

/// Reachability in both the graph and its transpose from agent 0.
pub fn check_strong_connectivity(out_neighbors: &[Vec<usize>]) -> bool {
    let m = out_neighbors.len();
    if m == 0 {
        return false;
    }
    let forward = |i: usize| out_neighbors[i].iter().copied();
    let reach_fwd = bfs_count(m, |i| forward(i).collect::<Vec<_>>());
    let reach_bwd = bfs_count(m, |i| {
        (0..m)
            .filter(|&j| out_neighbors[j].contains(&i))
            .collect::<Vec<_>>()
    });
    reach_fwd == m && reach_bwd == m
}

fn bfs_count(m: usize, neighbors: impl Fn(usize) -> Vec<usize>) -> usize {
    let mut seen = vec![false; m];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for j in neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count
}

/// Power iteration for the Perron vector of a column-stochastic matrix.
///
/// Starts from the uniform vector, renormalizes by the entry sum each step
/// (the sum is preserved up to rounding anyway), and stops when successive
/// iterates differ by less than `tol` in max-norm. Non-convergence within
/// the cap signals a non-primitive matrix.
pub fn perron_vector(weights: &[f64], m: usize, tol: f64) -> Result<Vec<f64>> {
    assert_eq!(weights.len(), m * m);
    let cap = (10.0 * m as f64 * (m as f64).ln()).ceil() as usize + 1000;
    let mut pi = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    for _ in 0..cap {
        linalg::mat_vec(weights, m, m, &pi, &mut next);
        let sum: f64 = next.iter().sum();
        for v in next.iter_mut() {
            *v /= sum;
        }
        let diff = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if diff < tol {
            for (agent, &value) in pi.iter().enumerate() {
                if value <= 1e-12 {
                    return Err(CoreError::DegeneratePerronVector { agent, value });
                }
            }
            return Ok(pi);
        }
    }
    Err(CoreError::PowerIterationDiverged(cap))
}

fn spectral_bundle(weights: &[f64], m: usize, pi: Vec<f64>) -> Result<SpectralBundle> {
    let mut a_infinity = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            a_infinity[i * m + j] = pi[i];
        }
    }
    let sigma = sigma_a(weights, &pi)?;
    let pi_max = pi.iter().cloned().fold(f64::MIN, f64::max);
    let pi_min = pi.iter().cloned().fold(f64::MAX, f64::min);
    Ok(SpectralBundle {
        pi,
        a_infinity,
        sigma_a: sigma,
        pi_max,
        pi_min,
        theta_ratio: pi_max / pi_min,
    })
}

/// `sigma_a = ||A - A_inf||_pi`. Errors when the result reaches 1, which
/// contradicts primitivity.
pub fn sigma_a(weights: &[f64], pi: &[f64]) -> Result<f64> {
    let m = pi.len();
    assert_eq!(weights.len(), m * m);
    let mut deviation = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            deviation[i * m + j] = weights[i * m + j] - pi[i];
        }
    }
    let sigma = pi_norm_mat(&deviation, pi)?;
    if sigma >= 1.0 - 1e-9 {
        return Err(CoreError::SigmaOutOfRange(sigma));
    }
    Ok(sigma)
}

/// Blockwise weighted vector norm: each agent's block is scaled by
/// `1 / sqrt(pi_i)` before taking the plain 2-norm. The length must be a
/// multiple of `pi.len()`.
pub fn pi_norm_vec(b: &[f64], pi: &[f64]) -> Result<f64> {
    let m = pi.len();
    if m == 0 || !b.len().is_multiple_of(m) {
        return Err(CoreError::DimensionMismatch {
            expected: m,
            actual: b.len(),
        });
    }
    let n = b.len() / m;
    let mut acc = 0.0;
    for i in 0..m {
        let scale = 1.0 / pi[i];
        for v in &b[i * n..(i + 1) * n] {
            acc += v * v * scale;
        }
    }
    Ok(acc.sqrt())
}

/// Weighted matrix norm `||diag(sqrt(pi))^{-1} B diag(sqrt(pi))||_2`
/// (spectral norm of the conjugated matrix, via power iteration on `C^T C`).
pub fn pi_norm_mat(b: &[f64], pi: &[f64]) -> Result<f64> {
    let m = pi.len();
    if b.len() != m * m {
        return Err(CoreError::DimensionMismatch {
            expected: m * m,
            actual: b.len(),
        });
    }
    let sqrt_pi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let mut conj = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            conj[i * m + j] = b[i * m + j] * sqrt_pi[j] / sqrt_pi[i];
        }
    }
    Ok(spectral_norm(&conj, m))
}

/// Largest singular value by power iteration on `C^T C` with a fixed seeded
/// start. The Rayleigh quotient is nondecreasing for a PSD operator, so the
/// stopping rule watches its increments.
fn spectral_norm(c: &[f64], m: usize) -> f64 {
    if c.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let mut rng = rng::stream(0x5EED_CAFE, 0, 0, Purpose::Graph);
    let mut x: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() + 0.1).collect();
    let norm = linalg::norm2(&x);
    x.iter_mut().for_each(|v| *v /= norm);
    let mut cx = vec![0.0; m];
    let mut ctcx = vec![0.0; m];
    let mut lambda_prev = 0.0;
    for _ in 0..100_000 {
        linalg::mat_vec(c, m, m, &x, &mut cx);
        // C^T y without materializing the transpose.
        for (j, slot) in ctcx.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..m {
                acc += c[i * m + j] * cx[i];
            }
            *slot = acc;
        }
        let lambda = linalg::dot(&cx, &cx);
        let norm = linalg::norm2(&ctcx);
        if norm == 0.0 {
            return 0.0;
        }
        for (xi, yi) in x.iter_mut().zip(&ctcx) {
            *xi = yi / norm;
        }
        if (lambda - lambda_prev).abs() <= 1e-15 * lambda.max(1e-300) {
            return lambda.sqrt();
        }
        lambda_prev = lambda;
    }
    lambda_prev.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(m: usize) -> DirectedNetwork {
        generate_graph(GraphKind::Ring, m, 0).unwrap()
    }

    #[test]
    fn ring3_weights_match_uniform_split() {
        let net = ring(3);
        assert_eq!(net.out_neighbors(0), &[0, 1]);
        // Column 0 is [1/2, 1/2, 0]^T.
        assert_eq!(net.weight(0, 0), 0.5);
        assert_eq!(net.weight(1, 0), 0.5);
        assert_eq!(net.weight(2, 0), 0.0);
    }

    #[test]
    fn full4_columns_are_uniform() {
        let net = generate_graph(GraphKind::Full, 4, 0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(net.weight(i, j), 0.25);
            }
        }
    }

    #[test]
    fn exponential8_out_neighbors_and_column_sums() {
        let net = generate_graph(GraphKind::DirectedExponential, 8, 0).unwrap();
        assert_eq!(net.out_neighbors(0), &[0, 1, 2, 4]);
        for j in 0..8 {
            let sum: f64 = (0..8).map(|i| net.weight(i, j)).sum();
            assert!((sum - 1.0).abs() < 1e-12, "column {j} sums to {sum}");
        }
    }

    #[test]
    fn single_agent_rejected() {
        assert!(matches!(
            build_column_stochastic_weights(&[vec![0]]),
            Err(CoreError::TooFewAgents(1))
        ));
        assert!(matches!(
            generate_graph(GraphKind::Ring, 1, 0),
            Err(CoreError::TooFewAgents(1))
        ));
    }

    #[test]
    fn two_agent_bidirectional_is_uniform() {
        let w = build_column_stochastic_weights(&[vec![0, 1], vec![0, 1]]).unwrap();
        assert_eq!(w, vec![0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn missing_self_loop_rejected() {
        let adj = vec![vec![1], vec![0, 1]];
        assert!(matches!(
            build_column_stochastic_weights(&adj),
            Err(CoreError::MissingSelfLoop(0))
        ));
    }

    #[test]
    fn strong_connectivity_cases() {
        // 3-cycle.
        assert!(check_strong_connectivity(&[
            vec![0, 1],
            vec![1, 2],
            vec![0, 2]
        ]));
        // Two disjoint loops.
        assert!(!check_strong_connectivity(&[
            vec![0, 1],
            vec![0, 1],
            vec![2, 3],
            vec![2, 3],
        ]));
        // Star pointing outward only.
        assert!(!check_strong_connectivity(&[
            vec![0, 1, 2, 3],
            vec![1],
            vec![2],
            vec![3],
        ]));
    }

    #[test]
    fn perron_of_circulant_ring_is_uniform() {
        let net = ring(3);
        for &p in &net.spectral().pi {
            assert!((p - 1.0 / 3.0).abs() < 1e-10);
        }
        assert!((net.spectral().theta_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn perron_rejects_reducible_input() {
        // Column-stochastic but not strongly connected: pi -> (1, 0).
        let weights = vec![1.0, 0.5, 0.0, 0.5];
        match perron_vector(&weights, 2, 1e-12) {
            Err(CoreError::DegeneratePerronVector { agent: 1, .. }) => {}
            other => panic!("expected degenerate Perron error, got {other:?}"),
        }
    }

    #[test]
    fn pi_norm_uniform_scales_by_sqrt_m() {
        let pi = vec![0.25; 4];
        let b = vec![1.0, -2.0, 3.0, 0.5];
        let expected = 2.0 * linalg::norm2(&b);
        assert!((pi_norm_vec(&b, &pi).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn pi_norm_vec_rejects_bad_length() {
        assert!(pi_norm_vec(&[1.0, 2.0, 3.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn pi_norm_of_identity_is_one() {
        let pi = vec![0.6, 0.3, 0.1];
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        assert!((pi_norm_mat(&eye, &pi).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sigma_of_ring3_is_half() {
        // Circulant, hence normal: the deviation's largest singular value is
        // the second-largest eigenvalue modulus |(1 + omega)/2| = 1/2.
        let net = ring(3);
        assert!((net.spectral().sigma_a - 0.5).abs() < 1e-9);
    }

    #[test]
    fn sigma_of_full_and_bidirectional_pair_is_zero() {
        let full = generate_graph(GraphKind::Full, 4, 0).unwrap();
        assert!(full.spectral().sigma_a.abs() < 1e-12);
        let pair = DirectedNetwork::from_adjacency(vec![vec![0, 1], vec![0, 1]]).unwrap();
        assert!(pair.spectral().sigma_a.abs() < 1e-12);
    }

    #[test]
    fn random_generators_yield_valid_networks() {
        for kind in [
            GraphKind::RandomStronglyConnected { ratio: 0.3 },
            GraphKind::RandomUndirected { ratio: 0.4 },
            GraphKind::RandomRegular { out_degree: 3 },
        ] {
            let net = generate_graph(kind, 12, 77).unwrap();
            for j in 0..12 {
                let sum: f64 = (0..12).map(|i| net.weight(i, j)).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
            let pi_sum: f64 = net.spectral().pi.iter().sum();
            assert!((pi_sum - 1.0).abs() < 1e-10);
            assert!(net.spectral().pi.iter().all(|&p| p > 0.0));
            assert!(net.spectral().sigma_a > 0.0 && net.spectral().sigma_a < 1.0);
        }
    }

    #[test]
    fn regular_generator_has_exact_out_degree() {
        let net = generate_graph(GraphKind::RandomRegular { out_degree: 4 }, 10, 5).unwrap();
        for i in 0..10 {
            assert_eq!(net.out_neighbors(i).len(), 5, "agent {i} (4 + self-loop)");
        }
    }

    #[test]
    fn mixing_contraction_holds_on_random_vectors() {
        use rand::Rng;
        let nets = [
            ring(5),
            generate_graph(GraphKind::DirectedExponential, 8, 0).unwrap(),
            generate_graph(GraphKind::Mesh, 6, 0).unwrap(),
            generate_graph(GraphKind::RandomStronglyConnected { ratio: 0.35 }, 9, 3).unwrap(),
        ];
        let n = 3;
        let mut rng = rng::stream(41, 0, 0, Purpose::Graph);
        for net in &nets {
            let m = net.agents();
            let s = net.spectral();
            for _ in 0..25 {
                let x: Vec<f64> = (0..m * n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                // A_inf x blockwise: block i = pi_i * sum_j x_j.
                let mut block_sum = vec![0.0; n];
                for j in 0..m {
                    linalg::axpy(1.0, &x[j * n..(j + 1) * n], &mut block_sum);
                }
                let mut ainf_x = vec![0.0; m * n];
                for i in 0..m {
                    for d in 0..n {
                        ainf_x[i * n + d] = s.pi[i] * block_sum[d];
                    }
                }
                let mut ax = vec![0.0; m * n];
                net.mix_into(&x, &mut ax, n);
                let lhs = pi_norm_vec(&linalg::sub(&ax, &ainf_x), &s.pi).unwrap();
                let rhs = s.sigma_a * pi_norm_vec(&linalg::sub(&x, &ainf_x), &s.pi).unwrap();
                assert!(lhs <= rhs + 1e-9, "{}: {lhs} > {rhs}", net.kind_label());
            }
        }
    }

    #[test]
    fn push_sum_decay_and_mass_conservation() {
        let nets = [
            ring(6),
            generate_graph(GraphKind::Mesh, 6, 0).unwrap(),
            generate_graph(GraphKind::RandomStronglyConnected { ratio: 0.3 }, 10, 9).unwrap(),
        ];
        for net in &nets {
            let m = net.agents();
            let s = net.spectral();
            let t_const = s.t_const();
            let mut y = vec![1.0; m];
            let mut next = vec![0.0; m];
            for k in 0..=200u32 {
                let bound = t_const * s.sigma_a.powi(k as i32) + 1e-9;
                let dev = y
                    .iter()
                    .zip(&s.pi)
                    .map(|(yi, pi)| (yi - m as f64 * pi).abs())
                    .fold(0.0, f64::max);
                assert!(dev <= bound, "{}: k={k} {dev} > {bound}", net.kind_label());
                let mass: f64 = y.iter().sum();
                assert!((mass - m as f64).abs() < 1e-12);
                net.mix_scalar_into(&y, &mut next);
                std::mem::swap(&mut y, &mut next);
            }
        }
    }

    #[test]
    fn edge_list_roundtrip_preserves_weights() {
        let dir = std::env::temp_dir().join("push_lsvrg_netgraph_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.edges");
        let net = generate_graph(GraphKind::RandomStronglyConnected { ratio: 0.4 }, 7, 13).unwrap();
        net.write_edge_list(&path).unwrap();
        let back = DirectedNetwork::read_edge_list(&path).unwrap();
        assert_eq!(net.weights(), back.weights());
        std::fs::remove_file(&path).ok();
    }
}
