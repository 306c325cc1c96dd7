//! The round-synchronous multi-agent algorithms behind one runner.
//!
//! Every iteration follows the same skeleton, pinned in this order for all
//! agents: (1) draw the component index and form the stochastic gradient
//! estimate from round-k state, (2) draw the trigger coin and refresh the
//! anchor when it fires, (3) gradient-descent mixing of `x`, (4) push-sum
//! weight mixing of `y`, (5) the de-biasing ratio `z = x / y`, (6) the
//! gradient-tracking update of `v`. The mixing sums read only round-k
//! values (double buffering), so intra-round agent order never matters.
//!
//! The algorithms differ only in how the per-agent estimate `g_{k+1}` is
//! produced: the loopless variance-reduced estimator with per-agent trigger
//! probabilities, a single sampled component (no variance reduction), the
//! exact local batch, or the table-based variance-reduced estimator.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::harness::{self, MetricsSink, ReferenceSolution, RunMeta, Trace, TraceRecord};
use crate::linalg;
use crate::netgraph::DirectedNetwork;
use crate::objective::{self, Dataset, ModelKind, Objective};
use crate::rng::{self, Purpose};

/// Push-sum weights this small abort the run; they cannot occur while the
/// module invariants hold and only guard numeric pathology.
const Y_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    PushLsvrgUp,
    SAddopt,
    Addopt,
    PushSaga,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::PushLsvrgUp => "push_lsvrg_up",
            Algorithm::SAddopt => "s_addopt",
            Algorithm::Addopt => "addopt",
            Algorithm::PushSaga => "push_saga",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "push_lsvrg_up" => Ok(Algorithm::PushLsvrgUp),
            "s_addopt" => Ok(Algorithm::SAddopt),
            "addopt" => Ok(Algorithm::Addopt),
            "push_saga" => Ok(Algorithm::PushSaga),
            other => Err(CoreError::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Runner configuration. Mini-batches are fixed at one sample.
#[derive(Debug, Clone)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    /// Per-agent anchor-refresh probabilities, length m. Ignored by the
    /// baselines.
    pub trigger_probs: Vec<f64>,
    pub seed: u64,
    pub max_iters: u64,
    /// Early stop once the residual falls to this level (requires a
    /// reference solution).
    pub stop_residual: Option<f64>,
    pub init: InitKind,
}

impl AlgoConfig {
    pub const BATCH_SIZE: usize = 1;

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(CoreError::NonPositiveParameter {
                name: "alpha",
                value: self.alpha,
            });
        }
        if self.trigger_probs.len() != m {
            return Err(CoreError::DimensionMismatch {
                expected: m,
                actual: self.trigger_probs.len(),
            });
        }
        for &p in &self.trigger_probs {
            if !(p > 0.0 && p <= 1.0) {
                return Err(CoreError::InvalidTriggerProbability(p));
            }
        }
        Ok(())
    }
}

/// How `z_0 = x_0` is chosen. The rest of the initialization line is fixed:
/// `w_0 = z_0`, `v_0 = g_0 = grad f_i(z_0)`, `y_0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitKind {
    #[default]
    SeededNormal,
    Zero,
}

/// Per-agent state, stacked agent-major (block `i` is `[i*n, (i+1)*n)`).
#[derive(Debug, Clone)]
pub struct SystemState {
    pub m: usize,
    pub n: usize,
    /// Auxiliary optimization state.
    pub x: Vec<f64>,
    /// Push-sum weights (positive scalars summing to m).
    pub y: Vec<f64>,
    /// Decision estimates `z_i = x_i / y_i`.
    pub z: Vec<f64>,
    /// Gradient trackers.
    pub v: Vec<f64>,
    /// Anchor points.
    pub w: Vec<f64>,
    /// Cached local batch gradients at the anchors.
    pub anchor_grad: Vec<f64>,
    /// Stochastic gradients of the previous round.
    pub g: Vec<f64>,
    pub iter: u64,
    /// Cumulative component-gradient evaluations per agent.
    pub evals: Vec<u64>,
    scratch: Scratch,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    x_next: Vec<f64>,
    y_next: Vec<f64>,
    v_next: Vec<f64>,
    g_next: Vec<f64>,
    grad_a: Vec<f64>,
}

impl SystemState {
    /// Algorithm initialization: `z_0 = x_0` (seeded normal by default),
    /// `w_0 = z_0`, `v_0 = g_0 = grad f_i(z_0)` (one local batch pass per
    /// agent, charged), `y_0 = 1`.
    pub fn init(obj: &dyn Objective, seed: u64, init: InitKind) -> SystemState {
        let m = obj.agents();
        let n = obj.dim();
        let mut x = vec![0.0; m * n];
        if init == InitKind::SeededNormal {
            for i in 0..m {
                let mut stream = rng::stream(seed, i, 0, Purpose::Init);
                rng::fill_standard_normal(&mut stream, &mut x[i * n..(i + 1) * n]);
            }
        }
        let mut g = vec![0.0; m * n];
        let mut evals = vec![0u64; m];
        for i in 0..m {
            objective::batch_gradient(obj, i, &x[i * n..(i + 1) * n], &mut g[i * n..(i + 1) * n]);
            evals[i] = obj.samples(i) as u64;
        }
        SystemState {
            m,
            n,
            z: x.clone(),
            w: x.clone(),
            v: g.clone(),
            anchor_grad: g.clone(),
            g,
            x,
            y: vec![1.0; m],
            iter: 0,
            evals,
            scratch: Scratch::sized(m, n),
        }
    }

    pub fn agent_block(buf: &[f64], i: usize, n: usize) -> &[f64] {
        &buf[i * n..(i + 1) * n]
    }

    pub fn total_evals(&self) -> u64 {
        self.evals.iter().sum()
    }

    /// Effective passes over the data: total evaluations over the total
    /// sample count.
    pub fn epoch(&self, total_samples: u64) -> f64 {
        self.total_evals() as f64 / total_samples as f64
    }

    /// Documented text checkpoint; floats use shortest round-trip
    /// formatting so restore is bit-exact.
    pub fn write_checkpoint(&self, path: &std::path::Path) -> Result<()> {
        let mut text = String::from("push-lsvrg-state v1\n");
        text.push_str(&format!("m {}\nn {}\niter {}\n", self.m, self.n, self.iter));
        let join_u64 = |v: &[u64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        text.push_str(&format!("evals {}\n", join_u64(&self.evals)));
        for (name, buf) in [
            ("x", &self.x),
            ("y", &self.y),
            ("z", &self.z),
            ("v", &self.v),
            ("w", &self.w),
            ("anchor", &self.anchor_grad),
            ("g", &self.g),
        ] {
            text.push_str(&format!("{name} {}\n", join(buf)));
        }
        std::fs::write(path, text).map_err(|e| CoreError::io(path.display().to_string(), e))
    }

    pub fn read_checkpoint(path: &std::path::Path) -> Result<SystemState> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let bad = || CoreError::Dataset(format!("malformed checkpoint {}", path.display()));
        let mut lines = text.lines();
        if lines.next() != Some("push-lsvrg-state v1") {
            return Err(bad());
        }
        let mut field = |prefix: &str| -> Result<String> {
            lines
                .next()
                .and_then(|l| l.strip_prefix(prefix))
                .map(str::to_string)
                .ok_or_else(bad)
        };
        let m: usize = field("m ")?.parse().map_err(|_| bad())?;
        let n: usize = field("n ")?.parse().map_err(|_| bad())?;
        let iter: u64 = field("iter ")?.parse().map_err(|_| bad())?;
        let evals: Vec<u64> = field("evals ")?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let mut take = |prefix: &str, len: usize| -> Result<Vec<f64>> {
            let raw = field(prefix)?;
            let vals: Vec<f64> = raw
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            if vals.len() != len {
                return Err(bad());
            }
            Ok(vals)
        };
        let x = take("x ", m * n)?;
        let y = take("y ", m)?;
        let z = take("z ", m * n)?;
        let v = take("v ", m * n)?;
        let w = take("w ", m * n)?;
        let anchor_grad = take("anchor ", m * n)?;
        let g = take("g ", m * n)?;
        if evals.len() != m {
            return Err(bad());
        }
        Ok(SystemState {
            m,
            n,
            x,
            y,
            z,
            v,
            w,
            anchor_grad,
            g,
            iter,
            evals,
            scratch: Scratch::sized(m, n),
        })
    }
}

impl Scratch {
    fn sized(m: usize, n: usize) -> Scratch {
        Scratch {
            x_next: vec![0.0; m * n],
            y_next: vec![0.0; m],
            v_next: vec![0.0; m * n],
            g_next: vec![0.0; m * n],
            grad_a: vec![0.0; n],
        }
    }
}

/// Per-agent gradient table for the table-based estimator: `q_i` stored
/// component gradients plus their running mean, i.e. `q_i * n` reals per
/// agent where the loopless estimator stores only an O(n) anchor.
#[derive(Debug, Clone)]
pub struct SagaTable {
    tables: Vec<Vec<f64>>,
    means: Vec<f64>,
    n: usize,
}

impl SagaTable {
    /// Fills every slot with the component gradient at the initial point.
    /// This is the same local pass that initializes `g_0 = v_0`, so no
    /// additional evaluations are charged; the mean reproduces the batch
    /// gradient bit-for-bit.
    pub fn init(obj: &dyn Objective, state: &SystemState) -> SagaTable {
        let m = obj.agents();
        let n = obj.dim();
        let mut tables = Vec::with_capacity(m);
        let mut means = vec![0.0; m * n];
        for i in 0..m {
            let q = obj.samples(i);
            let mut table = vec![0.0; q * n];
            let z_i = SystemState::agent_block(&state.z, i, n);
            for j in 0..q {
                obj.component_grad(i, j, z_i, &mut table[j * n..(j + 1) * n]);
            }
            let mean = &mut means[i * n..(i + 1) * n];
            for j in 0..q {
                linalg::axpy(1.0, &table[j * n..(j + 1) * n], mean);
            }
            let inv = 1.0 / q as f64;
            for v in mean.iter_mut() {
                *v *= inv;
            }
            tables.push(table);
        }
        SagaTable { tables, means, n }
    }

    /// Stored gradient values for one agent: `q_i * n` reals.
    pub fn values_per_agent(&self, agent: usize) -> usize {
        self.tables[agent].len()
    }

    pub fn mean(&self, agent: usize) -> &[f64] {
        &self.means[agent * self.n..(agent + 1) * self.n]
    }

    pub fn slot(&self, agent: usize, sample: usize) -> &[f64] {
        &self.tables[agent][sample * self.n..(sample + 1) * self.n]
    }
}

/// The variance-reduced estimate
/// `g = grad f_{i,s}(z) - grad f_{i,s}(w) + anchor` for a forced component
/// index; the enumeration oracle in the tests averages this over all `s`.
pub fn lsvrg_estimate_for_sample(
    obj: &dyn Objective,
    agent: usize,
    sample: usize,
    z_i: &[f64],
    w_i: &[f64],
    anchor_grad_i: &[f64],
    out: &mut [f64],
) {
    let n = obj.dim();
    let mut at_z = vec![0.0; n];
    let mut at_w = vec![0.0; n];
    obj.component_grad(agent, sample, z_i, &mut at_z);
    obj.component_grad(agent, sample, w_i, &mut at_w);
    for d in 0..n {
        out[d] = at_z[d] - at_w[d] + anchor_grad_i[d];
    }
}

/// Draws the component index from the agent's stream and forms the
/// variance-reduced estimate. Exactly two component evaluations are
/// charged; the anchor term is served from the cache. With a single local
/// sample the correction cancels identically, so only the fresh gradient
/// is evaluated (one charge) and the returned value equals the local batch
/// gradient bit-for-bit.
pub fn lsvrg_gradient_estimate(
    obj: &dyn Objective,
    agent: usize,
    z_i: &[f64],
    w_i: &[f64],
    anchor_grad_i: &[f64],
    stream: &mut ChaCha8Rng,
    out: &mut [f64],
) -> Result<(usize, u64)> {
    let q = obj.samples(agent);
    if q == 0 {
        return Err(CoreError::EmptySampleSet { agent });
    }
    let s = stream.gen_range(0..q);
    if q == 1 {
        obj.component_grad(agent, s, z_i, out);
        return Ok((s, 1));
    }
    lsvrg_estimate_for_sample(obj, agent, s, z_i, w_i, anchor_grad_i, out);
    Ok((s, 2))
}

/// The probabilistic anchor refresh: with probability `p_i` the anchor
/// moves to the current estimate and its batch gradient is recomputed
/// (`q_i` evaluations charged); otherwise nothing changes.
pub fn trigger_update(
    obj: &dyn Objective,
    agent: usize,
    z_i: &[f64],
    w_i: &mut [f64],
    anchor_grad_i: &mut [f64],
    p_i: f64,
    stream: &mut ChaCha8Rng,
) -> Result<(bool, u64)> {
    if !(p_i > 0.0 && p_i <= 1.0) {
        return Err(CoreError::InvalidTriggerProbability(p_i));
    }
    let fired = stream.gen::<f64>() < p_i;
    if fired {
        w_i.copy_from_slice(z_i);
        objective::batch_gradient(obj, agent, z_i, anchor_grad_i);
        Ok((true, obj.samples(agent) as u64))
    } else {
        Ok((false, 0))
    }
}

/// One round of the variance-reduced method with uncoordinated triggers.
pub fn push_lsvrg_up_iteration(
    state: &mut SystemState,
    net: &DirectedNetwork,
    obj: &dyn Objective,
    alpha: f64,
    trigger_probs: &[f64],
    seed: u64,
) -> Result<()> {
    let n = state.n;
    let k = state.iter;
    let mut g_next = std::mem::take(&mut state.scratch.g_next);
    for i in 0..state.m {
        let mut sample_stream = rng::stream(seed, i, k, Purpose::Sample);
        let (_, charged) = lsvrg_gradient_estimate(
            obj,
            i,
            &state.z[i * n..(i + 1) * n],
            &state.w[i * n..(i + 1) * n],
            &state.anchor_grad[i * n..(i + 1) * n],
            &mut sample_stream,
            &mut g_next[i * n..(i + 1) * n],
        )?;
        state.evals[i] += charged;

        let mut trigger_stream = rng::stream(seed, i, k, Purpose::Trigger);
        if obj.samples(i) == 1 {
            // Degenerate case: the estimate above IS the batch gradient at
            // the current point, so a firing trigger reuses it instead of
            // recomputing.
            let p = trigger_probs[i];
            if !(p > 0.0 && p <= 1.0) {
                return Err(CoreError::InvalidTriggerProbability(p));
            }
            if trigger_stream.gen::<f64>() < p {
                let (w_i, z_i) = split_blocks(&mut state.w, &state.z, i, n);
                w_i.copy_from_slice(z_i);
                state.anchor_grad[i * n..(i + 1) * n].copy_from_slice(&g_next[i * n..(i + 1) * n]);
            }
        } else {
            let (w_i, z_i) = split_blocks(&mut state.w, &state.z, i, n);
            let (_, charged) = trigger_update(
                obj,
                i,
                z_i,
                w_i,
                &mut state.anchor_grad[i * n..(i + 1) * n],
                trigger_probs[i],
                &mut trigger_stream,
            )?;
            state.evals[i] += charged;
        }
    }
    state.scratch.g_next = g_next;
    commit_round(state, net, alpha)
}

/// One round of the noise-based baseline: the gradient term is a single
/// uniformly sampled component at the current estimate (unbiased, variance
/// not reduced). Same stream discipline as the variance-reduced method.
pub fn s_addopt_iteration(
    state: &mut SystemState,
    net: &DirectedNetwork,
    obj: &dyn Objective,
    alpha: f64,
    seed: u64,
) -> Result<()> {
    let n = state.n;
    let k = state.iter;
    let mut g_next = std::mem::take(&mut state.scratch.g_next);
    for i in 0..state.m {
        let q = obj.samples(i);
        if q == 0 {
            return Err(CoreError::EmptySampleSet { agent: i });
        }
        let mut stream = rng::stream(seed, i, k, Purpose::Sample);
        let s = stream.gen_range(0..q);
        obj.component_grad(
            i,
            s,
            &state.z[i * n..(i + 1) * n],
            &mut g_next[i * n..(i + 1) * n],
        );
        state.evals[i] += 1;
    }
    state.scratch.g_next = g_next;
    commit_round(state, net, alpha)
}

/// One round of the deterministic batch baseline.
pub fn addopt_iteration(
    state: &mut SystemState,
    net: &DirectedNetwork,
    obj: &dyn Objective,
    alpha: f64,
) -> Result<()> {
    let n = state.n;
    let mut g_next = std::mem::take(&mut state.scratch.g_next);
    for i in 0..state.m {
        objective::batch_gradient(
            obj,
            i,
            &state.z[i * n..(i + 1) * n],
            &mut g_next[i * n..(i + 1) * n],
        );
        state.evals[i] += obj.samples(i) as u64;
    }
    state.scratch.g_next = g_next;
    commit_round(state, net, alpha)
}

/// One round of the table-based variance-reduced baseline:
/// `g = grad f_{i,s}(z) - table[i][s] + mean(table[i])`, after which the
/// slot takes the fresh gradient and the running mean absorbs the swap.
pub fn push_saga_iteration(
    state: &mut SystemState,
    table: &mut SagaTable,
    net: &DirectedNetwork,
    obj: &dyn Objective,
    alpha: f64,
    seed: u64,
) -> Result<()> {
    let n = state.n;
    let k = state.iter;
    let mut g_next = std::mem::take(&mut state.scratch.g_next);
    let mut fresh = std::mem::take(&mut state.scratch.grad_a);
    for i in 0..state.m {
        let q = obj.samples(i);
        if q == 0 {
            return Err(CoreError::EmptySampleSet { agent: i });
        }
        let mut stream = rng::stream(seed, i, k, Purpose::Sample);
        let s = stream.gen_range(0..q);
        obj.component_grad(i, s, &state.z[i * n..(i + 1) * n], &mut fresh);
        state.evals[i] += 1;
        let slot = &mut table.tables[i][s * n..(s + 1) * n];
        let mean = &mut table.means[i * n..(i + 1) * n];
        let out = &mut g_next[i * n..(i + 1) * n];
        let inv_q = 1.0 / q as f64;
        for d in 0..n {
            out[d] = fresh[d] - slot[d] + mean[d];
            mean[d] += (fresh[d] - slot[d]) * inv_q;
            slot[d] = fresh[d];
        }
    }
    state.scratch.grad_a = fresh;
    state.scratch.g_next = g_next;
    commit_round(state, net, alpha)
}

fn split_blocks<'a>(
    target: &'a mut [f64],
    source: &'a [f64],
    i: usize,
    n: usize,
) -> (&'a mut [f64], &'a [f64]) {
    (&mut target[i * n..(i + 1) * n], &source[i * n..(i + 1) * n])
}

/// The mixing half of the round: gradient descent on x, push-sum on y,
/// the de-biasing ratio, and the tracking update, reading only
/// round-k values. Consumes `scratch.g_next` as the new `g`.
fn commit_round(state: &mut SystemState, net: &DirectedNetwork, alpha: f64) -> Result<()> {
    let n = state.n;
    let mut x_next = std::mem::take(&mut state.scratch.x_next);
    let mut y_next = std::mem::take(&mut state.scratch.y_next);
    let mut v_next = std::mem::take(&mut state.scratch.v_next);

    net.mix_into(&state.x, &mut x_next, n);
    linalg::axpy(-alpha, &state.v, &mut x_next);
    net.mix_scalar_into(&state.y, &mut y_next);
    for (i, &yi) in y_next.iter().enumerate() {
        if yi.is_nan() || yi <= Y_FLOOR {
            return Err(CoreError::PushSumCollapse {
                agent: i,
                iter: state.iter + 1,
                value: yi,
            });
        }
    }
    net.mix_into(&state.v, &mut v_next, n);
    for (i, &y_new) in y_next.iter().enumerate() {
        for d in 0..n {
            let at = i * n + d;
            state.z[at] = x_next[at] / y_new;
            v_next[at] += state.scratch.g_next[at] - state.g[at];
        }
    }
    std::mem::swap(&mut state.x, &mut x_next);
    std::mem::swap(&mut state.y, &mut y_next);
    std::mem::swap(&mut state.v, &mut v_next);
    std::mem::swap(&mut state.g, &mut state.scratch.g_next);
    state.scratch.x_next = x_next;
    state.scratch.y_next = y_next;
    state.scratch.v_next = v_next;
    state.iter += 1;
    Ok(())
}

/// Classification datasets evaluated along the trace.
pub struct AccuracyEval<'a> {
    pub kind: ModelKind,
    pub train: &'a Dataset,
    pub test: &'a Dataset,
    /// Evaluate every this many iterations (plus the final row).
    pub every: u64,
}

/// Everything a run needs besides the algorithm configuration.
pub struct RunContext<'a> {
    pub network: &'a DirectedNetwork,
    pub objective: &'a dyn Objective,
    pub reference: Option<&'a ReferenceSolution>,
    pub accuracy: Option<AccuracyEval<'a>>,
    pub meta: RunMeta,
}

/// Runs one algorithm to the iteration cap or the residual threshold,
/// recording one trace row per iteration (including the initial state).
/// Identical configuration and seed reproduce the trace exactly; only the
/// wall-clock column varies between reruns.
pub fn run(
    cfg: &AlgoConfig,
    ctx: &RunContext,
    sink: Option<&mut dyn MetricsSink>,
) -> Result<Trace> {
    run_with_state(cfg, ctx, sink).map(|(trace, _)| trace)
}

/// [`run`], additionally handing back the final solver state (for
/// checkpointing).
pub fn run_with_state(
    cfg: &AlgoConfig,
    ctx: &RunContext,
    mut sink: Option<&mut dyn MetricsSink>,
) -> Result<(Trace, SystemState)> {
    let net = ctx.network;
    let obj = ctx.objective;
    if net.agents() != obj.agents() {
        return Err(CoreError::DimensionMismatch {
            expected: net.agents(),
            actual: obj.agents(),
        });
    }
    cfg.validate(net.agents())?;
    if cfg.stop_residual.is_some() && ctx.reference.is_none() {
        return Err(CoreError::MissingReference);
    }
    let total_samples = objective::total_samples(obj);
    let clock = Instant::now();
    let mut state = SystemState::init(obj, cfg.seed, cfg.init);
    let mut saga = match cfg.algorithm {
        Algorithm::PushSaga => Some(SagaTable::init(obj, &state)),
        _ => None,
    };
    let mut meta = ctx.meta.clone();
    meta.algorithm = cfg.algorithm.name().to_string();
    meta.alpha = cfg.alpha;
    meta.seed = cfg.seed;
    if meta.network.is_empty() {
        meta.network = format!("{}(m={})", net.kind_label(), net.agents());
    }
    if meta.objective.is_empty() {
        meta.objective = obj.describe();
    }

    let mut trace = Trace {
        meta: meta.clone(),
        records: Vec::new(),
    };
    let emit = |state: &SystemState,
                sink: &mut Option<&mut dyn MetricsSink>,
                trace: &mut Trace,
                res: Option<f64>,
                final_row: bool|
     -> Result<()> {
        let (mut train_acc, mut test_acc) = (None, None);
        if let Some(acc) = &ctx.accuracy {
            if final_row || state.iter.is_multiple_of(acc.every) {
                let mean = harness::mean_estimate(&state.z, state.m);
                train_acc = Some(objective::predict_accuracy(acc.kind, &mean, acc.train)?);
                test_acc = Some(objective::predict_accuracy(acc.kind, &mean, acc.test)?);
            }
        }
        let rec = TraceRecord {
            iter: state.iter,
            epoch: state.epoch(total_samples),
            agent_evals_total: state.total_evals(),
            residual: res,
            consensus_error: harness::consensus_error(&state.z, state.m),
            train_acc,
            test_acc,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        };
        if let Some(s) = sink.as_deref_mut() {
            s.record(&meta, &rec)?;
        }
        trace.records.push(rec);
        Ok(())
    };

    let residual_of = |state: &SystemState| {
        ctx.reference
            .map(|r| harness::residual(&state.z, &r.z_star))
    };
    emit(&state, &mut sink, &mut trace, residual_of(&state), false)?;
    for _ in 0..cfg.max_iters {
        match cfg.algorithm {
            Algorithm::PushLsvrgUp => push_lsvrg_up_iteration(
                &mut state,
                net,
                obj,
                cfg.alpha,
                &cfg.trigger_probs,
                cfg.seed,
            )?,
            Algorithm::SAddopt => s_addopt_iteration(&mut state, net, obj, cfg.alpha, cfg.seed)?,
            Algorithm::Addopt => addopt_iteration(&mut state, net, obj, cfg.alpha)?,
            Algorithm::PushSaga => push_saga_iteration(
                &mut state,
                saga.as_mut().expect("table initialized"),
                net,
                obj,
                cfg.alpha,
                cfg.seed,
            )?,
        }
        let res = residual_of(&state);
        let hit_threshold = matches!(
            (cfg.stop_residual, res),
            (Some(threshold), Some(value)) if value <= threshold
        );
        let stopping = hit_threshold || state.iter >= cfg.max_iters;
        emit(&state, &mut sink, &mut trace, res, stopping)?;
        if hit_threshold {
            break;
        }
    }
    Ok((trace, state))
}
