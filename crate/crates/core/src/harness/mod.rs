//! Reference solutions, metrics, trace comparison, and the experiment
//! pipelines for the two case studies.

mod experiment;
mod trace;

pub use experiment::{
    generate_blobs, load_dataset_file, reference_with_cache, resolve_alpha, resolve_trigger_probs,
    run_case_study, AlphaSpec, CaseStudy, CaseStudyConfig, ProbSpec,
};
pub use trace::{CsvSink, MetricsSink, RunMeta, Trace, TraceRecord, TRACE_HEADER};

use std::fs;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::linalg;
use crate::objective::{self, Objective, QuadraticObjective};

/// The centralized optimum used for every residual column.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub z_star: Vec<f64>,
    pub grad_norm_at_star: f64,
    pub solver_iterations: u64,
}

/// Full-gradient descent with step `1/L` until the global gradient norm
/// falls below `tol`. Strong convexity makes the optimum unique, so any
/// start works; iterations are capped by the conditioning estimate.
pub fn solve_reference(obj: &dyn Objective, tol: f64) -> Result<ReferenceSolution> {
    if tol <= 0.0 {
        return Err(CoreError::NonPositiveParameter {
            name: "tol",
            value: tol,
        });
    }
    let n = obj.dim();
    let step = 1.0 / obj.smoothness();
    let cond = obj.smoothness() / obj.strong_convexity();
    let mut z = vec![0.0; n];
    let mut grad = vec![0.0; n];
    objective::global_gradient(obj, &z, &mut grad);
    let g0 = linalg::norm2(&grad);
    if g0 <= tol {
        return Ok(ReferenceSolution {
            z_star: z,
            grad_norm_at_star: g0,
            solver_iterations: 0,
        });
    }
    let cap = (40.0 * cond * (g0 / tol).max(std::f64::consts::E).ln()).ceil() as u64 + 1000;
    for k in 1..=cap {
        linalg::axpy(-step, &grad, &mut z);
        objective::global_gradient(obj, &z, &mut grad);
        let g = linalg::norm2(&grad);
        if g <= tol {
            return Ok(ReferenceSolution {
                z_star: z,
                grad_norm_at_star: g,
                solver_iterations: k,
            });
        }
    }
    Err(CoreError::ReferenceSolverDiverged(cap as usize))
}

/// Wraps the closed-form minimizer of a diagonal quadratic as a reference
/// solution; the gradient-descent route stays available as the independent
/// cross-check.
pub fn reference_from_closed_form(obj: &QuadraticObjective) -> ReferenceSolution {
    let z_star = obj.minimizer();
    let mut grad = vec![0.0; obj.dim()];
    objective::global_gradient(obj, &z_star, &mut grad);
    ReferenceSolution {
        grad_norm_at_star: linalg::norm2(&grad),
        solver_iterations: 0,
        z_star,
    }
}

/// The optimality-gap metric: `(1/m) sum_i ||z_i - z*||_2`.
pub fn residual(z_all: &[f64], z_star: &[f64]) -> f64 {
    let n = z_star.len();
    assert!(n > 0 && z_all.len().is_multiple_of(n));
    let m = z_all.len() / n;
    let mut acc = 0.0;
    for i in 0..m {
        let block = &z_all[i * n..(i + 1) * n];
        let mut dist = 0.0;
        for (a, b) in block.iter().zip(z_star) {
            dist += (a - b) * (a - b);
        }
        acc += dist.sqrt();
    }
    acc / m as f64
}

/// Network disagreement in the plain 2-norm:
/// `|| z - 1 (x) z_bar ||_2` over the stacked agent blocks.
pub fn consensus_error(z_all: &[f64], m: usize) -> f64 {
    assert!(m > 0 && z_all.len().is_multiple_of(m));
    let n = z_all.len() / m;
    let mut mean = vec![0.0; n];
    for i in 0..m {
        linalg::axpy(1.0, &z_all[i * n..(i + 1) * n], &mut mean);
    }
    for v in mean.iter_mut() {
        *v /= m as f64;
    }
    let mut acc = 0.0;
    for i in 0..m {
        for (a, b) in z_all[i * n..(i + 1) * n].iter().zip(&mean) {
            acc += (a - b) * (a - b);
        }
    }
    acc.sqrt()
}

/// Mean of the stacked agent estimates, the vector accuracy is evaluated at.
pub fn mean_estimate(z_all: &[f64], m: usize) -> Vec<f64> {
    let n = z_all.len() / m;
    let mut mean = vec![0.0; n];
    for i in 0..m {
        linalg::axpy(1.0, &z_all[i * n..(i + 1) * n], &mut mean);
    }
    for v in mean.iter_mut() {
        *v /= m as f64;
    }
    mean
}

/// FNV-1a over the canonical text, used to key reference caches and config
/// hashes.
pub fn content_hash(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Writes the reference cache file. Layout: a version line, the content
/// key, the gradient norm, the iteration count, the dimension, then one
/// coordinate per line (shortest round-trip formatting, so reload is
/// bit-exact).
pub fn write_reference_cache(path: &Path, key: u64, reference: &ReferenceSolution) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CoreError::io(dir.display().to_string(), e))?;
        }
    }
    let mut text = String::from("push-lsvrg-ref v1\n");
    text.push_str(&format!("key {key:016x}\n"));
    text.push_str(&format!("grad_norm {}\n", reference.grad_norm_at_star));
    text.push_str(&format!("iterations {}\n", reference.solver_iterations));
    text.push_str(&format!("n {}\n", reference.z_star.len()));
    for v in &reference.z_star {
        text.push_str(&format!("{v}\n"));
    }
    fs::write(path, text).map_err(|e| CoreError::io(path.display().to_string(), e))
}

/// Loads a cached reference if the file exists and its key matches;
/// `Ok(None)` means "recompute".
pub fn read_reference_cache(path: &Path, key: u64) -> Result<Option<ReferenceSolution>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(CoreError::io(path.display().to_string(), e)),
    };
    let mut lines = text.lines();
    let bad = || CoreError::Dataset(format!("malformed reference cache {}", path.display()));
    if lines.next() != Some("push-lsvrg-ref v1") {
        return Err(bad());
    }
    let key_line = lines.next().ok_or_else(bad)?;
    let found = u64::from_str_radix(key_line.strip_prefix("key ").ok_or_else(bad)?, 16)
        .map_err(|_| bad())?;
    if found != key {
        return Ok(None);
    }
    let grad_norm: f64 = lines
        .next()
        .and_then(|l| l.strip_prefix("grad_norm "))
        .and_then(|s| s.parse().ok())
        .ok_or_else(bad)?;
    let iterations: u64 = lines
        .next()
        .and_then(|l| l.strip_prefix("iterations "))
        .and_then(|s| s.parse().ok())
        .ok_or_else(bad)?;
    let n: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("n "))
        .and_then(|s| s.parse().ok())
        .ok_or_else(bad)?;
    let mut z_star = Vec::with_capacity(n);
    for _ in 0..n {
        z_star.push(lines.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?);
    }
    Ok(Some(ReferenceSolution {
        z_star,
        grad_norm_at_star: grad_norm,
        solver_iterations: iterations,
    }))
}

/// Per-trace digest used by the comparison table.
#[derive(Debug, Clone)]
pub struct TraceSummary {
    pub label: String,
    pub iterations: u64,
    pub total_evals: u64,
    pub final_epoch: f64,
    pub final_residual: Option<f64>,
    pub tail_median_residual: Option<f64>,
    /// Least-squares slope of log10(residual) per iteration over the tail.
    pub slope_log10: Option<f64>,
    pub r_squared: Option<f64>,
    pub final_train_acc: Option<f64>,
    pub final_test_acc: Option<f64>,
}

/// Digests the trailing `tail_fraction` of the trace: median residual,
/// log-linear slope, and fit quality.
pub fn summarize_trace(trace: &Trace, tail_fraction: f64) -> TraceSummary {
    let records = &trace.records;
    let last = records.last();
    let mut summary = TraceSummary {
        label: trace.meta.algorithm.clone(),
        iterations: last.map(|r| r.iter).unwrap_or(0),
        total_evals: last.map(|r| r.agent_evals_total).unwrap_or(0),
        final_epoch: last.map(|r| r.epoch).unwrap_or(0.0),
        final_residual: last.and_then(|r| r.residual),
        tail_median_residual: None,
        slope_log10: None,
        r_squared: None,
        final_train_acc: records.iter().rev().find_map(|r| r.train_acc),
        final_test_acc: records.iter().rev().find_map(|r| r.test_acc),
    };
    let with_res: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.residual.map(|res| (r.iter as f64, res)))
        .collect();
    if with_res.is_empty() {
        return summary;
    }
    let frac = tail_fraction.clamp(0.01, 1.0);
    let start = ((with_res.len() as f64) * (1.0 - frac)).floor() as usize;
    let tail = &with_res[start.min(with_res.len() - 1)..];
    let mut values: Vec<f64> = tail.iter().map(|(_, r)| *r).collect();
    summary.tail_median_residual = Some(linalg::median(&mut values));
    let positive: Vec<(f64, f64)> = tail.iter().filter(|(_, r)| *r > 0.0).cloned().collect();
    if positive.len() >= 2 {
        let xs: Vec<f64> = positive.iter().map(|(k, _)| *k).collect();
        let ys: Vec<f64> = positive.iter().map(|(_, r)| r.log10()).collect();
        let (slope, r2) = linalg::linear_fit(&xs, &ys);
        summary.slope_log10 = Some(slope);
        summary.r_squared = Some(r2);
    }
    summary
}

pub fn compare_traces(traces: &[Trace], tail_fraction: f64) -> Vec<TraceSummary> {
    traces
        .iter()
        .map(|t| summarize_trace(t, tail_fraction))
        .collect()
}

pub const SUMMARY_HEADER: &str = "label,iterations,total_evals,final_epoch,final_residual,tail_median_residual,slope_log10,r_squared,final_train_acc,final_test_acc";

pub fn write_summary_csv(path: &Path, summaries: &[TraceSummary]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CoreError::io(dir.display().to_string(), e))?;
        }
    }
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut text = String::from(SUMMARY_HEADER);
    text.push('\n');
    for s in summaries {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.label,
            s.iterations,
            s.total_evals,
            s.final_epoch,
            opt(s.final_residual),
            opt(s.tail_median_residual),
            opt(s.slope_log10),
            opt(s.r_squared),
            opt(s.final_train_acc),
            opt(s.final_test_acc),
        ));
    }
    fs::write(path, text).map_err(|e| CoreError::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::make_synthetic_quadratic;

    #[test]
    fn residual_examples() {
        let star = vec![1.0, 2.0];
        // All agents at the optimum.
        let z = vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        assert_eq!(residual(&z, &star), 0.0);
        // One agent off by a unit vector, m = 4.
        let mut z2 = z.clone();
        z2[0] += 1.0;
        assert!((residual(&z2, &star) - 0.25).abs() < 1e-15);
        // Random configuration against a direct summation oracle.
        let z3 = vec![0.5, 1.0, 2.0, 3.5, -1.0, 2.0, 1.0, 0.0];
        let direct = ((0.25f64 + 1.0).sqrt()
            + (1.0f64 + 2.25).sqrt()
            + (4.0f64 + 0.0).sqrt()
            + (0.0f64 + 4.0).sqrt())
            / 4.0;
        assert!((residual(&z3, &star) - direct).abs() < 1e-14);
    }

    #[test]
    fn consensus_error_examples() {
        // Identical estimates.
        assert_eq!(consensus_error(&[2.0, 2.0, 2.0], 3), 0.0);
        // Two agents at +-1 in one dimension: deviations are +-1.
        let e = consensus_error(&[1.0, -1.0], 2);
        assert!((e - 2.0f64.sqrt()).abs() < 1e-15);
        // Homogeneity of degree one.
        let base = consensus_error(&[1.0, -1.0, 0.5, 2.0], 2);
        let scaled = consensus_error(&[3.0, -3.0, 1.5, 6.0], 2);
        assert!((scaled - 3.0 * base).abs() < 1e-12);
    }

    #[test]
    fn reference_matches_closed_form_on_quadratic() {
        let obj = make_synthetic_quadratic(4, 6, 7, 21, 1.0, 5.0).unwrap();
        let gd = solve_reference(&obj, 1e-12).unwrap();
        let closed = reference_from_closed_form(&obj);
        for (a, b) in gd.z_star.iter().zip(&closed.z_star) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(gd.grad_norm_at_star <= 1e-12);
    }

    #[test]
    fn reference_rejects_zero_tolerance() {
        let obj = make_synthetic_quadratic(2, 2, 2, 1, 1.0, 2.0).unwrap();
        assert!(solve_reference(&obj, 0.0).is_err());
    }

    #[test]
    fn reference_cache_roundtrip_and_key_mismatch() {
        let dir = std::env::temp_dir().join("push_lsvrg_refcache_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ref.cache");
        let reference = ReferenceSolution {
            z_star: vec![1.5, -0.25, 3.0e-7],
            grad_norm_at_star: 4.2e-13,
            solver_iterations: 17,
        };
        write_reference_cache(&path, 0xabcd, &reference).unwrap();
        let back = read_reference_cache(&path, 0xabcd).unwrap().unwrap();
        assert_eq!(back.z_star, reference.z_star);
        assert_eq!(back.grad_norm_at_star, reference.grad_norm_at_star);
        assert!(read_reference_cache(&path, 0x9999).unwrap().is_none());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn identical_traces_summarize_identically() {
        use crate::netgraph::{generate_graph, GraphKind};
        use crate::solver::{self, AlgoConfig, Algorithm, InitKind, RunContext};
        let net = generate_graph(GraphKind::DirectedExponential, 4, 0).unwrap();
        let obj = make_synthetic_quadratic(4, 3, 5, 2, 1.0, 2.0).unwrap();
        let reference = reference_from_closed_form(&obj);
        let cfg = AlgoConfig {
            algorithm: Algorithm::Addopt,
            alpha: 0.02,
            trigger_probs: vec![1.0; 4],
            seed: 6,
            max_iters: 120,
            stop_residual: None,
            init: InitKind::SeededNormal,
        };
        let ctx = RunContext {
            network: &net,
            objective: &obj,
            reference: Some(&reference),
            accuracy: None,
            meta: RunMeta::default(),
        };
        let a = solver::run(&cfg, &ctx, None).unwrap();
        let b = solver::run(&cfg, &ctx, None).unwrap();
        let summaries = compare_traces(&[a, b], 0.25);
        assert_eq!(summaries[0].final_residual, summaries[1].final_residual);
        assert_eq!(
            summaries[0].tail_median_residual,
            summaries[1].tail_median_residual
        );
        assert_eq!(summaries[0].slope_log10, summaries[1].slope_log10);
        assert_eq!(summaries[0].r_squared, summaries[1].r_squared);
        assert_eq!(summaries[0].total_evals, summaries[1].total_evals);
    }

    #[test]
    fn summary_of_exact_decay_recovers_slope() {
        let records: Vec<TraceRecord> = (0..100)
            .map(|k| TraceRecord {
                iter: k,
                epoch: k as f64,
                agent_evals_total: k,
                residual: Some(10f64.powf(-(k as f64) * 0.05)),
                consensus_error: 0.0,
                train_acc: None,
                test_acc: None,
                wall_ms: 0.0,
            })
            .collect();
        let trace = Trace {
            meta: RunMeta {
                algorithm: "test".into(),
                ..RunMeta::default()
            },
            records,
        };
        let s = summarize_trace(&trace, 0.6);
        assert!((s.slope_log10.unwrap() + 0.05).abs() < 1e-12);
        assert!((s.r_squared.unwrap() - 1.0).abs() < 1e-12);
    }
}
