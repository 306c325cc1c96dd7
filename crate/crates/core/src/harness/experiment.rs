//! Experiment orchestration: step-size and trigger-probability resolution,
//! synthetic classification data, and the named case-study pipelines.

use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::harness::{self, ReferenceSolution, RunMeta, Trace};
use crate::netgraph::{generate_graph, DirectedNetwork, GraphKind};
use crate::objective::{
    make_logistic, make_svm_smoothed_hinge, partition_evenly, Dataset, ModelKind, Objective,
};
use crate::rng::{self, Purpose};
use crate::solver::{self, AccuracyEval, AlgoConfig, Algorithm, InitKind, RunContext};
use crate::theory::{self, TheoryConstants};

/// Step-size choice: a literal value, or the admissible bound from the
/// convergence theorem scaled by a multiplier (the bound is conservative,
/// so practical runs often scale it up; the multiplier is recorded in the
/// trace metadata).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSpec {
    Fixed(f64),
    Auto { multiplier: f64 },
}

/// Resolves the step-size against the derived constants. Returns the value
/// and the multiplier actually applied (1.0 for fixed values).
pub fn resolve_alpha(spec: AlphaSpec, consts: &TheoryConstants) -> Result<(f64, f64)> {
    match spec {
        AlphaSpec::Fixed(a) if a > 0.0 && a.is_finite() => Ok((a, 1.0)),
        AlphaSpec::Fixed(a) => Err(CoreError::NonPositiveParameter {
            name: "alpha",
            value: a,
        }),
        AlphaSpec::Auto { multiplier } if multiplier > 0.0 => {
            Ok((theory::theorem_step_bound(consts) * multiplier, multiplier))
        }
        AlphaSpec::Auto { multiplier } => Err(CoreError::NonPositiveParameter {
            name: "alpha_multiplier",
            value: multiplier,
        }),
    }
}

/// Trigger-probability choice.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbSpec {
    /// Same probability for every agent.
    Uniform(f64),
    /// Explicit per-agent list (length m).
    PerAgent(Vec<f64>),
    /// Uniform draws from `[1/Q, m/Q]` clamped into (0, 1], the
    /// heterogeneous rule of the experimental protocol.
    IntervalRule { seed: u64 },
    /// Uniform draws from an explicit interval, clamped into (0, 1].
    Interval { lo: f64, hi: f64, seed: u64 },
}

/// Materializes per-agent probabilities. `cond_q` is the condition number
/// `L / mu` feeding the interval rule.
pub fn resolve_trigger_probs(spec: &ProbSpec, m: usize, cond_q: f64) -> Result<Vec<f64>> {
    let sample_interval = |lo: f64, hi: f64, seed: u64| -> Result<Vec<f64>> {
        if !(lo > 0.0 && hi >= lo) {
            return Err(CoreError::Config(format!(
                "invalid trigger interval [{lo}, {hi}]"
            )));
        }
        Ok((0..m)
            .map(|i| {
                let mut stream = rng::stream(seed, i, 0, Purpose::ProbInterval);
                let draw = lo + (hi - lo) * stream.gen::<f64>();
                draw.min(1.0)
            })
            .collect())
    };
    let probs = match spec {
        ProbSpec::Uniform(p) => vec![*p; m],
        ProbSpec::PerAgent(list) => {
            if list.len() != m {
                return Err(CoreError::DimensionMismatch {
                    expected: m,
                    actual: list.len(),
                });
            }
            list.clone()
        }
        ProbSpec::IntervalRule { seed } => sample_interval(1.0 / cond_q, m as f64 / cond_q, *seed)?,
        ProbSpec::Interval { lo, hi, seed } => sample_interval(*lo, *hi, *seed)?,
    };
    for &p in &probs {
        if !(p > 0.0 && p <= 1.0) {
            return Err(CoreError::InvalidTriggerProbability(p));
        }
    }
    Ok(probs)
}

/// Two seeded Gaussian clusters with labels +-1, mildly overlapping so the
/// optimal classifier is imperfect. Returns `(train, test)`.
pub fn generate_blobs(
    train: usize,
    test: usize,
    dim: usize,
    seed: u64,
    separation: f64,
) -> Result<(Dataset, Dataset)> {
    if train == 0 || test == 0 || dim == 0 {
        return Err(CoreError::Dataset("empty synthetic dataset".into()));
    }
    let total = train + test;
    let mut stream = rng::stream(seed, 0, 3, Purpose::Data);
    let shift = separation / (dim as f64).sqrt();
    let mut features = Vec::with_capacity(total * dim);
    let mut labels = Vec::with_capacity(total);
    for idx in 0..total {
        let label = if idx % 2 == 0 { 1.0 } else { -1.0 };
        labels.push(label);
        for _ in 0..dim {
            features.push(label * shift + rng::standard_normal(&mut stream));
        }
    }
    let all = Dataset::from_parts(features, dim, labels)?;
    all.split(train, seed ^ 0x51_1f)
}

/// The named experiment pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseStudy {
    /// Binary classification with ridge-regularized logistic loss on a
    /// one-hot encoded dataset file; unbalanced directed network.
    LogisticMushroom,
    /// Two-digit SVM with the smoothed hinge on an image dataset file;
    /// random symmetric network.
    SvmMnist,
    /// Desk-scale stand-in for the logistic study on generated data; runs
    /// with no external files.
    Synthetic,
}

impl CaseStudy {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "logistic_mushroom" => Ok(CaseStudy::LogisticMushroom),
            "svm_mnist" => Ok(CaseStudy::SvmMnist),
            "synthetic" => Ok(CaseStudy::Synthetic),
            other => Err(CoreError::Config(format!("unknown case study '{other}'"))),
        }
    }
}

/// Knobs for a case study run. Every size is overridable so the full-scale
/// protocols shrink to desk scale without code changes.
#[derive(Debug, Clone)]
pub struct CaseStudyConfig {
    pub dataset: Option<PathBuf>,
    /// Label value remapped to +1 (everything else becomes -1).
    pub positive_label: Option<f64>,
    pub min_max_scale: bool,
    pub m: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Feature dimension for generated data.
    pub feature_dim: usize,
    pub regularization: f64,
    pub algorithms: Vec<Algorithm>,
    pub alpha: AlphaSpec,
    pub probs: ProbSpec,
    pub seed: u64,
    pub max_iters: u64,
    pub stop_residual: Option<f64>,
    pub accuracy_every: u64,
    /// Where traces and the reference cache land; nothing is written when
    /// absent.
    pub out_dir: Option<PathBuf>,
}

impl CaseStudyConfig {
    /// Desk-scale defaults for the synthetic stand-in: 600 training
    /// samples across 10 agents on a random 4-out-regular digraph.
    pub fn desk_defaults() -> CaseStudyConfig {
        CaseStudyConfig {
            dataset: None,
            positive_label: None,
            min_max_scale: false,
            m: 10,
            train_samples: 600,
            test_samples: 200,
            feature_dim: 20,
            regularization: 5.0,
            algorithms: vec![Algorithm::PushLsvrgUp],
            alpha: AlphaSpec::Fixed(0.02),
            probs: ProbSpec::IntervalRule { seed: 0 },
            seed: 7,
            max_iters: 3000,
            stop_residual: Some(1e-10),
            accuracy_every: 10,
            out_dir: None,
        }
    }

    /// Full-scale protocol sizes for the two dataset-backed studies.
    pub fn full_scale(which: CaseStudy) -> CaseStudyConfig {
        let mut cfg = CaseStudyConfig::desk_defaults();
        match which {
            CaseStudy::LogisticMushroom => {
                cfg.m = 30;
                cfg.train_samples = 6000;
                cfg.test_samples = 2124;
                cfg.regularization = 5.0;
            }
            CaseStudy::SvmMnist => {
                cfg.m = 100;
                cfg.train_samples = 8000;
                cfg.test_samples = 4000;
                cfg.regularization = 0.01;
            }
            CaseStudy::Synthetic => {}
        }
        cfg
    }
}

fn study_network(which: CaseStudy, cfg: &CaseStudyConfig) -> Result<DirectedNetwork> {
    match which {
        // Substitute for the paper-figure topology: a seeded random
        // d-out-regular strongly connected digraph (6 out-neighbors at
        // full scale, 4 at desk scale).
        CaseStudy::LogisticMushroom => generate_graph(
            GraphKind::RandomRegular {
                out_degree: if cfg.m >= 30 { 6 } else { 4 },
            },
            cfg.m,
            cfg.seed,
        ),
        CaseStudy::SvmMnist => {
            generate_graph(GraphKind::RandomUndirected { ratio: 0.2 }, cfg.m, cfg.seed)
        }
        CaseStudy::Synthetic => {
            generate_graph(GraphKind::RandomRegular { out_degree: 4 }, cfg.m, cfg.seed)
        }
    }
}

fn load_split(which: CaseStudy, cfg: &CaseStudyConfig) -> Result<(Dataset, Dataset)> {
    match which {
        CaseStudy::Synthetic => generate_blobs(
            cfg.train_samples,
            cfg.test_samples,
            cfg.feature_dim,
            cfg.seed,
            2.0,
        ),
        CaseStudy::LogisticMushroom | CaseStudy::SvmMnist => {
            let path = cfg.dataset.as_ref().ok_or_else(|| {
                CoreError::Config("this case study requires objective.dataset".into())
            })?;
            let mut data = load_dataset_file(path)?;
            if let Some(positive) = cfg.positive_label {
                data.remap_labels(positive);
            }
            data.validate_labels()?;
            if cfg.min_max_scale {
                data.min_max_scale();
            }
            if cfg.train_samples + cfg.test_samples > data.len() {
                return Err(CoreError::Dataset(format!(
                    "requested {}+{} samples but the file holds {}",
                    cfg.train_samples,
                    cfg.test_samples,
                    data.len()
                )));
            }
            let keep = cfg.train_samples + cfg.test_samples;
            // One seeded shuffle selects the working subset, a second the
            // train/test split.
            let (subset, _) = data.split(keep, cfg.seed ^ 0xda7a)?;
            subset.split(cfg.train_samples, cfg.seed)
        }
    }
}

/// Dispatches on extension: `.csv` goes through the dense reader with a
/// `label` column, everything else through the sparse reader.
pub fn load_dataset_file(path: &Path) -> Result<Dataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Dataset::read_csv(path, "label"),
        _ => Dataset::read_sparse(path, None),
    }
}

/// Builds the study, solves the reference (disk-cached when an output
/// directory is given), runs every configured algorithm under a shared
/// seed discipline, and writes traces.
pub fn run_case_study(which: CaseStudy, cfg: &CaseStudyConfig) -> Result<Vec<Trace>> {
    let net = study_network(which, cfg)?;
    let (train, test) = load_split(which, cfg)?;
    let partition = partition_evenly(train.len(), cfg.m, cfg.seed);

    let (objective, kind): (Box<dyn Objective>, ModelKind) = match which {
        CaseStudy::SvmMnist => (
            Box::new(make_svm_smoothed_hinge(
                train.clone(),
                partition,
                cfg.regularization,
            )?),
            ModelKind::SvmAugmented,
        ),
        CaseStudy::LogisticMushroom | CaseStudy::Synthetic => (
            Box::new(make_logistic(train.clone(), partition, cfg.regularization)?),
            ModelKind::Logistic,
        ),
    };
    let obj = objective.as_ref();

    let descriptor = format!(
        "{which:?}|{}|m={}|train={}|test={}|reg={}|seed={}|dim={}",
        cfg.dataset
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "generated".into()),
        cfg.m,
        train.len(),
        test.len(),
        cfg.regularization,
        cfg.seed,
        obj.dim(),
    );
    let key = harness::content_hash(&descriptor);
    let reference = reference_with_cache(obj, key, cfg.out_dir.as_deref())?;

    let consts = TheoryConstants::derive(
        &net,
        obj.strong_convexity(),
        obj.smoothness(),
        &resolve_trigger_probs(&cfg.probs, cfg.m, obj.smoothness() / obj.strong_convexity())?,
    )?;
    let (alpha, multiplier) = resolve_alpha(cfg.alpha, &consts)?;
    let probs = resolve_trigger_probs(&cfg.probs, cfg.m, consts.cond_q)?;

    let mut traces = Vec::new();
    for &algorithm in &cfg.algorithms {
        let run_cfg = AlgoConfig {
            algorithm,
            alpha,
            trigger_probs: probs.clone(),
            seed: cfg.seed,
            max_iters: cfg.max_iters,
            stop_residual: cfg.stop_residual,
            init: InitKind::SeededNormal,
        };
        let ctx = RunContext {
            network: &net,
            objective: obj,
            reference: Some(&reference),
            accuracy: (!test.is_empty()).then(|| AccuracyEval {
                kind,
                train: &train,
                test: &test,
                every: cfg.accuracy_every.max(1),
            }),
            meta: RunMeta {
                config_hash: format!("{key:016x}"),
                alpha_multiplier: multiplier,
                ..RunMeta::default()
            },
        };
        let trace = solver::run(&run_cfg, &ctx, None)?;
        if let Some(dir) = &cfg.out_dir {
            trace.write_csv(&dir.join(format!("{}.csv", algorithm.name())))?;
        }
        traces.push(trace);
    }
    Ok(traces)
}

/// Reference solution with the documented on-disk cache: keyed by a hash
/// of the problem description, recomputation is the fallback.
pub fn reference_with_cache(
    obj: &dyn Objective,
    key: u64,
    cache_dir: Option<&Path>,
) -> Result<ReferenceSolution> {
    let cache_path = cache_dir.map(|d| d.join(format!("ref-{key:016x}.cache")));
    if let Some(path) = &cache_path {
        if let Some(found) = harness::read_reference_cache(path, key)? {
            if found.z_star.len() == obj.dim() {
                return Ok(found);
            }
        }
    }
    let reference = harness::solve_reference(obj, 1e-12)?;
    if let Some(path) = &cache_path {
        harness::write_reference_cache(path, key, &reference)?;
    }
    Ok(reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_protocol_sizes() {
        let mushroom = CaseStudyConfig::full_scale(CaseStudy::LogisticMushroom);
        assert_eq!(
            (mushroom.m, mushroom.train_samples, mushroom.test_samples),
            (30, 6000, 2124)
        );
        assert_eq!(mushroom.regularization, 5.0);
        let svm = CaseStudyConfig::full_scale(CaseStudy::SvmMnist);
        assert_eq!((svm.m, svm.train_samples, svm.test_samples), (100, 8000, 4000));
        assert_eq!(svm.regularization, 0.01);
    }

    #[test]
    fn blobs_are_balanced_and_seeded() {
        let (train, test) = generate_blobs(100, 40, 5, 3, 2.0).unwrap();
        assert_eq!(train.len(), 100);
        assert_eq!(test.len(), 40);
        let (train2, _) = generate_blobs(100, 40, 5, 3, 2.0).unwrap();
        assert_eq!(train.feature_row(7), train2.feature_row(7));
        let positives = train.labels().iter().filter(|&&l| l == 1.0).count();
        assert!((40..=60).contains(&positives), "{positives} positives");
    }

    #[test]
    fn interval_rule_respects_clamp_and_range() {
        // Q = 4, m = 12: interval [0.25, 3] clamps to (0, 1].
        let probs = resolve_trigger_probs(&ProbSpec::IntervalRule { seed: 5 }, 12, 4.0).unwrap();
        assert!(probs.iter().all(|&p| (0.25..=1.0).contains(&p)));
        assert!(
            probs.contains(&1.0),
            "clamp never engaged: {probs:?}"
        );
        // Heterogeneous below the clamp.
        let distinct: std::collections::BTreeSet<u64> = probs.iter().map(|p| p.to_bits()).collect();
        assert!(distinct.len() > 3);
    }

    #[test]
    fn per_agent_probs_must_match_m() {
        assert!(resolve_trigger_probs(&ProbSpec::PerAgent(vec![0.5; 3]), 4, 2.0).is_err());
        assert!(resolve_trigger_probs(&ProbSpec::Uniform(1.5), 4, 2.0).is_err());
    }

    #[test]
    fn alpha_auto_scales_the_bound() {
        let net = generate_graph(GraphKind::Ring, 4, 0).unwrap();
        let consts = TheoryConstants::derive(&net, 1.0, 2.0, &[0.5; 4]).unwrap();
        let (a1, m1) = resolve_alpha(AlphaSpec::Auto { multiplier: 1.0 }, &consts).unwrap();
        let (a2, m2) = resolve_alpha(AlphaSpec::Auto { multiplier: 10.0 }, &consts).unwrap();
        assert!((a2 - 10.0 * a1).abs() < 1e-15);
        assert_eq!((m1, m2), (1.0, 10.0));
        assert_eq!(
            resolve_alpha(AlphaSpec::Fixed(0.125), &consts).unwrap(),
            (0.125, 1.0)
        );
        assert!(resolve_alpha(AlphaSpec::Fixed(-1.0), &consts).is_err());
    }

    #[test]
    fn missing_dataset_file_is_an_error() {
        let mut cfg = CaseStudyConfig::desk_defaults();
        cfg.m = 4;
        cfg.train_samples = 40;
        cfg.test_samples = 10;
        assert!(run_case_study(CaseStudy::LogisticMushroom, &cfg).is_err());
        cfg.dataset = Some(PathBuf::from("/nonexistent/data.svm"));
        assert!(run_case_study(CaseStudy::LogisticMushroom, &cfg).is_err());
    }

    #[test]
    fn synthetic_study_runs_and_improves() {
        let mut cfg = CaseStudyConfig::desk_defaults();
        cfg.m = 5;
        cfg.train_samples = 120;
        cfg.test_samples = 60;
        cfg.feature_dim = 6;
        cfg.max_iters = 400;
        cfg.alpha = AlphaSpec::Fixed(0.05);
        cfg.accuracy_every = 50;
        let traces = run_case_study(CaseStudy::Synthetic, &cfg).unwrap();
        assert_eq!(traces.len(), 1);
        let records = &traces[0].records;
        let first = records.first().unwrap().residual.unwrap();
        let last = records.last().unwrap().residual.unwrap();
        assert!(last < first * 1e-2, "{first} -> {last}");
        assert!(records.last().unwrap().test_acc.unwrap() > 0.7);
    }
}
