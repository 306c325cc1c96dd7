//! Plain-text run configuration: UTF-8 `key = value` lines with dotted
//! section prefixes. `#` starts a comment, blank lines are ignored,
//! unknown and duplicate keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CoreError, Result};
use crate::harness::{self, AlphaSpec, ProbSpec};
use crate::netgraph::{generate_graph, DirectedNetwork, GraphKind};
use crate::objective::{
    make_logistic, make_svm_smoothed_hinge, make_synthetic_quadratic_with_spread, partition_evenly,
    Dataset, ModelKind, Objective, QuadraticObjective,
};
use crate::solver::{Algorithm, InitKind};

/// Every accepted key with its one-line description; the CLI help and the
/// docs-coverage test are both generated from this table.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("network.kind", "topology: ring | mesh | directed_exponential | symmetric_exponential | full | random_strongly_connected | random_undirected | random_regular"),
    ("network.m", "agent count (>= 2)"),
    ("network.seed", "graph sampling seed (default: run.seed)"),
    ("network.ratio", "edge probability for the random kinds, in (0,1]"),
    ("network.out_degree", "non-self out-neighbors per agent for random_regular"),
    ("network.file", "load an edge-list file instead of generating"),
    ("objective.kind", "problem: quadratic | logistic | svm | blobs"),
    ("objective.dataset", "sample file for logistic/svm: sparse index:value text, or dense CSV"),
    ("objective.label_column", "label column name for CSV datasets (default: label)"),
    ("objective.positive_label", "label value remapped to +1; everything else becomes -1"),
    ("objective.scale", "feature scaling: none | minmax (default: none)"),
    ("objective.beta", "ridge coefficient for logistic/blobs (default: 5)"),
    ("objective.lambda", "hinge penalty for svm (default: 0.01)"),
    ("objective.n", "decision dimension for quadratic"),
    ("objective.q", "per-agent sample count for quadratic"),
    ("objective.mu", "quadratic curvature lower bound (default: 1)"),
    ("objective.l", "quadratic curvature upper bound (default: 2)"),
    ("objective.spread", "quadratic target spread (default: 1)"),
    ("objective.seed", "quadratic/blobs sampling seed (default: run.seed)"),
    ("objective.train_samples", "training rows taken from the dataset or generated"),
    ("objective.test_samples", "evaluation rows (default: rest of file, or 200 for blobs)"),
    ("objective.features", "feature dimension for blobs (default: 20)"),
    ("objective.separation", "cluster separation for blobs (default: 2)"),
    ("algorithm.name", "push_lsvrg_up | s_addopt | addopt | push_saga"),
    ("algorithm.alpha", "step-size value, or 'auto' for the admissible bound"),
    ("algorithm.alpha_multiplier", "scales the auto step-size (default: 1); recorded in trace metadata"),
    ("algorithm.p", "trigger probabilities: scalar | comma list | interval | interval:<lo>:<hi>"),
    ("algorithm.p_seed", "seed for interval sampling (default: run.seed)"),
    ("run.seed", "master seed for initialization and all per-agent streams"),
    ("run.max_iters", "iteration cap"),
    ("run.stop_residual", "early stop once the residual reaches this value"),
    ("run.init", "initial state: normal | zero (default: normal)"),
    ("run.acc_every", "evaluate accuracy every this many iterations (default: 1)"),
    ("run.checkpoint", "write the final solver state to this path"),
    ("output.trace", "trace CSV path for run"),
    ("output.dir", "directory for compare traces (default: .)"),
    ("output.summary", "summary CSV path for compare (default: <dir>/summary.csv)"),
    ("output.cache_dir", "reference-solution cache directory"),
    ("output.reference", "explicit reference cache path for solve-ref"),
    ("compare.algorithms", "comma-separated algorithm list for compare"),
    ("compare.tail_fraction", "trailing fraction summarized (default: 0.2)"),
    ("compare.alpha_grid", "comma-separated step-sizes; every algorithm runs once per value and all rows are reported"),
    ("theory.alpha_grid", "step-size grid <lo>:<hi>:<count>, geometric (default: around the bound)"),
    ("theory.k_max", "horizon override for the push-sum extrema estimate"),
    ("theory.epsilon", "accuracy for the iteration-complexity estimate (default: 1e-6)"),
    ("theory.report", "write the plain-text report here"),
    ("theory.csv", "write the step-size grid table here"),
];

/// Parsed key-value map plus the canonical content hash.
#[derive(Debug, Clone)]
pub struct RunConfigFile {
    values: BTreeMap<String, String>,
    hash: String,
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<RunConfigFile> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(at) => &raw[..at],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CoreError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.iter().any(|(k, _)| *k == key) {
                return Err(CoreError::Config(format!(
                    "line {}: unknown key '{key}'",
                    lineno + 1
                )));
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(CoreError::Config(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
        }
        let canonical: String = values.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        Ok(RunConfigFile {
            hash: format!("{:016x}", harness::content_hash(&canonical)),
            values,
        })
    }

    pub fn load(path: &Path) -> Result<RunConfigFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::io(path.display().to_string(), e))?;
        RunConfigFile::parse(&text)
    }

    /// Hash of the canonicalized key-value content, echoed into outputs.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| CoreError::Config(format!("missing required key '{key}'")))
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| CoreError::Config(format!("key '{key}': cannot parse '{raw}': {e}"))),
        }
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.parse_value(key)?.unwrap_or(default))
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        self.require(key)?;
        Ok(self.parse_value(key)?.expect("checked above"))
    }

    pub fn run_seed(&self) -> Result<u64> {
        self.parse_or("run.seed", 0)
    }

    pub fn init_kind(&self) -> Result<InitKind> {
        match self.get("run.init").unwrap_or("normal") {
            "normal" => Ok(InitKind::SeededNormal),
            "zero" => Ok(InitKind::Zero),
            other => Err(CoreError::Config(format!(
                "run.init: unknown value '{other}'"
            ))),
        }
    }

    /// Builds the network section.
    pub fn network(&self) -> Result<DirectedNetwork> {
        if let Some(file) = self.get("network.file") {
            return DirectedNetwork::read_edge_list(Path::new(file));
        }
        let kind_name = self.require("network.kind")?;
        let m: usize = self.parse_required("network.m")?;
        let seed = self.parse_or("network.seed", self.run_seed()?)?;
        let kind = match kind_name {
            "ring" => GraphKind::Ring,
            "mesh" => GraphKind::Mesh,
            "directed_exponential" => GraphKind::DirectedExponential,
            "symmetric_exponential" => GraphKind::SymmetricExponential,
            "full" => GraphKind::Full,
            "random_strongly_connected" => GraphKind::RandomStronglyConnected {
                ratio: self.parse_required("network.ratio")?,
            },
            "random_undirected" => GraphKind::RandomUndirected {
                ratio: self.parse_required("network.ratio")?,
            },
            "random_regular" => GraphKind::RandomRegular {
                out_degree: self.parse_required("network.out_degree")?,
            },
            other => {
                return Err(CoreError::Config(format!(
                    "network.kind: unknown value '{other}'"
                )))
            }
        };
        generate_graph(kind, m, seed)
    }

    /// Builds the objective section. Returns the boxed objective, the
    /// closed-form handle when the problem is quadratic, and the
    /// classification datasets when the problem has them.
    pub fn problem(&self, m: usize) -> Result<Problem> {
        let seed = self.parse_or("objective.seed", self.run_seed()?)?;
        match self.require("objective.kind")? {
            "quadratic" => {
                let quad = make_synthetic_quadratic_with_spread(
                    m,
                    self.parse_required("objective.n")?,
                    self.parse_required("objective.q")?,
                    seed,
                    self.parse_or("objective.mu", 1.0)?,
                    self.parse_or("objective.l", 2.0)?,
                    self.parse_or("objective.spread", 1.0)?,
                )?;
                Ok(Problem {
                    objective: Box::new(quad.clone()),
                    quadratic: Some(quad),
                    accuracy: None,
                })
            }
            "blobs" => {
                let (train, test) = harness::generate_blobs(
                    self.parse_or("objective.train_samples", 600)?,
                    self.parse_or("objective.test_samples", 200)?,
                    self.parse_or("objective.features", 20)?,
                    seed,
                    self.parse_or("objective.separation", 2.0)?,
                )?;
                let partition = partition_evenly(train.len(), m, seed);
                let beta = self.parse_or("objective.beta", 5.0)?;
                let obj = make_logistic(train.clone(), partition, beta)?;
                Ok(Problem {
                    objective: Box::new(obj),
                    quadratic: None,
                    accuracy: Some((ModelKind::Logistic, train, test)),
                })
            }
            kind @ ("logistic" | "svm") => {
                let path = PathBuf::from(self.require("objective.dataset")?);
                let mut data = match path.extension().and_then(|e| e.to_str()) {
                    Some("csv") => Dataset::read_csv(
                        &path,
                        self.get("objective.label_column").unwrap_or("label"),
                    )?,
                    _ => Dataset::read_sparse(&path, None)?,
                };
                if let Some(positive) = self.parse_value("objective.positive_label")? {
                    data.remap_labels(positive);
                }
                data.validate_labels()?;
                match self.get("objective.scale").unwrap_or("none") {
                    "minmax" => data.min_max_scale(),
                    "none" => {}
                    other => {
                        return Err(CoreError::Config(format!(
                            "objective.scale: unknown value '{other}'"
                        )))
                    }
                }
                let train_n = self.parse_or("objective.train_samples", data.len())?;
                let test_n =
                    self.parse_or("objective.test_samples", data.len().saturating_sub(train_n))?;
                if train_n + test_n > data.len() || train_n == 0 {
                    return Err(CoreError::Dataset(format!(
                        "requested {train_n}+{test_n} samples but the file holds {}",
                        data.len()
                    )));
                }
                let (train, test) = if train_n + test_n < data.len() {
                    let (subset, _) = data.split(train_n + test_n, seed ^ 0xda7a)?;
                    subset.split(train_n, seed)?
                } else {
                    data.split(train_n, seed)?
                };
                let partition = partition_evenly(train.len(), m, seed);
                if kind == "logistic" {
                    let beta = self.parse_or("objective.beta", 5.0)?;
                    let obj = make_logistic(train.clone(), partition, beta)?;
                    Ok(Problem {
                        objective: Box::new(obj),
                        quadratic: None,
                        accuracy: Some((ModelKind::Logistic, train, test)),
                    })
                } else {
                    let lambda = self.parse_or("objective.lambda", 0.01)?;
                    let obj = make_svm_smoothed_hinge(train.clone(), partition, lambda)?;
                    Ok(Problem {
                        objective: Box::new(obj),
                        quadratic: None,
                        accuracy: Some((ModelKind::SvmAugmented, train, test)),
                    })
                }
            }
            other => Err(CoreError::Config(format!(
                "objective.kind: unknown value '{other}'"
            ))),
        }
    }

    pub fn alpha_spec(&self) -> Result<AlphaSpec> {
        let raw = self.get("algorithm.alpha").unwrap_or("auto");
        let multiplier = self.parse_or("algorithm.alpha_multiplier", 1.0)?;
        if raw == "auto" {
            return Ok(AlphaSpec::Auto { multiplier });
        }
        if self.get("algorithm.alpha_multiplier").is_some() {
            return Err(CoreError::Config(
                "algorithm.alpha_multiplier requires algorithm.alpha = auto".into(),
            ));
        }
        let value: f64 = raw
            .parse()
            .map_err(|_| CoreError::Config(format!("algorithm.alpha: bad value '{raw}'")))?;
        Ok(AlphaSpec::Fixed(value))
    }

    pub fn prob_spec(&self) -> Result<ProbSpec> {
        let seed = self.parse_or("algorithm.p_seed", self.run_seed()?)?;
        let raw = self.get("algorithm.p").unwrap_or("interval");
        if raw == "interval" {
            return Ok(ProbSpec::IntervalRule { seed });
        }
        if let Some(rest) = raw.strip_prefix("interval:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 2 {
                return Err(CoreError::Config(format!(
                    "algorithm.p: expected interval:<lo>:<hi>, got '{raw}'"
                )));
            }
            let lo: f64 = parts[0]
                .parse()
                .map_err(|_| CoreError::Config(format!("algorithm.p: bad bound '{}'", parts[0])))?;
            let hi: f64 = parts[1]
                .parse()
                .map_err(|_| CoreError::Config(format!("algorithm.p: bad bound '{}'", parts[1])))?;
            return Ok(ProbSpec::Interval { lo, hi, seed });
        }
        if raw.contains(',') {
            let list: Vec<f64> = raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| CoreError::Config(format!("algorithm.p: bad entry '{s}'")))
                })
                .collect::<Result<_>>()?;
            return Ok(ProbSpec::PerAgent(list));
        }
        let p: f64 = raw
            .parse()
            .map_err(|_| CoreError::Config(format!("algorithm.p: bad value '{raw}'")))?;
        Ok(ProbSpec::Uniform(p))
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        Algorithm::parse(self.require("algorithm.name")?)
    }

    pub fn compare_algorithms(&self) -> Result<Vec<Algorithm>> {
        self.require("compare.algorithms")?
            .split(',')
            .map(|s| Algorithm::parse(s.trim()))
            .collect()
    }
}

/// Objective plus the optional extras the runner wants alongside it.
pub struct Problem {
    pub objective: Box<dyn Objective>,
    /// Present when the objective is the synthetic quadratic; carries the
    /// closed-form minimizer.
    pub quadratic: Option<QuadraticObjective>,
    /// `(model kind, train set, test set)` for classification problems.
    pub accuracy: Option<(ModelKind, Dataset, Dataset)>,
}
