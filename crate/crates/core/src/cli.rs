//! Single-executable front end: graph generation and inspection, runs,
//! comparisons, theory reports, and reference solving, all driven by the
//! documented `key = value` config format.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Problem, RunConfigFile, KNOWN_KEYS};
use crate::error::{CoreError, Result};
use crate::harness::{
    self, compare_traces, reference_with_cache, resolve_alpha, resolve_trigger_probs,
    write_summary_csv, ReferenceSolution, RunMeta,
};
use crate::netgraph::{generate_graph, DirectedNetwork, GraphKind};
use crate::solver::{self, AccuracyEval, AlgoConfig, Algorithm, RunContext};
use crate::theory::{self, TheoryConstants};

/// Stdout writer that treats a closed pipe as a normal exit, so
/// `push-lsvrg ... | head` terminates cleanly.
macro_rules! emit {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let mut out = std::io::stdout().lock();
        if let Err(e) = writeln!(out, $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            return Err(CoreError::io("stdout", e));
        }
    }};
}

/// The full config-key reference appended to every config-driven
/// subcommand's `--help`.
pub fn config_reference() -> String {
    let mut text = String::from(
        "CONFIG FILE FORMAT (UTF-8, one `key = value` per line, `#` comments,\nunknown keys rejected):\n\n",
    );
    for (key, help) in KNOWN_KEYS {
        text.push_str(&format!("  {key}\n      {help}\n"));
    }
    text
}

#[derive(Parser)]
#[command(
    name = "push-lsvrg",
    version,
    about = "Round-synchronous simulator for distributed stochastic finite-sum optimization over directed networks"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect a network and print its spectral quantities.
    Graph(GraphArgs),
    /// Run one algorithm on one problem; writes the trace CSV.
    Run(ConfigArg),
    /// Run several algorithms under a shared seed discipline and summarize.
    Compare(ConfigArg),
    /// Emit the constants ledger, step bound, radius grid, and certificate
    /// verdicts.
    Theory(ConfigArg),
    /// Solve and cache the centralized reference solution.
    SolveRef(ConfigArg),
}

#[derive(Args)]
#[command(after_help = config_reference())]
struct ConfigArg {
    /// Path to the run configuration file.
    config: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    /// Topology kind (see `network.kind` in the config reference).
    #[arg(long)]
    kind: Option<String>,
    /// Agent count.
    #[arg(long)]
    m: Option<usize>,
    /// Sampling seed for random kinds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge probability for the random kinds.
    #[arg(long)]
    ratio: Option<f64>,
    /// Non-self out-neighbors per agent for random_regular.
    #[arg(long)]
    out_degree: Option<usize>,
    /// Inspect an existing edge-list file instead of generating.
    #[arg(long, conflicts_with = "kind")]
    input: Option<PathBuf>,
    /// Write the network as an edge-list file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Export the dense weight matrix as CSV.
    #[arg(long)]
    weights_csv: Option<PathBuf>,
}

/// Parses argv and executes; returns the process exit code. Exit code 0
/// means the command completed and all requested outputs were written;
/// failures print a single `error: ...` line on stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = err.exit_code();
            let _ = err.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Graph(args) => cmd_graph(&args),
        Command::Run(arg) => RunConfigFile::load(&arg.config).and_then(|cfg| cmd_run(&cfg)),
        Command::Compare(arg) => RunConfigFile::load(&arg.config).and_then(|cfg| cmd_compare(&cfg)),
        Command::Theory(arg) => RunConfigFile::load(&arg.config).and_then(|cfg| cmd_theory(&cfg)),
        Command::SolveRef(arg) => {
            RunConfigFile::load(&arg.config).and_then(|cfg| cmd_solve_ref(&cfg))
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn cmd_graph(args: &GraphArgs) -> Result<()> {
    let net = if let Some(input) = &args.input {
        DirectedNetwork::read_edge_list(input)?
    } else {
        let kind_name = args
            .kind
            .as_deref()
            .ok_or_else(|| CoreError::Config("either --kind or --input is required".into()))?;
        let m = args
            .m
            .ok_or_else(|| CoreError::Config("--m is required with --kind".into()))?;
        let need_ratio = || {
            args.ratio
                .ok_or_else(|| CoreError::Config("--ratio is required for this kind".into()))
        };
        let kind = match kind_name {
            "ring" => GraphKind::Ring,
            "mesh" => GraphKind::Mesh,
            "directed_exponential" => GraphKind::DirectedExponential,
            "symmetric_exponential" => GraphKind::SymmetricExponential,
            "full" => GraphKind::Full,
            "random_strongly_connected" => GraphKind::RandomStronglyConnected {
                ratio: need_ratio()?,
            },
            "random_undirected" => GraphKind::RandomUndirected {
                ratio: need_ratio()?,
            },
            "random_regular" => GraphKind::RandomRegular {
                out_degree: args.out_degree.ok_or_else(|| {
                    CoreError::Config("--out-degree is required for random_regular".into())
                })?,
            },
            other => return Err(CoreError::Config(format!("unknown graph kind '{other}'"))),
        };
        generate_graph(kind, m, args.seed)?
    };
    let s = net.spectral();
    let (y_sup, y_inv_sup) = theory::estimate_y_bounds(&net, theory::default_y_horizon(s.sigma_a));
    emit!("network: {} (m={})", net.kind_label(), net.agents());
    emit!("sigma_a: {}", s.sigma_a);
    emit!("theta_ratio: {}", s.theta_ratio);
    emit!("t_const: {}", s.t_const());
    emit!("y_sup: {y_sup}");
    emit!("y_inv_sup: {y_inv_sup}");
    let pi: Vec<String> = s.pi.iter().map(|p| p.to_string()).collect();
    emit!("pi: {}", pi.join(" "));
    if let Some(out) = &args.out {
        net.write_edge_list(out)?;
        emit!("wrote edge list: {}", out.display());
    }
    if let Some(csv) = &args.weights_csv {
        net.write_weights_csv(csv)?;
        emit!("wrote weights: {}", csv.display());
    }
    Ok(())
}

/// Everything the run/compare commands share: network, problem, resolved
/// probabilities and step-size, constants, and the reference solution.
struct Prepared {
    network: DirectedNetwork,
    problem: Problem,
    consts: TheoryConstants,
    probs: Vec<f64>,
    alpha: f64,
    multiplier: f64,
    reference: ReferenceSolution,
}

fn prepare(cfg: &RunConfigFile) -> Result<Prepared> {
    let network = cfg.network()?;
    let m = network.agents();
    let problem = cfg.problem(m)?;
    let obj = problem.objective.as_ref();
    let cond_q = obj.smoothness() / obj.strong_convexity();
    let probs = resolve_trigger_probs(&cfg.prob_spec()?, m, cond_q)?;
    let consts = TheoryConstants::derive_with_horizon(
        &network,
        obj.strong_convexity(),
        obj.smoothness(),
        &probs,
        cfg.parse_value("theory.k_max")?,
    )?;
    let (alpha, multiplier) = resolve_alpha(cfg.alpha_spec()?, &consts)?;
    let reference = match &problem.quadratic {
        Some(quad) => harness::reference_from_closed_form(quad),
        None => {
            let key = harness::content_hash(&reference_descriptor(cfg, obj.describe()));
            let cache_dir = cfg.get("output.cache_dir").map(Path::new);
            reference_with_cache(obj, key, cache_dir)?
        }
    };
    Ok(Prepared {
        network,
        problem,
        consts,
        probs,
        alpha,
        multiplier,
        reference,
    })
}

/// The reference depends on the objective definition (data, split,
/// partition) but not on the algorithm; collect exactly those keys.
fn reference_descriptor(cfg: &RunConfigFile, describe: String) -> String {
    let mut text = describe;
    for (key, _) in KNOWN_KEYS {
        if key.starts_with("objective.") || *key == "run.seed" || *key == "network.m" {
            if let Some(v) = cfg.get(key) {
                text.push_str(&format!("|{key}={v}"));
            }
        }
    }
    text
}

fn build_algo_config(
    cfg: &RunConfigFile,
    prepared: &Prepared,
    algorithm: Algorithm,
) -> Result<AlgoConfig> {
    Ok(AlgoConfig {
        algorithm,
        alpha: prepared.alpha,
        trigger_probs: prepared.probs.clone(),
        seed: cfg.run_seed()?,
        max_iters: cfg.parse_or("run.max_iters", 1000)?,
        stop_residual: cfg.parse_value("run.stop_residual")?,
        init: cfg.init_kind()?,
    })
}

fn run_context<'a>(cfg: &RunConfigFile, prepared: &'a Prepared) -> Result<RunContext<'a>> {
    // Accuracy columns stay empty when there is nothing to evaluate
    // against (e.g. the whole file was taken for training).
    let accuracy = match &prepared.problem.accuracy {
        Some((kind, train, test)) if !train.is_empty() && !test.is_empty() => {
            Some(AccuracyEval {
                kind: *kind,
                train,
                test,
                every: cfg.parse_or("run.acc_every", 1u64)?.max(1),
            })
        }
        _ => None,
    };
    Ok(RunContext {
        network: &prepared.network,
        objective: prepared.problem.objective.as_ref(),
        reference: Some(&prepared.reference),
        accuracy,
        meta: RunMeta {
            config_hash: cfg.hash().to_string(),
            alpha_multiplier: prepared.multiplier,
            ..RunMeta::default()
        },
    })
}

fn cmd_run(cfg: &RunConfigFile) -> Result<()> {
    let prepared = prepare(cfg)?;
    let algo_cfg = build_algo_config(cfg, &prepared, cfg.algorithm()?)?;
    let ctx = run_context(cfg, &prepared)?;
    let (trace, state) = solver::run_with_state(&algo_cfg, &ctx, None)?;
    let trace_path = PathBuf::from(cfg.require("output.trace")?);
    trace.write_csv(&trace_path)?;
    if let Some(ckpt) = cfg.get("run.checkpoint") {
        state.write_checkpoint(Path::new(ckpt))?;
    }
    let last = trace.final_record().expect("at least the initial row");
    emit!(
        "wrote {} ({} iterations, epoch {:.3}, final residual {})",
        trace_path.display(),
        last.iter,
        last.epoch,
        last.residual.map(|r| r.to_string()).unwrap_or_default()
    );
    Ok(())
}

fn cmd_compare(cfg: &RunConfigFile) -> Result<()> {
    let prepared = prepare(cfg)?;
    let algorithms = cfg.compare_algorithms()?;
    let out_dir = PathBuf::from(cfg.get("output.dir").unwrap_or("."));
    let tail = cfg.parse_or("compare.tail_fraction", 0.2)?;
    // The reference protocol leaves baseline step-sizes untuned; an
    // explicit grid runs every algorithm at every value and reports all
    // rows instead of silently picking one.
    let alpha_grid: Vec<f64> = match cfg.get("compare.alpha_grid") {
        Some(raw) => raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CoreError::Config(format!("compare.alpha_grid: bad entry '{s}'")))
            })
            .collect::<Result<_>>()?,
        None => vec![prepared.alpha],
    };
    if alpha_grid.iter().any(|&a| a <= 0.0) {
        return Err(CoreError::Config(
            "compare.alpha_grid entries must be positive".into(),
        ));
    }
    let grid_mode = alpha_grid.len() > 1;
    let mut traces = Vec::new();
    for algorithm in algorithms {
        for (idx, &alpha) in alpha_grid.iter().enumerate() {
            let mut algo_cfg = build_algo_config(cfg, &prepared, algorithm)?;
            algo_cfg.alpha = alpha;
            let ctx = run_context(cfg, &prepared)?;
            let mut trace = solver::run(&algo_cfg, &ctx, None)?;
            let file = if grid_mode {
                format!("{}_a{}.csv", algorithm.name(), idx)
            } else {
                format!("{}.csv", algorithm.name())
            };
            trace.write_csv(&out_dir.join(file))?;
            if grid_mode {
                trace.meta.algorithm = format!("{}@{alpha}", algorithm.name());
            }
            traces.push(trace);
        }
    }
    let summaries = compare_traces(&traces, tail);
    let summary_path = cfg
        .get("output.summary")
        .map(PathBuf::from)
        .unwrap_or_else(|| out_dir.join("summary.csv"));
    write_summary_csv(&summary_path, &summaries)?;
    emit!("{}", harness::SUMMARY_HEADER);
    for s in &summaries {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        emit!(
            "{},{},{},{},{},{},{},{},{},{}",
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
        );
    }
    emit!("wrote {}", summary_path.display());
    Ok(())
}

fn cmd_theory(cfg: &RunConfigFile) -> Result<()> {
    let prepared = prepare(cfg)?;
    let c = &prepared.consts;
    let bound = theory::theorem_step_bound(c);
    let hypothesis = theory::prop1_step_hypothesis(c);
    let epsilon = cfg.parse_or("theory.epsilon", 1e-6)?;
    let complexity = theory::iteration_complexity_estimate(c, epsilon);

    let grid = match cfg.get("theory.alpha_grid") {
        Some(raw) => {
            let parts: Vec<&str> = raw.split(':').collect();
            if parts.len() != 3 {
                return Err(CoreError::Config(format!(
                    "theory.alpha_grid: expected <lo>:<hi>:<count>, got '{raw}'"
                )));
            }
            let lo: f64 = parts[0]
                .parse()
                .map_err(|_| CoreError::Config("theory.alpha_grid: bad lower bound".into()))?;
            let hi: f64 = parts[1]
                .parse()
                .map_err(|_| CoreError::Config("theory.alpha_grid: bad upper bound".into()))?;
            let count: usize = parts[2]
                .parse()
                .map_err(|_| CoreError::Config("theory.alpha_grid: bad count".into()))?;
            if lo <= 0.0 || hi < lo || count < 2 {
                return Err(CoreError::Config(
                    "theory.alpha_grid: bounds must be positive, increasing, count >= 2".into(),
                ));
            }
            geometric_grid(lo, hi, count)
        }
        None => geometric_grid(bound * 1e-2, bound * 1e2, 25),
    };

    let mut report = String::new();
    report.push_str("constants:\n");
    report.push_str(&format!("  m = {}\n", c.m));
    report.push_str(&format!(
        "  mu = {}\n  lipschitz = {}\n  cond_q = {}\n",
        c.mu, c.lipschitz, c.cond_q
    ));
    report.push_str(&format!("  sigma_a = {}\n", c.sigma_a));
    report.push_str(&format!(
        "  pi_max = {}\n  pi_min = {}\n  theta_ratio = {}\n",
        c.pi_max, c.pi_min, c.theta_ratio
    ));
    report.push_str(&format!("  t_const = {}\n", c.t_const));
    report.push_str(&format!(
        "  y_sup = {}\n  y_inv_sup = {}\n",
        c.y_sup, c.y_inv_sup
    ));
    report.push_str(&format!(
        "  delta = {}\n  d1 = {}\n  d2 = {}\n",
        c.delta, c.d1, c.d2
    ));
    report.push_str(&format!("  p_max = {}\n  p_min = {}\n", c.p_max, c.p_min));
    report.push_str("step sizes:\n");
    report.push_str(&format!("  theorem_bound = {bound}\n"));
    report.push_str(&format!("  error_system_hypothesis = {hypothesis}\n"));
    report.push_str(&format!("  resolved_alpha = {}\n", prepared.alpha));
    report.push_str(&format!(
        "  iteration_complexity(epsilon={epsilon}) = {complexity}\n"
    ));

    let mut csv = String::from(
        "alpha,rho,eta,statement_ok,proof_ok,elementwise_ok,admissible,within_theorem_bound,within_prop1_hypothesis\n",
    );
    report.push_str("alpha grid:\n");
    report.push_str("  alpha rho eta elementwise admissible\n");
    let mut alphas = vec![0.0, prepared.alpha, bound];
    alphas.extend_from_slice(&grid);
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    alphas.dedup();
    for alpha in alphas {
        let r = theory::check_stability_certificate(c, alpha);
        report.push_str(&format!(
            "  {} {} {} {} {}\n",
            r.alpha, r.rho, r.eta, r.elementwise_ok, r.admissible
        ));
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.alpha,
            r.rho,
            r.eta,
            r.statement_ok,
            r.proof_ok,
            r.elementwise_ok,
            r.admissible,
            r.within_theorem_bound,
            r.within_prop1_hypothesis
        ));
    }
    for line in report.lines() {
        emit!("{line}");
    }
    if let Some(path) = cfg.get("theory.report") {
        std::fs::write(path, &report).map_err(|e| CoreError::io(path.to_string(), e))?;
    }
    if let Some(path) = cfg.get("theory.csv") {
        std::fs::write(path, &csv).map_err(|e| CoreError::io(path.to_string(), e))?;
    }
    Ok(())
}

fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln() / (count as f64 - 1.0);
    (0..count).map(|k| lo * (ratio * k as f64).exp()).collect()
}

fn cmd_solve_ref(cfg: &RunConfigFile) -> Result<()> {
    let network = cfg.network()?;
    let problem = cfg.problem(network.agents())?;
    let obj = problem.objective.as_ref();
    let key = harness::content_hash(&reference_descriptor(cfg, obj.describe()));
    let reference = match &problem.quadratic {
        Some(quad) => harness::reference_from_closed_form(quad),
        None => harness::solve_reference(obj, 1e-12)?,
    };
    let path = match cfg.get("output.reference") {
        Some(p) => PathBuf::from(p),
        None => PathBuf::from(cfg.get("output.cache_dir").unwrap_or("."))
            .join(format!("ref-{key:016x}.cache")),
    };
    harness::write_reference_cache(&path, key, &reference)?;
    emit!(
        "wrote {} (grad_norm {}, {} solver iterations)",
        path.display(),
        reference.grad_norm_at_star,
        reference.solver_iterations
    );
    Ok(())
}
