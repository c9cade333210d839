//! Command-line entry point: generators, evaluation, solvers, dynamic DP,
//! landscape scans and verification suites over file-based instances.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 bad input, 3 size guard.
//! Set `RMDP_LOG` to `error`, `info` or `debug` for diagnostics on stderr.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rmdp::document::{
    parse_any_instance, parse_instance, parse_policy, render_infinite_instance, render_instance,
    render_json, sha256_hex, trace_csv, values_csv, AnyInstanceDoc, PolicyDoc,
};
use rmdp::dynamic::{dynamic_dp_solve, DynamicPolicy, PolicyClass};
use rmdp::error::RmdpError;
use rmdp::eval::evaluate;
use rmdp::generators::{
    evaluate_discounted, extend_infinite_horizon, local_minimizer_instance, partition_instance,
    PartitionSpec, StationaryPolicy,
};
use rmdp::instance::{embed_md, validate, PolicyMr, RobustInstance};
use rmdp::landscape::{scan, scan_csv, InnerScan};
use rmdp::robust::robust_value;
use rmdp::sampling::{random_policy, seeded_rng};
use rmdp::solvers::{solve_md_exhaustive, solve_mr_subgradient};
use rmdp::verify::{self, CheckResult, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "rmdp", version, about = "Finite-horizon robust MDP toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance document.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Evaluate a policy on an instance (robust by default).
    Eval(EvalArgs),
    /// Solve an instance.
    Solve {
        #[command(subcommand)]
        mode: SolveMode,
    },
    /// Dynamic backward induction; emits per-stage value tables as CSV.
    Dp(DpArgs),
    /// Landscape scan of the local-minimizer gadget; emits CSV.
    Scan(ScanArgs),
    /// Run a verification suite; exit 1 if any check fails.
    Verify {
        #[command(subcommand)]
        suite: VerifySuite,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// Two-kernel set-partition instance from a weight list.
    Partition {
        /// Comma-separated positive weights, e.g. 1,2,3.
        #[arg(long)]
        weights: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// The fixed three-stage local-minimizer gadget.
    Theorem2 {
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Discounted stationary embedding of a finite-horizon instance.
    Infinite {
        /// Finite-horizon instance document to embed.
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct EvalArgs {
    /// Instance document (finite or discounted).
    #[arg(short, long)]
    instance: PathBuf,
    /// Policy document.
    #[arg(short, long)]
    policy: PathBuf,
    /// Evaluate against this kernel only instead of the worst case.
    #[arg(short, long)]
    kernel: Option<usize>,
    /// Report path; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SolveMode {
    /// Exhaustive search over deterministic Markov policies.
    Md {
        #[arg(short, long)]
        instance: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Projected subgradient descent over randomized Markov policies.
    Mr(MrArgs),
    /// Dynamic backward induction (same engine as `rmdp dp`).
    Dp(DpArgs),
}

#[derive(Args)]
struct MrArgs {
    #[arg(short, long)]
    instance: PathBuf,
    /// Initial policy: uniform, near-trap (gadget-shaped instances only),
    /// or random.
    #[arg(long, value_enum, default_value_t = InitKind::Uniform)]
    init: InitKind,
    /// Seed for randomized initializations; fixed default, no ambient
    /// entropy.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    step0: f64,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitKind {
    Uniform,
    NearTrap,
    Random,
}

#[derive(Args)]
struct DpArgs {
    #[arg(short, long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = ClassArg::Mr)]
    class: ClassArg,
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    /// Per-stage value table CSV path.
    #[arg(long)]
    values_csv: Option<PathBuf>,
    /// JSON solution report; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassArg {
    Md,
    Mr,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, default_value_t = 0.01)]
    step_pi1: f64,
    #[arg(long, default_value_t = 0.01)]
    step_inner: f64,
    /// Scan the full inner grid instead of the diagonal.
    #[arg(long)]
    full_inner: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum VerifySuite {
    /// Partition/subset-sum equivalence at exact integer arithmetic.
    Partition {
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Local-minimizer gadget: values, strictness, basins, closed forms.
    Theorem2 {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Dynamic/rectangular consistency and adversary ordering.
    Dynamic {
        /// Use the reduced instance count intended for quick runs.
        #[arg(long)]
        tiny: bool,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

/// Error carrying the process exit code.
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn bad_input(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<RmdpError> for CliError {
    fn from(e: RmdpError) -> Self {
        let code = match e {
            RmdpError::SizeGuard { .. } => 3,
            _ => 2,
        };
        CliError { code, message: e.to_string() }
    }
}

/// Provenance record written next to every file artifact.
#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    args: Vec<String>,
    input_digest: String,
    version: String,
    duration_ms: u64,
}

struct ManifestWriter {
    subcommand: String,
    args: Vec<String>,
    input_digest: String,
    started: Instant,
}

impl ManifestWriter {
    fn new(subcommand: &str, input_digest: String) -> Self {
        ManifestWriter {
            subcommand: subcommand.to_string(),
            args: std::env::args().skip(1).collect(),
            input_digest,
            started: Instant::now(),
        }
    }

    /// Write `content` to `path` plus `<path>.manifest.json` beside it.
    fn emit(&self, path: &Path, content: &str) -> Result<(), CliError> {
        write_file(path, content)?;
        let manifest = RunManifest {
            subcommand: self.subcommand.clone(),
            args: self.args.clone(),
            input_digest: self.input_digest.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_ms: self.started.elapsed().as_millis() as u64,
        };
        let manifest_path = manifest_path(path);
        write_file(&manifest_path, &render_json(&manifest))?;
        log::info!("wrote {} (+ manifest)", path.display());
        Ok(())
    }

    /// Emit to a file when a path is given, otherwise print to stdout.
    fn emit_or_print(&self, path: Option<&Path>, content: &str) -> Result<(), CliError> {
        match path {
            Some(p) => self.emit(p, content),
            None => {
                print!("{content}");
                Ok(())
            }
        }
    }
}

fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::bad_input(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::bad_input(format!("cannot read {}: {e}", path.display())))
}

/// Load, parse and structurally validate a finite-horizon instance.
fn load_instance(path: &Path) -> Result<(RobustInstance, String), CliError> {
    let text = read_file(path)?;
    let digest = sha256_hex(text.as_bytes());
    let instance = parse_instance(&text)?;
    let violations = validate(&instance);
    if !violations.is_empty() {
        let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::bad_input(format!(
            "instance {} is invalid:\n  {}",
            path.display(),
            listed.join("\n  ")
        )));
    }
    Ok((instance, digest))
}

fn parse_weights(text: &str) -> Result<PartitionSpec, CliError> {
    let mut weights = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let w: f64 = part
            .parse()
            .map_err(|_| CliError::bad_input(format!("weight '{part}' is not a number")))?;
        weights.push(w);
    }
    Ok(PartitionSpec::new(weights)?)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RMDP_LOG", "error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Gen { kind } => run_gen(kind).map(|()| 0),
        Command::Eval(args) => run_eval(args).map(|()| 0),
        Command::Solve { mode } => run_solve(mode).map(|()| 0),
        Command::Dp(args) => run_dp("dp", args).map(|()| 0),
        Command::Scan(args) => run_scan(args).map(|()| 0),
        Command::Verify { suite } => run_verify(suite),
    }
}

fn run_gen(kind: GenKind) -> Result<(), CliError> {
    match kind {
        GenKind::Partition { weights, output } => {
            let spec = parse_weights(&weights)?;
            let writer = ManifestWriter::new(
                "gen partition",
                sha256_hex(format!("partition:{weights}").as_bytes()),
            );
            let instance = partition_instance(&spec)?;
            writer.emit(&output, &render_instance(&instance))
        }
        GenKind::Theorem2 { output } => {
            let writer = ManifestWriter::new("gen theorem2", sha256_hex(b"theorem2"));
            writer.emit(&output, &render_instance(&local_minimizer_instance()))
        }
        GenKind::Infinite { base, gamma, output } => {
            let (instance, digest) = load_instance(&base)?;
            let writer = ManifestWriter::new("gen infinite", digest);
            let ext = extend_infinite_horizon(&instance, gamma)?;
            writer.emit(&output, &render_infinite_instance(&ext))
        }
    }
}

#[derive(Serialize)]
struct SingleKernelReport {
    kernel_index: usize,
    value: f64,
}

#[derive(Serialize)]
struct DiscountedReport {
    kernel_index: usize,
    gamma: f64,
    value: f64,
}

fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    let text = read_file(&args.instance)?;
    let digest = sha256_hex(text.as_bytes());
    let writer = ManifestWriter::new("eval", digest);
    let policy_doc = parse_policy(&read_file(&args.policy)?)?;
    match parse_any_instance(&text)? {
        AnyInstanceDoc::Finite(doc) => {
            let instance = doc.into_instance()?;
            let policy = match &policy_doc {
                PolicyDoc::Md { act } => embed_md(
                    &instance.mdp,
                    &rmdp::instance::PolicyMd { act: act.clone() },
                ),
                PolicyDoc::Mr { dist } => PolicyMr { dist: dist.clone() },
                PolicyDoc::Stationary { .. } => {
                    return Err(CliError::bad_input(
                        "stationary policies only apply to discounted instances",
                    ))
                }
            };
            let report = match args.kernel {
                Some(k) => {
                    let kernel = instance.ambiguity.kernels.get(k).ok_or_else(|| {
                        CliError::bad_input(format!(
                            "kernel index {k} outside the {} kernels",
                            instance.ambiguity.len()
                        ))
                    })?;
                    let value = evaluate(&instance.mdp, kernel, &policy, instance.initial_state)?;
                    render_json(&SingleKernelReport { kernel_index: k, value })
                }
                None => render_json(&robust_value(&instance, &policy)?),
            };
            writer.emit_or_print(args.output.as_deref(), &report)
        }
        AnyInstanceDoc::Infinite(doc) => {
            let inst = doc.into_instance()?;
            let PolicyDoc::Stationary { dist } = policy_doc else {
                return Err(CliError::bad_input(
                    "discounted instances need a stationary policy document",
                ));
            };
            let policy = StationaryPolicy { dist };
            let report = match args.kernel {
                Some(k) => {
                    let value = evaluate_discounted(&inst, k, &policy, inst.initial_state)?;
                    render_json(&DiscountedReport { kernel_index: k, gamma: inst.gamma, value })
                }
                None => {
                    // Worst case over the kernels, reported per kernel.
                    let mut per = Vec::with_capacity(inst.kernels.len());
                    for k in 0..inst.kernels.len() {
                        per.push(evaluate_discounted(&inst, k, &policy, inst.initial_state)?);
                    }
                    let mut worst = 0usize;
                    for (k, &v) in per.iter().enumerate() {
                        if v > per[worst] {
                            worst = k;
                        }
                    }
                    render_json(&rmdp::robust::RobustEvaluation {
                        value: per[worst],
                        worst_kernel_index: worst,
                        per_kernel_values: per,
                    })
                }
            };
            writer.emit_or_print(args.output.as_deref(), &report)
        }
    }
}

#[derive(Serialize)]
struct MdReportDoc {
    mode: &'static str,
    best_value: f64,
    policies_examined: u64,
    best_policy: PolicyDoc,
}

#[derive(Serialize)]
struct MrReportDoc {
    mode: &'static str,
    best_value: f64,
    iterations: usize,
    init: &'static str,
    seed: u64,
    step0: f64,
    best_policy: PolicyDoc,
}

fn run_solve(mode: SolveMode) -> Result<(), CliError> {
    match mode {
        SolveMode::Md { instance, output } => {
            let (inst, digest) = load_instance(&instance)?;
            let writer = ManifestWriter::new("solve md", digest);
            let report = solve_md_exhaustive(&inst)?;
            let doc = MdReportDoc {
                mode: "md",
                best_value: report.best_value,
                policies_examined: report.policies_examined,
                best_policy: PolicyDoc::from_md(&report.best_policy),
            };
            writer.emit_or_print(output.as_deref(), &render_json(&doc))
        }
        SolveMode::Mr(args) => run_solve_mr(args),
        SolveMode::Dp(args) => run_dp("solve dp", args),
    }
}

fn run_solve_mr(args: MrArgs) -> Result<(), CliError> {
    let (inst, digest) = load_instance(&args.instance)?;
    let writer = ManifestWriter::new("solve mr", digest);
    let (init_policy, init_name) = match args.init {
        InitKind::Uniform => (PolicyMr::uniform(&inst.mdp), "uniform"),
        InitKind::NearTrap => {
            let gadget = local_minimizer_instance();
            if inst.mdp.stages != gadget.mdp.stages {
                return Err(CliError::bad_input(
                    "near-trap initialization requires the local-minimizer gadget shape",
                ));
            }
            (verify::sample_policy_near_trap(args.seed), "near-trap")
        }
        InitKind::Random => {
            let mut rng = seeded_rng(args.seed);
            (random_policy(&mut rng, &inst.mdp), "random")
        }
    };
    let report = solve_mr_subgradient(&inst, &init_policy, args.step0, args.iters)?;
    if let Some(trace_path) = &args.trace {
        writer.emit(trace_path, &trace_csv(&report.trace))?;
    }
    let doc = MrReportDoc {
        mode: "mr",
        best_value: report.best_value,
        iterations: report.iterations,
        init: init_name,
        seed: args.seed,
        step0: args.step0,
        best_policy: PolicyDoc::from_mr(&report.best_policy),
    };
    writer.emit_or_print(args.output.as_deref(), &render_json(&doc))
}

#[derive(Serialize)]
struct DpReportDoc {
    mode: &'static str,
    class: &'static str,
    root_value: f64,
    game_values_residual: f64,
    values: Vec<Vec<f64>>,
    policy: PolicyDoc,
}

fn run_dp(subcommand: &str, args: DpArgs) -> Result<(), CliError> {
    let (inst, digest) = load_instance(&args.instance)?;
    let writer = ManifestWriter::new(subcommand, digest);
    let class = match args.class {
        ClassArg::Md => PolicyClass::Md,
        ClassArg::Mr => PolicyClass::Mr,
    };
    let solution = dynamic_dp_solve(&inst, class, args.eps)?;
    if let Some(csv_path) = &args.values_csv {
        writer.emit(csv_path, &values_csv(&solution))?;
    }
    let policy = match &solution.policy {
        DynamicPolicy::Md(p) => PolicyDoc::from_md(p),
        DynamicPolicy::Mr(p) => PolicyDoc::from_mr(p),
    };
    let doc = DpReportDoc {
        mode: "dp",
        class: match args.class {
            ClassArg::Md => "md",
            ClassArg::Mr => "mr",
        },
        root_value: solution.root_value(&inst),
        game_values_residual: solution.game_values_residual,
        values: solution.values.clone(),
        policy,
    };
    writer.emit_or_print(args.output.as_deref(), &render_json(&doc))
}

fn run_scan(args: ScanArgs) -> Result<(), CliError> {
    let writer = ManifestWriter::new(
        "scan",
        sha256_hex(
            format!(
                "scan:{}:{}:{}",
                args.step_pi1, args.step_inner, args.full_inner
            )
            .as_bytes(),
        ),
    );
    let mode = if args.full_inner { InnerScan::Full } else { InnerScan::Diagonal };
    let rows = scan(args.step_pi1, args.step_inner, mode)?;
    writer.emit(&args.output, &scan_csv(&rows))
}

fn print_results(results: &[CheckResult]) -> i32 {
    for r in results {
        println!("{}", serde_json::to_string(r).expect("check results serialize"));
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!(
        "{}",
        serde_json::json!({ "checks": results.len(), "failed": failed })
    );
    if failed == 0 {
        0
    } else {
        1
    }
}

fn run_verify(suite: VerifySuite) -> Result<i32, CliError> {
    let results = match suite {
        VerifySuite::Partition { n_max, trials, seed } => verify::partition_suite(n_max, trials, seed)?,
        VerifySuite::Theorem2 { seed } => verify::theorem2_suite(seed)?,
        VerifySuite::Dynamic { tiny, trials, pairs, seed } => {
            let trials = if tiny { trials.min(8) } else { trials };
            let pairs = if tiny { pairs.min(50) } else { pairs };
            verify::dynamic_suite(trials, pairs, seed)?
        }
    };
    Ok(print_results(&results))
}
