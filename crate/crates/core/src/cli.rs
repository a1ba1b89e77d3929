//! Command-line front end: `embed`, `check` and `eval`.
//!
//! Exit status is 0 on success, 2 on usage errors and 1 on runtime errors.
//! Failures print a single line `ERROR <CODE>: <message>` on stderr. Output
//! files are written to a temporary file in the target directory and renamed
//! into place, so a failed run never leaves a partial file behind.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::data::{load_csv, Dataset};
use crate::diagnostics::convergence_report;
use crate::error::Error;
use crate::evaluation::{
    baseline_embeddings, cv_rmse, kfold_plan, select_iterations_by_cv, Baseline, DEFAULT_FOLDS,
    DEFAULT_KNN_K,
};
use crate::linalg::Matrix;
use crate::solver::{gamma_interval, run, GammaPolicy, Init, SolverConfig, UpdateRule, WSchedule};

#[derive(Debug, Parser)]
#[command(
    name = "dcor-embed",
    version,
    about = "Distance-correlation maximizing embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an embedding and write it with its trace and manifest.
    Embed(EmbedArgs),
    /// Report the prescaling conditions and the spectral radius of T′.
    Check(CheckArgs),
    /// Cross-validated k-NN RMSE of the embedding against baselines.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UpdateArg {
    Mm,
    Cccp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Gaussian,
    Subset,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Headered numeric CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Response column name(s), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub response: Vec<String>,
    /// Standardize feature columns to zero mean and unit variance.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, value_enum, default_value = "mm")]
    pub update: UpdateArg,
    /// `fixed:<value>` or `dcor`.
    #[arg(long, default_value = "dcor", value_parser = parse_w)]
    pub w: WSchedule,
    /// `auto`, `off`, or a nonzero value.
    #[arg(long, default_value = "auto", value_parser = parse_gamma)]
    pub gamma: GammaPolicy,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub init: InitArg,
    /// Relative loss change that ends the run; 0 disables it.
    #[arg(long, default_value_t = 1e-10)]
    pub loss_tol: f64,
    /// Keep the raw iterate instead of renormalizing it after each step.
    #[arg(long)]
    pub no_rescale: bool,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Embedding CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Trace JSON (default: `<out>.trace.json`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Manifest JSON (default: `<out>.manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Record per-iteration wall time in the trace (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// `auto`, `off`, or a nonzero value.
    #[arg(long, default_value = "auto", value_parser = parse_gamma)]
    pub gamma: GammaPolicy,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = DEFAULT_KNN_K)]
    pub knn_k: usize,
    /// Iteration counts to score (default: `--iters` only).
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Vec<usize>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "identity,random_projection"
    )]
    pub baselines: Vec<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_w(s: &str) -> Result<WSchedule, String> {
    if s == "dcor" {
        return Ok(WSchedule::DcorPerIteration);
    }
    let v = s
        .strip_prefix("fixed:")
        .ok_or_else(|| format!("expected `dcor` or `fixed:<value>`, got {s:?}"))?;
    let w: f64 = v.parse().map_err(|_| format!("bad w value {v:?}"))?;
    Ok(WSchedule::Fixed(w))
}

fn parse_gamma(s: &str) -> Result<GammaPolicy, String> {
    match s {
        "auto" => Ok(GammaPolicy::AutoMidpoint),
        "off" => Ok(GammaPolicy::Off),
        v => v
            .parse::<f64>()
            .map(GammaPolicy::Fixed)
            .map_err(|_| format!("expected `auto`, `off` or a number, got {v:?}")),
    }
}

/// A failure with its exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Run(Error::InvalidConfig(_)) => 2,
            CliError::Run(_) => 1,
        }
    }

    pub fn line(&self) -> String {
        match self {
            CliError::Usage(m) => format!("ERROR USAGE: {m}"),
            CliError::Run(e) => format!("ERROR {}: {e}", e.code()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` and runs the command; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("ERROR USAGE: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Embed(a) => cmd_embed(&a),
        Command::Check(a) => cmd_check(&a),
        Command::Eval(a) => cmd_eval(&a),
    }
}

fn load(input: &InputArgs) -> CliResult<Dataset> {
    Ok(load_csv(&input.input, &input.response, input.standardize)?)
}

fn solver_config(args: &SolverArgs, seed: u64, p: usize) -> CliResult<SolverConfig> {
    if args.dim == 0 || args.dim > p {
        return Err(CliError::Usage(format!(
            "--dim {} must be between 1 and the feature count {p}",
            args.dim
        )));
    }
    let config = SolverConfig {
        target_dim: args.dim,
        update_rule: match args.update {
            UpdateArg::Mm => UpdateRule::Mm,
            UpdateArg::Cccp => UpdateRule::Cccp,
        },
        w_schedule: args.w,
        gamma_policy: args.gamma,
        max_iter: args.iters,
        loss_tol: args.loss_tol,
        seed,
        init: match args.init {
            InitArg::Gaussian => Init::Gaussian,
            InitArg::Subset => Init::FeatureSubset,
        },
        rescale: !args.no_rescale,
    };
    config
        .validate(p)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> crate::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Embedding CSV: header `dim_1..dim_d`, values with 17 significant digits.
pub fn embedding_csv(m: &Matrix) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=m.cols()).map(|j| format!("dim_{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s.into_bytes()
}

pub fn cmd_embed(args: &EmbedArgs) -> CliResult<()> {
    let ds = load(&args.input)?;
    let config = solver_config(&args.solver, args.input.seed, ds.p())?;
    let result = run(&ds, &config)?;

    let trace: Vec<Value> = result
        .trace
        .iter()
        .map(|r| {
            json!({
                "iter": r.iter,
                "loss": r.loss,
                "dcor2_lap_norm": r.dcor2_lap_norm,
                "dcor2_lap_stated": r.dcor2_lap_stated,
                "dcor2_classical": r.dcor2_classical,
                "w": r.w,
                "step_norm": r.step_norm,
                "ms": if args.timing { json!(r.ms) } else { Value::Null },
            })
        })
        .collect();
    let manifest = json!({
        "input": args.input.input.display().to_string(),
        "response": args.input.response,
        "standardized": ds.standardized,
        "n": ds.n(),
        "p": ds.p(),
        "config": config,
        "gamma_interval": result.gamma_interval,
        "gamma_used": result.gamma_used,
        "initial_dcor2_lap_norm": result.initial_dcor2,
        "iterations": result.trace.len(),
        "stop_reason": result.stop_reason,
        "seed": config.seed,
        "version": env!("CARGO_PKG_VERSION"),
    });

    let trace_path = args
        .trace
        .clone()
        .unwrap_or_else(|| sidecar(&args.out, ".trace.json"));
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| sidecar(&args.out, ".manifest.json"));
    write_atomic(&args.out, embedding_csv(&result.embedding).as_bytes())?;
    write_atomic(&trace_path, &to_json(&trace))?;
    write_atomic(&manifest_path, &to_json(&manifest))?;
    Ok(())
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => write_atomic(path, bytes)?,
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })?,
    }
    Ok(())
}

pub fn cmd_check(args: &CheckArgs) -> CliResult<()> {
    let ds = load(&args.input)?;
    let interval = gamma_interval(&ds.x, &ds.y)?;
    let gamma = match args.gamma {
        GammaPolicy::AutoMidpoint => interval.midpoint(),
        GammaPolicy::Off => 1.0,
        GammaPolicy::Fixed(g) if g != 0.0 && g.is_finite() => g,
        GammaPolicy::Fixed(g) => {
            return Err(CliError::Usage(format!("--gamma {g} must be nonzero")));
        }
    };
    let report = convergence_report(&ds.x, &ds.y, gamma, args.input.seed)?;
    emit(&args.out, &to_json(&report))
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let ds = load(&args.input)?;
    if ds.q() != 1 {
        return Err(CliError::Usage(
            "eval needs exactly one --response column".into(),
        ));
    }
    let config = solver_config(&args.solver, args.input.seed, ds.p())?;
    let baselines = args
        .baselines
        .iter()
        .map(|b| {
            Baseline::parse(b).ok_or_else(|| CliError::Usage(format!("unknown baseline {b:?}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let checkpoints = if args.checkpoints.is_empty() {
        vec![config.max_iter]
    } else {
        args.checkpoints.clone()
    };
    let plan = kfold_plan(ds.n(), args.folds, args.input.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let y = ds.y.col(0);

    let selection = select_iterations_by_cv(&ds, &config, &checkpoints, &plan, args.knn_k)?;
    let mut methods = vec![cv_rmse(
        "dcor_embedding",
        &selection.best_embedding,
        &y,
        &plan,
        args.knn_k,
    )?];
    for (kind, features) in baseline_embeddings(&ds.x, config.target_dim, args.input.seed)? {
        if baselines.contains(&kind) {
            methods.push(cv_rmse(kind.name(), &features, &y, &plan, args.knn_k)?);
        }
    }
    let checkpoint_scores: Vec<Value> = selection
        .scores
        .iter()
        .map(|s| json!({ "iter": s.iter, "mean_rmse": s.report.mean_rmse }))
        .collect();
    let report = json!({
        "selected_iteration": selection.best_iter,
        "fold_seed": plan.seed,
        "folds": plan.k,
        "fold_sizes": plan.fold_sizes(),
        "protocol": "transductive: the embedding is fitted on all rows before the folds are drawn; only the k-NN regressor is cross-validated",
        "checkpoints": checkpoint_scores,
        "methods": methods,
    });
    emit(&args.out, &to_json(&report))
}
