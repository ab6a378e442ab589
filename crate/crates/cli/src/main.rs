use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use serde_json::json;

use irls_core::eval::{affinity_from_z, clustering_accuracy, spectral_cluster};
use irls_core::io::{self, DatasetSidecar, RunSummary, SCHEMA_VERSION};
use irls_core::irpca::{apply_projection, solve_irpca, IrpcaConfig};
use irls_core::lrr::{solve_smoothed_lrr, SolverConfig, StopReason};
use irls_core::norms::PenaltyFamily;
use irls_core::schedule::SmoothingSchedule;
use irls_core::synth::{self, NoiseMode, RowCorruptionParams, SubspaceParams};
use irls_core::{DenseMatrix, IrlsError};

const EXIT_ARGS: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "irls", version, about = "Smoothed low-rank and sparse recovery by IRLS")]
struct Cli {
    /// Worker threads for the numerical kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory for outputs whose path is not given explicitly.
    #[arg(long, global = true, env = "IRLS_OUTPUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its ground-truth sidecar.
    Gen(GenArgs),
    /// Solve smoothed LRR on a data matrix.
    Lrr(LrrArgs),
    /// Learn an IRPCA projection from a data matrix.
    Irpca(IrpcaArgs),
    /// Apply a learned projection to new data.
    Apply(ApplyArgs),
    /// Cluster the columns of a representation matrix.
    Segment(SegmentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    /// Union of subspaces with corrupted columns.
    Subspaces,
    /// Low-rank matrix with corrupted rows.
    Rows,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseModeArg {
    ColumnNorm,
    PerEntry,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "subspaces")]
    kind: DatasetKind,
    #[arg(long, default_value_t = 15)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    r: usize,
    #[arg(long, default_value_t = 200)]
    d: usize,
    #[arg(long, default_value_t = 20)]
    ni: usize,
    /// Columns for `--kind rows`.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    corrupt: f64,
    /// Noise scale (default: 0.1 for subspaces, 1.0 for rows).
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, value_enum, default_value = "column-norm")]
    noise_mode: NoiseModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Data matrix path; `.csv`/`.txt` selects text, anything else binary.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sidecar path (default: the data path with a `.json` extension).
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Also write the noiseless matrix here.
    #[arg(long)]
    clean: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long)]
    mu_c: Option<f64>,
    /// Absolute initial μ; overrides `--mu-c`.
    #[arg(long)]
    mu_init: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    mu_floor: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl ScheduleArgs {
    fn apply(&self, s: &mut SmoothingSchedule) {
        if let Some(v) = self.mu_c {
            s.mu_c = v;
        }
        if self.mu_init.is_some() {
            s.mu_init = self.mu_init;
        }
        if let Some(v) = self.rho {
            s.rho = v;
        }
        if self.mu_floor.is_some() {
            s.mu_floor = self.mu_floor;
        }
        if self.eps.is_some() {
            s.epsilon = self.eps;
        }
        if let Some(v) = self.max_iter {
            s.max_iter = v;
        }
    }
}

#[derive(Args)]
struct SolveOutputs {
    /// Solution matrix path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration trace (JSON lines).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Run summary (JSON).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct LrrArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON solver configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    penalty: Option<PenaltyArg>,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[command(flatten)]
    outputs: SolveOutputs,
}

#[derive(Clone, Copy, ValueEnum)]
enum PenaltyArg {
    Power,
    Logarithm,
}

#[derive(Args)]
struct IrpcaArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[command(flatten)]
    outputs: SolveOutputs,
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    projection: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Representation matrix (n×n).
    #[arg(long)]
    z: PathBuf,
    /// Dataset sidecar holding the true labels.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Number of clusters (default: number of labels in the sidecar).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Predicted labels (JSON array).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accuracy report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

/// An error together with the process exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.chain().find_map(|e| e.downcast_ref::<IrlsError>()) {
            Some(IrlsError::Io(_) | IrlsError::Format(_) | IrlsError::Json(_)) => EXIT_IO,
            Some(
                IrlsError::InvalidParams(_)
                | IrlsError::InvalidExponent(_)
                | IrlsError::NonPositiveMu(_)
                | IrlsError::DimensionMismatch(_)
                | IrlsError::NotSquare { .. }
                | IrlsError::EmptyMatrix
                | IrlsError::LengthMismatch { .. },
            ) => EXIT_ARGS,
            Some(_) => EXIT_NOT_CONVERGED,
            None if error.chain().any(|e| e.is::<std::io::Error>() || e.is::<serde_json::Error>()) => EXIT_IO,
            None => EXIT_ARGS,
        };
        Failure { code, error }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn out_path(explicit: &Option<PathBuf>, dir: &Path, default: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| dir.join(default))
}

fn read_matrix(path: &Path) -> anyhow::Result<DenseMatrix> {
    io::read_matrix(path).with_context(|| format!("reading {}", path.display()))
}

fn write_matrix(path: &Path, m: &DenseMatrix) -> anyhow::Result<()> {
    io::write_matrix(path, m).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    io::write_json(path, value).with_context(|| format!("writing {}", path.display()))
}

fn load_config<T: for<'de> serde::Deserialize<'de> + Default>(path: &Option<PathBuf>) -> anyhow::Result<T> {
    match path {
        Some(p) => io::read_json(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(T::default()),
    }
}

fn run_gen(args: &GenArgs, dir: &Path) -> CliResult<()> {
    let out = out_path(&args.out, dir, "data.bin");
    let sidecar_path = args.sidecar.clone().unwrap_or_else(|| out.with_extension("json"));
    let (x, clean, sidecar) = match args.kind {
        DatasetKind::Subspaces => {
            let params = SubspaceParams {
                k: args.k,
                r: args.r,
                d: args.d,
                n_i: args.ni,
                corruption_frac: args.corrupt,
                noise_scale: args.noise.unwrap_or(0.1),
                seed: args.seed,
                noise_mode: match args.noise_mode {
                    NoiseModeArg::ColumnNorm => NoiseMode::ColumnNorm,
                    NoiseModeArg::PerEntry => NoiseMode::PerEntry,
                },
            };
            let ds = synth::gen_subspaces(&params).map_err(anyhow::Error::from)?;
            let sidecar = DatasetSidecar {
                schema_version: SCHEMA_VERSION,
                kind: "subspaces".into(),
                seed: args.seed,
                rng: synth::RNG_ALGORITHM.into(),
                corrupted: ds.effective_corrupted(),
                labels: Some(ds.labels),
                params: serde_json::to_value(&params).map_err(anyhow::Error::from)?,
            };
            (ds.x, ds.clean_x, sidecar)
        }
        DatasetKind::Rows => {
            let params = RowCorruptionParams {
                d: args.d,
                n: args.n,
                rank: args.r,
                corruption_frac: args.corrupt,
                noise_scale: args.noise.unwrap_or(1.0),
                seed: args.seed,
            };
            let ds = synth::gen_row_corrupted(&params).map_err(anyhow::Error::from)?;
            let corrupted = if params.noise_scale > 0.0 {
                (0..ds.corrupted_rows.len()).filter(|&i| ds.corrupted_rows[i]).collect()
            } else {
                Vec::new()
            };
            let sidecar = DatasetSidecar {
                schema_version: SCHEMA_VERSION,
                kind: "row_corrupted".into(),
                seed: args.seed,
                rng: synth::RNG_ALGORITHM.into(),
                labels: None,
                corrupted,
                params: serde_json::to_value(&params).map_err(anyhow::Error::from)?,
            };
            (ds.x, ds.clean_x, sidecar)
        }
    };
    write_matrix(&out, &x)?;
    write_json(&sidecar_path, &sidecar)?;
    if let Some(path) = &args.clean {
        write_matrix(path, &clean)?;
    }
    println!("wrote {}x{} matrix to {}", x.nrows(), x.ncols(), out.display());
    Ok(())
}

fn finish_solve(
    command: &str,
    outputs: &SolveOutputs,
    dir: &Path,
    default_name: &str,
    input: &Path,
    solution: &DenseMatrix,
    trace: &irls_core::trace::SolveTrace,
    stop: StopReason,
    config: serde_json::Value,
    schedule: serde_json::Value,
) -> CliResult<()> {
    let out = out_path(&outputs.out, dir, default_name);
    let trace_path = out_path(&outputs.trace, dir, "trace.jsonl");
    let summary_path = out_path(&outputs.summary, dir, "summary.json");
    write_matrix(&out, solution)?;
    io::write_trace_file(&trace_path, trace).with_context(|| format!("writing {}", trace_path.display()))?;
    let mut summary = RunSummary::from_trace(command, trace, stop == StopReason::Converged);
    summary.config = config;
    summary.schedule = schedule;
    summary.input = input.display().to_string();
    write_json(&summary_path, &summary)?;
    println!(
        "{command}: {} after {} iterations, objective {:.6}, {:.3}s",
        if summary.converged { "converged" } else { "stopped" },
        summary.iterations,
        summary.objective,
        summary.seconds
    );
    if stop == StopReason::Converged {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_NOT_CONVERGED,
            error: anyhow!("no convergence within {} iterations; best-effort outputs written", summary.iterations),
        })
    }
}

fn run_lrr(args: &LrrArgs, dir: &Path) -> CliResult<()> {
    let mut config: SolverConfig = load_config(&args.config)?;
    if let Some(v) = args.p {
        config.p = v;
    }
    if let Some(v) = args.q {
        config.q = v;
    }
    if let Some(v) = args.lambda {
        config.lambda = v;
    }
    if let Some(v) = args.penalty {
        config.penalty = match v {
            PenaltyArg::Power => PenaltyFamily::Power,
            PenaltyArg::Logarithm => PenaltyFamily::Logarithm,
        };
    }
    args.schedule.apply(&mut config.schedule);
    let x = read_matrix(&args.input)?;
    let sol = solve_smoothed_lrr(&x, &config).map_err(anyhow::Error::from)?;
    finish_solve(
        "lrr",
        &args.outputs,
        dir,
        "z.bin",
        &args.input,
        &sol.z,
        &sol.trace,
        sol.stop,
        serde_json::to_value(&config).map_err(anyhow::Error::from)?,
        serde_json::to_value(sol.schedule).map_err(anyhow::Error::from)?,
    )
}

fn run_irpca(args: &IrpcaArgs, dir: &Path) -> CliResult<()> {
    let mut config: IrpcaConfig = load_config(&args.config)?;
    if let Some(v) = args.lambda {
        config.lambda = v;
    }
    args.schedule.apply(&mut config.schedule);
    let x = read_matrix(&args.input)?;
    let sol = solve_irpca(&x, &config).map_err(anyhow::Error::from)?;
    finish_solve(
        "irpca",
        &args.outputs,
        dir,
        "p.bin",
        &args.input,
        &sol.p,
        &sol.trace,
        sol.stop,
        serde_json::to_value(&config).map_err(anyhow::Error::from)?,
        serde_json::to_value(sol.schedule).map_err(anyhow::Error::from)?,
    )
}

fn run_apply(args: &ApplyArgs, dir: &Path) -> CliResult<()> {
    let p = read_matrix(&args.projection)?;
    let x = read_matrix(&args.input)?;
    let cleaned = apply_projection(&p, &x).map_err(anyhow::Error::from)?;
    let out = out_path(&args.out, dir, "cleaned.bin");
    write_matrix(&out, &cleaned)?;
    println!("wrote {}x{} matrix to {}", cleaned.nrows(), cleaned.ncols(), out.display());
    Ok(())
}

fn distinct(labels: &[usize]) -> usize {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

fn run_segment(args: &SegmentArgs, dir: &Path) -> CliResult<()> {
    let z = read_matrix(&args.z)?;
    let truth = match &args.sidecar {
        Some(path) => {
            let sidecar: DatasetSidecar =
                io::read_json(path).with_context(|| format!("reading sidecar {}", path.display()))?;
            let labels = sidecar
                .labels
                .ok_or_else(|| anyhow!("sidecar {} carries no labels", path.display()))?;
            if labels.len() != z.ncols() {
                return Err(anyhow::Error::from(IrlsError::LengthMismatch {
                    pred: z.ncols(),
                    truth: labels.len(),
                })
                .into());
            }
            Some(labels)
        }
        None => None,
    };
    let k = match (args.k, &truth) {
        (Some(k), Some(t)) => {
            let kt = distinct(t);
            if k != kt {
                warn!("--k {k} differs from the {kt} labels in the sidecar; using {k}");
            }
            k
        }
        (Some(k), None) => k,
        (None, Some(t)) => distinct(t),
        (None, None) => return Err(anyhow!("either --k or --sidecar is required").into()),
    };
    let w = affinity_from_z(&z).map_err(anyhow::Error::from)?;
    let pred = spectral_cluster(&w, k, args.seed).map_err(anyhow::Error::from)?;
    let out = out_path(&args.out, dir, "labels.json");
    write_json(&out, &pred)?;
    let accuracy = match &truth {
        Some(t) => Some(clustering_accuracy(&pred, t).map_err(anyhow::Error::from)?),
        None => None,
    };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "k": k,
        "n": pred.len(),
        "seed": args.seed,
        "accuracy": accuracy,
        "segmentation_error": accuracy.map(|a| 1.0 - a),
    });
    write_json(&out_path(&args.report, dir, "segment_report.json"), &report)?;
    match accuracy {
        Some(a) => println!("accuracy {a:.6}"),
        None => println!("wrote {} labels to {}", pred.len(), out.display()),
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure {
                code: EXIT_ARGS,
                error: anyhow!("--threads must be at least 1"),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(anyhow::Error::from)?;
    }
    let dir = &cli.out_dir;
    match &cli.command {
        Command::Gen(a) => run_gen(a, dir),
        Command::Lrr(a) => run_lrr(a, dir),
        Command::Irpca(a) => run_irpca(a, dir),
        Command::Apply(a) => run_apply(a, dir),
        Command::Segment(a) => run_segment(a, dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
