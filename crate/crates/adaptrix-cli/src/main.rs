//! Command-line surface: dataset generation, intrinsic-dimension
//! estimation, embedding, clustering evaluation, and supervised
//! cross-validation, all emitting machine-readable JSON reports.

mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Axis;

use adaptrix::dataset::{self, PointCloud};
use adaptrix::error::{Error, ErrorCategory};
use adaptrix::evaluate::{cluster_eval, kfold_cv, kmeans};
use adaptrix::idestim::{abide, AbideConfig};
use adaptrix::pipeline::{
    adaptive_reduce, kstar_summary, reduce_with_estimate, KPolicy, Method, ReduceConfig,
    SupervisedLlePipeline,
};
use adaptrix::rng::mix;
use adaptrix::umap::UmapConfig;

use report::*;

const SCHEMA_VERSION: &str = "1";

#[derive(Parser)]
#[command(
    name = "adaptrix",
    about = "Adaptive neighborhood selection for dimension estimation and nonlinear reduction",
    version
)]
struct Cli {
    /// Master seed; every random sub-stream derives from it.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads (defaults to ADAPTRIX_THREADS, then logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic three-manifold benchmark dataset.
    Generate(GenerateArgs),
    /// Estimate the intrinsic dimension and per-point neighborhood orders.
    Estimate(EstimateArgs),
    /// Embed a dataset with an adaptive (or fixed-k) method.
    Embed(EmbedArgs),
    /// Embed, cluster with K-means, and score against the labels.
    Evaluate(EvaluateArgs),
    /// Cross-validated out-of-sample classification on the embedding.
    Supervised(SupervisedArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV path.
    #[arg(long)]
    input: PathBuf,

    /// Treat the final column as integer labels.
    #[arg(long)]
    labels: bool,

    /// Cell delimiter.
    #[arg(long, default_value_t = ',')]
    delimiter: char,

    /// Skip one header line.
    #[arg(long)]
    header: bool,
}

impl InputArgs {
    fn load(&self) -> Result<PointCloud, Error> {
        dataset::load_csv_with_options(&self.input, self.labels, self.delimiter, self.header)
    }
}

#[derive(Args)]
struct EstimatorArgs {
    /// Homogeneity-test significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Ball radius ratio r_A / r_B.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,

    /// Smallest tested neighbor order.
    #[arg(long, default_value_t = 2)]
    k_min: usize,

    /// Cap on the neighbor order (default min(n - 2, 1000)).
    #[arg(long)]
    k_max: Option<usize>,
}

impl EstimatorArgs {
    fn config(&self) -> AbideConfig {
        AbideConfig {
            alpha: self.alpha,
            tau: self.tau,
            k_min: self.k_min,
            k_max: self.k_max,
            ..AbideConfig::default()
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Points sampled on each of the three shapes.
    #[arg(long)]
    per_manifold: usize,

    /// Noise deviation on the signal coordinates.
    #[arg(long, default_value_t = dataset::DEFAULT_NOISE_SIGMA)]
    noise_sigma: f64,

    /// Count of pure-noise coordinates appended to the three signal ones.
    #[arg(long, default_value_t = 17)]
    noise_dims: usize,

    /// Output CSV (labels in the final column).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    estimator: EstimatorArgs,

    /// Include the full per-point k* vector in the report.
    #[arg(long)]
    emit_kstar: bool,

    /// Include wall-clock timings (makes reports run-dependent).
    #[arg(long)]
    timing: bool,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Lle,
    Spectral,
    Umap,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Lle => Method::Lle,
            MethodArg::Spectral => Method::Spectral,
            MethodArg::Umap => Method::Umap,
        }
    }
}

fn parse_k_policy(text: &str) -> Result<KPolicy, String> {
    if text == "median" {
        return Ok(KPolicy::FixedMedian);
    }
    text.parse::<usize>()
        .map(KPolicy::Fixed)
        .map_err(|_| format!("--fixed-k takes a positive integer or 'median', got {text:?}"))
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    estimator: EstimatorArgs,

    /// Embedding method.
    #[arg(long, value_enum)]
    method: MethodArg,

    /// Projection dimension override (default: the rounded estimate d*).
    #[arg(long)]
    dim: Option<usize>,

    /// Fixed neighbor order baseline: an integer or 'median'.
    #[arg(long, value_parser = parse_k_policy)]
    fixed_k: Option<KPolicy>,

    /// Layout epochs (umap only).
    #[arg(long, default_value_t = 500)]
    epochs: usize,

    /// Output embedding CSV.
    #[arg(long)]
    out: PathBuf,

    #[arg(long)]
    timing: bool,

    /// Sidecar JSON report path (default stdout).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    estimator: EstimatorArgs,

    #[arg(long, value_enum)]
    method: MethodArg,

    #[arg(long)]
    dim: Option<usize>,

    #[arg(long, value_parser = parse_k_policy)]
    fixed_k: Option<KPolicy>,

    #[arg(long, default_value_t = 500)]
    epochs: usize,

    /// Sweep fixed neighbor orders, e.g. neighbors=5:50:5, writing a metric
    /// grid CSV to --grid-out.
    #[arg(long)]
    grid: Option<String>,

    /// Metric grid output path (grid mode).
    #[arg(long)]
    grid_out: Option<PathBuf>,

    #[arg(long)]
    timing: bool,

    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SupervisedArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    estimator: EstimatorArgs,

    /// Cross-validation folds.
    #[arg(long, default_value_t = 3)]
    folds: usize,

    /// Holdout fraction; switches from k-fold to repeated holdout.
    #[arg(long)]
    holdout: Option<f64>,

    /// Holdout repeats.
    #[arg(long, default_value_t = 3)]
    repeats: usize,

    #[arg(long, value_parser = parse_k_policy)]
    fixed_k: Option<KPolicy>,

    #[arg(long)]
    timing: bool,

    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();

    let threads = cli.threads.or_else(|| {
        std::env::var("ADAPTRIX_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("adaptrix: could not configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("adaptrix: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(match err.category() {
                ErrorCategory::Argument => 2,
                ErrorCategory::Data => 3,
                ErrorCategory::Numerical => 4,
            })
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Generate(args) => cmd_generate(cli, args),
        Command::Estimate(args) => cmd_estimate(cli, args),
        Command::Embed(args) => cmd_embed(cli, args),
        Command::Evaluate(args) => cmd_evaluate(cli, args),
        Command::Supervised(args) => cmd_supervised(cli, args),
    }
}

fn emit_report<T: serde::Serialize>(report: &T, path: Option<&PathBuf>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(report).expect("reports serialize");
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|source| Error::Io {
            path: p.clone(),
            source,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_generate(cli: &Cli, args: &GenerateArgs) -> Result<(), Error> {
    let cloud = dataset::generate_manifolds(
        args.per_manifold,
        args.noise_sigma,
        args.noise_dims,
        mix(&[cli.seed, 0x6765_6e]),
    )?;
    dataset::save_cloud(&args.out, &cloud)?;
    let report = GenerateReport {
        schema_version: SCHEMA_VERSION,
        command: "generate",
        n: cloud.n(),
        dim: cloud.dim(),
        classes: cloud.n_classes().unwrap_or(0),
        noise_sigma: args.noise_sigma,
        seed: cli.seed,
        out: args.out.display().to_string(),
    };
    emit_report(&report, None)
}

fn cmd_estimate(cli: &Cli, args: &EstimateArgs) -> Result<(), Error> {
    let cloud = args.input.load()?;
    let config = args.estimator.config();
    let start = Instant::now();
    let result = abide(&cloud, &config)?;
    let elapsed = start.elapsed().as_secs_f64();
    let summary = kstar_summary(&result);
    let report = EstimateReport {
        schema_version: SCHEMA_VERSION,
        command: "estimate",
        input: args.input.input.display().to_string(),
        n: cloud.n(),
        dim: cloud.dim(),
        alpha: config.alpha,
        tau: config.tau,
        d_hat: result.d_hat,
        d_star: result.d_star,
        converged: result.converged,
        iterations: result.trace.len(),
        trace: result.trace.clone(),
        kstar: summary.into(),
        k_star: args.emit_kstar.then(|| result.k_star.clone()),
        elapsed_seconds: args.timing.then_some(elapsed),
        seed: cli.seed,
    };
    emit_report(&report, args.report.as_ref())
}

fn reduce_config(est: &EstimatorArgs, policy: Option<KPolicy>, epochs: usize, seed: u64) -> ReduceConfig {
    ReduceConfig {
        abide: est.config(),
        umap: UmapConfig {
            n_epochs: epochs,
            seed: mix(&[seed, 0x756d_6170]),
            ..UmapConfig::default()
        },
        k_policy: policy.unwrap_or_default(),
    }
}

fn policy_name(policy: KPolicy) -> String {
    match policy {
        KPolicy::Adaptive => "adaptive".into(),
        KPolicy::Fixed(k) => format!("fixed:{k}"),
        KPolicy::FixedMedian => "fixed:median".into(),
    }
}

fn cmd_embed(cli: &Cli, args: &EmbedArgs) -> Result<(), Error> {
    let cloud = args.input.load()?;
    let config = reduce_config(&args.estimator, args.fixed_k, args.epochs, cli.seed);
    let start = Instant::now();
    let (estimate, embedding) =
        adaptive_reduce(&cloud, args.method.into(), args.dim, &config)?;
    let elapsed = start.elapsed().as_secs_f64();
    dataset::save_matrix(&args.out, embedding.coords.view())?;
    let report = EmbedReport {
        schema_version: SCHEMA_VERSION,
        command: "embed",
        input: args.input.input.display().to_string(),
        method: Method::from(args.method).name(),
        n: cloud.n(),
        d_hat: estimate.d_hat,
        d_star: estimate.d_star,
        d_used: embedding.d_proj,
        k_policy: policy_name(config.k_policy),
        seed: cli.seed,
        out: args.out.display().to_string(),
        elapsed_seconds: args.timing.then_some(elapsed),
    };
    emit_report(&report, args.report.as_ref())
}

fn parse_grid(text: &str) -> Result<Vec<usize>, Error> {
    let spec = text.strip_prefix("neighbors=").ok_or_else(|| {
        Error::InvalidArgument(format!("--grid expects neighbors=START:END:STEP, got {text:?}"))
    })?;
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(
            "--grid expects neighbors=START:END:STEP".into(),
        ));
    }
    let parse = |s: &str| -> Result<usize, Error> {
        s.parse()
            .map_err(|_| Error::InvalidArgument(format!("bad grid number {s:?}")))
    };
    let (start, end, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
    if start == 0 || step == 0 || end < start {
        return Err(Error::InvalidArgument(
            "grid needs 0 < START <= END and STEP > 0".into(),
        ));
    }
    Ok((start..=end).step_by(step).collect())
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<(), Error> {
    let cloud = args.input.load()?;
    let labels = cloud
        .labels()
        .ok_or_else(|| Error::InvalidArgument("evaluate needs labeled input (--labels)".into()))?
        .to_vec();
    let n_clusters = cloud.n_classes().unwrap_or(1).max(1);
    let config = reduce_config(&args.estimator, args.fixed_k, args.epochs, cli.seed);
    let kmeans_seed = mix(&[cli.seed, 0x6b6d_6561_6e73]);

    let start = Instant::now();
    let (estimate, embedding) =
        adaptive_reduce(&cloud, args.method.into(), args.dim, &config)?;
    let fit = kmeans(embedding.coords.view(), n_clusters, kmeans_seed)?;
    let scores = cluster_eval(&labels, &fit.labels)?;
    let elapsed = start.elapsed().as_secs_f64();

    let grid = match (&args.grid, &args.grid_out) {
        (Some(grid_text), Some(grid_out)) => {
            let ks = parse_grid(grid_text)?;
            let mut lines = String::from("k,ari,homogeneity,completeness,v_measure\n");
            for &k in &ks {
                let fixed = ReduceConfig {
                    k_policy: KPolicy::Fixed(k),
                    ..config.clone()
                };
                let emb = reduce_with_estimate(
                    &cloud,
                    args.method.into(),
                    embedding.d_proj,
                    &estimate,
                    &fixed,
                )?;
                let fit = kmeans(emb.coords.view(), n_clusters, kmeans_seed)?;
                let s = cluster_eval(&labels, &fit.labels)?;
                lines.push_str(&format!(
                    "{k},{},{},{},{}\n",
                    s.ari, s.homogeneity, s.completeness, s.v_measure
                ));
            }
            std::fs::write(grid_out, lines).map_err(|source| Error::Io {
                path: grid_out.clone(),
                source,
            })?;
            Some(grid_out.display().to_string())
        }
        (Some(_), None) => {
            return Err(Error::InvalidArgument(
                "--grid requires --grid-out PATH".into(),
            ))
        }
        _ => None,
    };

    let report = EvaluateReport {
        schema_version: SCHEMA_VERSION,
        command: "evaluate",
        input: args.input.input.display().to_string(),
        method: Method::from(args.method).name(),
        n: cloud.n(),
        d_star: estimate.d_star,
        d_used: embedding.d_proj,
        k_policy: policy_name(config.k_policy),
        n_clusters,
        ari: scores.ari,
        homogeneity: scores.homogeneity,
        completeness: scores.completeness,
        v_measure: scores.v_measure,
        kmeans_inertia: fit.inertia,
        grid_out: grid,
        seed: cli.seed,
        elapsed_seconds: args.timing.then_some(elapsed),
    };
    emit_report(&report, args.report.as_ref())
}

fn cmd_supervised(cli: &Cli, args: &SupervisedArgs) -> Result<(), Error> {
    let cloud = args.input.load()?;
    if cloud.labels().is_none() {
        return Err(Error::InvalidArgument(
            "supervised runs need labeled input (--labels)".into(),
        ));
    }
    let pipeline = SupervisedLlePipeline {
        abide: args.estimator.config(),
        k_policy: args.fixed_k.unwrap_or_default(),
        ..SupervisedLlePipeline::default()
    };

    let start = Instant::now();
    let (mode, folds) = match args.holdout {
        None => {
            let report = kfold_cv(&cloud, args.folds, &pipeline, mix(&[cli.seed, 0x6376]))?;
            (
                "kfold".to_string(),
                report
                    .folds
                    .iter()
                    .map(|f| FoldReport {
                        accuracy: f.accuracy,
                        f1_macro: f.f1_macro,
                    })
                    .collect::<Vec<_>>(),
            )
        }
        Some(frac) => {
            if !(0.0 < frac && frac < 1.0) {
                return Err(Error::InvalidArgument(
                    "--holdout fraction must lie in (0, 1)".into(),
                ));
            }
            let mut folds = Vec::new();
            for rep in 0..args.repeats {
                let m = holdout_metrics(&cloud, frac, &pipeline, mix(&[cli.seed, 0x686f, rep as u64]))?;
                folds.push(m);
            }
            ("holdout".to_string(), folds)
        }
    };
    let elapsed = start.elapsed().as_secs_f64();

    let mean_accuracy = folds.iter().map(|f| f.accuracy).sum::<f64>() / folds.len() as f64;
    let mean_f1 = folds.iter().map(|f| f.f1_macro).sum::<f64>() / folds.len() as f64;
    let report = SupervisedReport {
        schema_version: SCHEMA_VERSION,
        command: "supervised",
        input: args.input.input.display().to_string(),
        mode,
        folds,
        mean_accuracy,
        mean_f1,
        k_policy: policy_name(pipeline.k_policy),
        seed: cli.seed,
        elapsed_seconds: args.timing.then_some(elapsed),
    };
    emit_report(&report, args.report.as_ref())
}

fn holdout_metrics(
    cloud: &PointCloud,
    frac: f64,
    pipeline: &SupervisedLlePipeline,
    seed: u64,
) -> Result<FoldReport, Error> {
    use adaptrix::evaluate::{accuracy, f1_macro, holdout_indices, FoldPipeline};

    let labels = cloud.labels().expect("checked by caller");
    let (test_idx, train_idx) = holdout_indices(cloud.n(), frac, seed)?;
    let train = cloud.select(&train_idx)?;
    let test = cloud.coords().select(Axis(0), &test_idx);
    let truth: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
    let pred = pipeline.fit_predict(&train, test.view(), seed)?;
    Ok(FoldReport {
        accuracy: accuracy(&truth, &pred)?,
        f1_macro: f1_macro(&truth, &pred)?,
    })
}
