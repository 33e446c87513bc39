use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{ensure, Context};
use clap::{ArgGroup, Parser, ValueEnum};

use sgtsne::synth::stochastic_from_knn_distances;
use sgtsne::{
    embed, load_graph, perplexity_equalize, rescale, EmbedConfig, GraphFormat, GridConfig,
    InitKind, PerplexityConfig, ReorderStrategy, RescalingConfig, SparseGraph, ValueKind,
};
use sgtsne_cli::{recall_report, write_embedding, write_kl_trace, write_recall, RunManifest};

/// Embed a sparse stochastic graph into 1, 2, or 3 dimensions.
///
/// The graph is conditioned row by row (--lambda rescaling for weight
/// inputs, --perplexity equalization for squared-distance inputs),
/// symmetrized, and laid out by gradient descent. Outputs land in
/// --outdir: embedding.tsv, kl_trace.tsv, manifest.txt, and recall.tsv
/// when --recall-k is given.
#[derive(Parser)]
#[command(name = "sg-embed", version)]
#[command(group(ArgGroup::new("conditioning").required(true).args(["lambda", "perplexity"])))]
struct Args {
    /// Input graph: MatrixMarket (.mtx) or TSV edge list
    #[arg(long)]
    input: PathBuf,

    /// Input format; guessed from the extension when omitted
    #[arg(long, value_enum)]
    format: Option<FormatArg>,

    /// How to read edge values
    #[arg(long, value_enum, default_value_t = ValuesArg::Weight)]
    values: ValuesArg,

    /// Rescale every row's kernel sum to this target mass
    #[arg(long)]
    lambda: Option<f64>,

    /// Equalize every row's entropy to log of this perplexity;
    /// requires --values squared-distance
    #[arg(long)]
    perplexity: Option<f64>,

    /// Embedding dimension (1, 2, or 3)
    #[arg(long, default_value_t = 2)]
    dim: usize,

    /// Gradient descent iterations
    #[arg(long, default_value_t = 1000)]
    iters: usize,

    /// Leading iterations with the attractive term exaggerated
    #[arg(long, default_value_t = 250)]
    exag_iters: usize,

    /// Early exaggeration factor
    #[arg(long, default_value_t = 12.0)]
    alpha: f64,

    /// Learning rate
    #[arg(long, default_value_t = 200.0)]
    eta: f64,

    /// Seed for the initial coordinates
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Initial coordinate distribution
    #[arg(long, value_enum, default_value_t = InitArg::Uniform)]
    init: InitArg,

    /// Width of the initial distribution; defaults to 1 for uniform
    /// and 1e-4 for gaussian
    #[arg(long)]
    init_scale: Option<f64>,

    /// Row ordering for the attractive pass
    #[arg(long, value_enum, default_value_t = ReorderArg::BfsRcm)]
    reorder: ReorderArg,

    /// Per-vertex cluster labels, one integer per line, vertex order
    #[arg(long, required_if_eq("reorder", "cluster-hint"))]
    cluster_file: Option<PathBuf>,

    /// Worker threads; 1 makes runs bit-reproducible
    #[arg(long, default_value_t = 1)]
    threads: usize,

    /// Grid spacing override for the repulsive term
    #[arg(long)]
    grid_h: Option<f64>,

    /// All-pairs gradients instead of the grid factorization (slow,
    /// for verification on small inputs)
    #[arg(long)]
    exact: bool,

    /// Output directory, created if missing
    #[arg(long, default_value = ".")]
    outdir: PathBuf,

    /// Record the divergence every this many iterations (0 = final
    /// point only)
    #[arg(long, default_value_t = 50)]
    kl_log_every: usize,

    /// Write recall.tsv evaluated at this many embedding neighbors
    #[arg(long, num_args = 0..=1, default_missing_value = "90")]
    recall_k: Option<usize>,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    MatrixMarket,
    Tsv,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ValuesArg {
    Weight,
    SquaredDistance,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Uniform,
    Gaussian,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ReorderArg {
    Identity,
    BfsRcm,
    ClusterHint,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(args: &Args) -> anyhow::Result<()> {
    ensure!(args.threads >= 1, "--threads must be at least 1");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .context("building the worker pool")?;
    pool.install(|| pipeline(args))
}

fn pipeline(args: &Args) -> anyhow::Result<()> {
    let format = match args.format {
        Some(FormatArg::MatrixMarket) => GraphFormat::MatrixMarket,
        Some(FormatArg::Tsv) => GraphFormat::EdgeListTsv,
        None => GraphFormat::from_path(&args.input),
    };
    let kind = match args.values {
        ValuesArg::Weight => ValueKind::Weights,
        ValuesArg::SquaredDistance => ValueKind::SquaredDistances,
    };
    let (graph, stats) = load_graph(&args.input, format, kind)
        .with_context(|| format!("reading {}", args.input.display()))?;
    println!(
        "loaded {} vertices, {} edges ({} duplicates merged, {} self loops dropped)",
        graph.n(),
        graph.nnz(),
        stats.duplicates_merged,
        stats.self_loops_dropped
    );

    let conditioned = condition(args, graph)?;
    let joint = conditioned.symmetrize();

    let init = match args.init {
        InitArg::Uniform => InitKind::Uniform,
        InitArg::Gaussian => InitKind::Gaussian,
    };
    let init_scale = args.init_scale.unwrap_or(match args.init {
        InitArg::Uniform => 1.0,
        InitArg::Gaussian => 1e-4,
    });
    let reorder = match args.reorder {
        ReorderArg::Identity => ReorderStrategy::Identity,
        ReorderArg::BfsRcm => ReorderStrategy::BfsRcm,
        ReorderArg::ClusterHint => {
            let path = args
                .cluster_file
                .as_ref()
                .context("--reorder cluster-hint needs --cluster-file")?;
            ReorderStrategy::ClusterHint(load_labels(path, joint.n())?)
        }
    };
    let cfg = EmbedConfig {
        dim: args.dim,
        max_iter: args.iters,
        early_exag_iter: args.exag_iters,
        exaggeration: args.alpha,
        eta: args.eta,
        momentum_switch_iter: args.exag_iters,
        init,
        init_scale,
        seed: args.seed,
        kl_log_every: args.kl_log_every,
        grid: GridConfig {
            h_target: args.grid_h,
            ..GridConfig::default()
        },
        reorder,
        exact: args.exact,
        ..EmbedConfig::default()
    };

    fs::create_dir_all(&args.outdir)
        .with_context(|| format!("creating {}", args.outdir.display()))?;
    manifest(args, &cfg)
        .write_to(&args.outdir.join("manifest.txt"))
        .context("writing manifest.txt")?;

    let t0 = Instant::now();
    let result = embed(&joint, cfg)?;
    println!(
        "embedded in {:.1}s: divergence {:.6}{} after {} iterations",
        t0.elapsed().as_secs_f64(),
        result.final_kl,
        if result.final_kl_estimated {
            " (grid estimate)"
        } else {
            ""
        },
        result.iters
    );

    write_embedding(&args.outdir.join("embedding.tsv"), &result.y, args.dim)
        .context("writing embedding.tsv")?;
    write_kl_trace(&args.outdir.join("kl_trace.tsv"), &result.trace)
        .context("writing kl_trace.tsv")?;

    if let Some(k_eval) = args.recall_k {
        let rep = recall_report(&conditioned, &result.y, args.dim, k_eval)?;
        write_recall(&args.outdir.join("recall.tsv"), &rep).context("writing recall.tsv")?;
        println!("mean recall at {k_eval} neighbors: {:.4}", rep.mean);
    }
    Ok(())
}

/// Applies the selected row conditioning and reports what it did.
fn condition(args: &Args, graph: SparseGraph) -> anyhow::Result<SparseGraph> {
    match (args.lambda, args.perplexity) {
        (Some(lambda), None) => {
            let stochastic = match args.values {
                // distances become Gaussian affinities, bandwidth from
                // the row mean, before the mass rescaling
                ValuesArg::SquaredDistance => stochastic_from_knn_distances(&graph),
                ValuesArg::Weight => {
                    let mut g = graph;
                    g.normalize_rows()?;
                    g
                }
            };
            let (out, diag) = rescale(&stochastic, &RescalingConfig::new(lambda))?;
            if diag.degree1_rows_unchanged > 0 {
                println!(
                    "warning: {} single-neighbor rows passed through unchanged",
                    diag.degree1_rows_unchanged
                );
            }
            println!("rescaled rows to mass {lambda}");
            Ok(out)
        }
        (None, Some(perplexity)) => {
            ensure!(
                args.values == ValuesArg::SquaredDistance,
                "--perplexity interprets rows as squared neighbor distances; \
                 pass --values squared-distance"
            );
            let (out, _) = perplexity_equalize(&graph, &PerplexityConfig::new(perplexity))?;
            println!("equalized rows to perplexity {perplexity}");
            Ok(out)
        }
        _ => unreachable!("the parser requires exactly one conditioning flag"),
    }
}

/// One label per line, line number = vertex id.
fn load_labels(path: &PathBuf, n: usize) -> anyhow::Result<Vec<u32>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let labels: Vec<u32> = text
        .lines()
        .enumerate()
        .map(|(lno, line)| {
            line.trim()
                .parse::<u32>()
                .with_context(|| format!("{}:{}: bad label {line:?}", path.display(), lno + 1))
        })
        .collect::<anyhow::Result<_>>()?;
    ensure!(
        labels.len() == n,
        "{} has {} labels for {} vertices",
        path.display(),
        labels.len(),
        n
    );
    Ok(labels)
}

fn manifest(args: &Args, cfg: &EmbedConfig) -> RunManifest {
    let mut m = RunManifest::default();
    m.push("tool", concat!("sg-embed ", env!("CARGO_PKG_VERSION")));
    m.push("input", args.input.display());
    m.push(
        "format",
        match args.format {
            Some(FormatArg::MatrixMarket) => "matrix-market",
            Some(FormatArg::Tsv) => "tsv",
            None => "auto",
        },
    );
    m.push(
        "values",
        match args.values {
            ValuesArg::Weight => "weight",
            ValuesArg::SquaredDistance => "squared-distance",
        },
    );
    match (args.lambda, args.perplexity) {
        (Some(l), _) => m.push("lambda", l),
        (_, Some(u)) => m.push("perplexity", u),
        _ => {}
    }
    m.push("dim", cfg.dim);
    m.push("iters", cfg.max_iter);
    m.push("exag_iters", cfg.early_exag_iter);
    m.push("alpha", cfg.exaggeration);
    m.push("eta", cfg.eta);
    m.push("momentum", format!("{} {}", cfg.momentum_init, cfg.momentum_final));
    m.push(
        "init",
        match cfg.init {
            InitKind::Uniform => "uniform",
            InitKind::Gaussian => "gaussian",
        },
    );
    m.push("init_scale", cfg.init_scale);
    m.push("seed", cfg.seed);
    m.push(
        "reorder",
        match args.reorder {
            ReorderArg::Identity => "identity",
            ReorderArg::BfsRcm => "bfs-rcm",
            ReorderArg::ClusterHint => "cluster-hint",
        },
    );
    if let Some(path) = &args.cluster_file {
        m.push("cluster_file", path.display());
    }
    m.push("threads", args.threads);
    match cfg.grid.h_target {
        Some(h) => m.push("grid_h", h),
        None => m.push("grid_h", "auto"),
    }
    m.push("grid_order", cfg.grid.interp_order);
    m.push("exact", args.exact);
    m.push("kl_log_every", cfg.kl_log_every);
    if let Some(k) = args.recall_k {
        m.push("recall_k", k);
    }
    m
}
