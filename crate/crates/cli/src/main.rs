//! `gsc`: generate synthetic union-of-subspaces data, cluster point sets and
//! run Monte-Carlo experiment grids.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use gsc_core::gsr::{CoverageCount, DEFAULT_EPS};
use gsc_core::harness::{
    cluster_points, run_grid, write_csv, write_json_summary, Algorithm, ExperimentConfig, GridSpec, PipelineConfig,
    DEFAULT_BUDGET,
};
use gsc_core::io;
use gsc_core::metrics::{clustering_error, neighborhood_selection_error};
use gsc_core::nsn::{NsnParams, DEFAULT_MEMBERSHIP_TOL};
use gsc_core::spectral::{EmbeddingKind, SpectralOptions};
use gsc_core::synthgen::{gen_fully_random, gen_semi_random, make_equi_affinity_bases, ModelKind};

#[derive(Parser)]
#[command(name = "gsc", version, about = "Greedy subspace clustering toolkit")]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, env = "GSC_THREADS")]
    threads: Option<usize>,

    /// TOML file supplying any subcommand flag; the command line wins
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance: points.csv, labels.csv, bases.json
    Generate(GenerateArgs),
    /// Cluster a points CSV: writes neighbors.csv and labels.csv
    Cluster(ClusterArgs),
    /// Run an experiment grid: writes results.csv and summary.json
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModelArg {
    FullyRandom,
    SemiRandom,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum AlgoArg {
    NsnGsr,
    NsnSpectral,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::NsnGsr => Algorithm::NsnGsr,
            AlgoArg::NsnSpectral => Algorithm::NsnSpectral,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum EmbeddingArg {
    Normalized,
    Unnormalized,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum CoverageArg {
    AllPoints,
    Uncovered,
}

fn model_kind(model: ModelArg, maxaff: Option<f64>) -> Result<ModelKind> {
    Ok(match model {
        ModelArg::FullyRandom => ModelKind::FullyRandom,
        ModelArg::SemiRandom => ModelKind::SemiRandom {
            target_maxaff: maxaff.context("--maxaff is required for the semi-random model")?,
        },
    })
}

#[derive(Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Target maximum affinity (semi-random model)
    #[arg(long)]
    maxaff: Option<f64>,
    /// Ambient dimension
    #[arg(long)]
    p: Option<usize>,
    /// Subspace dimension
    #[arg(long)]
    d: Option<usize>,
    /// Number of subspaces
    #[arg(long = "L")]
    #[serde(rename = "L")]
    l: Option<usize>,
    /// Points per subspace
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ClusterArgs {
    /// Points CSV, one point per row
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    /// Neighbors per point (defaults to d)
    #[arg(long = "K")]
    #[serde(rename = "K")]
    k: Option<usize>,
    /// Maximum selection subspace dimension (defaults to K)
    #[arg(long)]
    kmax: Option<usize>,
    /// Subspace dimension
    #[arg(long)]
    d: Option<usize>,
    /// Number of clusters; estimated when omitted
    #[arg(long = "L")]
    #[serde(rename = "L")]
    l: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    membership_tol: Option<f64>,
    #[arg(long, value_enum)]
    coverage: Option<CoverageArg>,
    #[arg(long, value_enum)]
    embedding: Option<EmbeddingArg>,
    /// k-means replicates
    #[arg(long)]
    replicates: Option<usize>,
    /// Seed for k-means
    #[arg(long)]
    seed: Option<u64>,
    /// Ground-truth labels; prints CE and NSE when given
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    maxaff: Option<f64>,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    l: Option<usize>,
    /// Points per subspace for a single cell (ignored with --n-over-d)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    k: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    membership_tol: Option<f64>,
    #[arg(long, value_enum)]
    coverage: Option<CoverageArg>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated n/d ratios
    #[arg(long, value_delimiter = ',')]
    n_over_d: Option<Vec<f64>>,
    /// Comma-separated ambient dimensions (defaults to --p)
    #[arg(long, value_delimiter = ',')]
    p_values: Option<Vec<usize>>,
    /// Scale d with p to keep d/p fixed
    #[arg(long)]
    #[serde(default)]
    fixed_ratio: bool,
    /// Maximum predicted cost sum(N^2 p K trials)
    #[arg(long)]
    budget: Option<f64>,
    /// Run even when the budget is exceeded
    #[arg(long)]
    #[serde(default)]
    force: bool,
    /// Report zero for all timings, making output fully reproducible
    #[arg(long)]
    #[serde(default)]
    no_timing: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Fills every flag missing from the command line with the config file's
/// value.
fn merge_config<T: Serialize + DeserializeOwned>(cli: T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(cli);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut merged = match serde_json::to_value(table)? {
        serde_json::Value::Object(m) => m,
        _ => unreachable!("a TOML table serializes to an object"),
    };
    if let serde_json::Value::Object(flags) = serde_json::to_value(cli)? {
        for (k, v) in flags {
            if !matches!(v, serde_json::Value::Null | serde_json::Value::Bool(false)) {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(serde_json::Value::Object(merged))
        .with_context(|| format!("invalid setting in {}", path.display()))
}

fn out_dir(dir: Option<PathBuf>) -> Result<PathBuf> {
    let dir = dir.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.with_context(|| format!("missing required flag --{flag}"))
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let model = model_kind(require(args.model, "model")?, args.maxaff)?;
    let (p, d, l, n) = (
        require(args.p, "p")?,
        require(args.d, "d")?,
        require(args.l, "L")?,
        require(args.n, "n")?,
    );
    let seed = args.seed.unwrap_or(0);
    let inst = match model {
        ModelKind::FullyRandom => gen_fully_random(p, d, l, n, seed)?,
        ModelKind::SemiRandom { target_maxaff } => {
            gen_semi_random(&make_equi_affinity_bases(p, d, l, target_maxaff)?, n, seed)?
        }
    };
    let dir = out_dir(args.out_dir)?;
    io::write_points(dir.join("points.csv"), &inst.points)?;
    io::write_labels(dir.join("labels.csv"), &inst.truth)?;
    io::write_bases(dir.join("bases.json"), &inst.bases)?;
    eprintln!("wrote {} points to {}", inst.points.len(), dir.display());
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let path = require(args.points, "points")?;
    let points = io::read_points(&path).with_context(|| format!("reading {}", path.display()))?;
    let algorithm: Algorithm = require(args.algo, "algo")?.into();
    let k = match (args.k, args.d) {
        (Some(k), _) => k,
        (None, Some(d)) => d,
        (None, None) => bail!("either --K or --d is required"),
    };
    let d = match (algorithm, args.d) {
        (Algorithm::NsnGsr, None) => bail!("--d is required for nsn-gsr"),
        (_, d) => d.unwrap_or(k),
    };
    let nsn = NsnParams::new(k, args.kmax.unwrap_or(k))
        .with_membership_tol(args.membership_tol.unwrap_or(DEFAULT_MEMBERSHIP_TOL));
    let cfg = PipelineConfig {
        algorithm,
        nsn,
        d,
        num_clusters: args.l,
        eps: args.eps.unwrap_or(DEFAULT_EPS),
        coverage: match args.coverage {
            Some(CoverageArg::Uncovered) => CoverageCount::Uncovered,
            _ => CoverageCount::AllPoints,
        },
        spectral: SpectralOptions {
            replicates: args.replicates.unwrap_or(SpectralOptions::default().replicates),
            embedding: match args.embedding {
                Some(EmbeddingArg::Unnormalized) => EmbeddingKind::Unnormalized,
                _ => EmbeddingKind::Normalized,
            },
            ..SpectralOptions::default()
        },
        seed: args.seed.unwrap_or(0),
        timing: false,
    };
    let out = cluster_points(&points, &cfg)?;
    let dir = out_dir(args.out_dir)?;
    io::write_edges(dir.join("neighbors.csv"), &out.neighborhoods)?;
    io::write_labels(dir.join("labels.csv"), &out.labels)?;

    let mut report = serde_json::Map::new();
    report.insert("num_clusters".into(), out.num_clusters.into());
    if out.estimated {
        report.insert("estimated_L".into(), out.num_clusters.into());
    }
    if let Some(truth_path) = args.truth {
        let truth = io::read_labels(&truth_path).with_context(|| format!("reading {}", truth_path.display()))?;
        report.insert("ce".into(), clustering_error(&out.labels, &truth)?.into());
        report.insert("nse".into(), neighborhood_selection_error(&out.neighborhoods, &truth)?.into());
    }
    println!("{}", serde_json::Value::Object(report));
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let model = model_kind(args.model.unwrap_or(ModelArg::FullyRandom), args.maxaff)?;
    let algorithm: Algorithm = args.algo.unwrap_or(AlgoArg::NsnGsr).into();
    let (p, d) = (require(args.p, "p")?, require(args.d, "d")?);
    let l = args.l.unwrap_or(5);
    let n_over_d = match (args.n_over_d, args.n) {
        (Some(r), _) => r,
        (None, Some(n)) => vec![n as f64 / d as f64],
        (None, None) => bail!("either --n-over-d or --n is required"),
    };
    let mut base = ExperimentConfig::new(model, algorithm, p, d, l, 1);
    base.neighbors = args.k;
    base.max_dim = args.kmax;
    base.eps = args.eps.unwrap_or(DEFAULT_EPS);
    base.membership_tol = args.membership_tol.unwrap_or(DEFAULT_MEMBERSHIP_TOL);
    base.coverage = match args.coverage {
        Some(CoverageArg::Uncovered) => CoverageCount::Uncovered,
        _ => CoverageCount::AllPoints,
    };
    base.trials = args.trials.unwrap_or(10);
    base.seed = args.seed.unwrap_or(0);
    base.timing = !args.no_timing;
    let grid = GridSpec {
        n_over_d,
        p_values: args.p_values.unwrap_or_else(|| vec![p]),
        fixed_ratio: args.fixed_ratio,
        budget: args.budget.unwrap_or(DEFAULT_BUDGET),
        force: args.force,
    };
    let cells = run_grid(&base, &grid)?;
    let dir = out_dir(args.out_dir)?;
    let csv = dir.join("results.csv");
    write_csv(std::io::BufWriter::new(std::fs::File::create(&csv)?), &cells)?;
    let json = dir.join("summary.json");
    write_json_summary(std::io::BufWriter::new(std::fs::File::create(&json)?), &base, &grid, &cells)?;
    eprintln!("wrote {} cells to {} and {}", cells.len(), csv.display(), json.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let config = cli.config.as_deref();
    match cli.command {
        Command::Generate(a) => cmd_generate(merge_config(a, config)?),
        Command::Cluster(a) => cmd_cluster(merge_config(a, config)?),
        Command::Experiment(a) => cmd_experiment(merge_config(a, config)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
