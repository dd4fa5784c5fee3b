//! Seeded Monte-Carlo experiments: generate, cluster, score, aggregate.
//!
//! Every trial derives its seed from the base seed, the cell index and the
//! trial index, and aggregation always runs in index order, so results do not
//! depend on the number of worker threads. Wall-clock timings are the only
//! nondeterministic output; they can be switched off.

use std::io::Write;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::gsr::{candidate_subspaces, gsr_label, gsr_select, CoverageCount, GsrOptions, DEFAULT_EPS};
use crate::metrics::{clustering_error, neighborhood_selection_error, Labeling};
use crate::nsn::{fnsn, NeighborhoodMatrix, NsnParams, DEFAULT_MEMBERSHIP_TOL};
use crate::spectral::{spectral_cluster, SpectralOptions};
use crate::synthgen::{gen_fully_random, gen_semi_random, make_equi_affinity_bases, substream, ModelKind};

/// Default ceiling for the predicted cost `sum N^2 p K trials` of a grid.
pub const DEFAULT_BUDGET: f64 = 1e11;

const CLUSTER_STREAM: u64 = 1 << 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    NsnGsr,
    NsnSpectral,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::NsnGsr => "nsn_gsr",
            Algorithm::NsnSpectral => "nsn_spectral",
        })
    }
}

/// Default `(K, k_max)` for a model and algorithm.
///
/// NSN+GSR uses `K = k_max = d` on fully random data and `K = d - 1`,
/// `k_max = ceil(2 ln d)` on semi-random data; NSN+spectral uses
/// `K = k_max = d`. Results are clamped to `1 <= k_max <= K`.
pub fn default_nsn_dims(model: ModelKind, algorithm: Algorithm, d: usize) -> (usize, usize) {
    let (k, kmax) = match (algorithm, model) {
        (Algorithm::NsnGsr, ModelKind::SemiRandom { .. }) => {
            (d.saturating_sub(1), (2.0 * (d as f64).ln()).ceil() as usize)
        }
        _ => (d, d),
    };
    let k = k.max(1);
    (k, kmax.clamp(1, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub algorithm: Algorithm,
    pub p: usize,
    pub d: usize,
    /// Number of subspaces.
    pub num_subspaces: usize,
    /// Points per subspace.
    pub n: usize,
    /// `K`; the algorithm default when unset.
    pub neighbors: Option<usize>,
    /// `k_max`; the algorithm default when unset.
    pub max_dim: Option<usize>,
    pub eps: f64,
    pub membership_tol: f64,
    pub coverage: CoverageCount,
    pub trials: usize,
    pub seed: u64,
    /// Record wall-clock times; when off all timing fields are zero.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(model: ModelKind, algorithm: Algorithm, p: usize, d: usize, num_subspaces: usize, n: usize) -> Self {
        ExperimentConfig {
            model,
            algorithm,
            p,
            d,
            num_subspaces,
            n,
            neighbors: None,
            max_dim: None,
            eps: DEFAULT_EPS,
            membership_tol: DEFAULT_MEMBERSHIP_TOL,
            coverage: CoverageCount::AllPoints,
            trials: 1,
            seed: 0,
            timing: true,
        }
    }

    /// `(K, k_max)` after applying defaults.
    pub fn nsn_dims(&self) -> (usize, usize) {
        let (k, kmax) = default_nsn_dims(self.model, self.algorithm, self.d);
        let k = self.neighbors.unwrap_or(k);
        (k, self.max_dim.unwrap_or(kmax.min(k)))
    }

    pub fn nsn_params(&self) -> NsnParams {
        let (k, kmax) = self.nsn_dims();
        NsnParams::new(k, kmax).with_membership_tol(self.membership_tol)
    }

    pub fn total_points(&self) -> usize {
        self.num_subspaces * self.n
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("p", self.p),
            ("d", self.d),
            ("L", self.num_subspaces),
            ("n", self.n),
            ("trials", self.trials),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidDims(format!("{name} must be positive")));
        }
        if self.d > self.p {
            return Err(Error::InvalidDims(format!("need d <= p, got p={} d={}", self.p, self.d)));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::BadParams("eps must be positive".into()));
        }
        self.nsn_params().validate(self.total_points())
    }

    /// Predicted work `N^2 p K trials`.
    pub fn predicted_cost(&self) -> f64 {
        let n = self.total_points() as f64;
        n * n * self.p as f64 * self.nsn_dims().0 as f64 * self.trials as f64
    }
}

/// Everything needed to cluster one point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub algorithm: Algorithm,
    pub nsn: NsnParams,
    /// Subspace dimension for GSR candidates.
    pub d: usize,
    /// Number of clusters; GSR covers all points and spectral clustering
    /// estimates the count when unset.
    pub num_clusters: Option<usize>,
    pub eps: f64,
    pub coverage: CoverageCount,
    pub spectral: SpectralOptions,
    /// Seeds the k-means replicates.
    pub seed: u64,
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub neighborhoods: NeighborhoodMatrix,
    pub labels: Labeling,
    /// Clusters used by the final labeling step.
    pub num_clusters: usize,
    /// Whether `num_clusters` was estimated rather than given.
    pub estimated: bool,
    pub nsn_seconds: f64,
    pub cluster_seconds: f64,
}

fn timed<T>(on: bool, f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, if on { start.elapsed().as_secs_f64() } else { 0.0 })
}

/// NSN followed by GSR or spectral clustering.
///
/// When GSR runs out of uncovered points before picking `num_clusters`
/// subspaces, points are labeled with the subspaces picked so far.
pub fn cluster_points(points: &PointSet, cfg: &PipelineConfig) -> Result<ClusterOutcome> {
    let points = points.normalize()?;
    let (w, nsn_seconds) = timed(cfg.timing, || fnsn(&points, &cfg.nsn));
    let w = w?;
    let (clustered, cluster_seconds) = timed(cfg.timing, || -> Result<(Labeling, usize, bool)> {
        match cfg.algorithm {
            Algorithm::NsnGsr => {
                let candidates = candidate_subspaces(&points, &w, cfg.d)?;
                let opts = GsrOptions {
                    eps: cfg.eps,
                    num_subspaces: cfg.num_clusters,
                    coverage: cfg.coverage,
                };
                let subspaces = match gsr_select(&points, &candidates, &opts) {
                    Ok((s, _)) => s,
                    Err(Error::Exhausted { subspaces, .. }) => subspaces,
                    Err(e) => return Err(e),
                };
                let labels = gsr_label(&points, &subspaces)?;
                Ok((labels, subspaces.len(), cfg.num_clusters.is_none()))
            }
            Algorithm::NsnSpectral => {
                let mut rng: ChaCha8Rng = substream(cfg.seed, CLUSTER_STREAM);
                let res = spectral_cluster(&w, cfg.num_clusters, &cfg.spectral, &mut rng)?;
                Ok((res.labels, res.num_clusters, res.estimated))
            }
        }
    });
    let (labels, num_clusters, estimated) = clustered?;
    Ok(ClusterOutcome {
        neighborhoods: w,
        labels,
        num_clusters,
        estimated,
        nsn_seconds,
        cluster_seconds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub ce: f64,
    pub nse: f64,
    pub nsn_seconds: f64,
    pub cluster_seconds: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in grid cell `cell`.
pub fn trial_seed(seed: u64, cell: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ cell) ^ trial)
}

/// One generate, cluster, score cycle with the given trial seed.
pub fn run_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialResult> {
    cfg.validate()?;
    let inst = match cfg.model {
        ModelKind::FullyRandom => gen_fully_random(cfg.p, cfg.d, cfg.num_subspaces, cfg.n, seed)?,
        ModelKind::SemiRandom { target_maxaff } => {
            let bases = make_equi_affinity_bases(cfg.p, cfg.d, cfg.num_subspaces, target_maxaff)?;
            gen_semi_random(&bases, cfg.n, seed)?
        }
    };
    let pipeline = PipelineConfig {
        algorithm: cfg.algorithm,
        nsn: cfg.nsn_params(),
        d: cfg.d,
        num_clusters: Some(cfg.num_subspaces),
        eps: cfg.eps,
        coverage: cfg.coverage,
        spectral: SpectralOptions::default(),
        seed,
        timing: cfg.timing,
    };
    let out = cluster_points(&inst.points, &pipeline)?;
    Ok(TrialResult {
        ce: clustering_error(&out.labels, &inst.truth)?,
        nse: neighborhood_selection_error(&out.neighborhoods, &inst.truth)?,
        nsn_seconds: out.nsn_seconds,
        cluster_seconds: out.cluster_seconds,
    })
}

/// Aggregate of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: String,
    pub algo: String,
    pub p: usize,
    pub d: usize,
    #[serde(rename = "L")]
    pub num_subspaces: usize,
    pub n: usize,
    #[serde(rename = "K")]
    pub neighbors: usize,
    pub kmax: usize,
    pub trials: usize,
    pub mean_ce: f64,
    pub mean_nse: f64,
    /// Fraction of trials with zero clustering error.
    pub exact_rate: f64,
    pub mean_nsn_s: f64,
    pub mean_cluster_s: f64,
}

impl CellResult {
    pub fn mean_runtime_s(&self) -> f64 {
        self.mean_nsn_s + self.mean_cluster_s
    }
}

fn run_cell_at(cfg: &ExperimentConfig, cell: u64) -> Result<CellResult> {
    cfg.validate()?;
    let results = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(cfg, trial_seed(cfg.seed, cell, t as u64)).map_err(|e| Error::Trial {
                trial: t,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let count = results.len() as f64;
    let mean = |f: fn(&TrialResult) -> f64| results.iter().map(f).sum::<f64>() / count;
    let (k, kmax) = cfg.nsn_dims();
    Ok(CellResult {
        model: cfg.model.to_string(),
        algo: cfg.algorithm.to_string(),
        p: cfg.p,
        d: cfg.d,
        num_subspaces: cfg.num_subspaces,
        n: cfg.n,
        neighbors: k,
        kmax,
        trials: cfg.trials,
        mean_ce: mean(|r| r.ce),
        mean_nse: mean(|r| r.nse),
        exact_rate: results.iter().filter(|r| r.ce == 0.0).count() as f64 / count,
        mean_nsn_s: mean(|r| r.nsn_seconds),
        mean_cluster_s: mean(|r| r.cluster_seconds),
    })
}

/// Runs `cfg.trials` seeded trials; this is cell 0 of a grid.
pub fn run_cell(cfg: &ExperimentConfig) -> Result<CellResult> {
    run_cell_at(cfg, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points per subspace as multiples of `d`; `n = round(ratio * d)`.
    pub n_over_d: Vec<f64>,
    pub p_values: Vec<usize>,
    /// Scale `d` with `p` to keep the base config's `d / p`.
    pub fixed_ratio: bool,
    pub budget: f64,
    /// Run even when the predicted cost exceeds the budget.
    pub force: bool,
}

impl GridSpec {
    pub fn new(n_over_d: Vec<f64>, p_values: Vec<usize>) -> Self {
        GridSpec {
            n_over_d,
            p_values,
            fixed_ratio: false,
            budget: DEFAULT_BUDGET,
            force: false,
        }
    }

    /// Cell configurations, `p` major, in cell-index order.
    pub fn cells(&self, base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
        if self.n_over_d.is_empty() || self.p_values.is_empty() {
            return Err(Error::InvalidDims("grid needs at least one n/d and one p value".into()));
        }
        if let Some(r) = self.n_over_d.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::BadParams(format!("n/d ratios must be positive, got {r}")));
        }
        let mut out = Vec::new();
        for &p in &self.p_values {
            let d = if self.fixed_ratio {
                ((p * base.d) as f64 / base.p as f64).round().max(1.0) as usize
            } else {
                base.d
            };
            for &r in &self.n_over_d {
                out.push(ExperimentConfig {
                    p,
                    d,
                    n: (r * d as f64).round().max(1.0) as usize,
                    ..*base
                });
            }
        }
        Ok(out)
    }

    pub fn predicted_cost(&self, base: &ExperimentConfig) -> Result<f64> {
        Ok(self.cells(base)?.iter().map(|c| c.predicted_cost()).sum())
    }
}

/// Runs every cell of the grid. Fails before running anything when the
/// predicted cost exceeds the budget and `force` is off.
pub fn run_grid(base: &ExperimentConfig, grid: &GridSpec) -> Result<Vec<CellResult>> {
    let cells = grid.cells(base)?;
    for c in &cells {
        c.validate()?;
    }
    let predicted: f64 = cells.iter().map(|c| c.predicted_cost()).sum();
    if predicted > grid.budget && !grid.force {
        return Err(Error::BudgetExceeded {
            predicted,
            budget: grid.budget,
        });
    }
    cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| run_cell_at(c, i as u64))
        .collect()
}

/// `%g`-style rendering with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{:.*}", (5 - exp) as usize, x))
    }
}

pub const CSV_HEADER: &str =
    "model,algo,p,d,L,n,K,kmax,trials,mean_ce,mean_nse,exact_rate,mean_nsn_s,mean_cluster_s";

pub fn write_csv<W: Write>(mut out: W, cells: &[CellResult]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.model,
            c.algo,
            c.p,
            c.d,
            c.num_subspaces,
            c.n,
            c.neighbors,
            c.kmax,
            c.trials,
            format_sig6(c.mean_ce),
            format_sig6(c.mean_nse),
            format_sig6(c.exact_rate),
            format_sig6(c.mean_nsn_s),
            format_sig6(c.mean_cluster_s),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    base: &'a ExperimentConfig,
    grid: &'a GridSpec,
    cells: &'a [CellResult],
}

pub fn write_json_summary<W: Write>(out: W, base: &ExperimentConfig, grid: &GridSpec, cells: &[CellResult]) -> Result<()> {
    serde_json::to_writer_pretty(out, &Summary { base, grid, cells })?;
    Ok(())
}
