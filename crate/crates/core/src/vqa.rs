//! Variational phase-and-mix ansätze over a quality landscape, optimized with
//! BFGS from seeded random starts, and the fixed-angle Grover baseline.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numopt::{bfgs_maximize, BfgsSettings, OptimizeError, OptimizeReport};
use crate::param_space::{binarize, QualityGrid};
use crate::statevector::{
    apply_mixer_in_place, apply_phase_in_place, expectation, grover_iterate, grover_success,
    success_probability, uniform_state, MixerFamily, MixerSpec, StateError, StateVector,
};

#[derive(Debug, Error)]
pub enum VqaError {
    #[error("{variant} at depth {depth} takes {expected} parameters, got {got}")]
    Arity {
        variant: Variant,
        depth: usize,
        expected: usize,
        got: usize,
    },
    #[error("no grid point exceeds the threshold ρ0 = {rho0}")]
    NoMarkedStates { rho0: f64 },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}

pub type Result<T> = std::result::Result<T, VqaError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    QaoaHypercube,
    QaoaComplete,
    QmoaComplete,
    QmoaCycle,
    Rdgs,
}

impl Variant {
    pub const VARIATIONAL: [Variant; 4] = [
        Variant::QaoaHypercube,
        Variant::QaoaComplete,
        Variant::QmoaComplete,
        Variant::QmoaCycle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::QaoaHypercube => "QAOA_HYPERCUBE",
            Variant::QaoaComplete => "QAOA_COMPLETE",
            Variant::QmoaComplete => "QMOA_COMPLETE",
            Variant::QmoaCycle => "QMOA_CYCLE",
            Variant::Rdgs => "RDGS",
        }
    }

    pub fn mixer(self) -> Option<MixerSpec> {
        let family = match self {
            Variant::QaoaHypercube => MixerFamily::HypercubeGlobal,
            Variant::QaoaComplete => MixerFamily::CompleteGlobal,
            Variant::QmoaComplete => MixerFamily::CompletePerDim,
            Variant::QmoaCycle => MixerFamily::CyclePerDim,
            Variant::Rdgs => return None,
        };
        Some(MixerSpec::new(family))
    }

    /// Parameters per layer: one phase angle plus the mixer's evolution times.
    pub fn params_per_layer(self) -> usize {
        self.mixer().map_or(0, |m| 1 + m.arity())
    }

    pub fn param_count(self, depth: usize) -> usize {
        self.params_per_layer() * depth
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = VqaError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Variant::VARIATIONAL
            .into_iter()
            .chain([Variant::Rdgs])
            .find(|v| v.name() == norm)
            .ok_or_else(|| VqaError::Invalid(format!("unknown variant {s:?}")))
    }
}

/// A raw quality grid together with its thresholding at `ρ0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    raw: QualityGrid,
    binary: QualityGrid,
    rho0: f64,
}

impl Landscape {
    /// `raw` may already be binary, in which case it serves as both costs.
    pub fn new(raw: QualityGrid, rho0: f64) -> Result<Self> {
        let binary = if raw.binary {
            raw.clone()
        } else {
            binarize(&raw, rho0).map_err(|e| VqaError::Invalid(e.to_string()))?
        };
        Ok(Self { raw, binary, rho0 })
    }

    pub fn raw(&self) -> &QualityGrid {
        &self.raw
    }

    pub fn binary(&self) -> &QualityGrid {
        &self.binary
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.raw.dims
    }

    pub fn len(&self) -> usize {
        self.raw.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.values.is_empty()
    }

    /// `J_S`, the number of points above threshold.
    pub fn marked_count(&self) -> usize {
        self.binary.marked_count().unwrap_or(0)
    }

    /// `Prob[f > ρ0]` of a state.
    pub fn success(&self, s: &StateVector) -> Result<f64> {
        Ok(success_probability(s, &self.binary, self.rho0)?)
    }
}

#[derive(Debug, Clone)]
pub struct AnsatzConfig {
    pub variant: Variant,
    pub depth: usize,
    pub landscape: Arc<Landscape>,
    /// Use the thresholded landscape as the phase and objective.
    pub binary_cost: bool,
    pub optimizer: BfgsSettings,
}

impl AnsatzConfig {
    pub fn new(variant: Variant, depth: usize, landscape: Arc<Landscape>) -> Self {
        Self {
            variant,
            depth,
            landscape,
            binary_cost: false,
            optimizer: BfgsSettings::default(),
        }
    }

    pub fn with_binary_cost(mut self, on: bool) -> Self {
        self.binary_cost = on;
        self
    }

    pub fn cost(&self) -> &QualityGrid {
        if self.binary_cost {
            self.landscape.binary()
        } else {
            self.landscape.raw()
        }
    }

    pub fn param_count(&self) -> usize {
        self.variant.param_count(self.depth)
    }
}

/// Final state of the ansatz from the uniform superposition: per layer the phase
/// `e^{-iγQ}` followed by the mixer. Parameters are laid out layer by layer as
/// `[γ, t]` (QAOA) or `[γ, t1, t2]` (QMOA). RDGS takes no parameters.
pub fn evaluate_ansatz(config: &AnsatzConfig, params: &[f64]) -> Result<StateVector> {
    let expected = config.param_count();
    if params.len() != expected {
        return Err(VqaError::Arity {
            variant: config.variant,
            depth: config.depth,
            expected,
            got: params.len(),
        });
    }
    let land = &config.landscape;
    let mut s = uniform_state(land.dims())?;
    let Some(mixer) = config.variant.mixer() else {
        if config.depth == 0 {
            return Ok(s);
        }
        if land.marked_count() == 0 {
            return Err(VqaError::NoMarkedStates { rho0: land.rho0() });
        }
        return Ok(grover_iterate(&s, land.binary(), config.depth)?);
    };
    let cost = config.cost();
    for layer in params.chunks_exact(config.variant.params_per_layer()) {
        apply_phase_in_place(&mut s, layer[0], cost)?;
        apply_mixer_in_place(&mut s, &mixer, &layer[1..])?;
    }
    Ok(s)
}

/// Objective value `⟨Q⟩` of the configured cost at `params`.
pub fn objective(config: &AnsatzConfig, params: &[f64]) -> Result<f64> {
    let s = evaluate_ansatz(config, params)?;
    Ok(expectation(&s, config.cost())?)
}

/// Seeded starting point: `γ ~ U(0, 1/2]`; mixing times `~ U(0, 1/2]` for hypercube
/// and cycle mixers and `~ U(0, 2π/J_eff]` for complete-graph mixers, with `J_eff`
/// the size of the graph being mixed.
pub fn initial_params(config: &AnsatzConfig, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |hi: f64| (1.0 - rng.random::<f64>()) * hi;
    let (j1, j2) = config.landscape.dims();
    let mut out = Vec::with_capacity(config.param_count());
    for _ in 0..config.depth {
        out.push(draw(0.5));
        match config.variant {
            Variant::QaoaHypercube => out.push(draw(0.5)),
            Variant::QaoaComplete => out.push(draw(2.0 * PI / (j1 * j2) as f64)),
            Variant::QmoaComplete => {
                out.push(draw(2.0 * PI / j1 as f64));
                out.push(draw(2.0 * PI / j2 as f64));
            }
            Variant::QmoaCycle => {
                out.push(draw(0.5));
                out.push(draw(0.5));
            }
            Variant::Rdgs => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub variant: Variant,
    pub depth: usize,
    pub binary_cost: bool,
    pub params_star: Vec<f64>,
    /// `⟨Q⟩` of the cost that was optimized (binary or raw).
    pub expectation: f64,
    /// `Prob[ρ > ρ0]` of the final state.
    pub success_prob: f64,
    pub seed: Option<u64>,
    pub report: Option<OptimizeReport>,
    /// Phase-oracle applications: objective evaluations times depth.
    pub oracle_queries: usize,
    pub wall_time: f64,
}

impl RunResult {
    /// Equality ignoring the wall-clock time.
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        let mut a = self.clone();
        a.wall_time = other.wall_time;
        a == *other
    }
}

fn finish(
    config: &AnsatzConfig,
    params: Vec<f64>,
    seed: Option<u64>,
    report: Option<OptimizeReport>,
    start: Instant,
) -> Result<RunResult> {
    let s = evaluate_ansatz(config, &params)?;
    let evals = report.as_ref().map_or(0, |r| r.objective_evals);
    Ok(RunResult {
        variant: config.variant,
        depth: config.depth,
        binary_cost: config.binary_cost,
        expectation: expectation(&s, config.cost())?,
        success_prob: config.landscape.success(&s)?,
        params_star: params,
        seed,
        report,
        oracle_queries: if config.variant == Variant::Rdgs { config.depth } else { evals * config.depth },
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Maximizes `⟨Q⟩` with BFGS from the seeded starting point.
pub fn optimize_run(config: &AnsatzConfig, seed: u64) -> Result<RunResult> {
    let x0 = initial_params(config, seed);
    optimize_from(config, &x0, Some(seed))
}

/// Maximizes `⟨Q⟩` with BFGS from a given starting point.
pub fn optimize_from(config: &AnsatzConfig, x0: &[f64], seed: Option<u64>) -> Result<RunResult> {
    if config.variant == Variant::Rdgs {
        return Err(VqaError::Invalid("RDGS has no parameters to optimize".into()));
    }
    if config.depth == 0 {
        return Err(VqaError::Invalid("optimization needs depth ≥ 1".into()));
    }
    if x0.len() != config.param_count() {
        return Err(VqaError::Arity {
            variant: config.variant,
            depth: config.depth,
            expected: config.param_count(),
            got: x0.len(),
        });
    }
    let start = Instant::now();
    let f = |x: &[f64]| objective(config, x).unwrap_or(f64::NAN);
    match bfgs_maximize(f, x0, &config.optimizer) {
        Ok(report) => finish(config, report.x_star.clone(), seed, Some(report), start),
        Err(OptimizeError::Evaluation {
            partial: Some(report),
            ..
        }) => {
            log::warn!("{} p={} seed={seed:?}: objective failed; keeping last valid iterate", config.variant, config.depth);
            finish(config, report.x_star.clone(), seed, Some(*report), start)
        }
        Err(e) => Err(e.into()),
    }
}

/// Restricted-depth Grover search at depth `p` on the thresholded landscape.
pub fn rdgs_run(landscape: &Arc<Landscape>, p: usize) -> Result<RunResult> {
    if landscape.marked_count() == 0 {
        return Err(VqaError::NoMarkedStates {
            rho0: landscape.rho0(),
        });
    }
    let config = AnsatzConfig::new(Variant::Rdgs, p, landscape.clone()).with_binary_cost(true);
    finish(&config, Vec::new(), None, None, Instant::now())
}

/// Closed-form RDGS success `sin²((2p+1)·asin√(J_S/J))` for a landscape.
pub fn rdgs_closed_form(landscape: &Landscape, p: usize) -> f64 {
    grover_success(landscape.len(), landscape.marked_count(), p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatStats {
    pub variant: Variant,
    pub depth: usize,
    pub n_repeats: usize,
    /// Runs that failed and are excluded from the aggregates.
    pub n_failed: usize,
    pub mean_expectation: f64,
    pub std_expectation: f64,
    pub mean_success: f64,
    pub std_success: f64,
    pub best_expectation: f64,
    pub best_success: f64,
    pub mean_iters: f64,
    pub mean_oracle_queries: f64,
    pub mean_wall_s: f64,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregates completed runs (in seed order) into summary statistics.
pub fn aggregate(variant: Variant, depth: usize, runs: &[RunResult], n_failed: usize) -> RepeatStats {
    let col = |f: fn(&RunResult) -> f64| runs.iter().map(f).collect::<Vec<f64>>();
    let (mean_expectation, std_expectation) = mean_std(&col(|r| r.expectation));
    let (mean_success, std_success) = mean_std(&col(|r| r.success_prob));
    let mean = |v: Vec<f64>| mean_std(&v).0;
    RepeatStats {
        variant,
        depth,
        n_repeats: runs.len(),
        n_failed,
        mean_expectation,
        std_expectation,
        mean_success,
        std_success,
        best_expectation: col(|r| r.expectation).into_iter().fold(f64::NEG_INFINITY, f64::max),
        best_success: col(|r| r.success_prob).into_iter().fold(f64::NEG_INFINITY, f64::max),
        mean_iters: mean(col(|r| r.report.as_ref().map_or(0.0, |r| r.iterations as f64))),
        mean_oracle_queries: mean(col(|r| r.oracle_queries as f64)),
        mean_wall_s: mean(col(|r| r.wall_time)),
    }
}

/// Runs seeds `base_seed .. base_seed + n_repeats` (possibly concurrently) and
/// aggregates them. Failed runs are logged and counted in `n_failed`.
pub fn repeat_study(config: &AnsatzConfig, n_repeats: usize, base_seed: u64) -> Result<(RepeatStats, Vec<RunResult>)> {
    if n_repeats == 0 {
        return Err(VqaError::Invalid("need at least one repeat".into()));
    }
    if config.variant == Variant::Rdgs {
        let run = rdgs_run(&config.landscape, config.depth)?;
        return Ok((aggregate(Variant::Rdgs, config.depth, std::slice::from_ref(&run), 0), vec![run]));
    }
    let outcomes: Vec<Result<RunResult>> = (0..n_repeats as u64)
        .into_par_iter()
        .map(|i| optimize_run(config, base_seed + i))
        .collect();
    let mut runs = Vec::with_capacity(n_repeats);
    let mut failed = 0;
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(r) => runs.push(r),
            Err(e) => {
                log::error!("{} p={}: run failed: {e}", config.variant, config.depth);
                failed += 1;
                first_err.get_or_insert(e);
            }
        }
    }
    if runs.is_empty() {
        return Err(first_err.expect("at least one failure"));
    }
    Ok((aggregate(config.variant, config.depth, &runs, failed), runs))
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub binary_cost: bool,
    pub n_repeats: usize,
    pub base_seed: u64,
    /// Also optimize from the best parameters of the previous depth extended by a
    /// zero layer; that run counts towards `best_*` but not the means.
    pub warm_start: bool,
    pub optimizer: BfgsSettings,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            binary_cost: false,
            n_repeats: 10,
            base_seed: 0,
            warm_start: false,
            optimizer: BfgsSettings::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub stats: RepeatStats,
    pub runs: Vec<RunResult>,
    pub warm: Option<RunResult>,
}

/// One row per `(variant, p)`; RDGS rows come from a single deterministic run.
pub fn depth_sweep(
    variants: &[Variant],
    p_values: &[usize],
    landscape: &Arc<Landscape>,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    if variants.is_empty() || p_values.is_empty() {
        return Err(VqaError::Invalid("empty variant or depth list".into()));
    }
    let mut rows = Vec::with_capacity(variants.len() * p_values.len());
    for &variant in variants {
        let mut previous: Option<(usize, Vec<f64>)> = None;
        for &p in p_values {
            let mut config = AnsatzConfig::new(variant, p, landscape.clone()).with_binary_cost(opts.binary_cost);
            config.optimizer = opts.optimizer;
            let (mut stats, runs) = repeat_study(&config, opts.n_repeats, opts.base_seed)?;
            let mut warm = None;
            if opts.warm_start && variant != Variant::Rdgs {
                if let Some((prev_p, prev_x)) = previous.as_ref().filter(|(q, _)| *q < p) {
                    let mut x0 = prev_x.clone();
                    x0.resize(variant.param_count(p), 0.0);
                    debug_assert_eq!(x0.len(), variant.params_per_layer() * (*prev_p + (p - prev_p)));
                    let r = optimize_from(&config, &x0, None)?;
                    stats.best_expectation = stats.best_expectation.max(r.expectation);
                    stats.best_success = stats.best_success.max(r.success_prob);
                    warm = Some(r);
                }
            }
            let best = runs
                .iter()
                .chain(warm.iter())
                .max_by(|a, b| a.expectation.total_cmp(&b.expectation))
                .expect("at least one run");
            previous = Some((p, best.params_star.clone()));
            rows.push(SweepRow { stats, runs, warm });
        }
    }
    Ok(rows)
}

pub const RESULTS_HEADER: &str =
    "variant,depth,n_repeats,mean_expectation,std_expectation,mean_success,std_success,mean_iters,mean_wall_s";

/// Writes the summary table; pass `with_wall_time = false` for byte-stable output.
pub fn write_results_csv(path: &Path, rows: &[RepeatStats], with_wall_time: bool) -> std::io::Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in rows {
        let wall = if with_wall_time { format!("{}", r.mean_wall_s) } else { String::new() };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.variant,
            r.depth,
            r.n_repeats,
            r.mean_expectation,
            r.std_expectation,
            r.mean_success,
            r.std_success,
            r.mean_iters,
            wall
        )?;
    }
    std::fs::write(path, out)
}

/// One JSON object per run.
pub fn write_runs_jsonl(path: &Path, runs: &[RunResult]) -> std::io::Result<()> {
    let mut out = Vec::new();
    for r in runs {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::other)?;
        out.push(b'\n');
    }
    std::fs::write(path, out)
}
