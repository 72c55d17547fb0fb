//! Running configured experiments: data and PSD loading, the digest-keyed quality
//! grid cache, depth sweeps, the signal/noise decomposition, and their outputs.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gwq_core::matched_filter::decompose;
use gwq_core::param_space::{
    build_grid, evaluate_quality, read_quality_cache, write_quality_cache, Grid, ParamSpaceError, QualityGrid,
};
use gwq_core::psd::{condition_psd, estimate_psd, Psd};
use gwq_core::signal::{forward_dft, FrequencySeries, TimeSeries};
use gwq_core::strain::read_strain;
use gwq_core::vqa::{
    depth_sweep, evaluate_ansatz, write_results_csv, write_runs_jsonl, AnsatzConfig, Landscape, RepeatStats,
    RunResult, SweepRow, Variant, VqaError,
};
use gwq_core::waveform::{generate_template, MassParams};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{DataSource, ExperimentConfig, PsdSource};
use crate::plot::{heatmap, line_plot, LineSeries};
use crate::synth::synthesize_data;
use crate::HarnessError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Configuration problems are the user's to fix; everything else is about the data.
fn from_param_space(e: ParamSpaceError) -> HarnessError {
    match e {
        ParamSpaceError::Io { path, source } => HarnessError::Io { path, source },
        ParamSpaceError::Invalid(_) | ParamSpaceError::Alignment(_) => HarnessError::Config(e.to_string()),
        other => HarnessError::Data(other.to_string()),
    }
}

fn from_vqa(e: VqaError) -> HarnessError {
    match e {
        VqaError::Invalid(_) | VqaError::Arity { .. } => HarnessError::Config(e.to_string()),
        other => HarnessError::Data(other.to_string()),
    }
}

/// Strain, its spectrum, and the PSD used to whiten it.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub series: TimeSeries,
    pub spectrum: FrequencySeries,
    pub psd: Psd,
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<LoadedData, HarnessError> {
    let (series, truth) = match &cfg.data {
        DataSource::Synthetic(spec) => {
            let d = synthesize_data(spec)?;
            (d.series, Some(d.psd))
        }
        DataSource::File { path } => {
            let rec = read_strain(path).map_err(|e| HarnessError::Data(e.to_string()))?;
            (rec.series, None)
        }
    };
    let n = series.len();
    let f_s = series.sample_rate();
    let psd = match (cfg.psd.source, truth) {
        (PsdSource::Truth, Some(p)) => p,
        (PsdSource::Truth, None) => {
            return Err(HarnessError::Config("file data has no ground-truth PSD".into()));
        }
        (PsdSource::Welch, _) => {
            let p = &cfg.psd;
            let est = estimate_psd(&series, p.seg_seconds, p.overlap, p.method)
                .map_err(|e| HarnessError::Data(format!("PSD estimate: {e}")))?;
            condition_psd(&est, n, f_s, p.floor_frac, cfg.grid.f_low)
                .map_err(|e| HarnessError::Data(format!("PSD conditioning: {e}")))?
        }
    };
    let spectrum = forward_dft(&series);
    Ok(LoadedData { series, spectrum, psd })
}

/// Builds the configured grid for data sampled at `f_s`.
pub fn configured_grid(cfg: &ExperimentConfig, f_s: f64) -> Result<Grid, HarnessError> {
    let g = &cfg.grid;
    build_grid((g.region[0], g.region[1]), g.q1, g.q2, cfg.chart(f_s)?, cfg.align_params()?)
        .map_err(from_param_space)
}

/// SHA-256 over everything a quality grid depends on: the data spectrum, the PSD
/// values and settings, the chart, box and dimensions, `t_c` and the low cutoff.
pub fn quality_digest(y: &FrequencySeries, psd: &Psd, cfg: &ExperimentConfig, grid: &Grid) -> String {
    let mut h = Sha256::new();
    h.update(b"gwq-quality-grid/1\0");
    h.update((y.len() as u64).to_le_bytes());
    h.update(y.origin_sample_rate().to_le_bytes());
    for c in y.bins() {
        h.update(c.re.to_le_bytes());
        h.update(c.im.to_le_bytes());
    }
    h.update(psd.delta_f().to_le_bytes());
    for s in psd.values() {
        h.update(s.to_le_bytes());
    }
    h.update(format!("{:?}", cfg.psd).as_bytes());
    h.update(grid.chart.kind.to_string().as_bytes());
    h.update(grid.chart.f_s.to_le_bytes());
    for v in grid.lo.iter().chain(&grid.hi) {
        h.update(v.to_le_bytes());
    }
    h.update((grid.dims.0 as u64).to_le_bytes());
    h.update((grid.dims.1 as u64).to_le_bytes());
    h.update(cfg.grid.t_c.to_le_bytes());
    h.update(cfg.grid.f_low.to_le_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
}

/// The quality grid for `y`, read from the cache when an entry with the same
/// digest exists and evaluated (then stored) otherwise.
pub fn quality_grid(
    cfg: &ExperimentConfig,
    y: &FrequencySeries,
    psd: &Psd,
    grid: &Grid,
) -> Result<(QualityGrid, CacheStatus), HarnessError> {
    let evaluate = || {
        evaluate_quality(grid, y, psd, cfg.grid.t_c, cfg.grid.f_low).map_err(from_param_space)
    };
    let Some(dir) = &cfg.output.cache_dir else {
        return Ok((evaluate()?, CacheStatus::Disabled));
    };
    let digest = quality_digest(y, psd, cfg, grid);
    let stem = format!("quality-{}", &digest[..16]);
    let header = dir.join(format!("{stem}.json"));
    if header.exists() {
        match read_quality_cache(&header) {
            Ok((qg, stored)) if stored == digest => {
                log::info!("quality grid loaded from {}", header.display());
                return Ok((qg, CacheStatus::Hit));
            }
            Ok(_) => log::warn!("{}: digest mismatch; recomputing", header.display()),
            Err(e) => log::warn!("{}: unreadable cache ({e}); recomputing", header.display()),
        }
    }
    let qg = evaluate()?;
    write_quality_cache(dir, &stem, &qg, &digest).map_err(from_param_space)?;
    Ok((qg, CacheStatus::Miss))
}

/// `j1,j2,<axis1>,<axis2>,value` rows for a grid of values.
pub fn write_grid_csv(path: &Path, grid: &Grid, values: &[f64], value_name: &str) -> Result<(), HarnessError> {
    let [a, b] = grid.chart.kind.axis_names();
    let mut out = Vec::with_capacity(values.len() * 48);
    writeln!(out, "j1,j2,{a},{b},{value_name}").expect("write to vec");
    for (j, v) in values.iter().enumerate() {
        let (j1, j2) = (j / grid.dims.1, j % grid.dims.1);
        let [x, y] = grid.point(j1, j2);
        writeln!(out, "{j1},{j2},{x},{y},{v}").expect("write to vec");
    }
    write_file(path, out)
}

fn write_heatmap_svg(
    path: &Path,
    title: &str,
    grid: &Grid,
    values: &[f64],
    scale: (f64, f64),
) -> Result<(), HarnessError> {
    let step = grid.step();
    // Cells are centered on the grid points.
    let extent = [
        grid.lo[0] - step[0] / 2.0,
        grid.hi[0] + step[0] / 2.0,
        grid.lo[1] - step[1] / 2.0,
        grid.hi[1] + step[1] / 2.0,
    ];
    let svg = heatmap(title, grid.chart.kind.axis_names(), values, grid.dims, extent, scale);
    write_file(path, svg)
}

fn range(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

fn file_label(v: Variant) -> String {
    v.name().to_ascii_lowercase()
}

/// Depth-sweep curves (mean ± standard deviation over repeats) of one metric.
pub fn sweep_plot(rows: &[RepeatStats], title: &str, ylabel: &str, metric: fn(&RepeatStats) -> (f64, f64)) -> String {
    let mut variants: Vec<Variant> = rows.iter().map(|r| r.variant).collect();
    variants.dedup();
    let series: Vec<LineSeries> = variants
        .iter()
        .map(|&v| {
            let mine: Vec<&RepeatStats> = rows.iter().filter(|r| r.variant == v).collect();
            LineSeries {
                label: v.name().to_string(),
                x: mine.iter().map(|r| r.depth as f64).collect(),
                y: mine.iter().map(|r| metric(r).0).collect(),
                err: Some(mine.iter().map(|r| metric(r).1).collect()),
                dashed: v == Variant::Rdgs,
            }
        })
        .collect();
    line_plot(title, "depth p", ylabel, &series)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub out_dir: PathBuf,
    pub grid_points: usize,
    pub max_rho: f64,
    pub argmax: (usize, usize),
    pub marked: usize,
    pub skipped: usize,
    #[serde(skip)]
    pub cache: Option<CacheStatus>,
    pub rows: Vec<RepeatStats>,
}

fn prepare_out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, HarnessError> {
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_file(&dir.join("config.toml"), cfg.to_toml())?;
    Ok(dir)
}

/// Data, grid and quality landscape for a configuration; also writes the
/// quality-grid CSV and heatmap into `out`.
pub fn prepare_landscape(
    cfg: &ExperimentConfig,
    out: &Path,
) -> Result<(Arc<Landscape>, Grid, CacheStatus), HarnessError> {
    let data = load_data(cfg)?;
    let grid = configured_grid(cfg, data.series.sample_rate())?;
    let (qg, cache) = quality_grid(cfg, &data.spectrum, &data.psd, &grid)?;
    write_grid_csv(&out.join("quality.csv"), &grid, &qg.values, "rho")?;
    write_heatmap_svg(
        &out.join("quality.svg"),
        &format!("{}: SNR over the {} grid", cfg.name, grid.chart.kind),
        &grid,
        &qg.values,
        range(&qg.values),
    )?;
    let land = Landscape::new(qg, cfg.vqa.rho0).map_err(from_vqa)?;
    Ok((Arc::new(land), grid, cache))
}

/// Writes results CSV, per-run JSONL and the sweep plots for the rows so far.
fn write_sweep_outputs(out: &Path, rows: &[SweepRow]) -> Result<(), HarnessError> {
    let stats: Vec<RepeatStats> = rows.iter().map(|r| r.stats.clone()).collect();
    let path = out.join("results.csv");
    write_results_csv(&path, &stats, true).map_err(io_err(&path))?;
    let runs: Vec<RunResult> = rows
        .iter()
        .flat_map(|r| r.runs.iter().chain(r.warm.iter()).cloned())
        .collect();
    let path = out.join("runs.jsonl");
    write_runs_jsonl(&path, &runs).map_err(io_err(&path))?;
    write_file(
        &out.join("success.svg"),
        sweep_plot(&stats, "Success probability Prob[ρ > ρ0]", "probability", |r| {
            (r.mean_success, r.std_success)
        }),
    )?;
    write_file(
        &out.join("expectation.svg"),
        sweep_plot(&stats, "Optimized expectation ⟨Q⟩", "⟨Q⟩", |r| (r.mean_expectation, r.std_expectation)),
    )
}

/// Final-state probabilities of each variant's best run at its largest depth.
fn write_final_probabilities(
    out: &Path,
    rows: &[SweepRow],
    land: &Arc<Landscape>,
    grid: &Grid,
) -> Result<(), HarnessError> {
    let mut variants: Vec<Variant> = rows.iter().map(|r| r.stats.variant).collect();
    variants.dedup();
    for v in variants {
        let Some(row) = rows.iter().filter(|r| r.stats.variant == v).max_by_key(|r| r.stats.depth) else {
            continue;
        };
        let Some(best) = row
            .runs
            .iter()
            .chain(row.warm.iter())
            .max_by(|a, b| a.expectation.total_cmp(&b.expectation))
        else {
            continue;
        };
        let config = AnsatzConfig::new(v, best.depth, land.clone()).with_binary_cost(best.binary_cost);
        let state = evaluate_ansatz(&config, &best.params_star).map_err(from_vqa)?;
        let probs = state.probabilities();
        let stem = format!("final_prob_{}", file_label(v));
        write_grid_csv(&out.join(format!("{stem}.csv")), grid, &probs, "probability")?;
        write_heatmap_svg(
            &out.join(format!("{stem}.svg")),
            &format!("{v} p={}: final-state probabilities", best.depth),
            grid,
            &probs,
            range(&probs),
        )?;
    }
    Ok(())
}

/// Runs the configured sweep, writing into `cfg.output.dir`:
/// `config.toml`, `quality.{csv,svg}`, `results.csv`, `runs.jsonl`,
/// `{success,expectation}.svg`, `final_prob_<variant>.{csv,svg}` and `summary.json`.
///
/// Variants run one after another; if one fails, the outputs of those already
/// finished are kept on disk and the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, HarnessError> {
    cfg.validate()?;
    let out = prepare_out_dir(cfg)?;
    let (land, grid, cache) = prepare_landscape(cfg, &out)?;
    let raw = land.raw();
    let argmax = raw.argmax();
    log::info!(
        "{}: {} points, max ρ = {:.3}, J_S = {} above ρ0 = {}",
        cfg.name,
        land.len(),
        raw.max(),
        land.marked_count(),
        cfg.vqa.rho0
    );
    if land.marked_count() == 0 {
        return Err(HarnessError::Data(format!(
            "no grid point exceeds ρ0 = {} (max ρ = {})",
            cfg.vqa.rho0,
            raw.max()
        )));
    }
    let opts = cfg.sweep_options();
    let mut rows: Vec<SweepRow> = Vec::new();
    for &variant in &cfg.vqa.variants {
        match depth_sweep(&[variant], &cfg.vqa.depths, &land, &opts) {
            Ok(r) => rows.extend(r),
            Err(e) => {
                write_sweep_outputs(&out, &rows)?;
                return Err(from_vqa(e));
            }
        }
        log::info!("{}: {variant} done", cfg.name);
    }
    write_sweep_outputs(&out, &rows)?;
    write_final_probabilities(&out, &rows, &land, &grid)?;
    let summary = ExperimentSummary {
        name: cfg.name.clone(),
        out_dir: out.clone(),
        grid_points: land.len(),
        max_rho: raw.max(),
        argmax: (argmax / grid.dims.1, argmax % grid.dims.1),
        marked: land.marked_count(),
        skipped: raw.skipped,
        cache: Some(cache),
        rows: rows.into_iter().map(|r| r.stats).collect(),
    };
    write_file(
        &out.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(summary)
}

/// Quality grids of the data, its projection onto the template of `params`, and
/// the residual, all sharing one color scale.
#[derive(Debug, Clone)]
pub struct DecompositionOutput {
    pub grid: Grid,
    pub data: QualityGrid,
    pub signal: QualityGrid,
    pub residual: QualityGrid,
    /// Projection coefficient `(h|y)` as (re, im).
    pub coefficient: (f64, f64),
    pub scale: (f64, f64),
}

#[derive(Serialize)]
struct ColorScale<'a> {
    vmin: f64,
    vmax: f64,
    grids: [&'a str; 3],
    params: MassParams,
    t_c: f64,
    coefficient: (f64, f64),
    note: &'a str,
}

/// Splits the data along the template of `params` at the configured `t_c` and
/// evaluates the quality grid of each part; writes `decomposition/` under the
/// output directory with CSVs, heatmaps and `color_scale.json`.
pub fn run_decomposition(cfg: &ExperimentConfig, params: MassParams) -> Result<DecompositionOutput, HarnessError> {
    cfg.validate()?;
    let out = prepare_out_dir(cfg)?.join("decomposition");
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let data = load_data(cfg)?;
    let n = data.series.len();
    let f_s = data.series.sample_rate();
    let grid = configured_grid(cfg, f_s)?;
    let t = generate_template(&params, n, f_s, &data.psd, cfg.grid.f_low)
        .map_err(|e| HarnessError::Data(format!("template for {params:?}: {e}")))?;
    let parts = decompose(&data.spectrum, &t, &data.psd, cfg.grid.t_c)
        .map_err(|e| HarnessError::Data(format!("decomposition: {e}")))?;
    let (qd, _) = quality_grid(cfg, &data.spectrum, &data.psd, &grid)?;
    let (qs, _) = quality_grid(cfg, &parts.signal, &data.psd, &grid)?;
    let (qr, _) = quality_grid(cfg, &parts.residual, &data.psd, &grid)?;
    let scale = [&qd, &qs, &qr]
        .iter()
        .map(|q| range(&q.values))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    let names = ["data", "signal", "residual"];
    for (name, q) in names.iter().zip([&qd, &qs, &qr]) {
        write_grid_csv(&out.join(format!("{name}.csv")), &grid, &q.values, "rho")?;
        write_heatmap_svg(&out.join(format!("{name}.svg")), &format!("{}: {name}", cfg.name), &grid, &q.values, scale)?;
    }
    let coefficient = (parts.coefficient.re, parts.coefficient.im);
    let meta = ColorScale {
        vmin: scale.0,
        vmax: scale.1,
        grids: names,
        params,
        t_c: cfg.grid.t_c,
        coefficient,
        note: "each value is a modulus |(h|y)|, so the three grids are not additive",
    };
    write_file(
        &out.join("color_scale.json"),
        serde_json::to_string_pretty(&meta).expect("metadata serializes"),
    )?;
    Ok(DecompositionOutput {
        grid,
        data: qd,
        signal: qs,
        residual: qr,
        coefficient,
        scale,
    })
}

/// Parses a results table written by [`run_experiment`].
pub fn read_results_csv(path: &Path) -> Result<Vec<RepeatStats>, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: &str| HarnessError::Data(format!("{}: malformed row {line:?}", path.display()));
    let mut rows = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad(line));
        }
        let num = |i: usize| -> Result<f64, HarnessError> {
            if f[i].is_empty() {
                Ok(f64::NAN)
            } else {
                f[i].parse().map_err(|_| bad(line))
            }
        };
        let n_repeats: usize = f[2].parse().map_err(|_| bad(line))?;
        rows.push(RepeatStats {
            variant: f[0].parse().map_err(|_| bad(line))?,
            depth: f[1].parse().map_err(|_| bad(line))?,
            n_repeats,
            n_failed: 0,
            mean_expectation: num(3)?,
            std_expectation: num(4)?,
            mean_success: num(5)?,
            std_success: num(6)?,
            best_expectation: f64::NAN,
            best_success: f64::NAN,
            mean_iters: num(7)?,
            mean_oracle_queries: f64::NAN,
            mean_wall_s: num(8)?,
        });
    }
    Ok(rows)
}
