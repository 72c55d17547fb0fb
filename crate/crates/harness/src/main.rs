use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use gwq_core::param_space::QualityGrid;
use gwq_core::strain::write_strain;
use gwq_core::vqa::{rdgs_closed_form, rdgs_run, Landscape};
use gwq_core::waveform::{generate_template, MassParams};
use gwq_harness::config::{parse_chart, parse_depths, parse_grid, parse_variants, ExperimentConfig, Overrides};
use gwq_harness::experiment::{
    configured_grid, load_data, quality_grid, read_results_csv, run_decomposition, run_experiment, sweep_plot,
    write_grid_csv,
};
use gwq_harness::plot::{line_plot, LineSeries};
use gwq_harness::presets::preset;
use gwq_harness::synth::{synthesize_data, InjectionSpec, PsdModel};
use gwq_harness::HarnessError;

#[derive(Parser)]
#[command(name = "gwq", version, about = "Matched-filter quality landscapes and variational search over them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate (or sample the model) PSD of the configured data.
    Psd(ExperimentArgs),
    /// Write a normalized frequency-domain template as CSV.
    Template(TemplateArgs),
    /// Evaluate (or load from cache) the SNR landscape over the configured grid.
    QualityGrid(ExperimentArgs),
    /// Run the configured depth sweep.
    Vqa(ExperimentArgs),
    /// Restricted-depth Grover search: closed form against simulation.
    Rdgs(RdgsArgs),
    /// Synthesize strain with an optional injected inspiral.
    Inject(InjectArgs),
    /// Quality grids of the data, its template projection and the residual.
    Decompose(DecomposeArgs),
    /// Re-render plots and print the table of an existing results directory.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// TOML experiment configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset (default, fig8, fig10, fig11, charts, decompose, gw170817).
    #[arg(long)]
    preset: Option<String>,
    /// Strain file (header .json or .csv); switches the PSD to a Welch estimate.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Welch segment length in seconds.
    #[arg(long)]
    psd_seg: Option<f64>,
    /// m1m2 | theta1eta | meta | theta1theta2
    #[arg(long)]
    chart: Option<String>,
    /// Grid points per dimension, e.g. 64x64.
    #[arg(long)]
    grid: Option<String>,
    /// Coalescence time searched, seconds after the data start.
    #[arg(long)]
    t_c: Option<f64>,
    #[arg(long)]
    rho0: Option<f64>,
    /// Comma-separated variant names.
    #[arg(long)]
    variants: Option<String>,
    /// Depths as a..b (inclusive) or a comma-separated list.
    #[arg(long)]
    depths: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the thresholded landscape as the cost.
    #[arg(long)]
    binary_cost: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Always evaluate the quality grid.
    #[arg(long)]
    no_cache: bool,
}

#[derive(Args)]
struct TemplateArgs {
    #[arg(long)]
    m1: f64,
    #[arg(long)]
    m2: f64,
    #[arg(long, default_value_t = 64.0)]
    duration: f64,
    #[arg(long, default_value_t = 2048.0)]
    f_s: f64,
    #[arg(long, default_value_t = 20.0)]
    f_low: f64,
    /// PSD model weighting the normalization.
    #[arg(long, default_value = "powerlaw")]
    psd: String,
    #[arg(long, default_value = "template.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct RdgsArgs {
    /// Largest depth.
    #[arg(long, default_value_t = 15)]
    p: usize,
    /// Marked points of an explicit landscape, spread evenly over the grid.
    #[arg(long)]
    marked: Option<usize>,
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long, default_value_t = 1.46)]
    m1: f64,
    #[arg(long, default_value_t = 1.27)]
    m2: f64,
    /// Injected SNR.
    #[arg(long = "a", default_value_t = 12.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 48.0)]
    t_c: f64,
    #[arg(long, default_value_t = 64.0)]
    duration: f64,
    #[arg(long, default_value_t = 2048.0)]
    f_s: f64,
    #[arg(long, default_value_t = 20.0)]
    f_low: f64,
    /// Noise PSD model: flat:<level>, powerlaw[:s0,f0,a,b] or file:<path>.
    #[arg(long, default_value = "powerlaw")]
    noise: String,
    /// Multiplier on the noise draw (0 for a noiseless injection).
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "SYN")]
    detector: String,
    #[arg(long, default_value = "injection")]
    name: String,
    #[arg(long, default_value = "out/inject")]
    out: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Template masses; default: the grid alignment masses.
    #[arg(long, requires = "m2")]
    m1: Option<f64>,
    #[arg(long, requires = "m1")]
    m2: Option<f64>,
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Results directory written by `vqa`.
    #[arg(long)]
    out: PathBuf,
}

impl ExperimentArgs {
    fn overrides(&self) -> Result<Overrides, HarnessError> {
        Ok(Overrides {
            data: self.data.clone(),
            psd_seg: self.psd_seg,
            chart: self.chart.as_deref().map(parse_chart).transpose()?,
            grid: self.grid.as_deref().map(parse_grid).transpose()?,
            t_c: self.t_c,
            rho0: self.rho0,
            variants: self.variants.as_deref().map(parse_variants).transpose()?,
            depths: self.depths.as_deref().map(parse_depths).transpose()?,
            repeats: self.repeats,
            seed: self.seed,
            binary_cost: self.binary_cost,
            out: self.out.clone(),
            cache_dir: self.cache_dir.clone(),
            no_cache: self.no_cache,
        })
    }

    /// Resolved configurations: file or preset, then command-line overrides.
    fn configs(&self) -> Result<Vec<ExperimentConfig>, HarnessError> {
        let mut cfgs = match (&self.config, &self.preset) {
            (Some(path), _) => vec![ExperimentConfig::load(path)?],
            (None, Some(name)) => preset(name)?,
            (None, None) => preset("default")?,
        };
        let o = self.overrides()?;
        let several = cfgs.len() > 1;
        for cfg in &mut cfgs {
            let sub = cfg.output.dir.file_name().map(PathBuf::from);
            o.apply(cfg);
            if let (true, Some(out), Some(sub)) = (several, &self.out, sub) {
                cfg.output.dir = out.join(sub);
            }
            cfg.validate()?;
        }
        Ok(cfgs)
    }

    fn single(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfgs = self.configs()?;
        if cfgs.len() != 1 {
            return Err(HarnessError::Config(format!(
                "this command takes a single configuration; the preset expands to {}",
                cfgs.len()
            )));
        }
        Ok(cfgs.remove(0))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn cmd_psd(args: &ExperimentArgs) -> Result<(), HarnessError> {
    let cfg = args.single()?;
    let data = load_data(&cfg)?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut out = String::from("f_hz,psd\n");
    for (k, s) in data.psd.values().iter().enumerate() {
        out.push_str(&format!("{},{}\n", data.psd.frequency(k), s));
    }
    let path = dir.join("psd.csv");
    fs::write(&path, out).map_err(io_err(&path))?;
    let (x, y): (Vec<f64>, Vec<f64>) = (1..data.psd.len())
        .map(|k| (data.psd.frequency(k).log10(), 0.5 * data.psd.values()[k].log10()))
        .unzip();
    let svg = line_plot(
        "Amplitude spectral density",
        "log10 f [Hz]",
        "log10 √S [Hz^-1/2]",
        &[LineSeries { label: format!("{:?}", cfg.psd.source), x, y, err: None, dashed: false }],
    );
    let svg_path = dir.join("psd.svg");
    fs::write(&svg_path, svg).map_err(io_err(&svg_path))?;
    println!("wrote {} ({} bins, Δf = {} Hz)", path.display(), data.psd.len(), data.psd.delta_f());
    Ok(())
}

fn cmd_template(args: &TemplateArgs) -> Result<(), HarnessError> {
    let params = MassParams::new(args.m1, args.m2).map_err(|e| HarnessError::Config(e.to_string()))?;
    let n = (args.duration * args.f_s).round() as usize;
    let model: PsdModel = args.psd.parse()?;
    let psd = model.sample(n, args.f_s)?;
    let t = generate_template(&params, n, args.f_s, &psd, args.f_low)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    t.write_csv(&args.out).map_err(io_err(&args.out))?;
    println!(
        "wrote {}: bins {}..={} ({:.2}–{:.2} Hz), normalization {:e}",
        args.out.display(),
        t.k_low(),
        t.k_high(),
        t.k_low() as f64 * t.delta_f(),
        t.k_high() as f64 * t.delta_f(),
        t.normalization()
    );
    Ok(())
}

fn cmd_quality_grid(args: &ExperimentArgs) -> Result<(), HarnessError> {
    for cfg in args.configs()? {
        let data = load_data(&cfg)?;
        let grid = configured_grid(&cfg, data.series.sample_rate())?;
        let (qg, cache) = quality_grid(&cfg, &data.spectrum, &data.psd, &grid)?;
        let dir = &cfg.output.dir;
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join("quality.csv");
        write_grid_csv(&path, &grid, &qg.values, "rho")?;
        let j = qg.argmax();
        let (j1, j2) = (j / qg.dims.1, j % qg.dims.1);
        let above = qg.values.iter().filter(|v| **v > cfg.vqa.rho0).count();
        println!(
            "{}: {}x{} {} grid ({cache:?}), max ρ = {:.4} at ({j1}, {j2}) = {:?}, {above} points above ρ0 = {}, {} skipped",
            cfg.name,
            qg.dims.0,
            qg.dims.1,
            grid.chart.kind,
            qg.max(),
            grid.point(j1, j2),
            cfg.vqa.rho0,
            qg.skipped
        );
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn print_rows(rows: &[gwq_core::vqa::RepeatStats]) {
    println!(
        "{:<15} {:>5} {:>7} {:>12} {:>12} {:>10} {:>10} {:>8}",
        "variant", "p", "repeats", "mean <Q>", "std <Q>", "mean succ", "std succ", "iters"
    );
    for r in rows {
        println!(
            "{:<15} {:>5} {:>7} {:>12.5} {:>12.5} {:>10.5} {:>10.5} {:>8.1}",
            r.variant.name(),
            r.depth,
            r.n_repeats,
            r.mean_expectation,
            r.std_expectation,
            r.mean_success,
            r.std_success,
            r.mean_iters
        );
    }
}

fn cmd_vqa(args: &ExperimentArgs) -> Result<(), HarnessError> {
    for cfg in args.configs()? {
        let summary = run_experiment(&cfg)?;
        println!(
            "{}: {} points, max ρ = {:.4}, J_S = {}",
            summary.name, summary.grid_points, summary.max_rho, summary.marked
        );
        print_rows(&summary.rows);
        println!("wrote {}", summary.out_dir.join("results.csv").display());
    }
    Ok(())
}

fn cmd_rdgs(args: &RdgsArgs) -> Result<(), HarnessError> {
    let explicit = args.exp.config.is_some() || args.exp.preset.is_some() || args.exp.data.is_some();
    let land = match (args.marked, explicit) {
        (Some(_), true) => {
            return Err(HarnessError::Config("--marked builds its own landscape; drop --config/--preset/--data".into()))
        }
        (marked, false) => {
            let (q1, q2) = args.exp.grid.as_deref().map(parse_grid).transpose()?.unwrap_or((6, 6));
            let dims = (1usize << q1, 1usize << q2);
            let j = dims.0 * dims.1;
            let k = marked.unwrap_or(1);
            if k == 0 || k > j {
                return Err(HarnessError::Config(format!("{k} marked points on a {j}-point grid")));
            }
            let idx: Vec<usize> = (0..k).map(|i| i * j / k).collect();
            let qg = QualityGrid::marked(dims, &idx).map_err(|e| HarnessError::Config(e.to_string()))?;
            Landscape::new(qg, 0.5).map_err(|e| HarnessError::Config(e.to_string()))?
        }
        (None, true) => {
            let cfg = args.exp.single()?;
            let data = load_data(&cfg)?;
            let grid = configured_grid(&cfg, data.series.sample_rate())?;
            let (qg, _) = quality_grid(&cfg, &data.spectrum, &data.psd, &grid)?;
            Landscape::new(qg, cfg.vqa.rho0).map_err(|e| HarnessError::Data(e.to_string()))?
        }
    };
    let land = Arc::new(land);
    println!("J = {}, J_S = {}", land.len(), land.marked_count());
    println!("{:>3} {:>20} {:>20} {:>10}", "p", "closed form", "simulated", "|diff|");
    let mut worst = 0.0f64;
    for p in 0..=args.p {
        let closed = rdgs_closed_form(&land, p);
        let sim = rdgs_run(&land, p).map_err(|e| HarnessError::Data(e.to_string()))?.success_prob;
        worst = worst.max((closed - sim).abs());
        println!("{p:>3} {closed:>20.15} {sim:>20.15} {:>10.2e}", (closed - sim).abs());
    }
    println!("max |diff| = {worst:.3e}");
    Ok(())
}

fn cmd_inject(args: &InjectArgs) -> Result<(), HarnessError> {
    let spec = InjectionSpec {
        params: MassParams::new(args.m1, args.m2).map_err(|e| HarnessError::Config(e.to_string()))?,
        amplitude: args.amplitude,
        t_c: args.t_c,
        psd_model: args.noise.parse()?,
        noise_scale: args.noise_scale,
        duration: args.duration,
        f_s: args.f_s,
        f_low: args.f_low,
        seed: args.seed,
    };
    let data = synthesize_data(&spec)?;
    let header = write_strain(&args.out, &args.name, &data.series, &args.detector)
        .map_err(|e| HarnessError::Data(e.to_string()))?;
    let spec_path = args.out.join(format!("{}-spec.toml", args.name));
    fs::write(&spec_path, toml::to_string_pretty(&spec).expect("spec serializes")).map_err(io_err(&spec_path))?;
    let psd_path = args.out.join(format!("{}-psd.csv", args.name));
    let mut f = fs::File::create(&psd_path).map_err(io_err(&psd_path))?;
    let mut text = String::from("f_hz,psd\n");
    for (k, s) in data.psd.values().iter().enumerate() {
        text.push_str(&format!("{},{}\n", data.psd.frequency(k), s));
    }
    f.write_all(text.as_bytes()).map_err(io_err(&psd_path))?;
    println!("wrote {} (+ .bin), {}, {}", header.display(), spec_path.display(), psd_path.display());
    Ok(())
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<(), HarnessError> {
    let mut exp = args.exp.clone();
    if exp.config.is_none() && exp.preset.is_none() {
        exp.preset = Some("decompose".into());
    }
    let cfg = exp.single()?;
    let params = match (args.m1, args.m2) {
        (Some(m1), Some(m2)) => MassParams::new(m1, m2).map_err(|e| HarnessError::Config(e.to_string()))?,
        _ => cfg
            .align_params()?
            .ok_or_else(|| HarnessError::Config("give --m1/--m2 or an aligned grid".into()))?,
    };
    let d = run_decomposition(&cfg, params)?;
    println!(
        "(h|y) = {:.4} {:+.4}i; max ρ: data {:.4}, signal {:.4}, residual {:.4}; shared scale [{:.4}, {:.4}]",
        d.coefficient.0,
        d.coefficient.1,
        d.data.max(),
        d.signal.max(),
        d.residual.max(),
        d.scale.0,
        d.scale.1
    );
    println!("wrote {}", cfg.output.dir.join("decomposition").display());
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), HarnessError> {
    let rows = read_results_csv(&args.out.join("results.csv"))?;
    print_rows(&rows);
    for (name, title, f) in [
        ("success.svg", "Success probability Prob[ρ > ρ0]", (|r: &gwq_core::vqa::RepeatStats| (r.mean_success, r.std_success)) as fn(&_) -> _),
        ("expectation.svg", "Optimized expectation ⟨Q⟩", |r| (r.mean_expectation, r.std_expectation)),
    ] {
        let path = args.out.join(name);
        fs::write(&path, sweep_plot(&rows, title, "value", f)).map_err(io_err(&path))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::Psd(a) => cmd_psd(a),
        Command::Template(a) => cmd_template(a),
        Command::QualityGrid(a) => cmd_quality_grid(a),
        Command::Vqa(a) => cmd_vqa(a),
        Command::Rdgs(a) => cmd_rdgs(a),
        Command::Inject(a) => cmd_inject(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // Usage errors exit with status 2 from inside `parse`.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
