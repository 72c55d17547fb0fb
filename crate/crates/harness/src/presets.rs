//! Named experiment configurations.
//!
//! All synthetic presets share one desk-scale data set: 64 s of power-law colored
//! noise at 2048 Hz with an SNR-12 inspiral of (1.46, 1.27) M_sun injected at
//! t = 48 s, searched on a θ1–η grid aligned to the injection, threshold ρ0 = 8.

use std::path::PathBuf;

use gwq_core::param_space::ChartKind;
use gwq_core::vqa::Variant;
use gwq_core::waveform::MassParams;

use crate::config::{
    DataSource, ExperimentConfig, GridSettings, OutputSettings, PsdSettings, PsdSource, VqaSettings,
};
use crate::synth::{InjectionSpec, PsdModel};
use crate::HarnessError;

pub const PRESET_NAMES: [&str; 7] = ["default", "fig8", "fig10", "fig11", "charts", "decompose", "gw170817"];

pub const DEFAULT_MASSES: [f64; 2] = [1.46, 1.27];

pub fn default_injection() -> InjectionSpec {
    InjectionSpec {
        params: MassParams {
            m1: DEFAULT_MASSES[0],
            m2: DEFAULT_MASSES[1],
        },
        amplitude: 12.0,
        t_c: 48.0,
        psd_model: PsdModel::DEFAULT_POWERLAW,
        noise_scale: 1.0,
        duration: 64.0,
        f_s: 2048.0,
        f_low: 20.0,
        seed: 1,
    }
}

fn all_variants() -> Vec<Variant> {
    let mut v = Variant::VARIATIONAL.to_vec();
    v.push(Variant::Rdgs);
    v
}

fn base(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        data: DataSource::Synthetic(default_injection()),
        psd: PsdSettings::default(),
        grid: GridSettings {
            chart: ChartKind::Theta1Eta,
            region: [1.0, 5.0],
            q1: 6,
            q2: 6,
            align: Some(DEFAULT_MASSES),
            t_c: 48.0,
            f_low: 20.0,
        },
        vqa: VqaSettings {
            rho0: 8.0,
            variants: vec![Variant::QaoaComplete, Variant::Rdgs],
            depths: (1..=5).collect(),
            repeats: 10,
            seed: 0,
            binary_cost: false,
            warm_start: false,
            gtol: 1e-3,
            max_iter: 200,
        },
        output: OutputSettings {
            dir: PathBuf::from("out").join(name),
            cache_dir: Some(PathBuf::from("out/cache")),
        },
    }
}

/// The configurations making up preset `name` (several for sweeps).
pub fn preset(name: &str) -> Result<Vec<ExperimentConfig>, HarnessError> {
    let cfgs = match name {
        "default" => vec![base("default")],
        // Every variant at depths 1..15 on the raw SNR landscape.
        "fig8" => {
            let mut c = base("fig8");
            c.vqa.variants = all_variants();
            c.vqa.depths = (1..=15).collect();
            vec![c]
        }
        // Same sweep with the thresholded landscape as the cost.
        "fig10" => {
            let mut c = base("fig10");
            c.vqa.variants = all_variants();
            c.vqa.depths = (1..=10).collect();
            c.vqa.binary_cost = true;
            vec![c]
        }
        // Resolution sweep, 128² to 512² points (14 to 18 qubits).
        "fig11" => [7u32, 8, 9]
            .into_iter()
            .map(|q| {
                let mut c = base("fig11");
                c.name = format!("fig11-q{q}");
                c.grid.q1 = q;
                c.grid.q2 = q;
                c.vqa.variants = all_variants();
                c.vqa.depths = (1..=5).collect();
                c.output.dir = PathBuf::from("out/fig11").join(format!("q{q}"));
                c
            })
            .collect(),
        "charts" => ChartKind::ALL
            .into_iter()
            .map(|kind| {
                let mut c = base("charts");
                c.name = format!("charts-{}", kind.to_string().to_ascii_lowercase());
                c.grid.chart = kind;
                c.vqa.variants = all_variants();
                c.output.dir = PathBuf::from("out/charts").join(kind.to_string().to_ascii_lowercase());
                c
            })
            .collect(),
        "decompose" => vec![base("decompose")],
        // 256 s of Livingston strain at 4096 Hz as written by the fetch tool; the
        // coalescence time refers to that file's window.
        "gw170817" => {
            let mut c = base("gw170817");
            c.data = DataSource::File {
                path: PathBuf::from("data/GW170817-L1.json"),
            };
            c.psd = PsdSettings {
                source: PsdSource::Welch,
                ..PsdSettings::default()
            };
            c.grid.region = [1.0, 3.0];
            c.grid.q1 = 8;
            c.grid.q2 = 8;
            c.grid.align = Some([1.3758, 1.3758]);
            c.grid.t_c = 170.7;
            c.vqa.variants = all_variants();
            c.vqa.depths = (1..=15).collect();
            vec![c]
        }
        other => {
            return Err(HarnessError::Config(format!(
                "unknown preset {other:?}; known: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(cfgs)
}
