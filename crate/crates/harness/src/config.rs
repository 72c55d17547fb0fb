//! Experiment configuration: a TOML file with one table per concern, plus the
//! command-line overrides layered on top of it.

use std::path::{Path, PathBuf};

use gwq_core::numopt::BfgsSettings;
use gwq_core::param_space::{ChartKind, CoordChart};
use gwq_core::psd::AverageMethod;
use gwq_core::vqa::{SweepOptions, Variant};
use gwq_core::waveform::MassParams;
use serde::{Deserialize, Serialize};

use crate::synth::InjectionSpec;
use crate::HarnessError;

/// Where the strain comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(InjectionSpec),
    /// Strain header (`.json`) or CSV file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsdSource {
    /// The model the synthetic noise was drawn from.
    Truth,
    /// Welch estimate from the data itself, resampled onto the data's bins.
    Welch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdSettings {
    pub source: PsdSource,
    pub seg_seconds: f64,
    pub overlap: f64,
    pub method: AverageMethod,
    /// Floor below the low cutoff, as a fraction of the maximum PSD value.
    pub floor_frac: f64,
}

impl Default for PsdSettings {
    fn default() -> Self {
        Self {
            source: PsdSource::Truth,
            seg_seconds: 16.0,
            overlap: 0.5,
            method: AverageMethod::Median,
            floor_frac: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub chart: ChartKind,
    /// Component-mass range in solar masses.
    pub region: [f64; 2],
    pub q1: u32,
    pub q2: u32,
    /// Masses the grid is translated onto, if any.
    pub align: Option<[f64; 2]>,
    /// Coalescence time searched, seconds after the data start.
    pub t_c: f64,
    pub f_low: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaSettings {
    pub rho0: f64,
    pub variants: Vec<Variant>,
    pub depths: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    #[serde(default)]
    pub binary_cost: bool,
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default = "default_gtol")]
    pub gtol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_gtol() -> f64 {
    BfgsSettings::default().gtol
}

fn default_max_iter() -> usize {
    BfgsSettings::default().max_iter
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSettings {
    pub dir: PathBuf,
    /// Quality-grid cache directory; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSource,
    #[serde(default)]
    pub psd: PsdSettings,
    pub grid: GridSettings,
    pub vqa: VqaSettings,
    pub output: OutputSettings,
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative data paths are relative to the config file.
        if let DataSource::File { path: data } = &mut cfg.data {
            if data.is_relative() {
                if let Some(parent) = path.parent() {
                    *data = parent.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        match &self.data {
            DataSource::Synthetic(spec) => spec.validate()?,
            DataSource::File { path } => {
                if !path.exists() {
                    return config_err(format!("data file {} does not exist", path.display()));
                }
                if self.psd.source == PsdSource::Truth {
                    return config_err("file data has no ground-truth PSD; use psd.source = \"welch\"");
                }
            }
        }
        let p = &self.psd;
        if !(p.seg_seconds > 0.0) || !(0.0..1.0).contains(&p.overlap) || !(p.floor_frac >= 0.0) {
            return config_err(format!("invalid PSD settings {p:?}"));
        }
        let g = &self.grid;
        if !(g.region[0] > 0.0 && g.region[0] < g.region[1]) {
            return config_err(format!("mass region {:?}", g.region));
        }
        if g.q1 == 0 || g.q2 == 0 || g.q1 + g.q2 > 24 {
            return config_err(format!("grid of 2^{} × 2^{} points", g.q1, g.q2));
        }
        if let Some([m1, m2]) = g.align {
            if !(m1 > 0.0 && m2 > 0.0) {
                return config_err(format!("alignment masses ({m1}, {m2})"));
            }
        }
        if !(g.t_c >= 0.0) || !(g.f_low > 0.0) {
            return config_err(format!("t_c = {}, f_low = {}", g.t_c, g.f_low));
        }
        let v = &self.vqa;
        if !(v.rho0 > 0.0 && v.rho0.is_finite()) {
            return config_err(format!("ρ0 = {} must be positive", v.rho0));
        }
        if v.variants.is_empty() || v.depths.is_empty() || v.repeats == 0 {
            return config_err("need at least one variant, depth and repeat");
        }
        if !(v.gtol > 0.0) || v.max_iter == 0 {
            return config_err(format!("optimizer gtol = {}, max_iter = {}", v.gtol, v.max_iter));
        }
        Ok(())
    }

    /// Sample rate of the data, read from the header for file sources.
    pub fn sample_rate(&self) -> Result<f64, HarnessError> {
        match &self.data {
            DataSource::Synthetic(spec) => Ok(spec.f_s),
            DataSource::File { path } => {
                let rec = gwq_core::strain::read_strain(path).map_err(|e| HarnessError::Data(e.to_string()))?;
                Ok(rec.series.sample_rate())
            }
        }
    }

    pub fn chart(&self, f_s: f64) -> Result<CoordChart, HarnessError> {
        CoordChart::new(self.grid.chart, f_s).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn align_params(&self) -> Result<Option<MassParams>, HarnessError> {
        self.grid
            .align
            .map(|[m1, m2]| MassParams::new(m1, m2).map_err(|e| HarnessError::Config(e.to_string())))
            .transpose()
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            binary_cost: self.vqa.binary_cost,
            n_repeats: self.vqa.repeats,
            base_seed: self.vqa.seed,
            warm_start: self.vqa.warm_start,
            optimizer: BfgsSettings {
                gtol: self.vqa.gtol,
                max_iter: self.vqa.max_iter,
                ..BfgsSettings::default()
            },
        }
    }
}

/// Command-line settings that replace the corresponding config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub psd_seg: Option<f64>,
    pub chart: Option<ChartKind>,
    pub grid: Option<(u32, u32)>,
    pub t_c: Option<f64>,
    pub rho0: Option<f64>,
    pub variants: Option<Vec<Variant>>,
    pub depths: Option<Vec<usize>>,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub binary_cost: bool,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub no_cache: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(path) = &self.data {
            cfg.data = DataSource::File { path: path.clone() };
            cfg.psd.source = PsdSource::Welch;
        }
        if let Some(s) = self.psd_seg {
            cfg.psd.seg_seconds = s;
        }
        if let Some(c) = self.chart {
            cfg.grid.chart = c;
        }
        if let Some((q1, q2)) = self.grid {
            cfg.grid.q1 = q1;
            cfg.grid.q2 = q2;
        }
        if let Some(t) = self.t_c {
            cfg.grid.t_c = t;
        }
        if let Some(r) = self.rho0 {
            cfg.vqa.rho0 = r;
        }
        if let Some(v) = &self.variants {
            cfg.vqa.variants = v.clone();
        }
        if let Some(d) = &self.depths {
            cfg.vqa.depths = d.clone();
        }
        if let Some(r) = self.repeats {
            cfg.vqa.repeats = r;
        }
        if let Some(s) = self.seed {
            cfg.vqa.seed = s;
        }
        if self.binary_cost {
            cfg.vqa.binary_cost = true;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if let Some(c) = &self.cache_dir {
            cfg.output.cache_dir = Some(c.clone());
        }
        if self.no_cache {
            cfg.output.cache_dir = None;
        }
    }
}

/// `QxQ` or `Q1xQ2` point counts, each a power of two, as qubit counts.
pub fn parse_grid(s: &str) -> Result<(u32, u32), HarnessError> {
    let bad = || HarnessError::Config(format!("grid {s:?}: expected e.g. 64x64 with power-of-two sides"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let side = |t: &str| -> Result<u32, HarnessError> {
        let n: usize = t.trim().parse().map_err(|_| bad())?;
        if n < 2 || !n.is_power_of_two() {
            return Err(bad());
        }
        Ok(n.trailing_zeros())
    };
    Ok((side(a)?, side(b)?))
}

/// `a..b` (inclusive) or a comma-separated list.
pub fn parse_depths(s: &str) -> Result<Vec<usize>, HarnessError> {
    let bad = || HarnessError::Config(format!("depths {s:?}: expected a..b or a,b,c"));
    let depths: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if depths.is_empty() {
        return Err(bad());
    }
    Ok(depths)
}

pub fn parse_variants(s: &str) -> Result<Vec<Variant>, HarnessError> {
    s.split(',')
        .map(|t| t.parse::<Variant>().map_err(|e| HarnessError::Config(e.to_string())))
        .collect()
}

pub fn parse_chart(s: &str) -> Result<ChartKind, HarnessError> {
    let norm: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_ascii_lowercase();
    Ok(match norm.as_str() {
        "m1m2" => ChartKind::M1M2,
        "theta1eta" => ChartKind::Theta1Eta,
        "meta" => ChartKind::MEta,
        "theta1theta2" => ChartKind::Theta1Theta2,
        _ => return config_err(format!("unknown chart {s:?}")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn grid_and_depth_syntax() {
        assert_eq!(parse_grid("64x64").unwrap(), (6, 6));
        assert_eq!(parse_grid("8X32").unwrap(), (3, 5));
        assert!(parse_grid("60x64").is_err());
        assert!(parse_grid("64").is_err());
        assert_eq!(parse_depths("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_depths("1..=2").unwrap(), vec![1, 2]);
        assert_eq!(parse_depths("0,3,5").unwrap(), vec![0, 3, 5]);
        assert!(parse_depths("5..1").is_err());
        assert!(parse_depths("x").is_err());
        assert_eq!(parse_chart("theta1-eta").unwrap(), ChartKind::Theta1Eta);
        assert_eq!(parse_chart("M1M2").unwrap(), ChartKind::M1M2);
        assert!(parse_chart("polar").is_err());
        assert_eq!(
            parse_variants("qaoa_complete,RDGS").unwrap(),
            vec![Variant::QaoaComplete, Variant::Rdgs]
        );
    }

    #[test]
    fn toml_round_trip_of_every_preset() {
        for name in presets::PRESET_NAMES {
            for cfg in presets::preset(name).unwrap() {
                let text = cfg.to_toml();
                assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg, "{name}:\n{text}");
                if matches!(cfg.data, DataSource::Synthetic(_)) {
                    cfg.validate().unwrap();
                }
            }
        }
    }

    #[test]
    fn overrides_replace_values() {
        let mut cfg = presets::preset("default").unwrap().remove(0);
        let o = Overrides {
            grid: Some((3, 4)),
            rho0: Some(5.0),
            depths: Some(vec![2]),
            binary_cost: true,
            no_cache: true,
            ..Default::default()
        };
        o.apply(&mut cfg);
        assert_eq!((cfg.grid.q1, cfg.grid.q2), (3, 4));
        assert_eq!(cfg.vqa.rho0, 5.0);
        assert_eq!(cfg.vqa.depths, vec![2]);
        assert!(cfg.vqa.binary_cost);
        assert!(cfg.output.cache_dir.is_none());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = presets::preset("default").unwrap().remove(0);
        let mut c = base.clone();
        c.vqa.rho0 = 0.0;
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
        let mut c = base.clone();
        c.data = DataSource::File { path: "/nonexistent/strain.json".into() };
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
        let mut c = base;
        c.vqa.variants.clear();
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_toml("name = 3").is_err());
    }
}
