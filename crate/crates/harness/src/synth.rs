//! Synthetic strain: stationary Gaussian noise drawn directly in the frequency
//! domain from a model PSD, plus an optional injected inspiral.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use gwq_core::psd::Psd;
use gwq_core::signal::{inverse_dft, FrequencySeries, TimeSeries};
use gwq_core::waveform::{generate_template, MassParams};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// One-sided noise PSD model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsdModel {
    /// Constant level, Hz⁻¹.
    Flat { level: f64 },
    /// `s0·[(f/f0)^{-a} + 1 + (f/f0)^{b}]`: steep seismic wall, flat bucket,
    /// rising shot-noise tail. Evaluated at `max(f, 1 Hz)`.
    Powerlaw { s0: f64, f0: f64, a: f64, b: f64 },
    /// Two-column `f, S` text file, log-linearly interpolated onto the bins.
    File { path: PathBuf },
}

impl PsdModel {
    pub const DEFAULT_POWERLAW: PsdModel = PsdModel::Powerlaw {
        s0: 1e-46,
        f0: 150.0,
        a: 4.0,
        b: 2.0,
    };

    pub fn validate(&self) -> Result<(), HarnessError> {
        let ok = match self {
            PsdModel::Flat { level } => *level > 0.0 && level.is_finite(),
            PsdModel::Powerlaw { s0, f0, a, b } => {
                *s0 > 0.0 && *f0 > 0.0 && a.is_finite() && b.is_finite() && s0.is_finite()
            }
            PsdModel::File { path } => path.exists(),
        };
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(format!("invalid PSD model {self}")))
        }
    }

    /// The model sampled on the one-sided grid of a length-`n` series at `f_s`.
    pub fn sample(&self, n: usize, f_s: f64) -> Result<Psd, HarnessError> {
        self.validate()?;
        let psd = match self {
            PsdModel::Flat { level } => Psd::from_fn(n, f_s, |_| *level),
            PsdModel::Powerlaw { s0, f0, a, b } => Psd::from_fn(n, f_s, |f| {
                let x = f.max(1.0) / f0;
                s0 * (x.powf(-a) + 1.0 + x.powf(*b))
            }),
            PsdModel::File { path } => {
                let table = read_psd_table(path)?;
                Psd::from_fn(n, f_s, |f| interpolate_loglinear(&table, f))
            }
        };
        psd.map_err(|e| HarnessError::Config(e.to_string()))
    }
}

impl fmt::Display for PsdModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsdModel::Flat { level } => write!(f, "flat:{level:e}"),
            PsdModel::Powerlaw { s0, f0, a, b } => write!(f, "powerlaw:{s0:e},{f0},{a},{b}"),
            PsdModel::File { path } => write!(f, "file:{}", path.display()),
        }
    }
}

impl FromStr for PsdModel {
    type Err = HarnessError;

    /// `flat:<level>`, `powerlaw[:<s0>,<f0>,<a>,<b>]` or `file:<path>`.
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        let bad = || HarnessError::Config(format!("cannot parse PSD model {s:?}"));
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let model = match kind.trim() {
            "flat" => PsdModel::Flat {
                level: arg.trim().parse().map_err(|_| bad())?,
            },
            "powerlaw" if arg.trim().is_empty() => PsdModel::DEFAULT_POWERLAW,
            "powerlaw" => {
                let v: Vec<f64> = arg
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad())?;
                let [s0, f0, a, b] = v[..] else { return Err(bad()) };
                PsdModel::Powerlaw { s0, f0, a, b }
            }
            "file" if !arg.is_empty() => PsdModel::File { path: arg.into() },
            _ => return Err(bad()),
        };
        match &model {
            PsdModel::File { .. } => Ok(model),
            _ => model.validate().map(|_| model),
        }
    }
}

fn read_psd_table(path: &PathBuf) -> Result<Vec<(f64, f64)>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(|c: char| c.is_alphabetic()) {
            continue;
        }
        let mut it = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty());
        let parse = |x: Option<&str>| x.and_then(|x| x.parse::<f64>().ok());
        match (parse(it.next()), parse(it.next())) {
            (Some(f), Some(s)) if f >= 0.0 && s > 0.0 => rows.push((f, s)),
            _ => return Err(HarnessError::Data(format!("{}: bad PSD row {line:?}", path.display()))),
        }
    }
    if rows.len() < 2 || rows.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(HarnessError::Data(format!(
            "{}: need ≥ 2 rows with increasing frequency",
            path.display()
        )));
    }
    Ok(rows)
}

fn interpolate_loglinear(table: &[(f64, f64)], f: f64) -> f64 {
    let i = table.partition_point(|&(x, _)| x <= f);
    if i == 0 {
        return table[0].1;
    }
    if i == table.len() {
        return table[table.len() - 1].1;
    }
    let ((x0, y0), (x1, y1)) = (table[i - 1], table[i]);
    let w = (f - x0) / (x1 - x0);
    (y0.ln() * (1.0 - w) + y1.ln() * w).exp()
}

/// Parameters of a synthetic data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionSpec {
    pub params: MassParams,
    /// Target SNR of the injected signal (0 for pure noise).
    pub amplitude: f64,
    /// Coalescence time, seconds after the series start.
    pub t_c: f64,
    pub psd_model: PsdModel,
    /// Multiplies the noise draw; 0 gives a noiseless injection.
    #[serde(default = "one")]
    pub noise_scale: f64,
    pub duration: f64,
    pub f_s: f64,
    /// Template low-frequency cutoff, Hz.
    #[serde(default = "default_f_low")]
    pub f_low: f64,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn default_f_low() -> f64 {
    20.0
}

impl InjectionSpec {
    pub fn len(&self) -> usize {
        (self.duration * self.f_s).round() as usize
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let n = self.duration * self.f_s;
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return bad(format!("amplitude {} must be ≥ 0", self.amplitude));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad(format!("noise scale {} must be ≥ 0", self.noise_scale));
        }
        if !(n >= 4.0) || (n - n.round()).abs() > 1e-9 || !(n.round() as usize).is_power_of_two() {
            return bad(format!("duration·f_s = {n} must be a power of two"));
        }
        if !(self.t_c >= 0.0 && self.t_c < self.duration) {
            return bad(format!("t_c = {} outside [0, {})", self.t_c, self.duration));
        }
        self.psd_model.validate()
    }
}

/// Generated strain with the PSD it was drawn from.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub series: TimeSeries,
    pub spectrum: FrequencySeries,
    pub psd: Psd,
}

/// Frequency-domain noise with `E|ν̃_k|² = S_k/(2Δf)`: independent real and
/// imaginary parts of variance `S_k/(4Δf)` for `0 < k < N/2`, real DC and Nyquist
/// bins of variance `S_k/(2Δf)`, Hermitian-mirrored.
pub fn noise_spectrum(psd: &Psd, n: usize, f_s: f64, rng: &mut ChaCha8Rng) -> FrequencySeries {
    let df = f_s / n as f64;
    let s = psd.values();
    let mut bins = vec![Complex64::new(0.0, 0.0); n];
    let mut gauss = || -> f64 { StandardNormal.sample(rng) };
    bins[0] = Complex64::new(gauss() * (s[0] / (2.0 * df)).sqrt(), 0.0);
    for k in 1..n.div_ceil(2) {
        let sigma = (s[k] / (4.0 * df)).sqrt();
        let v = Complex64::new(gauss() * sigma, gauss() * sigma);
        bins[k] = v;
        bins[n - k] = v.conj();
    }
    if n % 2 == 0 {
        bins[n / 2] = Complex64::new(gauss() * (s[n / 2] / (2.0 * df)).sqrt(), 0.0);
    }
    FrequencySeries::new(bins, f_s).expect("n ≥ 2")
}

/// Noise plus `A·h̃_k·e^{-2πi f_k t_c}` for the unit-norm template of `spec.params`.
pub fn synthesize_data(spec: &InjectionSpec) -> Result<SyntheticData, HarnessError> {
    spec.validate()?;
    let n = spec.len();
    let psd = spec.psd_model.sample(n, spec.f_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut spectrum = noise_spectrum(&psd, n, spec.f_s, &mut rng);
    if spec.noise_scale != 1.0 {
        spectrum.bins_mut().iter_mut().for_each(|b| *b *= spec.noise_scale);
    }
    if spec.amplitude > 0.0 {
        let t = generate_template(&spec.params, n, spec.f_s, &psd, spec.f_low)
            .map_err(|e| HarnessError::Config(format!("injection template: {e}")))?;
        let h = t.to_frequency_series(spec.t_c);
        for (y, s) in spectrum.bins_mut().iter_mut().zip(h.bins()) {
            *y += spec.amplitude * s;
        }
    }
    let series = inverse_dft(&spectrum);
    Ok(SyntheticData { series, spectrum, psd })
}
