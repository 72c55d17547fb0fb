//! One-sided noise power spectral density: Welch-style estimation from strain and
//! resampling onto the bin grid of a full-length series.
//!
//! Normalization follows `E[|ν̃_k|²] = S_k / (2Δf)` with the Δt-weighted transform
//! of [`crate::signal`]; for white noise of variance σ² this gives `S = 2σ²/f_s`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{hann_window, pairwise_sum, segments, SignalError, TimeSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsdError {
    #[error("need at least 2 segments for averaging, got {segments}")]
    InsufficientData { segments: usize },
    #[error("invalid estimation settings: {0}")]
    InvalidSettings(String),
    #[error("target frequency {requested} Hz lies above the PSD's highest bin at {available} Hz")]
    FrequencyRange { requested: f64, available: f64 },
    #[error("invalid PSD: {0}")]
    Invalid(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

pub type Result<T> = std::result::Result<T, PsdError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AverageMethod {
    Median,
    Mean,
}

impl std::str::FromStr for AverageMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "median" => Ok(Self::Median),
            "mean" => Ok(Self::Mean),
            other => Err(format!("unknown averaging method {other:?}")),
        }
    }
}

impl std::fmt::Display for AverageMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Median => "median",
            Self::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchSettings {
    pub seg_seconds: f64,
    pub overlap_frac: f64,
    pub method: AverageMethod,
}

impl Default for WelchSettings {
    fn default() -> Self {
        Self {
            seg_seconds: 16.0,
            overlap_frac: 0.5,
            method: AverageMethod::Median,
        }
    }
}

/// Noise PSD sampled at `k·Δf` for `k = 0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    values: Vec<f64>,
    delta_f: f64,
}

impl Psd {
    pub fn new(values: Vec<f64>, delta_f: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(PsdError::Invalid(format!(
                "need at least 2 bins, got {}",
                values.len()
            )));
        }
        if !(delta_f.is_finite() && delta_f > 0.0) {
            return Err(PsdError::Invalid(format!("bin width must be positive, got {delta_f}")));
        }
        if let Some(k) = values.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(PsdError::Invalid(format!(
                "bin {k} is not positive and finite ({})",
                values[k]
            )));
        }
        Ok(Self { values, delta_f })
    }

    /// Evaluates `model(f)` at each one-sided bin of a length-`n` series sampled at `f_s`.
    pub fn from_fn(n: usize, f_s: f64, model: impl Fn(f64) -> f64) -> Result<Self> {
        let df = f_s / n as f64;
        Self::new((0..=n / 2).map(|k| model(k as f64 * df)).collect(), df)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.delta_f
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequency(self.values.len() - 1)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|s| s * a).collect(),
            delta_f: self.delta_f,
        }
    }
}

/// Ratio of the sample median to the mean for `n` exponentially distributed
/// periodogram values.
pub fn median_bias(n: usize) -> f64 {
    let mut ans = 1.0;
    for i in 1..=(n.saturating_sub(1)) / 2 {
        ans += 1.0 / (2 * i + 1) as f64 - 1.0 / (2 * i) as f64;
    }
    ans
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Hann-windowed averaged periodogram over segments of `seg_seconds` with the
/// given fractional overlap; each segment contributes `2|X_k|²/(f_s Σw²)`.
pub fn estimate_psd(
    ts: &TimeSeries,
    seg_seconds: f64,
    overlap_frac: f64,
    method: AverageMethod,
) -> Result<Psd> {
    let f_s = ts.sample_rate();
    let seg_len = (seg_seconds * f_s).round() as usize;
    if !(seg_seconds > 0.0) || seg_len < 16 {
        return Err(PsdError::InvalidSettings(format!(
            "segment of {seg_seconds} s holds {seg_len} samples; at least 16 required"
        )));
    }
    if !(0.0..1.0).contains(&overlap_frac) {
        return Err(PsdError::InvalidSettings(format!(
            "overlap fraction {overlap_frac} outside [0, 1)"
        )));
    }
    let overlap = ((overlap_frac * seg_len as f64).round() as usize).min(seg_len - 1);
    let segs = segments(ts, seg_len, overlap)?;
    if segs.len() < 2 {
        return Err(PsdError::InsufficientData {
            segments: segs.len(),
        });
    }
    let window = hann_window(seg_len);
    let norm = 2.0 / (f_s * window.iter().map(|w| w * w).sum::<f64>());
    let n_bins = seg_len / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg_len);

    let periodograms: Vec<Vec<f64>> = segs
        .par_iter()
        .map(|seg| {
            let mut buf: Vec<Complex64> = seg
                .samples
                .iter()
                .zip(&window)
                .map(|(x, w)| Complex64::new(x * w, 0.0))
                .collect();
            fft.process(&mut buf);
            buf[..n_bins].iter().map(|c| c.norm_sqr() * norm).collect()
        })
        .collect();

    let n_seg = periodograms.len();
    let bias = median_bias(n_seg);
    let values: Vec<f64> = (0..n_bins)
        .map(|k| {
            let mut column: Vec<f64> = periodograms.iter().map(|p| p[k]).collect();
            match method {
                AverageMethod::Mean => pairwise_sum(&column) / n_seg as f64,
                AverageMethod::Median => median(&mut column) / bias,
            }
        })
        .collect();
    let delta_f = f_s / seg_len as f64;
    // An all-zero input has no positive estimate to offer.
    if values.iter().any(|s| !(*s > 0.0)) {
        let floor = values.iter().cloned().fold(0.0, f64::max) * 1e-30;
        if floor > 0.0 {
            return Psd::new(values.into_iter().map(|s| s.max(floor)).collect(), delta_f);
        }
    }
    Psd::new(values, delta_f)
}

/// Resamples `psd` onto the one-sided bins of a length-`target_n` series at
/// `target_f_s` by linear interpolation of `ln S` in frequency. Bins below
/// `f_low` are raised to at least `f_floor_frac · max S`.
pub fn condition_psd(
    psd: &Psd,
    target_n: usize,
    target_f_s: f64,
    f_floor_frac: f64,
    f_low: f64,
) -> Result<Psd> {
    if target_n < 2 || !(target_f_s > 0.0) {
        return Err(PsdError::InvalidSettings(format!(
            "target grid N={target_n}, f_s={target_f_s} is invalid"
        )));
    }
    let target_df = target_f_s / target_n as f64;
    let n_bins = target_n / 2 + 1;
    let top = (n_bins - 1) as f64 * target_df;
    let available = psd.max_frequency();
    if top > available * (1.0 + 1e-12) {
        return Err(PsdError::FrequencyRange {
            requested: top,
            available,
        });
    }
    let ratio = target_df / psd.delta_f;
    let src = psd.values();
    let max_s = src.iter().cloned().fold(0.0, f64::max);
    let floor = f_floor_frac * max_s;
    let values = (0..n_bins)
        .map(|k| {
            let pos = k as f64 * ratio;
            let nearest = pos.round();
            let s = if (pos - nearest).abs() <= 1e-9 * pos.max(1.0) {
                src[(nearest as usize).min(src.len() - 1)]
            } else {
                let i0 = (pos.floor() as usize).min(src.len() - 2);
                let frac = pos - i0 as f64;
                (src[i0].ln() * (1.0 - frac) + src[i0 + 1].ln() * frac).exp()
            };
            if (k as f64) * target_df < f_low {
                s.max(floor)
            } else {
                s
            }
        })
        .collect();
    Psd::new(values, target_df)
}
