//! PSD-weighted inner product, SNR at one or all coalescence times, and the
//! split of data into its component along a template and the orthogonal residual.
//!
//! The coalescence phase is always maximized analytically: the SNR is the modulus
//! of the complex correlation rather than its real part.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::psd::Psd;
use crate::signal::FrequencySeries;
use crate::waveform::Template;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("band [{k_low}, {k_high}] invalid for series of {len} bins and PSD of {psd_len} bins")]
    Band {
        k_low: usize,
        k_high: usize,
        len: usize,
        psd_len: usize,
    },
    #[error("frequency grids disagree: {0}")]
    Mismatch(String),
    #[error("template is not unit-normalized under this PSD ((h|h) = {norm})")]
    Normalization { norm: f64 },
}

pub type Result<T> = std::result::Result<T, FilterError>;

fn same_df(a: f64, b: f64) -> bool {
    (a / b - 1.0).abs() <= 1e-9
}

fn check_band(len: usize, psd: &Psd, k_low: usize, k_high: usize) -> Result<()> {
    if k_low > k_high || k_high >= len || k_high >= psd.len() || k_high > len / 2 {
        return Err(FilterError::Band {
            k_low,
            k_high,
            len,
            psd_len: psd.len(),
        });
    }
    Ok(())
}

fn check_template(t: &Template, y: &FrequencySeries, psd: &Psd) -> Result<()> {
    if t.series_len() != y.len() {
        return Err(FilterError::Mismatch(format!(
            "template built for N={}, data has N={}",
            t.series_len(),
            y.len()
        )));
    }
    if !same_df(y.delta_f(), psd.delta_f()) || !same_df(t.delta_f(), y.delta_f()) {
        return Err(FilterError::Mismatch(format!(
            "Δf: data {}, PSD {}, template {}",
            y.delta_f(),
            psd.delta_f(),
            t.delta_f()
        )));
    }
    check_band(y.len(), psd, t.k_low(), t.k_high())
}

/// One-sided real inner product `4Δf Re Σ_{k_L}^{k_H} x̃_k* ỹ_k / S_k`.
pub fn inner_product(
    x: &FrequencySeries,
    y: &FrequencySeries,
    psd: &Psd,
    k_low: usize,
    k_high: usize,
) -> Result<f64> {
    if x.len() != y.len() || !same_df(x.delta_f(), y.delta_f()) || !same_df(x.delta_f(), psd.delta_f())
    {
        return Err(FilterError::Mismatch(format!(
            "x: {} bins Δf={}, y: {} bins Δf={}, PSD Δf={}",
            x.len(),
            x.delta_f(),
            y.len(),
            y.delta_f(),
            psd.delta_f()
        )));
    }
    check_band(x.len(), psd, k_low, k_high)?;
    let s = psd.values();
    let sum: f64 = (k_low..=k_high)
        .map(|k| (x.bins()[k].conj() * y.bins()[k]).re / s[k])
        .sum();
    Ok(4.0 * x.delta_f() * sum)
}

/// Complex correlation `4Δf Σ e^{2πi f_k t_c} h̃_k* ỹ_k / S_k` over the template band.
pub fn complex_correlation(t: &Template, y: &FrequencySeries, psd: &Psd, t_c: f64) -> Result<Complex64> {
    check_template(t, y, psd)?;
    let df = y.delta_f();
    let s = psd.values();
    let data = y.bins();
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, h) in t.bins().iter().enumerate() {
        let k = t.k_low() + i;
        let cycles = (k as f64 * df * t_c).rem_euclid(1.0);
        let shift = Complex64::from_polar(1.0, 2.0 * PI * cycles);
        acc += shift * h.conj() * data[k] / s[k];
    }
    Ok(acc * (4.0 * df))
}

/// Phase-maximized SNR of `t` against `y` at coalescence time `t_c` (seconds from
/// the series start).
pub fn snr_at(t: &Template, y: &FrequencySeries, psd: &Psd, t_c: f64) -> Result<f64> {
    complex_correlation(t, y, psd, t_c).map(|c| c.norm())
}

/// SNR sampled at every `t_c = n·Δt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSeries {
    pub rho: Vec<f64>,
    pub t0: f64,
    pub delta_t: f64,
}

impl SnrSeries {
    /// Index and value of the largest SNR.
    pub fn peak(&self) -> (usize, f64) {
        self.rho
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
    }

    /// Coalescence time (relative to series start) of sample `n`.
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.delta_t
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = Vec::with_capacity(self.rho.len() * 24);
        writeln!(out, "t_s,rho")?;
        for (n, r) in self.rho.iter().enumerate() {
            writeln!(out, "{},{}", self.t0 + self.time(n), r)?;
        }
        std::fs::write(path, out)
    }
}

/// SNR at all coalescence times through one inverse transform of the weighted
/// product `4Δf h̃_k* ỹ_k / S_k`.
pub fn snr_series(t: &Template, y: &FrequencySeries, psd: &Psd) -> Result<SnrSeries> {
    check_template(t, y, psd)?;
    let n = y.len();
    let df = y.delta_f();
    let s = psd.values();
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    for (i, h) in t.bins().iter().enumerate() {
        let k = t.k_low() + i;
        z[k] = h.conj() * y.bins()[k] * (4.0 * df / s[k]);
    }
    FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut z);
    Ok(SnrSeries {
        rho: z.into_iter().map(|c| c.norm()).collect(),
        t0: 0.0,
        delta_t: 1.0 / y.origin_sample_rate(),
    })
}

/// Data split along a template: `signal + residual = y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub signal: FrequencySeries,
    pub residual: FrequencySeries,
    /// Complex projection coefficient; its modulus is the SNR at `t_c`.
    pub coefficient: Complex64,
}

/// Splits `y` into `c·h` and `y − c·h`, where `h` is the template coalescing at
/// `t_c` and `c` is the phase-maximized projection. The signal part occupies the
/// template band and its Hermitian mirror, so both parts stay real in time.
pub fn decompose(y: &FrequencySeries, t: &Template, psd: &Psd, t_c: f64) -> Result<Decomposition> {
    check_template(t, y, psd)?;
    let df = y.delta_f();
    let s = psd.values();
    let norm: f64 = 4.0 * df * t.bins().iter().enumerate().map(|(i, h)| h.norm_sqr() / s[t.k_low() + i]).sum::<f64>();
    if !t.is_normalized() || (norm - 1.0).abs() > 1e-8 {
        return Err(FilterError::Normalization { norm });
    }
    let c = complex_correlation(t, y, psd, t_c)?;
    let n = y.len();
    let mut signal = vec![Complex64::new(0.0, 0.0); n];
    for (i, h) in t.bins().iter().enumerate() {
        let k = t.k_low() + i;
        let cycles = (k as f64 * df * t_c).rem_euclid(1.0);
        let v = c * h * Complex64::from_polar(1.0, -2.0 * PI * cycles);
        signal[k] = v;
        signal[n - k] = v.conj();
    }
    let residual: Vec<Complex64> = y.bins().iter().zip(&signal).map(|(a, b)| a - b).collect();
    let f_s = y.origin_sample_rate();
    Ok(Decomposition {
        signal: FrequencySeries::new(signal, f_s).expect("same layout as input"),
        residual: FrequencySeries::new(residual, f_s).expect("same layout as input"),
        coefficient: c,
    })
}
