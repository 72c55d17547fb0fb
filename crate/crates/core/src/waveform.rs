//! Restricted post-Newtonian (TaylorF2) inspiral templates in the frequency domain.
//!
//! Templates are sampled directly at the bin frequencies `f_k = k·Δf` between a
//! low-frequency cutoff and the last-stable-orbit frequency, with coalescence time
//! and phase set to zero, and scaled to unit norm under the PSD-weighted inner
//! product.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::psd::Psd;
use crate::signal::{inverse_dft_complex, FrequencySeries, TimeSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("invalid masses m1={m1}, m2={m2}: both must be positive and finite")]
    InvalidMasses { m1: f64, m2: f64 },
    #[error("empty band: k_L={k_low} > k_H={k_high} (f_lso={f_lso:.3} Hz, f_L={f_low} Hz)")]
    BandEmpty {
        k_low: usize,
        k_high: usize,
        f_lso: f64,
        f_low: f64,
    },
    #[error("PSD grid (Δf={psd_df}, {psd_len} bins) does not cover series Δf={df} up to bin {k_high}")]
    PsdMismatch {
        psd_df: f64,
        psd_len: usize,
        df: f64,
        k_high: usize,
    },
    #[error("invalid series layout: {0}")]
    Layout(String),
}

pub type Result<T> = std::result::Result<T, WaveformError>;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Velocity at the innermost stable circular orbit of a Schwarzschild black hole.
pub fn v_lso() -> f64 {
    1.0 / 6f64.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Newton's constant, m³ kg⁻¹ s⁻².
    pub g: f64,
    /// Speed of light, m/s.
    pub c: f64,
    /// Solar mass, kg.
    pub m_sun: f64,
}

/// `G·M_sun/c³` in seconds.
pub const SOLAR_MASS_SECONDS: f64 = 4.925_491_025_543_576e-6;

impl PhysicalConstants {
    /// CODATA `G` and exact `c`, with the solar mass chosen so that
    /// `G·M_sun/c³` equals [`SOLAR_MASS_SECONDS`].
    pub const STANDARD: Self = Self {
        g: 6.674_30e-11,
        c: 299_792_458.0,
        m_sun: SOLAR_MASS_SECONDS * 299_792_458.0 * 299_792_458.0 * 299_792_458.0 / 6.674_30e-11,
    };

    pub fn solar_mass_seconds(&self) -> f64 {
        self.g * self.m_sun / (self.c * self.c * self.c)
    }
}

/// Component masses in solar masses.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MassParams {
    pub m1: f64,
    pub m2: f64,
}

impl MassParams {
    pub fn new(m1: f64, m2: f64) -> Result<Self> {
        if !(m1.is_finite() && m2.is_finite() && m1 > 0.0 && m2 > 0.0) {
            return Err(WaveformError::InvalidMasses { m1, m2 });
        }
        Ok(Self { m1, m2 })
    }

    pub fn total(&self) -> f64 {
        self.m1 + self.m2
    }

    /// Symmetric mass ratio `m1·m2/M²`.
    pub fn eta(&self) -> f64 {
        let m = self.total();
        self.m1 * self.m2 / (m * m)
    }

    pub fn chirp_mass(&self) -> f64 {
        self.total() * self.eta().powf(0.6)
    }
}

/// Frequency of the last stable orbit, `c³ v_lso³ / (π G M)`, for total mass in M_sun.
pub fn f_lso(total_mass: f64) -> f64 {
    let v = v_lso();
    v * v * v / (PI * SOLAR_MASS_SECONDS * total_mass)
}

/// Mass-dependent coefficients of the 3.5PN phase series.
#[derive(Debug, Clone, Copy)]
pub struct PhaseCoefficients {
    leading: f64,
    mass_seconds: f64,
    c2: f64,
    c3: f64,
    c4: f64,
    c5: f64,
    c6: f64,
    c6_log: f64,
    c7: f64,
}

impl PhaseCoefficients {
    pub fn new(params: &MassParams) -> Self {
        let eta = params.eta();
        let eta2 = eta * eta;
        let eta3 = eta2 * eta;
        let pi2 = PI * PI;
        Self {
            leading: 3.0 / (128.0 * eta),
            mass_seconds: params.total() * SOLAR_MASS_SECONDS,
            c2: 20.0 / 9.0 * (743.0 / 336.0 + 11.0 / 4.0 * eta),
            c3: -16.0 * PI,
            c4: 10.0 * (3_058_673.0 / 1_016_064.0 + 5429.0 / 1008.0 * eta + 617.0 / 144.0 * eta2),
            c5: PI * (38645.0 / 756.0 - 65.0 / 9.0 * eta),
            c6: 11_583_231_236_531.0 / 4_694_215_680.0 - 640.0 / 3.0 * pi2
                - 6848.0 / 21.0 * EULER_GAMMA
                + (-15_737_765_635.0 / 3_048_192.0 + 2255.0 * pi2 / 12.0) * eta
                + 76055.0 / 1728.0 * eta2
                - 127_825.0 / 1296.0 * eta3,
            c6_log: -6848.0 / 21.0,
            c7: PI * (77_096_675.0 / 254_016.0 + 378_515.0 / 1512.0 * eta - 74045.0 / 756.0 * eta2),
        }
    }

    /// `v = (π G M f / c³)^{1/3}`.
    pub fn velocity(&self, f: f64) -> f64 {
        (PI * self.mass_seconds * f).cbrt()
    }

    pub fn phase_at_velocity(&self, v: f64) -> f64 {
        let v2 = v * v;
        let v3 = v2 * v;
        let v4 = v3 * v;
        let v5 = v4 * v;
        let v6 = v5 * v;
        let v7 = v6 * v;
        let ln_v = v.ln();
        let series = 1.0
            + self.c2 * v2
            + self.c3 * v3
            + self.c4 * v4
            + self.c5 * (1.0 + 3.0 * (ln_v - v_lso().ln())) * v5
            + (self.c6 + self.c6_log * (4f64.ln() + ln_v)) * v6
            + self.c7 * v7;
        self.leading / v5 * series
    }

    pub fn phase(&self, f: f64) -> f64 {
        self.phase_at_velocity(self.velocity(f))
    }
}

/// Ψ(f; m1, m2) in radians; `f` in Hz, must be positive.
pub fn pn_phase(f: f64, params: &MassParams) -> f64 {
    PhaseCoefficients::new(params).phase(f)
}

/// Inclusive index band `[k_L, k_H]` for a length-`n` series sampled at `f_s`.
pub fn band_indices(n: usize, f_s: f64, f_low: f64, total_mass: f64) -> (usize, usize) {
    let snap = |x: f64| {
        let r = x.round();
        if (x - r).abs() <= 1e-9 * r.max(1.0) {
            r
        } else {
            x
        }
    };
    let k_low = (snap(n as f64 * f_low / f_s).ceil() as usize).max(1);
    let k_high = ((n - 1) / 2).min(snap(n as f64 * f_lso(total_mass) / f_s).floor() as usize);
    (k_low, k_high)
}

/// Frequency-domain template over the band `[k_low, k_high]` of a length-`n` series.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    bins: Vec<Complex64>,
    k_low: usize,
    k_high: usize,
    n: usize,
    f_s: f64,
    params: MassParams,
    normalization: f64,
    normalized: bool,
}

impl Template {
    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    /// Bin `k` of the full series (zero outside the band).
    pub fn bin(&self, k: usize) -> Complex64 {
        if k >= self.k_low && k <= self.k_high {
            self.bins[k - self.k_low]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn k_low(&self) -> usize {
        self.k_low
    }

    pub fn k_high(&self) -> usize {
        self.k_high
    }

    pub fn series_len(&self) -> usize {
        self.n
    }

    pub fn sample_rate(&self) -> f64 {
        self.f_s
    }

    pub fn delta_f(&self) -> f64 {
        self.f_s / self.n as f64
    }

    pub fn params(&self) -> MassParams {
        self.params
    }

    /// The factor 𝒩 applied to the raw `f^{-7/6} e^{iφ}` samples.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Copy with every bin multiplied by `a`; the result no longer counts as normalized.
    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.bins.iter_mut().for_each(|b| *b *= a);
        out.normalization *= a;
        out.normalized = a == 1.0;
        out
    }

    /// Full two-sided spectrum of the real waveform coalescing at `t_c` seconds after
    /// the series start: bins `h̃_k e^{-2πi f_k t_c}` with Hermitian mirror images.
    pub fn to_frequency_series(&self, t_c: f64) -> FrequencySeries {
        let n = self.n;
        let df = self.delta_f();
        let mut full = vec![Complex64::new(0.0, 0.0); n];
        for (i, h) in self.bins.iter().enumerate() {
            let k = self.k_low + i;
            let cycles = (k as f64 * df * t_c).rem_euclid(1.0);
            let v = h * Complex64::from_polar(1.0, -2.0 * PI * cycles);
            full[k] = v;
            full[n - k] = v.conj();
        }
        FrequencySeries::new(full, self.f_s).expect("template series has ≥ 2 bins")
    }

    /// Dumps `k, f_Hz, re, im` rows.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = Vec::new();
        writeln!(out, "k,f_Hz,re,im")?;
        let df = self.delta_f();
        for (i, h) in self.bins.iter().enumerate() {
            let k = self.k_low + i;
            writeln!(out, "{k},{},{:e},{:e}", k as f64 * df, h.re, h.im)?;
        }
        std::fs::write(path, out)
    }
}

fn check_psd(psd: &Psd, n: usize, f_s: f64, k_high: usize) -> Result<()> {
    let df = f_s / n as f64;
    if (psd.delta_f() / df - 1.0).abs() > 1e-9 || psd.len() <= k_high {
        return Err(WaveformError::PsdMismatch {
            psd_df: psd.delta_f(),
            psd_len: psd.len(),
            df,
            k_high,
        });
    }
    Ok(())
}

/// `4Δf Σ_{k_L}^{k_H} |h̃_k|²/S_k` for raw bins starting at `k_low`.
fn band_norm_sqr(bins: &[Complex64], k_low: usize, psd: &Psd, df: f64) -> f64 {
    let s = &psd.values()[k_low..k_low + bins.len()];
    let terms: Vec<f64> = bins.iter().zip(s).map(|(h, s)| h.norm_sqr() / s).collect();
    4.0 * df * crate::signal::pairwise_sum(&terms)
}

/// Generates the unit-norm template for `params` on a length-`n` series at `f_s`,
/// band-limited to `[max(1, ⌈n f_low/f_s⌉), min(⌊(n-1)/2⌋, ⌊n f_lso/f_s⌋)]`.
pub fn generate_template(
    params: &MassParams,
    n: usize,
    f_s: f64,
    psd: &Psd,
    f_low: f64,
) -> Result<Template> {
    if n < 4 || !(f_s > 0.0) {
        return Err(WaveformError::Layout(format!("N={n}, f_s={f_s}")));
    }
    let df = f_s / n as f64;
    if !(f_low >= df) {
        return Err(WaveformError::Layout(format!(
            "low cutoff {f_low} Hz is below the bin width {df} Hz"
        )));
    }
    let (k_low, k_high) = band_indices(n, f_s, f_low, params.total());
    if k_low > k_high {
        return Err(WaveformError::BandEmpty {
            k_low,
            k_high,
            f_lso: f_lso(params.total()),
            f_low,
        });
    }
    check_psd(psd, n, f_s, k_high)?;
    let coeffs = PhaseCoefficients::new(params);
    // Nyquist is never reached: k_high ≤ ⌊(n-1)/2⌋ < n/2.
    let mut bins: Vec<Complex64> = (k_low..=k_high)
        .map(|k| {
            let f = k as f64 * df;
            let amp = f.powf(-7.0 / 6.0);
            Complex64::from_polar(amp, PI / 4.0 - coeffs.phase(f))
        })
        .collect();
    let norm = 1.0 / band_norm_sqr(&bins, k_low, psd, df).sqrt();
    for b in &mut bins {
        *b *= norm;
    }
    Ok(Template {
        bins,
        k_low,
        k_high,
        n,
        f_s,
        params: *params,
        normalization: norm,
        normalized: true,
    })
}

/// Real time-domain waveform of the template coalescing at the series start.
pub fn template_time_domain(t: &Template, n: usize) -> Result<TimeSeries> {
    if n != t.n {
        return Err(WaveformError::Layout(format!(
            "template built for N={}, asked for N={n}",
            t.n
        )));
    }
    let samples = inverse_dft_complex(&t.to_frequency_series(0.0))
        .into_iter()
        .map(|c| c.re)
        .collect();
    TimeSeries::new(samples, t.f_s, 0.0).map_err(|e| WaveformError::Layout(e.to_string()))
}
