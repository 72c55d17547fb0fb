//! Strain time series, their discrete Fourier transforms, and windowing.
//!
//! The forward transform carries the sampling interval as a weight,
//!
//! ```text
//! ỹ_k = Δt · Σ_n y_n · exp(-2πi·nk/N)
//! ```
//!
//! so every frequency-domain quantity downstream is expressed in strain/Hz and the
//! inner-product formulas can be written without extra factors. The inverse carries
//! the matching `Δf = f_s/N` weight.

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid time series: {0}")]
    InvalidSeries(String),
    #[error("invalid frequency series: {0}")]
    InvalidSpectrum(String),
    #[error("segment length {seg_len} exceeds series length {n}")]
    EmptySegmentation { seg_len: usize, n: usize },
    #[error("overlap {overlap} must be smaller than segment length {seg_len}")]
    InvalidOverlap { seg_len: usize, overlap: usize },
}

pub type Result<T> = std::result::Result<T, SignalError>;

/// Real strain samples taken at a uniform rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    f_s: f64,
    t0: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, f_s: f64, t0: f64) -> Result<Self> {
        if !(f_s.is_finite() && f_s > 0.0) {
            return Err(SignalError::InvalidSeries(format!(
                "sampling frequency must be positive, got {f_s}"
            )));
        }
        if samples.len() < 2 {
            return Err(SignalError::InvalidSeries(format!(
                "need at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(SignalError::InvalidSeries(format!(
                "sample {i} is not finite"
            )));
        }
        if !t0.is_finite() {
            return Err(SignalError::InvalidSeries("start epoch is not finite".into()));
        }
        Ok(Self { samples, f_s, t0 })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.f_s
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn delta_t(&self) -> f64 {
        1.0 / self.f_s
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.f_s
    }
}

/// Two-sided spectrum of a length-`N` series, bins ordered `k = 0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySeries {
    bins: Vec<Complex64>,
    delta_f: f64,
    origin_n: usize,
    origin_f_s: f64,
}

impl FrequencySeries {
    /// Wraps a full set of `N` bins produced from (or destined for) a series
    /// sampled at `f_s`.
    pub fn new(bins: Vec<Complex64>, f_s: f64) -> Result<Self> {
        if !(f_s.is_finite() && f_s > 0.0) {
            return Err(SignalError::InvalidSpectrum(format!(
                "sampling frequency must be positive, got {f_s}"
            )));
        }
        if bins.len() < 2 {
            return Err(SignalError::InvalidSpectrum(format!(
                "need at least 2 bins, got {}",
                bins.len()
            )));
        }
        let n = bins.len();
        Ok(Self {
            bins,
            delta_f: f_s / n as f64,
            origin_n: n,
            origin_f_s: f_s,
        })
    }

    /// All-zero spectrum of `n` bins.
    pub fn zeros(n: usize, f_s: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); n], f_s)
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }

    pub fn into_bins(self) -> Vec<Complex64> {
        self.bins
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn origin_len(&self) -> usize {
        self.origin_n
    }

    pub fn origin_sample_rate(&self) -> f64 {
        self.origin_f_s
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Frequency of bin `k` in Hz (`k·Δf`, no wrapping).
    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.delta_f
    }

    /// Largest `|ỹ_{N-k} - conj(ỹ_k)|` relative to the largest bin magnitude.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.bins.len();
        let scale = self.bins.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        (1..n)
            .map(|k| (self.bins[n - k] - self.bins[k].conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

/// `ỹ_k = Δt Σ_n y_n e^{-2πink/N}` via a fast transform.
pub fn forward_dft(ts: &TimeSeries) -> FrequencySeries {
    let dt = ts.delta_t();
    let mut buf: Vec<Complex64> = ts.samples.iter().map(|&y| Complex64::new(y, 0.0)).collect();
    fft_in_place(&mut buf, false);
    for c in &mut buf {
        *c *= dt;
    }
    let n = buf.len();
    FrequencySeries {
        bins: buf,
        delta_f: ts.f_s / n as f64,
        origin_n: n,
        origin_f_s: ts.f_s,
    }
}

/// Complex inverse: `y_n = Δf Σ_k ỹ_k e^{2πink/N}`.
pub fn inverse_dft_complex(fs: &FrequencySeries) -> Vec<Complex64> {
    let mut buf = fs.bins.clone();
    fft_in_place(&mut buf, true);
    let df = fs.delta_f;
    for c in &mut buf {
        *c *= df;
    }
    buf
}

/// Real inverse. Imaginary residue from a spectrum that is not exactly
/// Hermitian is discarded.
pub fn inverse_dft(fs: &FrequencySeries) -> TimeSeries {
    let samples = inverse_dft_complex(fs).into_iter().map(|c| c.re).collect();
    TimeSeries {
        samples,
        f_s: fs.origin_f_s,
        t0: 0.0,
    }
}

/// Like [`inverse_dft`] but stamping the result with a start epoch.
pub fn inverse_dft_at(fs: &FrequencySeries, t0: f64) -> TimeSeries {
    let mut ts = inverse_dft(fs);
    ts.t0 = t0;
    ts
}

/// Symmetric Hann window `w_j = 0.5(1 - cos(2πj/(n-1)))`.
pub fn hann_window(n: usize) -> Vec<f64> {
    assert!(n >= 2, "Hann window needs at least 2 points");
    let denom = (n - 1) as f64;
    (0..n)
        .map(|j| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * j as f64 / denom).cos()))
        .collect()
}

/// A borrowed window into a [`TimeSeries`].
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub offset: usize,
    pub samples: &'a [f64],
    pub f_s: f64,
    pub t0: f64,
}

impl Segment<'_> {
    pub fn to_series(&self) -> TimeSeries {
        TimeSeries {
            samples: self.samples.to_vec(),
            f_s: self.f_s,
            t0: self.t0,
        }
    }
}

/// Maximal run of windows of `seg_len` samples advancing by `seg_len - overlap`.
pub fn segments(ts: &TimeSeries, seg_len: usize, overlap: usize) -> Result<Vec<Segment<'_>>> {
    let n = ts.len();
    if seg_len > n || seg_len == 0 {
        return Err(SignalError::EmptySegmentation { seg_len, n });
    }
    if overlap >= seg_len {
        return Err(SignalError::InvalidOverlap { seg_len, overlap });
    }
    let stride = seg_len - overlap;
    let count = (n - seg_len) / stride + 1;
    Ok((0..count)
        .map(|i| {
            let offset = i * stride;
            Segment {
                offset,
                samples: &ts.samples[offset..offset + seg_len],
                f_s: ts.f_s,
                t0: ts.t0 + offset as f64 / ts.f_s,
            }
        })
        .collect())
}

/// Sum by recursive halving so the result does not depend on how callers chunk work.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn brute_dft(y: &[f64], dt: f64) -> Vec<Complex64> {
        let n = y.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &v) in y.iter().enumerate() {
                    let arg = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                    acc += v * Complex64::from_polar(1.0, arg);
                }
                acc * dt
            })
            .collect()
    }

    #[test]
    fn delta_input_is_flat() {
        let ts = TimeSeries::new(vec![1.0, 0.0, 0.0, 0.0], 4.0, 0.0).unwrap();
        let fs = forward_dft(&ts);
        for c in fs.bins() {
            assert!((c - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        }
        assert_eq!(fs.delta_f(), 1.0);
    }

    #[test]
    fn constant_input_concentrates_in_dc() {
        let c = 3.5;
        let n = 16;
        let ts = TimeSeries::new(vec![c; n], 8.0, 0.0).unwrap();
        let fs = forward_dft(&ts);
        assert!((fs.bins()[0].re - c * n as f64 / 8.0).abs() < 1e-12);
        for b in &fs.bins()[1..] {
            assert!(b.norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ts = TimeSeries::new(y.clone(), 32.0, 0.0).unwrap();
        let fast = forward_dft(&ts);
        let slow = brute_dft(&y, 1.0 / 32.0);
        for (a, b) in fast.bins().iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_bin_inverse_is_sampled_exponential() {
        let n = 32;
        let f_s = 64.0;
        let mut bins = vec![Complex64::new(0.0, 0.0); n];
        bins[1] = Complex64::new(1.0, 0.0);
        let fs = FrequencySeries::new(bins.clone(), f_s).unwrap();
        let df = f_s / n as f64;
        let y = inverse_dft_complex(&fs);
        for (j, v) in y.iter().enumerate() {
            let expect = df * Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
            assert!((v - expect).norm() < 1e-13);
        }
        // Hermitian pair gives a real cosine of amplitude 2Δf.
        bins[n - 1] = Complex64::new(1.0, 0.0);
        let ts = inverse_dft(&FrequencySeries::new(bins, f_s).unwrap());
        for (j, v) in ts.samples().iter().enumerate() {
            let expect = 2.0 * df * (2.0 * PI * j as f64 / n as f64).cos();
            assert!((v - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_spectrum_inverts_to_zero() {
        let fs = FrequencySeries::zeros(16, 16.0).unwrap();
        assert!(inverse_dft(&fs).samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn round_trip_large() {
        let n = 1 << 20;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ts = TimeSeries::new(y, 4096.0, 0.0).unwrap();
        let back = inverse_dft(&forward_dft(&ts));
        let max_abs = ts.samples().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let err = ts
            .samples()
            .iter()
            .zip(back.samples())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err / max_abs < 1e-10, "round trip error {err}");
    }

    #[test]
    fn parseval_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..1000).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ts = TimeSeries::new(y, 100.0, 0.0).unwrap();
        let fs = forward_dft(&ts);
        let time_energy: f64 = ts.samples().iter().map(|v| v * v).sum::<f64>() * ts.delta_t();
        let freq_energy: f64 = fs.bins().iter().map(|c| c.norm_sqr()).sum::<f64>() * fs.delta_f();
        assert!((time_energy - freq_energy).abs() / time_energy < 1e-10);
        assert!(fs.hermitian_defect() < 1e-10);
    }

    #[test]
    fn hann_endpoints_and_energy() {
        let w = hann_window(9);
        assert_eq!(w[0], 0.0);
        assert!((w[4] - 1.0).abs() < 1e-15);
        // w_j² = sin⁴(πj/(n-1)); the direct sum is evaluated in that form.
        for n in [2usize, 3, 8, 9, 64, 257] {
            let w = hann_window(n);
            let direct: f64 = (0..n)
                .map(|j| (PI * j as f64 / (n - 1) as f64).sin().powi(4))
                .sum();
            let ours: f64 = w.iter().map(|x| x * x).sum();
            assert!((direct - ours).abs() < 1e-12, "n={n}");
            if n >= 4 {
                // sin⁴x = 3/8 - cos2x/2 + cos4x/8 and the cosine sums vanish once n-1 ≥ 3.
                assert!((ours - 0.375 * (n - 1) as f64).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn segment_counts() {
        let ts = TimeSeries::new((0..8).map(f64::from).collect(), 1.0, 0.0).unwrap();
        let segs = segments(&ts, 4, 2).unwrap();
        assert_eq!(segs.iter().map(|s| s.offset).collect::<Vec<_>>(), vec![0, 2, 4]);
        assert_eq!(segments(&ts, 4, 0).unwrap().len(), 2);
        let ts7 = TimeSeries::new((0..7).map(f64::from).collect(), 1.0, 0.0).unwrap();
        assert_eq!(segments(&ts7, 4, 2).unwrap().len(), 2);
        assert_eq!(
            segments(&ts7, 9, 0).unwrap_err(),
            SignalError::EmptySegmentation { seg_len: 9, n: 7 }
        );
        assert!(segments(&ts7, 4, 4).is_err());
    }

    #[test]
    fn rejects_bad_series() {
        assert!(TimeSeries::new(vec![1.0], 1.0, 0.0).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::NAN], 1.0, 0.0).is_err());
        assert!(TimeSeries::new(vec![1.0, 2.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&xs), xs.iter().sum::<f64>());
    }
}
