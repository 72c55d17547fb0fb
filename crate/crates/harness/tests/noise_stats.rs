//! Statistics of synthetic noise: the Welch estimate recovers the generating PSD,
//! and the noise-only SNR follows the two-degree-of-freedom chi distribution.

use gwq_core::matched_filter::snr_at;
use gwq_core::psd::{estimate_psd, AverageMethod};
use gwq_core::signal::forward_dft;
use gwq_core::waveform::{generate_template, MassParams};
use gwq_harness::synth::{synthesize_data, InjectionSpec, PsdModel};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn noise_spec(duration: f64, seed: u64) -> InjectionSpec {
    InjectionSpec {
        params: MassParams::new(1.46, 1.27).unwrap(),
        amplitude: 0.0,
        t_c: 4.0,
        psd_model: PsdModel::DEFAULT_POWERLAW,
        noise_scale: 1.0,
        duration,
        f_s: 2048.0,
        f_low: 20.0,
        seed,
    }
}

#[test]
fn welch_estimate_tracks_generator_psd() {
    // 1 s segments keep leakage off the steep low-frequency wall; 2047 of them keep
    // the per-bin scatter of the median estimate near 3%.
    let data = synthesize_data(&noise_spec(1024.0, 5)).unwrap();
    let est = estimate_psd(&data.series, 1.0, 0.5, AverageMethod::Median).unwrap();
    let model = PsdModel::DEFAULT_POWERLAW;
    let PsdModel::Powerlaw { s0, f0, a, b } = model else { unreachable!() };
    let truth = |f: f64| {
        let x = f.max(1.0) / f0;
        s0 * (x.powf(-a) + 1.0 + x.powf(b))
    };
    let nyquist = 1024.0;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (k, s) in est.values().iter().enumerate() {
        let f = est.frequency(k);
        if (20.0..=0.8 * nyquist).contains(&f) {
            worst = worst.max((s / truth(f) - 1.0).abs());
            checked += 1;
        }
    }
    assert!(checked > 700);
    assert!(worst < 0.15, "worst bin deviates by {worst}");
}

/// One-sample Kolmogorov–Smirnov statistic against a CDF.
fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn noise_only_snr_squared_is_chi_squared_two() {
    let seeds = 300;
    let spec = noise_spec(8.0, 0);
    let first = synthesize_data(&spec).unwrap();
    let n = spec.len();
    let t = generate_template(&MassParams::new(3.0, 2.0).unwrap(), n, spec.f_s, &first.psd, 20.0).unwrap();
    let mut rho2: Vec<f64> = (0..seeds)
        .map(|s| {
            let d = synthesize_data(&noise_spec(8.0, 1000 + s)).unwrap();
            let y = forward_dft(&d.series);
            snr_at(&t, &y, &d.psd, 4.0).unwrap().powi(2)
        })
        .collect();
    let chi2 = ChiSquared::new(2.0).unwrap();
    let d = ks_statistic(&mut rho2, |x| chi2.cdf(x));
    let critical = 1.358 / (seeds as f64).sqrt();
    assert!(d < critical, "KS D = {d} ≥ {critical}");
}

#[test]
fn noiseless_injection_recovers_amplitude() {
    let mut spec = noise_spec(16.0, 3);
    spec.amplitude = 7.5;
    spec.noise_scale = 0.0;
    spec.t_c = 11.0;
    let d = synthesize_data(&spec).unwrap();
    let t = generate_template(&spec.params, spec.len(), spec.f_s, &d.psd, spec.f_low).unwrap();
    let rho = snr_at(&t, &forward_dft(&d.series), &d.psd, spec.t_c).unwrap();
    assert!((rho - 7.5).abs() < 1e-6, "{rho}");
}
