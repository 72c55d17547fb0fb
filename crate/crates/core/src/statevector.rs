//! Exact statevector simulation of phase-and-mix ansätze over a two-register
//! index space `j = j1·J2 + j2`.
//!
//! Mixers are continuous-time walks `e^{-itW}` on a graph over the index set:
//! the hypercube (one `X` rotation per qubit), the complete graph over all `J`
//! points, or a circulant graph (complete or cycle) along each register separately.
//! Global phases are kept as computed.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::param_space::QualityGrid;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("dimension mismatch: got {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("mixer expects {expected} evolution times, got {got}")]
    Arity { got: usize, expected: usize },
    #[error("quality grid has no marked states")]
    NoMarkedStates,
    #[error("operation requires a binary quality grid")]
    NotBinary,
    #[error("invalid state: {0}")]
    Invalid(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed state dump {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, StateError>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    dims: (usize, usize),
}

impl StateVector {
    /// Wraps amplitudes, checking the length and that the norm is 1 within 1e-10.
    pub fn from_amplitudes(amps: Vec<Complex64>, dims: (usize, usize)) -> Result<Self> {
        if amps.len() != dims.0 * dims.1 {
            return Err(StateError::Dimension {
                got: amps.len(),
                expected: dims.0 * dims.1,
            });
        }
        let s = Self { amps, dims };
        let n = s.norm_sqr();
        if !((n - 1.0).abs() <= 1e-10) {
            return Err(StateError::Invalid(format!("squared norm {n}")));
        }
        Ok(s)
    }

    /// Computational basis state `|j⟩`.
    pub fn basis(dims: (usize, usize), j: usize) -> Result<Self> {
        let len = dims.0 * dims.1;
        if j >= len {
            return Err(StateError::Dimension { got: j, expected: len });
        }
        let mut amps = vec![ZERO; len];
        amps[j] = Complex64::new(1.0, 0.0);
        Ok(Self { amps, dims })
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        let p: Vec<f64> = self.amps.iter().map(|a| a.norm_sqr()).collect();
        crate::signal::pairwise_sum(&p)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Measurement probabilities `|amps[j]|²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Writes `{stem}.json` (dims, length) and `{stem}.bin` holding interleaved
    /// little-endian `f64` real/imaginary parts.
    pub fn write_dump(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| StateError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let header = DumpHeader {
            dims: self.dims,
            n: self.amps.len(),
            dtype: "c16le".into(),
        };
        let json = dir.join(format!("{stem}.json"));
        let bin = dir.join(format!("{stem}.bin"));
        fs::write(&json, serde_json::to_string_pretty(&header).expect("header serializes"))
            .map_err(io(&json))?;
        let flat: Vec<f64> = self.amps.iter().flat_map(|a| [a.re, a.im]).collect();
        fs::write(&bin, crate::strain::encode_f8le(&flat)).map_err(io(&bin))?;
        Ok(json)
    }

    pub fn read_dump(json: &Path) -> Result<Self> {
        let format = |path: &Path, reason: String| StateError::Format {
            path: path.to_path_buf(),
            reason,
        };
        let text = fs::read_to_string(json).map_err(|source| StateError::Io {
            path: json.to_path_buf(),
            source,
        })?;
        let header: DumpHeader = serde_json::from_str(&text).map_err(|e| format(json, e.to_string()))?;
        let bin = json.with_extension("bin");
        let bytes = fs::read(&bin).map_err(|source| StateError::Io {
            path: bin.clone(),
            source,
        })?;
        let flat = crate::strain::decode_f8le(&bytes)
            .filter(|f| f.len() == 2 * header.n)
            .ok_or_else(|| format(&bin, format!("expected {} complex values", header.n)))?;
        let amps = flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        if header.n != header.dims.0 * header.dims.1 {
            return Err(format(json, format!("n = {} vs dims {:?}", header.n, header.dims)));
        }
        Ok(Self {
            amps,
            dims: header.dims,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DumpHeader {
    dims: (usize, usize),
    n: usize,
    dtype: String,
}

/// Equal superposition `J^{-1/2} Σ|j⟩`.
pub fn uniform_state(dims: (usize, usize)) -> Result<StateVector> {
    let len = dims.0 * dims.1;
    if len < 2 {
        return Err(StateError::Invalid(format!("dims {dims:?}: need J ≥ 2")));
    }
    let a = Complex64::new(1.0 / (len as f64).sqrt(), 0.0);
    Ok(StateVector {
        amps: vec![a; len],
        dims,
    })
}

fn check_len(s: &StateVector, q: &QualityGrid) -> Result<()> {
    if q.values.len() != s.len() {
        return Err(StateError::Dimension {
            got: q.values.len(),
            expected: s.len(),
        });
    }
    Ok(())
}

/// `e^{-iθ}`, exact at θ = 0 and θ = π.
fn unit_phase(theta: f64) -> Option<Complex64> {
    if theta == 0.0 {
        None
    } else if theta == PI {
        Some(Complex64::new(-1.0, 0.0))
    } else {
        Some(Complex64::from_polar(1.0, -theta))
    }
}

/// Diagonal phase `amps[j] ← e^{-iγ f(j)} amps[j]`.
pub fn apply_phase(s: &StateVector, gamma: f64, q: &QualityGrid) -> Result<StateVector> {
    let mut out = s.clone();
    apply_phase_in_place(&mut out, gamma, q)?;
    Ok(out)
}

pub fn apply_phase_in_place(s: &mut StateVector, gamma: f64, q: &QualityGrid) -> Result<()> {
    check_len(s, q)?;
    if gamma == 0.0 {
        return Ok(());
    }
    for (a, &f) in s.amps.iter_mut().zip(&q.values) {
        if let Some(z) = unit_phase(gamma * f) {
            *a *= z;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MixerFamily {
    /// `Σ_k X^{(k)}`: adjacency of the hypercube over the qubits of `j`.
    HypercubeGlobal,
    /// Complete graph over all `J` points.
    CompleteGlobal,
    /// Complete graph along each register.
    CompletePerDim,
    /// Cycle graph along each register.
    CyclePerDim,
}

impl MixerFamily {
    pub fn is_per_dim(self) -> bool {
        matches!(self, MixerFamily::CompletePerDim | MixerFamily::CyclePerDim)
    }
}

impl FromStr for MixerFamily {
    type Err = StateError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "HYPERCUBE_GLOBAL" | "HYPERCUBE" => Ok(Self::HypercubeGlobal),
            "COMPLETE_GLOBAL" | "COMPLETE" => Ok(Self::CompleteGlobal),
            "COMPLETE_PER_DIM" => Ok(Self::CompletePerDim),
            "CYCLE_PER_DIM" | "CYCLE" => Ok(Self::CyclePerDim),
            _ => Err(StateError::Invalid(format!("unknown mixer {s:?}"))),
        }
    }
}

/// Mixer family plus, for per-register families, which registers are mixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixerSpec {
    pub family: MixerFamily,
    pub active: [bool; 2],
}

impl MixerSpec {
    pub fn new(family: MixerFamily) -> Self {
        Self {
            family,
            active: [true, true],
        }
    }

    /// Number of evolution times the mixer takes.
    pub fn arity(&self) -> usize {
        if self.family.is_per_dim() {
            2
        } else {
            1
        }
    }
}

/// Eigenvalues of a circulant adjacency on `n` vertices, indexed by Fourier mode.
pub fn circulant_eigenvalues(family: MixerFamily, n: usize) -> Vec<f64> {
    match family {
        MixerFamily::CompletePerDim | MixerFamily::CompleteGlobal => (0..n)
            .map(|k| if k == 0 { n as f64 - 1.0 } else { -1.0 })
            .collect(),
        // For n = 2 this is the doubled edge of a two-vertex cycle.
        MixerFamily::CyclePerDim => (0..n)
            .map(|k| 2.0 * (2.0 * PI * k as f64 / n as f64).cos())
            .collect(),
        MixerFamily::HypercubeGlobal => panic!("hypercube is not circulant over one register"),
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// `e^{-itW}` for a circulant `W` applied to contiguous blocks of length `n`,
/// each block `stride` apart in the flattened array (`stride = 1` mixes the
/// last register, `stride = J2` the first).
fn circulant_evolve(amps: &mut [Complex64], n: usize, stride: usize, lambdas: &[f64], t: f64) {
    if t == 0.0 {
        return;
    }
    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    });
    let scale = 1.0 / n as f64;
    let phases: Vec<Complex64> = lambdas
        .iter()
        .map(|&l| Complex64::from_polar(scale, -t * l))
        .collect();
    let mut buf = vec![ZERO; n];
    let mut scratch = vec![ZERO; fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
    let block = n * stride;
    for base in (0..amps.len()).step_by(block) {
        for s in 0..stride {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = amps[base + s + k * stride];
            }
            fwd.process_with_scratch(&mut buf, &mut scratch);
            for (b, z) in buf.iter_mut().zip(&phases) {
                *b *= z;
            }
            inv.process_with_scratch(&mut buf, &mut scratch);
            for (k, b) in buf.iter().enumerate() {
                amps[base + s + k * stride] = *b;
            }
        }
    }
}

fn hypercube_evolve(amps: &mut [Complex64], t: f64) {
    let (sin, cos) = t.sin_cos();
    let mis = Complex64::new(0.0, -sin);
    let len = amps.len();
    let mut bit = 1;
    while bit < len {
        for i in 0..len {
            if i & bit == 0 {
                let (a, b) = (amps[i], amps[i | bit]);
                amps[i] = a * cos + b * mis;
                amps[i | bit] = a * mis + b * cos;
            }
        }
        bit <<= 1;
    }
}

fn complete_evolve(amps: &mut [Complex64], t: f64) {
    let len = amps.len() as f64;
    let re: Vec<f64> = amps.iter().map(|a| a.re).collect();
    let im: Vec<f64> = amps.iter().map(|a| a.im).collect();
    let mean = Complex64::new(
        crate::signal::pairwise_sum(&re) / len,
        crate::signal::pairwise_sum(&im) / len,
    );
    let shift = (Complex64::from_polar(1.0, -t * len) - 1.0) * mean;
    let global = Complex64::from_polar(1.0, t);
    for a in amps.iter_mut() {
        *a = global * (*a + shift);
    }
}

/// Applies `e^{-itW}` for the given mixer; `times` holds one entry for global
/// families and one per register for per-register families.
pub fn apply_mixer(s: &StateVector, spec: &MixerSpec, times: &[f64]) -> Result<StateVector> {
    let mut out = s.clone();
    apply_mixer_in_place(&mut out, spec, times)?;
    Ok(out)
}

pub fn apply_mixer_in_place(s: &mut StateVector, spec: &MixerSpec, times: &[f64]) -> Result<()> {
    if times.len() != spec.arity() {
        return Err(StateError::Arity {
            got: times.len(),
            expected: spec.arity(),
        });
    }
    let (j1, j2) = s.dims;
    match spec.family {
        MixerFamily::HypercubeGlobal => {
            if !s.len().is_power_of_two() {
                return Err(StateError::Invalid(format!("hypercube needs J = 2^q, got {}", s.len())));
            }
            if times[0] != 0.0 {
                hypercube_evolve(&mut s.amps, times[0]);
            }
        }
        MixerFamily::CompleteGlobal => {
            if times[0] != 0.0 {
                complete_evolve(&mut s.amps, times[0]);
            }
        }
        family => {
            if j1 < 2 || j2 < 2 {
                return Err(StateError::Invalid(format!("per-register mixer needs J1, J2 ≥ 2, got {:?}", s.dims)));
            }
            if spec.active[0] {
                circulant_evolve(&mut s.amps, j1, j2, &circulant_eigenvalues(family, j1), times[0]);
            }
            if spec.active[1] {
                circulant_evolve(&mut s.amps, j2, 1, &circulant_eigenvalues(family, j2), times[1]);
            }
        }
    }
    Ok(())
}

/// `Σ f(j)|amps[j]|²`.
pub fn expectation(s: &StateVector, q: &QualityGrid) -> Result<f64> {
    check_len(s, q)?;
    let terms: Vec<f64> = s
        .amps
        .iter()
        .zip(&q.values)
        .map(|(a, f)| f * a.norm_sqr())
        .collect();
    Ok(crate::signal::pairwise_sum(&terms))
}

/// Probability of measuring a point with `f(j) > rho0` (or `f(j) = 1` for binary grids).
pub fn success_probability(s: &StateVector, q: &QualityGrid, rho0: f64) -> Result<f64> {
    check_len(s, q)?;
    let marked = |f: f64| if q.binary { f == 1.0 } else { f > rho0 };
    let terms: Vec<f64> = s
        .amps
        .iter()
        .zip(&q.values)
        .map(|(a, &f)| if marked(f) { a.norm_sqr() } else { 0.0 })
        .collect();
    Ok(crate::signal::pairwise_sum(&terms).min(1.0))
}

/// `p` Grover iterations: the sign-flip oracle followed by the complete-graph
/// mixer at `t = π/J`, which is the inversion about the mean up to a global phase.
pub fn grover_iterate(s: &StateVector, q: &QualityGrid, p: usize) -> Result<StateVector> {
    check_len(s, q)?;
    if !q.binary {
        return Err(StateError::NotBinary);
    }
    if q.marked_count() == Some(0) {
        return Err(StateError::NoMarkedStates);
    }
    let mut out = s.clone();
    let spec = MixerSpec::new(MixerFamily::CompleteGlobal);
    let t = PI / s.len() as f64;
    for _ in 0..p {
        apply_phase_in_place(&mut out, PI, q)?;
        apply_mixer_in_place(&mut out, &spec, &[t])?;
    }
    Ok(out)
}

/// `sin²((2p+1)·asin√(J_S/J))`.
pub fn grover_success(j: usize, j_s: usize, p: usize) -> f64 {
    let theta = (j_s as f64 / j as f64).sqrt().asin();
    ((2 * p + 1) as f64 * theta).sin().powi(2)
}

/// Depth nearest to `π/(4·asin√(J_S/J)) − 1/2`, where success is at least `1 − J_S/J`.
pub fn full_grover_depth(j: usize, j_s: usize) -> usize {
    let theta = (j_s as f64 / j as f64).sqrt().asin();
    (PI / (4.0 * theta) - 0.5).round().max(0.0) as usize
}
