//! Mass-coordinate charts, uniform grids over a chart box, and the SNR landscape
//! evaluated on such a grid.
//!
//! The chirp-time charts use the Newtonian chirp time
//! `θ1 = (5/128)(π T_sun M f_s)^{-5/3}/η` and its 1PN companion
//! `θ2 = (π/4)(π T_sun M f_s)^{-2/3}/η`, with `T_sun = G M_sun/c³`.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matched_filter::snr_at;
use crate::psd::Psd;
use crate::signal::FrequencySeries;
use crate::strain::{decode_f8le, encode_f8le};
use crate::waveform::{generate_template, MassParams, WaveformError, SOLAR_MASS_SECONDS};

/// Slack allowed above η = 1/4 before coordinates count as unphysical.
const ETA_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ParamSpaceError {
    #[error("coordinates {coords:?} lie outside the physical domain (η = {eta} > 1/4)")]
    UnphysicalCoordinates { coords: [f64; 2], eta: f64 },
    #[error("coordinates {coords:?} outside the chart domain: {reason}")]
    Domain { coords: [f64; 2], reason: String },
    #[error("cannot align grid: {0}")]
    Alignment(String),
    #[error("invalid grid request: {0}")]
    Invalid(String),
    #[error("quality grid has {got} values, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("quality grid is already binary")]
    AlreadyBinary,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed cache {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Filter(#[from] crate::matched_filter::FilterError),
}

pub type Result<T> = std::result::Result<T, ParamSpaceError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChartKind {
    M1M2,
    Theta1Eta,
    MEta,
    Theta1Theta2,
}

impl ChartKind {
    pub const ALL: [ChartKind; 4] = [
        ChartKind::M1M2,
        ChartKind::Theta1Eta,
        ChartKind::MEta,
        ChartKind::Theta1Theta2,
    ];

    fn name(self) -> &'static str {
        match self {
            ChartKind::M1M2 => "M1M2",
            ChartKind::Theta1Eta => "THETA1_ETA",
            ChartKind::MEta => "M_ETA",
            ChartKind::Theta1Theta2 => "THETA1_THETA2",
        }
    }

    /// Axis labels for plots and CSV headers.
    pub fn axis_names(self) -> [&'static str; 2] {
        match self {
            ChartKind::M1M2 => ["m1", "m2"],
            ChartKind::Theta1Eta => ["theta1", "eta"],
            ChartKind::MEta => ["M", "eta"],
            ChartKind::Theta1Theta2 => ["theta1", "theta2"],
        }
    }
}

impl fmt::Display for ChartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChartKind {
    type Err = ParamSpaceError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        ChartKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| ParamSpaceError::Invalid(format!("unknown chart {s:?}")))
    }
}

/// A coordinate chart on the two-mass parameter space. The sample rate enters the
/// dimensionless chirp times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordChart {
    pub kind: ChartKind,
    pub f_s: f64,
}

impl CoordChart {
    pub fn new(kind: ChartKind, f_s: f64) -> Result<Self> {
        if !(f_s > 0.0 && f_s.is_finite()) {
            return Err(ParamSpaceError::Invalid(format!("sample rate {f_s}")));
        }
        Ok(Self { kind, f_s })
    }
}

pub fn theta1(params: &MassParams, f_s: f64) -> f64 {
    let x = PI * SOLAR_MASS_SECONDS * params.total() * f_s;
    5.0 / 128.0 * x.powf(-5.0 / 3.0) / params.eta()
}

pub fn theta2(params: &MassParams, f_s: f64) -> f64 {
    let x = PI * SOLAR_MASS_SECONDS * params.total() * f_s;
    PI / 4.0 * x.powf(-2.0 / 3.0) / params.eta()
}

pub fn to_chart(params: &MassParams, chart: &CoordChart) -> [f64; 2] {
    match chart.kind {
        ChartKind::M1M2 => [params.m1, params.m2],
        ChartKind::Theta1Eta => [theta1(params, chart.f_s), params.eta()],
        ChartKind::MEta => [params.total(), params.eta()],
        ChartKind::Theta1Theta2 => [theta1(params, chart.f_s), theta2(params, chart.f_s)],
    }
}

fn masses_from_total_eta(coords: [f64; 2], total: f64, eta: f64) -> Result<MassParams> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(ParamSpaceError::Domain {
            coords,
            reason: format!("η = {eta} must be positive"),
        });
    }
    if eta > 0.25 + ETA_SLACK {
        return Err(ParamSpaceError::UnphysicalCoordinates { coords, eta });
    }
    let root = (1.0 - 4.0 * eta.min(0.25)).sqrt();
    let m1 = 0.5 * total * (1.0 + root);
    let m2 = 0.5 * total * (1.0 - root);
    MassParams::new(m1, m2).map_err(|_| ParamSpaceError::Domain {
        coords,
        reason: format!("masses ({m1}, {m2}) are not positive"),
    })
}

/// Inverse of [`to_chart`]; masses come back ordered `m1 ≥ m2` for the η charts.
pub fn from_chart(coords: [f64; 2], chart: &CoordChart) -> Result<MassParams> {
    let domain = |reason: &str| ParamSpaceError::Domain {
        coords,
        reason: reason.to_string(),
    };
    match chart.kind {
        ChartKind::M1M2 => {
            MassParams::new(coords[0], coords[1]).map_err(|_| domain("masses must be positive"))
        }
        ChartKind::Theta1Eta => {
            let [t1, eta] = coords;
            if !(t1 > 0.0) {
                return Err(domain("θ1 must be positive"));
            }
            if !(eta > 0.0) {
                return Err(domain("η must be positive"));
            }
            if eta > 0.25 + ETA_SLACK {
                return Err(ParamSpaceError::UnphysicalCoordinates { coords, eta });
            }
            let x = (5.0 / (128.0 * t1 * eta)).powf(0.6);
            masses_from_total_eta(coords, x / (PI * SOLAR_MASS_SECONDS * chart.f_s), eta)
        }
        ChartKind::MEta => {
            if !(coords[0] > 0.0) {
                return Err(domain("M must be positive"));
            }
            masses_from_total_eta(coords, coords[0], coords[1])
        }
        ChartKind::Theta1Theta2 => {
            let [t1, t2] = coords;
            if !(t1 > 0.0 && t2 > 0.0) {
                return Err(domain("θ1 and θ2 must be positive"));
            }
            let x = 5.0 * t2 / (32.0 * PI * t1);
            let eta = PI / 4.0 * x.powf(-2.0 / 3.0) / t2;
            masses_from_total_eta(coords, x / (PI * SOLAR_MASS_SECONDS * chart.f_s), eta)
        }
    }
}

/// Uniform `J1 × J2` grid over a chart box, flattened as `j = j1·J2 + j2`.
///
/// Points are generated from an anchor index so that an aligned grid reproduces
/// the alignment target bit-for-bit: `point_d(j) = anchor_d + (j − a_d)·step_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub chart: CoordChart,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub dims: (usize, usize),
    pub aligned_to: Option<MassParams>,
    anchor_index: [usize; 2],
    anchor: [f64; 2],
}

impl Grid {
    pub fn new(chart: CoordChart, lo: [f64; 2], hi: [f64; 2], dims: (usize, usize)) -> Result<Self> {
        if dims.0 < 2 || dims.1 < 2 {
            return Err(ParamSpaceError::Invalid(format!("dims {dims:?}: need ≥ 2 per axis")));
        }
        for d in 0..2 {
            if !(lo[d] < hi[d]) || !lo[d].is_finite() || !hi[d].is_finite() {
                return Err(ParamSpaceError::Invalid(format!("box lo={lo:?} hi={hi:?}")));
            }
        }
        Ok(Self {
            chart,
            lo,
            hi,
            dims,
            aligned_to: None,
            anchor_index: [0, 0],
            anchor: lo,
        })
    }

    pub fn len(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self) -> [f64; 2] {
        [
            (self.hi[0] - self.lo[0]) / (self.dims.0 - 1) as f64,
            (self.hi[1] - self.lo[1]) / (self.dims.1 - 1) as f64,
        ]
    }

    fn axis(&self, d: usize, j: usize) -> f64 {
        let offset = j as f64 - self.anchor_index[d] as f64;
        self.anchor[d] + offset * self.step()[d]
    }

    pub fn point(&self, j1: usize, j2: usize) -> [f64; 2] {
        [self.axis(0, j1), self.axis(1, j2)]
    }

    /// Point at flat index `j = j1·J2 + j2`.
    pub fn point_flat(&self, j: usize) -> [f64; 2] {
        self.point(j / self.dims.1, j % self.dims.1)
    }

    pub fn flat_index(&self, j1: usize, j2: usize) -> usize {
        j1 * self.dims.1 + j2
    }

    /// Index of the grid point closest to `coords` in step units.
    pub fn nearest(&self, coords: [f64; 2]) -> (usize, usize) {
        let step = self.step();
        let idx = |d: usize, n: usize| {
            let r = ((coords[d] - self.anchor[d]) / step[d]).round() + self.anchor_index[d] as f64;
            r.clamp(0.0, (n - 1) as f64) as usize
        };
        (idx(0, self.dims.0), idx(1, self.dims.1))
    }

    /// Index at which the alignment target sits, if aligned.
    pub fn anchor_index(&self) -> Option<(usize, usize)> {
        self.aligned_to.map(|_| (self.anchor_index[0], self.anchor_index[1]))
    }
}

/// Mass pairs bounding each chart coordinate over the region `m_min ≤ m2 ≤ m1 ≤ m_max`.
///
/// θ1 and η are monotone along every edge of that triangle, so its corners suffice;
/// θ2 additionally has an interior extremum on the `m2 = m_min` edge at `m1 = 3 m_min`.
pub fn region_extremal_points(m_min: f64, m_max: f64) -> Vec<MassParams> {
    let mut pts = vec![(m_min, m_min), (m_max, m_min), (m_max, m_max)];
    if 3.0 * m_min <= m_max {
        pts.push((3.0 * m_min, m_min));
    }
    pts.into_iter()
        .map(|(a, b)| MassParams { m1: a, m2: b })
        .collect()
}

fn physical_box(chart: &CoordChart, lo: [f64; 2], hi: [f64; 2]) -> bool {
    let positive = lo[0] > 0.0 && lo[1] > 0.0;
    match chart.kind {
        ChartKind::Theta1Eta | ChartKind::MEta => positive && hi[1] <= 0.25 + ETA_SLACK,
        _ => positive,
    }
}

/// Box over the mass region in the given chart with `2^{q1} × 2^{q2}` points,
/// optionally translated so that one grid point equals `to_chart(align)` exactly.
pub fn build_grid(
    region: (f64, f64),
    q1: u32,
    q2: u32,
    chart: CoordChart,
    align: Option<MassParams>,
) -> Result<Grid> {
    let (m_min, m_max) = region;
    if !(m_min > 0.0 && m_min < m_max && m_max.is_finite()) {
        return Err(ParamSpaceError::Invalid(format!("mass region ({m_min}, {m_max})")));
    }
    if q1 < 1 || q2 < 1 || q1 + q2 > 30 {
        return Err(ParamSpaceError::Invalid(format!("qubit counts ({q1}, {q2})")));
    }
    let dims = (1usize << q1, 1usize << q2);
    let (lo, hi) = match chart.kind {
        ChartKind::M1M2 => ([m_min, m_min], [m_max, m_max]),
        _ => {
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            for p in region_extremal_points(m_min, m_max) {
                let c = to_chart(&p, &chart);
                for d in 0..2 {
                    lo[d] = lo[d].min(c[d]);
                    hi[d] = hi[d].max(c[d]);
                }
            }
            (lo, hi)
        }
    };
    let mut grid = Grid::new(chart, lo, hi, dims)?;
    if let Some(target) = align {
        align_grid(&mut grid, target)?;
    }
    Ok(grid)
}

fn align_grid(grid: &mut Grid, target: MassParams) -> Result<()> {
    let c = to_chart(&target, &grid.chart);
    let step = grid.step();
    let n = [grid.dims.0, grid.dims.1];
    let mut index = [0usize; 2];
    let mut shift = [0.0f64; 2];
    for d in 0..2 {
        if !(c[d] >= grid.lo[d] && c[d] <= grid.hi[d]) {
            return Err(ParamSpaceError::Alignment(format!(
                "target coordinate {} = {} outside [{}, {}]",
                grid.chart.kind.axis_names()[d],
                c[d],
                grid.lo[d],
                grid.hi[d]
            )));
        }
        let r = (c[d] - grid.lo[d]) / step[d];
        let below = (r.floor() as usize).min(n[d] - 1);
        let above = (r.ceil() as usize).min(n[d] - 1);
        let mut candidates = vec![below, above];
        candidates.sort_by(|&a, &b| {
            let sa = (c[d] - (grid.lo[d] + a as f64 * step[d])).abs();
            let sb = (c[d] - (grid.lo[d] + b as f64 * step[d])).abs();
            sa.total_cmp(&sb)
        });
        let chosen = candidates.into_iter().find(|&j| {
            let s = c[d] - (grid.lo[d] + j as f64 * step[d]);
            let (mut lo, mut hi) = (grid.lo, grid.hi);
            lo[d] += s;
            hi[d] += s;
            physical_box(&grid.chart, lo, hi)
        });
        let j = chosen.ok_or_else(|| {
            ParamSpaceError::Alignment(format!(
                "no shift along {} keeps the box physical",
                grid.chart.kind.axis_names()[d]
            ))
        })?;
        index[d] = j;
        shift[d] = c[d] - (grid.lo[d] + j as f64 * step[d]);
    }
    for d in 0..2 {
        grid.lo[d] += shift[d];
        grid.hi[d] += shift[d];
    }
    grid.anchor_index = index;
    grid.anchor = c;
    grid.aligned_to = Some(target);
    Ok(())
}

/// Diagonal objective over a grid: raw SNR values, or their 0/1 thresholding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityGrid {
    #[serde(skip)]
    pub values: Vec<f64>,
    pub dims: (usize, usize),
    pub grid: Option<Grid>,
    pub t_c: f64,
    /// Threshold the values were binarized at, if any.
    pub threshold: Option<f64>,
    pub binary: bool,
    /// Grid points scored 0 because no template exists there.
    pub skipped: usize,
}

impl QualityGrid {
    /// Wraps raw values (finite, nonnegative) with no grid attached.
    pub fn from_values(values: Vec<f64>, dims: (usize, usize)) -> Result<Self> {
        if values.len() != dims.0 * dims.1 {
            return Err(ParamSpaceError::Dimension {
                got: values.len(),
                expected: dims.0 * dims.1,
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(ParamSpaceError::Invalid(format!("quality value {v}")));
        }
        Ok(Self {
            values,
            dims,
            grid: None,
            t_c: 0.0,
            threshold: None,
            binary: false,
            skipped: 0,
        })
    }

    /// A 0/1 grid with the listed indices marked.
    pub fn marked(dims: (usize, usize), marked: &[usize]) -> Result<Self> {
        let mut values = vec![0.0; dims.0 * dims.1];
        for &j in marked {
            if j >= values.len() {
                return Err(ParamSpaceError::Dimension {
                    got: j + 1,
                    expected: values.len(),
                });
            }
            values[j] = 1.0;
        }
        let mut q = Self::from_values(values, dims)?;
        q.binary = true;
        q.threshold = Some(0.5);
        Ok(q)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of marked points (values equal to 1) for binary grids.
    pub fn marked_count(&self) -> Option<usize> {
        self.binary
            .then(|| self.values.iter().filter(|&&v| v == 1.0).count())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        crate::signal::pairwise_sum(&self.values) / self.values.len() as f64
    }

    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (j, &v)| if v > b.1 { (j, v) } else { b })
            .0
    }
}

/// SNR of the template at every grid point against `y` at coalescence time `t_c`.
///
/// Points whose coordinates are unphysical or whose template band is empty score 0
/// and are counted in `skipped`. Each value is computed independently, so the
/// output does not depend on how the work is split across threads.
pub fn evaluate_quality(
    grid: &Grid,
    y: &FrequencySeries,
    psd: &Psd,
    t_c: f64,
    f_low: f64,
) -> Result<QualityGrid> {
    let n = y.len();
    let f_s = y.origin_sample_rate();
    let skipped = AtomicUsize::new(0);
    let values: Result<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let params = match from_chart(grid.point_flat(j), &grid.chart) {
                Ok(p) => p,
                Err(ParamSpaceError::UnphysicalCoordinates { .. }) => {
                    skipped.fetch_add(1, Ordering::Relaxed);
                    return Ok(0.0);
                }
                Err(e) => return Err(e),
            };
            match generate_template(&params, n, f_s, psd, f_low) {
                Ok(t) => Ok(snr_at(&t, y, psd, t_c)?),
                Err(WaveformError::BandEmpty { .. }) => {
                    skipped.fetch_add(1, Ordering::Relaxed);
                    Ok(0.0)
                }
                Err(e) => Err(e.into()),
            }
        })
        .collect();
    let skipped = skipped.into_inner();
    if skipped > 0 {
        log::warn!("{skipped} of {} grid points have no template and score 0", grid.len());
    }
    Ok(QualityGrid {
        values: values?,
        dims: grid.dims,
        grid: Some(grid.clone()),
        t_c,
        threshold: None,
        binary: false,
        skipped,
    })
}

/// `1` where the value exceeds `rho0`, `0` elsewhere.
pub fn binarize(qg: &QualityGrid, rho0: f64) -> Result<QualityGrid> {
    if qg.binary {
        return Err(ParamSpaceError::AlreadyBinary);
    }
    let mut out = qg.clone();
    out.values = qg.values.iter().map(|&v| if v > rho0 { 1.0 } else { 0.0 }).collect();
    out.threshold = Some(rho0);
    out.binary = true;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    #[serde(flatten)]
    pub meta: QualityGrid,
    /// Digest of the inputs the values were computed from.
    pub digest: String,
    pub n: usize,
    pub dtype: String,
}

/// Writes `{stem}.json` (metadata and input digest) and `{stem}.bin` (values as
/// little-endian `f64`); returns the header path.
pub fn write_quality_cache(dir: &Path, stem: &str, qg: &QualityGrid, digest: &str) -> Result<PathBuf> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ParamSpaceError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let header = CacheHeader {
        meta: qg.clone(),
        digest: digest.to_string(),
        n: qg.values.len(),
        dtype: "f8le".into(),
    };
    let json = dir.join(format!("{stem}.json"));
    let bin = dir.join(format!("{stem}.bin"));
    fs::write(&json, serde_json::to_string_pretty(&header).expect("header serializes"))
        .map_err(io(&json))?;
    fs::write(&bin, encode_f8le(&qg.values)).map_err(io(&bin))?;
    Ok(json)
}

/// Reads a cache written by [`write_quality_cache`], returning the grid and the
/// stored digest.
pub fn read_quality_cache(json_path: &Path) -> Result<(QualityGrid, String)> {
    let format = |path: &Path, reason: String| ParamSpaceError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(json_path).map_err(|source| ParamSpaceError::Io {
        path: json_path.to_path_buf(),
        source,
    })?;
    let header: CacheHeader =
        serde_json::from_str(&text).map_err(|e| format(json_path, e.to_string()))?;
    if header.dtype != "f8le" {
        return Err(format(json_path, format!("unsupported dtype {:?}", header.dtype)));
    }
    let bin = json_path.with_extension("bin");
    let bytes = fs::read(&bin).map_err(|source| ParamSpaceError::Io {
        path: bin.clone(),
        source,
    })?;
    let values = decode_f8le(&bytes).ok_or_else(|| format(&bin, "length not a multiple of 8".into()))?;
    if values.len() != header.n || values.len() != header.meta.dims.0 * header.meta.dims.1 {
        return Err(format(
            &bin,
            format!("{} values for dims {:?}", values.len(), header.meta.dims),
        ));
    }
    let mut qg = header.meta;
    qg.values = values;
    Ok((qg, header.digest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chart(kind: ChartKind) -> CoordChart {
        CoordChart::new(kind, 4096.0).unwrap()
    }

    #[test]
    fn equal_mass_chirp_time() {
        let p = MassParams::new(1.3758, 1.3758).unwrap();
        let [t1, eta] = to_chart(&p, &chart(ChartKind::Theta1Eta));
        assert!((t1 - 2.87).abs() < 0.01, "θ1 = {t1}");
        assert_eq!(eta, 0.25);
    }

    #[test]
    fn m1m2_is_identity() {
        let p = MassParams::new(3.1, 1.7).unwrap();
        assert_eq!(to_chart(&p, &chart(ChartKind::M1M2)), [3.1, 1.7]);
        assert_eq!(from_chart([3.1, 1.7], &chart(ChartKind::M1M2)).unwrap(), p);
    }

    #[test]
    fn equal_mass_inverts_symmetric() {
        for kind in [ChartKind::Theta1Eta, ChartKind::MEta] {
            let p = from_chart([2.87, 0.25], &chart(kind)).unwrap();
            assert_eq!(p.m1, p.m2);
        }
        let p = from_chart([2.87, 0.25], &chart(ChartKind::Theta1Eta)).unwrap();
        assert!((p.m1 - 1.3758).abs() < 0.01 * 1.3758);
    }

    #[test]
    fn theta1_theta2_inversion() {
        let p = MassParams::new(4.2, 1.1).unwrap();
        let c = to_chart(&p, &chart(ChartKind::Theta1Theta2));
        let q = from_chart(c, &chart(ChartKind::Theta1Theta2)).unwrap();
        assert!((q.m1 - 4.2).abs() < 1e-10 * 4.2);
        assert!((q.m2 - 1.1).abs() < 1e-10 * 1.1);
    }

    #[test]
    fn domain_errors() {
        let c = chart(ChartKind::Theta1Eta);
        assert!(matches!(
            from_chart([1.0, 0.3], &c),
            Err(ParamSpaceError::UnphysicalCoordinates { .. })
        ));
        assert!(matches!(from_chart([-1.0, 0.2], &c), Err(ParamSpaceError::Domain { .. })));
        assert!(matches!(from_chart([0.0, 0.2], &c), Err(ParamSpaceError::Domain { .. })));
        assert!(matches!(
            from_chart([3.0, 0.26], &chart(ChartKind::MEta)),
            Err(ParamSpaceError::UnphysicalCoordinates { .. })
        ));
    }

    #[test]
    fn chart_names_parse() {
        for k in ChartKind::ALL {
            assert_eq!(k.to_string().parse::<ChartKind>().unwrap(), k);
        }
        assert_eq!("theta1-eta".parse::<ChartKind>().unwrap(), ChartKind::Theta1Eta);
        assert!("foo".parse::<ChartKind>().is_err());
    }

    /// Brute-force extremes over a dense sampling of the mass triangle.
    fn sampled_extremes(kind: ChartKind, a: f64, b: f64) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let n = 400;
        for i in 0..=n {
            for k in 0..=i {
                let m1 = a + (b - a) * i as f64 / n as f64;
                let m2 = a + (b - a) * k as f64 / n as f64;
                let c = to_chart(&MassParams { m1, m2 }, &chart(kind));
                for d in 0..2 {
                    lo[d] = lo[d].min(c[d]);
                    hi[d] = hi[d].max(c[d]);
                }
            }
        }
        (lo, hi)
    }

    #[test]
    fn region_box_matches_dense_sampling() {
        for kind in [ChartKind::Theta1Eta, ChartKind::MEta, ChartKind::Theta1Theta2] {
            let g = build_grid((1.0, 5.0), 3, 3, chart(kind), None).unwrap();
            let (lo, hi) = sampled_extremes(kind, 1.0, 5.0);
            for d in 0..2 {
                assert!((g.lo[d] - lo[d]).abs() <= 1e-12 * lo[d].abs(), "{kind} lo[{d}]");
                assert!((g.hi[d] - hi[d]).abs() <= 1e-12 * hi[d].abs(), "{kind} hi[{d}]");
            }
        }
    }

    #[test]
    fn eta_range_of_unit_to_five_region() {
        let g = build_grid((1.0, 5.0), 4, 4, chart(ChartKind::Theta1Eta), None).unwrap();
        assert!((g.lo[1] - 5.0 / 36.0).abs() < 1e-15);
        assert_eq!(g.hi[1], 0.25);
    }

    #[test]
    fn grid_shape_and_endpoints() {
        let g = build_grid((1.0, 5.0), 8, 8, chart(ChartKind::Theta1Eta), None).unwrap();
        assert_eq!(g.dims, (256, 256));
        assert_eq!(g.len(), 1 << 16);
        assert_eq!(g.point(0, 0), g.lo);
        let top = g.point(255, 255);
        for d in 0..2 {
            assert!((top[d] - g.hi[d]).abs() <= 1e-14 * g.hi[d]);
        }
        assert_eq!(g.point_flat(g.flat_index(17, 200)), g.point(17, 200));
    }

    #[test]
    fn aligned_grid_hits_target_exactly() {
        let target = MassParams::new(1.46, 1.27).unwrap();
        for kind in ChartKind::ALL {
            let c = chart(kind);
            let g = build_grid((1.0, 5.0), 6, 5, c, Some(target)).unwrap();
            let want = to_chart(&target, &c);
            let (j1, j2) = g.nearest(want);
            assert_eq!(g.point(j1, j2), want, "{kind}");
            assert_eq!(g.anchor_index(), Some((j1, j2)));
            // Translation only: the step is unchanged.
            let plain = build_grid((1.0, 5.0), 6, 5, c, None).unwrap();
            let (s, t) = (g.step(), plain.step());
            for d in 0..2 {
                assert!((s[d] - t[d]).abs() <= 1e-12 * t[d]);
                assert!((g.lo[d] - plain.lo[d]).abs() <= s[d] / 2.0 + 1e-15);
            }
        }
    }

    #[test]
    fn alignment_keeps_eta_physical() {
        // Equal masses sit on the η = 1/4 edge, so the box can only move down.
        let target = MassParams::new(1.3758, 1.3758).unwrap();
        let g = build_grid((1.0, 5.0), 8, 8, chart(ChartKind::Theta1Eta), Some(target)).unwrap();
        assert!(g.hi[1] <= 0.25 + ETA_SLACK);
        let want = to_chart(&target, &g.chart);
        let (j1, j2) = g.nearest(want);
        assert_eq!(g.point(j1, j2), want);
    }

    #[test]
    fn alignment_outside_box_fails() {
        let target = MassParams::new(9.0, 8.0).unwrap();
        assert!(matches!(
            build_grid((1.0, 5.0), 4, 4, chart(ChartKind::Theta1Eta), Some(target)),
            Err(ParamSpaceError::Alignment(_))
        ));
    }

    #[test]
    fn theta1_eta_favours_low_masses() {
        let g = build_grid((1.0, 5.0), 5, 5, chart(ChartKind::Theta1Eta), None).unwrap();
        let mid = 2.0 * 3.0;
        let (mut below, mut above) = (0, 0);
        for j in 0..g.len() {
            let m = from_chart(g.point_flat(j), &g.chart).unwrap().total();
            if m < mid {
                below += 1;
            } else {
                above += 1;
            }
        }
        assert!(below > above, "{below} vs {above}");
    }

    #[test]
    fn binarize_counts() {
        let q = QualityGrid::from_values(vec![0.0, 9.0, 8.0, 12.5, 3.0, 8.0001], (2, 3)).unwrap();
        let b = binarize(&q, 8.0).unwrap();
        let brute = q.values.iter().filter(|&&v| v > 8.0).count();
        assert_eq!(b.marked_count(), Some(brute));
        assert_eq!(b.values, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(binarize(&q, 100.0).unwrap().marked_count(), Some(0));
        assert_eq!(binarize(&q, -1.0).unwrap().marked_count(), Some(6));
        assert!(matches!(binarize(&b, 1.0), Err(ParamSpaceError::AlreadyBinary)));
    }

    #[test]
    fn quality_rejects_bad_values() {
        assert!(QualityGrid::from_values(vec![1.0; 5], (2, 3)).is_err());
        assert!(QualityGrid::from_values(vec![1.0, f64::NAN], (1, 2)).is_err());
        assert!(QualityGrid::from_values(vec![1.0, -1.0], (1, 2)).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_grid((1.0, 5.0), 2, 3, chart(ChartKind::MEta), None).unwrap();
        let mut q = QualityGrid::from_values((0..32).map(|i| i as f64 * 0.37).collect(), g.dims).unwrap();
        q.grid = Some(g);
        q.t_c = 12.5;
        let path = write_quality_cache(dir.path(), "q", &q, "abc123").unwrap();
        let (back, digest) = read_quality_cache(&path).unwrap();
        assert_eq!(back, q);
        assert_eq!(digest, "abc123");
    }

    fn toy_setup() -> (Grid, Psd, MassParams, f64) {
        let (n, fs) = (1usize << 13, 2048.0);
        let psd = Psd::from_fn(n, fs, |f| {
            let x = f.max(1.0) / 150.0;
            1e-46 * (x.powi(-4) + 1.0 + x * x)
        })
        .unwrap();
        let target = MassParams::new(1.46, 1.27).unwrap();
        let c = CoordChart::new(ChartKind::Theta1Eta, fs).unwrap();
        (build_grid((1.0, 5.0), 3, 3, c, Some(target)).unwrap(), psd, target, fs)
    }

    #[test]
    fn noiseless_injection_peaks_at_aligned_point() {
        let (g, psd, target, fs) = toy_setup();
        let n = 2 * (psd.len() - 1);
        let t_c = 1.5;
        let amp = 12.0;
        let mut y = generate_template(&target, n, fs, &psd, 20.0).unwrap().to_frequency_series(t_c);
        y.bins_mut().iter_mut().for_each(|b| *b *= amp);
        let q = evaluate_quality(&g, &y, &psd, t_c, 20.0).unwrap();
        let (a1, a2) = g.anchor_index().unwrap();
        assert_eq!(q.argmax(), g.flat_index(a1, a2));
        assert!((q.max() - amp).abs() < 1e-6);
        assert_eq!(q.skipped, 0);
    }

    #[test]
    fn values_match_single_point_filtering() {
        let (g, psd, target, fs) = toy_setup();
        let n = 2 * (psd.len() - 1);
        let mut y = generate_template(&target, n, fs, &psd, 20.0).unwrap().to_frequency_series(0.7);
        y.bins_mut().iter_mut().for_each(|b| *b *= 5.0);
        let q = evaluate_quality(&g, &y, &psd, 0.7, 20.0).unwrap();
        for j in [0, 5, 17, 22, 38, 41, 59, 63] {
            let p = from_chart(g.point_flat(j), &g.chart).unwrap();
            let t = generate_template(&p, n, fs, &psd, 20.0).unwrap();
            assert_eq!(q.values[j], snr_at(&t, &y, &psd, 0.7).unwrap(), "j={j}");
        }
        // Any thread count gives identical output.
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let again = single.install(|| evaluate_quality(&g, &y, &psd, 0.7, 20.0).unwrap());
        assert_eq!(again.values, q.values);
    }

    #[test]
    fn empty_band_points_score_zero() {
        // A high-mass box whose last-stable-orbit frequency falls below 20 Hz.
        let (_, psd, _, fs) = toy_setup();
        let c = CoordChart::new(ChartKind::MEta, fs).unwrap();
        let g = Grid::new(c, [250.0, 0.2], [400.0, 0.25], (2, 2)).unwrap();
        let y = FrequencySeries::zeros(2 * (psd.len() - 1), fs).unwrap();
        let q = evaluate_quality(&g, &y, &psd, 0.0, 20.0).unwrap();
        assert_eq!(q.skipped, 4);
        assert!(q.values.iter().all(|&v| v == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip_theta1_eta(m1 in 1.0f64..5.0, m2 in 1.0f64..5.0, fs in 512.0f64..16384.0) {
            let c = CoordChart::new(ChartKind::Theta1Eta, fs).unwrap();
            let p = MassParams::new(m1.max(m2), m1.min(m2)).unwrap();
            let x = to_chart(&p, &c);
            let back = to_chart(&from_chart(x, &c).unwrap(), &c);
            for d in 0..2 {
                prop_assert!((back[d] - x[d]).abs() <= 1e-10 * x[d].abs());
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_all_charts(m1 in 0.5f64..50.0, m2 in 0.5f64..50.0) {
            for kind in ChartKind::ALL {
                let c = chart(kind);
                let p = MassParams::new(m1.max(m2), m1.min(m2)).unwrap();
                let x = to_chart(&p, &c);
                let back = to_chart(&from_chart(x, &c).unwrap(), &c);
                for d in 0..2 {
                    prop_assert!((back[d] - x[d]).abs() <= 1e-10 * x[d].abs(), "{} {:?} {:?}", kind, x, back);
                }
            }
        }
    }
}
