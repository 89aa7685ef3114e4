//! Far-field array factor, pattern cuts and cut measurements.
//!
//! Directions are held as direction cosines `(u, v) = (sin t cos p, sin t sin p)`.
//! Pointing angles use the (elevation, azimuth) convention `u = sin(az)`,
//! `v = sin(el)`, so an azimuth cut holds `v` fixed and sweeps `u`.

use crate::error::{domain, measurement, Error, Result};
use crate::geometry::ArrayGeometry;
use crate::weights::WeightMatrix;
use alloc::format;
use alloc::vec::Vec;
use num_complex::Complex64;

/// Floor used for exact nulls when converting to dB.
pub const MIN_DB: f64 = -400.0;

/// Half-power level in dB.
pub const HALF_POWER_DB: f64 = -3.010_299_956_639_812;

pub const DEFAULT_HALF_SPAN_DEG: f64 = 8.7;
pub const DEFAULT_STEP_DEG: f64 = 0.01;
pub const MAX_CUT_SAMPLES: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub u: f64,
    pub v: f64,
}

impl Direction {
    pub const BORESIGHT: Direction = Direction { u: 0.0, v: 0.0 };

    pub fn from_theta_phi(theta: f64, phi: f64) -> Self {
        let s = libm::sin(theta);
        Self { u: s * libm::cos(phi), v: s * libm::sin(phi) }
    }

    pub fn from_el_az_deg(el_deg: f64, az_deg: f64) -> Self {
        Self { u: libm::sin(az_deg.to_radians()), v: libm::sin(el_deg.to_radians()) }
    }

    pub fn is_visible(&self) -> bool {
        self.u * self.u + self.v * self.v <= 1.0
    }

    pub fn cos_theta(&self) -> f64 {
        libm::sqrt((1.0 - self.u * self.u - self.v * self.v).max(0.0))
    }

    pub fn theta(&self) -> f64 {
        libm::asin(libm::sqrt(self.u * self.u + self.v * self.v).min(1.0))
    }

    pub fn phi(&self) -> f64 {
        libm::atan2(self.v, self.u)
    }

    pub fn el_deg(&self) -> f64 {
        libm::asin(self.v.clamp(-1.0, 1.0)).to_degrees()
    }

    pub fn az_deg(&self) -> f64 {
        libm::asin(self.u.clamp(-1.0, 1.0)).to_degrees()
    }
}

#[inline]
pub(crate) fn cis(x: f64) -> Complex64 {
    let (s, c) = libm::sincos(x);
    Complex64::new(c, s)
}

pub(crate) fn to_db(power: f64) -> f64 {
    if power > 0.0 {
        10.0 * libm::log10(power)
    } else {
        MIN_DB
    }
}

/// A weight matrix bound to a geometry, with excitations and element
/// coordinates precomputed for repeated far-field evaluation.
#[derive(Debug, Clone)]
pub struct ExcitedArray<'g> {
    geometry: &'g ArrayGeometry,
    rows: usize,
    cols: usize,
    excitation: Vec<Complex64>,
    /// k * x of each column.
    kx: Vec<f64>,
    /// k * y of each row.
    ky: Vec<f64>,
    /// k * offsets of the physical elements inside one subarray, per axis.
    sub_kx: Vec<f64>,
    sub_ky: Vec<f64>,
}

impl<'g> ExcitedArray<'g> {
    pub fn new(geometry: &'g ArrayGeometry, weights: &WeightMatrix) -> Result<Self> {
        if (weights.rows(), weights.cols()) != geometry.subarray_grid() {
            return Err(domain!(
                "weights are {}x{} but the geometry has a {}x{} grid",
                weights.rows(),
                weights.cols(),
                geometry.rows(),
                geometry.cols()
            ));
        }
        let k = geometry.wavenumber();
        let d = geometry.element_pitch();
        let (er, ec) = geometry.element_grid();
        let centered = |n: usize| (0..n).map(move |i| i as f64 - (n as f64 - 1.0) / 2.0);
        Ok(Self {
            geometry,
            rows: weights.rows(),
            cols: weights.cols(),
            excitation: weights.excitations(),
            kx: (0..geometry.cols()).map(|c| k * geometry.column_x(c)).collect(),
            ky: (0..geometry.rows()).map(|r| k * geometry.row_y(r)).collect(),
            sub_kx: centered(ec).map(|i| k * d * i).collect(),
            sub_ky: centered(er).map(|i| k * d * i).collect(),
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        self.geometry
    }

    /// Sum over the RF-chain grid only.
    pub fn outer_factor(&self, dir: Direction) -> Complex64 {
        let ex: Vec<Complex64> = self.kx.iter().map(|kx| cis(kx * dir.u)).collect();
        let mut total = Complex64::new(0.0, 0.0);
        for r in 0..self.rows {
            let row = &self.excitation[r * self.cols..(r + 1) * self.cols];
            let inner: Complex64 = row.iter().zip(&ex).map(|(w, e)| w * e).sum();
            total += cis(self.ky[r] * dir.v) * inner;
        }
        total
    }

    /// Uniform in-phase subarray factor; real because offsets are centered.
    pub fn subarray_factor(&self, dir: Direction) -> f64 {
        let sx: f64 = self.sub_kx.iter().map(|k| libm::cos(k * dir.u)).sum();
        let sy: f64 = self.sub_ky.iter().map(|k| libm::cos(k * dir.v)).sum();
        sx * sy
    }

    /// cos(theta)^q, zero outside the visible region.
    pub fn element_factor(&self, dir: Direction) -> f64 {
        if !dir.is_visible() {
            return 0.0;
        }
        let q = self.geometry.element_exponent();
        if q == 0.0 {
            1.0
        } else {
            libm::pow(dir.cos_theta(), q)
        }
    }

    /// Full far field: outer factor x subarray factor x element factor.
    pub fn field(&self, dir: Direction) -> Complex64 {
        self.outer_factor(dir) * (self.subarray_factor(dir) * self.element_factor(dir))
    }

    pub fn power(&self, dir: Direction) -> f64 {
        self.field(dir).norm_sqr()
    }

    /// Hill-climbs |F|^2 in (el, az) from `start` with a shrinking compass
    /// step. Finds the lobe containing `start`, not a global maximum.
    pub fn find_peak(&self, start: Direction) -> Direction {
        let (mut el, mut az) = (start.el_deg(), start.az_deg());
        let mut best = self.power(start);
        let mut step = 0.02;
        while step > 1e-5 {
            let mut moved = false;
            for (de, da) in [(0.0, step), (0.0, -step), (step, 0.0), (-step, 0.0)] {
                let p = self.power(Direction::from_el_az_deg(el + de, az + da));
                if p > best {
                    best = p;
                    el += de;
                    az += da;
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        Direction::from_el_az_deg(el, az)
    }

    /// Coarse scan of the `(el, az)` square `[-half_span, half_span]^2` for
    /// the strongest sample.
    pub fn scan_peak(&self, half_span_deg: f64, step_deg: f64) -> Direction {
        let n = libm::round(half_span_deg / step_deg) as i64;
        let mut best = (f64::NEG_INFINITY, Direction::BORESIGHT);
        for i in -n..=n {
            let el = i as f64 * step_deg;
            let cut = self.cut_fields(CutKind::Azimuth, el, 0.0, n as usize, step_deg);
            for (j, f) in cut.iter().enumerate() {
                let p = f.norm_sqr();
                if p > best.0 {
                    best = (p, Direction::from_el_az_deg(el, (j as f64 - n as f64) * step_deg));
                }
            }
        }
        best.1
    }

    /// Complex field along a cut: `2 * half_count + 1` samples centered on
    /// `center_deg` of the swept coordinate, the other held at `fixed_deg`.
    fn cut_fields(&self, kind: CutKind, fixed_deg: f64, center_deg: f64, half_count: usize, step_deg: f64) -> Vec<Complex64> {
        let n = 2 * half_count + 1;
        let fixed = libm::sin(fixed_deg.to_radians());
        // Collapse the held axis first so each sample is a 1-D sum.
        let mut collapsed = Vec::new();
        match kind {
            CutKind::Azimuth => {
                let ey: Vec<Complex64> = self.ky.iter().map(|k| cis(k * fixed)).collect();
                for c in 0..self.cols {
                    let mut s = Complex64::new(0.0, 0.0);
                    for (r, e) in ey.iter().enumerate() {
                        s += self.excitation[r * self.cols + c] * e;
                    }
                    collapsed.push(s);
                }
            }
            CutKind::Elevation => {
                let ex: Vec<Complex64> = self.kx.iter().map(|k| cis(k * fixed)).collect();
                for r in 0..self.rows {
                    let row = &self.excitation[r * self.cols..(r + 1) * self.cols];
                    collapsed.push(row.iter().zip(&ex).map(|(w, e)| w * e).sum());
                }
            }
        }
        let swept_k = match kind {
            CutKind::Azimuth => &self.kx,
            CutKind::Elevation => &self.ky,
        };
        (0..n)
            .map(|i| {
                let angle = center_deg + (i as f64 - half_count as f64) * step_deg;
                let s = libm::sin(angle.to_radians());
                let dir = match kind {
                    CutKind::Azimuth => Direction { u: s, v: fixed },
                    CutKind::Elevation => Direction { u: fixed, v: s },
                };
                let af: Complex64 = collapsed.iter().zip(swept_k).map(|(w, k)| w * cis(k * s)).sum();
                af * (self.subarray_factor(dir) * self.element_factor(dir))
            })
            .collect()
    }

    pub fn cut(&self, kind: CutKind, center: (f64, f64), half_span_deg: f64, step_deg: f64) -> Result<PatternCut> {
        if !(step_deg > 0.0 && step_deg.is_finite()) {
            return Err(domain!("cut step must be positive, got {step_deg}"));
        }
        if !(half_span_deg >= 10.0 * step_deg && half_span_deg.is_finite()) {
            return Err(domain!("half span {half_span_deg} must be at least ten steps ({step_deg})"));
        }
        let half_count = libm::round(half_span_deg / step_deg);
        if 2.0 * half_count + 1.0 > MAX_CUT_SAMPLES as f64 {
            return Err(Error::Resource(format!(
                "cut would need {} samples (limit {MAX_CUT_SAMPLES})",
                2.0 * half_count + 1.0
            )));
        }
        let half_count = half_count as usize;
        let (el, az) = center;
        let (fixed, swept) = match kind {
            CutKind::Azimuth => (el, az),
            CutKind::Elevation => (az, el),
        };
        let fields = self.cut_fields(kind, fixed, swept, half_count, step_deg);
        let samples = fields
            .iter()
            .enumerate()
            .map(|(i, f)| (swept + (i as f64 - half_count as f64) * step_deg, to_db(f.norm_sqr())))
            .collect();
        Ok(PatternCut::from_uniform(kind, fixed, step_deg, samples))
    }
}

/// Complex far field of `weights` in direction `(theta, phi)` (radians).
pub fn array_factor(geometry: &ArrayGeometry, weights: &WeightMatrix, theta: f64, phi: f64) -> Result<Complex64> {
    Ok(ExcitedArray::new(geometry, weights)?.field(Direction::from_theta_phi(theta, phi)))
}

/// Normalized power cut through `center = (el, az)` degrees.
pub fn compute_cut(
    geometry: &ArrayGeometry,
    weights: &WeightMatrix,
    kind: CutKind,
    center: (f64, f64),
    half_span_deg: f64,
    step_deg: f64,
) -> Result<PatternCut> {
    ExcitedArray::new(geometry, weights)?.cut(kind, center, half_span_deg, step_deg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CutKind {
    Azimuth,
    Elevation,
}

/// A sampled 1-D pattern slice in dB relative to its own peak.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternCut {
    kind: CutKind,
    fixed_angle_deg: f64,
    step_deg: f64,
    samples: Vec<(f64, f64)>,
}

impl PatternCut {
    fn from_uniform(kind: CutKind, fixed_angle_deg: f64, step_deg: f64, mut samples: Vec<(f64, f64)>) -> Self {
        normalize_peak(&mut samples);
        Self { kind, fixed_angle_deg, step_deg, samples }
    }

    /// Builds a cut from arbitrary `(angle, dB)` samples, checking the angle
    /// grid is strictly increasing and uniform and renormalizing the peak to 0.
    pub fn from_samples(kind: CutKind, fixed_angle_deg: f64, samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 3 {
            return Err(domain!("a cut needs at least three samples, got {}", samples.len()));
        }
        let step = (samples[samples.len() - 1].0 - samples[0].0) / (samples.len() - 1) as f64;
        if !(step > 0.0) {
            return Err(domain!("cut angles must be strictly increasing"));
        }
        for (i, w) in samples.windows(2).enumerate() {
            let d = w[1].0 - w[0].0;
            if !(d > 0.0) || (d - step).abs() > 1e-6 * step {
                return Err(domain!("cut angles are not uniformly spaced at sample {}", i + 1));
            }
        }
        if let Some(bad) = samples.iter().find(|s| !s.1.is_finite() || !s.0.is_finite()) {
            return Err(domain!("non-finite cut sample {:?}", bad));
        }
        Ok(Self::from_uniform(kind, fixed_angle_deg, step, samples))
    }

    pub fn kind(&self) -> CutKind {
        self.kind
    }

    pub fn fixed_angle_deg(&self) -> f64 {
        self.fixed_angle_deg
    }

    pub fn step_deg(&self) -> f64 {
        self.step_deg
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.samples.iter().enumerate() {
            if s.1 > self.samples[best].1 {
                best = i;
            }
        }
        best
    }
}

fn normalize_peak(samples: &mut [(f64, f64)]) {
    let peak = samples.iter().fold(f64::NEG_INFINITY, |m, s| m.max(s.1));
    for s in samples.iter_mut() {
        s.1 = (s.1 - peak).max(MIN_DB);
    }
}

fn interior_peak(cut: &PatternCut) -> Result<usize> {
    let p = cut.peak_index();
    if p == 0 || p + 1 == cut.samples.len() {
        return Err(measurement!("cut peak sits on the span edge at {:.4} deg", cut.samples[p].0));
    }
    Ok(p)
}

/// Angular distance between the half-power crossings either side of the peak,
/// interpolated linearly in dB.
pub fn measure_beamwidth(cut: &PatternCut) -> Result<f64> {
    let s = &cut.samples;
    let p = interior_peak(cut)?;
    let crossing = |below: usize, above: usize| {
        let (a0, m0) = s[below];
        let (a1, m1) = s[above];
        a0 + (HALF_POWER_DB - m0) / (m1 - m0) * (a1 - a0)
    };
    let left = (0..p)
        .rev()
        .find(|&i| s[i].1 <= HALF_POWER_DB)
        .map(|i| crossing(i, i + 1))
        .ok_or_else(|| measurement!("no half-power crossing below the peak"))?;
    let right = (p + 1..s.len())
        .find(|&i| s[i].1 <= HALF_POWER_DB)
        .map(|i| crossing(i, i - 1))
        .ok_or_else(|| measurement!("no half-power crossing above the peak"))?;
    Ok(right - left)
}

/// Where sidelobes are searched for, in sine space around the main lobe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SllWindow {
    /// Grating-lobe period `lambda / pitch` along the cut. `None` searches
    /// the whole cut.
    pub grating_period: Option<f64>,
}

impl SllWindow {
    pub const UNBOUNDED: SllWindow = SllWindow { grating_period: None };

    pub fn for_geometry(geometry: &ArrayGeometry, kind: CutKind) -> Self {
        let pitch = match kind {
            CutKind::Azimuth => geometry.pitch_x(),
            CutKind::Elevation => geometry.pitch_y(),
        };
        Self { grating_period: Some(geometry.wavelength() / pitch) }
    }
}

/// Highest sidelobe (dB, relative to peak) outside the main lobe.
///
/// The main lobe runs from the peak down to the first local minimum on each
/// side. With a grating period `P`, only samples within `P` of the peak (in
/// sine space) count, and the neighborhoods of the first grating lobes,
/// as wide as the null-to-null main lobe, are skipped.
pub fn measure_sll(cut: &PatternCut, window: &SllWindow) -> Result<f64> {
    let s = &cut.samples;
    let p = interior_peak(cut)?;
    let mut lo = p;
    while lo > 0 && s[lo - 1].1 < s[lo].1 {
        lo -= 1;
    }
    let mut hi = p;
    while hi + 1 < s.len() && s[hi + 1].1 < s[hi].1 {
        hi += 1;
    }
    let sine = |i: usize| libm::sin(s[i].0.to_radians());
    let peak_s = sine(p);
    let half_null_width = 0.5 * (sine(hi) - sine(lo));
    let in_window = |i: usize| match window.grating_period {
        None => true,
        Some(period) => {
            let d = sine(i) - peak_s;
            d.abs() <= period && (d - period).abs() >= half_null_width && (d + period).abs() >= half_null_width
        }
    };
    (1..s.len() - 1)
        .filter(|&i| i < lo || i > hi)
        .filter(|&i| s[i].1 > s[i - 1].1 && s[i].1 >= s[i + 1].1)
        .filter(|&i| in_window(i))
        .map(|i| s[i].1)
        .reduce(f64::max)
        .ok_or_else(|| measurement!("no sidelobe inside the measurement window"))
}
