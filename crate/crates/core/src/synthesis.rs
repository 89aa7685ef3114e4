//! Weight synthesis: progressive steering phases, separable Dolph-Chebyshev
//! amplitude taper, centered aperture masks and null injection.

use crate::error::{domain, Error, Result};
use crate::geometry::ArrayGeometry;
use crate::pattern::{cis, Direction};
use crate::weights::WeightMatrix;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

/// Design SLL at or above which the taper degenerates to uniform (the
/// first sidelobe of a uniform line array).
pub const UNIFORM_SLL_DB: f64 = -13.26;

/// Design knobs for one beam.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthesisParams {
    /// Steering direction (theta0, phi0) in radians.
    pub steer: (f64, f64),
    pub taper_sll_az: f64,
    pub taper_sll_el: f64,
    pub active_rows: usize,
    pub active_cols: usize,
    pub power_scale: f64,
    /// Null directions (theta, phi) in radians.
    #[cfg_attr(feature = "serde", serde(default))]
    pub nulls: Vec<(f64, f64)>,
}

/// Admissible design SLL range in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaperBounds {
    pub min_db: f64,
    pub max_db: f64,
}

impl Default for TaperBounds {
    fn default() -> Self {
        Self { min_db: -60.0, max_db: -13.0 }
    }
}

impl SynthesisParams {
    pub fn steer_direction(&self) -> Direction {
        Direction::from_theta_phi(self.steer.0, self.steer.1)
    }

    pub fn validate(&self, geometry: &ArrayGeometry, bounds: TaperBounds) -> Result<()> {
        let (p, q) = geometry.subarray_grid();
        if !(1..=p).contains(&self.active_rows) || !(1..=q).contains(&self.active_cols) {
            return Err(domain!(
                "active window {}x{} must fit in the {p}x{q} grid",
                self.active_rows,
                self.active_cols
            ));
        }
        for sll in [self.taper_sll_az, self.taper_sll_el] {
            if !(sll >= bounds.min_db && sll <= bounds.max_db) {
                return Err(domain!("taper SLL {sll} dB outside [{}, {}]", bounds.min_db, bounds.max_db));
            }
        }
        if !(self.power_scale > 0.0 && self.power_scale.is_finite()) {
            return Err(domain!("power scale must be positive, got {}", self.power_scale));
        }
        Ok(())
    }
}

/// Progressive phases placing the outer-array peak at `steer`, for every
/// element of the grid (raw, not wrapped). Elements outside the centered
/// `aperture = (rows, cols)` window get phase 0.
pub fn steering_phases(geometry: &ArrayGeometry, steer: Direction, aperture: (usize, usize)) -> Result<Vec<f64>> {
    let (p, q) = geometry.subarray_grid();
    if aperture.0 > p || aperture.1 > q {
        return Err(domain!("aperture {:?} exceeds the {p}x{q} grid", aperture));
    }
    let (rows, cols) = window(p, q, aperture.0, aperture.1);
    let k = geometry.wavenumber();
    let mut phases = vec![0.0; p * q];
    for r in rows.clone() {
        for c in cols.clone() {
            phases[r * q + c] = -k * (geometry.column_x(c) * steer.u + geometry.row_y(r) * steer.v);
        }
    }
    Ok(phases)
}

/// Row and column ranges of a centered `rows x cols` window.
pub fn window(p: usize, q: usize, rows: usize, cols: usize) -> (core::ops::Range<usize>, core::ops::Range<usize>) {
    let r0 = (p - rows) / 2;
    let c0 = (q - cols) / 2;
    (r0..r0 + rows, c0..c0 + cols)
}

/// Dolph-Chebyshev taper of `length` elements for the given design sidelobe
/// level (dB, negative), normalized to unit peak. Levels at or above
/// [`UNIFORM_SLL_DB`] return a uniform taper.
pub fn chebyshev_taper(length: usize, design_sll_db: f64) -> Result<Vec<f64>> {
    if length < 2 {
        return Err(domain!("Chebyshev taper needs at least 2 elements, got {length}"));
    }
    if !(design_sll_db < 0.0) {
        return Err(domain!("design SLL must be negative, got {design_sll_db}"));
    }
    if length == 2 || design_sll_db >= UNIFORM_SLL_DB {
        return Ok(vec![1.0; length]);
    }
    let m = length;
    let order = (m - 1) as f64;
    let ratio = libm::pow(10.0, -design_sll_db / 20.0);
    let beta = libm::cosh(libm::acosh(ratio) / order);
    let odd = m % 2 == 1;

    // Chebyshev polynomial sampled at the DFT points of the pattern.
    let samples: Vec<Complex64> = (0..m)
        .map(|k| {
            let x = beta * libm::cos(PI * k as f64 / m as f64);
            let t = if x > 1.0 {
                libm::cosh(order * libm::acosh(x))
            } else if x < -1.0 {
                let sign = if odd { 1.0 } else { -1.0 };
                sign * libm::cosh(order * libm::acosh(-x))
            } else {
                libm::cos(order * libm::acos(x))
            };
            if odd {
                Complex64::new(t, 0.0)
            } else {
                Complex64::new(t, 0.0) * cis(PI * k as f64 / m as f64)
            }
        })
        .collect();
    let dft = |n: usize| -> f64 {
        samples
            .iter()
            .enumerate()
            .map(|(k, s)| (s * cis(-2.0 * PI * (k * n % m) as f64 / m as f64)).re)
            .sum()
    };
    let half: Vec<f64> = if odd { (0..m.div_ceil(2)).map(dft).collect() } else { (0..=m / 2).map(dft).collect() };
    let mut taper: Vec<f64> = if odd {
        half[1..].iter().rev().chain(half.iter()).copied().collect()
    } else {
        half[1..].iter().rev().chain(half[1..].iter()).copied().collect()
    };
    let peak = taper.iter().fold(0.0_f64, |a, &b| a.max(b));
    for t in &mut taper {
        *t /= peak;
    }
    Ok(taper)
}

/// Approximate half-power width in direction-cosine units of the active
/// aperture along each axis, `0.886 lambda / L`.
fn aperture_beamwidths(geometry: &ArrayGeometry, weights: &WeightMatrix) -> (f64, f64) {
    let (rows, cols) = weights
        .active_bounds()
        .map(|(r, c)| (r.len(), c.len()))
        .unwrap_or((geometry.rows(), geometry.cols()));
    let lambda = geometry.wavelength();
    (
        0.886 * lambda / (cols as f64 * geometry.pitch_x()),
        0.886 * lambda / (rows as f64 * geometry.pitch_y()),
    )
}

/// Forces a pattern zero toward `null_dir` by projecting the excitations
/// off the unit steering vector toward the null (over the active mask).
/// Rejects nulls within one beamwidth of `steer`.
pub fn inject_null(
    geometry: &ArrayGeometry,
    weights: &WeightMatrix,
    steer: Direction,
    null_dir: Direction,
) -> Result<WeightMatrix> {
    if (weights.rows(), weights.cols()) != geometry.subarray_grid() {
        return Err(domain!("weights do not match the geometry grid"));
    }
    let (bw_u, bw_v) = aperture_beamwidths(geometry, weights);
    let du = (null_dir.u - steer.u) / bw_u;
    let dv = (null_dir.v - steer.v) / bw_v;
    if du * du + dv * dv <= 1.0 {
        return Err(Error::Rejected(format!(
            "null at (u={:.5}, v={:.5}) lies within one beamwidth of the main beam",
            null_dir.u, null_dir.v
        )));
    }
    let k = geometry.wavenumber();
    let q = geometry.cols();
    let w = weights.excitations();
    let s: Vec<Complex64> = (0..w.len())
        .map(|i| {
            if weights.active()[i] {
                let (r, c) = (i / q, i % q);
                cis(-k * (geometry.column_x(c) * null_dir.u + geometry.row_y(r) * null_dir.v))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let ss: f64 = s.iter().map(|x| x.norm_sqr()).sum();
    let sw: Complex64 = s.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
    let alpha = sw / ss;
    let projected: Vec<Complex64> = w.iter().zip(&s).map(|(wi, si)| wi - alpha * si).collect();
    WeightMatrix::from_complex(
        weights.rows(),
        weights.cols(),
        &projected,
        weights.active().to_vec(),
        weights.per_element_power(),
    )
}

/// Builds the weight matrix for `params`: separable taper over the centered
/// active window, steering phases, nulls, then power scaling (1 W per chain
/// at unit scale).
pub fn synthesize(geometry: &ArrayGeometry, params: &SynthesisParams) -> Result<WeightMatrix> {
    synthesize_with_bounds(geometry, params, TaperBounds::default())
}

pub fn synthesize_with_bounds(geometry: &ArrayGeometry, params: &SynthesisParams, bounds: TaperBounds) -> Result<WeightMatrix> {
    params.validate(geometry, bounds)?;
    let (p, q) = geometry.subarray_grid();
    let col_taper = taper_or_single(params.active_cols, params.taper_sll_az)?;
    let row_taper = taper_or_single(params.active_rows, params.taper_sll_el)?;
    let (rows, cols) = window(p, q, params.active_rows, params.active_cols);
    let steer = params.steer_direction();
    let phases = steering_phases(geometry, steer, (params.active_rows, params.active_cols))?;
    let mut amplitudes = vec![0.0; p * q];
    let mut active = vec![false; p * q];
    for (i, r) in rows.clone().enumerate() {
        for (j, c) in cols.clone().enumerate() {
            amplitudes[r * q + c] = row_taper[i] * col_taper[j];
            active[r * q + c] = true;
        }
    }
    let mut weights = WeightMatrix::new(p, q, amplitudes, phases, active, params.power_scale)?;
    for &(theta, phi) in &params.nulls {
        weights = inject_null(geometry, &weights, steer, Direction::from_theta_phi(theta, phi))?;
    }
    Ok(weights)
}

fn taper_or_single(n: usize, sll: f64) -> Result<Vec<f64>> {
    if n == 1 {
        Ok(vec![1.0])
    } else {
        chebyshev_taper(n, sll)
    }
}
