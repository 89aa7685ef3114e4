//! Planar DRA geometry and array dimensioning.
//!
//! The controllable aperture is a `rows x cols` grid of RF chains. Each RF
//! chain drives a uniform subarray of physical elements; subarrays tile the
//! aperture contiguously, so the subarray pitch is the element pitch times the
//! subarray size along each axis. Columns run along x (azimuth), rows along y
//! (elevation).

use crate::error::{domain, Result};
use core::f64::consts::{FRAC_1_SQRT_2, PI};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    carrier_frequency_hz: f64,
    wavelength_m: f64,
    /// RF-chain grid as (rows, cols).
    subarray_grid: (usize, usize),
    /// Physical elements per subarray as (rows, cols).
    element_grid: (usize, usize),
    element_pitch_m: f64,
    efficiency: f64,
    element_exponent: f64,
}

impl Default for ArrayGeometry {
    /// 19 GHz, 36x36 RF chains of 4x4 elements at 7/8 wavelength (3.5
    /// wavelength subarray pitch), 90% efficiency, cos(theta) element.
    fn default() -> Self {
        let wavelength = SPEED_OF_LIGHT / 19.0e9;
        Self::new(19.0e9, (36, 36), (4, 4), 0.875 * wavelength, 0.9, 1.0)
            .expect("default geometry is valid")
    }
}

impl ArrayGeometry {
    pub fn new(
        carrier_frequency_hz: f64,
        subarray_grid: (usize, usize),
        element_grid: (usize, usize),
        element_pitch_m: f64,
        efficiency: f64,
        element_exponent: f64,
    ) -> Result<Self> {
        if !(carrier_frequency_hz > 0.0 && carrier_frequency_hz.is_finite()) {
            return Err(domain!("carrier frequency must be positive, got {carrier_frequency_hz}"));
        }
        if subarray_grid.0 == 0 || subarray_grid.1 == 0 || element_grid.0 == 0 || element_grid.1 == 0 {
            return Err(domain!("grids must be non-empty"));
        }
        if !(element_pitch_m > 0.0 && element_pitch_m.is_finite()) {
            return Err(domain!("element pitch must be positive, got {element_pitch_m}"));
        }
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(domain!("efficiency must lie in (0, 1], got {efficiency}"));
        }
        if !(element_exponent >= 0.0 && element_exponent.is_finite()) {
            return Err(domain!("element exponent must be >= 0, got {element_exponent}"));
        }
        Ok(Self {
            carrier_frequency_hz,
            wavelength_m: SPEED_OF_LIGHT / carrier_frequency_hz,
            subarray_grid,
            element_grid,
            element_pitch_m,
            efficiency,
            element_exponent,
        })
    }

    /// Same geometry with a different RF-chain grid.
    pub fn with_subarray_grid(&self, rows: usize, cols: usize) -> Result<Self> {
        Self::new(
            self.carrier_frequency_hz,
            (rows, cols),
            self.element_grid,
            self.element_pitch_m,
            self.efficiency,
            self.element_exponent,
        )
    }

    /// Same geometry with a different element pattern exponent.
    pub fn with_element_exponent(&self, q: f64) -> Result<Self> {
        Self::new(
            self.carrier_frequency_hz,
            self.subarray_grid,
            self.element_grid,
            self.element_pitch_m,
            self.efficiency,
            q,
        )
    }

    pub fn carrier_frequency_hz(&self) -> f64 {
        self.carrier_frequency_hz
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength_m
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength_m
    }

    pub fn rows(&self) -> usize {
        self.subarray_grid.0
    }

    pub fn cols(&self) -> usize {
        self.subarray_grid.1
    }

    pub fn subarray_grid(&self) -> (usize, usize) {
        self.subarray_grid
    }

    pub fn element_grid(&self) -> (usize, usize) {
        self.element_grid
    }

    pub fn element_pitch(&self) -> f64 {
        self.element_pitch_m
    }

    /// Subarray pitch along x (between columns).
    pub fn pitch_x(&self) -> f64 {
        self.element_grid.1 as f64 * self.element_pitch_m
    }

    /// Subarray pitch along y (between rows).
    pub fn pitch_y(&self) -> f64 {
        self.element_grid.0 as f64 * self.element_pitch_m
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn element_exponent(&self) -> f64 {
        self.element_exponent
    }

    pub fn element_count(&self) -> usize {
        self.subarray_grid.0 * self.subarray_grid.1
    }

    /// Centered x coordinate of column `c` in meters.
    pub fn column_x(&self, c: usize) -> f64 {
        (c as f64 - (self.cols() as f64 - 1.0) / 2.0) * self.pitch_x()
    }

    /// Centered y coordinate of row `r` in meters.
    pub fn row_y(&self, r: usize) -> f64 {
        (r as f64 - (self.rows() as f64 - 1.0) / 2.0) * self.pitch_y()
    }

    /// Physical aperture area (all subarrays) in square meters.
    pub fn aperture_area(&self) -> f64 {
        self.cols() as f64 * self.pitch_x() * self.rows() as f64 * self.pitch_y()
    }
}

/// Positive root of `sin(x)/x = 1/sqrt(2)`, found by bisection on `(0, pi)`.
pub fn asinc_inv_sqrt2() -> f64 {
    let f = |x: f64| libm::sin(x) / x - FRAC_1_SQRT_2;
    let (mut lo, mut hi) = (1e-9, PI);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Elements per side of a square array reaching `beamwidth` (radians) with
/// the given pitch, wavelength and efficiency.
pub fn dimension_array(beamwidth: f64, element_pitch: f64, wavelength: f64, efficiency: f64) -> Result<usize> {
    for (name, v) in [
        ("beamwidth", beamwidth),
        ("element pitch", element_pitch),
        ("wavelength", wavelength),
        ("efficiency", efficiency),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(domain!("{name} must be positive, got {v}"));
        }
    }
    if efficiency > 1.0 {
        return Err(domain!("efficiency must be <= 1, got {efficiency}"));
    }
    let n = dimension_array_raw(beamwidth, element_pitch, wavelength, efficiency);
    // Absorb floating noise at exact integers so inverted beamwidths round trip.
    Ok(libm::ceil(n - 1e-9) as usize)
}

pub(crate) fn dimension_array_raw(beamwidth: f64, element_pitch: f64, wavelength: f64, efficiency: f64) -> f64 {
    asinc_inv_sqrt2() * wavelength / (efficiency * beamwidth * 2.0 * element_pitch)
}
