//! Pattern metrics (beamwidth, SLL, EIRP) for a fixed geometry.

use crate::directivity::{radiated_integral_grid, DirectivityKernel, QuadratureGrid};
use crate::error::{domain, Result};
use crate::geometry::ArrayGeometry;
use crate::pattern::{
    measure_beamwidth, measure_sll, CutKind, Direction, ExcitedArray, PatternCut, SllWindow, DEFAULT_HALF_SPAN_DEG,
    DEFAULT_STEP_DEG,
};
use crate::weights::WeightMatrix;
use core::f64::consts::PI;

/// Measured beam quantities. Angles in degrees, levels in dB / dBW.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PatternMetrics {
    pub beamwidth_az: f64,
    pub beamwidth_el: f64,
    pub sll_az: f64,
    pub sll_el: f64,
    pub eirp: f64,
    pub peak_el: f64,
    pub peak_az: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirectivityMethod {
    /// Element-lattice autocorrelation against a tabulated radial kernel.
    Lattice,
    /// Brute-force trapezoidal quadrature; slow for large apertures.
    Grid(QuadratureGrid),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutConfig {
    pub half_span_deg: f64,
    pub step_deg: f64,
}

impl Default for CutConfig {
    fn default() -> Self {
        Self { half_span_deg: DEFAULT_HALF_SPAN_DEG, step_deg: DEFAULT_STEP_DEG }
    }
}

/// Geometry plus everything precomputed to measure patterns on it.
#[derive(Debug, Clone)]
pub struct PatternEngine {
    geometry: ArrayGeometry,
    kernel: DirectivityKernel,
    method: DirectivityMethod,
    cut: CutConfig,
}

impl PatternEngine {
    pub fn new(geometry: ArrayGeometry) -> Self {
        let kernel = DirectivityKernel::new(&geometry);
        Self { geometry, kernel, method: DirectivityMethod::Lattice, cut: CutConfig::default() }
    }

    pub fn with_cut(mut self, cut: CutConfig) -> Self {
        self.cut = cut;
        self
    }

    pub fn with_directivity_method(mut self, method: DirectivityMethod) -> Self {
        self.method = method;
        self
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn cut_config(&self) -> CutConfig {
        self.cut
    }

    pub fn excite(&self, weights: &WeightMatrix) -> Result<ExcitedArray<'_>> {
        ExcitedArray::new(&self.geometry, weights)
    }

    fn directivity_of(&self, array: &ExcitedArray<'_>, weights: &WeightMatrix, dir: Direction) -> Result<f64> {
        if weights.active_count() == 0 {
            return Err(domain!("no active elements"));
        }
        let integral = match self.method {
            DirectivityMethod::Lattice => self.kernel.radiated_integral(weights)?,
            DirectivityMethod::Grid(grid) => radiated_integral_grid(array, grid)?,
        };
        if !(integral > 0.0) {
            return Err(domain!("pattern radiates no power"));
        }
        Ok(10.0 * libm::log10(4.0 * PI * array.power(dir) / integral))
    }

    /// Directivity in dBi toward `dir`.
    pub fn directivity(&self, weights: &WeightMatrix, dir: Direction) -> Result<f64> {
        let array = self.excite(weights)?;
        self.directivity_of(&array, weights, dir)
    }

    /// EIRP in dBW toward `steer`: radiated power plus directivity.
    pub fn eirp(&self, weights: &WeightMatrix, steer: Direction) -> Result<f64> {
        let array = self.excite(weights)?;
        self.eirp_of(&array, weights, steer)
    }

    fn eirp_of(&self, array: &ExcitedArray<'_>, weights: &WeightMatrix, steer: Direction) -> Result<f64> {
        let d = self.directivity_of(array, weights, steer)?;
        Ok(10.0 * libm::log10(weights.radiated_power()) + d)
    }

    /// Azimuth and elevation cuts through the beam peak, using this engine's
    /// cut configuration. The peak is searched from `hint` (or from a coarse
    /// scan of the default field of view when `None`).
    pub fn cuts(&self, weights: &WeightMatrix, hint: Option<Direction>) -> Result<(Direction, PatternCut, PatternCut)> {
        let array = self.excite(weights)?;
        self.cuts_of(&array, hint)
    }

    fn cuts_of(&self, array: &ExcitedArray<'_>, hint: Option<Direction>) -> Result<(Direction, PatternCut, PatternCut)> {
        let start = hint.unwrap_or_else(|| array.scan_peak(DEFAULT_HALF_SPAN_DEG, 0.1));
        let peak = array.find_peak(start);
        let center = (peak.el_deg(), peak.az_deg());
        let az = array.cut(CutKind::Azimuth, center, self.cut.half_span_deg, self.cut.step_deg)?;
        let el = array.cut(CutKind::Elevation, center, self.cut.half_span_deg, self.cut.step_deg)?;
        Ok((peak, az, el))
    }

    /// Beamwidths and SLLs on the two principal cuts through the peak, and
    /// the EIRP toward the peak.
    pub fn measure(&self, weights: &WeightMatrix, hint: Option<Direction>) -> Result<PatternMetrics> {
        if weights.active_count() == 0 {
            return Err(domain!("no active elements"));
        }
        let array = self.excite(weights)?;
        let (peak, az, el) = self.cuts_of(&array, hint)?;
        Ok(PatternMetrics {
            beamwidth_az: measure_beamwidth(&az)?,
            beamwidth_el: measure_beamwidth(&el)?,
            sll_az: measure_sll(&az, &SllWindow::for_geometry(&self.geometry, CutKind::Azimuth))?,
            sll_el: measure_sll(&el, &SllWindow::for_geometry(&self.geometry, CutKind::Elevation))?,
            eirp: self.eirp_of(&array, weights, peak)?,
            peak_el: peak.el_deg(),
            peak_az: peak.az_deg(),
        })
    }
}

/// EIRP (dBW) toward `steer` for a one-off evaluation. Builds a
/// [`PatternEngine`]; reuse one when evaluating many matrices.
pub fn compute_eirp(geometry: &ArrayGeometry, weights: &WeightMatrix, steer: Direction) -> Result<f64> {
    PatternEngine::new(geometry.clone()).eirp(weights, steer)
}
